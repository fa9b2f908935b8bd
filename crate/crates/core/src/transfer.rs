//! Hidden-neuron transfer functions and their curvature.
//!
//! The structural risk of a neuron is proportional to `f''`, so every kind
//! comes with its first two derivatives and closed-form bounds on `f''`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransferKind {
    /// `exp(-z^2)`
    Gaussian,
    /// `tanh(z)`
    Sigmoid,
    /// `z^degree`, degree >= 2
    Polynomial { degree: u32 },
}

impl TransferKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TransferKind::Polynomial { degree } if degree < 2 => Err(Error::InvalidControl(
                format!("polynomial degree must be >= 2, got {degree}"),
            )),
            _ => Ok(()),
        }
    }

    /// Transfer value only; the hot path of the trainer.
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            TransferKind::Gaussian => (-z * z).exp(),
            TransferKind::Sigmoid => z.tanh(),
            TransferKind::Polynomial { degree } => z.powi(degree as i32),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TransferKind::Gaussian => "gaussian".into(),
            TransferKind::Sigmoid => "sigmoid".into(),
            TransferKind::Polynomial { degree } => format!("poly{degree}"),
        }
    }
}

/// Value and first two derivatives at one argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferEval {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

pub fn eval_all(kind: TransferKind, z: f64) -> TransferEval {
    match kind {
        TransferKind::Gaussian => {
            let e = (-z * z).exp();
            TransferEval {
                f: e,
                df: -2.0 * z * e,
                d2f: (4.0 * z * z - 2.0) * e,
            }
        }
        TransferKind::Sigmoid => {
            let t = z.tanh();
            let sech2 = 1.0 - t * t;
            TransferEval {
                f: t,
                df: sech2,
                d2f: -2.0 * t * sech2,
            }
        }
        TransferKind::Polynomial { degree } => {
            let n = degree as i32;
            let nf = f64::from(degree);
            TransferEval {
                f: z.powi(n),
                df: nf * z.powi(n - 1),
                d2f: nf * (nf - 1.0) * z.powi(n - 2),
            }
        }
    }
}

/// Bounds `(lo, hi)` on `f''`.
///
/// Gaussian and sigmoid curvature is bounded on the whole real line, so
/// `z_max` is ignored for them. Polynomial curvature grows with `|z|` and is
/// bounded by `±n(n-1) z_max^(n-2)` on `[-z_max, z_max]`.
pub fn curvature_bounds(kind: TransferKind, z_max: Option<f64>) -> Result<(f64, f64)> {
    match kind {
        // f'' = (4z^2 - 2) e^{-z^2}: minimum at z = 0, maximum at z^2 = 3/2.
        TransferKind::Gaussian => Ok((-2.0, 4.0 * (-1.5f64).exp())),
        // f'' = -2t(1 - t^2) with t = tanh z: extrema at t = ∓1/√3.
        TransferKind::Sigmoid => {
            let m = 4.0 / (3.0 * 3f64.sqrt());
            Ok((-m, m))
        }
        TransferKind::Polynomial { degree } => {
            let z = match z_max {
                Some(z) if z.is_finite() && z > 0.0 => z,
                _ => return Err(Error::UnboundedCurvature),
            };
            let nf = f64::from(degree);
            let m = nf * (nf - 1.0) * z.powi(degree as i32 - 2);
            Ok((-m, m))
        }
    }
}
