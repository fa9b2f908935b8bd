//! Training costs over the output local fields.
//!
//! Every cost is a sum of independent per-(sample, output) terms, which is
//! what lets the trainer price a proposal by summing term differences over
//! the `L x P` fields it touches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Margin, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// RMS regression error.
    Fe,
    /// Steep margin: penalize only `h s < d`.
    F1,
    /// Gauss margin: pull every `h s` onto `d`.
    F2,
    /// Band margin: pull `h s` into `[d1, d2]`.
    F3,
    /// Pairwise margin `h_ν - h_l = d` for the true class ν.
    F2bar,
}

impl CostKind {
    pub fn name(&self) -> &'static str {
        match self {
            CostKind::Fe => "fe",
            CostKind::F1 => "f1",
            CostKind::F2 => "f2",
            CostKind::F3 => "f3",
            CostKind::F2bar => "f2bar",
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, CostKind::Fe)
    }

    /// Stop threshold used when a config does not give one.
    pub fn default_gamma0(&self) -> f64 {
        match self {
            CostKind::Fe | CostKind::F1 | CostKind::F3 => 1e-4,
            CostKind::F2 | CostKind::F2bar => 1.0,
        }
    }
}

impl std::str::FromStr for CostKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fe" => Ok(CostKind::Fe),
            "f1" => Ok(CostKind::F1),
            "f2" => Ok(CostKind::F2),
            "f3" => Ok(CostKind::F3),
            "f2bar" => Ok(CostKind::F2bar),
            other => Err(format!("unknown cost {other:?}")),
        }
    }
}

/// A cost kind with its margin parameters filled in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    Fe,
    F1 { d: f64 },
    F2 { d: f64 },
    F3 { lo: f64, hi: f64 },
    F2bar { d: f64 },
}

impl Objective {
    pub fn bind(kind: CostKind, margin: Margin) -> Result<Self> {
        Ok(match (kind, margin) {
            (CostKind::Fe, _) => Objective::Fe,
            (CostKind::F3, Margin::Band([lo, hi])) => Objective::F3 { lo, hi },
            (CostKind::F3, Margin::Single(_)) => {
                return Err(Error::InvalidControl(
                    "cost F3 needs a margin band [d1, d2]".into(),
                ))
            }
            (CostKind::F1, m) => Objective::F1 { d: m.d() },
            (CostKind::F2, m) => Objective::F2 { d: m.d() },
            (CostKind::F2bar, m) => Objective::F2bar { d: m.d() },
        })
    }

    pub fn kind(&self) -> CostKind {
        match self {
            Objective::Fe => CostKind::Fe,
            Objective::F1 { .. } => CostKind::F1,
            Objective::F2 { .. } => CostKind::F2,
            Objective::F3 { .. } => CostKind::F3,
            Objective::F2bar { .. } => CostKind::F2bar,
        }
    }

    pub fn check_task(&self, dataset: &Dataset) -> Result<()> {
        match (self, dataset.task()) {
            (Objective::Fe, Task::Regression { .. }) => Ok(()),
            (Objective::Fe, _) => Err(Error::TaskMismatch {
                cost: "fe",
                expected: "regression",
            }),
            (_, Task::Classification { .. }) => Ok(()),
            (o, _) => Err(Error::TaskMismatch {
                cost: o.kind().name(),
                expected: "classification",
            }),
        }
    }

    /// Turns a raw term sum into the cost value.
    #[inline]
    pub fn normalize(&self, sum: f64, samples: usize, outputs: usize) -> f64 {
        match self {
            Objective::Fe => (sum.max(0.0) / samples as f64).sqrt(),
            _ => sum / (samples * outputs) as f64,
        }
    }

    /// Penalty of one `u = h s` pair (margin costs other than F2bar).
    #[inline]
    pub fn pair_penalty(&self, u: f64) -> f64 {
        match *self {
            Objective::F1 { d } => {
                if u < d {
                    (u - d) * (u - d)
                } else {
                    0.0
                }
            }
            Objective::F2 { d } => (u - d) * (u - d),
            Objective::F3 { lo, hi } => {
                if u < lo {
                    (u - lo) * (u - lo)
                } else if u > hi {
                    (u - hi) * (u - hi)
                } else {
                    0.0
                }
            }
            Objective::Fe | Objective::F2bar { .. } => unreachable!("not a pair cost"),
        }
    }
}

/// Unnormalized term sum for output local fields `h_out` laid out `L x P`
/// (row `l` holds output `l` for every sample).
pub fn raw_sum(objective: &Objective, h_out: &[f64], dataset: &Dataset) -> Result<f64> {
    objective.check_task(dataset)?;
    let p = dataset.len();
    let l_dim = dataset.output_dim();
    if h_out.len() != p * l_dim {
        return Err(Error::DimMismatch(format!(
            "{} output fields for {p} samples x {l_dim} outputs",
            h_out.len()
        )));
    }
    let mut sum = 0.0;
    match objective {
        Objective::Fe => {
            let t = dataset.targets().expect("checked");
            for l in 0..l_dim {
                for mu in 0..p {
                    let r = t[mu * l_dim + l] - h_out[l * p + mu];
                    sum += r * r;
                }
            }
        }
        Objective::F2bar { d } => {
            let labels = dataset.labels().expect("checked");
            for (mu, &nu) in labels.iter().enumerate() {
                for l in (0..l_dim).filter(|&l| l != nu) {
                    let e = h_out[nu * p + mu] - h_out[l * p + mu] - d;
                    sum += e * e;
                }
            }
        }
        pair => {
            for l in 0..l_dim {
                for mu in 0..p {
                    sum += pair.pair_penalty(h_out[l * p + mu] * dataset.sign(mu, l));
                }
            }
        }
    }
    Ok(sum)
}

/// Cost value of output fields `h_out` (`L x P`) on `dataset`.
pub fn cost(objective: &Objective, h_out: &[f64], dataset: &Dataset) -> Result<f64> {
    let sum = raw_sum(objective, h_out, dataset)?;
    Ok(objective.normalize(sum, dataset.len(), dataset.output_dim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class(p: usize) -> Dataset {
        Dataset::classification(vec![0.0; p], 1, (0..p).map(|mu| mu % 2).collect(), 2).unwrap()
    }

    /// Field layout `L x P` with `h s = u` everywhere.
    fn fields_with_margin(ds: &Dataset, u: f64) -> Vec<f64> {
        let (p, l_dim) = (ds.len(), ds.output_dim());
        let mut h = vec![0.0; p * l_dim];
        for l in 0..l_dim {
            for mu in 0..p {
                h[l * p + mu] = u * ds.sign(mu, l);
            }
        }
        h
    }

    #[test]
    fn satisfied_margins_cost_nothing() {
        let ds = two_class(4);
        let f1 = Objective::F1 { d: 2.0 };
        assert_eq!(cost(&f1, &fields_with_margin(&ds, 2.5), &ds).unwrap(), 0.0);
        let f2 = Objective::F2 { d: 2.0 };
        assert_eq!(cost(&f2, &fields_with_margin(&ds, 2.0), &ds).unwrap(), 0.0);
        let f3 = Objective::F3 { lo: 1.0, hi: 3.0 };
        assert_eq!(cost(&f3, &fields_with_margin(&ds, 2.0), &ds).unwrap(), 0.0);
    }

    #[test]
    fn single_violated_term() {
        // P = 1, L = 1 is not a valid classification set, so use L = 2 with
        // one satisfied output and read the single term off the sum.
        let ds = Dataset::classification(vec![0.0], 1, vec![0], 2).unwrap();
        let d = 5.0;
        // output 0 (s = +1) at h = d - 2, output 1 (s = -1) at h = -d (met)
        let h = vec![d - 2.0, -d];
        assert_eq!(raw_sum(&Objective::F1 { d }, &h, &ds).unwrap(), 4.0);
        assert_eq!(cost(&Objective::F1 { d }, &h, &ds).unwrap(), 2.0);
    }

    #[test]
    fn f1_vs_f2_difference() {
        let ds = two_class(2);
        let h = fields_with_margin(&ds, 4.0);
        assert_eq!(cost(&Objective::F1 { d: 3.0 }, &h, &ds).unwrap(), 0.0);
        assert_eq!(cost(&Objective::F2 { d: 3.0 }, &h, &ds).unwrap(), 1.0);
    }

    #[test]
    fn band_penalties_are_continuous_at_edges() {
        let f3 = Objective::F3 { lo: 1.0, hi: 3.0 };
        assert_eq!(f3.pair_penalty(0.0), 1.0);
        assert_eq!(f3.pair_penalty(5.0), 4.0);
        assert!(f3.pair_penalty(3.0 + 1e-9) < 1e-17);
        assert!(f3.pair_penalty(1.0 - 1e-9) < 1e-17);
        assert!(Objective::bind(CostKind::F3, Margin::Single(1.0)).is_err());
    }

    #[test]
    fn f2bar_ignores_offset() {
        let ds = two_class(2);
        // label 0 at mu=0, label 1 at mu=1; h_ν - h_other = 3 regardless of shift
        let h = vec![13.0, 10.0, 10.0, 13.0];
        assert_eq!(cost(&Objective::F2bar { d: 3.0 }, &h, &ds).unwrap(), 0.0);
        assert_eq!(raw_sum(&Objective::F2bar { d: 1.0 }, &h, &ds).unwrap(), 8.0);
    }

    #[test]
    fn regression_error() {
        let ds = Dataset::regression(vec![0.0, 1.0], 1, vec![1.0, 2.0], 1).unwrap();
        assert_eq!(cost(&Objective::Fe, &[1.0, 2.0], &ds).unwrap(), 0.0);
        let fe = cost(&Objective::Fe, &[1.0, 0.0], &ds).unwrap();
        assert!((fe - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kind_task_mismatch() {
        let reg = Dataset::regression(vec![0.0], 1, vec![1.0], 1).unwrap();
        assert!(matches!(
            cost(&Objective::F1 { d: 1.0 }, &[0.0], &reg),
            Err(Error::TaskMismatch { .. })
        ));
        let cls = two_class(2);
        assert!(cost(&Objective::Fe, &[0.0; 4], &cls).is_err());
    }
}
