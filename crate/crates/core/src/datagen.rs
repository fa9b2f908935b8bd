//! Synthetic goal functions, their sample sets, and pretreatments that
//! build virtual image samples (noise, shifts, Gaussian smoothing).
//!
//! Image helpers work on raw pixel values (0 = background) so shifted-in
//! borders are blank; rescaling happens afterwards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::risk::uniform_grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "goal", rename_all = "snake_case")]
pub enum GoalKind {
    Sin,
    Sinc1d,
    Hermite5,
    Hermite7,
    Sinc2d,
    /// Period-10 unit square wave `sign(sin(πx/5))`, +1 at its zeros.
    SquareWave,
    /// Sinc targets with additive Gaussian noise of std `sigma`.
    NoisySinc {
        sigma: f64,
    },
}

impl GoalKind {
    pub fn input_dim(&self) -> usize {
        match self {
            GoalKind::Sinc2d => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> String {
        match self {
            GoalKind::Sin => "sin".into(),
            GoalKind::Sinc1d => "sinc".into(),
            GoalKind::Hermite5 => "hermite5".into(),
            GoalKind::Hermite7 => "hermite7".into(),
            GoalKind::Sinc2d => "sinc2d".into(),
            GoalKind::SquareWave => "square".into(),
            GoalKind::NoisySinc { sigma } => format!("noisy_sinc_{sigma}"),
        }
    }
}

fn sinc(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        r.sin() / r
    }
}

/// Noise-free goal value. `NoisySinc` evaluates the clean sinc it was
/// drawn around.
pub fn eval_goal(kind: GoalKind, x: &[f64]) -> f64 {
    assert_eq!(
        x.len(),
        kind.input_dim(),
        "goal {kind:?} takes {} inputs",
        kind.input_dim()
    );
    let t = x[0];
    match kind {
        GoalKind::Sin => t.sin(),
        GoalKind::Sinc1d | GoalKind::NoisySinc { .. } => sinc(t),
        GoalKind::Hermite5 => (63.0 * t.powi(5) - 70.0 * t.powi(3) + 15.0 * t) / 8.0,
        GoalKind::Hermite7 => {
            (429.0 * t.powi(7) - 693.0 * t.powi(5) + 315.0 * t.powi(3) - 35.0 * t) / 16.0
        }
        GoalKind::Sinc2d => sinc(x[0].hypot(x[1])),
        GoalKind::SquareWave => {
            if (std::f64::consts::PI * t / 5.0).sin() >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Uniformly spaced samples of `kind` over `[a, b]` (endpoints included).
///
/// For the 2-D goal `count` is the number of points per axis, giving
/// `count²` samples on the square `[a, b]²`.
pub fn make_training_set(
    kind: GoalKind,
    count: usize,
    interval: (f64, f64),
    seed: u64,
) -> Result<Dataset> {
    let (a, b) = interval;
    if count < 2 || !(b > a) {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 samples on a non-empty interval, got {count} on [{a}, {b}]"
        )));
    }
    let axis = uniform_grid(a, b, count);
    let inputs: Vec<f64> = match kind.input_dim() {
        1 => axis,
        _ => axis
            .iter()
            .flat_map(|&u| axis.iter().flat_map(move |&v| [u, v]))
            .collect(),
    };
    let dim = kind.input_dim();
    let mut targets: Vec<f64> = inputs
        .chunks_exact(dim)
        .map(|x| eval_goal(kind, x))
        .collect();
    if let GoalKind::NoisySinc { sigma } = kind {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidDataset(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut targets {
            *t += normal.sample(&mut rng);
        }
    }
    Dataset::regression(inputs, dim, targets, 1)
}

/// `k` noisy copies of every image (`P x M` raw pixels), Gaussian noise of
/// std `sigma`, no clamping. Copies of image μ occupy rows `μk..μk + k`.
pub fn noise_augment(
    images: &[f64],
    pixels: usize,
    sigma: f64,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || k == 0 || pixels == 0 || !images.len().is_multiple_of(pixels) {
        return Err(Error::InvalidDataset(format!(
            "noise augmentation needs sigma > 0, k >= 1 and whole images (sigma={sigma}, k={k})"
        )));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidDataset(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(images.len() * k);
    for img in images.chunks_exact(pixels) {
        for _ in 0..k {
            out.extend(img.iter().map(|&v| v + normal.sample(&mut rng)));
        }
    }
    Ok(out)
}

/// The eight neighbor offsets `(dx, dy)` used by [`shift_augment`], in
/// output order. `dx` moves columns right, `dy` moves rows down.
pub fn shift_offsets(magnitude: i64) -> [(i64, i64); 8] {
    let m = magnitude;
    [
        (m, 0),
        (-m, 0),
        (0, m),
        (0, -m),
        (m, m),
        (m, -m),
        (-m, m),
        (-m, -m),
    ]
}

/// Moves one `side x side` image by `(dx, dy)`, zero-filling exposed pixels.
pub fn shift_image(img: &[f64], side: usize, dx: i64, dy: i64) -> Vec<f64> {
    let mut out = vec![0.0; side * side];
    let s = side as i64;
    for r in 0..s {
        for c in 0..s {
            let (sr, sc) = (r - dy, c - dx);
            if (0..s).contains(&sr) && (0..s).contains(&sc) {
                out[(r * s + c) as usize] = img[(sr * s + sc) as usize];
            }
        }
    }
    out
}

/// Eight shifted copies of every `side x side` image; copies of image μ
/// occupy rows `8μ..8μ + 8` in [`shift_offsets`] order.
pub fn shift_augment(images: &[f64], side: usize, magnitude: usize) -> Result<Vec<f64>> {
    let px = side * side;
    if magnitude == 0 || px == 0 || !images.len().is_multiple_of(px) {
        return Err(Error::InvalidDataset(format!(
            "shift augmentation needs magnitude >= 1 and whole {side}x{side} images"
        )));
    }
    let offsets = shift_offsets(magnitude as i64);
    let mut out = Vec::with_capacity(images.len() * 8);
    for img in images.chunks_exact(px) {
        for &(dx, dy) in &offsets {
            out.extend(shift_image(img, side, dx, dy));
        }
    }
    Ok(out)
}

/// Normalized 1-D Gaussian kernel of radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// 2-D Gaussian blur of every `side x side` image with zero-padded borders.
/// The truncated kernel is renormalized to unit sum; it is separable, so
/// rows and columns are filtered in turn.
pub fn gaussian_smooth(images: &[f64], side: usize, sigma: f64) -> Result<Vec<f64>> {
    let px = side * side;
    if !(sigma > 0.0) || px == 0 || !images.len().is_multiple_of(px) {
        return Err(Error::InvalidDataset(format!(
            "smoothing needs sigma > 0 and whole {side}x{side} images"
        )));
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let s = side as i64;
    let mut out = Vec::with_capacity(images.len());
    let mut tmp = vec![0.0; px];
    for img in images.chunks_exact(px) {
        for row in 0..s {
            for col in 0..s {
                let mut acc = 0.0;
                for (t, w) in kernel.iter().enumerate() {
                    let c = col + t as i64 - r;
                    if (0..s).contains(&c) {
                        acc += w * img[(row * s + c) as usize];
                    }
                }
                tmp[(row * s + col) as usize] = acc;
            }
        }
        for row in 0..s {
            for col in 0..s {
                let mut acc = 0.0;
                for (t, w) in kernel.iter().enumerate() {
                    let rr = row + t as i64 - r;
                    if (0..s).contains(&rr) {
                        acc += w * tmp[(rr * s + col) as usize];
                    }
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}
