//! Risk measures.
//!
//! * structural risk: mean absolute second derivative of the outputs with
//!   respect to the inputs, assembled from per-neuron curvature;
//! * design risk: spread of the responses of replica machines trained
//!   identically except for their random initialization;
//! * average fitting error: spread of the same responses around a known goal.
//!
//! Curve norms are RMS over the evaluation grid; scalar responses use the
//! absolute value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Gvm;
use crate::transfer::eval_all;

/// Largest input dimension for which the full `M x M` curvature is formed.
pub const FULL_MODE_MAX_INPUTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskMode {
    /// All `(j, k)` input pairs.
    Full,
    /// Only `j = k`.
    Diagonal,
}

/// `∂²ȳ_i / ∂x_j ∂x_k = β_i² w_ij w_ik f''(β_i h̄_i(x))`.
pub fn neuron_curvature(gvm: &Gvm, i: usize, x: &[f64], j: usize, k: usize) -> f64 {
    let beta = gvm.beta()[i];
    let row = gvm.hidden_row(i);
    let d2f = eval_all(gvm.transfer(), beta * gvm.hidden_field(i, x)).d2f;
    beta * beta * row[j] * row[k] * d2f
}

/// Structural risk of `gvm` averaged over `points` (`K x M`, row-major).
pub fn structural_risk(gvm: &Gvm, points: &[f64], mode: RiskMode) -> Result<f64> {
    let dims = gvm.dims();
    let (m, n, l_dim) = (dims.inputs, dims.hidden, dims.outputs);
    if points.is_empty() || !points.len().is_multiple_of(m) {
        return Err(Error::DimMismatch(format!(
            "{} evaluation values do not form rows of length {m}",
            points.len()
        )));
    }
    if mode == RiskMode::Full && m > FULL_MODE_MAX_INPUTS {
        return Err(Error::UseDiagonal(m));
    }
    let w = gvm.w_hidden();
    let w_out = gvm.w_out();
    let squares: Vec<f64> = w.iter().map(|v| v * v).collect();
    let mut coef = vec![0.0; n];
    let mut acc = vec![0.0; if mode == RiskMode::Full { m * m } else { m }];
    let mut total = 0.0;
    let count = points.len() / m;
    for x in points.chunks_exact(m) {
        for (i, c) in coef.iter_mut().enumerate() {
            let beta = gvm.beta()[i];
            *c = beta * beta * eval_all(gvm.transfer(), beta * gvm.hidden_field(i, x)).d2f;
        }
        let mut point_sum = 0.0;
        for l in 0..l_dim {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for i in 0..n {
                let s = w_out[l * n + i] * coef[i];
                if s == 0.0 {
                    continue;
                }
                let row = &w[i * m..(i + 1) * m];
                match mode {
                    RiskMode::Diagonal => {
                        for (a, &sq) in acc.iter_mut().zip(&squares[i * m..(i + 1) * m]) {
                            *a += s * sq;
                        }
                    }
                    RiskMode::Full => {
                        for j in 0..m {
                            let sj = s * row[j];
                            for k in 0..m {
                                acc[j * m + k] += sj * row[k];
                            }
                        }
                    }
                }
            }
            point_sum += acc.iter().map(|a| a.abs()).sum::<f64>();
        }
        total += point_sum / (l_dim * acc.len()) as f64;
    }
    Ok(total / count as f64)
}

/// Mean absolute second centered difference of a 1-D goal on a uniform grid
/// of `grid_size` points over `[a, b]`.
pub fn goal_structural_risk(
    goal: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    grid_size: usize,
) -> Result<f64> {
    if grid_size < 3 || !(b > a) {
        return Err(Error::InvalidDataset(format!(
            "need at least 3 grid points on a non-empty interval, got {grid_size} on [{a}, {b}]"
        )));
    }
    let xs = uniform_grid(a, b, grid_size);
    let h = xs[1] - xs[0];
    let g: Vec<f64> = xs.iter().map(|&x| goal(x)).collect();
    let total: f64 = g
        .windows(3)
        .map(|w| ((w[2] - 2.0 * w[1] + w[0]) / (h * h)).abs())
        .sum();
    Ok(total / (grid_size - 2) as f64)
}

/// `count` equally spaced points from `a` to `b`, both included.
pub fn uniform_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![a],
        _ => (0..count)
            .map(|k| {
                if k == count - 1 {
                    b
                } else {
                    a + (b - a) * k as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

/// Replica responses evaluated on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSeries {
    /// Grid points, `G x dim` row-major.
    pub grid: Vec<f64>,
    pub dim: usize,
    /// One response per replica, each of length `G`.
    pub curves: Vec<Vec<f64>>,
}

impl CurveSeries {
    pub fn new(grid: Vec<f64>, dim: usize, curves: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 || grid.is_empty() || !grid.len().is_multiple_of(dim) {
            return Err(Error::InvalidDataset(
                "empty or ragged evaluation grid".into(),
            ));
        }
        let g = grid.len() / dim;
        if curves.iter().any(|c| c.len() != g) {
            return Err(Error::InvalidDataset(format!(
                "every curve must have {g} grid values"
            )));
        }
        Ok(CurveSeries { grid, dim, curves })
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len() / self.dim
    }

    pub fn grid_points(&self) -> impl Iterator<Item = &[f64]> {
        self.grid.chunks_exact(self.dim)
    }

    pub fn mean_curve(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.grid_len()];
        for c in &self.curves {
            for (m, v) in mean.iter_mut().zip(c) {
                *m += v;
            }
        }
        let n = self.curves.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResponseSeries {
    Curves(CurveSeries),
    /// Correct rates on a fixed test set.
    Rates(Vec<f64>),
}

impl ResponseSeries {
    pub fn len(&self) -> usize {
        match self {
            ResponseSeries::Curves(c) => c.curves.len(),
            ResponseSeries::Rates(r) => r.len(),
        }
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grid RMS of `a - b`.
pub fn rms_distance(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

/// `sqrt((1/n) Σ_i ‖Π_i - ⟨Π⟩‖²)`.
pub fn design_risk(series: &ResponseSeries) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::TooFewReplicas {
            needed: 2,
            got: series.len(),
        });
    }
    let n = series.len() as f64;
    let sq: f64 = match series {
        ResponseSeries::Curves(c) => {
            let mean = c.mean_curve();
            c.curves
                .iter()
                .map(|curve| rms_distance(curve, &mean).powi(2))
                .sum()
        }
        ResponseSeries::Rates(r) => {
            let mean = r.iter().sum::<f64>() / n;
            r.iter().map(|v| (v - mean) * (v - mean)).sum()
        }
    };
    Ok((sq / n).sqrt())
}

/// `sqrt((1/n) Σ_i ‖Π_i - g‖²)` with the goal sampled on the series grid.
pub fn average_fitting_error(series: &CurveSeries, goal: impl Fn(&[f64]) -> f64) -> Result<f64> {
    if series.curves.is_empty() {
        return Err(Error::TooFewReplicas { needed: 1, got: 0 });
    }
    let target: Vec<f64> = series.grid_points().map(goal).collect();
    let sq: f64 = series
        .curves
        .iter()
        .map(|c| rms_distance(c, &target).powi(2))
        .sum();
    Ok((sq / series.curves.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AvgResponse {
    Rate(f64),
    Curve(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    /// `None` with fewer than two replicas.
    pub design_risk: Option<f64>,
    pub avg_response: AvgResponse,
    pub avg_fitting_error: Option<f64>,
    pub avg_structural_risk: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dims, Gvm};
    use crate::transfer::TransferKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn machine(dims: Dims, transfer: TransferKind, seed: u64) -> Gvm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n, l) = (dims.inputs, dims.hidden, dims.outputs);
        Gvm::from_parts(
            dims,
            transfer,
            (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..l * n)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect(),
        )
        .unwrap()
    }

    fn hidden_output(g: &Gvm, i: usize, x: &[f64]) -> f64 {
        g.transfer().value(g.beta()[i] * g.hidden_field(i, x))
    }

    #[test]
    fn curvature_trivial_cases() {
        let d = Dims::new(2, 1, 1).unwrap();
        let g = Gvm::from_parts(
            d,
            TransferKind::Gaussian,
            vec![1.0, 1.0],
            vec![1.0],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(neuron_curvature(&g, 0, &[0.0, 0.0], 0, 1), -2.0);
        let z = Gvm::from_parts(
            d,
            TransferKind::Gaussian,
            vec![1.0, 1.0],
            vec![0.0],
            vec![0.3],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(neuron_curvature(&z, 0, &[0.7, -2.0], 0, 0), 0.0);
    }

    #[test]
    fn curvature_matches_finite_difference() {
        let h = 1e-3;
        for kind in [TransferKind::Gaussian, TransferKind::Sigmoid] {
            let g = machine(Dims::new(1, 3, 1).unwrap(), kind, 3);
            for i in 0..3 {
                for k in 0..20 {
                    let x = -2.0 + 0.2 * k as f64;
                    let fd = (hidden_output(&g, i, &[x + h]) - 2.0 * hidden_output(&g, i, &[x])
                        + hidden_output(&g, i, &[x - h]))
                        / (h * h);
                    let an = neuron_curvature(&g, i, &[x], 0, 0);
                    assert!((an - fd).abs() < 1e-4, "{kind:?} i={i} x={x}: {an} vs {fd}");
                }
            }
        }
    }

    /// Finite-difference Hessian of output `l` at `x`, element `(j, k)`.
    fn fd_hessian(g: &Gvm, x: &[f64], l: usize, j: usize, k: usize, h: f64) -> f64 {
        let f = |dj: f64, dk: f64| {
            let mut p = x.to_vec();
            p[j] += dj;
            p[k] += dk;
            g.forward(&p)[l]
        };
        if j == k {
            (f(h, 0.0) - 2.0 * f(0.0, 0.0) + f(-h, 0.0)) / (h * h)
        } else {
            (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h)
        }
    }

    #[test]
    fn structural_risk_matches_finite_difference_hessian() {
        let g = machine(Dims::new(3, 5, 2).unwrap(), TransferKind::Gaussian, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<f64> = (0..8 * 3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut oracle_full = 0.0;
        let mut oracle_diag = 0.0;
        for x in points.chunks(3) {
            let (mut f, mut d) = (0.0, 0.0);
            for l in 0..2 {
                for j in 0..3 {
                    for k in 0..3 {
                        let v = fd_hessian(&g, x, l, j, k, 1e-3).abs();
                        f += v;
                        if j == k {
                            d += v;
                        }
                    }
                }
            }
            oracle_full += f / 18.0;
            oracle_diag += d / 6.0;
        }
        oracle_full /= 8.0;
        oracle_diag /= 8.0;
        let full = structural_risk(&g, &points, RiskMode::Full).unwrap();
        let diag = structural_risk(&g, &points, RiskMode::Diagonal).unwrap();
        assert!(
            (full - oracle_full).abs() / oracle_full < 1e-3,
            "{full} vs {oracle_full}"
        );
        assert!(
            (diag - oracle_diag).abs() / oracle_diag < 1e-3,
            "{diag} vs {oracle_diag}"
        );
    }

    #[test]
    fn structural_risk_modes_agree_for_one_input() {
        let g = machine(Dims::new(1, 7, 2).unwrap(), TransferKind::Sigmoid, 1);
        let pts = uniform_grid(-3.0, 3.0, 11);
        assert_eq!(
            structural_risk(&g, &pts, RiskMode::Full).unwrap(),
            structural_risk(&g, &pts, RiskMode::Diagonal).unwrap()
        );
    }

    #[test]
    fn structural_risk_zero_without_beta() {
        let d = Dims::new(2, 2, 1).unwrap();
        let g = Gvm::from_parts(
            d,
            TransferKind::Gaussian,
            vec![0.5; 4],
            vec![0.0; 2],
            vec![0.1, 0.2],
            vec![1.0, -1.0],
        )
        .unwrap();
        assert_eq!(
            structural_risk(&g, &[1.0, 2.0], RiskMode::Full).unwrap(),
            0.0
        );
    }

    #[test]
    fn full_mode_guard() {
        let g = machine(Dims::new(65, 2, 1).unwrap(), TransferKind::Gaussian, 1);
        assert!(matches!(
            structural_risk(&g, &[0.0; 65], RiskMode::Full),
            Err(Error::UseDiagonal(65))
        ));
        assert!(structural_risk(&g, &[0.0; 65], RiskMode::Diagonal).is_ok());
        assert!(structural_risk(&g, &[], RiskMode::Diagonal).is_err());
    }

    #[test]
    fn goal_risk_cases() {
        assert!(goal_structural_risk(|x| x, -1.0, 1.0, 101).unwrap().abs() < 1e-9);
        assert!(
            (goal_structural_risk(|x| x * x / 2.0, -3.0, 5.0, 101).unwrap() - 1.0).abs() < 1e-8
        );
        let pi = std::f64::consts::PI;
        let r = goal_structural_risk(f64::sin, -pi, pi, 1001).unwrap();
        assert!((r - 2.0 / pi).abs() < 1e-3, "{r}");
        assert!(goal_structural_risk(|x| x, 0.0, 1.0, 2).is_err());
    }

    /// The definitions written out as plain nested loops.
    fn brute_design(curves: &[Vec<f64>]) -> f64 {
        let n = curves.len();
        let g = curves[0].len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut sq = 0.0;
            for k in 0..g {
                let mut mean = 0.0;
                for c in curves {
                    mean += c[k];
                }
                mean /= n as f64;
                sq += (curves[i][k] - mean).powi(2);
            }
            acc += sq / g as f64;
        }
        (acc / n as f64).sqrt()
    }

    fn brute_fit(curves: &[Vec<f64>], goal: &[f64]) -> f64 {
        let mut acc = 0.0;
        for c in curves {
            let mut sq = 0.0;
            for k in 0..goal.len() {
                sq += (c[k] - goal[k]).powi(2);
            }
            acc += sq / goal.len() as f64;
        }
        (acc / curves.len() as f64).sqrt()
    }

    fn synthetic(n: usize, seed: u64) -> (CurveSeries, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = uniform_grid(-1.0, 1.0, 101);
        let goal: Vec<f64> = grid.iter().map(|x| (3.0 * x).sin()).collect();
        let curves = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(-0.1..0.1);
                let b: f64 = rng.random_range(-0.05..0.05);
                grid.iter()
                    .zip(&goal)
                    .map(|(x, g)| g + a * x + b + 0.02)
                    .collect()
            })
            .collect();
        (CurveSeries::new(grid, 1, curves).unwrap(), goal)
    }

    #[test]
    fn design_and_fit_match_brute_force() {
        let (s, goal) = synthetic(5, 1);
        let d = design_risk(&ResponseSeries::Curves(s.clone())).unwrap();
        assert!((d - brute_design(&s.curves)).abs() < 1e-12);
        let grid = s.grid.clone();
        let f = average_fitting_error(&s, |x| (3.0 * x[0]).sin()).unwrap();
        assert!((f - brute_fit(&s.curves, &goal)).abs() < 1e-12);
        assert_eq!(grid.len(), goal.len());
    }

    #[test]
    fn bias_variance_identity() {
        for seed in 0..20 {
            let (s, goal) = synthetic(7, seed);
            let d = design_risk(&ResponseSeries::Curves(s.clone())).unwrap();
            let f = average_fitting_error(&s, |x| (3.0 * x[0]).sin()).unwrap();
            let bias = rms_distance(&s.mean_curve(), &goal);
            assert!((f * f - (d * d + bias * bias)).abs() < 1e-10);
            assert!(f * f >= d * d - f64::EPSILON);
        }
    }

    #[test]
    fn scalar_and_symmetric_cases() {
        assert_eq!(
            design_risk(&ResponseSeries::Rates(vec![0.9, 0.9, 0.9])).unwrap(),
            0.0
        );
        let d = design_risk(&ResponseSeries::Rates(vec![0.8, 0.9])).unwrap();
        assert!((d - 0.05).abs() < 1e-15);
        assert!(matches!(
            design_risk(&ResponseSeries::Rates(vec![0.8])),
            Err(Error::TooFewReplicas { .. })
        ));

        let grid = uniform_grid(0.0, 1.0, 11);
        let goal: Vec<f64> = grid.iter().map(|x| x * x).collect();
        let c = 0.25;
        let curves: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                goal.iter()
                    .map(|g| if k % 2 == 0 { g + c } else { g - c })
                    .collect()
            })
            .collect();
        let s = CurveSeries::new(grid.clone(), 1, curves).unwrap();
        assert!((average_fitting_error(&s, |x| x[0] * x[0]).unwrap() - c).abs() < 1e-15);
        assert!((design_risk(&ResponseSeries::Curves(s.clone())).unwrap() - c).abs() < 1e-15);
        assert!(rms_distance(&s.mean_curve(), &goal) < 1e-15);

        let one = CurveSeries::new(grid, 1, vec![goal.iter().map(|g| g - 0.3).collect()]).unwrap();
        assert!((average_fitting_error(&one, |x| x[0] * x[0]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn design_risk_ignores_replica_order() {
        let (s, _) = synthetic(6, 4);
        let mut rev = s.clone();
        rev.curves.reverse();
        let a = design_risk(&ResponseSeries::Curves(s)).unwrap();
        let b = design_risk(&ResponseSeries::Curves(rev)).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = uniform_grid(-std::f64::consts::PI, std::f64::consts::PI, 20);
        assert_eq!(g[0], -std::f64::consts::PI);
        assert_eq!(g[19], std::f64::consts::PI);
    }
}
