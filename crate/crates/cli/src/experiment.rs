//! Loading a configured dataset and summarizing replica ensembles.

use std::hash::Hasher;
use std::path::Path;

use gvm_core::datagen::{self, GoalKind};
use gvm_core::ensemble::{replicate_train, Replicas};
use gvm_core::io::{self, SweepRow};
use gvm_core::risk::{self, CurveSeries, ResponseSeries, RiskMode, FULL_MODE_MAX_INPUTS};
use gvm_core::{ControlParams, Dataset, Error, Gvm};
use serde::Serialize;

use crate::config::{Augment, Axis, DataSpec, ExperimentConfig};
use crate::error::CliResult;

/// A configured dataset, ready for training and evaluation.
#[derive(Clone, Debug)]
pub enum Loaded {
    Function {
        goal: GoalKind,
        train: Dataset,
        /// Evaluation grid, `G x dim` row-major.
        grid: Vec<f64>,
        dim: usize,
    },
    Classes {
        train: Dataset,
        test: Dataset,
    },
}

impl Loaded {
    pub fn train(&self) -> &Dataset {
        match self {
            Loaded::Function { train, .. } | Loaded::Classes { train, .. } => train,
        }
    }
}

fn resolve(base: Option<&Path>, p: &Path) -> std::path::PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

fn augment(pixels: &[f64], aug: Augment, seed: u64) -> gvm_core::Result<(Vec<f64>, usize)> {
    let side = io::SIDE;
    Ok(match aug {
        Augment::Noise { sigma, copies } => (
            datagen::noise_augment(pixels, side * side, sigma, copies, seed)?,
            copies,
        ),
        Augment::Shift { magnitude } => (datagen::shift_augment(pixels, side, magnitude)?, 8),
        Augment::Smooth { sigma } => (datagen::gaussian_smooth(pixels, side, sigma)?, 1),
    })
}

fn rescaled(raw: Vec<f64>, labels: Vec<usize>) -> gvm_core::Result<Dataset> {
    let inputs = raw.into_iter().map(io::rescale_pixel).collect();
    Dataset::classification(inputs, io::SIDE * io::SIDE, labels, 10)
}

/// Loads the dataset described by `cfg`. Relative paths are taken from
/// `data_dir` when it is given.
pub fn load(cfg: &ExperimentConfig, data_dir: Option<&Path>) -> CliResult<Loaded> {
    match &cfg.data {
        DataSpec::Function {
            goal,
            count,
            interval,
            eval_grid,
        } => {
            let train =
                datagen::make_training_set(*goal, *count, (interval[0], interval[1]), cfg.seed)?;
            let axis = risk::uniform_grid(interval[0], interval[1], *eval_grid);
            let dim = goal.input_dim();
            let grid = if dim == 1 {
                axis
            } else {
                axis.iter()
                    .flat_map(|&u| axis.iter().flat_map(move |&v| [u, v]))
                    .collect()
            };
            Ok(Loaded::Function {
                goal: *goal,
                train,
                grid,
                dim,
            })
        }
        DataSpec::Wbc { path } => {
            let (train, test) = io::load_wbc(&resolve(data_dir, path))?;
            Ok(Loaded::Classes { train, test })
        }
        DataSpec::Mnist {
            images,
            labels,
            test_images,
            test_labels,
            limit,
            test_limit,
            train_augment,
            test_augment,
        } => {
            let raw = io::load_mnist_raw(
                &resolve(data_dir, images),
                &resolve(data_dir, labels),
                *limit,
            )?;
            let mut pixels = raw.pixels_f64();
            let mut labels = raw.labels_usize();
            let originals = (pixels.clone(), labels.clone());
            for (k, aug) in train_augment.iter().enumerate() {
                let (extra, copies) = augment(&originals.0, *aug, cfg.seed.wrapping_add(k as u64))?;
                pixels.extend(extra);
                labels.extend(
                    originals
                        .1
                        .iter()
                        .flat_map(|&l| std::iter::repeat_n(l, copies)),
                );
            }
            let test_raw = io::load_mnist_raw(
                &resolve(data_dir, test_images),
                &resolve(data_dir, test_labels),
                *test_limit,
            )?;
            let (test_pixels, test_labels) = match test_augment {
                None => (test_raw.pixels_f64(), test_raw.labels_usize()),
                Some(aug) => {
                    let (px, copies) = augment(&test_raw.pixels_f64(), *aug, cfg.seed ^ 0x7e57)?;
                    let labels = test_raw
                        .labels
                        .iter()
                        .flat_map(|&l| std::iter::repeat_n(usize::from(l), copies))
                        .collect();
                    (px, labels)
                }
            };
            Ok(Loaded::Classes {
                train: rescaled(pixels, labels)?,
                test: rescaled(test_pixels, test_labels)?,
            })
        }
    }
}

/// Seed for grid point `value` on `axis`. Depends only on the coordinate,
/// so adding or reordering grid points leaves other points unchanged.
pub fn point_seed(base_seed: u64, axis: Axis, value: f64) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write_u64(base_seed);
    h.write(axis.name().as_bytes());
    h.write_u64(value.to_bits());
    h.finish()
}

/// Per-replica and ensemble statistics at one control point.
#[derive(Clone, Debug, Serialize)]
pub struct PointStats {
    /// Test-set correct rate (classification) or fitting error against the
    /// goal (regression) of each usable replica, in seed order.
    pub scores: Vec<f64>,
    pub mean_score: f64,
    pub design_risk: Option<f64>,
    pub structural_risk: f64,
    pub joint_score: f64,
}

pub fn correct_rate(machines: &[&Gvm], data: &Dataset) -> f64 {
    let labels = data.labels().expect("classification dataset");
    let hits = data
        .rows()
        .zip(labels)
        .filter(|(x, &l)| gvm_core::ensemble::joint_classify(machines, x) == l)
        .count();
    hits as f64 / data.len() as f64
}

fn curves(machines: &[&Gvm], grid: &[f64], dim: usize) -> Vec<Vec<f64>> {
    machines
        .iter()
        .map(|g| grid.chunks_exact(dim).map(|x| g.forward(x)[0]).collect())
        .collect()
}

/// Every `k`-th point of `points` (`dim`-wide rows) so that about `count` remain.
fn thin(points: &[f64], dim: usize, count: usize) -> Vec<f64> {
    let total = points.len() / dim;
    let stride = (total / count.max(1)).max(1);
    points
        .chunks_exact(dim)
        .step_by(stride)
        .flatten()
        .copied()
        .collect()
}

/// Statistics of `machines` (all usable replicas) on the loaded data.
pub fn point_stats(
    loaded: &Loaded,
    machines: &[&Gvm],
    risk_points: usize,
) -> CliResult<PointStats> {
    let mode = |m: usize| {
        if m <= FULL_MODE_MAX_INPUTS {
            RiskMode::Full
        } else {
            RiskMode::Diagonal
        }
    };
    match loaded {
        Loaded::Function {
            goal, grid, dim, ..
        } => {
            let series = CurveSeries::new(grid.clone(), *dim, curves(machines, grid, *dim))?;
            let target: Vec<f64> = series
                .grid_points()
                .map(|x| datagen::eval_goal(*goal, x))
                .collect();
            let scores: Vec<f64> = series
                .curves
                .iter()
                .map(|c| risk::rms_distance(c, &target))
                .collect();
            let mean_score =
                risk::average_fitting_error(&series, |x| datagen::eval_goal(*goal, x))?;
            let joint_score = risk::rms_distance(&series.mean_curve(), &target);
            let design_risk = risk::design_risk(&ResponseSeries::Curves(series)).ok();
            let pts = thin(grid, *dim, risk_points);
            let structural_risk = mean(
                &machines
                    .iter()
                    .map(|g| risk::structural_risk(g, &pts, mode(*dim)))
                    .collect::<gvm_core::Result<Vec<_>>>()?,
            );
            Ok(PointStats {
                scores,
                mean_score,
                design_risk,
                structural_risk,
                joint_score,
            })
        }
        Loaded::Classes { test, .. } => {
            let scores: Vec<f64> = machines.iter().map(|g| correct_rate(&[g], test)).collect();
            let joint_score = correct_rate(machines, test);
            let design_risk = risk::design_risk(&ResponseSeries::Rates(scores.clone())).ok();
            let m = test.input_dim();
            let pts = test.inputs()[..risk_points.min(test.len()) * m].to_vec();
            let structural_risk = mean(
                &machines
                    .iter()
                    .map(|g| risk::structural_risk(g, &pts, mode(m)))
                    .collect::<gvm_core::Result<Vec<_>>>()?,
            );
            Ok(PointStats {
                mean_score: mean(&scores),
                scores,
                design_risk,
                structural_risk,
                joint_score,
            })
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Outcome of training and summarizing one control point.
#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub control: ControlParams,
    pub base_seed: u64,
    /// `None` when no replica reached the cost threshold.
    pub replicas: Option<Replicas>,
    pub stats: Option<PointStats>,
    pub row: SweepRow,
}

/// Trains `n` replicas at `control` and summarizes them. A point where no
/// replica reaches the threshold yields an outcome without statistics.
pub fn run_point(
    loaded: &Loaded,
    control: &ControlParams,
    n: usize,
    base_seed: u64,
    risk_points: usize,
) -> CliResult<PointOutcome> {
    let mut row = SweepRow {
        c_beta: control.c_beta,
        d: control.margin.d(),
        n_hidden: control.n_hidden,
        cost: control.cost.name().into(),
        transfer: control.transfer.name(),
        replicas: 0,
        failed: n,
        mean_score: None,
        design_risk: None,
        structural_risk: None,
        joint_score: None,
        mean_steps: 0.0,
    };
    let train = loaded.train();
    let replicas = match replicate_train(train, control, n, base_seed) {
        Ok(r) => r,
        Err(Error::Infeasible(msg)) => {
            log::warn!("{msg}");
            row.mean_steps = control.stop.max_steps.map_or(f64::NAN, |s| s as f64);
            return Ok(PointOutcome {
                control: control.clone(),
                base_seed,
                replicas: None,
                stats: None,
                row,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let usable = replicas.usable();
    let stats = point_stats(loaded, &usable, risk_points)?;
    row.replicas = usable.len();
    row.failed = replicas.failed();
    row.mean_score = Some(stats.mean_score);
    row.design_risk = stats.design_risk;
    row.structural_risk = Some(stats.structural_risk);
    row.joint_score = Some(stats.joint_score);
    row.mean_steps = mean(
        &replicas
            .reports
            .iter()
            .map(|r| r.steps as f64)
            .collect::<Vec<_>>(),
    );
    Ok(PointOutcome {
        control: control.clone(),
        base_seed,
        replicas: Some(replicas),
        stats: Some(stats),
        row,
    })
}

/// Index of the best grid point by `key` among rows that have a value,
/// lowest index on ties.
pub fn best_by(
    rows: &[SweepRow],
    key: impl Fn(&SweepRow) -> Option<f64>,
    minimize: bool,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in rows.iter().enumerate() {
        if let Some(v) = key(r).filter(|v| !v.is_nan()) {
            let better = match best {
                None => true,
                Some((_, b)) => (minimize && v < b) || (!minimize && v > b),
            };
            if better {
                best = Some((k, v));
            }
        }
    }
    best.map(|(k, _)| k)
}
