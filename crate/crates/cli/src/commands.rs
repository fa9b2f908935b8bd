//! The subcommands. Each returns a serializable report and writes its
//! result files under the output directory.

use std::path::{Path, PathBuf};

use gvm_core::ensemble::Replicas;
use gvm_core::io::{self, SweepRow};
use gvm_core::risk::{AvgResponse, RiskSummary};
use gvm_core::{Dataset, Error, Gvm, StopReason};
use serde::Serialize;

use crate::config::{ExperimentConfig, DEFAULT_REPLICAS};
use crate::error::{output_err, CliError, CliResult};
use crate::experiment::{self, best_by, correct_rate, point_seed, run_point, Loaded, PointStats};

/// Flag overrides shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub max_steps: Option<u64>,
}

impl Overrides {
    /// `cfg` with the flags applied, re-validated.
    pub fn apply(&self, mut cfg: ExperimentConfig) -> CliResult<ExperimentConfig> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.replicas {
            cfg.replicas = Some(n);
        }
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = Some(dir.clone());
        }
        if let Some(steps) = self.max_steps {
            cfg.control.max_steps = Some(steps);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Training outcome of one replica, without wall-clock time so result files
/// stay byte-identical across runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaRecord {
    pub seed: u64,
    pub steps: u64,
    pub accepts: u64,
    pub final_gamma: f64,
    pub stop_reason: StopReason,
}

fn records(r: &Replicas) -> Vec<ReplicaRecord> {
    r.seeds
        .iter()
        .zip(&r.reports)
        .map(|(&seed, rep)| ReplicaRecord {
            seed,
            steps: rep.steps,
            accepts: rep.accepts,
            final_gamma: rep.final_gamma,
            stop_reason: rep.stop_reason,
        })
        .collect()
}

fn out_dir(cfg: &ExperimentConfig, command: &str) -> CliResult<PathBuf> {
    let dir = cfg
        .output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(command));
    std::fs::create_dir_all(&dir).map_err(|e| output_err(&dir, e))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| output_err(path, e))
}

fn save_models(dir: &Path, replicas: &Replicas) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
    for (g, &seed) in replicas.machines.iter().zip(&replicas.seeds) {
        let mut control = replicas.control.clone();
        control.seed = seed;
        io::save_model(g, &control, &dir.join(format!("replica-{seed}.gvm")))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- sweep

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub scores: Vec<f64>,
    pub replicas: Vec<ReplicaRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub axis: &'static str,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// Grid index minimizing the design risk.
    pub argmin_design_risk: Option<usize>,
    /// Grid index with the best mean score: highest rate, or lowest
    /// fitting error for regression.
    pub best_mean_score: Option<usize>,
    pub points: Vec<SweepPoint>,
}

pub fn sweep(cfg: &ExperimentConfig, data_dir: Option<&Path>) -> CliResult<SweepReport> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    let values = spec.grid.values();
    let loaded = experiment::load(cfg, data_dir)?;
    let n = cfg.replicas.unwrap_or(DEFAULT_REPLICAS);
    let base = cfg.control.to_control(cfg.seed);
    let dir = out_dir(cfg, "sweep")?;

    let mut rows = Vec::with_capacity(values.len());
    let mut points = Vec::with_capacity(values.len());
    for &v in &values {
        let control = spec.axis.apply(&base, v);
        let seed = point_seed(cfg.seed, spec.axis, v);
        log::info!("{} = {v}: training {n} replicas", spec.axis.name());
        let outcome = run_point(&loaded, &control, n, seed, cfg.risk.points)?;
        log::info!("{} = {v}: {:?}", spec.axis.name(), outcome.row);
        if cfg.output.save_models {
            if let Some(r) = &outcome.replicas {
                save_models(
                    &dir.join("models").join(format!("{}-{v}", spec.axis.name())),
                    r,
                )?;
            }
        }
        points.push(SweepPoint {
            value: v,
            seed,
            scores: outcome.stats.map(|s| s.scores).unwrap_or_default(),
            replicas: outcome.replicas.as_ref().map(records).unwrap_or_default(),
        });
        rows.push(outcome.row);
    }

    let argmin_design_risk = best_by(&rows, |r| r.design_risk, true);
    let best_mean_score = best_by(&rows, |r| r.mean_score, loaded_is_regression(&loaded));
    io::write_sweep(&rows, &dir.join("sweep.csv"))?;
    let report = SweepReport {
        axis: spec.axis.name(),
        values,
        rows,
        argmin_design_risk,
        best_mean_score,
        points,
    };
    write_json(&dir.join("sweep.json"), &report)?;
    Ok(report)
}

fn loaded_is_regression(loaded: &Loaded) -> bool {
    matches!(loaded, Loaded::Function { .. })
}

// ---------------------------------------------------------------- fit

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    /// Hidden layer size that finally trained.
    pub n_hidden: usize,
    pub summary: RiskSummary,
    pub joint_error: f64,
    pub replicas: Vec<ReplicaRecord>,
}

/// Fits a regression set, doubling N until the threshold is reached or
/// `fit.max_hidden` is exceeded.
pub fn fit(cfg: &ExperimentConfig, data_dir: Option<&Path>) -> CliResult<FitReport> {
    let loaded = experiment::load(cfg, data_dir)?;
    let Loaded::Function {
        goal, grid, dim, ..
    } = &loaded
    else {
        return Err(CliError::Config("fit needs a function dataset".into()));
    };
    let n = cfg.replicas.unwrap_or(1);
    let mut control = cfg.control.to_control(cfg.seed);
    let outcome = loop {
        log::info!("fit: N = {}", control.n_hidden);
        let o = run_point(&loaded, &control, n, cfg.seed, cfg.risk.points)?;
        if o.replicas.is_some() {
            break o;
        }
        let next = control.n_hidden * 2;
        if next > cfg.fit.max_hidden {
            return Err(Error::Infeasible(format!(
                "no replica reached the threshold up to N = {} (cap {}); last point used {} steps per replica",
                control.n_hidden, cfg.fit.max_hidden, o.row.mean_steps
            ))
            .into());
        }
        control.n_hidden = next;
    };
    let replicas = outcome.replicas.as_ref().expect("trained point");
    let stats = outcome.stats.as_ref().expect("trained point");
    let joint: Vec<f64> = grid
        .chunks_exact(*dim)
        .map(|x| replicas.joint_predict(x)[0])
        .collect();

    let dir = out_dir(cfg, "fit")?;
    let curve_path = dir.join("curve.csv");
    let mut w = csv::Writer::from_path(&curve_path).map_err(|e| output_err(&curve_path, e))?;
    let mut header: Vec<String> = (0..*dim).map(|j| format!("x{j}")).collect();
    header.extend(["joint".into(), "goal".into()]);
    w.write_record(&header)
        .map_err(|e| output_err(&curve_path, e))?;
    for (x, y) in grid.chunks_exact(*dim).zip(&joint) {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        rec.push(gvm_core::datagen::eval_goal(*goal, x).to_string());
        w.write_record(&rec)
            .map_err(|e| output_err(&curve_path, e))?;
    }
    w.flush().map_err(|e| output_err(&curve_path, e))?;
    if cfg.output.save_models {
        save_models(&dir.join("models"), replicas)?;
    }

    let report = FitReport {
        n_hidden: control.n_hidden,
        summary: RiskSummary {
            design_risk: stats.design_risk,
            avg_response: AvgResponse::Curve(joint),
            avg_fitting_error: Some(stats.mean_score),
            avg_structural_risk: stats.structural_risk,
        },
        joint_error: stats.joint_score,
        replicas: records(replicas),
    };
    write_json(&dir.join("fit.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- classify

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyReport {
    /// Test correct rate of every usable replica, in seed order.
    pub rates: Vec<f64>,
    pub mean_rate: f64,
    /// Missing with fewer than two usable replicas.
    pub design_risk: Option<f64>,
    pub joint_rate: f64,
    pub structural_risk: f64,
    pub replicas: Vec<ReplicaRecord>,
}

/// Trains replicas on a classification set and scores them on its test set.
pub fn classify(cfg: &ExperimentConfig, data_dir: Option<&Path>) -> CliResult<ClassifyReport> {
    let loaded = experiment::load(cfg, data_dir)?;
    if loaded_is_regression(&loaded) {
        return Err(CliError::Config(
            "classify needs a classification dataset".into(),
        ));
    }
    let n = cfg.replicas.unwrap_or(DEFAULT_REPLICAS);
    let control = cfg.control.to_control(cfg.seed);
    let outcome = run_point(&loaded, &control, n, cfg.seed, cfg.risk.points)?;
    let (Some(replicas), Some(stats)) = (outcome.replicas, outcome.stats) else {
        return Err(
            Error::Infeasible(format!("none of {n} replicas reached the cost threshold")).into(),
        );
    };
    let dir = out_dir(cfg, "classify")?;
    if cfg.output.save_models {
        save_models(&dir.join("models"), &replicas)?;
    }
    let PointStats {
        scores,
        mean_score,
        design_risk,
        structural_risk,
        joint_score,
    } = stats;
    let report = ClassifyReport {
        rates: scores,
        mean_rate: mean_score,
        design_risk,
        joint_rate: joint_score,
        structural_risk,
        replicas: records(&replicas),
    };
    write_json(&dir.join("classify.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- wash

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct WashEntry {
    pub index: usize,
    pub label: usize,
    /// Mean over replicas of `min_l h_l s_l` on this training sample.
    pub score: f64,
}

/// Per-sample margin scores of `machines` on `train`, ascending by score
/// (ties by index).
pub fn margin_ranking(machines: &[&Gvm], train: &Dataset) -> Vec<WashEntry> {
    let labels = train.labels().expect("classification dataset");
    let l_out = train.output_dim();
    let mut entries: Vec<WashEntry> = train
        .rows()
        .enumerate()
        .map(|(mu, x)| {
            let total: f64 = machines
                .iter()
                .map(|g| {
                    let h = g.forward(x);
                    (0..l_out)
                        .map(|l| h[l] * train.sign(mu, l))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum();
            WashEntry {
                index: mu,
                label: labels[mu],
                score: total / machines.len() as f64,
            }
        })
        .collect();
    entries.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
    entries
}

/// Trains replicas on the training set alone and returns the `k` samples
/// with the smallest margin scores.
pub fn wash(
    cfg: &ExperimentConfig,
    data_dir: Option<&Path>,
    k: usize,
) -> CliResult<Vec<WashEntry>> {
    let loaded = experiment::load(cfg, data_dir)?;
    if loaded_is_regression(&loaded) {
        return Err(CliError::Config(
            "wash needs a classification dataset".into(),
        ));
    }
    let train = loaded.train();
    let n = cfg.replicas.unwrap_or(DEFAULT_REPLICAS);
    let control = cfg.control.to_control(cfg.seed);
    if control.stop.max_steps.is_none() {
        return Err(CliError::Config(
            "wash needs max_steps: contradictory samples can keep the threshold out of reach"
                .into(),
        ));
    }
    // every replica counts, whatever its stop reason
    let replicas = gvm_core::ensemble::train_replicas(train, &control, n, cfg.seed)?;
    let machines: Vec<&Gvm> = replicas.machines.iter().collect();
    let mut ranking = margin_ranking(&machines, train);
    ranking.truncate(k);
    let dir = out_dir(cfg, "wash")?;
    let path = dir.join("wash.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| output_err(&path, e))?;
    for e in &ranking {
        w.serialize(e).map_err(|e| output_err(&path, e))?;
    }
    w.flush().map_err(|e| output_err(&path, e))?;
    Ok(ranking)
}

// ---------------------------------------------------------------- eval

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub models: Vec<PathBuf>,
    /// Test correct rate (classification) or fitting error (regression)
    /// of each model alone.
    pub single: Vec<f64>,
    pub joint: f64,
}

/// Evaluates saved models singly and jointly on the configured data: the
/// test set for classification, the goal on the evaluation grid otherwise.
pub fn eval(
    cfg: &ExperimentConfig,
    data_dir: Option<&Path>,
    models: &[PathBuf],
) -> CliResult<EvalReport> {
    if models.is_empty() {
        return Err(CliError::Config("eval needs at least one model".into()));
    }
    let machines = models
        .iter()
        .map(|p| io::load_model(p))
        .collect::<gvm_core::Result<Vec<_>>>()?;
    let loaded = experiment::load(cfg, data_dir)?;
    let (m, l) = (loaded.train().input_dim(), loaded.train().output_dim());
    for (g, p) in machines.iter().zip(models) {
        let d = g.dims();
        if d.inputs != m || d.outputs != l {
            return Err(Error::DimMismatch(format!(
                "{} is a {d} machine but the data has {m} inputs and {l} outputs",
                p.display()
            ))
            .into());
        }
    }
    let refs: Vec<&Gvm> = machines.iter().collect();
    let (single, joint) = match &loaded {
        Loaded::Classes { test, .. } => (
            refs.iter().map(|g| correct_rate(&[g], test)).collect(),
            correct_rate(&refs, test),
        ),
        Loaded::Function { .. } => {
            let stats = experiment::point_stats(&loaded, &refs, 1)?;
            (stats.scores, stats.joint_score)
        }
    };
    let report = EvalReport {
        models: models.to_vec(),
        single,
        joint,
    };
    let dir = out_dir(cfg, "eval")?;
    write_json(&dir.join("eval.json"), &report)?;
    Ok(report)
}
