//! Declarative experiment files (TOML).

use std::path::{Path, PathBuf};

use gvm_core::datagen::GoalKind;
use gvm_core::{ControlParams, CostKind, Margin, StopRule, TransferKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSpec,
    pub control: ControlSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Replica count; commands pick their own default when absent.
    #[serde(default)]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub risk: RiskSpec,
}

/// Replicas per control point unless the config or a flag says otherwise.
pub const DEFAULT_REPLICAS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    /// Samples of a synthetic goal on `[interval[0], interval[1]]`.
    Function {
        #[serde(flatten)]
        goal: GoalKind,
        count: usize,
        interval: [f64; 2],
        /// Evaluation grid points per axis for curves and fitting errors.
        #[serde(default = "default_eval_grid")]
        eval_grid: usize,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
        /// Applied to the training images, in order; originals are kept.
        #[serde(default)]
        train_augment: Vec<Augment>,
        /// Replaces the test set with augmented copies of it.
        #[serde(default)]
        test_augment: Option<Augment>,
    },
    Wbc {
        path: PathBuf,
    },
}

fn default_eval_grid() -> usize {
    1001
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Augment {
    Noise { sigma: f64, copies: usize },
    Shift { magnitude: usize },
    Smooth { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub c_beta: f64,
    pub c_w: f64,
    pub c_b: f64,
    #[serde(default = "default_margin")]
    pub margin: Margin,
    pub n_hidden: usize,
    pub transfer: TransferKind,
    pub cost: CostKind,
    /// Defaults to the cost's usual threshold; `gamma0 = false` disables it.
    #[serde(default)]
    pub gamma0: Option<Threshold>,
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
    #[serde(default)]
    pub step_decades: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Value(f64),
    Enabled(bool),
}

fn default_margin() -> Margin {
    Margin::Single(1.0)
}

fn default_step_scale() -> f64 {
    0.05
}

impl ControlSpec {
    pub fn to_control(&self, seed: u64) -> ControlParams {
        let gamma0 = match self.gamma0 {
            None | Some(Threshold::Enabled(true)) => Some(self.cost.default_gamma0()),
            Some(Threshold::Enabled(false)) => None,
            Some(Threshold::Value(v)) => Some(v),
        };
        ControlParams {
            c_beta: self.c_beta,
            c_w: self.c_w,
            c_b: self.c_b,
            margin: self.margin,
            n_hidden: self.n_hidden,
            transfer: self.transfer,
            cost: self.cost,
            stop: StopRule {
                gamma0,
                max_steps: self.max_steps,
            },
            step_scale: self.step_scale,
            step_decades: self.step_decades,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    CBeta,
    D,
    NHidden,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::CBeta => "c_beta",
            Axis::D => "d",
            Axis::NHidden => "n_hidden",
        }
    }

    /// `control` moved to grid value `v`. A band margin keeps its width.
    pub fn apply(&self, control: &ControlParams, v: f64) -> ControlParams {
        let mut c = control.clone();
        match self {
            Axis::CBeta => c.c_beta = v,
            Axis::NHidden => c.n_hidden = v.round() as usize,
            Axis::D => {
                c.margin = match c.margin {
                    Margin::Single(_) => Margin::Single(v),
                    Margin::Band([lo, hi]) => Margin::Band([v, v + (hi - lo)]),
                }
            }
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    #[serde(flatten)]
    pub grid: Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values {
        values: Vec<f64>,
    },
    Range {
        from: f64,
        to: f64,
        count: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::Values { ref values } => values.clone(),
            Grid::Range {
                from,
                to,
                count,
                log,
            } => {
                if count < 2 {
                    return vec![from];
                }
                (0..count)
                    .map(|k| {
                        if k == 0 {
                            return from;
                        }
                        if k == count - 1 {
                            return to;
                        }
                        let t = k as f64 / (count - 1) as f64;
                        if log {
                            (from.ln() + t * (to.ln() - from.ln())).exp()
                        } else {
                            from + t * (to - from)
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Save every trained machine next to the results.
    #[serde(default)]
    pub save_models: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    /// Largest hidden layer the auto-grow loop may try.
    #[serde(default = "default_grow_cap")]
    pub max_hidden: usize,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec {
            max_hidden: default_grow_cap(),
        }
    }
}

fn default_grow_cap() -> usize {
    1600
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpec {
    /// Test inputs (classification) or grid points (regression) used for
    /// the structural risk.
    #[serde(default = "default_risk_points")]
    pub points: usize,
}

impl Default for RiskSpec {
    fn default() -> Self {
        RiskSpec {
            points: default_risk_points(),
        }
    }
}

fn default_risk_points() -> usize {
    50
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.replicas == Some(0) {
            return Err(CliError::Config("replicas must be at least 1".into()));
        }
        self.control
            .to_control(self.seed)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(sweep) = &self.sweep {
            let values = sweep.grid.values();
            if values.len() < 2 {
                return Err(CliError::Config(format!(
                    "a sweep over {} needs at least 2 grid points, got {}",
                    sweep.axis.name(),
                    values.len()
                )));
            }
            for v in values {
                let c = sweep.axis.apply(&self.control.to_control(self.seed), v);
                c.validate().map_err(|e| {
                    CliError::Config(format!("grid value {} = {v}: {e}", sweep.axis.name()))
                })?;
            }
        }
        if let DataSpec::Function {
            count,
            interval,
            eval_grid,
            ..
        } = &self.data
        {
            if *count < 2 || *eval_grid < 2 || !(interval[1] > interval[0]) {
                return Err(CliError::Config(
                    "function data needs count >= 2, eval_grid >= 2 and a non-empty interval"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_regression(&self) -> bool {
        matches!(self.data, DataSpec::Function { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINC: &str = r#"
        replicas = 4
        seed = 7

        [data]
        kind = "function"
        goal = "sinc1d"
        count = 20
        interval = [-10.0, 10.0]

        [control]
        c_beta = 0.5
        c_w = 1.0
        c_b = 10.0
        n_hidden = 100
        transfer = { kind = "gaussian" }
        cost = "fe"
        max_steps = 1000

        [sweep]
        axis = "c_beta"
        from = 0.1
        to = 2.0
        count = 10
        log = true
    "#;

    #[test]
    fn parses_a_function_sweep() {
        let cfg = ExperimentConfig::from_toml(SINC).unwrap();
        assert_eq!(cfg.replicas, Some(4));
        let grid = cfg.sweep.as_ref().unwrap().grid.values();
        assert_eq!(grid.len(), 10);
        assert_eq!((grid[0], grid[9]), (0.1, 2.0));
        assert!((grid[1] / grid[0] - grid[9] / grid[8]).abs() < 1e-12);
        let c = cfg.control.to_control(cfg.seed);
        assert_eq!(c.stop.gamma0, Some(1e-4));
        assert!(matches!(
            cfg.data,
            DataSpec::Function {
                goal: GoalKind::Sinc1d,
                eval_grid: 1001,
                ..
            }
        ));
    }

    #[test]
    fn noisy_goal_and_thresholds() {
        let text = SINC
            .replace("goal = \"sinc1d\"", "goal = \"noisy_sinc\"\nsigma = 0.1")
            .replace("max_steps = 1000", "max_steps = 1000\ngamma0 = false");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!(
            matches!(cfg.data, DataSpec::Function { goal: GoalKind::NoisySinc { sigma }, .. } if sigma == 0.1)
        );
        assert_eq!(cfg.control.to_control(0).stop.gamma0, None);
        let v = ExperimentConfig::from_toml(
            &SINC.replace("max_steps = 1000", "max_steps = 1000\ngamma0 = 1e-3"),
        )
        .unwrap();
        assert_eq!(v.control.to_control(0).stop.gamma0, Some(1e-3));
    }

    #[test]
    fn single_point_sweep_is_a_config_error() {
        let text = SINC.replace("count = 10", "count = 1");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(CliError::Config(_))
        ));
        let text = SINC.replace(
            "from = 0.1\n        to = 2.0\n        count = 10\n        log = true",
            "values = [0.5]",
        );
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn bad_values_are_config_errors() {
        for (from, to) in [
            ("replicas = 4", "replicas = 0"),
            ("c_beta = 0.5", "c_beta = -1.0"),
            ("count = 20", "count = 1"),
        ] {
            assert!(
                matches!(
                    ExperimentConfig::from_toml(&SINC.replace(from, to)),
                    Err(CliError::Config(_))
                ),
                "{to}"
            );
        }
        assert!(matches!(
            ExperimentConfig::from_toml("nonsense = ["),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml(&SINC.replace("seed = 7", "seed = 7\nbogus = 1")),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn axis_moves_one_coordinate() {
        let c = ExperimentConfig::from_toml(SINC)
            .unwrap()
            .control
            .to_control(0);
        assert_eq!(Axis::CBeta.apply(&c, 0.3).c_beta, 0.3);
        assert_eq!(Axis::NHidden.apply(&c, 200.0).n_hidden, 200);
        let mut band = c.clone();
        band.margin = Margin::Band([2.0, 5.0]);
        assert_eq!(
            Axis::D.apply(&band, 10.0).margin,
            Margin::Band([10.0, 13.0])
        );
        assert_eq!(Axis::D.apply(&c, 4.0).margin, Margin::Single(4.0));
    }
}
