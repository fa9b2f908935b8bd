//! Sweep tables: one CSV row per control point.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of every sweep file.
pub const SWEEP_HEADER: &str = "c_beta,d,n_hidden,cost,transfer,replicas,failed,mean_score,design_risk,structural_risk,joint_score,mean_steps";

/// Summary of one control point over its replicas.
///
/// For classification `mean_score` is the mean test-set correct rate and
/// `joint_score` the joint machine's rate. For regression they are the
/// average fitting error and the joint curve's error against the goal.
/// Statistics that do not apply, or a control point where no replica
/// trained, leave empty cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c_beta: f64,
    pub d: f64,
    pub n_hidden: usize,
    pub cost: String,
    pub transfer: String,
    /// Replicas that entered the statistics.
    pub replicas: usize,
    /// Replicas excluded for missing the cost threshold.
    pub failed: usize,
    pub mean_score: Option<f64>,
    pub design_risk: Option<f64>,
    pub structural_risk: Option<f64>,
    pub joint_score: Option<f64>,
    /// Mean proposals per replica, failed ones included.
    pub mean_steps: f64,
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidDataset(
            "a sweep needs at least one row".into(),
        ));
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != SWEEP_HEADER {
        return Err(Error::MalformedRow {
            row: 0,
            reason: format!("unexpected header {header:?}"),
        });
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
