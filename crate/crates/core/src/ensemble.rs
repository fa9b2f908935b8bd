//! Replica ensembles and joint machines.
//!
//! Replicas share the dataset and control point and differ only in their
//! seed (`base_seed + k`). A joint machine averages the output fields of its
//! members; for classification the argmax is taken after averaging.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{argmax, ControlParams, Dataset, Gvm};
use crate::trainer::{train_seeded, TrainReport};

#[derive(Clone, Debug)]
pub struct Replicas {
    pub machines: Vec<Gvm>,
    pub reports: Vec<TrainReport>,
    pub seeds: Vec<u64>,
    pub control: ControlParams,
}

impl Replicas {
    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    /// Whether machine `k` counts toward statistics: with a cost threshold
    /// only machines that reached it do, otherwise all of them.
    pub fn is_usable(&self, k: usize) -> bool {
        self.control.stop.gamma0.is_none() || self.reports[k].converged()
    }

    pub fn usable(&self) -> Vec<&Gvm> {
        (0..self.len())
            .filter(|&k| self.is_usable(k))
            .map(|k| &self.machines[k])
            .collect()
    }

    pub fn failed(&self) -> usize {
        (0..self.len()).filter(|&k| !self.is_usable(k)).count()
    }

    pub fn joint_predict(&self, x: &[f64]) -> Vec<f64> {
        joint_predict(&self.usable(), x)
    }

    pub fn joint_classify(&self, x: &[f64]) -> usize {
        joint_classify(&self.usable(), x)
    }
}

/// Trains `n` replicas with seeds `base_seed..base_seed + n`, in parallel,
/// and fails if none of them is usable.
pub fn replicate_train(
    dataset: &Dataset,
    control: &ControlParams,
    n: usize,
    base_seed: u64,
) -> Result<Replicas> {
    let replicas = train_replicas(dataset, control, n, base_seed)?;
    if replicas.usable().is_empty() {
        let best = replicas
            .reports
            .iter()
            .map(|r| r.final_gamma)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::Infeasible(format!(
            "none of {n} replicas reached the cost threshold {:?} (best {best:e})",
            control.stop.gamma0
        )));
    }
    Ok(replicas)
}

/// Like [`replicate_train`] but keeps the ensemble whatever the stop reasons.
pub fn train_replicas(
    dataset: &Dataset,
    control: &ControlParams,
    n: usize,
    base_seed: u64,
) -> Result<Replicas> {
    if n == 0 {
        return Err(Error::TooFewReplicas { needed: 1, got: 0 });
    }
    control.validate()?;
    let seeds: Vec<u64> = (0..n as u64).map(|k| base_seed.wrapping_add(k)).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| train_seeded(dataset, control, seed))
        .collect::<Result<Vec<_>>>()?;
    let (machines, reports): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(Replicas {
        machines,
        reports,
        seeds,
        control: control.clone(),
    })
}

/// Mean output fields of `machines` at `x`.
pub fn joint_predict(machines: &[&Gvm], x: &[f64]) -> Vec<f64> {
    assert!(
        !machines.is_empty(),
        "a joint machine needs at least one member"
    );
    let mut acc = vec![0.0; machines[0].dims().outputs];
    let mut buf = acc.clone();
    for g in machines {
        g.forward_into(x, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    let n = machines.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

pub fn joint_classify(machines: &[&Gvm], x: &[f64]) -> usize {
    argmax(&joint_predict(machines, x))
}
