//! Monte Carlo training.
//!
//! Each proposal perturbs one hidden parameter (a weight `w_ij`, a transfer
//! coefficient `β_i` or a bias `b_i`) by a uniform step, clamped to the
//! parameter's range. Only row `i` of the hidden caches and the `L x P`
//! output fields move, so pricing a proposal costs `O(P + LP)`. The change is
//! kept iff the cost does not increase; a rejected proposal writes nothing.
//!
//! Cache layout is sample-minor: `h_bar[i * P + μ]`, `y_bar[i * P + μ]`,
//! `h_out[l * P + μ]`. `h_bar` holds the raw field `Σ_j w_ij x_j - b_i`
//! without the β factor, so a β proposal only recomputes `f(β h_bar)`.

mod cost;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cost::{cost, raw_sum, CostKind, Objective};

use crate::error::{Error, Result};
use crate::model::{dot, ControlParams, Dataset, Gvm, Task};
use crate::transfer::TransferKind;

/// Accepted proposals between from-scratch cache rebuilds.
pub const REFRESH_EVERY: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once the cost is at or below this value.
    pub gamma0: Option<f64>,
    /// Stop after this many proposals.
    pub max_steps: Option<u64>,
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.gamma0.is_none() && self.max_steps.is_none() {
            return Err(Error::InvalidControl(
                "stop rule needs a cost threshold, a step budget, or both".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Threshold,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_gamma: f64,
    pub steps: u64,
    pub accepts: u64,
    pub wall_time: Duration,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Threshold
    }
}

/// The RNG a trainer uses for replica `seed`. Initialization draws from a
/// separate stream seeded with the same value.
pub fn training_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

enum Param {
    Weight { i: usize, j: usize },
    Beta(usize),
    Bias(usize),
}

/// Working state of one training run. Owns its machine exclusively.
pub struct TrainerState<'a> {
    gvm: Gvm,
    data: &'a Dataset,
    control: ControlParams,
    objective: Objective,
    samples: usize,
    h_bar: Vec<f64>,
    y_bar: Vec<f64>,
    h_out: Vec<f64>,
    /// `L x P`: signs for margin costs, targets for regression.
    reference: Vec<f64>,
    sum: f64,
    steps: u64,
    accepts: u64,
    since_refresh: u64,
    new_h: Vec<f64>,
    new_y: Vec<f64>,
    dy: Vec<f64>,
}

impl<'a> TrainerState<'a> {
    pub fn new(gvm: Gvm, data: &'a Dataset, control: &ControlParams) -> Result<Self> {
        control.validate()?;
        let dims = gvm.dims();
        if dims.inputs != data.input_dim() || dims.outputs != data.output_dim() {
            return Err(Error::DimMismatch(format!(
                "machine {dims} vs dataset with {} inputs and {} outputs",
                data.input_dim(),
                data.output_dim()
            )));
        }
        if dims.hidden != control.n_hidden {
            return Err(Error::DimMismatch(format!(
                "machine has {} hidden neurons, control asks for {}",
                dims.hidden, control.n_hidden
            )));
        }
        let objective = Objective::bind(control.cost, control.margin)?;
        objective.check_task(data)?;

        let p = data.len();
        let (n, l_dim) = (dims.hidden, dims.outputs);
        let mut reference = vec![0.0; l_dim * p];
        match data.task() {
            Task::Regression { targets, .. } => {
                for mu in 0..p {
                    for l in 0..l_dim {
                        reference[l * p + mu] = targets[mu * l_dim + l];
                    }
                }
            }
            Task::Classification { .. } => {
                for mu in 0..p {
                    for l in 0..l_dim {
                        reference[l * p + mu] = data.sign(mu, l);
                    }
                }
            }
        }
        data.by_feature();
        let mut state = TrainerState {
            gvm,
            data,
            control: control.clone(),
            objective,
            samples: p,
            h_bar: vec![0.0; n * p],
            y_bar: vec![0.0; n * p],
            h_out: vec![0.0; l_dim * p],
            reference,
            sum: 0.0,
            steps: 0,
            accepts: 0,
            since_refresh: 0,
            new_h: vec![0.0; p],
            new_y: vec![0.0; p],
            dy: vec![0.0; p],
        };
        state.refresh_caches();
        Ok(state)
    }

    pub fn gvm(&self) -> &Gvm {
        &self.gvm
    }
    pub fn into_gvm(self) -> Gvm {
        self.gvm
    }
    pub fn objective(&self) -> Objective {
        self.objective
    }
    pub fn h_bar(&self) -> &[f64] {
        &self.h_bar
    }
    pub fn y_bar(&self) -> &[f64] {
        &self.y_bar
    }
    pub fn h_out(&self) -> &[f64] {
        &self.h_out
    }
    pub fn steps(&self) -> u64 {
        self.steps
    }
    pub fn accepts(&self) -> u64 {
        self.accepts
    }

    /// Current cost Γ.
    pub fn gamma(&self) -> f64 {
        self.objective
            .normalize(self.sum, self.samples, self.gvm.dims().outputs)
    }

    /// Rebuilds every cache and the cost from the current parameters.
    pub fn refresh_caches(&mut self) {
        let p = self.samples;
        let dims = self.gvm.dims();
        let transfer = self.gvm.transfer();
        for i in 0..dims.hidden {
            let beta = self.gvm.beta()[i];
            for mu in 0..p {
                let h = self.gvm.hidden_field(i, self.data.input(mu));
                self.h_bar[i * p + mu] = h;
                self.y_bar[i * p + mu] = transfer.value(beta * h);
            }
        }
        let w_out = self.gvm.w_out();
        for l in 0..dims.outputs {
            let row = &mut self.h_out[l * p..(l + 1) * p];
            row.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..dims.hidden {
                let w = w_out[l * dims.hidden + i];
                for (h, y) in row.iter_mut().zip(&self.y_bar[i * p..(i + 1) * p]) {
                    *h += w * y;
                }
            }
        }
        self.sum = raw_sum(&self.objective, &self.h_out, self.data).expect("task checked in new()");
        self.since_refresh = 0;
    }

    fn pick(&self, rng: &mut impl Rng) -> Param {
        let dims = self.gvm.dims();
        let (m, n) = (dims.inputs, dims.hidden);
        let k = rng.random_range(0..n * m + 2 * n);
        if k < n * m {
            Param::Weight { i: k / m, j: k % m }
        } else if k < n * m + n {
            Param::Beta(k - n * m)
        } else {
            Param::Bias(k - n * m - n)
        }
    }

    /// One Monte Carlo step. Returns whether the proposal was accepted.
    pub fn propose_and_apply(&mut self, rng: &mut impl Rng) -> bool {
        self.steps += 1;
        let param = self.pick(rng);
        let (old, bound) = match param {
            Param::Weight { i, j } => (self.gvm.hidden_row(i)[j], self.control.c_w),
            Param::Beta(i) => (self.gvm.beta()[i], self.control.c_beta),
            Param::Bias(i) => (self.gvm.bias()[i], self.control.c_b),
        };
        let new = if bound > 0.0 {
            let mut half = self.control.step_scale * 2.0 * bound;
            if self.control.step_decades > 0.0 {
                half *= 10f64.powf(-rng.random_range(0.0..self.control.step_decades));
            }
            (old + rng.random_range(-half..half)).clamp(-bound, bound)
        } else {
            old
        };
        let eps = new - old;
        if eps == 0.0 {
            // nothing moves, so the cost cannot get worse
            self.accepts += 1;
            return true;
        }

        let p = self.samples;
        let i = match param {
            Param::Weight { i, .. } | Param::Beta(i) | Param::Bias(i) => i,
        };
        let beta = match param {
            Param::Beta(_) => new,
            _ => self.gvm.beta()[i],
        };
        let h_row = &self.h_bar[i * p..(i + 1) * p];
        match param {
            Param::Weight { j, .. } => {
                let x = &self.data.by_feature()[j * p..(j + 1) * p];
                for ((nh, &h), &xv) in self.new_h.iter_mut().zip(h_row).zip(x) {
                    *nh = h + eps * xv;
                }
            }
            Param::Bias(_) => {
                for (nh, &h) in self.new_h.iter_mut().zip(h_row) {
                    *nh = h - eps;
                }
            }
            Param::Beta(_) => self.new_h.copy_from_slice(h_row),
        }
        let y_row = &self.y_bar[i * p..(i + 1) * p];
        match self.gvm.transfer() {
            TransferKind::Gaussian => apply_transfer(
                |z| (-z * z).exp(),
                beta,
                &self.new_h,
                y_row,
                &mut self.new_y,
                &mut self.dy,
            ),
            TransferKind::Sigmoid => apply_transfer(
                f64::tanh,
                beta,
                &self.new_h,
                y_row,
                &mut self.new_y,
                &mut self.dy,
            ),
            TransferKind::Polynomial { degree } => {
                let n = degree as i32;
                apply_transfer(
                    |z| z.powi(n),
                    beta,
                    &self.new_h,
                    y_row,
                    &mut self.new_y,
                    &mut self.dy,
                )
            }
        }

        let delta = self.cost_delta(i);
        if delta > 0.0 || delta.is_nan() {
            return false;
        }

        match param {
            Param::Weight { i, j } => self.gvm.set_w_hidden(i, j, new),
            Param::Beta(i) => self.gvm.set_beta(i, new),
            Param::Bias(i) => self.gvm.set_bias(i, new),
        }
        self.h_bar[i * p..(i + 1) * p].copy_from_slice(&self.new_h);
        self.y_bar[i * p..(i + 1) * p].copy_from_slice(&self.new_y);
        let dims = self.gvm.dims();
        for l in 0..dims.outputs {
            let w = self.gvm.w_out()[l * dims.hidden + i];
            for (h, &d) in self.h_out[l * p..(l + 1) * p].iter_mut().zip(&self.dy) {
                *h += w * d;
            }
        }
        self.sum += delta;
        self.accepts += 1;
        self.since_refresh += 1;
        true
    }

    /// Change of the raw cost sum if hidden neuron `i` moves by `self.dy`.
    fn cost_delta(&self, i: usize) -> f64 {
        let p = self.samples;
        let dims = self.gvm.dims();
        let w_out = self.gvm.w_out();
        let dy = &self.dy;
        let mut delta = 0.0;
        match self.objective {
            Objective::Fe => {
                for l in 0..dims.outputs {
                    let w = w_out[l * dims.hidden + i];
                    let h = &self.h_out[l * p..(l + 1) * p];
                    let t = &self.reference[l * p..(l + 1) * p];
                    for mu in 0..p {
                        let step = w * dy[mu];
                        let r = t[mu] - h[mu];
                        delta += step * (step - 2.0 * r);
                    }
                }
            }
            Objective::F2 { d } => {
                for l in 0..dims.outputs {
                    let w = w_out[l * dims.hidden + i];
                    let h = &self.h_out[l * p..(l + 1) * p];
                    let s = &self.reference[l * p..(l + 1) * p];
                    for mu in 0..p {
                        let du = w * s[mu] * dy[mu];
                        let a = h[mu] * s[mu] - d;
                        delta += du * (2.0 * a + du);
                    }
                }
            }
            Objective::F1 { d } => {
                for l in 0..dims.outputs {
                    let w = w_out[l * dims.hidden + i];
                    let h = &self.h_out[l * p..(l + 1) * p];
                    let s = &self.reference[l * p..(l + 1) * p];
                    for mu in 0..p {
                        let a = h[mu] * s[mu] - d;
                        let b = a + w * s[mu] * dy[mu];
                        let (a, b) = (a.min(0.0), b.min(0.0));
                        delta += b * b - a * a;
                    }
                }
            }
            obj @ Objective::F3 { .. } => {
                for l in 0..dims.outputs {
                    let w = w_out[l * dims.hidden + i];
                    let h = &self.h_out[l * p..(l + 1) * p];
                    let s = &self.reference[l * p..(l + 1) * p];
                    for mu in 0..p {
                        let u = h[mu] * s[mu];
                        delta += obj.pair_penalty(u + w * s[mu] * dy[mu]) - obj.pair_penalty(u);
                    }
                }
            }
            Objective::F2bar { d } => {
                let labels = self.data.labels().expect("classification checked");
                for (mu, &nu) in labels.iter().enumerate() {
                    let h_nu = self.h_out[nu * p + mu];
                    let w_nu = w_out[nu * dims.hidden + i];
                    for l in (0..dims.outputs).filter(|&l| l != nu) {
                        let e = h_nu - self.h_out[l * p + mu] - d;
                        let c = (w_nu - w_out[l * dims.hidden + i]) * dy[mu];
                        delta += c * (2.0 * e + c);
                    }
                }
            }
        }
        delta
    }

    /// Runs proposals until the stop rule fires. `on_accept` sees the step
    /// count and the cost after every accepted proposal.
    pub fn run(&mut self, rng: &mut impl Rng, mut on_accept: impl FnMut(u64, f64)) -> TrainReport {
        let start = Instant::now();
        let stop = self.control.stop;
        let reason = loop {
            if let Some(g0) = stop.gamma0 {
                if self.gamma() <= g0 {
                    self.refresh_caches();
                    if self.gamma() <= g0 {
                        break StopReason::Threshold;
                    }
                }
            }
            if stop.max_steps.is_some_and(|max| self.steps >= max) {
                break StopReason::Budget;
            }
            if self.propose_and_apply(rng) {
                on_accept(self.steps, self.gamma());
                if self.since_refresh >= REFRESH_EVERY {
                    self.refresh_caches();
                }
            }
        };
        self.refresh_caches();
        TrainReport {
            final_gamma: self.gamma(),
            steps: self.steps,
            accepts: self.accepts,
            wall_time: start.elapsed(),
            stop_reason: reason,
        }
    }
}

#[inline]
fn apply_transfer(
    f: impl Fn(f64) -> f64,
    beta: f64,
    h: &[f64],
    old_y: &[f64],
    new_y: &mut [f64],
    dy: &mut [f64],
) {
    for (((ny, d), &hv), &oy) in new_y.iter_mut().zip(dy.iter_mut()).zip(h).zip(old_y) {
        let y = f(beta * hv);
        *ny = y;
        *d = y - oy;
    }
}

/// Trains `gvm` on `dataset` until `control.stop` fires.
pub fn train(
    gvm: Gvm,
    dataset: &Dataset,
    control: &ControlParams,
    rng: &mut impl Rng,
) -> Result<(Gvm, TrainReport)> {
    let mut state = TrainerState::new(gvm, dataset, control)?;
    let report = state.run(rng, |_, _| {});
    Ok((state.into_gvm(), report))
}

/// Initializes replica `seed` and trains it.
pub fn train_seeded(
    dataset: &Dataset,
    control: &ControlParams,
    seed: u64,
) -> Result<(Gvm, TrainReport)> {
    let dims =
        crate::model::Dims::new(dataset.input_dim(), control.n_hidden, dataset.output_dim())?;
    let gvm = Gvm::init_random(dims, control, seed)?;
    train(gvm, dataset, control, &mut training_rng(seed))
}

/// Hidden-field recomputation that skips the trainer's caches; used to
/// check them.
pub fn recompute_fields(gvm: &Gvm, data: &Dataset) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dims = gvm.dims();
    let p = data.len();
    let mut h_bar = vec![0.0; dims.hidden * p];
    let mut y_bar = vec![0.0; dims.hidden * p];
    let mut h_out = vec![0.0; dims.outputs * p];
    for mu in 0..p {
        let x = data.input(mu);
        for i in 0..dims.hidden {
            let h = dot(gvm.hidden_row(i), x) - gvm.bias()[i];
            h_bar[i * p + mu] = h;
            y_bar[i * p + mu] = gvm.transfer().value(gvm.beta()[i] * h);
        }
        for l in 0..dims.outputs {
            h_out[l * p + mu] = (0..dims.hidden)
                .map(|i| gvm.w_out()[l * dims.hidden + i] * y_bar[i * p + mu])
                .sum();
        }
    }
    (h_bar, y_bar, h_out)
}
