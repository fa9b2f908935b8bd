//! The machine, its control parameters and the datasets it is trained on.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::{CostKind, StopRule};
use crate::transfer::TransferKind;

/// Layer sizes: `inputs` (M), `hidden` (N), `outputs` (L).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl Dims {
    pub fn new(inputs: usize, hidden: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return Err(Error::DimMismatch(format!(
                "all layer sizes must be positive, got {inputs}-{hidden}-{outputs}"
            )));
        }
        Ok(Dims {
            inputs,
            hidden,
            outputs,
        })
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}-{}", self.inputs, self.hidden, self.outputs)
    }
}

/// Target clearance of the output local fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Margin {
    Single(f64),
    Band([f64; 2]),
}

impl Margin {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Margin::Single(d) if d > 0.0 && d.is_finite() => Ok(()),
            Margin::Band([lo, hi]) if lo > 0.0 && lo < hi && hi.is_finite() => Ok(()),
            m => Err(Error::InvalidControl(format!("bad margin {m:?}"))),
        }
    }

    /// The single margin `d`, or the lower edge of a band.
    pub fn d(&self) -> f64 {
        match *self {
            Margin::Single(d) => d,
            Margin::Band([lo, _]) => lo,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub c_beta: f64,
    pub c_w: f64,
    pub c_b: f64,
    pub margin: Margin,
    pub n_hidden: usize,
    pub transfer: TransferKind,
    pub cost: CostKind,
    pub stop: StopRule,
    /// Half-width of a proposal as a fraction of the parameter's full range.
    pub step_scale: f64,
    /// Spread of proposal sizes in decades: each half-width is shrunk by
    /// `10^-u`, `u ~ U[0, step_decades)`. Zero keeps every proposal at the
    /// full half-width.
    #[serde(default)]
    pub step_decades: f64,
    pub seed: u64,
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidControl(msg));
        if !(self.c_beta > 0.0 && self.c_beta.is_finite()) {
            return bad(format!("c_beta must be > 0, got {}", self.c_beta));
        }
        if !(self.c_w > 0.0 && self.c_w.is_finite()) {
            return bad(format!("c_w must be > 0, got {}", self.c_w));
        }
        if !(self.c_b >= 0.0 && self.c_b.is_finite()) {
            return bad(format!("c_b must be >= 0, got {}", self.c_b));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return bad(format!(
                "step_scale must be in (0, 1], got {}",
                self.step_scale
            ));
        }
        if !(0.0..=15.0).contains(&self.step_decades) {
            return bad(format!(
                "step_decades must be in [0, 15], got {}",
                self.step_decades
            ));
        }
        if self.n_hidden == 0 {
            return bad("n_hidden must be positive".into());
        }
        if self.cost == CostKind::F3 && !matches!(self.margin, Margin::Band(_)) {
            return bad("cost F3 needs a margin band [d1, d2]".into());
        }
        self.margin.validate()?;
        self.transfer.validate()?;
        self.stop.validate()
    }
}

/// A trained or freshly initialized machine.
///
/// Hidden weights are stored row-major (`w_hidden[i * M + j]`), output
/// weights likewise (`w_out[l * N + i]`). Output weights are ±1 and never
/// change after initialization.
#[derive(Clone, Debug, PartialEq)]
pub struct Gvm {
    dims: Dims,
    transfer: TransferKind,
    w_hidden: Vec<f64>,
    beta: Vec<f64>,
    bias: Vec<f64>,
    w_out: Vec<f64>,
}

fn symmetric(rng: &mut impl Rng, c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        rng.random_range(-c..=c)
    }
}

impl Gvm {
    /// Draws every hidden parameter uniformly from its closed range and
    /// every output weight as ±1 with equal probability.
    pub fn init_random(dims: Dims, control: &ControlParams, seed: u64) -> Result<Self> {
        control.validate()?;
        if dims.hidden != control.n_hidden {
            return Err(Error::DimMismatch(format!(
                "dims have {} hidden neurons but control asks for {}",
                dims.hidden, control.n_hidden
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n, l) = (dims.inputs, dims.hidden, dims.outputs);
        let w_hidden = (0..n * m)
            .map(|_| symmetric(&mut rng, control.c_w))
            .collect();
        let beta = (0..n)
            .map(|_| symmetric(&mut rng, control.c_beta))
            .collect();
        let bias = (0..n).map(|_| symmetric(&mut rng, control.c_b)).collect();
        let w_out = (0..l * n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        Ok(Gvm {
            dims,
            transfer: control.transfer,
            w_hidden,
            beta,
            bias,
            w_out,
        })
    }

    /// Assembles a machine from raw parameter arrays, checking shapes and
    /// that every output weight is exactly ±1.
    pub fn from_parts(
        dims: Dims,
        transfer: TransferKind,
        w_hidden: Vec<f64>,
        beta: Vec<f64>,
        bias: Vec<f64>,
        w_out: Vec<f64>,
    ) -> Result<Self> {
        let (m, n, l) = (dims.inputs, dims.hidden, dims.outputs);
        if w_hidden.len() != n * m || beta.len() != n || bias.len() != n || w_out.len() != l * n {
            return Err(Error::DimMismatch(format!(
                "parameter arrays do not fit {dims}"
            )));
        }
        if w_out.iter().any(|&w| w != 1.0 && w != -1.0) {
            return Err(Error::InvalidControl("output weights must be ±1".into()));
        }
        transfer.validate()?;
        Ok(Gvm {
            dims,
            transfer,
            w_hidden,
            beta,
            bias,
            w_out,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn transfer(&self) -> TransferKind {
        self.transfer
    }
    pub fn w_hidden(&self) -> &[f64] {
        &self.w_hidden
    }
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
    pub fn w_out(&self) -> &[f64] {
        &self.w_out
    }

    #[inline]
    pub fn hidden_row(&self, i: usize) -> &[f64] {
        let m = self.dims.inputs;
        &self.w_hidden[i * m..(i + 1) * m]
    }

    pub(crate) fn set_w_hidden(&mut self, i: usize, j: usize, v: f64) {
        self.w_hidden[i * self.dims.inputs + j] = v;
    }
    pub(crate) fn set_beta(&mut self, i: usize, v: f64) {
        self.beta[i] = v;
    }
    pub(crate) fn set_bias(&mut self, i: usize, v: f64) {
        self.bias[i] = v;
    }

    /// Raw hidden local field `Σ_j w_ij x_j - b_i` (no β factor).
    #[inline]
    pub fn hidden_field(&self, i: usize, x: &[f64]) -> f64 {
        dot(self.hidden_row(i), x) - self.bias[i]
    }

    /// Output local fields for one input.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.outputs];
        self.forward_into(x, &mut out);
        out
    }

    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dims.inputs, "input length must equal M");
        let n = self.dims.hidden;
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..n {
            let y = self.transfer.value(self.beta[i] * self.hidden_field(i, x));
            for (l, o) in out.iter_mut().enumerate() {
                *o += self.w_out[l * n + i] * y;
            }
        }
    }

    pub fn classify(&self, x: &[f64]) -> usize {
        argmax(&self.forward(x))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    /// `targets` is `P x L`, row-major.
    Regression { targets: Vec<f64>, outputs: usize },
    /// Labels in `[0, classes)`.
    Classification { labels: Vec<usize>, classes: usize },
}

/// `P` input vectors of dimension `M` plus their targets.
#[derive(Debug)]
pub struct Dataset {
    inputs: Vec<f64>,
    dim: usize,
    task: Task,
    by_feature: OnceLock<Vec<f64>>,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Dataset {
            inputs: self.inputs.clone(),
            dim: self.dim,
            task: self.task.clone(),
            by_feature: OnceLock::new(),
        }
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.inputs == other.inputs && self.task == other.task
    }
}

impl Dataset {
    pub fn regression(
        inputs: Vec<f64>,
        dim: usize,
        targets: Vec<f64>,
        outputs: usize,
    ) -> Result<Self> {
        let p = Self::check_inputs(&inputs, dim)?;
        if outputs == 0 || targets.len() != p * outputs {
            return Err(Error::InvalidDataset(format!(
                "{} targets for {p} samples with {outputs} outputs",
                targets.len()
            )));
        }
        Ok(Dataset {
            inputs,
            dim,
            task: Task::Regression { targets, outputs },
            by_feature: OnceLock::new(),
        })
    }

    pub fn classification(
        inputs: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        let p = Self::check_inputs(&inputs, dim)?;
        if labels.len() != p {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {p} samples",
                labels.len()
            )));
        }
        if classes < 2 {
            return Err(Error::InvalidDataset(
                "classification needs at least 2 classes".into(),
            ));
        }
        if let Some((mu, &bad)) = labels.iter().enumerate().find(|(_, &c)| c >= classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} of sample {mu} is outside [0, {classes})"
            )));
        }
        Ok(Dataset {
            inputs,
            dim,
            task: Task::Classification { labels, classes },
            by_feature: OnceLock::new(),
        })
    }

    fn check_inputs(inputs: &[f64], dim: usize) -> Result<usize> {
        if dim == 0 || inputs.is_empty() || !inputs.len().is_multiple_of(dim) {
            return Err(Error::InvalidDataset(format!(
                "{} input values do not form rows of length {dim}",
                inputs.len()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite input value".into()));
        }
        Ok(inputs.len() / dim)
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
    pub fn input_dim(&self) -> usize {
        self.dim
    }
    pub fn output_dim(&self) -> usize {
        match &self.task {
            Task::Regression { outputs, .. } => *outputs,
            Task::Classification { classes, .. } => *classes,
        }
    }
    pub fn task(&self) -> &Task {
        &self.task
    }
    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    #[inline]
    pub fn input(&self, mu: usize) -> &[f64] {
        &self.inputs[mu * self.dim..(mu + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.dim)
    }

    /// Inputs transposed to `M x P` so one feature across all samples is
    /// contiguous. Built once on first use.
    pub fn by_feature(&self) -> &[f64] {
        self.by_feature.get_or_init(|| {
            let p = self.len();
            let mut t = vec![0.0; self.inputs.len()];
            for mu in 0..p {
                for j in 0..self.dim {
                    t[j * p + mu] = self.inputs[mu * self.dim + j];
                }
            }
            t
        })
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.task {
            Task::Classification { labels, .. } => Some(labels),
            Task::Regression { .. } => None,
        }
    }

    pub fn targets(&self) -> Option<&[f64]> {
        match &self.task {
            Task::Regression { targets, .. } => Some(targets),
            Task::Classification { .. } => None,
        }
    }

    /// `s_l^μ`: +1 at the label column, -1 elsewhere. Classification only.
    #[inline]
    pub fn sign(&self, mu: usize, l: usize) -> f64 {
        match &self.task {
            Task::Classification { labels, .. } => {
                if labels[mu] == l {
                    1.0
                } else {
                    -1.0
                }
            }
            Task::Regression { .. } => panic!("sign() on a regression dataset"),
        }
    }

    /// The full `P x L` sign matrix, row-major.
    pub fn signs(&self) -> Option<Vec<f64>> {
        let Task::Classification { labels, classes } = &self.task else {
            return None;
        };
        let mut s = vec![-1.0; labels.len() * classes];
        for (mu, &c) in labels.iter().enumerate() {
            s[mu * classes + c] = 1.0;
        }
        Some(s)
    }

    /// Samples `indices`, in that order, as a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        for &mu in indices {
            inputs.extend_from_slice(self.input(mu));
        }
        match &self.task {
            Task::Regression { targets, outputs } => {
                let t = indices
                    .iter()
                    .flat_map(|&mu| targets[mu * outputs..(mu + 1) * outputs].iter().copied())
                    .collect();
                Dataset::regression(inputs, self.dim, t, *outputs)
            }
            Task::Classification { labels, classes } => Dataset::classification(
                inputs,
                self.dim,
                indices.iter().map(|&mu| labels[mu]).collect(),
                *classes,
            ),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::trainer::{CostKind, StopRule};
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn control(n_hidden: usize, transfer: TransferKind) -> ControlParams {
        ControlParams {
            c_beta: 0.5,
            c_w: 1.0,
            c_b: 1.0,
            margin: Margin::Single(1.0),
            n_hidden,
            transfer,
            cost: CostKind::F2,
            stop: StopRule {
                gamma0: None,
                max_steps: Some(1000),
            },
            step_scale: 0.05,
            step_decades: 0.0,
            seed: 1,
        }
    }

    /// Naive evaluation written independently of `forward`.
    fn naive_forward(g: &Gvm, x: &[f64]) -> Vec<f64> {
        let d = g.dims();
        let mut hidden = Vec::new();
        for i in 0..d.hidden {
            let mut h = 0.0;
            for j in 0..d.inputs {
                h += g.w_hidden()[i * d.inputs + j] * x[j];
            }
            h -= g.bias()[i];
            let z = g.beta()[i] * h;
            hidden.push(match g.transfer() {
                TransferKind::Gaussian => (-z * z).exp(),
                TransferKind::Sigmoid => z.tanh(),
                TransferKind::Polynomial { degree } => z.powi(degree as i32),
            });
        }
        (0..d.outputs)
            .map(|l| {
                (0..d.hidden)
                    .map(|i| g.w_out()[l * d.hidden + i] * hidden[i])
                    .sum()
            })
            .collect()
    }

    #[test]
    fn init_is_deterministic() {
        let c = control(5, TransferKind::Gaussian);
        let d = Dims::new(3, 5, 2).unwrap();
        assert_eq!(
            Gvm::init_random(d, &c, 9).unwrap(),
            Gvm::init_random(d, &c, 9).unwrap()
        );
        assert_ne!(
            Gvm::init_random(d, &c, 9).unwrap(),
            Gvm::init_random(d, &c, 10).unwrap()
        );
    }

    #[test]
    fn init_respects_ranges() {
        // 100 x 1000 hidden weights + 2000 β/b = 10^5 sampled parameters
        let mut c = control(1000, TransferKind::Gaussian);
        c.c_beta = 0.005;
        c.c_w = 0.7;
        c.c_b = 3.0;
        let g = Gvm::init_random(Dims::new(100, 1000, 10).unwrap(), &c, 3).unwrap();
        assert!(g.w_hidden().iter().all(|w| w.abs() <= 0.7));
        assert!(g.beta().iter().all(|b| b.abs() <= 0.005));
        assert!(g.bias().iter().all(|b| b.abs() <= 3.0));
        assert!(g.w_out().iter().all(|&w| w == 1.0 || w == -1.0));
        // roughly uniform: mean near 0, both halves of the range populated
        let mean: f64 = g.w_hidden().iter().sum::<f64>() / g.w_hidden().len() as f64;
        assert!(mean.abs() < 0.01);
        let plus = g.w_out().iter().filter(|&&w| w > 0.0).count();
        assert!((plus as f64 / g.w_out().len() as f64 - 0.5).abs() < 0.05);
        let max = g.w_hidden().iter().fold(0.0f64, |a, w| a.max(w.abs()));
        assert!(max > 0.69);
    }

    #[test]
    fn zero_bias_range_is_legal() {
        let mut c = control(4, TransferKind::Sigmoid);
        c.c_b = 0.0;
        let g = Gvm::init_random(Dims::new(2, 4, 1).unwrap(), &c, 1).unwrap();
        assert!(g.bias().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_rejects_mismatched_hidden() {
        let c = control(4, TransferKind::Sigmoid);
        assert!(Gvm::init_random(Dims::new(2, 5, 1).unwrap(), &c, 1).is_err());
    }

    #[test]
    fn trivial_forward_cases() {
        let d = Dims::new(1, 1, 1).unwrap();
        let g = Gvm::from_parts(
            d,
            TransferKind::Gaussian,
            vec![0.0],
            vec![0.7],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(g.forward(&[3.5]), vec![1.0]);
        let s = Gvm::from_parts(
            d,
            TransferKind::Sigmoid,
            vec![2.0],
            vec![0.0],
            vec![1.0],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(s.forward(&[-4.0]), vec![0.0]);
    }

    #[test]
    fn forward_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [
            TransferKind::Gaussian,
            TransferKind::Sigmoid,
            TransferKind::Polynomial { degree: 3 },
        ] {
            let g = Gvm::init_random(Dims::new(3, 5, 2).unwrap(), &control(5, kind), 5).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let (a, b) = (g.forward(&x), naive_forward(&g, &x));
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() <= 1e-12 * v.abs().max(1e-300), "{u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn zero_input_depends_only_on_bias() {
        let c = control(6, TransferKind::Gaussian);
        let d = Dims::new(4, 6, 2).unwrap();
        let a = Gvm::init_random(d, &c, 1).unwrap();
        let b = Gvm::from_parts(
            d,
            a.transfer(),
            a.w_hidden().iter().map(|w| -w * 0.3).collect(),
            a.beta().to_vec(),
            a.bias().to_vec(),
            a.w_out().to_vec(),
        )
        .unwrap();
        assert_eq!(a.forward(&[0.0; 4]), b.forward(&[0.0; 4]));
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax(&[0.3, 0.9]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[-1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn sign_matrix_has_one_plus_per_row() {
        let ds = Dataset::classification(vec![0.0, 1.0, 2.0], 1, vec![2, 0, 1], 3).unwrap();
        let s = ds.signs().unwrap();
        for mu in 0..3 {
            let row = &s[mu * 3..mu * 3 + 3];
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row[ds.labels().unwrap()[mu]], 1.0);
            for l in 0..3 {
                assert_eq!(row[l], ds.sign(mu, l));
            }
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::classification(vec![], 1, vec![], 2).is_err());
        assert!(Dataset::classification(vec![1.0], 1, vec![2], 2).is_err());
        assert!(Dataset::regression(vec![1.0, 2.0], 2, vec![1.0, 2.0], 1).is_err());
        let ds = Dataset::regression(vec![1.0, 2.0, 3.0, 4.0], 2, vec![5.0, 6.0], 1).unwrap();
        assert_eq!(ds.by_feature(), &[1.0, 3.0, 2.0, 4.0]);
    }

    proptest! {
        #[test]
        fn even_polynomial_hidden_outputs_nonnegative(seed in 0u64..1000, x in proptest::collection::vec(-3.0f64..3.0, 2)) {
            let g = Gvm::init_random(Dims::new(2, 4, 1).unwrap(), &control(4, TransferKind::Polynomial { degree: 4 }), seed).unwrap();
            for i in 0..4 {
                let y = g.transfer().value(g.beta()[i] * g.hidden_field(i, &x));
                prop_assert!(y >= 0.0);
            }
        }
    }
}
