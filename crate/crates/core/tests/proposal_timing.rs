//! Per-proposal cost depends on P and L only, not on the hidden width.

use std::time::{Duration, Instant};

use gvm_core::{
    ControlParams, CostKind, Dataset, Dims, Gvm, Margin, StopRule, TrainerState, TransferKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 200;
const PROPOSALS: usize = 40_000;

fn dataset() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inputs: Vec<f64> = (0..SAMPLES * 4)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let labels: Vec<usize> = (0..SAMPLES).map(|mu| mu % 3).collect();
    Dataset::classification(inputs, 4, labels, 3).unwrap()
}

fn control(n_hidden: usize) -> ControlParams {
    ControlParams {
        c_beta: 1.0,
        c_w: 1.0,
        c_b: 1.0,
        margin: Margin::Single(1.0),
        n_hidden,
        transfer: TransferKind::Gaussian,
        cost: CostKind::F2,
        stop: StopRule {
            gamma0: None,
            max_steps: Some(1),
        },
        step_scale: 0.05,
        step_decades: 0.0,
        seed: 0,
    }
}

/// Best of several timed batches, to shed scheduler noise.
fn per_proposal(data: &Dataset, n_hidden: usize) -> Duration {
    let c = control(n_hidden);
    let gvm = Gvm::init_random(Dims::new(4, n_hidden, 3).unwrap(), &c, 1).unwrap();
    let mut state = TrainerState::new(gvm, data, &c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..PROPOSALS / 4 {
        state.propose_and_apply(&mut rng);
    }
    (0..7)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..PROPOSALS {
                state.propose_and_apply(&mut rng);
            }
            t.elapsed() / PROPOSALS as u32
        })
        .min()
        .unwrap()
}

#[test]
fn doubling_hidden_width_keeps_proposal_cost() {
    let data = dataset();
    let small = per_proposal(&data, 100);
    let large = per_proposal(&data, 200);
    let ratio = large.as_secs_f64() / small.as_secs_f64();
    assert!(
        (ratio - 1.0).abs() < 0.2,
        "N=100: {small:?}, N=200: {large:?}, ratio {ratio:.3}"
    );
}
