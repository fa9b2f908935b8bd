//! General vector machines.
//!
//! A GVM is a three-layer network `M -> N -> L` whose output weights are fixed
//! to random ±1 values and whose hidden layer (weights, transfer coefficients
//! and biases) is found by Monte Carlo adaptation: one hidden parameter is
//! perturbed at a time and the change is kept if the training cost does not
//! get worse. Cached local fields make every proposal cost `O(P + LP)`.
//!
//! Around the trainer sit the pieces needed to pick a control point rather
//! than a single machine: risk measures over replica ensembles, joint
//! machines, synthetic goal functions and sample pretreatments, and dataset
//! and model I/O.

pub mod datagen;
pub mod ensemble;
mod error;
pub mod io;
pub mod model;
pub mod risk;
pub mod trainer;
pub mod transfer;

pub use error::{Error, Result};
pub use model::{ControlParams, Dataset, Dims, Gvm, Margin, Task};
pub use trainer::{CostKind, StopReason, StopRule, TrainReport, TrainerState};
pub use transfer::TransferKind;
