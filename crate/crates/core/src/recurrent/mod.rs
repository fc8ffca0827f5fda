//! Recurrent forecasting engine.

pub mod cell;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod network;
pub mod optim;
pub mod train;

pub use cell::{CellKind, RecurrentCell};
pub use gradcheck::{gradient_check, CheckScope};
pub use loss::Loss;
pub use model::{ModelSpec, SerialModel, TrainReport};
pub use network::{Dense, Encoder, Network, Refiner, Sample, TensorRole};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{fit_network, EarlyStopping, EpochRecord, History, TrainConfig, Verdict};
