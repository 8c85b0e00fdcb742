//! Reverse-mode differentiation over 4-D tensors and the U-Net used for
//! evidential and softmax occupancy prediction.

pub mod loss;
pub mod net;
pub mod optim;
pub mod predict;
pub mod tape;
pub mod tensor;
pub mod train;

pub use net::{Architecture, Head, NetworkParams};
pub use optim::OptimizerKind;
pub use predict::{mc_predict, mc_samples, reduce_evidence, reduce_softmax, Reduction};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
pub use train::{train, Example, MetricRow, Split, TrainConfig};
