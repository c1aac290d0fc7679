//! Dense tensors, a reverse-mode tape, LSTM cells and gradient checking.

pub mod attention;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod optim;
pub mod params;
pub mod tape;
mod tensor;

pub use attention::attention_pool;
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use lstm::{bilstm_encode, lstm_step, BiLstmParams, LstmParams};
pub use optim::{Adam, Optimizer, OptimizerKind, Sgd};
pub use params::{Gradients, ParamId, ParamSet};
pub use tape::{Bound, CustomOp, Tape, Var};
pub use tensor::{argmax, Tensor};
