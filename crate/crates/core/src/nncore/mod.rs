//! Tensors, the peephole LSTM cell, softmax/cross-entropy, tape-based
//! reverse-mode differentiation and SGD with momentum.

mod gradcheck;
mod lstm;
mod ops;
mod optim;
mod param;
mod tape;
mod tensor;

pub use gradcheck::{
    finite_difference_check, relative_error, GradCheckOptions, GradCheckReport, LossMode,
    ParamCheck, DEFAULT_EPS,
};
pub use lstm::{lstm_forward, lstm_forward_from, lstm_step, LstmParams, LstmState};
pub use ops::{affine, cross_entropy, log_softmax, sigmoid, softmax, softmax_tensor};
pub use optim::sgd_momentum_step;
pub use param::{ParamId, ParamStore, Parameter, INIT_SCALE};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
