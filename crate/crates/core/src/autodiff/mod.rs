//! Reverse-mode differentiation over real tensors.

mod gradcheck;
mod tape;

pub use gradcheck::grad_check;
pub use tape::{CtcItem, Elementwise, Gradients, Tape, Var};
pub(crate) use tape::{log_sum_exp, softmax_in_place};
