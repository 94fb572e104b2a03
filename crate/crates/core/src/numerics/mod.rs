//! Dense networks with hand-written backpropagation, the substrate for both
//! federated models and actor/critic networks.

mod gradcheck;
mod loss;
mod mlp;
mod param;

pub use gradcheck::{finite_difference, grad_check, FD_STEP};
pub use loss::{ce_loss_and_grad, mse_loss_and_grad, LabelledRow};
pub use mlp::{log_sum_exp, softmax, Activation, MlpSpec, OutputHead};
pub use param::{sgd_step, Gradient, ParamVector};

pub(crate) use loss::ce_from_logits;
pub(crate) use param::sgd_step_in_place;
