//! The classifier `f = h ∘ g`: a tanh MLP feature extractor `g` followed by a
//! linear head `h`, trained with hand-derived gradients.

mod forward;
mod fusion;
mod loss;
mod optim;
mod params;
mod schedule;

pub use forward::{forward, predict, ForwardRecord};
#[allow(unused_imports)]
pub(crate) use forward::{classifier_backward, classifier_logits, extract, extractor_backward};
pub use fusion::{fuse_parameters, init_student};
pub use loss::{head_gradient, loss_and_gradients, LossSpec};
pub use optim::{sgd_update, Sgd, SgdConfig};
pub use params::{load_checkpoint, save_checkpoint, Dense, ModelParams, CHECKPOINT_FORMAT};
pub use schedule::BetaSchedule;

#[cfg(test)]
pub(crate) use loss::gradcheck;
