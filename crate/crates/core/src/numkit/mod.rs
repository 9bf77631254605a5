//! Dense linear algebra and feed-forward networks with hand-written gradients.

mod adam;
mod fd;
pub mod flops;
mod init;
mod matrix;
mod net;

pub use adam::{AdamConfig, AdamState};
pub use fd::{finite_diff_grad, max_rel_error, rel_error};
pub use init::{init_bias, init_params, init_params_with, seeded_rng};
pub use matrix::Matrix;
pub use net::{sigmoid as net_sigmoid, Activation, Dense, DenseNet, LayerGrad, NetGrads, Tape};
