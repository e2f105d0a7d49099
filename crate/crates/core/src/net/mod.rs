//! μP and SP multilayer perceptrons: initialization, forward/backward passes,
//! SGD, Jacobians, Hessian-vector products and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod hessian;
pub mod mlp;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use config::{effective_lr, Activation, LossKind, NetConfig, Parameterization, TrainSchedule};
pub use hessian::{hvp, hvp_with};
pub use mlp::{
    backprop_deltas, feature_movement, forward, loss_and_grads, loss_and_grads_offset, mse, per_output_jacobian, relu, vjp, ForwardTrace,
};
pub use params::{init_params, sgd_step, ParamSet};
