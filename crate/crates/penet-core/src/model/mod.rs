//! The enhancement network: per-component detail branches, the
//! low-frequency filter, pyramid-wide forward passes, training and
//! gradient verification.

mod check;
mod forward;
mod params;
mod train;

pub use check::{full_model_grad_check, BlockCheck, CHECK_IMAGE_SIDE};
pub use forward::{
    context_branch, context_branch_on, edge_branch, edge_branch_on, enhance_component,
    enhance_component_on, lef, lef_on, penet_forward, penet_forward_preclamp,
    penet_forward_taped, residual_block, residual_block_on, TapedForward,
};
pub use params::{
    ContextBranchParams, EdgeBranchParams, LefParams, LevelParams, PENetParams,
    ResidualBlockParams, FEATURE_CHANNELS, LEF_GROUPS, LEF_POOL_SIZES, NUM_LEVELS,
};
pub use train::{train_demo, DARKEN_FACTOR, TRAIN_IMAGE_SIDE};
