//! Minimal reverse-mode-differentiable tensor engine.
//!
//! 64-bit floats throughout; every differentiable operation is verified
//! against central finite differences (see [`gradcheck`]). Compute graphs
//! are single-threaded; [`params::ParamStore`] snapshots are plain data and
//! may move between threads.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, DEFAULT_STEP};
pub use graph::{Graph, Tensor};
pub use layers::{
    layer_norm, linear, multi_head_attention, sinusoidal_positions, transformer_layer,
    transformer_stack, with_positions, LayerCfg, LAYER_NORM_EPS,
};
pub use params::{fnv1a, Ctx, Init, ParamStore};
