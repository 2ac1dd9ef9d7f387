//! Graph convolution, multi-stage causal temporal convolution and the
//! multi-horizon regression head.
//!
//! Per frame the node features pass through the graph-convolution stack,
//! are flattened node-major, and enter the first temporal stage. Each stage
//! feeds the next (features by default) and every stage output goes through
//! the shared head, which bounds horizon `h` predictions to `(0, h)`.

mod config;
mod forward;
pub(crate) mod params;
mod streaming;

pub use config::ModelConfig;
pub use forward::{
    flatten_nodes, forward_on_tape, gc_forward, head_forward, model_forward, tcn_stage_forward, unflatten_nodes,
    ForwardVars,
};
pub use params::{ModelParams, ParamVars};
pub use streaming::StreamingPredictor;
