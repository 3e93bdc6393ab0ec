//! Layers with explicit forward and backward passes.
//!
//! Parameterised layers hold [`ParamId`](crate::params::ParamId)s into a
//! shared [`ParamStore`](crate::params::ParamStore); `forward` returns the
//! output plus a cache, and `backward` takes that cache, accumulates into a
//! [`Gradients`](crate::params::Gradients) buffer and returns the input
//! gradient. Caches are owned by the caller, so any number of evaluations can
//! be in flight against the same parameters.

pub mod activation;
pub mod conv;
pub mod init;
pub mod linear;
pub mod lstm;
pub mod pool;
pub mod sequence;

pub use activation::{log_softmax_per_frame, relu, relu_backward, softmax_per_frame};
pub use conv::{conv_output_len, Conv2d, ConvCache};
pub use linear::{InnerProduct, InnerProductCache};
pub use lstm::{Lstm, LstmCache, LstmState};
pub use pool::{MaxPool, PoolCache};
pub use sequence::{
    eltwise_sum, eltwise_sum_backward, permute_to_sequence, reverse, reverse_backward,
    sequence_to_feature_map,
};
