//! Shared neural building blocks: dense tensors, token embedding providers,
//! a gated recurrent encoder, additive attention, and stateless vector ops.
//!
//! Everything here is deterministic `f64` arithmetic with hand-rolled
//! backward passes; there is no autodiff and no external numeric dependency.

pub mod attention;
pub mod embedding;
pub mod linalg;
pub mod ops;
pub mod rnn;

pub use attention::{AttnForward, Attention};
pub use embedding::{embed_tokens, EmbeddingProvider, ProviderSpec, UNK_TOKEN};
pub use linalg::Tensor;
pub use ops::{argmax, mean_pool, softmax};
pub use rnn::{GruCell, GruForward};
