//! Minimal differentiable-computation substrate.
//!
//! Everything is 64-bit floats on the CPU. A [`ParamStore`] owns named
//! parameter tensors; a [`Tape`] records matrix-level primitive operations
//! during a forward pass and replays them in reverse to fill exact gradients.
//! Gradients of every exported op are verified against central finite
//! differences (see [`finite_difference_check`]).
//!
//! Two forward modes share one code path: recording (builds backward nodes)
//! and evaluation (same math, no nodes). This keeps the policy executed at
//! rollout time bit-identical to the one differentiated at training time.

mod attention;
mod checkpoint;
mod error;
mod fdcheck;
mod lstm;
mod ops;
mod optim;
mod tape;
mod tensor;

pub use attention::{attention_block, attention_block_with_weights, AttentionParams};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, FORMAT_VERSION};
pub use error::{NnError, Result};
pub use fdcheck::{finite_difference_check, DiffModel};
pub use lstm::{bilstm_forward, lstm_final_hidden, BiLstmParams, LstmParams};
pub use ops::*;
pub use optim::Adam;
pub use tape::{Buf, BufId, Tape};
pub use tensor::{ParamId, ParamStore, ParamTensor};
