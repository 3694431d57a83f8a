//! Emotion-cues extraction and fusion for conversational emotion tasks.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! - [`corpus`]: conversation loading, task windowing (prediction and
//!   recognition instances), speaker-tagged token rendering.
//! - [`knowledge`]: an offline word-relation store (IsA / HasContext /
//!   Causes triples).
//! - [`kwrt`]: knowledge-based word-relation tagging — word-importance
//!   matrices and the feature scaling derived from them.
//! - [`audio`]: WAV ingestion, mel spectrograms, pitch/energy prosody
//!   frames, and the prosody-enhancement residual.
//! - [`nn`]: a reverse-mode autodiff engine with transformers and Adam.
//! - [`fusion`]: cross-attention initial fusion plus bridge-token fusion
//!   blocks over the mel branch, and dual averaged-logit classification.
//! - [`tasks`]: end-to-end model assembly, training, evaluation, metrics,
//!   and the ablation grid.

pub mod audio;
pub mod corpus;
pub mod error;
pub mod fusion;
pub mod gradsuite;
pub mod knowledge;
pub mod kwrt;
pub mod nn;
pub mod synth;
pub mod tasks;

pub use error::{Error, Result};
