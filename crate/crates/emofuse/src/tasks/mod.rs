//! End-to-end model assembly, training, evaluation, and the ablation grid.

pub mod ablate;
pub mod metrics;
pub mod model;
pub mod train;

pub use ablate::{run_ablation, AblationRow, AblationTable};
pub use metrics::{compute_metrics, ConfusionMatrix, Metrics};
pub use model::{ModelMeta, PreparedInstance, Resources, Vocabulary};
pub use train::{evaluate, split_corpus, train, EpochStats, Evaluation, Prediction, TrainOutcome};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Predict the emotion of the next utterance from history.
    Epc,
    /// Label each utterance already in the dialogue.
    Erc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "t")]
    Text,
    #[serde(rename = "s")]
    Speech,
    #[serde(rename = "t+s")]
    TextSpeech,
}

impl Modality {
    pub fn uses_text(self) -> bool {
        matches!(self, Modality::Text | Modality::TextSpeech)
    }

    pub fn uses_audio(self) -> bool {
        matches!(self, Modality::Speech | Modality::TextSpeech)
    }
}

/// Flat training configuration; this is also the CLI config-file schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub task: Task,
    pub modality: Modality,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub model_dim: usize,
    pub n_heads: usize,
    pub text_layers: usize,
    pub audio_layers: usize,
    pub mfm_blocks: usize,
    pub bridge_len: usize,
    /// History window in turns.
    pub window: usize,
    pub no_kwrt: bool,
    pub no_pe: bool,
    pub no_tmf: bool,
    /// Stop when training accuracy reaches this value (e.g. 1.0), if set.
    pub early_stop_train_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::Epc,
            modality: Modality::TextSpeech,
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 50,
            seed: 7,
            model_dim: 64,
            n_heads: 4,
            text_layers: 2,
            audio_layers: 2,
            mfm_blocks: 2,
            bridge_len: 4,
            window: 3,
            no_kwrt: false,
            no_pe: false,
            no_tmf: false,
            early_stop_train_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn layer_cfg(&self) -> crate::nn::LayerCfg {
        crate::nn::LayerCfg::new(self.model_dim, self.n_heads)
    }
}
