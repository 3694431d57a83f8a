//! Ablation grid: full model vs. each module removed, trained with a shared
//! seed and reported as metric deltas against the full run.

use serde::Serialize;

use super::train::{evaluate, split_corpus, train};
use super::{Metrics, Resources, TrainConfig};
use crate::corpus::Conversation;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub name: String,
    /// `None` for the full-model baseline row (rendered as "/").
    pub uar_delta: Option<f64>,
    pub macro_f1_delta: Option<f64>,
    pub accuracy_delta: Option<f64>,
    pub weighted_f1_delta: Option<f64>,
    pub trainable_params: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationTable {
    pub baseline: Metrics,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// Plain-text rendering, deltas in percentage points.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>10}\n",
            "variant", "UAR", "M-F1", "Acc", "W-F1", "params"
        ));
        for row in &self.rows {
            let cell = |d: Option<f64>| match d {
                None => "/".to_string(),
                Some(v) => format!("{:+.2}", v),
            };
            out.push_str(&format!(
                "{:<10} {:>8} {:>8} {:>8} {:>8} {:>10}\n",
                row.name,
                cell(row.uar_delta),
                cell(row.macro_f1_delta),
                cell(row.accuracy_delta),
                cell(row.weighted_f1_delta),
                row.trainable_params
            ));
        }
        out
    }
}

const VARIANTS: [&str; 4] = ["full", "w/o KWRT", "w/o PE", "w/o TMF"];

fn variant_config(base: &TrainConfig, name: &str) -> TrainConfig {
    let mut cfg = base.clone();
    match name {
        "full" => {}
        "w/o KWRT" => cfg.no_kwrt = true,
        "w/o PE" => cfg.no_pe = true,
        "w/o TMF" => cfg.no_tmf = true,
        other => panic!("unknown ablation variant {other}"),
    }
    cfg
}

/// Train and evaluate the four variants with one shared seed. The corpus is
/// split by id hash; evaluation uses the test split when it is non-empty
/// and falls back to the whole corpus for tiny datasets.
pub fn run_ablation(
    conversations: &[Conversation],
    cfg: &TrainConfig,
    res: &Resources,
) -> Result<AblationTable> {
    if !cfg.modality.uses_audio() || !cfg.modality.uses_text() {
        return Err(Error::validation(
            "the ablation grid requires the multi-modal configuration".to_string(),
        ));
    }
    let (train_set, _dev, test_set) = split_corpus(conversations, cfg.seed);
    let train_set = if train_set.is_empty() {
        conversations.to_vec()
    } else {
        train_set
    };
    let eval_set: &[Conversation] = if test_set.is_empty() {
        conversations
    } else {
        &test_set
    };

    let mut baseline: Option<Metrics> = None;
    let mut rows = Vec::with_capacity(VARIANTS.len());
    for name in VARIANTS {
        let vcfg = variant_config(cfg, name);
        let mut outcome = train(&train_set, &vcfg, res)?;
        let evaluation = evaluate(eval_set, &mut outcome.store, &outcome.meta, res)?;
        let m = evaluation.metrics;
        let params = outcome.store.total_params();
        match baseline {
            None => {
                baseline = Some(m);
                rows.push(AblationRow {
                    name: name.to_string(),
                    uar_delta: None,
                    macro_f1_delta: None,
                    accuracy_delta: None,
                    weighted_f1_delta: None,
                    trainable_params: params,
                });
            }
            Some(base) => {
                rows.push(AblationRow {
                    name: name.to_string(),
                    uar_delta: Some((m.uar - base.uar) * 100.0),
                    macro_f1_delta: Some((m.macro_f1 - base.macro_f1) * 100.0),
                    accuracy_delta: Some((m.accuracy - base.accuracy) * 100.0),
                    weighted_f1_delta: Some((m.weighted_f1 - base.weighted_f1) * 100.0),
                    trainable_params: params,
                });
            }
        }
    }
    Ok(AblationTable {
        baseline: baseline.expect("baseline run present"),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_renders_baseline_as_slash() {
        let table = AblationTable {
            baseline: Metrics {
                uar: 0.9,
                macro_f1: 0.9,
                accuracy: 0.9,
                weighted_f1: 0.9,
            },
            rows: vec![
                AblationRow {
                    name: "full".into(),
                    uar_delta: None,
                    macro_f1_delta: None,
                    accuracy_delta: None,
                    weighted_f1_delta: None,
                    trainable_params: 100,
                },
                AblationRow {
                    name: "w/o KWRT".into(),
                    uar_delta: Some(-0.93),
                    macro_f1_delta: Some(-0.89),
                    accuracy_delta: Some(-1.0),
                    weighted_f1_delta: Some(-1.1),
                    trainable_params: 98,
                },
            ],
        };
        let text = table.render_text();
        let baseline_line = text.lines().nth(1).unwrap();
        assert!(baseline_line.contains('/'));
        assert!(text.contains("-0.93"));
    }

    #[test]
    fn text_only_config_is_rejected() {
        let cfg = TrainConfig {
            modality: crate::tasks::Modality::Text,
            ..TrainConfig::default()
        };
        let res = Resources::text_only(
            std::collections::BTreeSet::new(),
            crate::knowledge::KnowledgeBase::new(),
        );
        assert!(run_ablation(&[], &cfg, &res).is_err());
    }
}
