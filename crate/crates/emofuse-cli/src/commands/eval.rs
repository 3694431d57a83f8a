//! `eval` and `predict`: run a checkpoint over a corpus; metrics JSON for
//! the former, per-instance CSV for the latter.

use std::path::PathBuf;

use emofuse::corpus::load_conversations;
use emofuse::nn::checkpoint;
use emofuse::tasks::{evaluate, ModelMeta, Resources};
use emofuse::{Error, Result};

use crate::manifest::write_run_manifest;
use crate::EvalArgs;

pub fn run(args: EvalArgs, seed: Option<u64>, out: Option<PathBuf>, predictions: bool) -> Result<i32> {
    let out_dir = super::require_out(out)?;
    let (mut store, manifest) = checkpoint::load(&args.checkpoint)?;
    let meta: ModelMeta = serde_json::from_value(manifest.meta.clone())
        .map_err(|e| Error::validation(format!("checkpoint metadata: {e}")))?;

    let command = if predictions { "predict" } else { "eval" };
    write_run_manifest(
        &out_dir,
        command,
        seed.unwrap_or(meta.config.seed),
        serde_json::to_value(&meta.config).expect("config serializes"),
        &[args.checkpoint.as_path(), args.data.as_path()],
    )?;

    let conversations = load_conversations(&args.data)?;
    let res = Resources {
        lexicon: super::load_lexicon(args.function_words.as_deref())?,
        kb: super::load_kb_or_empty(args.kb.as_deref())?,
        audio: meta.audio,
        audio_base: args
            .audio_base
            .clone()
            .or_else(|| args.data.parent().map(|p| p.to_path_buf())),
    };
    let evaluation = evaluate(&conversations, &mut store, &meta, &res)?;

    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&evaluation.to_json()).expect("metrics serialize"),
    )?;
    if predictions {
        let mut csv = String::from("instance_id,true,pred");
        for label in &meta.label_set {
            csv.push_str(&format!(",logit_{label}"));
        }
        csv.push('\n');
        for p in &evaluation.predictions {
            csv.push_str(&format!(
                "{},{},{}",
                p.instance_id, meta.label_set[p.true_label], meta.label_set[p.predicted]
            ));
            for logit in &p.logits {
                csv.push_str(&format!(",{logit}"));
            }
            csv.push('\n');
        }
        std::fs::write(out_dir.join("predictions.csv"), csv)?;
    }

    let m = evaluation.metrics;
    println!(
        "{} instances: UAR {:.4} M-F1 {:.4} Acc {:.4} W-F1 {:.4}",
        evaluation.predictions.len(),
        m.uar,
        m.macro_f1,
        m.accuracy,
        m.weighted_f1
    );
    Ok(0)
}
