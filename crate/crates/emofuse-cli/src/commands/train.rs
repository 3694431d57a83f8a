//! `train`: resolve configuration, write a run manifest, train, and save
//! the checkpoint and loss trace.

use std::path::{Path, PathBuf};

use emofuse::audio::AudioConfig;
use emofuse::corpus::load_conversations;
use emofuse::nn::checkpoint;
use emofuse::tasks::{train, Modality, Task, TrainConfig};
use emofuse::{Error, Result};

use crate::manifest::write_run_manifest;
use crate::TrainArgs;

pub fn resolve_config(args: &TrainArgs, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = match &args.config {
        Some(path) => {
            let bytes = std::fs::read(path)?;
            serde_json::from_slice(&bytes)
                .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(task) = &args.task {
        cfg.task = parse_task(task)?;
    }
    if let Some(modality) = &args.modality {
        cfg.modality = parse_modality(modality)?;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.window {
        cfg.window = v;
    }
    if let Some(v) = args.model_dim {
        cfg.model_dim = v;
    }
    if let Some(v) = args.n_heads {
        cfg.n_heads = v;
    }
    if let Some(v) = args.early_stop_acc {
        cfg.early_stop_train_acc = Some(v);
    }
    if args.no_kwrt {
        cfg.no_kwrt = true;
    }
    if args.no_pe {
        cfg.no_pe = true;
    }
    if args.no_tmf {
        cfg.no_tmf = true;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if cfg.model_dim % cfg.n_heads != 0 {
        return Err(Error::validation(format!(
            "model_dim {} is not divisible by n_heads {}",
            cfg.model_dim, cfg.n_heads
        )));
    }
    Ok(cfg)
}

fn parse_task(s: &str) -> Result<Task> {
    match s.to_lowercase().as_str() {
        "epc" => Ok(Task::Epc),
        "erc" => Ok(Task::Erc),
        other => Err(Error::validation(format!("unknown task {other:?} (epc|erc)"))),
    }
}

fn parse_modality(s: &str) -> Result<Modality> {
    match s.to_lowercase().as_str() {
        "t" => Ok(Modality::Text),
        "s" => Ok(Modality::Speech),
        "t+s" | "ts" => Ok(Modality::TextSpeech),
        other => Err(Error::validation(format!("unknown modality {other:?} (t|s|t+s)"))),
    }
}

pub fn manifest_inputs<'a>(args: &'a TrainArgs) -> Vec<&'a Path> {
    let mut inputs: Vec<&Path> = vec![args.data.as_path()];
    if let Some(c) = &args.config {
        inputs.push(c.as_path());
    }
    if let Some(k) = &args.kb {
        inputs.push(k.as_path());
    }
    if let Some(f) = &args.function_words {
        inputs.push(f.as_path());
    }
    inputs
}

pub fn run(args: TrainArgs, seed: Option<u64>, out: Option<PathBuf>) -> Result<i32> {
    let out_dir = super::require_out(out)?;
    let cfg = resolve_config(&args, seed)?;
    write_run_manifest(
        &out_dir,
        "train",
        cfg.seed,
        serde_json::to_value(&cfg).expect("config serializes"),
        &manifest_inputs(&args),
    )?;

    let conversations = load_conversations(&args.data)?;
    let res = super::build_resources(
        args.kb.as_deref(),
        args.function_words.as_deref(),
        args.audio_base.clone(),
        &args.data,
        AudioConfig::default(),
    )?;
    let outcome = train(&conversations, &cfg, &res)?;

    let meta = serde_json::to_value(&outcome.meta).expect("meta serializes");
    let manifest_path = checkpoint::save(&outcome.store, &meta, &out_dir, "checkpoint")?;
    std::fs::write(
        out_dir.join("trace.json"),
        serde_json::to_string_pretty(&outcome.trace).expect("trace serializes"),
    )?;

    let last = outcome.trace.last().expect("at least one epoch");
    println!(
        "trained {} epochs: loss {:.6} train-acc {:.4} params {} -> {}",
        outcome.trace.len(),
        last.mean_loss,
        last.train_accuracy,
        outcome.store.total_params(),
        manifest_path.display()
    );
    Ok(0)
}
