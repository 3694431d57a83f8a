//! `ablate`: the four-variant grid (full, w/o KWRT, w/o PE, w/o TMF) with a
//! shared seed, reported as deltas against the full model.

use std::path::PathBuf;

use emofuse::audio::AudioConfig;
use emofuse::corpus::load_conversations;
use emofuse::tasks::run_ablation;
use emofuse::Result;

use crate::manifest::write_run_manifest;
use crate::TrainArgs;

pub fn run(args: TrainArgs, seed: Option<u64>, out: Option<PathBuf>) -> Result<i32> {
    let out_dir = super::require_out(out)?;
    let cfg = super::train::resolve_config(&args, seed)?;
    write_run_manifest(
        &out_dir,
        "ablate",
        cfg.seed,
        serde_json::to_value(&cfg).expect("config serializes"),
        &super::train::manifest_inputs(&args),
    )?;

    let conversations = load_conversations(&args.data)?;
    let res = super::build_resources(
        args.kb.as_deref(),
        args.function_words.as_deref(),
        args.audio_base.clone(),
        &args.data,
        AudioConfig::default(),
    )?;
    let table = run_ablation(&conversations, &cfg, &res)?;

    std::fs::write(
        out_dir.join("ablation.json"),
        serde_json::to_string_pretty(&table).expect("table serializes"),
    )?;
    print!("{}", table.render_text());
    Ok(0)
}
