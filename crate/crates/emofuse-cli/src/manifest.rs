//! Run manifests: resolved config, seed, toolchain revision, timestamps,
//! and input digests, written before any long-running work starts.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use emofuse::Result;

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub git_describe: String,
    pub started_at: String,
    pub resolved_config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
}

pub fn write_run_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    resolved_config: serde_json::Value,
    inputs: &[&Path],
) -> Result<()> {
    let mut digests = Vec::new();
    for path in inputs {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        digests.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
    }
    let manifest = RunManifest {
        command: command.to_string(),
        seed,
        git_describe: git_describe(),
        started_at: chrono::Utc::now().to_rfc3339(),
        resolved_config,
        inputs: digests,
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}
