//! `gradcheck`: run the gradient verification suite and report per-module
//! maximum relative errors.

use std::path::PathBuf;

use emofuse::gradsuite::{run_suite, TOLERANCE};
use emofuse::Result;

pub fn run(seed: Option<u64>, out: Option<PathBuf>) -> Result<i32> {
    let seed = seed.unwrap_or(super::DEFAULT_SEED);
    let results = run_suite(seed);
    let mut all_ok = true;
    for r in &results {
        let status = if r.passed() { "pass" } else { "FAIL" };
        println!("{:<24} max rel error {:>12.3e}  {}", r.name, r.max_rel_error, status);
        all_ok &= r.passed();
    }
    println!(
        "gradcheck: {}/{} modules within {:.0e}",
        results.iter().filter(|r| r.passed()).count(),
        results.len(),
        TOLERANCE
    );
    if let Some(out_dir) = out {
        std::fs::create_dir_all(&out_dir)?;
        let json: Vec<serde_json::Value> = results
            .iter()
            .map(|r| {
                serde_json::json!({
                    "module": r.name,
                    "max_rel_error": r.max_rel_error,
                    "pass": r.passed(),
                })
            })
            .collect();
        std::fs::write(
            out_dir.join("gradcheck.json"),
            serde_json::to_string_pretty(&json).expect("report serializes"),
        )?;
    }
    Ok(if all_ok { 0 } else { 1 })
}
