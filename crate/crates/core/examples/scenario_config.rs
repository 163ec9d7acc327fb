//! Loads `examples/scenario.toml`, certifies its cases and writes the CSV
//! artifacts into a temporary directory, as `plbarrier certify` would.
//!
//! cargo run --release --example scenario_config

use plbarrier::cli::{run_certify, run_report, ScenarioConfig};
use std::path::Path;

fn main() -> plbarrier::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenario.toml");
    let mut cfg = ScenarioConfig::load(&path)?;
    let out = std::env::temp_dir().join("plbarrier-scenario-example");
    cfg.out_override = Some(out.clone());
    let outcome = run_certify(&cfg)?;
    for row in &outcome.summary {
        println!(
            "{:<8} σ = {:<4} {:<24} worst = {:>10.3e} {}",
            row.case_id,
            row.sigma,
            row.profile,
            row.worst_residual.unwrap_or(f64::NAN),
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    let report = run_report(&out)?;
    println!("\n{} report sections written to {}", report.sections.len(), out.display());
    Ok(())
}
