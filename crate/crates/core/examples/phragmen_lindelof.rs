//! Runs the radial scheme on growing balls with boundary data of size
//! `R^β / log(1 + R)` and reports how far the value near the center rises
//! above `ν + αT`.
//!
//! cargo run --release --example phragmen_lindelof

use plbarrier::comparison_lab::{pl_experiment, PlSettings};
use plbarrier::operators::OperatorSpec;
use plbarrier::params::ProblemParams;

fn main() -> plbarrier::Result<()> {
    let op = OperatorSpec::grad_trace_minus_infinity(2, 0.0)?;
    let params = ProblemParams::new(op, 0.0, 1.0, 1.0)?;
    let beta = params.gamma_star().expect("k > 1");
    let settings = PlSettings::default();
    let started = std::time::Instant::now();
    let report = pl_experiment(&params, beta, &[5.0, 10.0, 20.0, 40.0], &settings)?;
    println!("growth exponent {beta}, nu = {}, probe radius {}", settings.nu, settings.probe_radius);
    println!("{:>6} {:>14} {:>10} {:>14}", "R", "sup_center", "bound", "margin");
    for row in &report.rows {
        println!("{:>6} {:>14.6} {:>10.4} {:>14.6e}", row.radius, row.sup_center, row.bound, row.margin);
    }
    println!("margin nonincreasing in R: {}", report.margin_nonincreasing());
    println!("elapsed {:.1?}", started.elapsed());
    Ok(())
}
