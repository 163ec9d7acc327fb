//! Sweeps `λ` for the built-in operators and prints the estimated limits of
//! `Λ_max` and `Λ_min` next to the values known in closed form, then runs
//! the structural condition checks.
//!
//! cargo run --release --example spectral_sweep

use plbarrier::operators::{check_conditions, estimate_lambda_sup_inf, OperatorSpec, SpectralBound};

fn short(b: SpectralBound) -> String {
    match b.finite() {
        Some(v) => format!("{v:.6}"),
        None => b.to_string(),
    }
}

fn main() -> plbarrier::Result<()> {
    let ops = [
        OperatorSpec::grad_trace_minus_infinity(2, 0.0)?,
        OperatorSpec::grad_trace_minus_infinity(3, 1.0)?,
        OperatorSpec::truncated_eigen_sum(3, 0.0, 2)?,
        OperatorSpec::truncated_eigen_sum(4, 2.0, 3)?,
    ];
    println!("{:<34} {:>10} {:>10} {:>6} {:>12}", "operator", "Λ^sup", "Λ_inf", "mono", "conditions");
    for op in &ops {
        let rep = estimate_lambda_sup_inf(op, (-1e3, 1e3), 201)?;
        let cond = check_conditions(op, 2_000, 7)?;
        println!(
            "{:<34} {:>10} {:>10} {:>6} {:>12}",
            op.name(),
            short(rep.lambda_sup),
            short(rep.lambda_inf),
            rep.monotonicity_violations,
            if cond.all_passed() { "pass" } else { "FAIL" }
        );
    }
    let tes = &ops[2];
    println!("\nsamples of {} near λ = 0:", tes.name());
    let rep = estimate_lambda_sup_inf(tes, (-4.0, 4.0), 9)?;
    for s in &rep.samples {
        println!("  λ = {:>5.1}  Λ_min = {:>8.4}  Λ_max = {:>8.4}", s.lambda, s.min, s.max);
    }
    Ok(())
}
