//! Builds the super-solution for each regime of a `σ` sweep, certifies it and
//! compares the extrapolated `lim_{b→0} a(b)` with the closed form.
//!
//! cargo run --release --example build_barriers

use plbarrier::barrier_factory::{admissible_b, build_case, classify, extrapolate_a_limit, Direction};
use plbarrier::operators::OperatorSpec;
use plbarrier::params::ProblemParams;
use plbarrier::residual_certifier::{certify, CertifyOptions};

fn main() -> plbarrier::Result<()> {
    let options = CertifyOptions {
        n_samples: 20_000,
        ..Default::default()
    };
    let ops = [
        OperatorSpec::grad_trace_minus_infinity(2, 0.0)?,
        OperatorSpec::truncated_eigen_sum(3, 0.0, 2)?,
    ];
    for op in ops {
        println!("{} (k = {}, γ = {})", op.name(), op.k(), op.gamma());
        for sigma in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 8.0] {
            let params = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)?;
            let case = classify(&params)?;
            let adm = admissible_b(&params, Direction::Super)?;
            let w = build_case(&params, case, None, None)?;
            let cert = certify(&params, &w, &options)?;
            let ex = extrapolate_a_limit(&params, Direction::Super, 20)?;
            println!(
                "  σ = {sigma:<4} {:<7} b = {:<10.4e} a = {:<10.4e} {:<28} worst = {:>10.3e} {}  a(0+) ≈ {:.6} (closed form {:.6})",
                case.as_str(),
                w.b,
                w.a,
                adm.condition,
                cert.worst_residual,
                if cert.passed { "pass" } else { "FAIL" },
                ex.estimate,
                ex.closed_form
            );
        }
    }
    Ok(())
}
