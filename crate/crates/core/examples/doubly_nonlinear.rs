//! Classifies a few nonlinearities `f`, builds the change of variables
//! `u = φ(v)` and prints `φ` and `Z` next to the closed forms of the power
//! family.
//!
//! cargo run --release --example doubly_nonlinear

use plbarrier::dnl_transform::{build_phi, classify_f, sandwich_check, Nonlinearity, PowerFamily};

fn main() -> plbarrier::Result<()> {
    let k = 3.0;
    let candidates = [
        Nonlinearity::power(0.5, 0.0),
        Nonlinearity::power(1.0, 1.0),
        Nonlinearity::new("s^2", |s| s * s),
        Nonlinearity::new("1 + s", |s| 1.0 + s),
    ];
    for f in &candidates {
        let rep = classify_f(f, k, 1e-10)?;
        println!("{:<12} {}", f.name(), rep.classification);
    }

    let family = PowerFamily::new(0.5, 1.0, k)?;
    let spec = build_phi(family.nonlinearity(), k, classify_f(&family.nonlinearity(), k, 1e-10)?.classification)?;
    println!("\nv      φ(v) numeric   φ(v) exact     Z(v)");
    for v in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
        println!("{v:<6} {:<14.10} {:<14.10} {:.6e}", spec.phi(v)?, family.phi(v), family.z(v));
    }

    let f = Nonlinearity::new("1 + s", |s| 1.0 + s);
    let sw = sandwich_check(&f, k, 0.1, 0.5, 10.0, 1_000)?;
    println!("\nsandwich on 1 + s with (f^(1/2))' ∈ [0.1, 0.5]: ω = {:.3}, passed = {}", sw.omega, sw.passed());
    Ok(())
}
