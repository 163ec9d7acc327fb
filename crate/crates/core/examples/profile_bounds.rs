//! Tabulates the radial profiles used by the barriers and runs the growth
//! and derivative bounds on a regularized power profile.
//!
//! cargo run --release --example profile_bounds

use plbarrier::radial_profiles::{bounds_suite, RadialProfile};

fn main() -> plbarrier::Result<()> {
    let profiles = [
        RadialProfile::power(3.0)?,
        RadialProfile::regularized_power(2.5, 1.5)?,
        RadialProfile::exp_square(0.7)?,
        RadialProfile::exp_linear_reg(1.2)?,
        RadialProfile::inverse_gap(2.0)?,
        RadialProfile::gaussian(0.5)?,
    ];
    for p in &profiles {
        println!("{}", p.describe());
        for r in [0.0, 0.5, 1.0, 1.5] {
            if p.check_domain(r).is_err() {
                continue;
            }
            println!("  r = {r:<4} v = {:>11.5e}  v' = {:>11.5e}  v'' = {:>11.5e}", p.value(r)?, p.d1(r)?, p.d2(r)?);
        }
    }

    let reg = RadialProfile::regularized_power(3.0, 1.5)?;
    let radii: Vec<f64> = (0..400).map(|i| 1e-3 * 1.03f64.powi(i)).collect();
    let rep = bounds_suite(&reg, &radii, 2.0, 3.0)?;
    println!(
        "\nbounds on {}: {} rows, {} violations, worst normalized slack {:.3e}",
        reg.name(),
        rep.rows.len(),
        rep.violations,
        rep.worst_slack
    );
    Ok(())
}
