//! Discrete comparison experiments on a ball: ordered data stay ordered, a
//! certified barrier stays above the numerical solution, and the scheme
//! self-converges under refinement.
//!
//! cargo run --release --example comparison_lab

use plbarrier::barrier_factory::{build_linear_unchecked_b, Direction};
use plbarrier::comparison_lab::{
    check_comparison, refinement_study, run, run_ordered_pair, Dynamics, RadialGridField, SchemeConfig,
};
use plbarrier::operators::OperatorSpec;
use plbarrier::params::{ChiProfile, ProblemParams};
use plbarrier::residual_certifier::{certify, CertifyOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> plbarrier::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let radius = 3.0;

    println!("ordered pairs");
    for trial in 0..4 {
        let op = if trial % 2 == 0 {
            OperatorSpec::grad_trace_minus_infinity(2, 0.0)?
        } else {
            OperatorSpec::truncated_eigen_sum(3, 0.0, 2)?
        };
        let sigma = [0.0, 2.0][trial / 2];
        let chi = if trial % 2 == 0 { 0.5 } else { -0.5 };
        let params = ProblemParams::new(op, sigma, 0.5, 0.5)?;
        let amp: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let bump: f64 = rng.random_range(0.0..2.0);
        let lower = move |r: f64| amp[0] * (r).cos() + amp[1] * (2.0 * r).cos() + amp[2] * (0.5 * r).sin();
        let upper = move |r: f64| lower(r) + bump * (1.0 - (r / radius).powi(2)).powi(2);
        let edge = lower(radius);
        let dynamics = Dynamics::new(params, ChiProfile::Const(chi), move |_| edge);
        let u = RadialGridField::new(radius, 60, lower)?;
        let v = RadialGridField::new(radius, 60, upper)?;
        let rep = run_ordered_pair(&u, &v, &dynamics, &SchemeConfig::new(u.h, 0.5))?;
        println!(
            "  trial {trial}: {} steps, {} violations, max(u - v) = {:.3e}",
            rep.steps, rep.violations, rep.worst_gap
        );
    }

    println!("barrier domination, nu = 1, alpha = 1");
    let op = OperatorSpec::grad_trace_minus_infinity(2, 0.0)?;
    let params = ProblemParams::new(op, 0.0, 1.0, 1.0)?;
    let nu = 1.0;
    let eps_min = 1e-4;
    let edge = 0.5 * nu * (1.0 + radius.cos());
    let dynamics = Dynamics::new(params.clone(), ChiProfile::Const(1.0), move |t| {
        edge + eps_min * radius * radius * t
    });
    let u0 = RadialGridField::new(radius, 60, |r| 0.5 * nu * (1.0 + r.cos()))?;
    let config = SchemeConfig::new(u0.h, 1.0);
    let traj = run(&u0, &dynamics, &config, 1)?;
    let dt_max = traj.snapshots.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max);
    let tol = u0.h + dt_max;
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let w = build_linear_unchecked_b(&params, eps, Direction::Super)?;
        let cert = certify(&params, &w, &CertifyOptions { n_samples: 20_000, ..Default::default() })?;
        let rep = check_comparison(&traj, |r, t| nu + w.value(r, t).unwrap(), tol);
        println!(
            "  eps = {eps:.0e}: certified {}, boundary ok {}, violations {}, worst excess {:.3e}",
            cert.passed, rep.boundary_ok, rep.violations, rep.worst_excess
        );
    }
    let center = traj.snapshots.iter().map(|f| f.values[0] - (nu + f.t)).fold(f64::NEG_INFINITY, f64::max);
    println!("  max over t of u(0, t) - (nu + alpha t) = {center:.3e} (tol {tol:.3e})");

    println!("self-convergence");
    let op = OperatorSpec::truncated_eigen_sum(3, 0.0, 2)?;
    let params = ProblemParams::new(op, 0.0, 0.1, 0.0)?;
    let dynamics = Dynamics::new(params, ChiProfile::Const(0.0), |_| 2f64.cos());
    let rep = refinement_study(|r| r.cos(), &dynamics, 2.0, 1.0, 0.1, 20, 4, 0.9)?;
    for ((h, d), order) in rep.levels.iter().zip(rep.orders.iter().map(Some).chain([None])) {
        println!("  h = {h:.4}: max diff {d:.3e} {}", order.map(|o| format!("order {o:.2}")).unwrap_or_default());
    }
    Ok(())
}
