//! Builds every barrier construction for a few operators and checks the sign
//! of its residual on sampled points plus the analytic large-r tail.
//!
//! cargo run --release --example certify_matrix

use plbarrier::barrier_factory::{build_case, classify, CaseId, SpecialCase};
use plbarrier::operators::OperatorSpec;
use plbarrier::params::ProblemParams;
use plbarrier::residual_certifier::{certify, CertifyOptions};

fn middle_eigenvalue() -> OperatorSpec {
    OperatorSpec::custom(3, 0.0, "middle_eigenvalue", |_q, x| x.eigenvalues_desc()[1]).unwrap()
}

fn main() -> plbarrier::Result<()> {
    let mut rows: Vec<(String, ProblemParams, CaseId, Option<SpecialCase>)> = Vec::new();
    for n in [2, 3] {
        let op = OperatorSpec::grad_trace_minus_infinity(n, 0.0)?;
        for sigma in [0.0, 1.0, 2.0, 3.0, 8.0] {
            let params = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)?;
            let case = classify(&params)?;
            rows.push((format!("gtmi n={n} sigma={sigma}"), params.clone(), case, None));
            rows.push((format!("gtmi n={n} sigma={sigma}"), params, CaseId::SubDegenerate, None));
        }
        let calm = ProblemParams::new(op.clone(), 0.0, 1.0, 0.0)?;
        rows.push((format!("gtmi n={n}"), calm, CaseId::DecayBall, Some(SpecialCase::DecayBall { radius: 5.0, mu: 1.0 })));
        for sigma in [3.0, 4.0] {
            let absorbing = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)?.with_alpha_hat_neg(-1.0)?;
            let (case, special) = if sigma == 3.0 {
                (CaseId::AbsorbingBallCritical, SpecialCase::AbsorbingBallCritical { radius: 5.0 })
            } else {
                (CaseId::AbsorbingBallStrong, SpecialCase::AbsorbingBallStrong { radius: 5.0 })
            };
            rows.push((format!("gtmi n={n} sigma={sigma}"), absorbing, case, Some(special)));
            let forced = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)?.with_alpha_hat_pos(1.0)?;
            rows.push((format!("gtmi n={n} sigma={sigma}"), forced, CaseId::ForcedBall, Some(SpecialCase::ForcedBall { radius: 5.0 })));
        }
    }
    for n in [3, 4] {
        let op = OperatorSpec::truncated_eigen_sum(n, 0.0, 2)?;
        for sigma in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 8.0] {
            let params = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)?;
            let case = classify(&params)?;
            rows.push((format!("tes n={n} sigma={sigma}"), params.clone(), case, None));
            if sigma > 1.0 {
                rows.push((format!("tes n={n} sigma={sigma}"), params, CaseId::SubUniform, None));
            }
        }
        let calm = ProblemParams::new(op.clone(), 0.0, 1.0, 0.0)?;
        rows.push((format!("tes n={n}"), calm, CaseId::DecayGaussian, Some(SpecialCase::DecayGaussian { mu: 1.0, spread: 0.1 })));
        for sigma in [1.0, 2.0] {
            let absorbing = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)?.with_alpha_hat_neg(-1.0)?;
            let (case, special) = if sigma == 1.0 {
                (CaseId::AbsorbingBallCritical, SpecialCase::AbsorbingBallCritical { radius: 5.0 })
            } else {
                (CaseId::AbsorbingBallStrong, SpecialCase::AbsorbingBallStrong { radius: 5.0 })
            };
            rows.push((format!("tes n={n} sigma={sigma}"), absorbing, case, Some(special)));
        }
    }
    let mid = middle_eigenvalue();
    for sigma in [0.0, 0.5, 1.0] {
        let params = ProblemParams::new(mid.clone(), sigma, 1.0, 1.0)?;
        rows.push((format!("middle sigma={sigma}"), params, CaseId::SubUniform, None));
    }
    for sigma in [1.0, 2.0] {
        let forced = ProblemParams::new(mid.clone(), sigma, 1.0, 1.0)?.with_alpha_hat_pos(1.0)?;
        rows.push((format!("middle sigma={sigma}"), forced, CaseId::ForcedBall, Some(SpecialCase::ForcedBall { radius: 5.0 })));
    }

    let options = CertifyOptions::default();
    println!("{:<22} {:<8} {:>12} {:>12} {:>14} {:>10}  result", "scenario", "case", "a", "b", "worst", "window");
    let mut failures = 0;
    for (label, params, case, special) in rows {
        match build_case(&params, case, None, special).and_then(|w| Ok((certify(&params, &w, &options)?, w))) {
            Ok((rep, w)) => {
                if !rep.passed {
                    failures += 1;
                }
                println!(
                    "{label:<22} {:<8} {:>12.4e} {:>12.4e} {:>14.4e} {:>10.1}  {} {:?}",
                    rep.case_id,
                    w.a,
                    w.b,
                    rep.worst_residual,
                    rep.window,
                    if rep.passed { "pass" } else { "FAIL" },
                    if rep.passed { None } else { Some(&rep.tail) }
                );
            }
            Err(e) => {
                failures += 1;
                println!("{label:<22} {case:<8} build error: {e}");
            }
        }
    }
    println!("{failures} failures");
    Ok(())
}
