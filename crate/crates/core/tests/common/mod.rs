#![allow(dead_code)]

use plbarrier::barrier_factory::{build_case, classify, BarrierSpec, CaseId, SpecialCase};
use plbarrier::operators::OperatorSpec;
use plbarrier::params::ProblemParams;

pub struct Scenario {
    pub label: String,
    pub params: ProblemParams,
    pub case: CaseId,
    pub special: Option<SpecialCase>,
}

impl Scenario {
    pub fn build(&self) -> plbarrier::Result<BarrierSpec> {
        build_case(&self.params, self.case, None, self.special)
    }
}

/// `H = μ₂(X)`, the middle eigenvalue in three dimensions: `k = 1` with a
/// finite lower spectral bound.
pub fn middle_eigenvalue() -> OperatorSpec {
    OperatorSpec::custom(3, 0.0, "middle_eigenvalue", |_q, x| x.eigenvalues_desc()[1]).unwrap()
}

fn push(out: &mut Vec<Scenario>, label: String, params: ProblemParams, case: CaseId, special: Option<SpecialCase>) {
    out.push(Scenario {
        label,
        params,
        case,
        special,
    });
}

/// Every construction: the `k = 3` operator in two and three dimensions,
/// the `k = 1` truncated sum (which needs `n >= 3`) and a custom `k = 1`
/// operator for the cases that need a finite lower bound.
pub fn case_matrix() -> Vec<Scenario> {
    let mut out = Vec::new();
    for n in [2, 3] {
        let op = OperatorSpec::grad_trace_minus_infinity(n, 0.0).unwrap();
        for sigma in [0.0, 1.0, 2.0, 3.0, 8.0] {
            let params = ProblemParams::new(op.clone(), sigma, 1.0, 1.0).unwrap();
            let case = classify(&params).unwrap();
            let label = format!("k=3 n={n} sigma={sigma}");
            push(&mut out, label.clone(), params.clone(), case, None);
            push(&mut out, label, params, CaseId::SubDegenerate, None);
        }
        let calm = ProblemParams::new(op.clone(), 0.0, 1.0, 0.0).unwrap();
        push(
            &mut out,
            format!("k=3 n={n} unforced"),
            calm,
            CaseId::DecayBall,
            Some(SpecialCase::DecayBall { radius: 5.0, mu: 1.0 }),
        );
        for sigma in [3.0, 4.0] {
            let absorbing = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)
                .unwrap()
                .with_alpha_hat_neg(-1.0)
                .unwrap();
            let (case, special) = if sigma == 3.0 {
                (CaseId::AbsorbingBallCritical, SpecialCase::AbsorbingBallCritical { radius: 5.0 })
            } else {
                (CaseId::AbsorbingBallStrong, SpecialCase::AbsorbingBallStrong { radius: 5.0 })
            };
            push(&mut out, format!("k=3 n={n} sigma={sigma} chi<0"), absorbing, case, Some(special));
            let forced = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)
                .unwrap()
                .with_alpha_hat_pos(1.0)
                .unwrap();
            push(
                &mut out,
                format!("k=3 n={n} sigma={sigma} chi>0"),
                forced,
                CaseId::ForcedBall,
                Some(SpecialCase::ForcedBall { radius: 5.0 }),
            );
        }
    }
    for n in [3, 4] {
        let op = OperatorSpec::truncated_eigen_sum(n, 0.0, 2).unwrap();
        for sigma in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 8.0] {
            let params = ProblemParams::new(op.clone(), sigma, 1.0, 1.0).unwrap();
            let case = classify(&params).unwrap();
            let label = format!("k=1 n={n} sigma={sigma}");
            push(&mut out, label.clone(), params.clone(), case, None);
            if sigma > 1.0 {
                push(&mut out, label, params, CaseId::SubUniform, None);
            }
        }
        let calm = ProblemParams::new(op.clone(), 0.0, 1.0, 0.0).unwrap();
        push(
            &mut out,
            format!("k=1 n={n} unforced"),
            calm,
            CaseId::DecayGaussian,
            Some(SpecialCase::DecayGaussian { mu: 1.0, spread: 0.1 }),
        );
        for sigma in [1.0, 2.0] {
            let absorbing = ProblemParams::new(op.clone(), sigma, 1.0, 1.0)
                .unwrap()
                .with_alpha_hat_neg(-1.0)
                .unwrap();
            let (case, special) = if sigma == 1.0 {
                (CaseId::AbsorbingBallCritical, SpecialCase::AbsorbingBallCritical { radius: 5.0 })
            } else {
                (CaseId::AbsorbingBallStrong, SpecialCase::AbsorbingBallStrong { radius: 5.0 })
            };
            push(&mut out, format!("k=1 n={n} sigma={sigma} chi<0"), absorbing, case, Some(special));
        }
    }
    let mid = middle_eigenvalue();
    for sigma in [0.0, 0.5, 1.0] {
        let params = ProblemParams::new(mid.clone(), sigma, 1.0, 1.0).unwrap();
        push(&mut out, format!("middle sigma={sigma}"), params, CaseId::SubUniform, None);
    }
    for sigma in [1.0, 2.0] {
        let forced = ProblemParams::new(mid.clone(), sigma, 1.0, 1.0)
            .unwrap()
            .with_alpha_hat_pos(1.0)
            .unwrap();
        push(
            &mut out,
            format!("middle sigma={sigma} chi>0"),
            forced,
            CaseId::ForcedBall,
            Some(SpecialCase::ForcedBall { radius: 5.0 }),
        );
    }
    out
}
