mod common;

use plbarrier::barrier_factory::{admissible_b, build_case, BarrierSpec, classify, CaseId, Direction};
use plbarrier::comparison_lab::{run_ordered_pair, Dynamics, RadialGridField, SchemeConfig};
use plbarrier::dnl_transform::{build_phi, Classification, PowerFamily};
use plbarrier::operators::{OperatorSpec, SymMatrix};
use plbarrier::params::{ChiProfile, ProblemParams};
use plbarrier::quadrature::integrate;
use plbarrier::residual_certifier::{certify, residual_fd_hessian, residual_full, residual_radial, CertifyOptions};
use proptest::prelude::*;
use std::sync::LazyLock;

fn builtin(kind: u8, n: usize, p: f64) -> OperatorSpec {
    if kind == 0 || n < 3 {
        OperatorSpec::grad_trace_minus_infinity(n, p).unwrap()
    } else {
        OperatorSpec::truncated_eigen_sum(n, p, 2).unwrap()
    }
}

fn sym(n: usize, entries: &[f64]) -> SymMatrix {
    SymMatrix::from_upper_fn(n, |i, j| entries[i * 4 + j])
}

static MATRIX: LazyLock<Vec<(common::Scenario, BarrierSpec)>> = LazyLock::new(|| {
    common::case_matrix()
        .into_iter()
        .map(|s| {
            let w = s.build().unwrap();
            (s, w)
        })
        .collect()
});

fn rel_close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn operators_are_homogeneous(
        kind in 0u8..2, n in 2usize..5, p in 0.0f64..3.0,
        q in prop::collection::vec(-2.0f64..2.0, 4),
        x in prop::collection::vec(-2.0f64..2.0, 16),
        theta in 0.1f64..5.0,
    ) {
        let op = builtin(kind, n, p);
        let q = &q[..n];
        let x = sym(n, &x);
        let h = op.eval_h(q, &x).unwrap();
        let qs: Vec<f64> = q.iter().map(|v| theta * v).collect();
        let scaled_q = op.eval_h(&qs, &x).unwrap();
        let scaled_x = op.eval_h(q, &x.scale(theta)).unwrap();
        let scale = theta.powf(op.k1()) * (h.abs() + 10.0);
        prop_assert!(rel_close(scaled_q, theta.powf(op.k1()) * h, scale, 1e-9));
        prop_assert!(rel_close(scaled_x, theta * h, theta * (h.abs() + 10.0), 1e-9));
    }

    #[test]
    fn operators_are_degenerate_elliptic(
        kind in 0u8..2, n in 2usize..5,
        q in prop::collection::vec(-2.0f64..2.0, 4),
        x in prop::collection::vec(-2.0f64..2.0, 16),
        v in prop::collection::vec(-2.0f64..2.0, 4),
        c in 0.0f64..3.0,
    ) {
        let op = builtin(kind, n, 0.0);
        let q = &q[..n];
        let x = sym(n, &x);
        let bumped = x.add_rank_one(c, &v[..n]);
        let lo = op.eval_h(q, &x).unwrap();
        let hi = op.eval_h(q, &bumped).unwrap();
        prop_assert!(lo <= hi + 1e-9 * (1.0 + lo.abs() + hi.abs()));
    }

    #[test]
    fn gradient_direction_does_not_see_its_own_rank_one(
        n in 2usize..5, p in 0.0f64..2.0,
        q in prop::collection::vec(-2.0f64..2.0, 4),
        x in prop::collection::vec(-2.0f64..2.0, 16),
        c in -5.0f64..5.0,
    ) {
        let op = OperatorSpec::grad_trace_minus_infinity(n, p).unwrap();
        let q = &q[..n];
        let x = sym(n, &x);
        let a = op.eval_h(q, &x).unwrap();
        let b = op.eval_h(q, &x.add_rank_one(c, q)).unwrap();
        prop_assert!(rel_close(a, b, a.abs() + 10.0 * c.abs(), 1e-9));
    }

    #[test]
    fn radial_and_full_paths_agree(idx in 0usize..63, r in 0.01f64..4.5, t in 0.0f64..1.0, dir in prop::collection::vec(-1.0f64..1.0, 4)) {
        let (s, w) = &MATRIX[idx % MATRIX.len()];
        let n = s.params.n();
        let norm = dir[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-2);
        let x: Vec<f64> = dir[..n].iter().map(|v| r * v / norm).collect();
        let r_eff = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a = residual_radial(&s.params, w, r_eff, t).unwrap();
        let b = residual_full(&s.params, w, &x, t).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs().max(b.abs())), "{} {}: {a} vs {b}", s.label, s.case);
    }

    #[test]
    fn residual_is_rotation_invariant(idx in 0usize..63, r in 0.05f64..4.5, t in 0.0f64..1.0, angle in 0.0f64..6.28) {
        let (s, w) = &MATRIX[idx % MATRIX.len()];
        prop_assume!(s.params.op.is_builtin());
        let n = s.params.n();
        let mut x = vec![0.0; n];
        x[0] = r;
        let mut y = vec![0.0; n];
        y[0] = r * angle.cos();
        y[1] = r * angle.sin();
        let a = residual_full(&s.params, w, &x, t).unwrap();
        let b = residual_full(&s.params, w, &y, t).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())));
    }

    #[test]
    fn power_family_round_trips(alpha_frac in 0.0f64..1.0, a in 0.0f64..3.0, k in 1.5f64..5.0, v in 0.0f64..10.0) {
        let alpha = alpha_frac * (k - 1.0);
        prop_assume!(a > 0.0 || alpha < k - 1.0);
        let pf = PowerFamily::new(alpha, a, k).unwrap();
        let u = pf.phi(v);
        prop_assert!((pf.phi_inv(u) - v).abs() <= 1e-10 * (1.0 + v));
        // φ is convex (Z >= 0) and Z is nonincreasing
        prop_assert!(pf.z(v) >= 0.0);
        prop_assert!(pf.z(v + 0.5) <= pf.z(v) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn numerical_transform_matches_closed_form(alpha_frac in 0.0f64..0.95, a in 0.0f64..2.0, v in 0.0f64..10.0) {
        let k = 3.0;
        let pf = PowerFamily::new(alpha_frac * (k - 1.0), a, k).unwrap();
        let spec = build_phi(pf.nonlinearity(), k, Classification::Convergent).unwrap();
        let u = spec.phi(v).unwrap();
        prop_assert!((u - pf.phi(v)).abs() <= 1e-8 * (1.0 + u.abs()));
        prop_assert!((spec.phi_inv(u).unwrap() - v).abs() <= 1e-9 * (1.0 + v));
    }

    #[test]
    fn halving_b_keeps_certificates(kind in 0u8..2, sigma in prop::sample::select(vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 8.0])) {
        let op = if kind == 0 {
            OperatorSpec::grad_trace_minus_infinity(2, 0.0).unwrap()
        } else {
            OperatorSpec::truncated_eigen_sum(3, 0.0, 2).unwrap()
        };
        let params = ProblemParams::new(op, sigma, 1.0, 1.0).unwrap();
        let case = classify(&params).unwrap();
        let b0 = admissible_b(&params, Direction::Super).unwrap().default_b();
        let options = CertifyOptions { n_samples: 5_000, ..Default::default() };
        for j in 0..6 {
            let b = b0 * 0.5f64.powi(j);
            let w = build_case(&params, case, Some(b), None).unwrap();
            prop_assert!(certify(&params, &w, &options).unwrap().passed, "{case} b = {b}");
        }
    }

    #[test]
    fn ordered_data_stay_ordered(seed in 0u64..1000, sigma in prop::sample::select(vec![0.0, 1.0, 2.0]), chi in -1.0f64..1.0) {
        let phase = seed as f64 * 0.37;
        let op = OperatorSpec::grad_trace_minus_infinity(2, 0.0).unwrap();
        let params = ProblemParams::new(op, sigma, 0.1, chi.abs()).unwrap();
        let lower = move |r: f64| (r + phase).sin();
        let upper = move |r: f64| lower(r) + 0.3 * (1.0 - (r / 2.0).powi(2));
        let edge = lower(2.0);
        let dynamics = Dynamics::new(params, ChiProfile::Const(chi), move |_| edge);
        let u = RadialGridField::new(2.0, 24, lower).unwrap();
        let v = RadialGridField::new(2.0, 24, upper).unwrap();
        let rep = run_ordered_pair(&u, &v, &dynamics, &SchemeConfig::new(u.h, 0.1)).unwrap();
        prop_assert_eq!(rep.violations, 0);
    }
}

#[test]
fn finite_difference_hessian_converges_at_second_order() {
    let op = OperatorSpec::grad_trace_minus_infinity(3, 0.0).unwrap();
    let mut graded = 0;
    for sigma in [0.0, 0.5, 1.0, 1.5, 3.0, 8.0] {
        let params = ProblemParams::new(op.clone(), sigma, 1.0, 1.0).unwrap();
        let w = build_case(&params, classify(&params).unwrap(), None, None).unwrap();
        let x = [0.7, -0.4, 1.1];
        let exact = residual_full(&params, &w, &x, 0.3).unwrap();
        let e1 = (residual_fd_hessian(&params, &w, &x, 0.3, 1e-2).unwrap() - exact).abs();
        let e2 = (residual_fd_hessian(&params, &w, &x, 0.3, 5e-3).unwrap() - exact).abs();
        if e1 < 1e-11 {
            // polynomial profile, the stencil is already exact
            continue;
        }
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "sigma = {sigma}: order {order} ({e1:e}, {e2:e})");
        graded += 1;
    }
    assert!(graded > 0);
}

#[test]
fn every_case_id_parses_back() {
    for c in CaseId::ALL {
        assert_eq!(c.as_str().parse::<CaseId>().unwrap(), c);
    }
}

#[test]
fn quadrature_is_exact_on_cubics() {
    let r = integrate(|x| 1.0 + x - 3.0 * x * x + x * x * x, -1.0, 2.0, 1e-14, 1e-14);
    assert!((r.value - (3.0 + 1.5 - 9.0 + 3.75)).abs() < 1e-13);
}
