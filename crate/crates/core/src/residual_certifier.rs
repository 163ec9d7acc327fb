//! Parabolic residual `H(Dw, D²w + Z(w) Dw⊗Dw) + χ|Dw|^σ − w_t` of a barrier,
//! evaluated through the radial factorization or by assembling the full
//! `n`-dimensional gradient and Hessian, and sampled certification of its sign.

use rayon::prelude::*;

use crate::barrier_factory::{BarrierSpec, Direction, Region, TimeShape};
use crate::error::{Error, Result};
use crate::operators::SymMatrix;
use crate::params::ProblemParams;
use crate::radial_profiles::ProfileKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    Radial,
    Full,
}

#[derive(Debug, Clone)]
pub struct ResidualSample {
    pub r: f64,
    pub t: f64,
    pub residual: f64,
    pub path: EvalPath,
    pub x: Option<Vec<f64>>,
}

/// The three parts of the residual, kept apart so that tolerances can scale
/// with the size of the terms that cancel.
#[derive(Debug, Clone, Copy)]
pub struct ResidualParts {
    pub operator: f64,
    pub forcing: f64,
    pub time: f64,
}

impl ResidualParts {
    pub fn total(&self) -> f64 {
        self.operator + self.forcing - self.time
    }

    pub fn magnitude(&self) -> f64 {
        self.operator.abs() + self.forcing.abs() + self.time.abs()
    }
}

fn forcing_term(chi: f64, sigma: f64, grad_norm: f64) -> f64 {
    // σ = 0 is a pure forcing term, including where the gradient vanishes
    if sigma == 0.0 {
        chi
    } else {
        chi * grad_norm.powf(sigma)
    }
}

fn check_radius(barrier: &BarrierSpec, r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain {
            what: "radius",
            value: r,
            domain: "(0, inf); the center is a viscosity point and is not sampled".into(),
        });
    }
    if let Region::Ball(radius) = barrier.region {
        if r >= radius {
            return Err(Error::Domain {
                what: "radius",
                value: r,
                domain: format!("(0, {radius})"),
            });
        }
    }
    Ok(())
}

pub fn residual_radial_parts(params: &ProblemParams, barrier: &BarrierSpec, r: f64, t: f64) -> Result<ResidualParts> {
    check_radius(barrier, r)?;
    let jet = barrier.jet(r, t)?;
    let z = params.z.eval(jet.w)?;
    let k = params.k();
    let op = &params.op;
    let operator = if jet.w_r > 0.0 {
        let gap = barrier.profile.curvature_gap(r)?;
        jet.w_r.powf(k) / r * op.eval_radial_shape(1.0, -gap + r * jet.w_r * z)
    } else if jet.w_r < 0.0 {
        let gap = barrier.profile.curvature_gap(r)?;
        let m = jet.w_r.abs();
        m.powf(k) / r * op.eval_radial_shape(-1.0, gap + r * m * z)
    } else {
        let mut e = vec![0.0; params.n()];
        e[0] = 1.0;
        let zero = vec![0.0; params.n()];
        op.eval_h(&zero, &SymMatrix::identity_plus_rank_one(0.0, jet.w_rr, &e))?
    };
    Ok(ResidualParts {
        operator,
        forcing: forcing_term(barrier.chi_bound, barrier.sigma, jet.w_r.abs()),
        time: jet.w_t,
    })
}

/// Residual from the factored radial form, with `χ` replaced by the
/// barrier's adversarial bound.
pub fn residual_radial(params: &ProblemParams, barrier: &BarrierSpec, r: f64, t: f64) -> Result<f64> {
    Ok(residual_radial_parts(params, barrier, r, t)?.total())
}

fn radial_frame(params: &ProblemParams, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    if x.len() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: x.len(),
        });
    }
    let d: Vec<f64> = x.iter().zip(&params.center).map(|(a, c)| a - c).collect();
    let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::Domain {
            what: "distance to center",
            value: 0.0,
            domain: "(0, inf)".into(),
        });
    }
    Ok((r, d.iter().map(|v| v / r).collect()))
}

/// Full `n`-dimensional assembly: `Dw = w_r e`,
/// `D²w = (w_r/r)(I − e⊗e) + w_rr e⊗e`, then `H` is called directly.
pub fn residual_full_parts(params: &ProblemParams, barrier: &BarrierSpec, x: &[f64], t: f64) -> Result<ResidualParts> {
    let (r, e) = radial_frame(params, x)?;
    check_radius(barrier, r)?;
    let jet = barrier.jet(r, t)?;
    let z = params.z.eval(jet.w)?;
    let grad: Vec<f64> = e.iter().map(|v| jet.w_r * v).collect();
    let c0 = jet.w_r / r;
    let hess = SymMatrix::identity_plus_rank_one(c0, jet.w_rr - c0, &e);
    let x_mat = hess.add_rank_one(z, &grad);
    Ok(ResidualParts {
        operator: params.op.eval_h(&grad, &x_mat)?,
        forcing: forcing_term(barrier.chi_bound, barrier.sigma, jet.w_r.abs()),
        time: jet.w_t,
    })
}

pub fn residual_full(params: &ProblemParams, barrier: &BarrierSpec, x: &[f64], t: f64) -> Result<f64> {
    Ok(residual_full_parts(params, barrier, x, t)?.total())
}

fn gradient_at(params: &ProblemParams, barrier: &BarrierSpec, y: &[f64], t: f64) -> Result<Vec<f64>> {
    let (r, e) = radial_frame(params, y)?;
    let jet = barrier.jet(r, t)?;
    Ok(e.iter().map(|v| jet.w_r * v).collect())
}

/// Residual with `D²w` replaced by central differences of the exact gradient
/// with step `h` (symmetrized). The gap to [`residual_full`] is `O(h²)` for
/// smooth profiles.
pub fn residual_fd_hessian(params: &ProblemParams, barrier: &BarrierSpec, x: &[f64], t: f64, h: f64) -> Result<f64> {
    let n = params.n();
    let (r, _) = radial_frame(params, x)?;
    check_radius(barrier, r)?;
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let gp = gradient_at(params, barrier, &xp, t)?;
        let gm = gradient_at(params, barrier, &xm, t)?;
        cols.push(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
    }
    let jet = barrier.jet(r, t)?;
    let z = params.z.eval(jet.w)?;
    let grad = gradient_at(params, barrier, x, t)?;
    let hess = SymMatrix::from_upper_fn(n, |i, j| 0.5 * (cols[j][i] + cols[i][j]));
    let op = params.op.eval_h(&grad, &hess.add_rank_one(z, &grad))?;
    Ok(op + forcing_term(barrier.chi_bound, barrier.sigma, jet.w_r.abs()) - jet.w_t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Grid,
    LowDiscrepancy,
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub sampler: Sampler,
    pub n_samples: usize,
    /// Relative slack; a sample fails when the residual has the wrong sign
    /// by more than `slack · (1 + |a| + b + |terms|)`.
    pub slack: f64,
    /// Sampling window for all-space barriers; widened to cover any case
    /// radius and the start of the certified tail.
    pub r_probe: f64,
    /// Ball barriers are sampled on `(0, R(1 − ball_margin)]`.
    pub ball_margin: f64,
    pub keep_samples: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            sampler: Sampler::LowDiscrepancy,
            n_samples: 100_000,
            slack: 1e-9,
            r_probe: 10.0,
            ball_margin: 1e-3,
            keep_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TailOutcome {
    /// The region is bounded; sampling covers it.
    NotNeeded,
    /// Sum of monomials in `r` bounds the signed residual on `[r0, ∞)`.
    Monomials { r0: f64, lead: f64, passed: bool },
    /// Closed-form coefficients that must be nonpositive for all `r`.
    Coefficients { values: Vec<(&'static str, f64)>, passed: bool },
    Unsupported(String),
}

impl TailOutcome {
    pub fn passed(&self) -> bool {
        match self {
            TailOutcome::NotNeeded => true,
            TailOutcome::Monomials { passed, .. } | TailOutcome::Coefficients { passed, .. } => *passed,
            TailOutcome::Unsupported(_) => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub case_id: String,
    pub direction: Direction,
    pub n_samples: usize,
    /// Most adverse residual: the maximum for super-solutions, the minimum
    /// for sub-solutions.
    pub worst_residual: f64,
    pub worst_point: (f64, f64),
    /// Samples beyond the slack, plus one if the tail check fails.
    pub violations: usize,
    pub slack: f64,
    pub window: f64,
    pub tail: TailOutcome,
    pub passed: bool,
    pub samples: Vec<ResidualSample>,
}

/// Radical inverse in the given base.
fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut out = 0.0;
    while i > 0 {
        f /= base as f64;
        out += f * (i % base) as f64;
        i /= base;
    }
    out
}

fn sample_points(sampler: Sampler, n: usize, window: f64, horizon: f64) -> Vec<(f64, f64)> {
    match sampler {
        Sampler::LowDiscrepancy => (1..=n as u64)
            .map(|i| (window * halton(i, 2), horizon * halton(i, 3)))
            .map(|(r, t)| (if r == 0.0 { window * 0.5 / n as f64 } else { r }, t))
            .collect(),
        Sampler::Grid => {
            let nt = ((n as f64).sqrt().floor() as usize).max(1);
            let nr = n.div_ceil(nt);
            let mut out = Vec::with_capacity(nr * nt);
            for i in 0..nr {
                let r = window * (i as f64 + 0.5) / nr as f64;
                for j in 0..nt {
                    let t = if nt == 1 { 0.0 } else { horizon * j as f64 / (nt - 1) as f64 };
                    out.push((r, t));
                }
            }
            out.truncate(n);
            out
        }
    }
}

/// Checks the sign of the residual at sampled `(r, t)` plus the large-`r`
/// tail bound.
pub fn certify(params: &ProblemParams, barrier: &BarrierSpec, options: &CertifyOptions) -> Result<CertificateReport> {
    if options.n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    let (window, tail) = match barrier.region {
        Region::Ball(radius) => (radius * (1.0 - options.ball_margin), TailOutcome::NotNeeded),
        Region::AllSpace => {
            let base = options.r_probe.max(barrier.constants.radius.unwrap_or(0.0)).max(1.0);
            let tail = tail_check(params, barrier, base);
            let window = match &tail {
                TailOutcome::Monomials { r0, .. } => r0.max(base),
                _ => base,
            };
            (window, tail)
        }
    };
    let sign = match barrier.direction {
        Direction::Super => 1.0,
        Direction::Sub => -1.0,
    };
    let base_scale = 1.0 + barrier.a.abs() + barrier.b.abs();
    let points = sample_points(options.sampler, options.n_samples, window, params.horizon);
    let evaluated: Vec<(f64, f64, f64, bool)> = points
        .par_iter()
        .map(|&(r, t)| match residual_radial_parts(params, barrier, r, t) {
            Ok(parts) => {
                let res = parts.total();
                let tol = options.slack * (base_scale + parts.magnitude());
                (r, t, res, sign * res > tol || !res.is_finite())
            }
            Err(_) => (r, t, f64::NAN, true),
        })
        .collect();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = (f64::NAN, f64::NAN);
    for &(r, t, res, bad) in &evaluated {
        if bad {
            violations += 1;
        }
        let signed = if res.is_nan() { f64::INFINITY } else { sign * res };
        if signed > worst {
            worst = signed;
            worst_point = (r, t);
        }
    }
    if !tail.passed() {
        violations += 1;
    }
    let samples = if options.keep_samples {
        evaluated
            .iter()
            .map(|&(r, t, residual, _)| ResidualSample {
                r,
                t,
                residual,
                path: EvalPath::Radial,
                x: None,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(CertificateReport {
        case_id: barrier.case.as_str().to_string(),
        direction: barrier.direction,
        n_samples: evaluated.len(),
        worst_residual: sign * worst,
        worst_point,
        violations,
        slack: options.slack,
        window,
        tail,
        passed: violations == 0,
        samples,
    })
}

/// Sum `Σ c_i r^{e_i}` is `<= 0` on `[r0, ∞)` when the leading merged term is
/// negative and dominates every positive lower-order term at `r0`.
fn monomial_dominance(terms: &[(f64, f64)], r0: f64) -> (bool, f64) {
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut sorted = terms.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (c, e) in sorted {
        match merged.last_mut() {
            Some(last) if (last.1 - e).abs() <= 1e-12 * (1.0 + e.abs()) => last.0 += c,
            _ => merged.push((c, e)),
        }
    }
    let scale: f64 = terms.iter().map(|(c, _)| c.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let (lead_c, lead_e) = merged[0];
    let mut bound = lead_c;
    for &(c, e) in &merged[1..] {
        if c > 0.0 {
            bound += c * r0.powf(e - lead_e);
        }
    }
    (lead_c < 0.0 && bound <= 1e-12 * scale, bound)
}

/// Upper bounds for the signed residual (`≤ 0` is required) of all-space
/// barriers beyond the sampled window, derived from the profile's growth and
/// derivative bounds and uniform in `t ∈ [0, T]`.
fn tail_check(params: &ProblemParams, barrier: &BarrierSpec, base: f64) -> TailOutcome {
    let k = params.k();
    let sigma = barrier.sigma;
    let t1 = 1.0 + params.horizon;
    let kk = barrier.constants.spectral;
    let (a, b) = (barrier.a, barrier.b);
    let sign = match barrier.direction {
        Direction::Super => 1.0,
        Direction::Sub => -1.0,
    };
    let chi = sign * barrier.chi_bound;
    match (barrier.shape, barrier.profile.kind()) {
        (TimeShape::Linear { .. }, ProfileKind::Power { beta }) => {
            let mut terms = vec![(kk * (b * t1 * beta).powf(k), k * (beta - 1.0) - 1.0), (-a, 0.0), (-b, beta)];
            terms.push(if sigma == 0.0 {
                (chi, 0.0)
            } else {
                (chi * (b * t1 * beta).powf(sigma), sigma * (beta - 1.0))
            });
            search_tail(base, |_| Some(terms.clone()))
        }
        (TimeShape::Linear { .. }, ProfileKind::RegularizedPower { beta, beta_bar, p }) => {
            let profile = barrier.profile.clone();
            search_tail(base, |r0| {
                let v0 = profile.value(r0).ok()?;
                let slope = 1.0 / (2.0 * (1.0 - p));
                let mut terms = vec![
                    (kk * (b * t1 * beta).powf(k), k * (beta_bar - 1.0) - 1.0),
                    (-a - b * v0 + b * r0.powf(beta_bar) * slope, 0.0),
                    (-b * slope, beta_bar),
                ];
                terms.push(if sigma == 0.0 {
                    (chi, 0.0)
                } else {
                    (chi * (b * t1 * beta).powf(sigma), sigma * (beta_bar - 1.0))
                });
                Some(terms)
            })
        }
        (TimeShape::Linear { .. }, ProfileKind::ExpSquare { c }) => {
            let values = vec![("exp_coefficient", b * (2.0 * c * kk * t1 - 1.0)), ("constant", chi - a)];
            coefficient_outcome(values, b + a + chi.abs())
        }
        (TimeShape::Linear { .. }, ProfileKind::ExpLinearReg { c }) => {
            let Some(eps) = barrier.constants.epsilon else {
                return TailOutcome::Unsupported("missing epsilon".into());
            };
            let e_bar = t1 * kk;
            let f_bar = chi * t1.powf(sigma);
            let values = vec![
                ("rate_equation", c * c * e_bar + sigma * c.powf(sigma) * f_bar - (1.0 - eps)),
                ("constant", b * (1.0 / eps).ln() + (1.0 - sigma) * c.powf(sigma) * f_bar - a),
            ];
            coefficient_outcome(values, 1.0 + a + b)
        }
        (TimeShape::ExpDecay { rate, .. }, ProfileKind::Gaussian { e }) => {
            let values = vec![("decay_rate", 2.0 * e * kk - rate), ("forcing", barrier.chi_bound.abs())];
            coefficient_outcome(values, rate)
        }
        (shape, kind) => TailOutcome::Unsupported(format!("no tail bound for {shape:?} with {kind:?}")),
    }
}

fn coefficient_outcome(values: Vec<(&'static str, f64)>, scale: f64) -> TailOutcome {
    let passed = values.iter().all(|(_, v)| *v <= 1e-12 * (1.0 + scale));
    TailOutcome::Coefficients { values, passed }
}

fn search_tail(base: f64, terms_at: impl Fn(f64) -> Option<Vec<(f64, f64)>>) -> TailOutcome {
    let mut r0 = base;
    let mut last = f64::NAN;
    for _ in 0..40 {
        if let Some(terms) = terms_at(r0) {
            let (ok, bound) = monomial_dominance(&terms, r0);
            last = bound;
            if ok {
                return TailOutcome::Monomials {
                    r0,
                    lead: bound,
                    passed: true,
                };
            }
        }
        r0 *= 2.0;
    }
    TailOutcome::Monomials {
        r0: base,
        lead: last,
        passed: false,
    }
}
