//! Explicit super- and sub-solutions. Each builder picks the profile for the
//! given `(k, σ)` regime, resolves every constant in closed form (or by a
//! monotone bisection where only existence is known), and returns a
//! [`BarrierSpec`] together with the `b → 0` limit of its time slope `a`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::radial_profiles::RadialProfile;

/// Tolerance used to decide `k == 1` and `σ == γ/2` style boundaries.
const BOUNDARY_TOL: f64 = 1e-12;
/// Bisection tolerance for `b₀`, `c` and `r*`.
pub const BISECTION_TOL: f64 = 1e-12;
/// Regularization margin in the exponential-linear profile equation.
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseId {
    /// `k > 1`, `σ = 0`.
    DegenerateForcing,
    /// `k > 1`, `0 < σ < γ/2`.
    DegenerateSubcritical,
    /// `k > 1`, `σ = γ/2`.
    DegenerateCritical,
    /// `k > 1`, `σ > γ/2`.
    DegenerateSupercritical,
    /// `k = 1`, `σ = 0`.
    UniformForcing,
    /// `k = 1`, `0 < σ <= 1`.
    UniformSublinear,
    /// `k = 1`, `1 < σ <= 2`.
    UniformModerate,
    /// `k = 1`, `σ > 2`.
    UniformStrong,
    /// Sub-solution mirror of the `k > 1` table.
    SubDegenerate,
    /// Sub-solution mirror of the `k = 1` table.
    SubUniform,
    /// Positive sub-solution on a ball, `k > 1`, no forcing.
    DecayBall,
    /// Positive Gaussian sub-solution, `k = 1`, no forcing.
    DecayGaussian,
    /// Super-solution on a ball for strictly negative forcing, `σ = k`.
    AbsorbingBallCritical,
    /// Super-solution on a ball for strictly negative forcing, `σ > k`.
    AbsorbingBallStrong,
    /// Sub-solution on a ball for strictly positive forcing, `σ >= k`.
    ForcedBall,
}

impl CaseId {
    pub const ALL: [CaseId; 15] = [
        CaseId::DegenerateForcing,
        CaseId::DegenerateSubcritical,
        CaseId::DegenerateCritical,
        CaseId::DegenerateSupercritical,
        CaseId::UniformForcing,
        CaseId::UniformSublinear,
        CaseId::UniformModerate,
        CaseId::UniformStrong,
        CaseId::SubDegenerate,
        CaseId::SubUniform,
        CaseId::DecayBall,
        CaseId::DecayGaussian,
        CaseId::AbsorbingBallCritical,
        CaseId::AbsorbingBallStrong,
        CaseId::ForcedBall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::DegenerateForcing => "I.i",
            CaseId::DegenerateSubcritical => "I.ii",
            CaseId::DegenerateCritical => "I.iii",
            CaseId::DegenerateSupercritical => "I.iv",
            CaseId::UniformForcing => "II.a",
            CaseId::UniformSublinear => "II.b",
            CaseId::UniformModerate => "II.iii",
            CaseId::UniformStrong => "II.iv",
            CaseId::SubDegenerate => "V.I",
            CaseId::SubUniform => "V.II",
            CaseId::DecayBall => "VI.i-1",
            CaseId::DecayGaussian => "VI.i-2",
            CaseId::AbsorbingBallCritical => "VI.ii-1",
            CaseId::AbsorbingBallStrong => "VI.ii-2",
            CaseId::ForcedBall => "VI.iii",
        }
    }

    pub fn is_special(self) -> bool {
        matches!(
            self,
            CaseId::DecayBall
                | CaseId::DecayGaussian
                | CaseId::AbsorbingBallCritical
                | CaseId::AbsorbingBallStrong
                | CaseId::ForcedBall
        )
    }

    pub fn is_sub(self) -> bool {
        matches!(
            self,
            CaseId::SubDegenerate | CaseId::SubUniform | CaseId::DecayBall | CaseId::DecayGaussian | CaseId::ForcedBall
        )
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown case id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Super,
    Sub,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Super => "super",
            Direction::Sub => "sub",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    AllSpace,
    Ball(f64),
}

/// How the barrier depends on time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeShape {
    /// `sign · (a t + b (1 + t) v(r))`.
    Linear { sign: f64 },
    /// `scale · v(r) · (1 + t/e)^{-exponent}`.
    PowerDecay { scale: f64, e: f64, exponent: f64 },
    /// `scale · v(r) · exp(−rate t)`.
    ExpDecay { scale: f64, rate: f64 },
}

/// Value and derivatives of a barrier at `(r, t)`.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub w: f64,
    pub w_t: f64,
    pub w_r: f64,
    pub w_rr: f64,
}

/// Every intermediate constant of a construction; `None` where a case does
/// not use it.
#[derive(Debug, Clone, Default)]
pub struct Constants {
    /// `M` for super-solutions, `max(|N|, 1)` for sub-solutions.
    pub spectral: f64,
    /// Raw lower bound `N <= 0` used by sub-solutions.
    pub lower_n: Option<f64>,
    pub e: Option<f64>,
    pub f: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    pub radius: Option<f64>,
    pub r_star: Option<f64>,
    pub b0: Option<f64>,
    pub epsilon: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BarrierSpec {
    pub case: CaseId,
    /// The super-solution regime this barrier follows; equals `case` for
    /// super-solutions and special cases.
    pub branch: CaseId,
    pub direction: Direction,
    pub a: f64,
    pub b: f64,
    pub profile: RadialProfile,
    pub shape: TimeShape,
    pub region: Region,
    /// Worst admissible value of `χ` for this direction.
    pub chi_bound: f64,
    pub sigma: f64,
    pub k: f64,
    pub horizon: f64,
    pub a_limit: f64,
    /// Exponents `e_i` with `a(b) = a_limit + Σ K_i b^{e_i}`.
    pub b_exponents: Vec<f64>,
    pub constants: Constants,
}

impl BarrierSpec {
    pub fn jet(&self, r: f64, t: f64) -> Result<Jet> {
        let v = self.profile.value(r)?;
        let v1 = self.profile.d1(r)?;
        let v2 = self.profile.d2(r)?;
        Ok(match self.shape {
            TimeShape::Linear { sign } => {
                let kappa = self.b * (1.0 + t);
                Jet {
                    w: sign * (self.a * t + kappa * v),
                    w_t: sign * (self.a + self.b * v),
                    w_r: sign * kappa * v1,
                    w_rr: sign * kappa * v2,
                }
            }
            TimeShape::PowerDecay { scale, e, exponent } => {
                let base = 1.0 + t / e;
                let tau = base.powf(-exponent);
                Jet {
                    w: scale * v * tau,
                    w_t: -exponent / e * base.powf(-exponent - 1.0) * scale * v,
                    w_r: scale * v1 * tau,
                    w_rr: scale * v2 * tau,
                }
            }
            TimeShape::ExpDecay { scale, rate } => {
                let tau = (-rate * t).exp();
                let w = scale * v * tau;
                Jet {
                    w,
                    w_t: -rate * w,
                    w_r: scale * v1 * tau,
                    w_rr: scale * v2 * tau,
                }
            }
        })
    }

    pub fn value(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.jet(r, t)?.w)
    }

    /// Largest radius the certifier may sample.
    pub fn region_radius(&self) -> Option<f64> {
        match self.region {
            Region::AllSpace => None,
            Region::Ball(r) => Some(r),
        }
    }
}

/// Admissible range `(0, bound)` (or `(0, bound]` if `inclusive`) for `b`.
#[derive(Debug, Clone)]
pub struct AdmissibleB {
    pub bound: f64,
    pub inclusive: bool,
    pub condition: String,
}

impl AdmissibleB {
    pub fn contains(&self, b: f64) -> bool {
        b > 0.0 && (b < self.bound || (self.inclusive && b <= self.bound))
    }

    /// The bound itself when inclusive, otherwise half of it.
    pub fn default_b(&self) -> f64 {
        if self.inclusive {
            self.bound
        } else {
            0.5 * self.bound
        }
    }
}

fn is_one(k: f64) -> bool {
    (k - 1.0).abs() <= BOUNDARY_TOL
}

/// Regime of the super-solution table for these parameters.
pub fn classify(params: &ProblemParams) -> Result<CaseId> {
    let k = params.k();
    let sigma = params.sigma;
    if is_one(k) {
        Ok(if sigma == 0.0 {
            CaseId::UniformForcing
        } else if sigma <= 1.0 {
            CaseId::UniformSublinear
        } else if sigma <= 2.0 {
            CaseId::UniformModerate
        } else {
            CaseId::UniformStrong
        })
    } else if k > 1.0 {
        let half = params.gamma() / 2.0;
        Ok(if sigma == 0.0 {
            CaseId::DegenerateForcing
        } else if (sigma - half).abs() <= BOUNDARY_TOL * half {
            CaseId::DegenerateCritical
        } else if sigma < half {
            CaseId::DegenerateSubcritical
        } else {
            CaseId::DegenerateSupercritical
        })
    } else {
        Err(Error::invalid(format!("homogeneity k = {k} must be >= 1")))
    }
}

/// Ingredients shared by the super table and its sub mirror.
struct Regime {
    branch: CaseId,
    spectral: f64,
    lower_n: Option<f64>,
    direction: Direction,
}

impl Regime {
    fn new(params: &ProblemParams, direction: Direction) -> Result<Self> {
        let branch = classify(params)?;
        let (spectral, lower_n) = match direction {
            Direction::Super => (params.m_const()?, None),
            Direction::Sub => {
                let profile = branch_profile(params, branch)?;
                let n = params.case_lower_bound(profile.curvature_gap_inf(), sub_case(branch).as_str())?;
                (n.abs().max(1.0), Some(n))
            }
        };
        Ok(Self {
            branch,
            spectral,
            lower_n,
            direction,
        })
    }

    fn case(&self) -> CaseId {
        match self.direction {
            Direction::Super => self.branch,
            Direction::Sub => sub_case(self.branch),
        }
    }
}

fn sub_case(branch: CaseId) -> CaseId {
    match branch {
        CaseId::DegenerateForcing
        | CaseId::DegenerateSubcritical
        | CaseId::DegenerateCritical
        | CaseId::DegenerateSupercritical => CaseId::SubDegenerate,
        _ => CaseId::SubUniform,
    }
}

/// `(c, ε)` for the exponential-linear profile: `c² Ē + σ c^σ F̄ = 1 − ε`.
fn exp_linear_rate(e_bar: f64, f_bar: f64, sigma: f64, eps: f64) -> Result<f64> {
    let g = |c: f64| c * c * e_bar + sigma * c.powf(sigma) * f_bar - (1.0 - eps);
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e150 {
            return Err(Error::Bracket("exp-linear rate equation has no root below 1e150".into()));
        }
    }
    bisect_increasing(g, 0.0, hi, "exp-linear rate")
}

/// Root of an increasing function on `[lo, hi]` with `g(lo) < 0 < g(hi)`.
fn bisect_increasing(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, what: &str) -> Result<f64> {
    let (glo, ghi) = (g(lo), g(hi));
    if !(glo <= 0.0 && ghi >= 0.0) {
        return Err(Error::Bracket(format!(
            "{what}: no sign change on [{lo}, {hi}] (g(lo) = {glo}, g(hi) = {ghi})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_TOL * hi.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(lo)
}

/// `b₀ = ½ · sup{b ∈ (0, 1] : g(b) <= target}` for increasing `g` with `g(0) = 0`.
fn halved_root(g: impl Fn(f64) -> f64, target: f64, what: &str) -> Result<f64> {
    let root = if g(1.0) <= target {
        1.0
    } else {
        bisect_increasing(|b| g(b) - target, 0.0, 1.0, what)?
    };
    Ok(0.5 * root)
}

/// Profile the regime uses, independent of `b`.
fn branch_profile(params: &ProblemParams, branch: CaseId) -> Result<RadialProfile> {
    let k = params.k();
    let sigma = params.sigma;
    match branch {
        CaseId::DegenerateForcing | CaseId::DegenerateSubcritical | CaseId::DegenerateCritical => {
            RadialProfile::power(params.gamma_star().expect("k > 1"))
        }
        CaseId::DegenerateSupercritical => {
            let gs = params.gamma_star().expect("k > 1");
            let ss = params.sigma_star().ok_or_else(|| Error::invalid("supercritical regime needs sigma > 1"))?;
            RadialProfile::regularized_power(gs, ss)
        }
        CaseId::UniformForcing => {
            // rate is irrelevant for the curvature bound
            RadialProfile::exp_square(1.0)
        }
        CaseId::UniformSublinear => RadialProfile::exp_linear_reg(1.0),
        CaseId::UniformModerate => RadialProfile::power(params.sigma_star().expect("sigma > 1")),
        CaseId::UniformStrong => RadialProfile::regularized_power(2.0, params.sigma_star().expect("sigma > 2")),
        _ => Err(Error::invalid(format!(
            "case {branch} is not part of the (k = {k}, sigma = {sigma}) table"
        ))),
    }
}

/// Admissible `b` for the regime, with `M` replaced by the case bound for
/// sub-solutions.
pub fn admissible_b(params: &ProblemParams, direction: Direction) -> Result<AdmissibleB> {
    let regime = Regime::new(params, direction)?;
    admissible_for(params, &regime)
}

fn admissible_for(params: &ProblemParams, regime: &Regime) -> Result<AdmissibleB> {
    let k = params.k();
    let sigma = params.sigma;
    let t1 = 1.0 + params.horizon;
    let alpha = params.alpha;
    let kk = regime.spectral;
    Ok(match regime.branch {
        CaseId::DegenerateForcing => {
            let gs = params.gamma_star().unwrap();
            let e = kk * (gs * t1).powf(k);
            let bound = 1f64.min(e.powf(1.0 - k)).min(e.powf(-1.0 / (k - 1.0)));
            AdmissibleB {
                bound,
                inclusive: false,
                condition: format!("b < min(1, E^(1-k), E^(-1/(k-1))) with E = {e}"),
            }
        }
        CaseId::DegenerateSubcritical => {
            let gs = params.gamma_star().unwrap();
            let e = kk * (gs * t1).powf(k);
            AdmissibleB {
                bound: 1f64.min((4.0 * e).powf(-1.0 / (k - 1.0))),
                inclusive: false,
                condition: format!("b^(k-1) < min(1, 1/(4E)) with E = {e}"),
            }
        }
        CaseId::DegenerateCritical => {
            let gs = params.gamma_star().unwrap();
            let e = kk * (gs * t1).powf(k);
            let f = (gs * t1).powf(sigma);
            let gamma = params.gamma();
            let b0 = halved_root(
                |b| e * b.powf(k - 1.0) + alpha * f * b.powf((gamma - 2.0) / 2.0),
                0.5,
                "critical b0",
            )?;
            AdmissibleB {
                bound: b0,
                inclusive: true,
                condition: format!("b <= b0 = {b0} (half the root of E b^(k-1) + alpha F b^((gamma-2)/2) = 1/2)"),
            }
        }
        CaseId::DegenerateSupercritical => {
            let gs = params.gamma_star().unwrap();
            let ss = params.sigma_star().unwrap();
            let e = kk * (gs * t1).powf(k);
            let f = (gs * t1).powf(sigma);
            let b0 = halved_root(
                |b| e * b.powf(k - 1.0) + alpha * f * b.powf(sigma - 1.0),
                gs / (2.0 * ss),
                "supercritical b0",
            )?;
            AdmissibleB {
                bound: b0,
                inclusive: true,
                condition: format!(
                    "b <= b0 = {b0} (half the root of E b^(k-1) + alpha F b^(sigma-1) = gamma*/(2 sigma*))"
                ),
            }
        }
        CaseId::UniformForcing | CaseId::UniformSublinear => AdmissibleB {
            bound: 1.0,
            inclusive: true,
            condition: "0 < b <= 1".into(),
        },
        CaseId::UniformModerate => {
            let ss = params.sigma_star().unwrap();
            let f_bar = alpha * t1.powf(sigma);
            let bound = if f_bar > 0.0 {
                1f64.min((4.0 * ss.powf(sigma) * f_bar).powf(-1.0 / (sigma - 1.0)))
            } else {
                1.0
            };
            AdmissibleB {
                bound,
                inclusive: f_bar == 0.0,
                condition: format!("b^(sigma-1) < 1/(4 sigma*^sigma F) with F = {f_bar}, b <= 1"),
            }
        }
        CaseId::UniformStrong => {
            let ss = params.sigma_star().unwrap();
            let f_bar = alpha * t1.powf(sigma);
            let bound = if f_bar > 0.0 {
                1f64.min((2f64.powf(sigma) * ss * f_bar).powf(-1.0 / (sigma - 1.0)))
            } else {
                1.0
            };
            AdmissibleB {
                bound,
                inclusive: f_bar == 0.0,
                condition: format!("b^(sigma-1) < 1/(2^sigma sigma* F) with F = {f_bar}, b <= 1"),
            }
        }
        other => return Err(Error::invalid(format!("case {other} has no b parameter"))),
    })
}

/// Closed-form `lim_{b→0} a` for the regime.
pub fn a_limit_table(params: &ProblemParams) -> Result<f64> {
    a_limit_for(params, classify(params)?)
}

fn a_limit_for(params: &ProblemParams, branch: CaseId) -> Result<f64> {
    Ok(match branch {
        CaseId::DegenerateForcing | CaseId::UniformForcing => params.alpha,
        CaseId::UniformSublinear => {
            let c = uniform_sublinear_rate(params, params.m_const()?)?;
            (1.0 - params.sigma) * params.alpha * (c * (1.0 + params.horizon)).powf(params.sigma)
        }
        _ => 0.0,
    })
}

fn uniform_sublinear_rate(params: &ProblemParams, spectral: f64) -> Result<f64> {
    let t1 = 1.0 + params.horizon;
    exp_linear_rate(
        t1 * spectral,
        params.alpha * t1.powf(params.sigma),
        params.sigma,
        DEFAULT_EPSILON,
    )
}

/// `lim_{b→0} a` for the sub-solution mirror (same table with the case bound
/// in place of `M`).
pub fn a_limit_table_sub(params: &ProblemParams) -> Result<f64> {
    let regime = Regime::new(params, Direction::Sub)?;
    Ok(match regime.branch {
        CaseId::UniformSublinear => {
            let c = uniform_sublinear_rate(params, regime.spectral)?;
            (1.0 - params.sigma) * params.alpha * (c * (1.0 + params.horizon)).powf(params.sigma)
        }
        other => a_limit_for(params, other)?,
    })
}

/// `w = at + b(1+t)v(r)`: super-solution on all of space.
pub fn build_supersolution(params: &ProblemParams, b: f64) -> Result<BarrierSpec> {
    build_linear(params, b, Direction::Super)
}

/// `w = −(at + b(1+t)v(r))`: sub-solution on all of space.
pub fn build_subsolution(params: &ProblemParams, b: f64) -> Result<BarrierSpec> {
    build_linear(params, b, Direction::Sub)
}

fn build_linear(params: &ProblemParams, b: f64, direction: Direction) -> Result<BarrierSpec> {
    let regime = Regime::new(params, direction)?;
    let case = regime.case();
    let adm = admissible_for(params, &regime)?;
    if !(b.is_finite() && adm.contains(b)) {
        return Err(Error::Admissibility {
            case: case.as_str(),
            b,
            condition: adm.condition,
        });
    }
    build_linear_unchecked(params, b, &regime)
}

/// Builds without the admissibility check on `b`; for negative controls.
pub fn build_linear_unchecked_b(params: &ProblemParams, b: f64, direction: Direction) -> Result<BarrierSpec> {
    let regime = Regime::new(params, direction)?;
    build_linear_unchecked(params, b, &regime)
}

fn build_linear_unchecked(params: &ProblemParams, b: f64, regime: &Regime) -> Result<BarrierSpec> {
    let k = params.k();
    let sigma = params.sigma;
    let t1 = 1.0 + params.horizon;
    let alpha = params.alpha;
    let kk = regime.spectral;
    let case = regime.case();
    let mut constants = Constants {
        spectral: kk,
        lower_n: regime.lower_n,
        ..Default::default()
    };
    let (profile, a, exponents) = match regime.branch {
        CaseId::DegenerateForcing => {
            let gs = params.gamma_star().unwrap();
            constants.e = Some(kk * (gs * t1).powf(k));
            (RadialProfile::power(gs)?, alpha, vec![])
        }
        CaseId::DegenerateSubcritical => {
            let gs = params.gamma_star().unwrap();
            let gamma = params.gamma();
            let e = kk * (gs * t1).powf(k);
            let f = (gs * t1).powf(sigma);
            let radius = (4.0 * alpha * f * b.powf(sigma - 1.0)).powf((gamma - 2.0) / (gamma - 2.0 * sigma));
            let a = e * b.powf(k) * radius.powf(gs) + alpha * f * b.powf(sigma) * radius.powf(2.0 * sigma / (gamma - 2.0));
            constants.e = Some(e);
            constants.f = Some(f);
            constants.radius = Some(radius);
            let d = gamma - 2.0 * sigma;
            (
                RadialProfile::power(gs)?,
                a,
                vec![(gamma - sigma) * (gamma - 2.0) / d, sigma * (gamma - 2.0) / d],
            )
        }
        CaseId::DegenerateCritical => {
            let gs = params.gamma_star().unwrap();
            constants.e = Some(kk * (gs * t1).powf(k));
            constants.f = Some((gs * t1).powf(sigma));
            constants.b0 = Some(admissible_for(params, regime)?.bound);
            (RadialProfile::power(gs)?, 0.0, vec![])
        }
        CaseId::DegenerateSupercritical => {
            let gs = params.gamma_star().unwrap();
            let ss = params.sigma_star().unwrap();
            let e = kk * (gs * t1).powf(k);
            let f = (gs * t1).powf(sigma);
            let profile = RadialProfile::regularized_power(gs, ss)?;
            constants.e = Some(e);
            constants.f = Some(f);
            constants.p = profile.reg_exponent();
            constants.b0 = Some(admissible_for(params, regime)?.bound);
            let a = e * b.powf(k) + alpha * f * b.powf(sigma) + b * gs / ss;
            (profile, a, vec![k, sigma, 1.0])
        }
        CaseId::UniformForcing => {
            let e2 = 2.0 * t1 * kk;
            constants.e = Some(e2);
            constants.c = Some(1.0 / e2);
            (RadialProfile::exp_square(1.0 / e2)?, alpha, vec![])
        }
        CaseId::UniformSublinear => {
            let e_bar = t1 * kk;
            let f_bar = alpha * t1.powf(sigma);
            let eps = DEFAULT_EPSILON;
            let c = exp_linear_rate(e_bar, f_bar, sigma, eps)?;
            constants.e = Some(e_bar);
            constants.f = Some(f_bar);
            constants.c = Some(c);
            constants.epsilon = Some(eps);
            let a = b * (1.0 / eps).ln() + (1.0 - sigma) * c.powf(sigma) * f_bar;
            (RadialProfile::exp_linear_reg(c)?, a, vec![1.0])
        }
        CaseId::UniformModerate => {
            let ss = params.sigma_star().unwrap();
            let e_bar = t1 * kk;
            let f_bar = alpha * t1.powf(sigma);
            let radius = (4.0 * ss * e_bar).sqrt();
            constants.e = Some(e_bar);
            constants.f = Some(f_bar);
            constants.radius = Some(radius);
            let a = ss * e_bar * b * radius.powf(ss - 2.0) + ss.powf(sigma) * f_bar * b.powf(sigma) * radius.powf(ss);
            (RadialProfile::power(ss)?, a, vec![1.0, sigma])
        }
        CaseId::UniformStrong => {
            let ss = params.sigma_star().unwrap();
            let e_bar = t1 * kk;
            let f_bar = alpha * t1.powf(sigma);
            let profile = RadialProfile::regularized_power(2.0, ss)?;
            constants.e = Some(e_bar);
            constants.f = Some(f_bar);
            constants.p = profile.reg_exponent();
            let a = 2.0 * b * e_bar + (2.0 * b).powf(sigma) * f_bar + b / ss;
            (profile, a, vec![1.0, sigma])
        }
        other => return Err(Error::invalid(format!("case {other} is not a linear-in-time barrier"))),
    };
    let (sign, chi_bound) = match regime.direction {
        Direction::Super => (1.0, alpha),
        Direction::Sub => (-1.0, -alpha),
    };
    let a_limit = a_limit_for_branch_const(params, regime.branch, &constants);
    let spec = BarrierSpec {
        case,
        branch: regime.branch,
        direction: regime.direction,
        a,
        b,
        profile,
        shape: TimeShape::Linear { sign },
        region: Region::AllSpace,
        chi_bound,
        sigma,
        k,
        horizon: params.horizon,
        a_limit,
        b_exponents: exponents,
        constants,
    };
    guard_z_domain(params, &spec)?;
    Ok(spec)
}

fn a_limit_for_branch_const(params: &ProblemParams, branch: CaseId, constants: &Constants) -> f64 {
    match branch {
        CaseId::DegenerateForcing | CaseId::UniformForcing => params.alpha,
        CaseId::UniformSublinear => {
            (1.0 - params.sigma) * constants.c.unwrap().powf(params.sigma) * constants.f.unwrap()
        }
        _ => 0.0,
    }
}

/// Rejects barriers whose range leaves the domain of `Z`.
fn guard_z_domain(params: &ProblemParams, spec: &BarrierSpec) -> Result<()> {
    let domain = params.z.domain();
    let nonnegative = match spec.shape {
        TimeShape::Linear { sign } => sign > 0.0,
        TimeShape::PowerDecay { scale, .. } | TimeShape::ExpDecay { scale, .. } => scale > 0.0,
    };
    let ok = if nonnegative {
        domain.contains_positive_axis()
    } else {
        domain.is_real_line()
    };
    if ok {
        Ok(())
    } else {
        Err(Error::ZDomain {
            case: spec.case.as_str(),
            lower: if nonnegative { 0.0 } else { f64::NEG_INFINITY },
            domain: domain.to_string(),
        })
    }
}

/// Parameters of the five special constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpecialCase {
    /// Compactly supported positive sub-solution on `B_R`, center value `mu`.
    DecayBall { radius: f64, mu: f64 },
    /// `mu · exp(−E r²) · exp(−2|N| E t)`.
    DecayGaussian { mu: f64, spread: f64 },
    AbsorbingBallCritical { radius: f64 },
    AbsorbingBallStrong { radius: f64 },
    ForcedBall { radius: f64 },
}

impl SpecialCase {
    pub fn case_id(self) -> CaseId {
        match self {
            SpecialCase::DecayBall { .. } => CaseId::DecayBall,
            SpecialCase::DecayGaussian { .. } => CaseId::DecayGaussian,
            SpecialCase::AbsorbingBallCritical { .. } => CaseId::AbsorbingBallCritical,
            SpecialCase::AbsorbingBallStrong { .. } => CaseId::AbsorbingBallStrong,
            SpecialCase::ForcedBall { .. } => CaseId::ForcedBall,
        }
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(msg()))
    }
}

/// Finds `r*` in `(0, R)` with `2^{σ−k} |α̂| r^{σ−k+1} (R² − r²)^{2(k−σ)} = K`.
pub fn solve_r_star(k: f64, sigma: f64, alpha_hat: f64, spectral: f64, radius: f64) -> Result<f64> {
    let d = sigma - k;
    let g = |r: f64| {
        d * 2f64.ln() + alpha_hat.abs().ln() + (d + 1.0) * r.ln() - 2.0 * d * ((radius - r) * (radius + r)).ln()
            - spectral.ln()
    };
    let lo = radius * 1e-300f64.max(f64::EPSILON * 1e-10);
    let hi = radius * (1.0 - 1e-15);
    bisect_increasing(g, lo, hi, "r* equation")
}

pub fn build_special(params: &ProblemParams, case: SpecialCase) -> Result<BarrierSpec> {
    let k = params.k();
    let sigma = params.sigma;
    let t1 = 1.0 + params.horizon;
    let id = case.case_id();
    let spec = match case {
        SpecialCase::DecayBall { radius, mu } => {
            require(k > 1.0 + BOUNDARY_TOL, || format!("{id} needs k > 1, got {k}"))?;
            require(params.alpha == 0.0, || format!("{id} needs chi = 0 (alpha = 0)"))?;
            require(mu > 0.0 && mu.is_finite(), || format!("{id} needs a positive center value"))?;
            let profile = RadialProfile::case_i(k, radius)?;
            let n = params.case_lower_bound(profile.curvature_gap_inf(), id.as_str())?;
            let n_eff = n.abs().max(1.0);
            let ck = ((k + 1.0) / (k - 1.0)).powf(k);
            let e = radius.powf(k + 1.0) / (ck * mu.powf(k - 1.0) * (k - 1.0) * n_eff);
            let s = (k + 1.0) / k;
            let q = k / (k - 1.0);
            BarrierSpec {
                case: id,
                branch: id,
                direction: Direction::Sub,
                a: 0.0,
                b: 1.0,
                profile,
                shape: TimeShape::PowerDecay {
                    scale: mu / radius.powf(s * q),
                    e,
                    exponent: 1.0 / (k - 1.0),
                },
                region: Region::Ball(radius),
                chi_bound: 0.0,
                sigma,
                k,
                horizon: params.horizon,
                a_limit: mu,
                b_exponents: vec![],
                constants: Constants {
                    spectral: n_eff,
                    lower_n: Some(n),
                    e: Some(e),
                    c: Some(ck),
                    radius: Some(radius),
                    mu: Some(mu),
                    ..Default::default()
                },
            }
        }
        SpecialCase::DecayGaussian { mu, spread } => {
            require(is_one(k), || format!("{id} needs k = 1, got {k}"))?;
            require(params.alpha == 0.0, || format!("{id} needs chi = 0 (alpha = 0)"))?;
            require(mu > 0.0 && mu.is_finite(), || format!("{id} needs a positive amplitude"))?;
            let profile = RadialProfile::gaussian(spread)?;
            let n = params.case_lower_bound(profile.curvature_gap_inf(), id.as_str())?;
            let n_eff = n.abs().max(1.0);
            BarrierSpec {
                case: id,
                branch: id,
                direction: Direction::Sub,
                a: 0.0,
                b: 1.0,
                profile,
                shape: TimeShape::ExpDecay {
                    scale: mu,
                    rate: 2.0 * n_eff * spread,
                },
                region: Region::AllSpace,
                chi_bound: 0.0,
                sigma,
                k,
                horizon: params.horizon,
                a_limit: mu,
                b_exponents: vec![],
                constants: Constants {
                    spectral: n_eff,
                    lower_n: Some(n),
                    e: Some(spread),
                    mu: Some(mu),
                    ..Default::default()
                },
            }
        }
        SpecialCase::AbsorbingBallCritical { radius } | SpecialCase::AbsorbingBallStrong { radius } => {
            let alpha_hat = params
                .alpha_hat_neg
                .ok_or_else(|| Error::invalid(format!("{id} needs sup chi < 0 (alpha_hat_neg)")))?;
            let m = params.m_const()?;
            let r_star = ball_r_star(id, k, sigma, alpha_hat, m, radius)?;
            ball_barrier(params, id, Direction::Super, radius, r_star, m, None, alpha_hat, t1)?
        }
        SpecialCase::ForcedBall { radius } => {
            let alpha_hat = params
                .alpha_hat_pos
                .ok_or_else(|| Error::invalid(format!("{id} needs inf chi > 0 (alpha_hat_pos)")))?;
            require(sigma >= k - BOUNDARY_TOL, || format!("{id} needs sigma >= k"))?;
            let profile = RadialProfile::inverse_gap(radius)?;
            let n = params.case_lower_bound(profile.curvature_gap_inf(), id.as_str())?;
            let n_eff = n.abs().max(1.0);
            let kind = if (sigma - k).abs() <= BOUNDARY_TOL {
                CaseId::AbsorbingBallCritical
            } else {
                CaseId::AbsorbingBallStrong
            };
            let r_star = ball_r_star(kind, k, sigma, alpha_hat, n_eff, radius)?;
            ball_barrier(params, id, Direction::Sub, radius, r_star, n_eff, Some(n), alpha_hat, t1)?
        }
    };
    guard_z_domain(params, &spec)?;
    Ok(spec)
}

fn ball_r_star(kind: CaseId, k: f64, sigma: f64, alpha_hat: f64, spectral: f64, radius: f64) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Domain {
            what: "ball radius",
            value: radius,
            domain: "(0, inf)".into(),
        });
    }
    match kind {
        CaseId::AbsorbingBallCritical => {
            require((sigma - k).abs() <= BOUNDARY_TOL, || format!("{kind} needs sigma = k"))?;
            let r_star = spectral / alpha_hat.abs();
            if radius <= r_star {
                return Err(Error::invalid(format!(
                    "case {kind}: radius R = {radius} must exceed r* = {r_star}"
                )));
            }
            Ok(r_star)
        }
        _ => {
            require(sigma > k + BOUNDARY_TOL, || format!("{kind} needs sigma > k"))?;
            solve_r_star(k, sigma, alpha_hat, spectral, radius)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn ball_barrier(
    params: &ProblemParams,
    id: CaseId,
    direction: Direction,
    radius: f64,
    r_star: f64,
    spectral: f64,
    lower_n: Option<f64>,
    alpha_hat: f64,
    t1: f64,
) -> Result<BarrierSpec> {
    let k = params.k();
    let gap = (radius - r_star) * (radius + r_star);
    let a = spectral * (2.0 * t1 / (gap * gap)).powf(k) * r_star.powf(k - 1.0);
    Ok(BarrierSpec {
        case: id,
        branch: id,
        direction,
        a,
        b: 1.0,
        profile: RadialProfile::inverse_gap(radius)?,
        shape: TimeShape::Linear {
            sign: if direction == Direction::Super { 1.0 } else { -1.0 },
        },
        region: Region::Ball(radius),
        chi_bound: alpha_hat,
        sigma: params.sigma,
        k,
        horizon: params.horizon,
        a_limit: 0.0,
        b_exponents: vec![],
        constants: Constants {
            spectral,
            lower_n,
            radius: Some(radius),
            r_star: Some(r_star),
            ..Default::default()
        },
    })
}

/// Builds whichever barrier a case id names. Linear cases use `b` (or the
/// default admissible value); special cases need `special`.
pub fn build_case(
    params: &ProblemParams,
    case: CaseId,
    b: Option<f64>,
    special: Option<SpecialCase>,
) -> Result<BarrierSpec> {
    if case.is_special() {
        let sc = special.ok_or_else(|| Error::invalid(format!("case {case} needs special-case parameters")))?;
        if sc.case_id() != case {
            return Err(Error::invalid(format!(
                "special parameters are for {}, requested {case}",
                sc.case_id()
            )));
        }
        return build_special(params, sc);
    }
    let direction = if case.is_sub() { Direction::Sub } else { Direction::Super };
    let regime = Regime::new(params, direction)?;
    if regime.case() != case {
        return Err(Error::invalid(format!(
            "parameters (k = {}, sigma = {}) select case {}, not {case}",
            params.k(),
            params.sigma,
            regime.case()
        )));
    }
    let b = match b {
        Some(b) => b,
        None => admissible_for(params, &regime)?.default_b(),
    };
    build_linear(params, b, direction)
}

/// Samples of `a(b)` at `b = 2^{-j}` and the limit extrapolated from them.
#[derive(Debug, Clone)]
pub struct Extrapolation {
    pub case: CaseId,
    pub samples: Vec<(f64, f64)>,
    pub estimate: f64,
    pub closed_form: f64,
    pub abs_error: f64,
}

/// Extrapolates `lim_{b→0} a(b)` from `b = 2^{-j}`, `j = 1..=j_max` (only
/// admissible values), eliminating the known powers of `b` by a least-squares
/// fit of `a(b) = L + Σ K_i b^{e_i}` over the smallest samples.
pub fn extrapolate_a_limit(params: &ProblemParams, direction: Direction, j_max: u32) -> Result<Extrapolation> {
    let regime = Regime::new(params, direction)?;
    let adm = admissible_for(params, &regime)?;
    let mut samples = Vec::new();
    let mut exponents = Vec::new();
    let mut closed_form = f64::NAN;
    for j in 1..=j_max {
        let b = 0.5f64.powi(j as i32);
        if !adm.contains(b) {
            continue;
        }
        let spec = build_linear_unchecked(params, b, &regime)?;
        exponents = spec.b_exponents.clone();
        closed_form = spec.a_limit;
        samples.push((b, spec.a));
    }
    if samples.is_empty() {
        return Err(Error::invalid(format!(
            "case {}: no b = 2^-j (j <= {j_max}) is admissible",
            regime.case()
        )));
    }
    let estimate = fit_limit(&samples, &exponents);
    Ok(Extrapolation {
        case: regime.case(),
        abs_error: (estimate - closed_form).abs(),
        samples,
        estimate,
        closed_form,
    })
}

fn fit_limit(samples: &[(f64, f64)], exponents: &[f64]) -> f64 {
    let m = exponents.len() + 1;
    let take = samples.len().min(m + 4);
    if take < m {
        return samples.last().unwrap().1;
    }
    let tail = &samples[samples.len() - take..];
    // column scaling keeps the normal equations well conditioned
    let scales: Vec<f64> = exponents.iter().map(|e| tail[0].0.powf(*e)).collect();
    let design = DMatrix::from_fn(take, m, |i, j| {
        if j == 0 {
            1.0
        } else {
            tail[i].0.powf(exponents[j - 1]) / scales[j - 1]
        }
    });
    let rhs = DVector::from_iterator(take, tail.iter().map(|s| s.1));
    match design.svd(true, true).solve(&rhs, 1e-14) {
        Ok(sol) => sol[0],
        Err(_) => samples.last().unwrap().1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorSpec;
    use crate::params::{ZDomain, ZFunction};

    fn gtmi(n: usize, sigma: f64) -> ProblemParams {
        ProblemParams::new(OperatorSpec::grad_trace_minus_infinity(n, 0.0).unwrap(), sigma, 1.0, 1.0).unwrap()
    }

    fn tes(sigma: f64) -> ProblemParams {
        ProblemParams::new(OperatorSpec::truncated_eigen_sum(3, 0.0, 2).unwrap(), sigma, 1.0, 1.0).unwrap()
    }

    #[test]
    fn case_ids_round_trip() {
        for c in CaseId::ALL {
            assert_eq!(c.as_str().parse::<CaseId>().unwrap(), c);
        }
        assert!("I.v".parse::<CaseId>().is_err());
    }

    #[test]
    fn dispatch_table() {
        assert_eq!(classify(&gtmi(2, 0.0)).unwrap(), CaseId::DegenerateForcing);
        assert_eq!(classify(&gtmi(2, 1.0)).unwrap(), CaseId::DegenerateSubcritical);
        assert_eq!(classify(&gtmi(2, 2.0)).unwrap(), CaseId::DegenerateCritical);
        assert_eq!(classify(&gtmi(2, 3.0)).unwrap(), CaseId::DegenerateSupercritical);
        assert_eq!(classify(&tes(0.0)).unwrap(), CaseId::UniformForcing);
        assert_eq!(classify(&tes(1.0)).unwrap(), CaseId::UniformSublinear);
        assert_eq!(classify(&tes(2.0)).unwrap(), CaseId::UniformModerate);
        assert_eq!(classify(&tes(2.5)).unwrap(), CaseId::UniformStrong);
    }

    #[test]
    fn subcritical_constants_by_hand() {
        // k = 3, γ = 4, γ* = 2, σ = 1, α = 1, T = 1, n = 2 ⇒ M = 1, E = 64, F = 4
        let p = gtmi(2, 1.0);
        let adm = admissible_b(&p, Direction::Super).unwrap();
        assert!((adm.bound - 1.0 / 16.0).abs() < 1e-15);
        let b = 0.01;
        let w = build_supersolution(&p, b).unwrap();
        let radius = 4.0 * 4.0 * 1.0; // (4αF b^{σ−1})^{(γ−2)/(γ−2σ)} = 16
        let a = 64.0 * b.powi(3) * radius * radius + 4.0 * b * radius;
        assert!((w.constants.radius.unwrap() - radius).abs() < 1e-12);
        assert!((w.a - a).abs() < 1e-12 * a);
        assert!(build_supersolution(&p, 0.07).is_err());
    }

    #[test]
    fn forcing_limits() {
        assert_eq!(a_limit_table(&gtmi(2, 0.0)).unwrap(), 1.0);
        assert_eq!(a_limit_table(&tes(0.0)).unwrap(), 1.0);
        assert_eq!(a_limit_table(&gtmi(2, 3.0)).unwrap(), 0.0);
        assert_eq!(a_limit_table(&tes(1.0)).unwrap(), 0.0);
        assert!(a_limit_table(&tes(0.5)).unwrap() > 0.0);
    }

    #[test]
    fn sublinear_rate_solves_equation() {
        let p = tes(0.5);
        let w = build_supersolution(&p, 0.5).unwrap();
        let c = w.constants.c.unwrap();
        let e_bar = 2.0 * 2.0;
        let f_bar = 2f64.sqrt();
        assert!((c * c * e_bar + 0.5 * c.sqrt() * f_bar - 0.9).abs() < 1e-11);
    }

    #[test]
    fn sub_requires_finite_lower_bound() {
        // exponential profiles make the curvature coefficient unbounded below
        let err = build_subsolution(&tes(0.5), 0.5).unwrap_err();
        assert!(err.to_string().contains("minimum principle requires finite lower spectral bound"));
        assert!(build_subsolution(&tes(2.0), 0.01).is_ok());
    }

    #[test]
    fn absorbing_ball_rejects_small_radius() {
        let p = gtmi(2, 3.0).with_alpha_hat_neg(-1.0).unwrap();
        // M = 1, |α̂| = 1 ⇒ r* = 1
        assert!(build_special(&p, SpecialCase::AbsorbingBallCritical { radius: 1.0 }).is_err());
        let w = build_special(&p, SpecialCase::AbsorbingBallCritical { radius: 5.0 }).unwrap();
        assert_eq!(w.constants.r_star, Some(1.0));
    }

    #[test]
    fn strong_ball_r_star_solves_equation() {
        let p = gtmi(2, 4.0).with_alpha_hat_neg(-1.0).unwrap();
        let w = build_special(&p, SpecialCase::AbsorbingBallStrong { radius: 5.0 }).unwrap();
        let r = w.constants.r_star.unwrap();
        let lhs = 2.0 * r.powi(2) * (25.0 - r * r).powi(-2);
        assert!((lhs - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decay_ball_center_and_edge() {
        let mut p = gtmi(2, 0.0);
        p.alpha = 0.0;
        let w = build_special(&p, SpecialCase::DecayBall { radius: 5.0, mu: 1.0 }).unwrap();
        assert!((w.value(0.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(w.value(5.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn sub_barrier_needs_full_z_domain() {
        let p = gtmi(2, 0.0)
            .with_z(ZFunction::power_decay(1.0, 0.0, 1.0).unwrap())
            .unwrap();
        assert!(build_supersolution(&p, 1e-4).is_ok());
        assert!(matches!(build_subsolution(&p, 1e-4), Err(Error::ZDomain { .. })));
        let q = gtmi(2, 0.0)
            .with_z(ZFunction::table(vec![0.0, 1.0], vec![1.0, 0.0], ZDomain { lower: Some(1.0), open: false }).unwrap())
            .unwrap();
        assert!(matches!(build_supersolution(&q, 1e-4), Err(Error::ZDomain { .. })));
    }

    #[test]
    fn extrapolation_recovers_limits() {
        for p in [gtmi(2, 0.0), gtmi(2, 0.5), gtmi(2, 1.0), gtmi(3, 3.0), tes(0.5), tes(1.5), tes(3.0)] {
            let ex = extrapolate_a_limit(&p, Direction::Super, 20).unwrap();
            assert!(ex.abs_error < 1e-6, "{:?}: {} vs {}", ex.case, ex.estimate, ex.closed_form);
        }
    }
}
