//! Change of variables `u = φ(v)` for doubly nonlinear equations
//! `H(Du, D²u) − f(u) u_t = 0`, with `φ'(τ) = f(φ(τ))^{1/(k−1)}`. The
//! transformed unknown solves `H(Dv, D²v + Z(v) Dv⊗Dv) − v_t = 0` with
//! `Z = φ''/φ'`.

use std::fmt;
use std::sync::Arc;

use crate::barrier_factory::CaseId;
use crate::error::{Error, Result};
use crate::params::{ProblemParams, ZDomain, ZFunction};
use crate::quadrature::integrate_piecewise;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The coefficient `f` of `u_t`, optionally with the derivative of
/// `f^{1/(k−1)}` supplied in closed form.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    f: ScalarFn,
    root_derivative: Option<ScalarFn>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity({})", self.name)
    }
}

impl Nonlinearity {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            root_derivative: None,
        }
    }

    /// Supplies `d/ds f(s)^{1/(k−1)}` in place of central differences.
    pub fn with_root_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.root_derivative = Some(Arc::new(d));
        self
    }

    /// `(s + a)^α`.
    pub fn power(alpha: f64, a: f64) -> Self {
        Self::new(format!("(s + {a})^{alpha}"), move |s: f64| (s + a).powf(alpha))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    fn root(&self, s: f64, k: f64) -> f64 {
        (self.f)(s).powf(1.0 / (k - 1.0))
    }

    /// `d/ds f^{1/(k−1)}` at `s >= 0`: the callback if present, otherwise a
    /// central difference with step `1e−6 (1 + s)` (forward near `s = 0`).
    pub fn root_derivative(&self, s: f64, k: f64) -> f64 {
        if let Some(d) = &self.root_derivative {
            return d(s);
        }
        let h = 1e-6 * (1.0 + s);
        if s >= h {
            (self.root(s + h, k) - self.root(s - h, k)) / (2.0 * h)
        } else {
            (self.root(s + h, k) - self.root(s, k)) / h
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    /// `∫_0^1 f^{−1/(k−1)} < ∞`: `φ` is anchored at `φ(0) = 0`.
    Convergent,
    /// The integral diverges at `0`: `φ` is anchored at `φ(0) = 1` and maps
    /// the whole line onto `(0, ∞)`.
    Divergent,
    /// Neither test was decisive; `tail_slope` is `log10` of the ratio of
    /// the last two increments.
    Inconclusive { tail_slope: f64 },
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Convergent => write!(f, "convergent"),
            Classification::Divergent => write!(f, "divergent"),
            Classification::Inconclusive { tail_slope } => write!(f, "inconclusive (tail slope {tail_slope:.3})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyReport {
    pub classification: Classification,
    /// `(ε, ∫_ε^1 f^{−1/(k−1)})` for `ε = 10^{−j}`, `j = 1..=12`.
    pub partial_integrals: Vec<(f64, f64)>,
}

const CLASSIFY_DECADES: i32 = 12;
const CONVERGENT_RATIO: f64 = 0.95;
const DIVERGENT_RATIO: f64 = 0.99;
const DIVERGENT_GROWTH: f64 = 5.0;

fn check_k(k: f64) -> Result<()> {
    if !(k > 1.0 && k.is_finite()) {
        return Err(Error::Domain {
            what: "homogeneity k",
            value: k,
            domain: "(1, inf)".into(),
        });
    }
    Ok(())
}

fn check_positive_near_zero(f: &Nonlinearity) -> Result<()> {
    for j in 0..=160 {
        let s = 10f64.powf(-(j as f64) / 10.0);
        let v = f.eval(s);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                what: "f on (0, 1]",
                value: v,
                domain: format!("(0, inf); fails at s = {s:e}"),
            });
        }
    }
    Ok(())
}

/// Decides whether `∫_0^1 f^{−1/(k−1)}` is finite from the partial integrals
/// over `[10^{−j}, 1]`.
pub fn classify_f(f: &Nonlinearity, k: f64, quad_tol: f64) -> Result<ClassifyReport> {
    check_k(k)?;
    check_positive_near_zero(f)?;
    let g = |s: f64| f.eval(s).powf(-1.0 / (k - 1.0));
    let mut partial = Vec::new();
    let mut total = 0.0;
    for j in 1..=CLASSIFY_DECADES {
        let lo = 10f64.powi(-j);
        let hi = if j == 1 { 1.0 } else { 10f64.powi(1 - j) };
        total += integrate_piecewise(g, &[lo, hi], 1e-14, 1e-12).value;
        partial.push((lo, total));
    }
    let n = partial.len();
    let d_last = partial[n - 1].1 - partial[n - 2].1;
    let d_prev = partial[n - 2].1 - partial[n - 3].1;
    let ratio = d_last / d_prev;
    let total = partial[n - 1].1;
    let classification = if d_last <= quad_tol * (1.0 + total.abs()) || ratio <= CONVERGENT_RATIO {
        Classification::Convergent
    } else if ratio >= DIVERGENT_RATIO && total >= DIVERGENT_GROWTH {
        Classification::Divergent
    } else {
        Classification::Inconclusive {
            tail_slope: ratio.log10(),
        }
    };
    Ok(ClassifyReport {
        classification,
        partial_integrals: partial,
    })
}

/// Closed-form family `f(s) = (s + a)^α`, `0 <= α <= k − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFamily {
    pub alpha: f64,
    pub a: f64,
    pub k: f64,
}

impl PowerFamily {
    pub fn new(alpha: f64, a: f64, k: f64) -> Result<Self> {
        check_k(k)?;
        if !(alpha >= 0.0 && alpha <= k - 1.0) {
            return Err(Error::invalid(format!(
                "f^(1/(k-1)) is concave only for 0 <= alpha <= k - 1 = {}, got {alpha}",
                k - 1.0
            )));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("shift a must be >= 0, got {a}")));
        }
        if alpha == k - 1.0 && a == 0.0 {
            return Err(Error::invalid(
                "alpha = k - 1 with a = 0 has a divergent integral; use the exponential family u = b e^v",
            ));
        }
        Ok(Self { alpha, a, k })
    }

    pub fn c_k(&self) -> f64 {
        (self.k - 1.0 - self.alpha) / (self.k - 1.0)
    }

    fn is_exponential(&self) -> bool {
        self.alpha == self.k - 1.0
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        let (alpha, a, e) = (self.alpha, self.a, self.alpha / (self.k - 1.0));
        Nonlinearity::power(alpha, a).with_root_derivative(move |s| if e == 0.0 { 0.0 } else { e * (s + a).powf(e - 1.0) })
    }

    /// `[c_k v + a^{c_k}]^{1/c_k} − a`, or `a e^v − a` when `α = k − 1`.
    pub fn phi(&self, v: f64) -> f64 {
        if self.is_exponential() {
            self.a * v.exp_m1()
        } else {
            let c = self.c_k();
            (c * v + self.a.powf(c)).powf(1.0 / c) - self.a
        }
    }

    pub fn phi_inv(&self, u: f64) -> f64 {
        if self.is_exponential() {
            (u / self.a).ln_1p()
        } else {
            let c = self.c_k();
            ((u + self.a).powf(c) - self.a.powf(c)) / c
        }
    }

    /// `Z(v) = (α/(k−1)) / (c_k v + a^{c_k})`, or `1` when `α = k − 1`.
    pub fn z(&self, v: f64) -> f64 {
        if self.is_exponential() {
            1.0
        } else {
            let c = self.c_k();
            self.alpha / (self.k - 1.0) / (c * v + self.a.powf(c))
        }
    }

    pub fn z_function(&self) -> Result<ZFunction> {
        if self.is_exponential() {
            return Ok(ZFunction::custom("unit", ZDomain::REAL_LINE, |_| 1.0));
        }
        let c = self.c_k();
        ZFunction::power_decay(self.alpha / ((self.k - 1.0) * c), self.a.powf(c) / c, 1.0)
    }
}

/// `φ`, `φ⁻¹` and `Z` for a given `f` and `k`.
#[derive(Debug, Clone)]
pub struct TransformSpec {
    pub f: Nonlinearity,
    pub k: f64,
    pub classification: Classification,
    /// `u₀` with `φ⁻¹(u₀) = 0`.
    pub anchor: f64,
    identity: bool,
}

const CONCAVITY_TOL: f64 = 1e-9;

/// Builds the transform for a known classification: anchor `u₀ = 0` when
/// convergent, `u₀ = 1` when divergent. Checks on a log-spaced grid that
/// `f^{1/(k−1)}` is nondecreasing and concave.
pub fn build_phi(f: Nonlinearity, k: f64, classification: Classification) -> Result<TransformSpec> {
    check_k(k)?;
    let anchor = match classification {
        Classification::Convergent => 0.0,
        Classification::Divergent => 1.0,
        Classification::Inconclusive { .. } => {
            return Err(Error::invalid("classification is inconclusive; supply convergent or divergent explicitly"))
        }
    };
    check_positive_near_zero(&f)?;
    let grid: Vec<f64> = (-60..=60).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
    for w in grid.windows(3) {
        let (a, b) = (w[0], w[2]);
        let m = 0.5 * (a + b);
        let (ra, rm, rb) = (f.root(a, k), f.root(m, k), f.root(b, k));
        let scale = 1.0 + ra.abs().max(rb.abs());
        if rb < ra - CONCAVITY_TOL * scale {
            return Err(Error::invalid(format!("f must be nondecreasing; decreases on [{a:e}, {b:e}]")));
        }
        if rm < 0.5 * (ra + rb) - CONCAVITY_TOL * scale {
            return Err(Error::invalid(format!(
                "f^(1/(k-1)) must be concave; secant test fails on [{a:e}, {b:e}]"
            )));
        }
    }
    Ok(TransformSpec {
        f,
        k,
        classification,
        anchor,
        identity: false,
    })
}

/// Log-spaced breakpoints between `lo` and `hi` (ratio 10), graded towards
/// `0` when `lo == 0`.
fn graded_breakpoints(lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = Vec::new();
    if lo == 0.0 {
        pts.push(0.0);
        pts.extend((1..=16).rev().map(|j| hi * 10f64.powi(-j)));
    } else {
        let mut x = lo;
        while x < hi {
            pts.push(x);
            x *= 10.0;
        }
    }
    pts.push(hi);
    pts
}

impl TransformSpec {
    /// `k = 1` with `f ≡ 1`: `u = v` and `Z ≡ 0`.
    pub fn identity() -> Self {
        Self {
            f: Nonlinearity::new("1", |_| 1.0).with_root_derivative(|_| 0.0),
            k: 1.0,
            classification: Classification::Convergent,
            anchor: 0.0,
            identity: true,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `∫_{u₀}^u f^{−1/(k−1)}`.
    pub fn phi_inv(&self, u: f64) -> Result<f64> {
        if self.identity {
            return Ok(u);
        }
        let valid = match self.classification {
            Classification::Convergent => u >= 0.0,
            _ => u > 0.0,
        };
        if !(valid && u.is_finite()) {
            return Err(Error::Domain {
                what: "u",
                value: u,
                domain: if self.anchor == 0.0 { "[0, inf)" } else { "(0, inf)" }.into(),
            });
        }
        let (lo, hi, sign) = if u >= self.anchor {
            (self.anchor, u, 1.0)
        } else {
            (u, self.anchor, -1.0)
        };
        if lo == hi {
            return Ok(0.0);
        }
        let k = self.k;
        let g = |s: f64| self.f.eval(s).powf(-1.0 / (k - 1.0));
        let r = integrate_piecewise(g, &graded_breakpoints(lo, hi), 1e-15, 1e-14);
        Ok(sign * r.value)
    }

    fn phi_prime_at_u(&self, u: f64) -> f64 {
        self.f.root(u, self.k)
    }

    /// `φ(v)` by safeguarded Newton iteration on `φ⁻¹(u) = v`.
    pub fn phi(&self, v: f64) -> Result<f64> {
        if self.identity {
            return Ok(v);
        }
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "v" });
        }
        if self.classification == Classification::Convergent && v < 0.0 {
            return Err(Error::Domain {
                what: "v",
                value: v,
                domain: "[0, inf) for a convergent transform".into(),
            });
        }
        if v == 0.0 {
            return Ok(self.anchor);
        }
        let g = |u: f64| self.phi_inv(u).map(|w| w - v);
        // bracket [lo, hi] with g(lo) <= 0 <= g(hi)
        let (mut lo, mut hi) = if v > 0.0 {
            let mut hi = self.anchor.max(1.0);
            while g(hi)? < 0.0 {
                hi *= 4.0;
                if !hi.is_finite() || hi > 1e300 {
                    return Err(Error::Bracket(format!("phi({v}): no upper bracket below 1e300")));
                }
            }
            (self.anchor, hi)
        } else {
            let mut lo = self.anchor * 0.5;
            while g(lo)? > 0.0 {
                lo *= 0.25;
                if lo < 1e-300 {
                    return Err(Error::Bracket(format!("phi({v}): no lower bracket above 1e-300")));
                }
            }
            (lo, self.anchor)
        };
        let mut u = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = g(u)?;
            if r == 0.0 {
                return Ok(u);
            }
            if r < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let newton = u - r * self.phi_prime_at_u(u);
            let next = if newton > lo && newton < hi && newton.is_finite() {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - u).abs() <= 1e-15 * u.abs().max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(next);
            }
            u = next;
        }
        Err(Error::Bracket(format!("phi({v}): no convergence in [{lo:e}, {hi:e}]")))
    }

    /// `φ'(v) = f(φ(v))^{1/(k−1)}`.
    pub fn phi_prime(&self, v: f64) -> Result<f64> {
        if self.identity {
            return Ok(1.0);
        }
        Ok(self.phi_prime_at_u(self.phi(v)?))
    }

    /// `Z(v) = φ''(v)/φ'(v) = (f^{1/(k−1)})'(φ(v))`.
    pub fn z(&self, v: f64) -> Result<f64> {
        if self.identity {
            return Ok(0.0);
        }
        Ok(self.f.root_derivative(self.phi(v)?, self.k))
    }

    /// Domain of `Z`: `[0, ∞)` (open when `Z(0)` is infinite) for convergent
    /// transforms, the whole line otherwise.
    pub fn z_domain(&self) -> ZDomain {
        if self.identity || self.classification != Classification::Convergent {
            return ZDomain::REAL_LINE;
        }
        let z0 = self.f.root_derivative(0.0, self.k);
        ZDomain {
            lower: Some(0.0),
            open: !z0.is_finite(),
        }
    }

    pub fn z_function(&self) -> ZFunction {
        if self.identity {
            return ZFunction::Zero;
        }
        let spec = self.clone();
        ZFunction::custom(format!("transform of {}", self.f.name()), self.z_domain(), move |v| {
            spec.z(v).unwrap_or(f64::NAN)
        })
    }
}

#[derive(Debug, Clone)]
pub struct SandwichReport {
    /// `f(0)^{1/(k−1)}`.
    pub omega: f64,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// Samples where `(f^{1/(k−1)})'` leaves `[ω₁, ω₂]`.
    pub z_violations: usize,
    /// `(f^{1/(k−1)})' ≡ 0`, so `Z ≡ 0` and `f` is constant.
    pub degenerate: bool,
    /// `ω > 0` anchors at `0`; `ω = 0` needs the divergent anchoring.
    pub anchoring: Classification,
    pub samples: usize,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0 && self.z_violations == 0
    }
}

/// Checks `(ω₁ s + ω)^{k−1} <= f(s) <= (ω₂ s + ω)^{k−1}` and
/// `ω₁ <= (f^{1/(k−1)})' <= ω₂` on a grid over `[0, s_max]`.
pub fn sandwich_check(f: &Nonlinearity, k: f64, omega1: f64, omega2: f64, s_max: f64, samples: usize) -> Result<SandwichReport> {
    check_k(k)?;
    if !(omega1 > 0.0 && omega1 <= omega2 && omega2.is_finite()) {
        return Err(Error::invalid(format!("need 0 < omega1 <= omega2 < inf, got ({omega1}, {omega2})")));
    }
    if samples < 2 || !(s_max > 0.0) {
        return Err(Error::invalid("need at least 2 samples on a nonempty interval"));
    }
    let e = k - 1.0;
    let omega = f.eval(0.0).max(0.0).powf(1.0 / e);
    let mut rep = SandwichReport {
        omega,
        lower_violations: 0,
        upper_violations: 0,
        z_violations: 0,
        degenerate: true,
        anchoring: if omega > 0.0 {
            Classification::Convergent
        } else {
            Classification::Divergent
        },
        samples,
    };
    for i in 0..samples {
        let s = s_max * i as f64 / (samples - 1) as f64;
        let fs = f.eval(s);
        let lower = (omega1 * s + omega).powf(e);
        let upper = (omega2 * s + omega).powf(e);
        let tol = 1e-12 * (1.0 + upper);
        if lower > fs + tol {
            rep.lower_violations += 1;
        }
        if fs > upper + tol {
            rep.upper_violations += 1;
        }
        if s > 0.0 {
            let z = f.root_derivative(s, k);
            if z != 0.0 {
                rep.degenerate = false;
            }
            let ztol = 1e-6 * (1.0 + z.abs());
            if z < omega1 - ztol || z > omega2 + ztol {
                rep.z_violations += 1;
            }
        }
    }
    Ok(rep)
}

/// The `v`-problem: parameters with `Z` from the transform, initial data
/// mapped through `φ⁻¹`, and the construction that supplies lower barriers.
#[derive(Debug, Clone)]
pub struct TransformedProblem {
    pub params: ProblemParams,
    pub initial_v: Vec<f64>,
    pub v_range: (f64, f64),
    /// Convergent: the compactly supported decay barrier; divergent: the
    /// sub-solution table. A bound `sup u <= φ(o(R^γ*))` for `u` reads
    /// `sup v = o(R^γ*)` for `v`.
    pub branch: CaseId,
}

/// Maps a problem with `f(u) u_t` onto `H(Dv, D²v + Z(v)Dv⊗Dv) = v_t`.
pub fn transformed_problem(params: &ProblemParams, transform: &TransformSpec, initial_u: &[f64]) -> Result<TransformedProblem> {
    if params.alpha != 0.0 {
        return Err(Error::invalid("the doubly nonlinear problem carries no forcing; alpha must be 0"));
    }
    if !transform.is_identity() && (params.k() - transform.k).abs() > 1e-12 * transform.k {
        return Err(Error::invalid(format!(
            "operator has k = {}, transform was built for k = {}",
            params.k(),
            transform.k
        )));
    }
    let initial_v = initial_u
        .iter()
        .map(|&u| transform.phi_inv(u))
        .collect::<Result<Vec<f64>>>()?;
    let v_range = initial_v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let z = if transform.is_identity() {
        ZFunction::Zero
    } else {
        transform.z_function()
    };
    let branch = match transform.classification {
        Classification::Convergent => CaseId::DecayBall,
        _ => CaseId::SubDegenerate,
    };
    Ok(TransformedProblem {
        params: params.clone().with_z(z)?,
        initial_v,
        v_range,
        branch,
    })
}
