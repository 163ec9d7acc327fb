//! Problem data shared by barrier construction, certification and simulation:
//! the operator, the gradient exponent `sigma`, the horizon, bounds on the
//! forcing coefficient `χ(t)`, and the first-order coefficient `Z`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{estimate_lambda_sup_inf, lambda_extremes, OperatorKind, OperatorSpec, SpectralBound};

/// Lower end of the domain of `Z`; `None` means the whole real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZDomain {
    pub lower: Option<f64>,
    /// Whether `lower` itself is excluded.
    pub open: bool,
}

impl ZDomain {
    pub const REAL_LINE: ZDomain = ZDomain { lower: None, open: false };

    pub fn contains(&self, s: f64) -> bool {
        match self.lower {
            None => s.is_finite(),
            Some(l) if self.open => s > l,
            Some(l) => s >= l,
        }
    }

    /// True if every `s > 0` is in the domain.
    pub fn contains_positive_axis(&self) -> bool {
        match self.lower {
            None => true,
            Some(l) => l <= 0.0,
        }
    }

    pub fn is_real_line(&self) -> bool {
        self.lower.is_none()
    }
}

impl fmt::Display for ZDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lower {
            None => write!(f, "(-inf, inf)"),
            Some(l) if self.open => write!(f, "({l}, inf)"),
            Some(l) => write!(f, "[{l}, inf)"),
        }
    }
}

pub type ZEvaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nonnegative, nonincreasing coefficient of `Du ⊗ Du`.
#[derive(Clone)]
pub enum ZFunction {
    Zero,
    /// `slope · max(s0 − s, 0)`: vanishes for `s >= s0`.
    ZeroAbove { s0: f64, slope: f64 },
    /// `coef · (s + shift)^{-exponent}` on `s > −shift`.
    PowerDecay { coef: f64, shift: f64, exponent: f64 },
    /// Piecewise linear through `(s_i, z_i)`, constant beyond the end knots.
    Table { knots: Vec<f64>, values: Vec<f64>, domain: ZDomain },
    Custom { name: String, eval: ZEvaluator, domain: ZDomain },
}

impl fmt::Debug for ZFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZFunction::Zero => write!(f, "Zero"),
            ZFunction::ZeroAbove { s0, slope } => write!(f, "ZeroAbove(s0={s0}, slope={slope})"),
            ZFunction::PowerDecay { coef, shift, exponent } => {
                write!(f, "PowerDecay(coef={coef}, shift={shift}, exponent={exponent})")
            }
            ZFunction::Table { knots, domain, .. } => write!(f, "Table({} knots, domain {domain})", knots.len()),
            ZFunction::Custom { name, domain, .. } => write!(f, "Custom({name}, domain {domain})"),
        }
    }
}

impl ZFunction {
    pub fn zero_above(s0: f64, slope: f64) -> Result<Self> {
        if !(s0.is_finite() && slope.is_finite() && slope >= 0.0) {
            return Err(Error::invalid(format!("zero_above needs finite s0 and slope >= 0, got ({s0}, {slope})")));
        }
        Ok(ZFunction::ZeroAbove { s0, slope })
    }

    pub fn power_decay(coef: f64, shift: f64, exponent: f64) -> Result<Self> {
        if !(coef.is_finite() && coef >= 0.0 && shift.is_finite() && exponent.is_finite() && exponent >= 0.0) {
            return Err(Error::invalid(format!(
                "power_decay needs coef >= 0, finite shift, exponent >= 0, got ({coef}, {shift}, {exponent})"
            )));
        }
        Ok(ZFunction::PowerDecay { coef, shift, exponent })
    }

    pub fn table(knots: Vec<f64>, values: Vec<f64>, domain: ZDomain) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::config("Z.table", "knots and values must be non-empty and equally long"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("Z.table", "knots must be strictly increasing"));
        }
        if values.iter().chain(knots.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("Z.table", "non-finite entry"));
        }
        let z = ZFunction::Table { knots, values, domain };
        z.validate()?;
        Ok(z)
    }

    pub fn custom(name: impl Into<String>, domain: ZDomain, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ZFunction::Custom {
            name: name.into(),
            eval: Arc::new(eval),
            domain,
        }
    }

    pub fn domain(&self) -> ZDomain {
        match self {
            ZFunction::Zero | ZFunction::ZeroAbove { .. } => ZDomain::REAL_LINE,
            ZFunction::PowerDecay { shift, .. } => ZDomain {
                lower: Some(-shift),
                open: true,
            },
            ZFunction::Table { domain, .. } | ZFunction::Custom { domain, .. } => *domain,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            ZFunction::Zero => true,
            ZFunction::ZeroAbove { slope, .. } => *slope == 0.0,
            ZFunction::PowerDecay { coef, .. } => *coef == 0.0,
            ZFunction::Table { values, .. } => values.iter().all(|v| *v == 0.0),
            ZFunction::Custom { .. } => false,
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let domain = self.domain();
        if !domain.contains(s) {
            return Err(Error::Domain {
                what: "argument of Z",
                value: s,
                domain: domain.to_string(),
            });
        }
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: f64) -> f64 {
        match self {
            ZFunction::Zero => 0.0,
            ZFunction::ZeroAbove { s0, slope } => slope * (s0 - s).max(0.0),
            ZFunction::PowerDecay { coef, shift, exponent } => coef * (s + shift).powf(-exponent),
            ZFunction::Table { knots, values, .. } => {
                let last = knots.len() - 1;
                if s <= knots[0] {
                    return values[0];
                }
                if s >= knots[last] {
                    return values[last];
                }
                let i = knots.partition_point(|k| *k <= s) - 1;
                let w = (s - knots[i]) / (knots[i + 1] - knots[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
            ZFunction::Custom { eval, .. } => eval(s),
        }
    }

    /// Samples the domain and checks `Z >= 0` and nonincreasing.
    pub fn validate(&self) -> Result<()> {
        let domain = self.domain();
        let start = match domain.lower {
            None => -1e6,
            Some(l) if domain.open => l + 1e-9 * (1.0 + l.abs()),
            Some(l) => l,
        };
        let mut grid: Vec<f64> = (0..=400).map(|i| start + (i as f64 / 400.0).powi(4) * 1e6).collect();
        if let ZFunction::Table { knots, .. } = self {
            grid.extend(knots.iter().copied().filter(|s| domain.contains(*s)));
            grid.sort_by(f64::total_cmp);
        }
        let mut prev = f64::INFINITY;
        for s in grid {
            let z = self.eval_unchecked(s);
            if !(z.is_finite() && z >= 0.0) {
                return Err(Error::config("Z", format!("Z({s}) = {z} must be finite and >= 0")));
            }
            if z > prev * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::config("Z", format!("Z must be nonincreasing, increases at s = {s}")));
            }
            prev = z;
        }
        Ok(())
    }
}

/// Time-dependent forcing coefficient `χ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ChiProfile {
    Const(f64),
    /// `amplitude · sin(frequency · t)`.
    Sin { amplitude: f64, frequency: f64 },
    /// Piecewise linear in `t`, constant beyond the end knots.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl ChiProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ChiProfile::Const(c) => *c,
            ChiProfile::Sin { amplitude, frequency } => amplitude * (frequency * t).sin(),
            ChiProfile::Table { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[last] {
                    return values[last];
                }
                let i = times.partition_point(|k| *k <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// `(inf, sup)` of `χ` over `[0, horizon]`.
    pub fn range(&self, horizon: f64) -> (f64, f64) {
        match self {
            ChiProfile::Const(c) => (*c, *c),
            ChiProfile::Sin { amplitude, frequency } => {
                let mut pts = vec![0.0, horizon];
                // interior critical points of sin(ω t)
                if *frequency != 0.0 {
                    let w = frequency.abs();
                    let mut j = 0.0;
                    loop {
                        let t = (std::f64::consts::FRAC_PI_2 + j * std::f64::consts::PI) / w;
                        if t > horizon {
                            break;
                        }
                        pts.push(t);
                        j += 1.0;
                    }
                }
                pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
                    let v = amplitude * (frequency * t).sin();
                    (lo.min(v), hi.max(v))
                })
            }
            ChiProfile::Table { times, values } => {
                let mut lo = self.eval(0.0).min(self.eval(horizon));
                let mut hi = self.eval(0.0).max(self.eval(horizon));
                for (t, v) in times.iter().zip(values) {
                    if *t >= 0.0 && *t <= horizon {
                        lo = lo.min(*v);
                        hi = hi.max(*v);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn sup_abs(&self, horizon: f64) -> f64 {
        let (lo, hi) = self.range(horizon);
        lo.abs().max(hi.abs())
    }
}

/// Everything a barrier needs to know about the equation
/// `H(Du, D²u + Z(u) Du⊗Du) + χ(t)|Du|^σ − u_t = 0` on `ℝⁿ × (0, T)`.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub op: OperatorSpec,
    pub sigma: f64,
    pub horizon: f64,
    /// `sup_{[0,T]} |χ|`.
    pub alpha: f64,
    /// `sup χ < 0`, for forcing that is strictly negative.
    pub alpha_hat_neg: Option<f64>,
    /// `inf χ > 0`, for forcing that is strictly positive.
    pub alpha_hat_pos: Option<f64>,
    pub lambda_sup: SpectralBound,
    pub lambda_inf: SpectralBound,
    pub z: ZFunction,
    pub center: Vec<f64>,
}

/// `(Λ^sup, Λ^inf)`: closed forms for the built-in families, a λ-sweep for
/// custom operators.
pub fn spectral_bounds(op: &OperatorSpec) -> Result<(SpectralBound, SpectralBound)> {
    let n = op.n() as f64;
    Ok(match op.kind() {
        OperatorKind::GradTraceMinusInfinity { .. } => {
            (SpectralBound::Finite(n - 1.0), SpectralBound::Finite(-(n - 1.0)))
        }
        OperatorKind::TruncatedEigenSum { m, .. } => {
            (SpectralBound::Finite(n + 1.0 - *m as f64), SpectralBound::NegInfinity)
        }
        OperatorKind::Custom { .. } => {
            let rep = estimate_lambda_sup_inf(op, (-1e3, 1e3), 2001)?;
            (rep.lambda_sup, rep.lambda_inf)
        }
    })
}

const LAMBDA_SAMPLES: usize = 256;

impl ProblemParams {
    pub fn new(op: OperatorSpec, sigma: f64, horizon: f64, alpha: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Domain {
                what: "sigma",
                value: sigma,
                domain: "[0, inf)".into(),
            });
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain {
                what: "horizon T",
                value: horizon,
                domain: "(0, inf)".into(),
            });
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Domain {
                what: "alpha",
                value: alpha,
                domain: "[0, inf)".into(),
            });
        }
        let (lambda_sup, lambda_inf) = spectral_bounds(&op)?;
        let n = op.n();
        Ok(Self {
            op,
            sigma,
            horizon,
            alpha,
            alpha_hat_neg: None,
            alpha_hat_pos: None,
            lambda_sup,
            lambda_inf,
            z: ZFunction::Zero,
            center: vec![0.0; n],
        })
    }

    pub fn with_z(mut self, z: ZFunction) -> Result<Self> {
        z.validate()?;
        self.z = z;
        Ok(self)
    }

    /// Declares `χ <= alpha_hat < 0` on `[0, T]`.
    pub fn with_alpha_hat_neg(mut self, alpha_hat: f64) -> Result<Self> {
        if !(alpha_hat.is_finite() && alpha_hat < 0.0) {
            return Err(Error::Domain {
                what: "sup of chi",
                value: alpha_hat,
                domain: "(-inf, 0)".into(),
            });
        }
        self.alpha_hat_neg = Some(alpha_hat);
        self.alpha = self.alpha.max(alpha_hat.abs());
        Ok(self)
    }

    /// Declares `χ >= alpha_hat > 0` on `[0, T]`.
    pub fn with_alpha_hat_pos(mut self, alpha_hat: f64) -> Result<Self> {
        if !(alpha_hat.is_finite() && alpha_hat > 0.0) {
            return Err(Error::Domain {
                what: "inf of chi",
                value: alpha_hat,
                domain: "(0, inf)".into(),
            });
        }
        self.alpha_hat_pos = Some(alpha_hat);
        self.alpha = self.alpha.max(alpha_hat);
        Ok(self)
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Result<Self> {
        if center.len() != self.op.n() {
            return Err(Error::DimensionMismatch {
                expected: self.op.n(),
                got: center.len(),
            });
        }
        self.center = center;
        Ok(self)
    }

    pub fn with_spectral(mut self, lambda_sup: SpectralBound, lambda_inf: SpectralBound) -> Self {
        self.lambda_sup = lambda_sup;
        self.lambda_inf = lambda_inf;
        self
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn k(&self) -> f64 {
        self.op.k()
    }

    pub fn gamma(&self) -> f64 {
        self.op.gamma()
    }

    /// `γ/(γ − 2)`, defined for `k > 1`.
    pub fn gamma_star(&self) -> Option<f64> {
        let g = self.gamma();
        (self.k() > 1.0).then(|| g / (g - 2.0))
    }

    /// `σ/(σ − 1)`, defined for `σ > 1`.
    pub fn sigma_star(&self) -> Option<f64> {
        (self.sigma > 1.0).then(|| self.sigma / (self.sigma - 1.0))
    }

    /// `M = max(Λ^sup, 1)`.
    pub fn m_const(&self) -> Result<f64> {
        match self.lambda_sup {
            SpectralBound::Finite(v) => Ok(v.max(1.0)),
            _ => Err(Error::UnboundedUpperSpectrum),
        }
    }

    /// `Λ_min(λ) = min_e H(e, λ e⊗e − I)`; `λ = −inf` returns `Λ^inf`.
    pub fn lambda_min_at(&self, lambda: f64) -> Result<f64> {
        if lambda == f64::NEG_INFINITY {
            return Ok(match self.lambda_inf {
                SpectralBound::Finite(v) => v,
                _ => f64::NEG_INFINITY,
            });
        }
        let n = self.op.n() as f64;
        Ok(match self.op.kind() {
            OperatorKind::GradTraceMinusInfinity { .. } => -(n - 1.0),
            OperatorKind::TruncatedEigenSum { m, .. } => lambda.min(0.0) - (n - *m as f64 + 1.0),
            OperatorKind::Custom { .. } => lambda_extremes(&self.op, lambda, LAMBDA_SAMPLES)?.0,
        })
    }

    /// Lower bound `N` for `H(e, λ e⊗e − I)` over the coefficients `λ`
    /// a barrier can produce, given the infimum of its curvature gap. Since
    /// `Λ_min` is nondecreasing this is `Λ_min(λ_low)`.
    pub fn case_lower_bound(&self, lambda_low: f64, case: &str) -> Result<f64> {
        let n = self.lambda_min_at(lambda_low)?;
        if n.is_finite() {
            Ok(n.min(0.0))
        } else {
            Err(Error::UnboundedLowerSpectrum(format!(
                "case {case}: H(e, λ e⊗e − I) is unbounded below over the barrier's range λ >= {lambda_low}"
            )))
        }
    }
}
