//! Radial profiles `v(r)` with closed-form first and second derivatives.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature::{gk21, integrate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    /// `r^beta`, `beta > 1`.
    Power { beta: f64 },
    /// `∫₀^{r^beta} (1 + τ^p)^{-1} dτ` with `p = (beta − beta_bar)/beta`; grows
    /// like `r^beta` near the origin and like `r^{beta_bar}` at infinity.
    RegularizedPower { beta: f64, beta_bar: f64, p: f64 },
    /// `e^{c r²}`.
    ExpSquare { c: f64 },
    /// `e^{c r} − 1 − c r`.
    ExpLinearReg { c: f64 },
    /// `(R² − r²)^{-1}` on `0 <= r < R`.
    InverseGap { radius: f64 },
    /// `(R^s − r^s)^q` on `0 <= r <= R` with `s = (k+1)/k`, `q = k/(k−1)`.
    CaseI { k: f64, radius: f64 },
    /// `e^{-E r²}`.
    Gaussian { e: f64 },
}

#[derive(Clone)]
pub struct RadialProfile {
    kind: ProfileKind,
    table: Option<Arc<OnceLock<RegTable>>>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl PartialEq for RadialProfile {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: v,
            domain: "(0, inf)".into(),
        })
    }
}

impl RadialProfile {
    fn plain(kind: ProfileKind) -> Self {
        Self { kind, table: None }
    }

    pub fn power(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 1.0) {
            return Err(Error::Domain {
                what: "power exponent",
                value: beta,
                domain: "(1, inf)".into(),
            });
        }
        Ok(Self::plain(ProfileKind::Power { beta }))
    }

    pub fn regularized_power(beta: f64, beta_bar: f64) -> Result<Self> {
        if !(beta_bar.is_finite() && beta.is_finite() && 1.0 <= beta_bar && beta_bar < beta) {
            return Err(Error::invalid(format!(
                "regularized power needs 1 <= beta_bar < beta, got beta = {beta}, beta_bar = {beta_bar}"
            )));
        }
        let p = (beta - beta_bar) / beta;
        Ok(Self {
            kind: ProfileKind::RegularizedPower { beta, beta_bar, p },
            table: Some(Arc::new(OnceLock::new())),
        })
    }

    pub fn exp_square(c: f64) -> Result<Self> {
        positive("exp-square rate", c)?;
        Ok(Self::plain(ProfileKind::ExpSquare { c }))
    }

    pub fn exp_linear_reg(c: f64) -> Result<Self> {
        positive("exp-linear rate", c)?;
        Ok(Self::plain(ProfileKind::ExpLinearReg { c }))
    }

    pub fn inverse_gap(radius: f64) -> Result<Self> {
        positive("inverse-gap radius", radius)?;
        Ok(Self::plain(ProfileKind::InverseGap { radius }))
    }

    pub fn case_i(k: f64, radius: f64) -> Result<Self> {
        if !(k.is_finite() && k > 1.0) {
            return Err(Error::Domain {
                what: "homogeneity k",
                value: k,
                domain: "(1, inf)".into(),
            });
        }
        positive("ball radius", radius)?;
        Ok(Self::plain(ProfileKind::CaseI { k, radius }))
    }

    pub fn gaussian(e: f64) -> Result<Self> {
        positive("gaussian rate", e)?;
        Ok(Self::plain(ProfileKind::Gaussian { e }))
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Power { .. } => "power",
            ProfileKind::RegularizedPower { .. } => "regularized_power",
            ProfileKind::ExpSquare { .. } => "exp_square",
            ProfileKind::ExpLinearReg { .. } => "exp_linear_reg",
            ProfileKind::InverseGap { .. } => "inverse_gap",
            ProfileKind::CaseI { .. } => "case_i",
            ProfileKind::Gaussian { .. } => "gaussian",
        }
    }

    /// Short human-readable description including parameters.
    pub fn describe(&self) -> String {
        match self.kind {
            ProfileKind::Power { beta } => format!("r^{beta}"),
            ProfileKind::RegularizedPower { beta, beta_bar, p } => {
                format!("regularized_power(beta={beta},beta_bar={beta_bar},p={p})")
            }
            ProfileKind::ExpSquare { c } => format!("exp({c} r^2)"),
            ProfileKind::ExpLinearReg { c } => format!("exp({c} r)-1-{c} r"),
            ProfileKind::InverseGap { radius } => format!("1/({radius}^2-r^2)"),
            ProfileKind::CaseI { k, radius } => format!("case_i(k={k},R={radius})"),
            ProfileKind::Gaussian { e } => format!("exp(-{e} r^2)"),
        }
    }

    /// Rate-like constant `c` (exponential kinds), if any.
    pub fn rate(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::ExpSquare { c } | ProfileKind::ExpLinearReg { c } => Some(c),
            ProfileKind::Gaussian { e } => Some(e),
            _ => None,
        }
    }

    /// Regularization exponent `p`, if any.
    pub fn reg_exponent(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::RegularizedPower { p, .. } => Some(p),
            _ => None,
        }
    }

    /// Outer radius for profiles that live on a ball.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::InverseGap { radius } | ProfileKind::CaseI { radius, .. } => Some(radius),
            _ => None,
        }
    }

    /// True when `v' >= 0` on the whole domain.
    pub fn is_increasing(&self) -> bool {
        !matches!(self.kind, ProfileKind::CaseI { .. } | ProfileKind::Gaussian { .. })
    }

    pub fn check_domain(&self, r: f64) -> Result<()> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Domain {
                what: "radius",
                value: r,
                domain: "[0, inf)".into(),
            });
        }
        match self.kind {
            ProfileKind::InverseGap { radius } if r >= radius => Err(Error::Domain {
                what: "radius",
                value: r,
                domain: format!("[0, {radius})"),
            }),
            ProfileKind::CaseI { radius, .. } if r > radius => Err(Error::Domain {
                what: "radius",
                value: r,
                domain: format!("[0, {radius}]"),
            }),
            _ => Ok(()),
        }
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(match self.kind {
            ProfileKind::Power { beta } => r.powf(beta),
            ProfileKind::RegularizedPower { beta, p, .. } => self.reg_table(p).value(r.powf(beta)),
            ProfileKind::ExpSquare { c } => (c * r * r).exp(),
            ProfileKind::ExpLinearReg { c } => expm1_minus_x(c * r),
            ProfileKind::InverseGap { radius } => 1.0 / ((radius - r) * (radius + r)),
            ProfileKind::CaseI { k, radius } => {
                let (s, q) = case_i_exponents(k);
                (radius.powf(s) - r.powf(s)).max(0.0).powf(q)
            }
            ProfileKind::Gaussian { e } => (-e * r * r).exp(),
        })
    }

    pub fn d1(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(match self.kind {
            ProfileKind::Power { beta } => beta * r.powf(beta - 1.0),
            ProfileKind::RegularizedPower { beta, p, .. } => beta * r.powf(beta - 1.0) / (1.0 + r.powf(p * beta)),
            ProfileKind::ExpSquare { c } => 2.0 * c * r * (c * r * r).exp(),
            ProfileKind::ExpLinearReg { c } => c * (c * r).exp_m1(),
            ProfileKind::InverseGap { radius } => {
                let g = (radius - r) * (radius + r);
                2.0 * r / (g * g)
            }
            ProfileKind::CaseI { k, radius } => {
                let (s, q) = case_i_exponents(k);
                let g = (radius.powf(s) - r.powf(s)).max(0.0);
                -q * s * r.powf(s - 1.0) * g.powf(q - 1.0)
            }
            ProfileKind::Gaussian { e } => -2.0 * e * r * (-e * r * r).exp(),
        })
    }

    /// Second derivative; at `r = 0` the one-sided limit (which may be
    /// infinite for power-type kinds with exponent below 2).
    pub fn d2(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(match self.kind {
            ProfileKind::Power { beta } => beta * (beta - 1.0) * r.powf(beta - 2.0),
            ProfileKind::RegularizedPower { beta, beta_bar, p } => {
                let s = r.powf(p * beta);
                beta * r.powf(beta - 2.0) * ((beta - 1.0) + (beta_bar - 1.0) * s) / ((1.0 + s) * (1.0 + s))
            }
            ProfileKind::ExpSquare { c } => 2.0 * c * (1.0 + 2.0 * c * r * r) * (c * r * r).exp(),
            ProfileKind::ExpLinearReg { c } => c * c * (c * r).exp(),
            ProfileKind::InverseGap { radius } => {
                let g = (radius - r) * (radius + r);
                2.0 / (g * g) + 8.0 * r * r / (g * g * g)
            }
            ProfileKind::CaseI { k, radius } => {
                let (s, q) = case_i_exponents(k);
                let rs = r.powf(s);
                let g = (radius.powf(s) - rs).max(0.0);
                -q * s * (s - 1.0) * r.powf(s - 2.0) * g.powf(q - 1.0) + q * (q - 1.0) * s * s * rs * rs / (r * r) * g.powf(q - 2.0)
            }
            ProfileKind::Gaussian { e } => (-2.0 * e + 4.0 * e * e * r * r) * (-e * r * r).exp(),
        })
    }

    /// `1 − r v''(r)/v'(r)` in closed form, for `r > 0` (and `r < R` on balls).
    /// This is the coefficient of `e⊗e` (up to the `Z` contribution) in the
    /// factored radial Hessian.
    pub fn curvature_gap(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        if r == 0.0 {
            return Err(Error::Domain {
                what: "radius",
                value: r,
                domain: "(0, inf)".into(),
            });
        }
        Ok(match self.kind {
            ProfileKind::Power { beta } => 2.0 - beta,
            ProfileKind::RegularizedPower { beta, beta_bar, p } => {
                let s = r.powf(p * beta);
                if s.is_infinite() {
                    2.0 - beta_bar
                } else {
                    ((2.0 - beta) + (2.0 - beta_bar) * s) / (1.0 + s)
                }
            }
            ProfileKind::ExpSquare { c } => -2.0 * c * r * r,
            ProfileKind::ExpLinearReg { c } => {
                let x = c * r;
                // 1 − x e^x/(e^x − 1) = 1 − x/(1 − e^{−x})
                1.0 - x / (-(-x).exp_m1())
            }
            ProfileKind::InverseGap { radius } => -4.0 * r * r / ((radius - r) * (radius + r)),
            ProfileKind::CaseI { k, radius } => {
                let (s, q) = case_i_exponents(k);
                let rs = r.powf(s);
                2.0 - s + (q - 1.0) * s * rs / (radius.powf(s) - rs)
            }
            ProfileKind::Gaussian { e } => 2.0 * e * r * r,
        })
    }

    /// Infimum of [`curvature_gap`](Self::curvature_gap) over the domain;
    /// `-inf` when unbounded below.
    pub fn curvature_gap_inf(&self) -> f64 {
        match self.kind {
            ProfileKind::Power { beta } => 2.0 - beta,
            ProfileKind::RegularizedPower { beta, .. } => 2.0 - beta,
            ProfileKind::ExpSquare { .. } | ProfileKind::ExpLinearReg { .. } | ProfileKind::InverseGap { .. } => {
                f64::NEG_INFINITY
            }
            ProfileKind::CaseI { k, .. } => 2.0 - (k + 1.0) / k,
            ProfileKind::Gaussian { .. } => 0.0,
        }
    }

    /// `v(r1) − v(r0)` for `r0 <= r1`, integrated directly when the two
    /// values are close enough for subtraction to lose digits.
    pub fn increment(&self, r0: f64, r1: f64) -> Result<f64> {
        if let ProfileKind::RegularizedPower { beta, p, .. } = self.kind {
            self.check_domain(r0)?;
            self.check_domain(r1)?;
            let (x0, x1) = (r0.powf(beta), r1.powf(beta));
            if x0 > 0.0 && x1 < 4.0 * x0 {
                let q = integrate(|t: f64| 1.0 / (1.0 + t.powf(p)), x0, x1, 0.0, 1e-14);
                return Ok(q.value);
            }
        }
        Ok(self.value(r1)? - self.value(r0)?)
    }

    fn reg_table(&self, p: f64) -> &RegTable {
        self.table
            .as_ref()
            .expect("regularized power always carries a table")
            .get_or_init(|| RegTable::build(p))
    }
}

fn case_i_exponents(k: f64) -> (f64, f64) {
    ((k + 1.0) / k, k / (k - 1.0))
}

/// `e^x − 1 − x` without cancellation for small `x`.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for j in 3..20 {
            term *= x / j as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// Cumulative values of `∫₀^x (1 + τ^p)^{-1} dτ` on a geometric grid.
/// Below the first knot (where `x^p = 1/2`) the alternating series is used.
struct RegTable {
    p: f64,
    x0: f64,
    log_ratio: f64,
    knots: Vec<f64>,
    cum: Vec<f64>,
}

const TABLE_RATIO: f64 = 1.25;

impl RegTable {
    fn build(p: f64) -> Self {
        let x0 = 0.5f64.powf(1.0 / p);
        let f = |t: f64| 1.0 / (1.0 + t.powf(p));
        let mut knots = vec![x0];
        let mut cum = vec![reg_series(x0, p)];
        loop {
            let a = *knots.last().unwrap();
            let b = a * TABLE_RATIO;
            if !b.is_finite() || b > 1e300 {
                break;
            }
            let (piece, _) = gk21(&f, a, b);
            cum.push(cum.last().unwrap() + piece);
            knots.push(b);
        }
        Self {
            p,
            x0,
            log_ratio: TABLE_RATIO.ln(),
            knots,
            cum,
        }
    }

    fn value(&self, x: f64) -> f64 {
        if x <= self.x0 {
            return reg_series(x, self.p);
        }
        let last = self.knots.len() - 1;
        let mut i = (((x / self.x0).ln() / self.log_ratio).floor() as usize).min(last);
        while i > 0 && self.knots[i] > x {
            i -= 1;
        }
        while i < last && self.knots[i + 1] <= x {
            i += 1;
        }
        let f = |t: f64| 1.0 / (1.0 + t.powf(self.p));
        if x == self.knots[i] {
            return self.cum[i];
        }
        self.cum[i] + gk21(&f, self.knots[i], x).0
    }
}

/// `Σ_j (−1)^j x^{pj+1}/(pj+1)`, valid for `x^p < 1`.
fn reg_series(x: f64, p: f64) -> f64 {
    let y = x.powf(p);
    let mut pow = x;
    let mut sum = 0.0;
    for j in 0..200 {
        let term = pow / (p * j as f64 + 1.0);
        sum += if j % 2 == 0 { term } else { -term };
        pow *= y;
        if pow < 1e-18 * x {
            break;
        }
    }
    sum
}

/// One checked inequality `lhs <= rhs` at radius `r`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundRow {
    pub r: f64,
    pub quantity: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub rows: Vec<BoundRow>,
    pub violations: usize,
    /// Most negative normalized slack `(rhs − lhs)/max(1, |lhs|, |rhs|)`.
    pub worst_slack: f64,
}

pub const BOUNDS_REL_TOL: f64 = 1e-10;

/// Checks the growth, sandwich and derivative bounds of a regularized power
/// profile at the given radii. `k` is the homogeneity used in the
/// `v'^k / r` bound.
pub fn bounds_suite(profile: &RadialProfile, r_samples: &[f64], r_anchor: f64, k: f64) -> Result<BoundsReport> {
    let ProfileKind::RegularizedPower { beta, beta_bar, p } = profile.kind() else {
        return Err(Error::invalid("bounds suite applies to regularized power profiles only"));
    };
    if !(r_anchor > 1.0 && r_anchor.is_finite()) {
        return Err(Error::Domain {
            what: "anchor radius",
            value: r_anchor,
            domain: "(1, inf)".into(),
        });
    }
    if !(k >= 1.0) {
        return Err(Error::Domain {
            what: "homogeneity k",
            value: k,
            domain: "[1, inf)".into(),
        });
    }
    let gamma = k + 1.0;
    let mut rows = Vec::with_capacity(r_samples.len() * 6);
    let mut push = |r: f64, quantity: &'static str, lhs: f64, rhs: f64| {
        rows.push(BoundRow {
            r,
            quantity,
            lhs,
            rhs,
            slack: rhs - lhs,
        });
    };
    for &r in r_samples {
        let v = profile.value(r)?;
        let rb = r.powf(beta);
        let rbb = r.powf(beta_bar);
        let lower = if rb.is_infinite() {
            r.powf(beta - p * beta)
        } else {
            rb / (1.0 + r.powf(beta * p))
        };
        push(r, "growth_lower", lower, v);
        push(r, "growth_upper", v, rb.min(rbb / (1.0 - p)));

        let d1 = profile.d1(r)?;
        push(r, "d1_upper", d1, beta * r.powf(beta_bar - 1.0).min(r.powf(beta - 1.0)));

        let (lhs, rhs) = if r == 0.0 {
            (0.0, 0.0)
        } else {
            (
                d1.powf(k) / r,
                beta.powf(k) * r.powf(k * beta - gamma).min(r.powf(k * beta_bar - gamma)),
            )
        };
        push(r, "flux_upper", lhs, rhs);

        if r >= r_anchor {
            let ratio = if r <= r_anchor * (1.0 + 1e-9) {
                profile.d1(r_anchor)? / (beta_bar * r_anchor.powf(beta_bar - 1.0))
            } else {
                profile.increment(r_anchor, r)? / (rbb - r_anchor.powf(beta_bar))
            };
            push(r, "sandwich_lower", 1.0 / (2.0 * (1.0 - p)), ratio);
            push(r, "sandwich_upper", ratio, 1.0 / (1.0 - p));
        }
    }
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for row in &rows {
        let norm = row.slack / row.lhs.abs().max(row.rhs.abs()).max(1.0);
        if !(norm >= -BOUNDS_REL_TOL) {
            violations += 1;
        }
        worst = worst.min(norm);
    }
    Ok(BoundsReport {
        rows,
        violations,
        worst_slack: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regularized_closed_form_at_one() {
        let v = RadialProfile::regularized_power(2.0, 1.0).unwrap();
        let expected = 2.0 * (1.0 - 2f64.ln());
        assert!((v.value(1.0).unwrap() - expected).abs() < 1e-13);
        assert!((v.d1(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regularized_closed_form_far_out() {
        // p = 1/2, beta = 2: v(r) = 2(r − ln(1 + r))
        let v = RadialProfile::regularized_power(2.0, 1.0).unwrap();
        for &r in &[0.3, 0.9, 3.0, 47.0, 1e3, 1e6] {
            let expected = 2.0 * (r - (1.0f64 + r).ln());
            let got = v.value(r).unwrap();
            assert!(((got - expected) / expected).abs() < 1e-12, "r={r} got={got} expected={expected}");
        }
    }

    #[test]
    fn origin_values() {
        assert_eq!(RadialProfile::power(2.5).unwrap().value(0.0).unwrap(), 0.0);
        let e = RadialProfile::exp_linear_reg(1.0).unwrap();
        assert_eq!(e.value(0.0).unwrap(), 0.0);
        assert_eq!(e.d1(0.0).unwrap(), 0.0);
    }

    #[test]
    fn exp_linear_small_argument_is_accurate() {
        let e = RadialProfile::exp_linear_reg(1.0).unwrap();
        let x: f64 = 1e-5;
        let exact = x * x / 2.0 + x * x * x / 6.0 + x.powi(4) / 24.0;
        assert!(((e.value(x).unwrap() - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let g = RadialProfile::inverse_gap(2.0).unwrap();
        assert!(g.value(2.0).is_err());
        assert!(g.value(1.99).is_ok());
        let c = RadialProfile::case_i(3.0, 2.0).unwrap();
        assert_eq!(c.value(2.0).unwrap(), 0.0);
        assert!(c.value(2.1).is_err());
        assert!(RadialProfile::power(1.0).is_err());
        assert!(RadialProfile::regularized_power(2.0, 2.0).is_err());
        assert!(RadialProfile::power(2.0).unwrap().value(-1.0).is_err());
    }

    #[test]
    fn curvature_gap_matches_derivatives() {
        let profiles = [
            RadialProfile::power(2.0).unwrap(),
            RadialProfile::regularized_power(3.0, 1.5).unwrap(),
            RadialProfile::exp_square(0.3).unwrap(),
            RadialProfile::exp_linear_reg(0.7).unwrap(),
            RadialProfile::inverse_gap(5.0).unwrap(),
            RadialProfile::case_i(3.0, 5.0).unwrap(),
            RadialProfile::gaussian(0.2).unwrap(),
        ];
        for v in &profiles {
            for &r in &[0.1, 0.7, 2.0, 4.5] {
                let direct = 1.0 - r * v.d2(r).unwrap() / v.d1(r).unwrap();
                let closed = v.curvature_gap(r).unwrap();
                assert!((direct - closed).abs() < 1e-11 * (1.0 + closed.abs()), "{v:?} r={r}");
                assert!(closed >= v.curvature_gap_inf() - 1e-12);
            }
        }
    }

    #[test]
    fn case_i_flux_identity() {
        // |v'|^k / r = c_k v with c_k = ((k+1)/(k−1))^k
        let k = 3.0;
        let v = RadialProfile::case_i(k, 4.0).unwrap();
        let ck = ((k + 1.0) / (k - 1.0)).powf(k);
        for &r in &[0.2, 1.0, 3.9] {
            let lhs = v.d1(r).unwrap().abs().powf(k) / r;
            let rhs = ck * v.value(r).unwrap();
            assert!((lhs - rhs).abs() < 1e-10 * rhs);
        }
    }
}
