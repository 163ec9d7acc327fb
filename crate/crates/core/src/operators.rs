//! Degenerate elliptic operators `H(q, X)`, their rank-one spectral extremes
//! and randomized checks of monotonicity, homogeneity and nondegeneracy.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Real symmetric `n × n` matrix. Symmetry is exact: every constructor either
/// checks `X[i][j] == X[j][i]` bit for bit or fills the lower triangle from
/// the upper one.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Row-major entries; rejects anything not exactly symmetric.
    pub fn new(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "matrix entries" });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(n, n, entries),
        })
    }

    /// Builds from the upper triangle `f(i, j)` with `i <= j`.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut inner = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                inner[(i, j)] = v;
                inner[(j, i)] = v;
            }
        }
        Self { inner }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    /// `v ⊗ v`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_upper_fn(v.len(), |i, j| v[i] * v[j])
    }

    /// `c₀ I + c₁ e ⊗ e`, the shape every radial Hessian takes.
    pub fn identity_plus_rank_one(c0: f64, c1: f64, e: &[f64]) -> Self {
        Self::from_upper_fn(e.len(), |i, j| {
            let id = if i == j { c0 } else { 0.0 };
            id + c1 * e[i] * e[j]
        })
    }

    /// `self + c v ⊗ v`, symmetric by construction.
    pub fn add_rank_one(&self, c: f64, v: &[f64]) -> Self {
        Self::from_upper_fn(self.n(), |i, j| self.inner[(i, j)] + c * v[i] * v[j])
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self::from_upper_fn(self.n(), |i, j| self.inner[(i, j)] + other.inner[(i, j)])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_upper_fn(self.n(), |i, j| s * self.inner[(i, j)])
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// `qᵀ X q`.
    pub fn quad_form(&self, q: &[f64]) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.inner[(i, j)] * q[j];
            }
            s += q[i] * row;
        }
        s
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || self.inner[(i, j)] == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// Eigenvalues sorted in descending order.
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = if self.is_diagonal() {
            self.inner.diagonal().iter().copied().collect()
        } else {
            SymmetricEigen::new(self.inner.clone())
                .eigenvalues
                .iter()
                .copied()
                .collect()
        };
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

pub type Evaluator = Arc<dyn Fn(&[f64], &SymMatrix) -> f64 + Send + Sync>;

/// Operator families. `Custom` carries a user evaluator whose homogeneity
/// degree in `q` is declared by the caller.
#[derive(Clone)]
pub enum OperatorKind {
    /// `|q|^p (|q|² tr X − qᵀ X q)`.
    GradTraceMinusInfinity { p: f64 },
    /// `|q|^p (μ_m + … + μ_n)` with eigenvalues in descending order.
    TruncatedEigenSum { p: f64, m: usize },
    Custom { name: String, evaluator: Evaluator },
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::GradTraceMinusInfinity { p } => {
                f.debug_struct("GradTraceMinusInfinity").field("p", p).finish()
            }
            OperatorKind::TruncatedEigenSum { p, m } => f
                .debug_struct("TruncatedEigenSum")
                .field("p", p)
                .field("m", m)
                .finish(),
            OperatorKind::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

/// An operator together with its dimension and homogeneity degree `k1`.
/// The derived exponents are `k = k1 + 1` and `gamma = k + 1`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    kind: OperatorKind,
    n: usize,
    k1: f64,
}

impl OperatorSpec {
    pub fn grad_trace_minus_infinity(n: usize, p: f64) -> Result<Self> {
        check_dim(n)?;
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::invalid(format!("exponent p must be finite and >= 0, got {p}")));
        }
        Ok(Self {
            kind: OperatorKind::GradTraceMinusInfinity { p },
            n,
            k1: p + 2.0,
        })
    }

    pub fn truncated_eigen_sum(n: usize, p: f64, m: usize) -> Result<Self> {
        check_dim(n)?;
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::invalid(format!("exponent p must be finite and >= 0, got {p}")));
        }
        if m < 2 || m >= n {
            return Err(Error::invalid(format!(
                "truncation index must satisfy 2 <= m < n, got m = {m}, n = {n}"
            )));
        }
        Ok(Self {
            kind: OperatorKind::TruncatedEigenSum { p, m },
            n,
            k1: p,
        })
    }

    pub fn custom(
        n: usize,
        k1: f64,
        name: impl Into<String>,
        evaluator: impl Fn(&[f64], &SymMatrix) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(n)?;
        if !(k1 >= 0.0 && k1.is_finite()) {
            return Err(Error::invalid(format!("k1 must be finite and >= 0, got {k1}")));
        }
        Ok(Self {
            kind: OperatorKind::Custom {
                name: name.into(),
                evaluator: Arc::new(evaluator),
            },
            n,
            k1,
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k(&self) -> f64 {
        self.k1 + 1.0
    }

    pub fn gamma(&self) -> f64 {
        self.k1 + 2.0
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, OperatorKind::Custom { .. })
    }

    pub fn name(&self) -> String {
        match &self.kind {
            OperatorKind::GradTraceMinusInfinity { p } => format!("grad_trace_minus_infinity(p={p})"),
            OperatorKind::TruncatedEigenSum { p, m } => format!("truncated_eigen_sum(p={p},m={m})"),
            OperatorKind::Custom { name, .. } => name.clone(),
        }
    }

    /// `H(q, X)` with dimension and finiteness checks.
    pub fn eval_h(&self, q: &[f64], x: &SymMatrix) -> Result<f64> {
        if q.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: q.len(),
            });
        }
        if x.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.n(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "gradient" });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite { what: "matrix entries" });
        }
        Ok(self.eval_unchecked(q, x))
    }

    pub(crate) fn eval_unchecked(&self, q: &[f64], x: &SymMatrix) -> f64 {
        match &self.kind {
            OperatorKind::GradTraceMinusInfinity { p } => {
                let q2: f64 = q.iter().map(|v| v * v).sum();
                grad_power(q2, *p) * (q2 * x.trace() - x.quad_form(q))
            }
            OperatorKind::TruncatedEigenSum { p, m } => {
                let q2: f64 = q.iter().map(|v| v * v).sum();
                let ev = x.eigenvalues_desc();
                grad_power(q2, *p) * ev[m - 1..].iter().sum::<f64>()
            }
            OperatorKind::Custom { evaluator, .. } => evaluator(q, x),
        }
    }

    /// `H(e, c₀ I + c₁ e⊗e)` for a unit vector `e`; the radial reduction only
    /// ever needs this shape. Built-in operators are rotation invariant, so
    /// they are evaluated along the first axis where the matrix is diagonal.
    pub(crate) fn eval_radial_shape(&self, c0: f64, c1: f64) -> f64 {
        match &self.kind {
            OperatorKind::GradTraceMinusInfinity { .. } => {
                // |e|=1: tr X − eᵀXe = (n c₀ + c₁) − (c₀ + c₁)
                (self.n as f64 - 1.0) * c0
            }
            OperatorKind::TruncatedEigenSum { m, .. } => {
                let mut ev = vec![c0; self.n];
                ev[0] = c0 + c1;
                ev.sort_by(|a, b| b.total_cmp(a));
                ev[m - 1..].iter().sum()
            }
            OperatorKind::Custom { evaluator, .. } => {
                let mut e = vec![0.0; self.n];
                e[0] = 1.0;
                evaluator(&e, &SymMatrix::identity_plus_rank_one(c0, c1, &e))
            }
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("dimension must be >= 2, got {n}")));
    }
    Ok(())
}

/// `|q|^p` from `|q|²`, with `|0|^0 = 1`.
fn grad_power(q2: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 2.0 {
        q2
    } else {
        q2.powf(0.5 * p)
    }
}

/// Unit directions: the coordinate axes first, then points of the additive
/// recurrence `frac(i·φ_d^{-j})` mapped to the cube `[-1,1]^n` and normalized.
pub fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..n.min(count) {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        out.push(e);
    }
    // generalized golden ratio: unique positive root of x^{n+1} = x + 1
    let mut g = 2.0_f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (n as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=n).map(|j| (1.0 / g.powi(j as i32)).fract()).collect();
    let mut i = 1u64;
    while out.len() < count {
        let pt: Vec<f64> = alpha
            .iter()
            .map(|a| 2.0 * (0.5 + a * i as f64).fract() - 1.0)
            .collect();
        i += 1;
        let norm = pt.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-3 {
            out.push(pt.iter().map(|v| v / norm).collect());
        }
    }
    out
}

/// Sampled extremes at a single `λ`, plus the spread of each quantity across
/// the sampled directions (zero for rotation-invariant operators).
#[derive(Debug, Clone, Copy)]
pub struct LambdaSample {
    pub lambda: f64,
    pub min: f64,
    pub max: f64,
    pub min_spread: f64,
    pub max_spread: f64,
}

pub const DEFAULT_SPHERE_SAMPLES: usize = 64;

/// `(Λ_min(λ), Λ_max(λ))` where `Λ_min(λ) = min_e H(e, λe⊗e − I)` and
/// `Λ_max(λ) = max_e H(e, λe⊗e + I)` over sampled unit vectors.
pub fn lambda_extremes(op: &OperatorSpec, lambda: f64, sphere_samples: usize) -> Result<(f64, f64)> {
    let s = lambda_sample(op, lambda, &sphere_directions(op.n(), sphere_samples.max(1)))?;
    Ok((s.min, s.max))
}

pub fn lambda_sample(op: &OperatorSpec, lambda: f64, dirs: &[Vec<f64>]) -> Result<LambdaSample> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite { what: "lambda" });
    }
    let mut lo = (f64::INFINITY, f64::NEG_INFINITY);
    let mut hi = (f64::INFINITY, f64::NEG_INFINITY);
    for e in dirs {
        let minus = op.eval_h(e, &SymMatrix::identity_plus_rank_one(-1.0, lambda, e))?;
        let plus = op.eval_h(e, &SymMatrix::identity_plus_rank_one(1.0, lambda, e))?;
        lo = (lo.0.min(minus), lo.1.max(minus));
        hi = (hi.0.min(plus), hi.1.max(plus));
    }
    Ok(LambdaSample {
        lambda,
        min: lo.0,
        max: hi.1,
        min_spread: lo.1 - lo.0,
        max_spread: hi.1 - hi.0,
    })
}

/// A spectral bound that is either a finite number or declared infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralBound {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl SpectralBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            SpectralBound::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for SpectralBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralBound::Finite(v) => write!(f, "{v}"),
            SpectralBound::PosInfinity => write!(f, "+inf"),
            SpectralBound::NegInfinity => write!(f, "-inf"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub samples: Vec<LambdaSample>,
    pub lambda_sup: SpectralBound,
    pub lambda_inf: SpectralBound,
    pub upper_tail_slope: f64,
    pub lower_tail_slope: f64,
    pub sphere_samples: usize,
    /// Adjacent grid pairs where Λ_min or Λ_max decreases beyond tolerance;
    /// any entry means monotonicity in the matrix argument fails.
    pub monotonicity_violations: usize,
    pub max_direction_spread: f64,
}

pub const TAIL_SLOPE_THRESHOLD: f64 = 1e-6;

pub fn estimate_lambda_sup_inf(op: &OperatorSpec, lambda_range: (f64, f64), steps: usize) -> Result<SpectralReport> {
    estimate_lambda_sup_inf_with(op, lambda_range, steps, DEFAULT_SPHERE_SAMPLES)
}

/// Sweeps `λ` linearly over the range and classifies each tail by its slope
/// over the last decade (`[hi/10, hi]` and `[lo, lo/10]` when the range
/// straddles zero, otherwise the outer tenth of the grid).
pub fn estimate_lambda_sup_inf_with(
    op: &OperatorSpec,
    (lo, hi): (f64, f64),
    steps: usize,
    sphere_samples: usize,
) -> Result<SpectralReport> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("lambda range must be finite with lo < hi, got ({lo}, {hi})")));
    }
    if steps < 2 {
        return Err(Error::invalid("lambda sweep needs at least 2 steps"));
    }
    let dirs = sphere_directions(op.n(), sphere_samples.max(1));
    let samples = (0..steps)
        .map(|i| {
            let lambda = if i + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            };
            lambda_sample(op, lambda, &dirs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut violations = 0;
    for w in samples.windows(2) {
        let tol_min = 1e-9 * (1.0 + w[0].min.abs());
        let tol_max = 1e-9 * (1.0 + w[0].max.abs());
        if w[1].min < w[0].min - tol_min || w[1].max < w[0].max - tol_max {
            violations += 1;
        }
    }

    let tail = (steps / 10).max(1);
    let upper_start = if hi > 0.0 && lo < hi / 10.0 {
        samples.iter().position(|s| s.lambda >= hi / 10.0).unwrap_or(steps - 1 - tail)
    } else {
        steps - 1 - tail
    };
    let lower_end = if lo < 0.0 && hi > lo / 10.0 {
        samples.iter().rposition(|s| s.lambda <= lo / 10.0).unwrap_or(tail)
    } else {
        tail
    };
    let last = &samples[steps - 1];
    let first = &samples[0];
    let a = &samples[upper_start.min(steps - 2)];
    let b = &samples[lower_end.max(1)];
    let upper_tail_slope = (last.max - a.max) / (last.lambda - a.lambda);
    let lower_tail_slope = (b.min - first.min) / (b.lambda - first.lambda);

    let lambda_sup = if upper_tail_slope.abs() < TAIL_SLOPE_THRESHOLD {
        SpectralBound::Finite(last.max)
    } else {
        SpectralBound::PosInfinity
    };
    let lambda_inf = if lower_tail_slope.abs() < TAIL_SLOPE_THRESHOLD {
        SpectralBound::Finite(first.min)
    } else {
        SpectralBound::NegInfinity
    };
    let max_direction_spread = samples
        .iter()
        .map(|s| s.min_spread.max(s.max_spread))
        .fold(0.0, f64::max);
    Ok(SpectralReport {
        samples,
        lambda_sup,
        lambda_inf,
        upper_tail_slope,
        lower_tail_slope,
        sphere_samples: dirs.len(),
        monotonicity_violations: violations,
        max_direction_spread,
    })
}

/// Worst observed violation of one condition; `passed` iff no trial exceeded
/// its tolerance.
#[derive(Debug, Clone, Copy)]
pub struct ConditionOutcome {
    pub trials: usize,
    pub violations: usize,
    pub worst: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ConditionReport {
    /// Degenerate ellipticity: `H(q, X) <= H(q, X + P)` for `P ⪰ 0`.
    pub monotonicity: ConditionOutcome,
    /// `H(θq, X) = |θ|^{k1} H(q, X)` and `H(q, θX) = θ H(q, X)` for `θ > 0`.
    pub homogeneity: ConditionOutcome,
    /// `max_e H(e, −I) < 0 < min_e H(e, I)`.
    pub nondegeneracy: ConditionOutcome,
    pub max_at_minus_identity: f64,
    pub min_at_identity: f64,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.monotonicity.passed && self.homogeneity.passed && self.nondegeneracy.passed
    }
}

struct Tally {
    trials: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self {
            trials: 0,
            violations: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// `excess > 0` counts as a violation.
    fn record(&mut self, excess: f64) {
        self.trials += 1;
        if excess.is_nan() || excess > 0.0 {
            self.violations += 1;
        }
        if excess.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(excess);
        }
    }

    fn finish(self) -> ConditionOutcome {
        ConditionOutcome {
            trials: self.trials,
            violations: self.violations,
            worst: self.worst,
            passed: self.violations == 0,
        }
    }
}

pub const CONDITION_REL_TOL: f64 = 1e-9;

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    SymMatrix::from_upper_fn(n, |_, _| scale * rng.random_range(-1.0..1.0))
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    let b: Vec<Vec<f64>> = (0..n).map(|_| random_vec(rng, n, scale)).collect();
    // B Bᵀ, optionally of reduced rank
    let rank = rng.random_range(1..=n);
    SymMatrix::from_upper_fn(n, |i, j| (0..rank).map(|l| b[i][l] * b[j][l]).sum())
}

/// Magnitude scale of the terms making up `H(q, X)`, used to turn absolute
/// rounding into a relative tolerance when `H` itself cancels to near zero.
fn term_scale(op: &OperatorSpec, q: &[f64], x: &SymMatrix) -> f64 {
    let q2: f64 = q.iter().map(|v| v * v).sum();
    q2.sqrt().powf(op.k1()).max(if op.k1() == 0.0 { 1.0 } else { 0.0 }) * op.n() as f64 * x.frobenius_norm()
}

/// Randomized check of the three structural conditions with a seeded stream.
pub fn check_conditions(op: &OperatorSpec, trials: usize, seed: u64) -> Result<ConditionReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let n = op.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mono = Tally::new();
    let mut homog = Tally::new();
    for _ in 0..trials {
        let qs = 10f64.powf(rng.random_range(-1.0..1.0));
        let xs = 10f64.powf(rng.random_range(-1.0..1.0));
        let q = random_vec(&mut rng, n, qs);
        let x = random_sym(&mut rng, n, xs);
        let p = random_psd(&mut rng, n, xs);
        let h = op.eval_h(&q, &x)?;
        let xp = x.add(&p);
        let hp = op.eval_h(&q, &xp)?;
        let scale = term_scale(op, &q, &x).max(term_scale(op, &q, &xp));
        mono.record((h - hp) / (1.0 + scale) - CONDITION_REL_TOL);

        let mut theta = 0.0;
        while theta == 0.0 {
            theta = rng.random_range(-10.0..10.0);
        }
        let tq: Vec<f64> = q.iter().map(|v| theta * v).collect();
        let factor = theta.abs().powf(op.k1());
        let ht = op.eval_h(&tq, &x)?;
        let denom = factor * (h.abs() + CONDITION_REL_TOL * term_scale(op, &q, &x)) + f64::MIN_POSITIVE;
        homog.record((ht - factor * h).abs() / denom - CONDITION_REL_TOL);

        let pos = theta.abs();
        let hx = op.eval_h(&q, &x.scale(pos))?;
        let denom = pos * (h.abs() + CONDITION_REL_TOL * term_scale(op, &q, &x)) + f64::MIN_POSITIVE;
        homog.record((hx - pos * h).abs() / denom - CONDITION_REL_TOL);
    }

    let mut nondeg = Tally::new();
    let id = SymMatrix::identity(n);
    let minus_id = id.scale(-1.0);
    let mut max_minus = f64::NEG_INFINITY;
    let mut min_plus = f64::INFINITY;
    for e in sphere_directions(n, trials.clamp(n, 512)) {
        max_minus = max_minus.max(op.eval_h(&e, &minus_id)?);
        min_plus = min_plus.min(op.eval_h(&e, &id)?);
    }
    nondeg.record(max_minus);
    nondeg.record(-min_plus);

    Ok(ConditionReport {
        monotonicity: mono.finish(),
        homogeneity: homog.finish(),
        nondegeneracy: nondeg.finish(),
        max_at_minus_identity: max_minus,
        min_at_identity: min_plus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(n: usize) -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        e
    }

    #[test]
    fn symmetric_constructor_rejects_asymmetry() {
        assert!(matches!(
            SymMatrix::new(2, &[1.0, 2.0, 2.0000001, 1.0]),
            Err(Error::NotSymmetric { row: 0, col: 1 })
        ));
        assert!(SymMatrix::new(2, &[1.0, 2.0, 2.0, 1.0]).is_ok());
        assert!(SymMatrix::new(2, &[1.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn grad_trace_identity_value() {
        let op = OperatorSpec::grad_trace_minus_infinity(3, 0.0).unwrap();
        assert_eq!(op.eval_h(&e1(3), &SymMatrix::identity(3)).unwrap(), 2.0);
        assert_eq!(op.k(), 3.0);
        assert_eq!(op.gamma(), 4.0);
    }

    #[test]
    fn truncated_sum_diag() {
        let op = OperatorSpec::truncated_eigen_sum(3, 0.0, 2).unwrap();
        let x = SymMatrix::diagonal(&[1.0, 3.0, 2.0]);
        assert_eq!(op.eval_h(&e1(3), &x).unwrap(), 3.0);
    }

    #[test]
    fn truncated_sum_requires_valid_m() {
        assert!(OperatorSpec::truncated_eigen_sum(2, 0.0, 2).is_err());
        assert!(OperatorSpec::truncated_eigen_sum(3, 0.0, 1).is_err());
        assert!(OperatorSpec::truncated_eigen_sum(3, 0.0, 3).is_err());
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let ops = [
            OperatorSpec::grad_trace_minus_infinity(3, 1.5).unwrap(),
            OperatorSpec::truncated_eigen_sum(4, 0.0, 2).unwrap(),
        ];
        for op in &ops {
            let q = vec![0.3; op.n()];
            assert_eq!(op.eval_h(&q, &SymMatrix::zeros(op.n())).unwrap(), 0.0);
        }
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let op = OperatorSpec::grad_trace_minus_infinity(3, 0.0).unwrap();
        assert!(matches!(
            op.eval_h(&[1.0, 0.0], &SymMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            op.eval_h(&[f64::NAN, 0.0, 0.0], &SymMatrix::identity(3)),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn radial_shape_matches_full_evaluation() {
        let ops = [
            OperatorSpec::grad_trace_minus_infinity(3, 0.0).unwrap(),
            OperatorSpec::truncated_eigen_sum(4, 0.0, 2).unwrap(),
            OperatorSpec::truncated_eigen_sum(4, 0.0, 3).unwrap(),
        ];
        for op in &ops {
            for &(c0, c1) in &[(1.0, 2.5), (-1.0, 0.3), (1.0, -7.0), (-1.0, -2.0), (0.2, 0.0)] {
                let full = op
                    .eval_h(&e1(op.n()), &SymMatrix::identity_plus_rank_one(c0, c1, &e1(op.n())))
                    .unwrap();
                assert!((full - op.eval_radial_shape(c0, c1)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_directions_are_unit() {
        let d = sphere_directions(4, 100);
        assert_eq!(d.len(), 100);
        assert_eq!(d[2], vec![0.0, 0.0, 1.0, 0.0]);
        for e in &d {
            let n: f64 = e.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_operator_has_infinite_sup() {
        let op = OperatorSpec::custom(3, 0.0, "trace", |_, x| x.trace()).unwrap();
        let rep = estimate_lambda_sup_inf(&op, (-1e3, 1e3), 201).unwrap();
        assert_eq!(rep.lambda_sup, SpectralBound::PosInfinity);
        assert_eq!(rep.lambda_inf, SpectralBound::NegInfinity);
    }

    #[test]
    fn reversed_operator_fails_monotonicity() {
        let op = OperatorSpec::custom(3, 0.0, "neg_trace", |_, x| -x.trace()).unwrap();
        let rep = check_conditions(&op, 200, 7).unwrap();
        assert!(!rep.monotonicity.passed);
        assert!(!rep.nondegeneracy.passed);
        assert!(rep.homogeneity.passed);
    }
}
