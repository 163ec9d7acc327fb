//! Explicit monotone finite differences for radially symmetric solutions of
//! `u_t = H(Du, D²u + Z(u) Du⊗Du) + χ(t)|Du|^σ` on `B_R × (0, T)`, with
//! experiments that replay the comparison arguments numerically.
//!
//! The radial update at node `r_i` uses central `u_r`, `u_rr`, and the
//! tangential curvature `u_r/r`, plus a Lax-Friedrichs viscosity
//! `θ (D⁺u − D⁻u)/2` with a per-node `θ` bounding `|∂H/∂u_r|`. The `|u_r|^σ` term is
//! upwinded (Godunov) according to the sign of `χ`. Under the step bound
//! every update is nondecreasing in each nodal value, so the scheme preserves
//! order.

use std::sync::Arc;

use rayon::prelude::*;

use crate::barrier_factory::a_limit_table;
use crate::error::{Error, Result};
use crate::operators::{OperatorKind, OperatorSpec, SymMatrix};
use crate::params::{ChiProfile, ProblemParams};

pub type Lateral = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Everything the scheme needs besides the grid: the equation, `χ(t)`, and
/// the Dirichlet data on `r = R`.
#[derive(Clone)]
pub struct Dynamics {
    pub params: ProblemParams,
    pub chi: ChiProfile,
    pub lateral: Lateral,
}

impl Dynamics {
    pub fn new(params: ProblemParams, chi: ChiProfile, lateral: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            params,
            chi,
            lateral: Arc::new(lateral),
        }
    }
}

/// Nodal values on `r_i = i h`, `i = 0..=N`, `h = R/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGridField {
    pub radius: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub t: f64,
    pub steps: usize,
}

impl RadialGridField {
    pub fn new(radius: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain {
                what: "domain radius",
                value: radius,
                domain: "(0, inf)".into(),
            });
        }
        if intervals < 2 {
            return Err(Error::invalid(format!("need at least 2 radial intervals, got {intervals}")));
        }
        let h = radius / intervals as f64;
        let values: Vec<f64> = (0..=intervals).map(|i| f(i as f64 * h)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "initial data" });
        }
        Ok(Self {
            radius,
            h,
            values,
            t: 0.0,
            steps: 0,
        })
    }

    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn r(&self, i: usize) -> f64 {
        if i == self.intervals() {
            self.radius
        } else {
            i as f64 * self.h
        }
    }

    /// Piecewise-linear interpolation, clamped to `[0, R]`.
    pub fn interpolate(&self, r: f64) -> f64 {
        let x = (r / self.h).clamp(0.0, self.intervals() as f64);
        let i = (x.floor() as usize).min(self.intervals() - 1);
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Largest value on nodes with `r <= r_max`.
    pub fn sup_within(&self, r_max: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.r(*i) <= r_max + 1e-12)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub h: f64,
    /// Fixed step; `None` picks `cfl_safety / Lip` each step.
    pub dt: Option<f64>,
    pub cfl_safety: f64,
    pub t_end: f64,
}

impl SchemeConfig {
    pub fn new(h: f64, t_end: f64) -> Self {
        Self {
            h,
            dt: None,
            cfl_safety: 0.9,
            t_end,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::config("h", format!("must be positive, got {}", self.h)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(Error::config("cfl_safety", format!("must lie in (0, 1), got {}", self.cfl_safety)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("dt", format!("must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// Step size and viscosity shared by every field advanced together.
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    pub theta: Vec<f64>,
    /// Largest stable step for this state.
    pub limit: f64,
}

/// `H(q e, diag(s, μ, …, μ))` with `e` the first axis.
fn radial_operator(op: &OperatorSpec, q: f64, s: f64, mu: f64) -> f64 {
    match op.kind() {
        OperatorKind::Custom { .. } => {
            let n = op.n();
            let mut grad = vec![0.0; n];
            grad[0] = q;
            let mut diag = vec![mu; n];
            diag[0] = s;
            op.eval_unchecked(&grad, &SymMatrix::diagonal(&diag))
        }
        _ => {
            let k1 = op.k1();
            let factor = if k1 == 0.0 { 1.0 } else { q.abs().powf(k1) };
            if factor == 0.0 {
                0.0
            } else {
                factor * op.eval_radial_shape(mu, s - mu)
            }
        }
    }
}

/// Godunov flux for `χ |q|^σ` from one-sided slopes `a = D⁻u`, `b = D⁺u`.
fn forcing_flux(chi: f64, sigma: f64, a: f64, b: f64) -> f64 {
    if sigma == 0.0 {
        return chi;
    }
    let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
    let straddles = a.min(b) <= 0.0 && a.max(b) >= 0.0;
    let mag = match (chi >= 0.0, a <= b) {
        (true, true) | (false, false) => hi,
        _ if straddles => 0.0,
        _ => lo,
    };
    chi * mag.powf(sigma)
}

fn forcing_lip(chi: f64, sigma: f64, a: f64, b: f64) -> f64 {
    if sigma == 0.0 || chi == 0.0 {
        return 0.0;
    }
    let m = a.abs().max(b.abs());
    if sigma >= 1.0 {
        2.0 * sigma * chi.abs() * m.powf(sigma - 1.0)
    } else {
        // not Lipschitz at q = 0; bound on slopes at least one cell apart
        2.0 * sigma * chi.abs() * m.max(1e-3).powf(sigma - 1.0)
    }
}

/// Central-difference quantities at node `i`.
struct Stencil {
    a: f64,
    b: f64,
    q: f64,
    s: f64,
}

fn stencil(u: &[f64], h: f64, i: usize) -> Stencil {
    if i == 0 {
        // symmetric ghost u_{-1} = u_1; the slope is the one-sided D⁺u so
        // that a kink at the center feels its neighbors
        let b = (u[1] - u[0]) / h;
        Stencil {
            a: -b,
            b,
            q: b,
            s: 2.0 * b / h,
        }
    } else {
        let a = (u[i] - u[i - 1]) / h;
        let b = (u[i + 1] - u[i]) / h;
        Stencil {
            a,
            b,
            q: 0.5 * (a + b),
            s: (b - a) / h,
        }
    }
}

/// Operator part at a node as a function of the slope `q` and curvature `s`.
fn node_operator(op: &OperatorSpec, zu: f64, r: f64, q: f64, s: f64) -> f64 {
    if r == 0.0 {
        // at the center D²u = u_rr I, exact for quadratics
        radial_operator(op, q, s + zu * q * q, s)
    } else {
        radial_operator(op, q, s + zu * q * q, q / r)
    }
}

fn diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let d = 1e-6 * (1.0 + x.abs());
    (f(x + d) - f(x - d)) / (2.0 * d)
}

/// Per-node viscosity `θ_i` and the largest stable step for the given
/// fields, which must share a grid. Fields advanced together use one control
/// so that the update map is the same for all of them.
pub fn plan_step(dynamics: &Dynamics, fields: &[&RadialGridField], cfl_safety: f64) -> Result<StepControl> {
    let op = &dynamics.params.op;
    let z = &dynamics.params.z;
    let sigma = dynamics.params.sigma;
    let first = fields.first().ok_or_else(|| Error::invalid("plan_step needs at least one field"))?;
    let nodes = first.values.len();
    if fields.iter().any(|f| f.values.len() != nodes || f.h != first.h) {
        return Err(Error::invalid("fields live on different grids"));
    }
    let mut theta = vec![0.0f64; nodes];
    // center rate as a function of b = D⁺u
    let center = |zu: f64, h: f64, b: f64| node_operator(op, zu, 0.0, b, 2.0 * b / h);
    for field in fields {
        let u = &field.values;
        let st = stencil(u, field.h, 0);
        let zu = z.eval(u[0])?;
        let slope = diff(|x| center(zu, field.h, x), st.b);
        // the center needs viscosity only where its rate decreases in u_1
        theta[0] = theta[0].max(-slope);
        for i in 1..field.intervals() {
            let st = stencil(u, field.h, i);
            let zu = z.eval(u[i])?;
            let r = field.r(i);
            // central differences stay monotone while the diffusion 2Ĥ_s/h
            // covers the drift; only the excess needs viscosity. Sampled
            // derivatives are not a supremum over the slope interval, hence
            // the factor on the drift.
            for q in [st.a, st.q, st.b] {
                let drift = diff(|x| node_operator(op, zu, r, x, st.s), q).abs();
                let diffusion = diff(|x| node_operator(op, zu, r, q, x), st.s).max(0.0);
                theta[i] = theta[i].max(1.5 * drift - 2.0 * diffusion / field.h);
            }
        }
    }
    theta[0] *= 1.5;
    let mut lip: f64 = 0.0;
    for field in fields {
        let u = &field.values;
        let h = field.h;
        let chi = dynamics.chi.eval(field.t).abs().max(dynamics.chi.sup_abs(dynamics.params.horizon));
        for i in 0..field.intervals() {
            let st = stencil(u, h, i);
            let zu = z.eval(u[i])?;
            let r = field.r(i);
            let d_s = diff(|x| node_operator(op, zu, r, st.q, x), st.s).abs();
            let d_u = if st.q == 0.0 || z.is_identically_zero() {
                0.0
            } else {
                let dz = diff(|x| z.eval_unchecked(x), u[i]).abs();
                d_s * dz * st.q * st.q
            };
            let spread = if i == 0 {
                diff(|x| center(zu, h, x), st.b).abs() / h
            } else {
                2.0 * d_s / (h * h)
            };
            let local = spread + theta[i] / h + forcing_lip(chi, sigma, st.a, st.b) / h + d_u;
            if !local.is_finite() {
                return Err(Error::Blowup { step: field.steps });
            }
            lip = lip.max(local);
        }
    }
    let limit = if lip > 0.0 { cfl_safety / lip } else { f64::INFINITY };
    Ok(StepControl {
        dt: limit,
        theta,
        limit,
    })
}

/// One explicit Euler step with the given control.
pub fn step_with(field: &RadialGridField, dynamics: &Dynamics, control: &StepControl) -> Result<RadialGridField> {
    let op = &dynamics.params.op;
    let z = &dynamics.params.z;
    let sigma = dynamics.params.sigma;
    let chi = dynamics.chi.eval(field.t);
    let u = &field.values;
    let h = field.h;
    let n = field.intervals();
    let dt = control.dt;
    let mut next = Vec::with_capacity(n + 1);
    for i in 0..n {
        let st = stencil(u, h, i);
        let zu = z.eval(u[i])?;
        let rate = node_operator(op, zu, field.r(i), st.q, st.s)
            + 0.5 * control.theta[i] * (st.b - st.a)
            + forcing_flux(chi, sigma, st.a, st.b);
        next.push(u[i] + dt * rate);
    }
    let t = field.t + dt;
    next.push((dynamics.lateral)(t));
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Blowup { step: field.steps + 1 });
    }
    Ok(RadialGridField {
        radius: field.radius,
        h,
        values: next,
        t,
        steps: field.steps + 1,
    })
}

/// One step under `config`; a fixed `dt` above the stability limit is an
/// error, otherwise the step is sized to land on `t_end`.
pub fn step(field: &RadialGridField, dynamics: &Dynamics, config: &SchemeConfig) -> Result<RadialGridField> {
    config.validate()?;
    if (field.h - config.h).abs() > 1e-12 * config.h {
        return Err(Error::config("h", format!("field has h = {}, config has {}", field.h, config.h)));
    }
    let remaining = config.t_end - field.t;
    if remaining <= 0.0 {
        return Err(Error::invalid(format!("field time {} already at t_end {}", field.t, config.t_end)));
    }
    let mut control = plan_step(dynamics, &[field], config.cfl_safety)?;
    match config.dt {
        Some(dt) if dt > control.limit / config.cfl_safety => {
            return Err(Error::Cfl {
                dt,
                limit: control.limit / config.cfl_safety,
            })
        }
        Some(dt) => control.dt = dt.min(remaining),
        None => control.dt = control.limit.min(remaining),
    }
    step_with(field, dynamics, &control)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<RadialGridField>,
}

impl Trajectory {
    pub fn last(&self) -> &RadialGridField {
        self.snapshots.last().expect("trajectory holds the initial field")
    }

    /// Rows `(t, r, u)` of every stored snapshot.
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        self.snapshots
            .iter()
            .flat_map(|f| f.values.iter().enumerate().map(move |(i, u)| (f.t, f.r(i), *u)))
            .collect()
    }
}

/// Runs to `t_end`, storing every `stride`-th step plus the last one.
pub fn run(initial: &RadialGridField, dynamics: &Dynamics, config: &SchemeConfig, stride: usize) -> Result<Trajectory> {
    let stride = stride.max(1);
    let mut snapshots = vec![initial.clone()];
    let mut field = initial.clone();
    while config.t_end - field.t > 1e-14 * config.t_end {
        field = step(&field, dynamics, config)?;
        if field.steps % stride == 0 {
            snapshots.push(field.clone());
        }
    }
    if snapshots.last().map(|f| f.steps) != Some(field.steps) {
        snapshots.push(field);
    }
    Ok(Trajectory { snapshots })
}

#[derive(Debug, Clone)]
pub struct OrderReport {
    pub steps: usize,
    /// Node-time pairs with `u > v`.
    pub violations: usize,
    /// Largest `u − v` seen.
    pub worst_gap: f64,
    pub worst_at: (f64, f64),
}

/// Advances two fields with a common step and viscosity and counts steps
/// where the order `u <= v` breaks.
pub fn run_ordered_pair(
    u0: &RadialGridField,
    v0: &RadialGridField,
    dynamics: &Dynamics,
    config: &SchemeConfig,
) -> Result<OrderReport> {
    config.validate()?;
    if u0.values.len() != v0.values.len() || u0.h != v0.h {
        return Err(Error::invalid("fields live on different grids"));
    }
    let (mut u, mut v) = (u0.clone(), v0.clone());
    let mut report = OrderReport {
        steps: 0,
        violations: 0,
        worst_gap: f64::NEG_INFINITY,
        worst_at: (0.0, 0.0),
    };
    let tally = |u: &RadialGridField, v: &RadialGridField, report: &mut OrderReport| {
        for i in 0..u.values.len() {
            let gap = u.values[i] - v.values[i];
            if gap > 0.0 {
                report.violations += 1;
            }
            if gap > report.worst_gap {
                report.worst_gap = gap;
                report.worst_at = (u.r(i), u.t);
            }
        }
    };
    tally(&u, &v, &mut report);
    while config.t_end - u.t > 1e-14 * config.t_end {
        let mut control = plan_step(dynamics, &[&u, &v], config.cfl_safety)?;
        control.dt = control.limit.min(config.t_end - u.t);
        u = step_with(&u, dynamics, &control)?;
        v = step_with(&v, dynamics, &control)?;
        report.steps += 1;
        tally(&u, &v, &mut report);
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// `u <= W` holds on the parabolic boundary (`t = 0` or `r = R`).
    pub boundary_ok: bool,
    pub boundary_violations: usize,
    /// Interior points with `u > W + tol`.
    pub violations: usize,
    pub worst_excess: f64,
    pub worst_at: (f64, f64),
    pub checked: usize,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.boundary_ok && self.violations == 0
    }
}

/// Checks `u <= W + tol` over a trajectory, with `W(r, t)` a candidate
/// super-solution.
pub fn check_comparison(traj: &Trajectory, barrier: impl Fn(f64, f64) -> f64, tol: f64) -> ComparisonReport {
    let mut rep = ComparisonReport {
        boundary_ok: true,
        boundary_violations: 0,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_at: (0.0, 0.0),
        checked: 0,
    };
    for (j, f) in traj.snapshots.iter().enumerate() {
        let n = f.intervals();
        for (i, u) in f.values.iter().enumerate() {
            let r = f.r(i);
            let excess = u - barrier(r, f.t);
            rep.checked += 1;
            if j == 0 || i == n {
                if excess > tol {
                    rep.boundary_violations += 1;
                    rep.boundary_ok = false;
                }
                continue;
            }
            if excess > rep.worst_excess {
                rep.worst_excess = excess;
                rep.worst_at = (r, f.t);
            }
            if excess > tol {
                rep.violations += 1;
            }
        }
    }
    rep
}

#[derive(Debug, Clone)]
pub struct RefinementReport {
    /// `(h, max |u_h − u_{h/2}|)` on the coarse nodes at `t_end`.
    pub levels: Vec<(f64, f64)>,
    pub orders: Vec<f64>,
}

impl RefinementReport {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Self-convergence in the max norm over `r <= measure_radius` on grids
/// with `intervals · 2^l` cells. Degenerate operators form a layer at the
/// lateral boundary when the data there are incompatible, so the measured
/// region should stay clear of it.
pub fn refinement_study(
    initial: impl Fn(f64) -> f64 + Sync,
    dynamics: &Dynamics,
    radius: f64,
    measure_radius: f64,
    t_end: f64,
    intervals: usize,
    levels: usize,
    cfl_safety: f64,
) -> Result<RefinementReport> {
    if levels < 3 {
        return Err(Error::invalid("refinement needs at least 3 levels"));
    }
    let finals: Vec<RadialGridField> = (0..levels)
        .into_par_iter()
        .map(|l| {
            let field = RadialGridField::new(radius, intervals << l, &initial)?;
            let mut config = SchemeConfig::new(field.h, t_end);
            config.cfl_safety = cfl_safety;
            Ok(run(&field, dynamics, &config, usize::MAX)?.last().clone())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for l in 0..levels - 1 {
        let (c, f) = (&finals[l], &finals[l + 1]);
        let d = (0..=c.intervals())
            .filter(|&i| c.r(i) <= measure_radius)
            .map(|i| (c.values[i] - f.values[2 * i]).abs())
            .fold(0.0, f64::max);
        out.push((c.h, d));
    }
    let orders = out.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
    Ok(RefinementReport { levels: out, orders })
}

#[derive(Debug, Clone, Copy)]
pub struct PlSettings {
    /// Upper bound of the initial data.
    pub nu: f64,
    /// Boundary data reach full size at `ramp_fraction · T`.
    pub ramp_fraction: f64,
    pub h: f64,
    pub cfl_safety: f64,
    /// The "center value" is the supremum over `r <= probe_radius`.
    pub probe_radius: f64,
    /// Store every `stride`-th step in the trajectory rows.
    pub stride: usize,
    /// Fixed time step; `None` picks one from the CFL estimate.
    pub dt: Option<f64>,
}

impl Default for PlSettings {
    fn default() -> Self {
        Self {
            nu: 1.0,
            ramp_fraction: 1.0,
            h: 0.05,
            cfl_safety: 0.9,
            probe_radius: 1.0,
            stride: 200,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PlRow {
    #[serde(rename = "R")]
    pub radius: f64,
    pub sup_center: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct PlReport {
    pub growth_beta: f64,
    pub rows: Vec<PlRow>,
    pub trajectories: Vec<(f64, Trajectory)>,
}

impl PlReport {
    /// Margins in increasing-`R` order never go up.
    pub fn margin_nonincreasing(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.radius.total_cmp(&b.radius));
        rows.windows(2).all(|w| w[1].margin <= w[0].margin)
    }
}

/// Initial data `ν (1 + cos r)/2 <= ν`, lateral data rising linearly from
/// the initial value to `R^β / log(1 + R)` at `ramp_fraction · T`, `χ ≡ α`.
/// Boundary growth stands in for solution growth; the growth condition constrains the
/// latter.
pub fn pl_experiment(
    params: &ProblemParams,
    growth_beta: f64,
    radii: &[f64],
    settings: &PlSettings,
) -> Result<PlReport> {
    if !(settings.ramp_fraction > 0.0) || !(settings.probe_radius > 0.0) {
        return Err(Error::invalid("ramp_fraction and probe_radius must be positive"));
    }
    let horizon = params.horizon;
    let bound = settings.nu + a_limit_table(params)? * horizon;
    let results: Vec<(PlRow, Trajectory)> = radii
        .par_iter()
        .map(|&radius| {
            let nu = settings.nu;
            let init = move |r: f64| 0.5 * nu * (1.0 + r.cos());
            let start = init(radius);
            let target = radius.powf(growth_beta) / (1.0 + radius).ln();
            let ramp = settings.ramp_fraction * horizon;
            let dynamics = Dynamics::new(params.clone(), ChiProfile::Const(params.alpha), move |t| {
                start + (target - start) * (t / ramp).min(1.0)
            });
            let intervals = (radius / settings.h).round().max(2.0) as usize;
            let field = RadialGridField::new(radius, intervals, init)?;
            let mut config = SchemeConfig::new(field.h, horizon);
            config.cfl_safety = settings.cfl_safety;
            config.dt = settings.dt;
            let traj = run(&field, &dynamics, &config, settings.stride)?;
            let sup_center = traj.last().sup_within(settings.probe_radius);
            Ok((
                PlRow {
                    radius,
                    sup_center,
                    bound,
                    margin: sup_center - bound,
                },
                traj,
            ))
        })
        .collect::<Result<_>>()?;
    let (rows, trajectories) = results
        .into_iter()
        .map(|(row, traj)| (row, (row.radius, traj)))
        .unzip();
    Ok(PlReport {
        growth_beta,
        rows,
        trajectories,
    })
}

/// Largest value over the parabolic boundary plus the accumulated forcing
/// `∫ sup χ⁺`; bounds a `σ = 0` solution from above.
pub fn max_principle_bound(traj: &Trajectory, chi: &ChiProfile) -> f64 {
    let first = &traj.snapshots[0];
    let mut m = first.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for f in &traj.snapshots {
        m = m.max(*f.values.last().unwrap());
    }
    let t = traj.last().t;
    m + t * chi.range(t).1.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dynamics(op: OperatorSpec, sigma: f64, alpha: f64, lateral: f64) -> Dynamics {
        let params = ProblemParams::new(op, sigma, 1.0, alpha).unwrap();
        Dynamics::new(params, ChiProfile::Const(alpha), move |_| lateral)
    }

    #[test]
    fn constant_field_is_stationary() {
        let op = OperatorSpec::truncated_eigen_sum(3, 0.0, 2).unwrap();
        let d = dynamics(op, 0.0, 0.0, 2.5);
        let f = RadialGridField::new(2.0, 20, |_| 2.5).unwrap();
        let g = step(&f, &d, &SchemeConfig::new(f.h, 1.0)).unwrap();
        assert_eq!(f.values, g.values);
    }

    #[test]
    fn interior_rate_matches_hand_value() {
        // u = −r²: u_r = −2r, u_rr = −2, D²u = −2 I, sum of the two smallest
        // eigenvalues is −4; the viscosity adds θ h (−2)/2 = −θ h
        let op = OperatorSpec::truncated_eigen_sum(3, 0.0, 2).unwrap();
        let d = dynamics(op, 0.0, 0.0, -4.0);
        let f = RadialGridField::new(2.0, 40, |r| -r * r).unwrap();
        let control = plan_step(&d, &[&f], 0.9).unwrap();
        let g = step_with(&f, &d, &control).unwrap();
        for i in [5, 20, 35] {
            let rate = (g.values[i] - f.values[i]) / control.dt;
            let expected = -4.0 - control.theta[i] * f.h;
            assert!((rate - expected).abs() < 1e-8 * (1.0 + control.theta[i]), "{rate} vs {expected}");
        }
    }

    #[test]
    fn fixed_step_above_limit_is_rejected() {
        let op = OperatorSpec::truncated_eigen_sum(3, 0.0, 2).unwrap();
        let d = dynamics(op, 0.0, 0.0, 0.0);
        let f = RadialGridField::new(1.0, 50, |r| r * r).unwrap();
        let mut config = SchemeConfig::new(f.h, 1.0);
        config.dt = Some(0.1);
        assert!(matches!(step(&f, &d, &config), Err(Error::Cfl { .. })));
    }

    #[test]
    fn godunov_flux_cases() {
        assert_eq!(forcing_flux(1.0, 2.0, -1.0, 2.0), 4.0);
        assert_eq!(forcing_flux(1.0, 2.0, 2.0, -1.0), 0.0);
        assert_eq!(forcing_flux(-1.0, 2.0, -1.0, 2.0), 0.0);
        assert_eq!(forcing_flux(-1.0, 2.0, 3.0, 1.0), -9.0);
        assert_eq!(forcing_flux(0.7, 0.0, 3.0, 1.0), 0.7);
    }

    #[test]
    fn zero_data_stay_zero() {
        let op = OperatorSpec::grad_trace_minus_infinity(2, 0.0).unwrap();
        let d = dynamics(op, 0.0, 0.0, 0.0);
        let f = RadialGridField::new(3.0, 30, |_| 0.0).unwrap();
        let traj = run(&f, &d, &SchemeConfig::new(f.h, 1.0), 1).unwrap();
        assert!(traj.last().values.iter().all(|v| *v == 0.0));
    }
}
