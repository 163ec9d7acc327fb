//! Scenario files, batch runs and CSV/markdown artifacts behind the
//! `plbarrier` binary.
//!
//! A scenario is a TOML file with `[operator]`, `[problem]`, `[run]`,
//! optional `[sim]` and `[transform]` blocks, plus top-level `seed` and
//! `out_dir`. The output directory can be overridden with `PLBARRIER_OUT`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier_factory::{build_case, classify, extrapolate_a_limit, BarrierSpec, CaseId, SpecialCase};
use crate::comparison_lab::{pl_experiment, PlRow, PlSettings};
use crate::dnl_transform::{build_phi, classify_f, Classification, Nonlinearity, PowerFamily};
use crate::error::{Error, Result};
use crate::operators::{check_conditions, estimate_lambda_sup_inf, OperatorSpec};
use crate::params::{ChiProfile, ProblemParams, ZDomain, ZFunction};
use crate::residual_certifier::{certify, CertificateReport, CertifyOptions, Sampler};

pub const OUT_DIR_ENV: &str = "PLBARRIER_OUT";

/// Offsets added to the global seed for each randomized stage.
pub const SEED_OFFSET_CONDITIONS: u64 = 1;

const CHI_ALPHA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub operator: OperatorConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub run: RunConfig,
    pub sim: Option<SimConfig>,
    pub transform: Option<TransformConfig>,
    /// Set from the command line; wins over `PLBARRIER_OUT` and `out_dir`.
    #[serde(skip)]
    pub out_override: Option<PathBuf>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("plbarrier-out")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKindConfig {
    GradTraceMinusInfinity,
    TruncatedEigenSum,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: OperatorKindConfig,
    #[serde(default)]
    pub p: f64,
    pub m: Option<usize>,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChiConfig {
    Const { value: f64 },
    Sin { amplitude: f64, frequency: f64 },
    Table { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Option<f64>,
    #[serde(default)]
    pub open: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZConfig {
    Zero,
    ZeroAbove { s0: f64, slope: f64 },
    PowerDecay { coef: f64, shift: f64, exponent: f64 },
    Table { knots: Vec<f64>, values: Vec<f64>, domain: DomainConfig },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub sigma: f64,
    /// Optional sweep; replaces `sigma` when non-empty.
    #[serde(default)]
    pub sigmas: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub alpha: f64,
    pub chi: Option<ChiConfig>,
    pub z: Option<ZConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SamplerConfig {
    Halton,
    Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Case ids, or `auto` (the super-solution regime) and `auto-sub`
    /// (its sub-solution mirror).
    pub cases: Vec<String>,
    pub sampler: SamplerConfig,
    pub n_samples: usize,
    pub slack: f64,
    #[serde(rename = "R_probe")]
    pub r_probe: f64,
    /// Residual samples written per case, closest to violation first.
    pub dump_samples: usize,
    /// Ball radius for the special constructions.
    pub radius: f64,
    pub mu: f64,
    pub spread: f64,
    pub lambda_range: [f64; 2],
    pub lambda_steps: usize,
    pub condition_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cases: vec!["auto".into()],
            sampler: SamplerConfig::Halton,
            n_samples: 100_000,
            slack: 1e-9,
            r_probe: 10.0,
            dump_samples: 100,
            radius: 5.0,
            mu: 1.0,
            spread: 0.1,
            lambda_range: [-1e3, 1e3],
            lambda_steps: 201,
            condition_trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub case: Option<String>,
    #[serde(rename = "R")]
    pub radii: Vec<f64>,
    pub h: f64,
    pub dt: Option<f64>,
    pub sigma: Option<f64>,
    /// Defaults to the critical exponent.
    pub growth_beta: Option<f64>,
    pub nu: f64,
    pub ramp_fraction: f64,
    pub probe_radius: f64,
    pub stride: usize,
    pub out: PathBuf,
}

impl Default for SimConfig {
    fn default() -> Self {
        let s = PlSettings::default();
        Self {
            case: None,
            radii: vec![5.0, 10.0, 20.0, 40.0],
            h: s.h,
            dt: None,
            sigma: None,
            growth_beta: None,
            nu: s.nu,
            ramp_fraction: s.ramp_fraction,
            probe_radius: s.probe_radius,
            stride: s.stride,
            out: PathBuf::from("simulation.csv"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    /// `power:alpha,a` or `expr:<expression in s>`.
    pub f: String,
    pub k: f64,
    /// `auto`, `convergent` or `divergent`.
    pub classification: String,
    pub v_min: Option<f64>,
    pub v_max: f64,
    pub points: usize,
    pub quad_tol: f64,
    pub out: PathBuf,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            f: "power:0.5,0".into(),
            k: 3.0,
            classification: "auto".into(),
            v_min: None,
            v_max: 10.0,
            points: 101,
            quad_tol: 1e-10,
            out: PathBuf::from("transform.csv"),
        }
    }
}

impl Default for ScenarioConfig {
    /// `k = 3` operator in the plane with a `σ` sweep across the regimes.
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: default_out_dir(),
            operator: OperatorConfig {
                kind: OperatorKindConfig::GradTraceMinusInfinity,
                p: 0.0,
                m: None,
                n: 2,
            },
            problem: ProblemConfig {
                sigma: 0.0,
                sigmas: vec![0.0, 1.0, 2.0, 3.0, 8.0],
                horizon: 1.0,
                alpha: 1.0,
                chi: None,
                z: None,
            },
            run: RunConfig::default(),
            sim: None,
            transform: None,
            out_override: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| text[s].to_string()).unwrap_or_else(|| "<file>".into());
            Error::config(field, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// The command-line override, then `PLBARRIER_OUT`, then `out_dir`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_override {
            return dir.clone();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.out_dir.clone(),
        }
    }

    pub fn operator(&self) -> Result<OperatorSpec> {
        let o = &self.operator;
        match o.kind {
            OperatorKindConfig::GradTraceMinusInfinity => OperatorSpec::grad_trace_minus_infinity(o.n, o.p),
            OperatorKindConfig::TruncatedEigenSum => {
                let m = o.m.ok_or_else(|| Error::config("operator.m", "required for truncated_eigen_sum"))?;
                OperatorSpec::truncated_eigen_sum(o.n, o.p, m)
            }
        }
    }

    pub fn chi(&self) -> Result<ChiProfile> {
        let p = &self.problem;
        let chi = match &p.chi {
            None => ChiProfile::Const(p.alpha),
            Some(ChiConfig::Const { value }) => ChiProfile::Const(*value),
            Some(ChiConfig::Sin { amplitude, frequency }) => ChiProfile::Sin {
                amplitude: *amplitude,
                frequency: *frequency,
            },
            Some(ChiConfig::Table { times, values }) => {
                if times.is_empty() || times.len() != values.len() || times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::config(
                        "problem.chi",
                        "table needs equally many strictly increasing times and values",
                    ));
                }
                ChiProfile::Table {
                    times: times.clone(),
                    values: values.clone(),
                }
            }
        };
        let sup = chi.sup_abs(p.horizon);
        if (sup - p.alpha).abs() > CHI_ALPHA_TOL * (1.0 + p.alpha) {
            return Err(Error::config(
                "problem.alpha",
                format!("sup |chi| over [0, T] is {sup}, alpha is {}", p.alpha),
            ));
        }
        Ok(chi)
    }

    pub fn z(&self) -> Result<ZFunction> {
        match &self.problem.z {
            None | Some(ZConfig::Zero) => Ok(ZFunction::Zero),
            Some(ZConfig::ZeroAbove { s0, slope }) => ZFunction::zero_above(*s0, *slope),
            Some(ZConfig::PowerDecay { coef, shift, exponent }) => ZFunction::power_decay(*coef, *shift, *exponent),
            Some(ZConfig::Table { knots, values, domain }) => {
                if domain.lower.is_some_and(|l| !l.is_finite()) {
                    return Err(Error::config("problem.z.domain.lower", "must be finite or omitted"));
                }
                if let Some(l) = domain.lower {
                    if knots.first().is_some_and(|k0| *k0 > l) {
                        return Err(Error::config(
                            "problem.z.domain",
                            format!("first knot {} lies above the domain's lower end {l}", knots[0]),
                        ));
                    }
                }
                let dom = ZDomain {
                    lower: domain.lower,
                    open: domain.open,
                };
                ZFunction::table(knots.clone(), values.clone(), dom)
            }
        }
    }

    /// The values of `σ` to run: the sweep if given, otherwise `sigma`.
    pub fn sigmas(&self) -> Vec<f64> {
        if self.problem.sigmas.is_empty() {
            vec![self.problem.sigma]
        } else {
            self.problem.sigmas.clone()
        }
    }

    /// Problem parameters at a given `σ`; strictly signed forcing is
    /// declared so the special constructions can use it.
    pub fn params(&self, sigma: f64) -> Result<ProblemParams> {
        let chi = self.chi()?;
        let mut params =
            ProblemParams::new(self.operator()?, sigma, self.problem.horizon, self.problem.alpha)?.with_z(self.z()?)?;
        let (lo, hi) = chi.range(self.problem.horizon);
        if hi < 0.0 {
            params = params.with_alpha_hat_neg(hi)?;
        } else if lo > 0.0 {
            params = params.with_alpha_hat_pos(lo)?;
        }
        Ok(params)
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            sampler: match self.run.sampler {
                SamplerConfig::Halton => Sampler::LowDiscrepancy,
                SamplerConfig::Grid => Sampler::Grid,
            },
            n_samples: self.run.n_samples,
            slack: self.run.slack,
            r_probe: self.run.r_probe,
            keep_samples: self.run.dump_samples > 0,
            ..CertifyOptions::default()
        }
    }

    fn special(&self, case: CaseId) -> Option<SpecialCase> {
        let r = &self.run;
        Some(match case {
            CaseId::DecayBall => SpecialCase::DecayBall {
                radius: r.radius,
                mu: r.mu,
            },
            CaseId::DecayGaussian => SpecialCase::DecayGaussian {
                mu: r.mu,
                spread: r.spread,
            },
            CaseId::AbsorbingBallCritical => SpecialCase::AbsorbingBallCritical { radius: r.radius },
            CaseId::AbsorbingBallStrong => SpecialCase::AbsorbingBallStrong { radius: r.radius },
            CaseId::ForcedBall => SpecialCase::ForcedBall { radius: r.radius },
            _ => return None,
        })
    }

    /// Case ids requested for `params`, with `auto` tokens resolved.
    pub fn resolve_cases(&self, params: &ProblemParams) -> Result<Vec<CaseId>> {
        let mut out = Vec::new();
        for (i, token) in self.run.cases.iter().enumerate() {
            let case = match token.trim() {
                "auto" => classify(params)?,
                "auto-sub" => {
                    if params.k() > 1.0 + 1e-12 {
                        CaseId::SubDegenerate
                    } else {
                        CaseId::SubUniform
                    }
                }
                s => s
                    .parse::<CaseId>()
                    .map_err(|_| Error::config(format!("run.cases[{i}]"), format!("unknown case id `{s}`")))?,
            };
            if !out.contains(&case) {
                out.push(case);
            }
        }
        Ok(out)
    }
}

/// Outcome for one `(σ, case)` pair.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case_id: String,
    pub sigma: f64,
    pub outcome: std::result::Result<(BarrierSpec, CertificateReport), String>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok((_, rep)) if rep.passed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub case_id: String,
    pub sigma: f64,
    pub profile: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub a_limit: Option<f64>,
    pub worst_residual: Option<f64>,
    pub violations: Option<usize>,
    pub pass: bool,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExtrapolationRow {
    pub case_id: String,
    pub sigma: f64,
    pub estimate: f64,
    pub closed_form: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone)]
pub struct CertifyOutcome {
    pub results: Vec<CaseResult>,
    pub summary: Vec<SummaryRow>,
    pub extrapolations: Vec<ExtrapolationRow>,
    pub out_dir: PathBuf,
}

impl CertifyOutcome {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(CaseResult::passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.results
            .iter()
            .filter(|r| !r.passed())
            .map(|r| match &r.outcome {
                Ok((_, rep)) => format!("{} (sigma = {}): {} violations", r.case_id, r.sigma, rep.violations),
                Err(e) => format!("{} (sigma = {}): {e}", r.case_id, r.sigma),
            })
            .collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Builds, certifies and writes `certificates.csv`, `barriers.csv`,
/// `extrapolation.csv`, `summary.csv` and `summary.md`.
pub fn run_certify(config: &ScenarioConfig) -> Result<CertifyOutcome> {
    let out_dir = config.resolved_out_dir();
    fs::create_dir_all(&out_dir)?;
    let options = config.certify_options();
    let mut jobs = Vec::new();
    for sigma in config.sigmas() {
        let params = config.params(sigma)?;
        for case in config.resolve_cases(&params)? {
            jobs.push((sigma, params.clone(), case));
        }
    }
    let results: Vec<CaseResult> = jobs
        .par_iter()
        .map(|(sigma, params, case)| {
            let outcome = build_case(params, *case, None, config.special(*case))
                .and_then(|barrier| certify(params, &barrier, &options).map(|rep| (barrier, rep)))
                .map_err(|e| e.to_string());
            CaseResult {
                case_id: case.as_str().to_string(),
                sigma: *sigma,
                outcome,
            }
        })
        .collect();
    let extrapolations: Vec<ExtrapolationRow> = results
        .iter()
        .zip(&jobs)
        .filter_map(|(res, (sigma, params, case))| {
            let (barrier, _) = res.outcome.as_ref().ok()?;
            if case.is_special() {
                return None;
            }
            let ex = extrapolate_a_limit(params, barrier.direction, 20).ok()?;
            Some(ExtrapolationRow {
                case_id: res.case_id.clone(),
                sigma: *sigma,
                estimate: ex.estimate,
                closed_form: ex.closed_form,
                abs_error: ex.abs_error,
            })
        })
        .collect();

    let mut certs = csv::Writer::from_path(out_dir.join("certificates.csv"))?;
    certs.write_record(["case_id", "r", "t", "residual"])?;
    let mut barriers = csv::Writer::from_path(out_dir.join("barriers.csv"))?;
    barriers.write_record(["case_id", "a", "b", "c", "p", "R", "r_star", "a_limit"])?;
    let mut summary = Vec::new();
    for res in &results {
        let row = match &res.outcome {
            Ok((barrier, rep)) => {
                let sign = if barrier.direction == crate::barrier_factory::Direction::Super { 1.0 } else { -1.0 };
                let mut samples: Vec<_> = rep.samples.iter().collect();
                samples.sort_by(|x, y| (sign * y.residual).total_cmp(&(sign * x.residual)));
                for s in samples.into_iter().take(config.run.dump_samples) {
                    certs.write_record([res.case_id.clone(), s.r.to_string(), s.t.to_string(), s.residual.to_string()])?;
                }
                let c = &barrier.constants;
                barriers.write_record([
                    res.case_id.clone(),
                    barrier.a.to_string(),
                    barrier.b.to_string(),
                    opt(c.c),
                    opt(c.p),
                    opt(c.radius),
                    opt(c.r_star),
                    barrier.a_limit.to_string(),
                ])?;
                SummaryRow {
                    case_id: res.case_id.clone(),
                    sigma: res.sigma,
                    profile: barrier.profile.describe(),
                    a: Some(barrier.a),
                    b: Some(barrier.b),
                    a_limit: Some(barrier.a_limit),
                    worst_residual: Some(rep.worst_residual),
                    violations: Some(rep.violations),
                    pass: rep.passed,
                    error: String::new(),
                }
            }
            Err(e) => SummaryRow {
                case_id: res.case_id.clone(),
                sigma: res.sigma,
                profile: String::new(),
                a: None,
                b: None,
                a_limit: None,
                worst_residual: None,
                violations: None,
                pass: false,
                error: e.clone(),
            },
        };
        summary.push(row);
    }
    certs.flush()?;
    barriers.flush()?;
    write_csv(
        &out_dir.join("summary.csv"),
        &summary,
        &["case_id", "sigma", "profile", "a", "b", "a_limit", "worst_residual", "violations", "pass", "error"],
    )?;
    write_csv(
        &out_dir.join("extrapolation.csv"),
        &extrapolations,
        &["case_id", "sigma", "estimate", "closed_form", "abs_error"],
    )?;
    fs::write(out_dir.join("summary.md"), summary_markdown(&summary))?;
    Ok(CertifyOutcome {
        results,
        summary,
        extrapolations,
        out_dir,
    })
}

fn summary_markdown(rows: &[SummaryRow]) -> String {
    let mut s = String::from(
        "| case_id | sigma | profile | a | b | a_limit | worst_residual | pass |\n|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.case_id,
            r.sigma,
            if r.error.is_empty() { &r.profile } else { &r.error },
            f(r.a),
            f(r.b),
            f(r.a_limit),
            f(r.worst_residual),
            if r.pass { "yes" } else { "NO" }
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub case: CaseId,
    pub growth_beta: f64,
    pub rows: Vec<PlRow>,
    pub margin_nonincreasing: bool,
    pub files: Vec<PathBuf>,
}

/// Runs the growth experiment of the `[sim]` block; writes `(t, r, u)` per
/// radius and `pl_summary.csv`.
pub fn run_simulate(config: &ScenarioConfig) -> Result<SimulateOutcome> {
    let sim = config.sim.clone().unwrap_or_default();
    let out_dir = config.resolved_out_dir();
    fs::create_dir_all(&out_dir)?;
    let params = config.params(sim.sigma.unwrap_or(config.problem.sigma))?;
    let case = classify(&params)?;
    if let Some(requested) = &sim.case {
        let requested: CaseId = requested.parse().map_err(|_| Error::config("sim.case", format!("unknown case id `{requested}`")))?;
        if requested != case {
            return Err(Error::config(
                "sim.case",
                format!("parameters select {case}, not {requested}"),
            ));
        }
    }
    if sim.radii.is_empty() {
        return Err(Error::config("sim.R", "at least one radius is required"));
    }
    let growth_beta = match sim.growth_beta {
        Some(b) => b,
        None => params
            .gamma_star()
            .ok_or_else(|| Error::config("sim.growth_beta", "no critical exponent for this operator; set it explicitly"))?,
    };
    let settings = PlSettings {
        nu: sim.nu,
        ramp_fraction: sim.ramp_fraction,
        h: sim.h,
        probe_radius: sim.probe_radius,
        stride: sim.stride.max(1),
        dt: sim.dt,
        ..PlSettings::default()
    };
    let report = pl_experiment(&params, growth_beta, &sim.radii, &settings)?;
    let mut files = Vec::new();
    let base = out_dir.join(&sim.out);
    for (radius, traj) in &report.trajectories {
        let path = if report.trajectories.len() == 1 {
            base.clone()
        } else {
            let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("simulation");
            base.with_file_name(format!("{stem}_R{radius}.csv"))
        };
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["t", "r", "u"])?;
        for (t, r, u) in traj.rows() {
            w.write_record([t.to_string(), r.to_string(), u.to_string()])?;
        }
        w.flush()?;
        files.push(path);
    }
    write_csv(&out_dir.join("pl_summary.csv"), &report.rows, &["R", "sup_center", "bound", "margin"])?;
    Ok(SimulateOutcome {
        case,
        growth_beta,
        margin_nonincreasing: report.margin_nonincreasing(),
        rows: report.rows,
        files,
    })
}

/// Parses `power:alpha,a` or `expr:<expression in s>`.
pub fn parse_nonlinearity(spec: &str, k: f64) -> Result<Nonlinearity> {
    if let Some(rest) = spec.strip_prefix("power:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        let parsed: Vec<f64> = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config("transform.f", format!("expected power:alpha,a, got `{spec}`")))?;
        if parsed.len() != 2 {
            return Err(Error::config("transform.f", format!("expected power:alpha,a, got `{spec}`")));
        }
        return Ok(PowerFamily::new(parsed[0], parsed[1], k)?.nonlinearity());
    }
    if let Some(expr) = spec.strip_prefix("expr:") {
        let tree = evalexpr::build_operator_tree::<evalexpr::DefaultNumericTypes>(expr)
            .map_err(|e| Error::config("transform.f", format!("cannot parse `{expr}`: {e}")))?;
        let tree = Arc::new(tree);
        let eval = move |s: f64| {
            let mut ctx = evalexpr::HashMapContext::<evalexpr::DefaultNumericTypes>::new();
            use evalexpr::ContextWithMutableVariables;
            if ctx.set_value("s".into(), evalexpr::Value::Float(s)).is_err() {
                return f64::NAN;
            }
            tree.eval_number_with_context(&ctx).unwrap_or(f64::NAN)
        };
        if eval(0.5).is_nan() {
            return Err(Error::config("transform.f", format!("`{expr}` does not evaluate to a number at s = 0.5")));
        }
        return Ok(Nonlinearity::new(expr.to_string(), eval));
    }
    Err(Error::config("transform.f", format!("expected `power:alpha,a` or `expr:...`, got `{spec}`")))
}

#[derive(Debug, Clone)]
pub struct TransformOutcome {
    pub classification: Classification,
    pub partial_integrals: Vec<(f64, f64)>,
    /// `(v, u, Z)` rows; empty with `classify_only`.
    pub rows: Vec<(f64, f64, f64)>,
    pub file: Option<PathBuf>,
}

/// Classifies `f` and, unless `classify_only`, tabulates `(v, φ(v), Z(v))`.
pub fn run_transform(config: &ScenarioConfig, classify_only: bool) -> Result<TransformOutcome> {
    let tc = config.transform.clone().unwrap_or_default();
    let out_dir = config.resolved_out_dir();
    fs::create_dir_all(&out_dir)?;
    let f = parse_nonlinearity(&tc.f, tc.k)?;
    let rep = classify_f(&f, tc.k, tc.quad_tol)?;
    let mut w = csv::Writer::from_path(out_dir.join("classification.csv"))?;
    w.write_record(["epsilon", "integral", "classification"])?;
    for (eps, i) in &rep.partial_integrals {
        w.write_record([eps.to_string(), i.to_string(), rep.classification.to_string()])?;
    }
    w.flush()?;
    if classify_only {
        return Ok(TransformOutcome {
            classification: rep.classification,
            partial_integrals: rep.partial_integrals,
            rows: Vec::new(),
            file: None,
        });
    }
    let classification = match tc.classification.as_str() {
        "auto" => rep.classification,
        "convergent" => Classification::Convergent,
        "divergent" => Classification::Divergent,
        other => {
            return Err(Error::config(
                "transform.classification",
                format!("expected auto, convergent or divergent, got `{other}`"),
            ))
        }
    };
    let spec = build_phi(f, tc.k, classification)?;
    let v_min = tc.v_min.unwrap_or(match classification {
        Classification::Convergent => 0.0,
        _ => -tc.v_max,
    });
    if tc.points < 2 || !(tc.v_max > v_min) {
        return Err(Error::config("transform.points", "need at least two points on a nonempty range"));
    }
    let rows: Vec<(f64, f64, f64)> = (0..tc.points)
        .into_par_iter()
        .map(|i| {
            let v = v_min + (tc.v_max - v_min) * i as f64 / (tc.points - 1) as f64;
            Ok((v, spec.phi(v)?, spec.z(v)?))
        })
        .collect::<Result<_>>()?;
    let path = out_dir.join(&tc.out);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["v", "u", "Z"])?;
    for (v, u, z) in &rows {
        w.write_record([v.to_string(), u.to_string(), z.to_string()])?;
    }
    w.flush()?;
    Ok(TransformOutcome {
        classification,
        partial_integrals: rep.partial_integrals,
        rows,
        file: Some(path),
    })
}

#[derive(Debug, Clone)]
pub struct LambdaOutcome {
    pub lambda_sup: String,
    pub lambda_inf: String,
    pub monotonicity_violations: usize,
    pub conditions_passed: bool,
}

/// Spectral sweep (`lambda.csv`) and randomized structural checks
/// (`conditions.csv`).
pub fn run_lambda(config: &ScenarioConfig) -> Result<LambdaOutcome> {
    let out_dir = config.resolved_out_dir();
    fs::create_dir_all(&out_dir)?;
    let op = config.operator()?;
    let [lo, hi] = config.run.lambda_range;
    let rep = estimate_lambda_sup_inf(&op, (lo, hi), config.run.lambda_steps)?;
    let mut w = csv::Writer::from_path(out_dir.join("lambda.csv"))?;
    w.write_record(["lambda", "lambda_min", "lambda_max"])?;
    for s in &rep.samples {
        w.write_record([s.lambda.to_string(), s.min.to_string(), s.max.to_string()])?;
    }
    w.flush()?;
    let cond = check_conditions(
        &op,
        config.run.condition_trials.max(1),
        config.seed.wrapping_add(SEED_OFFSET_CONDITIONS),
    )?;
    let mut w = csv::Writer::from_path(out_dir.join("conditions.csv"))?;
    w.write_record(["condition", "trials", "violations", "worst", "pass"])?;
    for (name, c) in [
        ("monotonicity", cond.monotonicity),
        ("homogeneity", cond.homogeneity),
        ("nondegeneracy", cond.nondegeneracy),
    ] {
        w.write_record([
            name.to_string(),
            c.trials.to_string(),
            c.violations.to_string(),
            c.worst.to_string(),
            c.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(LambdaOutcome {
        lambda_sup: rep.lambda_sup.to_string(),
        lambda_inf: rep.lambda_inf.to_string(),
        monotonicity_violations: rep.monotonicity_violations,
        conditions_passed: cond.all_passed(),
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ReportSection {
    pub section: String,
    pub status: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub sections: Vec<ReportSection>,
    pub missing: Vec<String>,
}

pub const EXTRAPOLATION_TOL: f64 = 1e-6;

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Collects whatever artifacts are present in `dir` into `report.md` and
/// `report.csv`. An empty directory gives an empty report.
pub fn run_report(dir: &Path) -> Result<Report> {
    fs::create_dir_all(dir)?;
    let mut report = Report::default();
    let any = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .any(|e| e.file_name() != "report.md" && e.file_name() != "report.csv");

    let summary = dir.join("summary.csv");
    if summary.exists() {
        let rows: Vec<SummaryRow> = read_rows(&summary)?;
        let failed: Vec<String> = rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("{}@sigma={}", r.case_id, r.sigma))
            .collect();
        report.sections.push(ReportSection {
            section: "certificates".into(),
            status: if failed.is_empty() { "pass" } else { "fail" }.into(),
            detail: if failed.is_empty() {
                format!("{} of {} certified", rows.len(), rows.len())
            } else {
                format!("{} of {} certified; failing: {}", rows.len() - failed.len(), rows.len(), failed.join(" "))
            },
        });
    } else if any {
        report.missing.push("summary.csv".into());
    }

    let extrap = dir.join("extrapolation.csv");
    if extrap.exists() {
        let rows: Vec<ExtrapolationRow> = read_rows(&extrap)?;
        let worst = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
        report.sections.push(ReportSection {
            section: "a(b) extrapolation".into(),
            status: if rows.iter().all(|r| r.abs_error <= EXTRAPOLATION_TOL) { "pass" } else { "fail" }.into(),
            detail: format!("{} cases, worst |estimate - closed form| = {worst:.3e}", rows.len()),
        });
    } else if any {
        report.missing.push("extrapolation.csv".into());
    }

    let pl = dir.join("pl_summary.csv");
    if pl.exists() {
        let mut rows: Vec<PlRow> = read_rows::<PlRowIn>(&pl)?.into_iter().map(PlRow::from).collect();
        rows.sort_by(|a, b| a.radius.total_cmp(&b.radius));
        let monotone = rows.windows(2).all(|w| w[1].margin <= w[0].margin);
        let margins: Vec<String> = rows.iter().map(|r| format!("R={}: {:.6e}", r.radius, r.margin)).collect();
        report.sections.push(ReportSection {
            section: "growth trend".into(),
            status: if monotone { "nonincreasing" } else { "not monotone" }.into(),
            detail: margins.join("; "),
        });
    } else if any {
        report.missing.push("pl_summary.csv".into());
    }

    let lambda = dir.join("lambda.csv");
    if lambda.exists() {
        let rows: Vec<(f64, f64, f64)> = read_rows(&lambda)?;
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.1), hi.max(r.2)));
        report.sections.push(ReportSection {
            section: "spectral sweep".into(),
            status: "info".into(),
            detail: format!("{} samples, min Lambda_min = {lo}, max Lambda_max = {hi}", rows.len()),
        });
    } else if any {
        report.missing.push("lambda.csv".into());
    }

    let transform = dir.join("classification.csv");
    if transform.exists() {
        let rows: Vec<(f64, f64, String)> = read_rows(&transform)?;
        report.sections.push(ReportSection {
            section: "transform".into(),
            status: rows.first().map(|r| r.2.clone()).unwrap_or_default(),
            detail: rows
                .last()
                .map(|r| format!("integral over [{:e}, 1] = {}", r.0, r.1))
                .unwrap_or_default(),
        });
    } else if any {
        report.missing.push("classification.csv".into());
    }

    let mut md = String::from("# plbarrier report\n\n");
    for s in &report.sections {
        md.push_str(&format!("## {}\n\nstatus: {}\n\n{}\n\n", s.section, s.status, s.detail));
    }
    if !report.missing.is_empty() {
        md.push_str(&format!("missing artifacts: {}\n", report.missing.join(", ")));
    }
    fs::write(dir.join("report.md"), md)?;
    write_csv(&dir.join("report.csv"), &report.sections, &["section", "status", "detail"])?;
    Ok(report)
}

#[derive(Deserialize)]
struct PlRowIn {
    #[serde(rename = "R")]
    radius: f64,
    sup_center: f64,
    bound: f64,
    margin: f64,
}

impl From<PlRowIn> for PlRow {
    fn from(r: PlRowIn) -> Self {
        PlRow {
            radius: r.radius,
            sup_center: r.sup_center,
            bound: r.bound,
            margin: r.margin,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "plbarrier", version, about = "Barrier certification and comparison experiments")]
pub struct Cli {
    /// Scenario file; the built-in default scenario is used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the scenario and PLBARRIER_OUT).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and certify the barriers of the scenario.
    Certify(CertifyArgs),
    /// Run the growth experiment of the radial scheme.
    Simulate(SimulateArgs),
    /// Build the change of variables for a doubly nonlinear equation.
    Transform(TransformArgs),
    /// Spectral sweep and structural condition checks for the operator.
    Lambda,
    /// Summarize the artifacts found in the output directory.
    Report,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Comma-separated case ids (or `auto`, `auto-sub`).
    #[arg(long, value_delimiter = ',')]
    pub cases: Vec<String>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub case: Option<String>,
    /// Comma-separated lateral radii.
    #[arg(long = "R", value_delimiter = ',')]
    pub radii: Vec<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub growth_beta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// `power:alpha,a` or `expr:<expression in s>`.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub classify_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Cli {
    /// Loads the scenario and folds command-line overrides into it.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.out_override = self.out_dir.clone();
        match &self.command {
            Command::Certify(a) => {
                if !a.cases.is_empty() {
                    cfg.run.cases = a.cases.clone();
                }
                if let Some(n) = a.samples {
                    cfg.run.n_samples = n;
                }
            }
            Command::Simulate(a) => {
                let sim = cfg.sim.get_or_insert_with(SimConfig::default);
                if a.case.is_some() {
                    sim.case = a.case.clone();
                }
                if !a.radii.is_empty() {
                    sim.radii = a.radii.clone();
                }
                if let Some(h) = a.h {
                    sim.h = h;
                }
                if a.dt.is_some() {
                    sim.dt = a.dt;
                }
                if a.sigma.is_some() {
                    sim.sigma = a.sigma;
                }
                if a.growth_beta.is_some() {
                    sim.growth_beta = a.growth_beta;
                }
                if let Some(out) = &a.out {
                    sim.out = out.clone();
                }
            }
            Command::Transform(a) => {
                let t = cfg.transform.get_or_insert_with(TransformConfig::default);
                if let Some(f) = &a.f {
                    t.f = f.clone();
                }
                if let Some(k) = a.k {
                    t.k = k;
                }
                if let Some(out) = &a.out {
                    t.out = out.clone();
                }
            }
            Command::Lambda | Command::Report => {}
        }
        Ok(cfg)
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let cfg = cli.scenario()?;
    match &cli.command {
        Command::Certify(_) => {
            let out = run_certify(&cfg)?;
            for row in &out.summary {
                println!(
                    "{:<8} sigma={:<5} {} {}",
                    row.case_id,
                    row.sigma,
                    if row.pass { "pass" } else { "FAIL" },
                    row.worst_residual.map(|w| format!("worst={w:.3e}")).unwrap_or_else(|| row.error.clone())
                );
            }
            for f in out.failures() {
                eprintln!("failed: {f}");
            }
            Ok(out.exit_code())
        }
        Command::Simulate(_) => {
            let out = run_simulate(&cfg)?;
            println!("case {} growth beta {}", out.case, out.growth_beta);
            for r in &out.rows {
                println!("R={:<6} sup_center={:.6} bound={:.6} margin={:.6e}", r.radius, r.sup_center, r.bound, r.margin);
            }
            println!("margin nonincreasing in R: {}", out.margin_nonincreasing);
            Ok(0)
        }
        Command::Transform(a) => {
            let out = run_transform(&cfg, a.classify_only)?;
            println!("classification: {}", out.classification);
            if let Some(f) = &out.file {
                println!("wrote {} rows to {}", out.rows.len(), f.display());
            }
            Ok(0)
        }
        Command::Lambda => {
            let out = run_lambda(&cfg)?;
            println!("lambda_sup = {}, lambda_inf = {}", out.lambda_sup, out.lambda_inf);
            println!(
                "monotonicity violations in sweep: {}, structural conditions pass: {}",
                out.monotonicity_violations, out.conditions_passed
            );
            Ok(if out.conditions_passed && out.monotonicity_violations == 0 { 0 } else { 1 })
        }
        Command::Report => {
            let rep = run_report(&cfg.resolved_out_dir())?;
            for s in &rep.sections {
                println!("{}: {} ({})", s.section, s.status, s.detail);
            }
            if !rep.missing.is_empty() {
                println!("missing: {}", rep.missing.join(", "));
            }
            Ok(0)
        }
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code:
/// `0` on success, `1` if a certification or check failed, `2` on errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_round_trips_through_toml() {
        let cfg = ScenarioConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn inconsistent_alpha_is_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.problem.chi = Some(ChiConfig::Const { value: 2.0 });
        assert!(matches!(cfg.chi(), Err(Error::Config { field, .. }) if field == "problem.alpha"));
    }

    #[test]
    fn power_spec_parses() {
        let f = parse_nonlinearity("power:1,1", 3.0).unwrap();
        assert_eq!(f.eval(1.0), 2.0);
        let g = parse_nonlinearity("expr:(s + 1)^2", 3.0).unwrap();
        assert!((g.eval(1.0) - 4.0).abs() < 1e-12);
        assert!(parse_nonlinearity("cubic", 3.0).is_err());
    }
}
