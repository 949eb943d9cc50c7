//! Declarative experiment scenarios: execution, checks and artifact output.

mod plot;
mod scenario;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

pub use plot::{line_plot, Axes, Series};
pub use scenario::{
    Analysis, AnalyzeSpec, Checks, DirectionTarget, HeavyBall, Initial, Kind, Params, PdeSpec, PotentialSpec, ReduceSpec, Scenario,
    SweepSpec, Target,
};
pub use sweep::{run_sweep, SweepRow};

use crate::asymptotics::{
    characteristic_exponents, classify_decay, fit_rate, monitor_gstar, mz_trichotomy, secant_analysis, verify_a1_a2, DecayClass, RateFit,
};
use crate::flow::{integrate_gradient, integrate_heavy_ball, vectorize, Trajectory};
use crate::pde::{evolve_until, EvolveOptions, Observables, PdeRun, SpectralState};
use crate::potential::{norm, Potential};
use crate::reduction::{adams_simon_from_reduction, FitOptions, ReducedModel, ReductionSettings};
use crate::sphere::{adams_simon, critical_points, AdamsSimonMode, AdamsSimonVerdict};
use scenario::resolve;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Error, Debug)]
pub enum RunnerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RunnerError>;

impl RunnerError {
    /// Process exit code: 2 for configuration errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Numerical(_) | RunnerError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub name: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub results: Map<String, Value>,
    pub checks: Vec<CheckResult>,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every declared check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn rate(&self) -> Option<RateFit> {
        self.results.get("rate").and_then(|v| serde_json::from_value(v.clone()).ok())
    }

    pub fn class_name(&self) -> Option<String> {
        self.results.get("classify").and_then(|v| v.get("class")).and_then(|v| v.as_str()).map(str::to_string)
    }
}

fn numerical(e: impl std::fmt::Display) -> RunnerError {
    RunnerError::Numerical(e.to_string())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

struct Ctx<'a> {
    sc: &'a Scenario,
    out: PathBuf,
    stamp: String,
    hash: String,
    artifacts: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        self.artifacts.push(path);
        Ok(())
    }

    /// CSV artifacts carry their provenance in a `.meta.json` sidecar.
    fn write_csv(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        self.write(name, contents)?;
        let meta = json!({ "config_hash": self.hash, "version": VERSION, "seed": self.sc.seed, "scenario": self.sc.name });
        self.write(&format!("{name}.meta.json"), pretty(&meta).as_bytes())
    }

    fn plot(&mut self, name: &str, title: &str, xl: &str, yl: &str, axes: Axes, series: &[Series]) -> Result<()> {
        let svg = line_plot(title, xl, yl, axes, series, &self.stamp);
        self.write(name, svg.as_bytes())
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Runs a scenario, writing artifacts to `out_dir` (or the scenario's own
/// `out_dir`, or `out/<name>` under the config directory).
pub fn run(sc: &Scenario, out_dir: Option<&Path>) -> Result<RunOutcome> {
    sc.validate()?;
    if sc.kind == Kind::Sweep {
        return Err(RunnerError::Config("use run_sweep for kind = \"sweep\"".into()));
    }
    let out = match (out_dir, &sc.out_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => resolve(&sc.base_dir, o),
        (None, None) => sc.base_dir.join("out").join(if sc.name.is_empty() { "run" } else { &sc.name }),
    };
    fs::create_dir_all(&out)?;
    let hash = sc.config_hash();
    let mut ctx = Ctx {
        sc,
        stamp: format!("config_hash={hash} version={VERSION} seed={}", sc.seed),
        hash: hash.clone(),
        out,
        artifacts: Vec::new(),
    };
    let mut results = Map::new();
    let potential = sc.potential.as_ref().map(|p| p.build(&sc.base_dir)).transpose()?;

    let mut traj: Option<Trajectory> = None;
    let mut pde_run: Option<PdeRun> = None;
    match sc.kind {
        Kind::Gradient | Kind::Heavyball => {
            let g = potential.as_ref().expect("validated");
            let init = sc.initial.as_ref().expect("validated");
            let mut t = if sc.kind == Kind::Gradient {
                integrate_gradient(g, &init.y0, init.t0, init.t_end, &sc.tolerances, &sc.error_model).map_err(numerical)?
            } else {
                let m = sc.heavyball.as_ref().expect("validated").m;
                let v0 = init.v0.clone().unwrap_or_else(|| vec![0.0; init.y0.len()]);
                integrate_heavy_ball(g, m, &init.y0, &v0, init.t0, init.t_end, &sc.tolerances).map_err(numerical)?
            };
            t.meta.config_hash = Some(hash.clone());
            t.meta.version = Some(VERSION.to_string());
            let path = ctx.out.join("trajectory.csv");
            t.save(&path).map_err(numerical)?;
            ctx.artifacts.push(path.clone());
            ctx.artifacts.push(Trajectory::sidecar_path(&path));
            results.insert("trajectory".into(), to_value(&t.meta));
            traj = Some(t);
        }
        Kind::Pde => {
            let spec = sc.pde.clone().unwrap_or_default();
            let init = match &spec.modes {
                Some(m) => SpectralState::from_modes(spec.k_max, m),
                None => SpectralState::neutral_data(spec.k_max, spec.amplitude, spec.theta0),
            }
            .map_err(|e| RunnerError::Config(format!("pde: {e}")))?;
            let opts = EvolveOptions {
                dt: spec.dt,
                scheme: spec.scheme,
                samples_per_decade: spec.samples_per_decade,
                max_sample_gap: spec.max_sample_gap,
                validity_radius: spec.validity_radius,
                max_constant_mode: None,
            };
            let run = evolve_until(&init, spec.model, spec.t_end, &opts).map_err(numerical)?;
            let mut buf = Vec::new();
            run.write_observables_csv(&mut buf).map_err(numerical)?;
            ctx.write_csv("observables.csv", &buf)?;
            let mut buf = Vec::new();
            crate::pde::write_state_csv(&run.final_state, &mut buf).map_err(numerical)?;
            ctx.write_csv("state_final.csv", &buf)?;
            let last = run.observables.last().expect("non-empty");
            results.insert(
                "pde".into(),
                json!({
                    "model": spec.model.to_string(),
                    "k_max": spec.k_max,
                    "steps": run.steps,
                    "t_end": last.t,
                    "sqrt_t_norm": last.t.sqrt() * last.norm_l2,
                    "neutral_angle": last.x2.atan2(last.x1),
                    "max_constant_mode": run.observables.iter().map(|o| o.xplus).fold(0.0, f64::max),
                }),
            );
            plot_pde(&mut ctx, &run.observables)?;
            traj = Some(run.trajectory.clone());
            pde_run = Some(run);
        }
        Kind::Reduce => {
            let spec = sc.reduce.clone().unwrap_or_default();
            let model = ReducedModel::with_settings(spec.model, ReductionSettings { k_max: spec.k_max, ..Default::default() });
            let opts = FitOptions { radii: spec.radii.clone(), n_directions: spec.directions, max_degree: spec.max_degree, seed: sc.seed, ..Default::default() };
            let (verdict, fit) = adams_simon_from_reduction(&model, &opts).map_err(numerical)?;
            let report = json!({
                "model": spec.model.to_string(),
                "p": fit.p,
                "coefficients": fit.coefficients,
                "degree_norms": fit.degree_norms,
                "residual": fit.residual,
                "condition": fit.condition,
                "trust_radius": fit.trust_radius,
                "radii": fit.radii,
                "n_directions": fit.n_directions,
                "max_sample_residual": fit.samples.iter().map(|s| s.residual).fold(0.0, f64::max),
                "config_hash": hash,
                "version": VERSION,
            });
            ctx.write("reduce.json", pretty(&report).as_bytes())?;
            results.insert("reduce".into(), report);
            results.insert("adams_simon".into(), to_value(&verdict));
        }
        Kind::Analyze => {
            if let Some(p) = sc.analyze.as_ref().and_then(|a| a.trajectory.as_ref()) {
                let path = resolve(&sc.base_dir, p);
                let t = if Trajectory::sidecar_path(&path).is_file() {
                    Trajectory::load(&path)
                } else {
                    fs::File::open(&path).map_err(|e| e.into()).and_then(Trajectory::read_csv)
                }
                .map_err(|e| RunnerError::Config(format!("analyze.trajectory: {e}")))?;
                traj = Some(t);
            }
        }
        Kind::Sweep => unreachable!(),
    }

    for a in sc.default_analyses() {
        let key = analysis_key(a);
        if sc.kind == Kind::Reduce && a == Analysis::AdamsSimon {
            continue;
        }
        let value = match analyze(a, sc, &mut ctx, traj.as_ref(), potential.as_ref(), pde_run.as_ref()) {
            Ok(v) => v,
            Err(e @ RunnerError::Io(_)) => return Err(e),
            Err(e @ RunnerError::Config(_)) => return Err(e),
            Err(e) => json!({ "error": e.to_string() }),
        };
        results.insert(key.into(), value);
    }

    let checks = evaluate_checks(&sc.checks, &results);
    let outcome = RunOutcome {
        name: sc.name.clone(),
        config_hash: hash,
        version: VERSION.to_string(),
        seed: sc.seed,
        results,
        checks,
        artifacts: Vec::new(),
    };
    let report = to_value(&outcome);
    ctx.write("analysis.json", pretty(&report).as_bytes())?;
    Ok(RunOutcome { artifacts: ctx.artifacts, ..outcome })
}

fn analysis_key(a: Analysis) -> &'static str {
    match a {
        Analysis::Rate => "rate",
        Analysis::Secant => "secant",
        Analysis::Classify => "classify",
        Analysis::Gstar => "gstar",
        Analysis::Exponents => "exponents",
        Analysis::CriticalPoints => "critical_points",
        Analysis::A1a2 => "a1a2",
        Analysis::Mz => "mz",
        Analysis::AdamsSimon => "adams_simon",
    }
}

fn need_traj(t: Option<&Trajectory>) -> Result<&Trajectory> {
    t.ok_or_else(|| RunnerError::Config("this analysis needs a trajectory".into()))
}

fn need_pot(g: Option<&Potential>) -> Result<&Potential> {
    g.ok_or_else(|| RunnerError::Config("this analysis needs a [potential] section".into()))
}

fn analyze(a: Analysis, sc: &Scenario, ctx: &mut Ctx, traj: Option<&Trajectory>, g: Option<&Potential>, pde: Option<&PdeRun>) -> Result<Value> {
    let p = &sc.params;
    Ok(match a {
        Analysis::Rate => {
            let t = need_traj(traj)?;
            let fit = fit_rate(t, p.candidates.as_deref()).map_err(numerical)?;
            plot_norm(ctx, t, Some(&fit))?;
            to_value(&fit)
        }
        Analysis::Secant => {
            let t = need_traj(traj)?;
            let gp = g.and_then(|g| g.leading_part().ok());
            let rep = secant_analysis(t, gp.as_ref(), p.secant_tol).map_err(numerical)?;
            plot_secant(ctx, t)?;
            let mut v = to_value(&rep);
            if let Value::Object(m) = &mut v {
                // the full arclength series stays in the plot data only
                m.remove("tail_arclength");
                m.remove("sigma_ratio");
            }
            v
        }
        Analysis::Classify => {
            let t = need_traj(traj)?;
            let sys = match (sc.kind, sc.heavyball.as_ref(), g) {
                (Kind::Heavyball, Some(hb), Some(g)) => {
                    let zero = vec![0.0; g.dim()];
                    let a = -g.hessian(&zero).map_err(numerical)?;
                    Some(vectorize(&a, hb.m).map_err(numerical)?)
                }
                _ => None,
            };
            let class = classify_decay(t, sys.as_ref());
            let mut v = json!({ "class": class.name() });
            v["detail"] = to_value(&class);
            if let DecayClass::Slow { fit, .. } = &class {
                v["alpha0"] = json!(fit.alpha0);
            }
            v
        }
        Analysis::Gstar => {
            let t = need_traj(traj)?;
            let fit = fit_rate(t, p.candidates.as_deref()).map_err(numerical)?;
            let rep = monitor_gstar(t, fit.ell_star, p.omega, None, None);
            let series: Vec<(f64, f64)> = rep.t.iter().cloned().zip(rep.gstar.iter().cloned()).collect();
            let h: Vec<(f64, f64)> = rep.t.iter().cloned().zip(rep.h.iter().map(|v| v.abs())).collect();
            ctx.plot("gstar.svg", "G* along the trajectory", "t", "G*", Axes { log_x: true, log_y: false }, &[Series { label: "G*", points: series }])?;
            ctx.plot("control.svg", "control function |h(t)|", "t", "|h|", Axes { log_x: true, log_y: true }, &[Series { label: "|h|", points: h }])?;
            json!({
                "alpha0": rep.alpha0,
                "burn_in_until": rep.burn_in_until,
                "monotone_violations": rep.monotone_violations,
                "max_increase": rep.max_increase,
                "final_gstar": rep.gstar.last(),
            })
        }
        Analysis::Exponents => {
            let g = need_pot(g)?;
            let sampling = crate::asymptotics::ExponentSampling { seed: sc.seed, ..p.exponents.clone() };
            to_value(&characteristic_exponents(g, &sampling).map_err(numerical)?)
        }
        Analysis::CriticalPoints => {
            let g = need_pot(g)?;
            let gp = g.leading_part().map_err(numerical)?;
            to_value(&critical_points(&gp, p.critical_starts, 1e-9, sc.seed).map_err(numerical)?)
        }
        Analysis::AdamsSimon => {
            let g = need_pot(g)?;
            let gp = g.leading_part().map_err(numerical)?;
            let mode = match sc.heavyball.as_ref() {
                Some(hb) => AdamsSimonMode::Elliptic { m: hb.m },
                None => AdamsSimonMode::Parabolic,
            };
            let v: AdamsSimonVerdict = adams_simon(&gp, mode).map_err(numerical)?;
            to_value(&v)
        }
        Analysis::A1a2 => {
            let t = need_traj(traj)?;
            let g = need_pot(g)?;
            to_value(&verify_a1_a2(t, g, p.rho, p.n_pow).map_err(numerical)?)
        }
        Analysis::Mz => {
            let (t, xp, x0, xm) = if let Some(run) = pde {
                let o = &run.observables;
                (
                    o.iter().map(|o| o.t).collect::<Vec<_>>(),
                    o.iter().map(|o| o.xplus).collect::<Vec<_>>(),
                    o.iter().map(|o| o.xzero).collect::<Vec<_>>(),
                    o.iter().map(|o| o.xminus).collect::<Vec<_>>(),
                )
            } else {
                let path = sc
                    .analyze
                    .as_ref()
                    .and_then(|a| a.series.as_ref())
                    .ok_or_else(|| RunnerError::Config("mz needs a pde run or analyze.series".into()))?;
                read_series(&resolve(&sc.base_dir, path))?
            };
            let v = mz_trichotomy(&t, &xp, &x0, &xm, p.mz_b).map_err(numerical)?;
            json!({ "verdict": v.name(), "detail": to_value(&v) })
        }
    })
}

/// Reads `t, Xplus, Xzero, Xminus` columns (by header name) from a CSV file.
pub fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let cfg = |e: String| RunnerError::Config(format!("{}: {e}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| cfg(e.to_string()))?;
    let headers = rd.headers().map_err(|e| cfg(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name).ok_or_else(|| cfg(format!("missing column '{name}'")));
    let idx = [col("t")?, col("Xplus")?, col("Xzero")?, col("Xminus")?];
    let mut out: [Vec<f64>; 4] = Default::default();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| cfg(e.to_string()))?;
        for (k, &i) in idx.iter().enumerate() {
            let v: f64 = rec.get(i).unwrap_or("").trim().parse().map_err(|_| cfg(format!("row {}: bad number in column {}", line + 2, i + 1)))?;
            out[k].push(v);
        }
    }
    let [a, b, c, d] = out;
    Ok((a, b, c, d))
}

fn plot_norm(ctx: &mut Ctx, t: &Trajectory, fit: Option<&RateFit>) -> Result<()> {
    let pts: Vec<(f64, f64)> = t.samples().iter().map(|s| (s.t, norm(&s.y))).collect();
    let mut series = vec![Series { label: "|y(t)|", points: pts }];
    if let Some(f) = fit {
        if f.ell_star > 2.0 && f.alpha0 > 0.0 {
            let l = f.ell_star;
            let pred: Vec<(f64, f64)> = t
                .samples()
                .iter()
                .filter(|s| s.t > 0.0)
                .map(|s| (s.t, (f.alpha0 * l * (l - 2.0) * (s.t + f.time_shift)).powf(-1.0 / (l - 2.0))))
                .filter(|p| p.1.is_finite())
                .collect();
            series.push(Series { label: "fitted rate", points: pred });
        }
    }
    ctx.plot("norm.svg", "norm decay", "t", "|y|", Axes { log_x: true, log_y: true }, &series)
}

fn plot_secant(ctx: &mut Ctx, t: &Trajectory) -> Result<()> {
    let n = t.dim().min(6);
    let labels: Vec<String> = (1..=n).map(|i| format!("theta_{i}")).collect();
    let series: Vec<Series> = (0..n)
        .map(|i| Series {
            label: &labels[i],
            points: t.samples().iter().map(|s| (s.t, s.y[i] / norm(&s.y))).collect(),
        })
        .collect();
    ctx.plot("secant.svg", "secant y/|y|", "t", "component", Axes { log_x: true, log_y: false }, &series)
}

fn plot_pde(ctx: &mut Ctx, o: &[Observables]) -> Result<()> {
    let s: Vec<(f64, f64)> = o.iter().map(|o| (o.t, o.t.sqrt() * o.norm_l2)).collect();
    ctx.plot("sqrt_t_norm.svg", "sqrt(t) ||u(t)||", "t", "sqrt(t) ||u||", Axes { log_x: true, log_y: false }, &[Series { label: "sqrt(t)||u||", points: s }])?;
    let m = |f: fn(&Observables) -> f64| o.iter().map(|x| (x.t, f(x))).collect::<Vec<_>>();
    ctx.plot(
        "modes.svg",
        "mode amplitudes",
        "t",
        "amplitude",
        Axes { log_x: true, log_y: true },
        &[
            Series { label: "X+", points: m(|x| x.xplus) },
            Series { label: "X0", points: m(|x| x.xzero) },
            Series { label: "X-", points: m(|x| x.xminus) },
        ],
    )
}

fn evaluate_checks(c: &Checks, r: &Map<String, Value>) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let num = |path: &[&str]| -> Option<f64> {
        let mut v = r.get(path[0])?;
        for k in &path[1..] {
            v = v.get(k)?;
        }
        v.as_f64()
    };
    let string = |path: &[&str]| -> Option<String> {
        let mut v = r.get(path[0])?;
        for k in &path[1..] {
            v = v.get(k)?;
        }
        v.as_str().map(str::to_string)
    };
    let mut push = |name: &str, got: Option<String>, passed: bool, want: String| {
        out.push(CheckResult {
            name: name.into(),
            passed,
            detail: format!("expected {want}, got {}", got.unwrap_or_else(|| "nothing".into())),
        });
    };
    if let Some(l) = c.ell_star {
        let got = num(&["rate", "ell_star"]);
        push("ell_star", got.map(|v| format!("{v:?}")), got == Some(l), format!("{l:?}"));
    }
    if let Some(t) = c.alpha0 {
        let got = num(&["rate", "alpha0"]);
        push("alpha0", got.map(|v| format!("{v:?}")), got.is_some_and(|v| t.accepts(v)), format!("{:?} (rel {:?})", t.value, t.rel_tol));
    }
    if let Some(d) = &c.secant_direction {
        let got: Option<Vec<f64>> = r.get("secant").and_then(|s| s.get("theta_star")).and_then(|v| serde_json::from_value(v.clone()).ok());
        let ok = got.as_ref().is_some_and(|g| {
            g.len() == d.direction.len() && g.iter().zip(&d.direction).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= d.tol
        });
        push("secant_direction", got.map(|g| format!("{g:?}")), ok, format!("{:?} (tol {:?})", d.direction, d.tol));
    }
    if let Some(want) = &c.decay_class {
        let got = string(&["classify", "class"]);
        push("decay_class", got.clone(), got.as_deref() == Some(want), want.clone());
    }
    if let Some(t) = c.sqrt_t_norm {
        let got = num(&["pde", "sqrt_t_norm"]);
        push("sqrt_t_norm", got.map(|v| format!("{v:?}")), got.is_some_and(|v| t.accepts(v)), format!("{:?} (rel {:?})", t.value, t.rel_tol));
    }
    if let Some(p) = c.order_p {
        let got = r.get("reduce").and_then(|v| v.get("p")).and_then(|v| v.as_u64());
        push("order_p", got.map(|v| v.to_string()), got == Some(p as u64), p.to_string());
    }
    if let Some(t) = c.leading_coefficient {
        let got = r.get("reduce").and_then(|rep| {
            let p = rep.get("p")?.as_u64()? as u32;
            let coeffs: Vec<(Vec<u32>, f64)> = serde_json::from_value(rep.get("coefficients")?.clone()).ok()?;
            coeffs.into_iter().find(|(e, _)| e.first() == Some(&p) && e.iter().sum::<u32>() == p).map(|c| c.1)
        });
        push("leading_coefficient", got.map(|v| format!("{v:?}")), got.is_some_and(|v| t.accepts(v)), format!("{:?} (rel {:?})", t.value, t.rel_tol));
    }
    if let Some(want) = &c.adams_simon {
        let got = r.get("adams_simon").map(|v| match v {
            Value::String(s) => s.clone(),
            Value::Object(m) => m.keys().next().cloned().unwrap_or_default(),
            _ => String::new(),
        });
        push("adams_simon", got.clone(), got.as_deref() == Some(want), want.clone());
    }
    if let Some(want) = &c.mz_verdict {
        let got = string(&["mz", "verdict"]);
        push("mz_verdict", got.clone(), got.as_deref() == Some(want), want.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_potential_file_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
kind = "gradient"
[potential]
file = "nope.json"
[initial]
y0 = [0.1, 0.0]
t_end = 10.0
"#;
        let err = Scenario::from_toml_str(text, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("potential.file"));
    }

    #[test]
    fn unknown_field_reports_location() {
        let err = Scenario::from_toml_str("kind = \"pde\"\n[pde]\namplitud = 0.1\n", ".").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("amplitud") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn gradient_run_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
kind = "gradient"
name = "radial"
[potential]
builtin = "radial"
dim = 2
degree = 4
coef = 0.25
[initial]
y0 = [0.03, 0.04]
t0 = 1.0
t_end = 1e5
[checks]
ell_star = 4.0
alpha0 = { value = 0.25, rel_tol = 0.02 }
decay_class = "Slow"
"#;
        let sc = Scenario::from_toml_str(text, dir.path()).unwrap();
        let a = run(&sc, Some(&dir.path().join("a"))).unwrap();
        run(&sc, Some(&dir.path().join("b"))).unwrap();
        assert!(a.passed(), "{:?}", a.checks);
        for f in ["trajectory.csv", "analysis.json", "norm.svg"] {
            assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
        }
        let json = fs::read_to_string(dir.path().join("a/analysis.json")).unwrap();
        assert!(json.contains(&sc.config_hash()));
    }

    #[test]
    fn failing_check_gives_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
kind = "reduce"
[reduce]
k_max = 16
[checks]
order_p = 6
"#;
        let sc = Scenario::from_toml_str(text, dir.path()).unwrap();
        let out = run(&sc, Some(dir.path())).unwrap();
        assert_eq!(out.exit_code(), 1);
        assert!(dir.path().join("reduce.json").is_file());
    }
}
