use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thomlab::flow::Tolerances;
use thomlab::pde::Model;
use thomlab::runner::{
    run, run_sweep, Analysis, AnalyzeSpec, HeavyBall, Initial, Kind, PdeSpec, PotentialSpec, ReduceSpec, RunnerError, Scenario,
};

#[derive(Parser)]
#[command(name = "thomlab", version, about = "Decay rates, limiting directions and reduced dynamics of gradient-like flows")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file; when given, the other options of the subcommand are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep scenario.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "THOMLAB_WORKERS")]
        workers: Option<usize>,
    },
    /// Critical points of the leading part on the unit sphere.
    CriticalPoints {
        #[command(flatten)]
        common: Common,
        /// Potential: JSON file, `bubble_sheet`, or `radial:DIM:DEGREE:COEF`.
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 200)]
        starts: usize,
    },
    /// Integrate a gradient flow and analyse its decay.
    SimulateGradient {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y0: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 1e4)]
        t_end: f64,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
    },
    /// Integrate the heavy-ball equation x'' - m x' - grad f = 0.
    SimulateHeavyball {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        m: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y0: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v0: Vec<f64>,
        #[arg(long, default_value_t = 1e4)]
        t_end: f64,
    },
    /// Fit the algebraic decay rate of a trajectory CSV.
    FitRate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<f64>,
    },
    /// Classify the decay of a trajectory CSV.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Secant limit and arclength of a trajectory CSV.
    Secant {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Characteristic exponents of a potential.
    Exponents {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
    },
    /// Neutral / stable dominance of grouped mode series (t,Xplus,Xzero,Xminus).
    MzCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long, default_value_t = 3.0)]
        b: f64,
    },
    /// Tightest decay and perturbation constants of a trajectory.
    VerifyA1a2 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 4)]
        n: i32,
    },
    /// Simulate u_t = u_xx + u + s u^3 on the circle.
    SimulatePde {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "cubic")]
        model: String,
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta0: f64,
        #[arg(long, default_value_t = 64)]
        k_max: usize,
        #[arg(long, default_value_t = 1e4)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Reduced functional of the model equation and its leading part.
    Reduce {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "cubic")]
        model: String,
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 32)]
        directions: usize,
    },
}

fn potential_spec(arg: Option<String>, scale: Option<f64>) -> Result<PotentialSpec, RunnerError> {
    let arg = arg.ok_or_else(|| RunnerError::Config("--potential is required".into()))?;
    let mut spec = PotentialSpec { scale, ..Default::default() };
    if let Some(rest) = arg.strip_prefix("radial:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let bad = || RunnerError::Config(format!("--potential {arg}: expected radial:DIM:DEGREE:COEF"));
        if parts.len() != 3 {
            return Err(bad());
        }
        spec.builtin = Some("radial".into());
        spec.dim = Some(parts[0].parse().map_err(|_| bad())?);
        spec.degree = Some(parts[1].parse().map_err(|_| bad())?);
        spec.coef = Some(parts[2].parse().map_err(|_| bad())?);
    } else if Path::new(&arg).is_file() {
        spec.file = Some(PathBuf::from(arg).canonicalize().map_err(RunnerError::Io)?);
    } else {
        spec.builtin = Some(arg);
    }
    Ok(spec)
}

fn base(kind: Kind, name: &str, seed: u64) -> Scenario {
    Scenario {
        kind,
        name: name.into(),
        seed,
        out_dir: None,
        potential: None,
        initial: None,
        tolerances: Tolerances::default(),
        error_model: Default::default(),
        heavyball: None,
        pde: None,
        reduce: None,
        analyze: None,
        analyses: Vec::new(),
        params: Default::default(),
        checks: Default::default(),
        sweep: None,
        base_dir: PathBuf::from("."),
    }
}

fn model(s: &str) -> Result<Model, RunnerError> {
    s.parse().map_err(|e: thomlab::pde::PdeError| RunnerError::Config(e.to_string()))
}

fn analyze_traj(name: &str, common: &Common, trajectory: Option<PathBuf>, analyses: Vec<Analysis>) -> Result<Scenario, RunnerError> {
    let trajectory = trajectory.ok_or_else(|| RunnerError::Config("--trajectory is required".into()))?;
    let mut sc = base(Kind::Analyze, name, common.seed);
    sc.analyze = Some(AnalyzeSpec { trajectory: Some(trajectory), series: None });
    sc.analyses = analyses;
    Ok(sc)
}

/// Turns a subcommand into a scenario and its output directory.
fn scenario(cmd: Cmd) -> Result<(Scenario, Option<PathBuf>, bool, Option<usize>), RunnerError> {
    let (common, mut sc) = match cmd {
        Cmd::Run { config, out } => return Ok((Scenario::load(config)?, out, false, None)),
        Cmd::Sweep { config, out, workers } => return Ok((Scenario::load(config)?, out, true, workers)),
        Cmd::CriticalPoints { common, potential, scale, starts } => {
            let mut sc = base(Kind::Analyze, "critical_points", common.seed);
            if common.config.is_none() {
                sc.potential = Some(potential_spec(potential, scale)?);
            }
            sc.analyses = vec![Analysis::CriticalPoints, Analysis::AdamsSimon];
            sc.params.critical_starts = starts;
            (common, sc)
        }
        Cmd::SimulateGradient { common, potential, scale, y0, t0, t_end, rtol, atol } => {
            let mut sc = base(Kind::Gradient, "gradient", common.seed);
            if common.config.is_none() {
                sc.potential = Some(potential_spec(potential, scale)?);
                sc.initial = Some(Initial { y0, v0: None, t0, t_end });
                if let Some(r) = rtol {
                    sc.tolerances.rtol = r;
                }
                if let Some(a) = atol {
                    sc.tolerances.atol = a;
                }
            }
            (common, sc)
        }
        Cmd::SimulateHeavyball { common, potential, scale, m, y0, v0, t_end } => {
            let mut sc = base(Kind::Heavyball, "heavyball", common.seed);
            if common.config.is_none() {
                sc.potential = Some(potential_spec(potential, scale)?);
                let m = m.ok_or_else(|| RunnerError::Config("--m is required".into()))?;
                let v0 = if v0.is_empty() { None } else { Some(v0) };
                sc.initial = Some(Initial { y0, v0, t0: 0.0, t_end });
                sc.heavyball = Some(HeavyBall { m });
            }
            (common, sc)
        }
        Cmd::FitRate { common, trajectory, candidates } => {
            let mut sc = if common.config.is_none() { analyze_traj("fit_rate", &common, trajectory, vec![Analysis::Rate])? } else { base(Kind::Analyze, "fit_rate", 0) };
            if !candidates.is_empty() {
                sc.params.candidates = Some(candidates);
            }
            (common, sc)
        }
        Cmd::Classify { common, trajectory } => {
            let sc = if common.config.is_none() { analyze_traj("classify", &common, trajectory, vec![Analysis::Classify])? } else { base(Kind::Analyze, "", 0) };
            (common, sc)
        }
        Cmd::Secant { common, trajectory, potential, scale, tol } => {
            let mut sc = base(Kind::Analyze, "", 0);
            if common.config.is_none() {
                sc = analyze_traj("secant", &common, trajectory, vec![Analysis::Secant])?;
                if potential.is_some() {
                    sc.potential = Some(potential_spec(potential, scale)?);
                }
                sc.params.secant_tol = tol;
            }
            (common, sc)
        }
        Cmd::Exponents { common, potential, scale, samples } => {
            let mut sc = base(Kind::Analyze, "exponents", common.seed);
            if common.config.is_none() {
                sc.potential = Some(potential_spec(potential, scale)?);
                sc.analyses = vec![Analysis::Exponents];
                sc.params.exponents.n_samples = samples;
            }
            (common, sc)
        }
        Cmd::MzCheck { common, series, b } => {
            let mut sc = base(Kind::Analyze, "mz_check", common.seed);
            if common.config.is_none() {
                let series = series.ok_or_else(|| RunnerError::Config("--series is required".into()))?;
                sc.analyze = Some(AnalyzeSpec { trajectory: None, series: Some(series) });
                sc.analyses = vec![Analysis::Mz];
                sc.params.mz_b = b;
            }
            (common, sc)
        }
        Cmd::VerifyA1a2 { common, trajectory, potential, scale, rho, n } => {
            let mut sc = base(Kind::Analyze, "", 0);
            if common.config.is_none() {
                sc = analyze_traj("verify_a1a2", &common, trajectory, vec![Analysis::A1a2])?;
                sc.potential = Some(potential_spec(potential, scale)?);
                sc.params.rho = rho;
                sc.params.n_pow = n;
            }
            (common, sc)
        }
        Cmd::SimulatePde { common, model: m, amplitude, theta0, k_max, t_end, dt } => {
            let mut sc = base(Kind::Pde, "pde", common.seed);
            sc.pde = Some(PdeSpec { model: model(&m)?, amplitude, theta0, k_max, t_end, dt, ..Default::default() });
            (common, sc)
        }
        Cmd::Reduce { common, model: m, radii, directions } => {
            let mut sc = base(Kind::Reduce, "reduce", common.seed);
            let mut spec = ReduceSpec { model: model(&m)?, directions, ..Default::default() };
            if !radii.is_empty() {
                spec.radii = radii;
            }
            sc.reduce = Some(spec);
            (common, sc)
        }
    };
    if let Some(cfg) = &common.config {
        sc = Scenario::load(cfg)?;
    } else {
        sc.validate()?;
    }
    let out = common.out.clone().or_else(|| Some(PathBuf::from("out").join(&sc.name)));
    Ok((sc, out, false, None))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = scenario(cli.cmd).and_then(|(sc, out, is_sweep, workers)| {
        if is_sweep || sc.kind == Kind::Sweep {
            let rows = run_sweep(&sc, out.as_deref(), workers)?;
            for r in &rows {
                println!("{}\t{}\t{}", r.index, r.value, r.status);
            }
            return Ok(0);
        }
        let outcome = run(&sc, out.as_deref())?;
        let summary = serde_json::json!({
            "name": outcome.name,
            "config_hash": outcome.config_hash,
            "results": outcome.results,
            "checks": outcome.checks,
        });
        println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
        for c in &outcome.checks {
            eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        Ok(outcome.exit_code())
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("thomlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
