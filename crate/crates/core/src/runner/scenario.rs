use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Result, RunnerError};
use crate::asymptotics::ExponentSampling;
use crate::flow::{ErrorModel, Tolerances};
use crate::pde::{Model, Scheme};
use crate::potential::{Potential, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Gradient,
    Heavyball,
    Pde,
    Reduce,
    Analyze,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Rate,
    Secant,
    Classify,
    Gstar,
    Exponents,
    CriticalPoints,
    A1a2,
    Mz,
    AdamsSimon,
}

/// A polynomial potential given inline, by file, or by name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// `bubble_sheet` or `radial` (with `dim`, `degree`, `coef`).
    pub builtin: Option<String>,
    /// JSON file in the potential format.
    pub file: Option<PathBuf>,
    pub terms: Option<Vec<Term>>,
    pub dim: Option<usize>,
    pub degree: Option<u32>,
    pub coef: Option<f64>,
    /// Multiplies the potential.
    pub scale: Option<f64>,
}

impl PotentialSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Potential> {
        let sources = [self.builtin.is_some(), self.file.is_some(), self.terms.is_some()];
        if sources.iter().filter(|b| **b).count() != 1 {
            return Err(RunnerError::Config("potential: set exactly one of builtin, file, terms".into()));
        }
        let g = if let Some(name) = &self.builtin {
            match name.as_str() {
                "bubble_sheet" => Potential::bubble_sheet(),
                "radial" => {
                    let (Some(n), Some(p)) = (self.dim, self.degree) else {
                        return Err(RunnerError::Config("potential.builtin = \"radial\" needs dim and degree".into()));
                    };
                    Potential::radial(n, p, self.coef.unwrap_or(1.0)).map_err(|e| RunnerError::Config(format!("potential: {e}")))?
                }
                other => return Err(RunnerError::Config(format!("potential.builtin: unknown name '{other}'"))),
            }
        } else if let Some(file) = &self.file {
            let path = resolve(base_dir, file);
            Potential::load(&path).map_err(|e| RunnerError::Config(format!("potential.file {}: {e}", path.display())))?
        } else {
            let terms = self.terms.clone().unwrap_or_default();
            let n = self
                .dim
                .or_else(|| terms.first().map(|t| t.exps.len()))
                .ok_or_else(|| RunnerError::Config("potential.terms: empty list needs dim".into()))?;
            Potential::new(n, terms.into_iter().map(|t| (t.exps, t.coef))).map_err(|e| RunnerError::Config(format!("potential.terms: {e}")))?
        };
        Ok(match self.scale {
            Some(c) => {
                let label = format!("{}*{}", c, g.label());
                g.scaled(c).with_label(label)
            }
            None => g,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    pub y0: Vec<f64>,
    pub v0: Option<Vec<f64>>,
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyBall {
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeSpec {
    pub model: Model,
    pub k_max: usize,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    /// Initial data `amplitude cos(x - theta0)` unless `modes` is given.
    pub amplitude: f64,
    pub theta0: f64,
    /// `(k, a_k, b_k)` for `sum a_k cos(kx) + b_k sin(kx)`.
    pub modes: Option<Vec<(usize, f64, f64)>>,
    pub samples_per_decade: usize,
    pub max_sample_gap: Option<f64>,
    pub validity_radius: Option<f64>,
}

impl Default for PdeSpec {
    fn default() -> Self {
        PdeSpec {
            model: Model::Cubic,
            k_max: 64,
            t_end: 1e4,
            dt: 1e-3,
            scheme: Scheme::Etdrk4,
            amplitude: 0.1,
            theta0: 0.0,
            modes: None,
            samples_per_decade: 40,
            max_sample_gap: None,
            validity_radius: Some(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReduceSpec {
    pub model: Model,
    pub k_max: usize,
    pub radii: Vec<f64>,
    pub directions: usize,
    pub max_degree: u32,
}

impl Default for ReduceSpec {
    fn default() -> Self {
        ReduceSpec {
            model: Model::Cubic,
            k_max: 32,
            radii: vec![0.02, 0.04, 0.08, 0.16],
            directions: 32,
            max_degree: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSpec {
    /// Trajectory CSV (with optional `.meta.json` sidecar).
    pub trajectory: Option<PathBuf>,
    /// CSV with columns `t, Xplus, Xzero, Xminus` for the trichotomy check.
    pub series: Option<PathBuf>,
}

/// Tuning of the analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub candidates: Option<Vec<f64>>,
    pub secant_tol: f64,
    pub omega: f64,
    pub rho: f64,
    pub n_pow: i32,
    /// Spectral gap `b` for the trichotomy.
    pub mz_b: f64,
    pub exponents: ExponentSampling,
    pub critical_starts: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            candidates: None,
            secant_tol: 1e-4,
            omega: 0.2,
            rho: 0.5,
            n_pow: 4,
            mz_b: 3.0,
            exponents: ExponentSampling::default(),
            critical_starts: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    pub rel_tol: f64,
}

impl Target {
    pub fn accepts(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.rel_tol * self.value.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionTarget {
    pub direction: Vec<f64>,
    pub tol: f64,
}

/// Acceptance checks evaluated after a run; exit status 1 when any fails.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    pub ell_star: Option<f64>,
    pub alpha0: Option<Target>,
    pub secant_direction: Option<DirectionTarget>,
    pub decay_class: Option<String>,
    pub sqrt_t_norm: Option<Target>,
    pub order_p: Option<u32>,
    /// Coefficient of `x_1^p` in the fitted reduced functional.
    pub leading_coefficient: Option<Target>,
    pub adams_simon: Option<String>,
    pub mz_verdict: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Kind of every run in the grid.
    pub kind: Kind,
    /// Dotted path of the swept field, e.g. `pde.amplitude` or `heavyball.m`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub potential: Option<PotentialSpec>,
    pub initial: Option<Initial>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub error_model: ErrorModel,
    pub heavyball: Option<HeavyBall>,
    pub pde: Option<PdeSpec>,
    pub reduce: Option<ReduceSpec>,
    pub analyze: Option<AnalyzeSpec>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub checks: Checks,
    pub sweep: Option<SweepSpec>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Scenario {
    pub fn from_toml_str(s: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut sc: Scenario = toml::from_str(s).map_err(|e| RunnerError::Config(e.to_string()))?;
        sc.base_dir = base_dir.into();
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base).map_err(|e| match e {
            RunnerError::Config(m) => RunnerError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn default_analyses(&self) -> Vec<Analysis> {
        if !self.analyses.is_empty() {
            return self.analyses.clone();
        }
        match self.kind {
            Kind::Gradient | Kind::Heavyball => vec![Analysis::Rate, Analysis::Secant, Analysis::Classify, Analysis::Gstar],
            Kind::Pde => vec![Analysis::Rate, Analysis::Classify, Analysis::Mz],
            Kind::Reduce => vec![Analysis::AdamsSimon],
            Kind::Analyze | Kind::Sweep => Vec::new(),
        }
    }

    /// Checks required sections and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(RunnerError::Config(format!("kind = \"{}\" requires {what}", kind_name(self.kind)))) };
        match self.kind {
            Kind::Gradient => {
                need(self.potential.is_some(), "a [potential] section")?;
                need(self.initial.is_some(), "an [initial] section")?;
            }
            Kind::Heavyball => {
                need(self.potential.is_some(), "a [potential] section")?;
                need(self.initial.is_some(), "an [initial] section")?;
                need(self.heavyball.is_some(), "a [heavyball] section")?;
            }
            Kind::Pde | Kind::Reduce => {}
            Kind::Analyze => {
                need(self.analyze.is_some() || self.potential.is_some(), "an [analyze] or [potential] section")?;
                need(!self.analyses.is_empty(), "a non-empty analyses list")?;
            }
            Kind::Sweep => {
                let sw = self.sweep.as_ref().ok_or_else(|| RunnerError::Config("kind = \"sweep\" requires a [sweep] section".into()))?;
                if sw.kind == Kind::Sweep {
                    return Err(RunnerError::Config("sweep.kind: nested sweeps are not supported".into()));
                }
            }
        }
        if self.kind != Kind::Sweep && self.sweep.is_some() {
            return Err(RunnerError::Config("[sweep] is only allowed with kind = \"sweep\"".into()));
        }
        if let Some(p) = &self.potential {
            if let Some(f) = &p.file {
                let path = resolve(&self.base_dir, f);
                if !path.is_file() {
                    return Err(RunnerError::Config(format!("potential.file: {} does not exist", path.display())));
                }
            }
            if self.kind != Kind::Sweep {
                p.build(&self.base_dir)?;
            }
        }
        if let Some(a) = &self.analyze {
            for (field, f) in [("analyze.trajectory", &a.trajectory), ("analyze.series", &a.series)] {
                if let Some(f) = f {
                    let path = resolve(&self.base_dir, f);
                    if !path.is_file() {
                        return Err(RunnerError::Config(format!("{field}: {} does not exist", path.display())));
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Gradient => "gradient",
        Kind::Heavyball => "heavyball",
        Kind::Pde => "pde",
        Kind::Reduce => "reduce",
        Kind::Analyze => "analyze",
        Kind::Sweep => "sweep",
    }
}
