//! Long-horizon integration of the (perturbed) gradient flow `y' = -grad g(y) + Err`
//! and of the heavy-ball equation `x'' - m x' - grad f(x) = 0`, plus the
//! first-order vectorization of the linearized second-order problem.

mod error_model;
mod linear;
pub(crate) mod ode;
mod trajectory;

pub use error_model::ErrorModel;
pub use linear::{project_coefficients, vectorize, BasisLabel, Coefficients, IndexClass, LinearizedSystem, VectorizeReport};
pub use ode::StepStats;
pub use trajectory::{Sample, Trajectory, TrajectoryMeta};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{norm, Potential, PotentialError};

#[derive(Error, Debug)]
pub enum FlowError {
    #[error("|y| = {norm:.3e} exceeded {limit:.3e} at t = {t:.6e}")]
    BlowUp { t: f64, norm: f64, limit: f64 },
    #[error("trajectory left the validity ball |y| <= {radius} at t = {t:.6e}")]
    OutsideValidityBall { t: f64, radius: f64 },
    #[error("integration failed at t = {t:.6e}: {reason}")]
    StiffnessFailure { t: f64, reason: String },
    #[error("injected error exceeded its bound by factor {ratio} at t = {t:.6e}")]
    ErrorBoundViolated { t: f64, ratio: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("eigen-decomposition failed")]
    EigenFailure,
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// Step control and sampling policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step relative to `max(|t|, 1)`.
    pub h_min_rel: f64,
    pub max_steps: usize,
    pub samples_per_decade: usize,
    /// Caps the spacing of output samples (useful for oscillatory runs).
    pub max_sample_gap: Option<f64>,
    /// Abort once `|y|` exceeds this radius.
    pub validity_radius: Option<f64>,
    /// Abort once `|y| > blowup_factor * |y0|`.
    pub blowup_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-9,
            atol: 1e-12,
            h_min_rel: 1e-14,
            max_steps: 20_000_000,
            samples_per_decade: 40,
            max_sample_gap: None,
            validity_radius: Some(0.5),
            blowup_factor: 10.0,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol >= 0.0) {
            return Err(FlowError::InvalidInput("tolerances must be positive".into()));
        }
        if self.samples_per_decade == 0 {
            return Err(FlowError::InvalidInput("samples_per_decade must be positive".into()));
        }
        if matches!(self.max_sample_gap, Some(g) if !(g > 0.0)) {
            return Err(FlowError::InvalidInput("max_sample_gap must be positive".into()));
        }
        Ok(())
    }

    fn guard(&self, y0_norm: f64) -> impl Fn(f64, &[f64]) -> Result<()> + '_ {
        let limit = if y0_norm > 0.0 { self.blowup_factor * y0_norm } else { f64::INFINITY };
        move |t, y| {
            let r = norm(y);
            if !r.is_finite() || r > limit {
                return Err(FlowError::BlowUp { t, norm: r, limit });
            }
            if let Some(radius) = self.validity_radius {
                if r > radius {
                    return Err(FlowError::OutsideValidityBall { t, radius });
                }
            }
            Ok(())
        }
    }
}

fn check_times(t0: f64, t_end: f64) -> Result<()> {
    if !(t0 >= 0.0 && t_end > t0 && t_end.is_finite()) {
        return Err(FlowError::InvalidInput(format!("need 0 <= t0 < t_end, got t0={t0}, t_end={t_end}")));
    }
    Ok(())
}

/// Integrates `y' = -grad g(y) + Err(t, y)` from `t0` to `t_end`.
///
/// Samples are geometric in `t` and carry `v = y'` (the full right-hand side)
/// and `g(y)`. With an active error model the largest ratio of injected
/// error to its bound is recorded in the metadata.
pub fn integrate_gradient(
    g: &Potential,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    ctrl: &Tolerances,
    err: &ErrorModel,
) -> Result<Trajectory> {
    ctrl.validate()?;
    check_times(t0, t_end)?;
    let n = g.dim();
    if y0.len() != n {
        return Err(FlowError::DimensionMismatch { expected: n, got: y0.len() });
    }
    let inj = err.injector(n)?;
    let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
        let gr = g.grad(y).expect("dimension checked");
        for i in 0..n {
            d[i] = -gr[i];
        }
        inj.add(t, y, &gr, d);
    };
    let guard = ctrl.guard(norm(y0));
    let mut worst: f64 = 0.0;
    let active = !matches!(err, ErrorModel::None);
    let check = |t: f64, y: &[f64]| {
        guard(t, y)?;
        if active {
            let gr = g.grad(y).expect("dimension checked");
            let mut d = vec![0.0; n];
            let e = inj.add(t, y, &gr, &mut d);
            let b = inj.bound(y, &gr);
            let ratio = if b > 0.0 { e / b } else if e > 0.0 { f64::INFINITY } else { 0.0 };
            if ratio > 1.0 + 1e-12 {
                return Err(FlowError::ErrorBoundViolated { t, ratio });
            }
            worst = worst.max(ratio);
        }
        Ok(())
    };
    let ts = ode::sample_times(t0, t_end, ctrl.samples_per_decade, ctrl.max_sample_gap);
    let mut stats = StepStats::default();
    guard(t0, y0)?;
    let ys = ode::integrate_long(rhs, y0, &ts, ctrl, &mut stats, check)?;
    let samples = ts
        .iter()
        .zip(ys)
        .map(|(&t, y)| {
            let mut v = vec![0.0; n];
            rhs(t, &y, &mut v);
            let gv = g.eval(&y).expect("dimension checked");
            Sample { t, y, v: Some(v), g: gv }
        })
        .collect();
    Trajectory::new(
        samples,
        TrajectoryMeta {
            potential: g.label().to_string(),
            integrator: "dopri5(4), log-time for t>=1".into(),
            rtol: ctrl.rtol,
            atol: ctrl.atol,
            error_model: err.describe(),
            seed: err.seed(),
            m: None,
            steps_accepted: stats.accepted,
            steps_rejected: stats.rejected,
            err_bound_ratio: active.then_some(worst),
            config_hash: None,
            version: None,
        },
    )
}

/// Integrates `x'' - m x' - grad f(x) = 0` as the first-order system
/// `(y, v)' = (v, m v + grad f(y))`. The recorded `g` is `f(y)`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_heavy_ball(
    f: &Potential,
    m: f64,
    y0: &[f64],
    v0: &[f64],
    t0: f64,
    t_end: f64,
    ctrl: &Tolerances,
) -> Result<Trajectory> {
    ctrl.validate()?;
    check_times(t0, t_end)?;
    if m == 0.0 || !m.is_finite() {
        return Err(FlowError::InvalidInput(format!("m must be a nonzero real, got {m}")));
    }
    let n = f.dim();
    for len in [y0.len(), v0.len()] {
        if len != n {
            return Err(FlowError::DimensionMismatch { expected: n, got: len });
        }
    }
    let rhs = |_t: f64, z: &[f64], d: &mut [f64]| {
        let (y, v) = z.split_at(n);
        let gr = f.grad(y).expect("dimension checked");
        for i in 0..n {
            d[i] = v[i];
            d[n + i] = m * v[i] + gr[i];
        }
    };
    let guard = ctrl.guard(norm(y0));
    let check = |t: f64, z: &[f64]| guard(t, &z[..n]);
    let ts = ode::sample_times(t0, t_end, ctrl.samples_per_decade, ctrl.max_sample_gap);
    let mut z0 = y0.to_vec();
    z0.extend_from_slice(v0);
    let mut stats = StepStats::default();
    guard(t0, y0)?;
    let zs = ode::integrate_long(rhs, &z0, &ts, ctrl, &mut stats, check)?;
    let samples = ts
        .iter()
        .zip(zs)
        .map(|(&t, z)| {
            let (y, v) = z.split_at(n);
            Sample {
                t,
                y: y.to_vec(),
                v: Some(v.to_vec()),
                g: f.eval(y).expect("dimension checked"),
            }
        })
        .collect();
    Trajectory::new(
        samples,
        TrajectoryMeta {
            potential: f.label().to_string(),
            integrator: "dopri5(4) heavy-ball, log-time for t>=1".into(),
            rtol: ctrl.rtol,
            atol: ctrl.atol,
            error_model: "none".into(),
            m: Some(m),
            steps_accepted: stats.accepted,
            steps_rejected: stats.rejected,
            ..Default::default()
        },
    )
}

/// General-purpose adaptive integration of `y' = f(t, y)` in linear time,
/// forward or backward; returns the states at `times` (monotone, starting
/// on the side of `t0` they are integrated towards).
pub fn integrate_ode<F>(f: F, y0: &[f64], t0: f64, times: &[f64], ctrl: &Tolerances) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    ctrl.validate()?;
    let mut stats = StepStats::default();
    ode::dopri(f, t0, y0, times, ctrl, &mut stats, |t, y| {
        if y.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(FlowError::StiffnessFailure { t, reason: "non-finite state".into() })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::ansatz_solution;

    fn wide() -> Tolerances {
        Tolerances {
            validity_radius: Some(2.0),
            ..Tolerances::default()
        }
    }

    #[test]
    fn radial_quartic_closed_form() {
        let g = Potential::radial(2, 4, 0.25).unwrap();
        let traj = integrate_gradient(&g, &[1.0, 0.0], 0.0, 1e3, &wide(), &ErrorModel::None).unwrap();
        for s in traj.samples() {
            let exact = (1.0 + 2.0 * s.t).powf(-0.5);
            assert!((norm(&s.y) / exact - 1.0).abs() < 1e-6, "t={}", s.t);
        }
        for t in [1.0, 10.0, 1e3] {
            assert!(traj.samples().iter().any(|s| s.t == t));
        }
    }

    #[test]
    fn default_ball_rejects_large_start() {
        let g = Potential::radial(2, 4, 0.25).unwrap();
        let r = integrate_gradient(&g, &[1.0, 0.0], 0.0, 1.0, &Tolerances::default(), &ErrorModel::None);
        assert!(matches!(r, Err(FlowError::OutsideValidityBall { .. })));
    }

    #[test]
    fn blow_up_detected() {
        // y' = y^3 runs away from the origin
        let g = Potential::radial(1, 4, -0.25).unwrap();
        let ctrl = Tolerances { validity_radius: None, ..Tolerances::default() };
        let r = integrate_gradient(&g, &[0.1], 1.0, 1e3, &ctrl, &ErrorModel::None);
        assert!(matches!(r, Err(FlowError::BlowUp { .. })), "{r:?}");
    }

    #[test]
    fn cubic_ansatz_is_followed() {
        let f = Potential::bubble_sheet().scaled(-1.0);
        let w = [-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2, 0.0];
        let y0 = ansatz_solution(&f, &w, 10.0).unwrap();
        let traj = integrate_gradient(&f, &y0, 10.0, 1e4, &Tolerances::default(), &ErrorModel::None).unwrap();
        for s in traj.samples() {
            let x = ansatz_solution(&f, &w, s.t).unwrap();
            let d: Vec<f64> = s.y.iter().zip(&x).map(|(a, b)| a - b).collect();
            assert!(norm(&d) <= 1e-6 * norm(&x));
        }
    }

    #[test]
    fn dissipation_along_samples() {
        let g = Potential::bubble_sheet().scaled(-1.0).add(&Potential::radial(3, 4, 1.0).unwrap()).unwrap();
        let traj = integrate_gradient(&g, &[-0.03, -0.04, 0.0], 1.0, 1e4, &Tolerances::default(), &ErrorModel::None).unwrap();
        for w in traj.samples().windows(2) {
            assert!(w[1].g <= w[0].g + 1e-12);
        }
    }

    #[test]
    fn time_reversal() {
        let g = Potential::bubble_sheet();
        let neg = g.scaled(-1.0);
        let y0 = [0.02, -0.04, 0.03];
        let ctrl = Tolerances { rtol: 1e-12, atol: 1e-15, ..Tolerances::default() };
        let times = [0.25, 0.5, 1.0];
        let fwd = integrate_ode(|_, y, d| {
            let gr = neg.grad(y).unwrap();
            d.iter_mut().zip(gr).for_each(|(a, b)| *a = -b);
        }, &y0, 0.0, &times, &ctrl).unwrap();
        let back_times: Vec<f64> = times.iter().map(|t| -t).collect();
        let bwd = integrate_ode(|_, y, d| {
            let gr = g.grad(y).unwrap();
            d.iter_mut().zip(gr).for_each(|(a, b)| *a = -b);
        }, &y0, 0.0, &back_times, &ctrl).unwrap();
        for (a, b) in fwd.iter().zip(&bwd) {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            assert!(norm(&d) <= 1e-8 * norm(a));
        }
    }

    #[test]
    fn injected_error_respects_bound() {
        let g = Potential::radial(2, 4, 0.25).unwrap();
        let err = ErrorModel::SyntheticA2 { rho: 0.5, n_pow: 4, b_n: 1.0, theta: 1.0, seed: 5 };
        let traj = integrate_gradient(&g, &[0.05, 0.02], 1.0, 1e4, &Tolerances::default(), &err).unwrap();
        let ratio = traj.meta.err_bound_ratio.unwrap();
        assert!(ratio <= 1.0 + 1e-12 && ratio > 0.99);
        let inj = err.injector(2).unwrap();
        for s in traj.samples() {
            let gr = g.grad(&s.y).unwrap();
            let e: Vec<f64> = s.v.as_ref().unwrap().iter().zip(&gr).map(|(v, gi)| v + gi).collect();
            assert!(norm(&e) <= inj.bound(&s.y, &gr) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn heavy_ball_underdamped_closed_form() {
        // f = -x^2/2, m = -1: x'' + x' + x = 0
        let f = Potential::quadratic(&[-1.0]);
        let ctrl = Tolerances { max_sample_gap: Some(0.05), validity_radius: None, ..Tolerances::default() };
        let traj = integrate_heavy_ball(&f, -1.0, &[0.1], &[0.0], 0.0, 30.0, &ctrl).unwrap();
        let w = 3f64.sqrt() / 2.0;
        for s in traj.samples() {
            let exact = 0.1 * (-s.t / 2.0).exp() * ((w * s.t).cos() + (w * s.t).sin() / (2.0 * w));
            assert!((s.y[0] - exact).abs() < 1e-6 * 0.1);
        }
    }

    #[test]
    fn heavy_ball_resonant_closed_form() {
        // f = -x^2/8, m = -1: x'' + x' + x/4 = 0, x = t e^{-t/2}
        let f = Potential::quadratic(&[-0.25]);
        let ctrl = Tolerances { max_sample_gap: Some(0.1), validity_radius: None, blowup_factor: 1e3, ..Tolerances::default() };
        let traj = integrate_heavy_ball(&f, -1.0, &[0.0], &[1.0], 0.0, 40.0, &ctrl).unwrap();
        for s in traj.samples() {
            let exact = s.t * (-s.t / 2.0).exp();
            assert!((s.y[0] - exact).abs() <= 1e-8 * (1.0 + exact), "t={}", s.t);
            let vdot = -s.v.as_ref().unwrap()[0] - 0.25 * s.y[0];
            let vexact = (-s.t / 2.0).exp() * (s.t / 4.0 - 1.0);
            assert!((vdot - vexact).abs() <= 1e-8);
        }
    }

    #[test]
    fn overdamped_limit_improves_with_damping() {
        let f = Potential::radial(2, 4, -0.25).unwrap();
        let y0 = [0.2, 0.1];
        let mut errs = Vec::new();
        for c in [1.0f64, 10.0, 100.0] {
            let m = -c;
            let gf = f.scaled(1.0 / m);
            let v0: Vec<f64> = gf.grad(&y0).unwrap().iter().map(|v| -v).collect();
            let ctrl = Tolerances { samples_per_decade: 20, ..Tolerances::default() };
            let hb = integrate_heavy_ball(&f, m, &y0, &v0, 0.0, 50.0 * c, &ctrl).unwrap();
            let gr = integrate_gradient(&gf, &y0, 0.0, 50.0 * c, &ctrl, &ErrorModel::None).unwrap();
            let sup = hb
                .samples()
                .iter()
                .zip(gr.samples())
                .map(|(a, b)| norm(&a.y.iter().zip(&b.y).map(|(x, y)| x - y).collect::<Vec<_>>()))
                .fold(0.0, f64::max);
            errs.push(sup);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
