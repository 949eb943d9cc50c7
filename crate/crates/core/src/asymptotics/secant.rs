use serde::{Deserialize, Serialize};

use super::{tail_start, AsymptoticsError, Result};
use crate::flow::Trajectory;
use crate::potential::{norm, Potential};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecantReport {
    pub theta_star: Vec<f64>,
    /// `max |theta(t) - theta_star|` over the tail window.
    pub oscillation: f64,
    pub tail_window: (f64, f64),
    /// Arclength of `y/|y|` from each sample time to the end.
    pub tail_arclength: Vec<(f64, f64)>,
    /// Arclength of the secant over the tail window.
    pub tail_arclength_total: f64,
    /// `|grad' g_p(theta_star)|` when a homogeneous `g_p` is given.
    pub criticality_residual: Option<f64>,
    pub critical_value: Option<f64>,
    /// `sigma(t) / |y(t)|` where `sigma` is the remaining arclength of `y`
    /// (sampled polygon plus `|y(t_end)|`).
    pub sigma_ratio: Vec<(f64, f64)>,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let r = norm(v);
    v.iter().map(|x| x / r).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Secant limit and arclength diagnostics. The tail is the last two decades
/// of `t` (or the second half of the span for shorter runs); the secant is
/// certified convergent when it moves by less than `tol` there.
pub fn secant_analysis(traj: &Trajectory, gp: Option<&Potential>, tol: f64) -> Result<SecantReport> {
    let s = traj.samples();
    if s.iter().any(|x| norm(&x.y) == 0.0) {
        return Err(AsymptoticsError::Invalid("trajectory reaches y = 0; secant undefined".into()));
    }
    let t_end = traj.last().t;
    let t_first = s[0].t;
    let t_lo = if t_first > 0.0 && t_end / t_first >= 100.0 {
        t_end / 100.0
    } else {
        0.5 * (t_first + t_end)
    };
    let i0 = tail_start(traj, t_lo);
    let theta: Vec<Vec<f64>> = s.iter().map(|x| unit(&x.y)).collect();
    let theta_star = theta.last().expect("non-empty").clone();
    let oscillation = theta[i0..].iter().map(|th| dist(th, &theta_star)).fold(0.0, f64::max);
    if oscillation > tol {
        return Err(AsymptoticsError::NonConvergentSecant { oscillation });
    }

    let n = s.len();
    let mut arc = vec![0.0; n];
    let mut sig = vec![0.0; n];
    sig[n - 1] = norm(&s[n - 1].y);
    for k in (0..n - 1).rev() {
        arc[k] = arc[k + 1] + dist(&theta[k], &theta[k + 1]);
        sig[k] = sig[k + 1] + dist(&s[k].y, &s[k + 1].y);
    }
    let tail_arclength: Vec<(f64, f64)> = s.iter().zip(&arc).map(|(x, a)| (x.t, *a)).collect();
    let sigma_ratio: Vec<(f64, f64)> = s.iter().zip(&sig).map(|(x, v)| (x.t, v / norm(&x.y))).collect();

    let (criticality_residual, critical_value) = match gp {
        Some(gp) => {
            if gp.homogeneous_degree().is_none() {
                return Err(AsymptoticsError::Invalid("criticality check needs a homogeneous g_p".into()));
            }
            let sg = gp.spherical_gradient(&theta_star)?;
            (Some(norm(&sg)), Some(gp.eval(&theta_star)?))
        }
        None => (None, None),
    };
    Ok(SecantReport {
        theta_star,
        oscillation,
        tail_window: (s[i0].t, t_end),
        tail_arclength_total: arc[i0],
        tail_arclength,
        criticality_residual,
        critical_value,
        sigma_ratio,
    })
}
