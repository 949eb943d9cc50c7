use serde::{Deserialize, Serialize};

use super::{line_fit, tail_start, AsymptoticsError, Result};
use crate::flow::Trajectory;
use crate::potential::{norm, Potential};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1A2Report {
    /// `inf t |y(t)|` over `t >= max(1, t0)`.
    pub d1: f64,
    /// `sup |y(t)| t^alpha2` over the same range.
    pub d2: f64,
    pub alpha2: f64,
    /// `sup |y' + grad g(y)| / (|y|^rho |grad g(y)| + |y|^N)` over the tail.
    pub bn_min: f64,
    pub pass: bool,
}

/// Tightest constants for the decay bounds and the perturbation envelope.
/// Velocities are taken from the trajectory or, when absent, from central
/// differences of the samples.
pub fn verify_a1_a2(traj: &Trajectory, g: &Potential, rho: f64, n_pow: i32) -> Result<A1A2Report> {
    if g.dim() != traj.dim() {
        return Err(AsymptoticsError::Invalid("potential and trajectory dimensions differ".into()));
    }
    let s = traj.samples();
    let t_end = traj.last().t;
    let t_lo = s[0].t.max(1.0);
    if t_end < 10.0 * t_lo {
        return Err(AsymptoticsError::RequiresTail(format!("need at least one decade beyond t = {t_lo}, have t_end = {t_end}")));
    }
    let i0 = tail_start(traj, t_lo);
    let tail = &s[i0..];
    let r: Vec<f64> = tail.iter().map(|x| norm(&x.y)).collect();
    let d1 = tail.iter().zip(&r).map(|(x, rr)| x.t * rr).fold(f64::INFINITY, f64::min);

    let i_env = tail_start(traj, t_end / 10.0);
    let lt: Vec<f64> = s[i_env..].iter().map(|x| x.t.ln()).collect();
    let lr: Vec<f64> = s[i_env..].iter().map(|x| norm(&x.y).ln()).collect();
    let (slope, _) = line_fit(&lt, &lr).ok_or_else(|| AsymptoticsError::RequiresTail("envelope fit failed".into()))?;
    let alpha2 = (-slope).clamp(f64::MIN_POSITIVE, 1.0);
    let d2 = tail.iter().zip(&r).map(|(x, rr)| rr * x.t.powf(alpha2)).fold(0.0, f64::max);

    let mut bn_min: f64 = 0.0;
    for (k, x) in s.iter().enumerate().skip(i0) {
        let v = match &x.v {
            Some(v) => v.clone(),
            None => {
                if k == 0 || k + 1 >= s.len() {
                    continue;
                }
                let (a, b) = (&s[k - 1], &s[k + 1]);
                a.y.iter().zip(&b.y).map(|(p, q)| (q - p) / (b.t - a.t)).collect()
            }
        };
        let gr = g.grad(&x.y)?;
        let err: Vec<f64> = v.iter().zip(&gr).map(|(a, b)| a + b).collect();
        let rr = norm(&x.y);
        let bound = rr.powf(rho) * norm(&gr) + rr.powi(n_pow);
        if bound > 0.0 {
            bn_min = bn_min.max(norm(&err) / bound);
        }
    }
    let pass = d1.is_finite() && d2.is_finite() && alpha2.is_finite() && bn_min.is_finite();
    Ok(A1A2Report { d1, d2, alpha2, bn_min, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_gradient, ErrorModel, Tolerances};

    #[test]
    fn exact_flow_has_no_error() {
        let g = Potential::radial(2, 4, 0.25).unwrap();
        let ctrl = Tolerances { validity_radius: Some(2.0), ..Tolerances::default() };
        let traj = integrate_gradient(&g, &[1.0, 0.0], 0.0, 1e4, &ctrl, &ErrorModel::None).unwrap();
        let rep = verify_a1_a2(&traj, &g, 0.5, 4).unwrap();
        assert!(rep.bn_min <= 1e-8);
        assert!((rep.alpha2 - 0.5).abs() < 0.025);
        assert!(rep.d1 > 0.0 && rep.d1.is_finite() && rep.pass);
    }

    #[test]
    fn half_saturated_error_recovered() {
        let g = Potential::radial(2, 4, 0.25).unwrap();
        let err = ErrorModel::SyntheticA2 { rho: 0.5, n_pow: 4, b_n: 1.0, theta: 0.5, seed: 2 };
        let traj = integrate_gradient(&g, &[0.03, 0.04], 1.0, 1e4, &Tolerances::default(), &err).unwrap();
        let rep = verify_a1_a2(&traj, &g, 0.5, 4).unwrap();
        assert!((0.4..=0.6).contains(&rep.bn_min), "{rep:?}");
    }

    #[test]
    fn short_window_rejected() {
        let traj = Trajectory::from_points((1..5).map(|k| (k as f64, vec![1.0 / k as f64])), "x").unwrap();
        let g = Potential::radial(1, 4, 0.25).unwrap();
        assert!(matches!(verify_a1_a2(&traj, &g, 0.5, 4), Err(AsymptoticsError::RequiresTail(_))));
    }
}
