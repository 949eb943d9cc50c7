use serde::{Deserialize, Serialize};

use super::tail_start;
use crate::flow::Trajectory;
use crate::potential::norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GStarReport {
    pub t: Vec<f64>,
    /// `g(y) / |y|^ell_star`
    pub gstar: Vec<f64>,
    /// `(G* - alpha0) + |y|^(omega/2)`
    pub h: Vec<f64>,
    pub alpha0: f64,
    pub burn_in_until: f64,
    /// Samples after burn-in where `G* + |y|^omega` increased by more than 1e-10.
    pub monotone_violations: usize,
    pub max_increase: f64,
}

/// Tracks `G*` along a slow-decay trajectory. `burn_in` defaults to the first
/// decade; `alpha0` defaults to the mean of `G*` over the last two decades.
pub fn monitor_gstar(traj: &Trajectory, ell_star: f64, omega_star: f64, alpha0: Option<f64>, burn_in: Option<f64>) -> GStarReport {
    let s = traj.samples();
    let t: Vec<f64> = s.iter().map(|x| x.t).collect();
    let r: Vec<f64> = s.iter().map(|x| norm(&x.y)).collect();
    let gstar: Vec<f64> = s.iter().zip(&r).map(|(x, rr)| x.g / rr.powf(ell_star)).collect();
    let t_end = *t.last().expect("non-empty");
    let alpha0 = alpha0.unwrap_or_else(|| {
        let i = tail_start(traj, t_end / 100.0);
        let tail = &gstar[i..];
        tail.iter().sum::<f64>() / tail.len() as f64
    });
    let h: Vec<f64> = gstar.iter().zip(&r).map(|(g, rr)| (g - alpha0) + rr.powf(omega_star / 2.0)).collect();
    let t_pos = t.iter().cloned().find(|&x| x > 0.0).unwrap_or(t_end);
    let burn = burn_in.unwrap_or(10.0 * t_pos);
    let i0 = tail_start(traj, burn);
    let lyap: Vec<f64> = gstar.iter().zip(&r).map(|(g, rr)| g + rr.powf(omega_star)).collect();
    let mut violations = 0;
    let mut max_increase: f64 = 0.0;
    for k in i0.max(1)..lyap.len() {
        if k <= i0 {
            continue;
        }
        let inc = lyap[k] - lyap[k - 1];
        max_increase = max_increase.max(inc);
        if inc > 1e-10 {
            violations += 1;
        }
    }
    GStarReport {
        t,
        gstar,
        h,
        alpha0,
        burn_in_until: burn,
        monotone_violations: violations,
        max_increase,
    }
}
