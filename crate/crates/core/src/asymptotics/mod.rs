//! Asymptotic invariants extracted from trajectories.

mod a1a2;
mod classify;
mod gstar;
mod mz;
mod rate;
mod region;
mod secant;

pub use a1a2::{verify_a1_a2, A1A2Report};
pub use classify::{classify_decay, DecayClass};
pub use gstar::{monitor_gstar, GStarReport};
pub use mz::{mz_trichotomy, MzVerdict};
pub use rate::{fit_rate, fit_rate_with, RateFit, RateOptions};
pub use region::{characteristic_exponents, region_membership, Exponent, ExponentSampling, RegionMembership, RegionParams};
pub use secant::{secant_analysis, SecantReport};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::flow::{FlowError, Trajectory};
use crate::potential::PotentialError;

#[derive(Error, Debug)]
pub enum AsymptoticsError {
    #[error("tail decays exponentially (late/early log-rate ratio {ratio:.3}); use classify_decay")]
    ExponentialTail { ratio: f64 },
    #[error("need {needed} decades of decay in the fit window, have {have:.2}")]
    InsufficientWindow { needed: f64, have: f64 },
    #[error("trajectory does not decay on its tail")]
    NotDecaying,
    #[error("secant does not converge (tail oscillation {oscillation:.3e})")]
    NonConvergentSecant { oscillation: f64 },
    #[error("no sampled point lies in the region W(eps, r)")]
    EmptyRegion,
    #[error("time window too short: {0}")]
    RequiresTail(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

pub type Result<T> = std::result::Result<T, AsymptoticsError>;

/// Least-squares solution of `X c = y` for the given columns.
pub(crate) fn lstsq(cols: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let k = cols.len();
    if n < k || k == 0 {
        return None;
    }
    let x = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
    let rhs = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let c = svd.solve(&rhs, 1e-13 * smax).ok()?;
    let res = &rhs - &x * &c;
    Some((c.iter().cloned().collect(), res.iter().cloned().collect()))
}

/// `(slope, intercept)` of the least-squares line through `(x, y)`.
pub(crate) fn line_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let ones = vec![1.0; x.len()];
    let (c, _) = lstsq(&[ones, x.to_vec()], y)?;
    Some((c[1], c[0]))
}

/// Index range of samples with `t >= t_min`.
pub(crate) fn tail_start(traj: &Trajectory, t_min: f64) -> usize {
    traj.samples().partition_point(|s| s.t < t_min)
}

/// How the tail of a trajectory decays, from average logarithmic decay
/// rates on the early and late halves (in log time) of the last two decades.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Regime {
    Algebraic,
    Exponential,
    Oscillatory,
    NotDecaying,
    Ambiguous,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Prescreen {
    pub regime: Regime,
    pub rate_ratio: f64,
}

pub(crate) fn sign_changes(values: &[f64]) -> usize {
    let mut count = 0;
    let mut last = 0.0f64;
    for &v in values {
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
    }
    count
}

/// Index of the coordinate with the largest magnitude over a set of samples.
pub(crate) fn dominant_component(traj: &Trajectory, from: usize) -> usize {
    let n = traj.dim();
    let mut best = (0, -1.0);
    for i in 0..n {
        let m = traj.samples()[from..].iter().map(|s| s.y[i].abs()).fold(0.0, f64::max);
        if m > best.1 {
            best = (i, m);
        }
    }
    best.0
}

pub(crate) fn prescreen(traj: &Trajectory) -> Prescreen {
    let s = traj.samples();
    let t_end = traj.last().t;
    let t_pos = s.iter().map(|x| x.t).find(|&t| t > 0.0).unwrap_or(t_end);
    let t_lo = (t_end / 100.0).max(t_pos);
    let i0 = tail_start(traj, t_lo);
    let tail = &s[i0..];
    // oscillation: repeated sign changes of the dominant coordinate on the tail
    let dom = dominant_component(traj, i0);
    let vals: Vec<f64> = tail.iter().map(|x| x.y[dom]).collect();
    let changes = sign_changes(&vals);
    if changes >= 3 {
        return Prescreen { regime: Regime::Oscillatory, rate_ratio: f64::NAN };
    }
    if tail.len() < 4 {
        return Prescreen { regime: Regime::Ambiguous, rate_ratio: f64::NAN };
    }
    let t_mid = (t_lo * t_end).sqrt();
    let im = tail.partition_point(|x| x.t < t_mid).clamp(1, tail.len() - 2);
    let lnorm = |x: &crate::flow::Sample| crate::potential::norm(&x.y).ln();
    let (a, b, c) = (&tail[0], &tail[im], &tail[tail.len() - 1]);
    let early = -(lnorm(b) - lnorm(a)) / (b.t - a.t);
    let late = -(lnorm(c) - lnorm(b)) / (c.t - b.t);
    if !(late > 0.0) || !(early > 0.0) || !late.is_finite() {
        return Prescreen { regime: Regime::NotDecaying, rate_ratio: late / early };
    }
    let ratio = late / early;
    let regime = if ratio > 0.5 {
        Regime::Exponential
    } else if ratio < 0.2 {
        Regime::Algebraic
    } else {
        Regime::Ambiguous
    };
    Prescreen { regime, rate_ratio: ratio }
}

/// Simplest rational `p/q` (`q <= max_den`) within relative distance `rel` of `x`.
pub(crate) fn snap_rational(x: f64, max_den: u32, rel: f64) -> Option<(i64, u32)> {
    for q in 1..=max_den {
        let p = (x * q as f64).round();
        let val = p / q as f64;
        if (val - x).abs() <= rel * x.abs().max(1e-300) {
            return Some((p as i64, q));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_snapping() {
        assert_eq!(snap_rational(4.03, 64, 0.02), Some((4, 1)));
        assert_eq!(snap_rational(2.5001, 64, 1e-3), Some((5, 2)));
        assert_eq!(snap_rational(std::f64::consts::PI, 64, 1e-6), None);
    }

    #[test]
    fn regression_helpers() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let (s, c) = line_fit(&x, &y).unwrap();
        assert!((s + 2.0).abs() < 1e-12 && (c - 3.0).abs() < 1e-12);
        assert_eq!(sign_changes(&[1.0, 0.0, -1.0, -2.0, 3.0]), 2);
    }
}
