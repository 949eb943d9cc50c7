use serde::{Deserialize, Serialize};

use super::{line_fit, prescreen, tail_start, AsymptoticsError, Regime, Result};
use crate::flow::Trajectory;
use crate::potential::norm;

/// Algebraic decay rate: `|y(t)|^(2 - ell_star) ~ alpha0 ell_star (ell_star - 2) t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Snapped to a candidate when within 1%, otherwise equal to `ell_raw`.
    pub ell_star: f64,
    pub ell_raw: f64,
    pub snapped: bool,
    pub alpha0: f64,
    pub fit_window: (f64, f64),
    /// `max |kappa(t) / (t + tau) - 1|` over the window.
    pub residual: f64,
    /// Fitted time shift `tau` of `kappa(t) ~ t + tau`.
    pub time_shift: f64,
    /// `kappa(t_hi) / t_hi - 1`.
    pub kappa_ratio_end: f64,
    pub method: String,
}

#[derive(Debug, Clone)]
pub struct RateOptions {
    /// Candidate values of `ell_star`; defaults to the integers 3..=12.
    pub candidates: Option<Vec<f64>>,
    /// Decades of `t` at the end of the trajectory used for the fit.
    pub window_decades: f64,
    /// Relative tolerance for snapping to a candidate.
    pub snap_tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            candidates: None,
            window_decades: 2.0,
            snap_tol: 0.01,
        }
    }
}

pub fn fit_rate(traj: &Trajectory, candidates: Option<&[f64]>) -> Result<RateFit> {
    fit_rate_with(
        traj,
        &RateOptions {
            candidates: candidates.map(|c| c.to_vec()),
            ..RateOptions::default()
        },
    )
}

/// Relative RMS misfit of `|y|^(-u^-1)` (i.e. `ell = 2 + 1/u`) to an affine
/// function of `t`, plus the fitted slope and intercept.
fn affinity(t: &[f64], r: &[f64], ell: f64) -> (f64, f64, f64) {
    let z: Vec<f64> = r.iter().map(|x| x.powf(2.0 - ell)).collect();
    // weighted least squares with weights 1/z (relative residuals)
    let zt: Vec<f64> = t.iter().zip(&z).map(|(a, b)| a / b).collect();
    let one: Vec<f64> = z.iter().map(|b| 1.0 / b).collect();
    let target = vec![1.0; z.len()];
    let (c, res) = super::lstsq(&[one, zt], &target).expect("non-empty window");
    let rms = (res.iter().map(|e| e * e).sum::<f64>() / res.len() as f64).sqrt();
    (rms, c[1], c[0])
}

pub fn fit_rate_with(traj: &Trajectory, opts: &RateOptions) -> Result<RateFit> {
    let pre = prescreen(traj);
    match pre.regime {
        Regime::Exponential | Regime::Oscillatory => {
            return Err(AsymptoticsError::ExponentialTail { ratio: pre.rate_ratio })
        }
        Regime::NotDecaying => return Err(AsymptoticsError::NotDecaying),
        _ => {}
    }
    let t_end = traj.last().t;
    let t_lo = t_end / 10f64.powf(opts.window_decades);
    let t_first = traj.samples().iter().map(|s| s.t).find(|&t| t > 0.0).unwrap_or(t_end);
    if t_first > t_lo * (1.0 + 1e-9) {
        return Err(AsymptoticsError::InsufficientWindow {
            needed: opts.window_decades,
            have: (t_end / t_first).log10(),
        });
    }
    let i0 = tail_start(traj, t_lo * (1.0 - 1e-12));
    let tail = &traj.samples()[i0..];
    let t: Vec<f64> = tail.iter().map(|s| s.t).collect();
    let r: Vec<f64> = tail.iter().map(|s| norm(&s.y)).collect();
    if r.iter().any(|&x| !(x > 0.0)) || r.last() >= r.first() {
        return Err(AsymptoticsError::NotDecaying);
    }
    let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let lr: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let (slope, _) = line_fit(&lt, &lr).ok_or(AsymptoticsError::NotDecaying)?;
    if !(slope < 0.0) {
        return Err(AsymptoticsError::NotDecaying);
    }
    // u = 1/(ell - 2) is the decay exponent; refine it around the log-log slope
    let u0 = -slope;
    let obj = |u: f64| affinity(&t, &r, 2.0 + 1.0 / u).0;
    let (mut lo, mut hi) = (u0 / 2.0, u0 * 2.0);
    let grid = 60;
    let mut best = (f64::INFINITY, u0);
    for k in 0..=grid {
        let u = lo * (hi / lo).powf(k as f64 / grid as f64);
        let v = obj(u);
        if v < best.0 {
            best = (v, u);
        }
    }
    let step = (hi / lo).powf(1.0 / grid as f64);
    lo = best.1 / step;
    hi = best.1 * step;
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    for _ in 0..100 {
        if (b - a).abs() <= 1e-12 * best.1 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = obj(d);
        }
    }
    let u_star = 0.5 * (a + b);
    let ell_raw = 2.0 + 1.0 / u_star;
    let cands: Vec<f64> = opts
        .candidates
        .clone()
        .unwrap_or_else(|| (3..=12).map(|k| k as f64).collect());
    let snapped_to = cands
        .iter()
        .filter(|c| **c > 2.0 && ((ell_raw - **c) / **c).abs() <= opts.snap_tol)
        .min_by(|x, y| (ell_raw - **x).abs().total_cmp(&(ell_raw - **y).abs()))
        .copied();
    let ell = snapped_to.unwrap_or(ell_raw);
    let (_, sl, ic) = affinity(&t, &r, ell);
    if !(sl > 0.0) {
        return Err(AsymptoticsError::NotDecaying);
    }
    let alpha0 = sl / (ell * (ell - 2.0));
    let tau = ic / sl;
    let kappa = |i: usize| r[i].powf(2.0 - ell) / (alpha0 * ell * (ell - 2.0));
    let residual = (0..t.len())
        .map(|i| (kappa(i) / (t[i] + tau) - 1.0).abs())
        .fold(0.0, f64::max);
    let last = t.len() - 1;
    Ok(RateFit {
        ell_star: ell,
        ell_raw,
        snapped: snapped_to.is_some(),
        alpha0,
        fit_window: (t[0], t[last]),
        residual,
        time_shift: tau,
        kappa_ratio_end: kappa(last) / t[last] - 1.0,
        method: format!(
            "affine fit of |y|^(2-l) against t over the last {} decades; l refined by golden section from the log-log slope",
            opts.window_decades
        ),
    })
}
