//! Dormand–Prince 5(4) with PI step control, plus the long-horizon driver
//! that switches to logarithmic time for t >= 1.

use super::{FlowError, Result, Tolerances};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], ctrl: &Tolerances) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = ctrl.atol + ctrl.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates `y' = f(tau, y)` from `tau0` through each of `targets` (which
/// must be monotone in the direction of integration) and returns the state
/// at every target. `check` runs after each accepted step.
pub(crate) fn dopri<F, K>(
    mut f: F,
    tau0: f64,
    y0: &[f64],
    targets: &[f64],
    ctrl: &Tolerances,
    stats: &mut StepStats,
    mut check: K,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    K: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = y0.len();
    let mut out = Vec::with_capacity(targets.len());
    let Some(&last) = targets.last() else {
        return Ok(out);
    };
    let dir = if last >= tau0 { 1.0 } else { -1.0 };
    let mut tau = tau0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    f(tau, &y, &mut k[0]);

    let mut h = initial_step(&mut f, tau, &y, &k[0], dir, ctrl);
    let mut err_prev: f64 = 1e-4;
    let mut next = 0;
    while next < targets.len() && dir * (targets[next] - tau) <= 0.0 {
        out.push(y.clone());
        next += 1;
    }
    let mut reject_streak = false;
    while next < targets.len() {
        if stats.accepted + stats.rejected >= ctrl.max_steps {
            return Err(FlowError::StiffnessFailure {
                t: tau,
                reason: format!("step budget of {} exhausted", ctrl.max_steps),
            });
        }
        let target = targets[next];
        let proposal = h;
        let mut hit = false;
        if dir * (tau + h - target) >= 0.0 {
            h = target - tau;
            hit = true;
        }
        let hmin = ctrl.h_min_rel * tau.abs().max(1.0);
        if hit && h.abs() < hmin {
            // target within rounding distance: no step needed
            tau = target;
            out.push(y.clone());
            next += 1;
            h = proposal;
            continue;
        }
        if h.abs() < hmin {
            return Err(FlowError::StiffnessFailure {
                t: tau,
                reason: format!("step size {:.3e} underflowed", h.abs()),
            });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            f(tau + C[s] * h, &ytmp, &mut k[s]);
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * k[s][i];
            }
            err[i] = h * e;
        }
        let en = error_norm(&err, &y, &ynew, ctrl);
        if en.is_finite() && en <= 1.0 {
            stats.accepted += 1;
            tau = if hit { target } else { tau + h };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            check(tau, &y)?;
            while next < targets.len() && dir * (targets[next] - tau) <= 0.0 {
                out.push(y.clone());
                next += 1;
            }
            let en = en.max(1e-10);
            let mut fac = 0.9 * en.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            fac = fac.clamp(0.2, 5.0);
            if reject_streak {
                fac = fac.min(1.0);
            }
            reject_streak = false;
            err_prev = en;
            h *= fac;
            if hit {
                // a shortened step says nothing about the attainable size
                h = h.abs().max(proposal.abs().min(h.abs() * 5.0)) * dir;
            }
        } else {
            stats.rejected += 1;
            reject_streak = true;
            let fac = if en.is_finite() {
                (0.9 * en.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            h *= fac;
        }
    }
    Ok(out)
}

fn initial_step<F>(f: &mut F, tau: f64, y: &[f64], f0: &[f64], dir: f64, ctrl: &Tolerances) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    // state-wide scale so that zero components do not force a vanishing first step
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sc: Vec<f64> = y.iter().map(|v| ctrl.atol + ctrl.rtol * v.abs().max(ymax)).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h0 * b).collect();
    let mut f1 = vec![0.0; n];
    f(tau + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    dir * (100.0 * h0).min(h1)
}

/// Geometric sample grid from `t0` to `t_end` with `spd` points per decade on
/// the absolute lattice `10^(j/spd)` (so exact decades are hit), spacing
/// additionally capped by `max_gap`.
pub(crate) fn sample_times(t0: f64, t_end: f64, spd: usize, max_gap: Option<f64>) -> Vec<f64> {
    let spd = spd.max(1) as i64;
    let gap = max_gap.unwrap_or(f64::INFINITY);
    let lattice = |j: i64| {
        if j % spd == 0 {
            format!("1e{}", j / spd).parse::<f64>().expect("valid literal")
        } else {
            10f64.powf(j as f64 / spd as f64)
        }
    };
    let mut ts = vec![t0];
    let mut t = t0;
    loop {
        let mut nx = if t > 0.0 {
            let mut j = (t.log10() * spd as f64).floor() as i64;
            while lattice(j) <= t * (1.0 + 1e-12) {
                j += 1;
            }
            lattice(j).min(t + gap)
        } else {
            t + gap.min(1e-2)
        };
        // avoid a sliver before the end point
        if nx >= t_end || (t_end - nx) < 1e-9 * t_end.abs().max(1.0) {
            nx = t_end;
        }
        ts.push(nx);
        if nx >= t_end {
            break;
        }
        t = nx;
    }
    ts
}

/// Integrates `y' = f(t, y)` forward from `t0` to the sample times `ts`
/// (with `ts[0] == t0`), in linear time below t = 1 and in `s = ln t` above.
pub(crate) fn integrate_long<F, K>(
    mut f: F,
    y0: &[f64],
    ts: &[f64],
    ctrl: &Tolerances,
    stats: &mut StepStats,
    mut check: K,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    K: FnMut(f64, &[f64]) -> Result<()>,
{
    let t0 = ts[0];
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(ts.len());
    let mut y = y0.to_vec();
    let mut t = t0;
    let split = ts.partition_point(|&s| s <= 1.0);
    if t < 1.0 {
        let mut targets: Vec<f64> = ts[..split].to_vec();
        let bridge = split < ts.len();
        if bridge && targets.last() != Some(&1.0) {
            targets.push(1.0);
        }
        let mut res = dopri(&mut f, t0, &y, &targets, ctrl, stats, &mut check)?;
        if bridge && ts[..split].last() != Some(&1.0) {
            y = res.pop().expect("bridge target");
        } else {
            y = res.last().cloned().unwrap_or(y);
        }
        out.extend(res);
        t = 1.0;
    }
    let rest = &ts[out.len()..];
    if !rest.is_empty() {
        let n = y.len();
        let mut buf = vec![0.0; n];
        let g = |s: f64, x: &[f64], d: &mut [f64]| {
            let tt = s.exp();
            f(tt, x, &mut buf);
            for i in 0..n {
                d[i] = tt * buf[i];
            }
        };
        let targets: Vec<f64> = rest.iter().map(|v| v.ln()).collect();
        let res = dopri(g, t.max(t0).ln(), &y, &targets, ctrl, stats, |s, x| check(s.exp(), x))?;
        out.extend(res);
    }
    Ok(out)
}
