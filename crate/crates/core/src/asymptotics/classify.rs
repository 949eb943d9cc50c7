use serde::{Deserialize, Serialize};

use super::rate::{fit_rate_with, RateFit, RateOptions};
use super::{dominant_component, line_fit, lstsq, prescreen, tail_start, Regime};
use crate::flow::{IndexClass, LinearizedSystem, Trajectory};
use crate::potential::norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DecayClass {
    Slow {
        fit: RateFit,
        direction: Vec<f64>,
    },
    FastEigen {
        rate: f64,
        direction: Vec<f64>,
    },
    FastOscillatory {
        envelope_rate: f64,
        frequencies: Vec<f64>,
        /// `beta_i` of the linearized system closest to each frequency.
        matched_beta: Vec<Option<f64>>,
    },
    /// `|y| ~ C t e^{rate t}`.
    FastResonant {
        rate: f64,
        t_power: f64,
    },
    Undetermined {
        diagnostics: Vec<String>,
    },
}

impl DecayClass {
    pub fn name(&self) -> &'static str {
        match self {
            DecayClass::Slow { .. } => "Slow",
            DecayClass::FastEigen { .. } => "FastEigen",
            DecayClass::FastOscillatory { .. } => "FastOscillatory",
            DecayClass::FastResonant { .. } => "FastResonant",
            DecayClass::Undetermined { .. } => "Undetermined",
        }
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let r = norm(v);
    v.iter().map(|x| x / r).collect()
}

/// Zero-crossing times of a sampled signal, refined by quadratic
/// interpolation through three neighbouring samples.
fn zero_crossings(t: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..x.len().saturating_sub(1) {
        if x[k] == 0.0 {
            out.push(t[k]);
            continue;
        }
        if x[k] * x[k + 1] < 0.0 {
            let lin = t[k] - x[k] * (t[k + 1] - t[k]) / (x[k + 1] - x[k]);
            let j = if k + 2 < x.len() { k } else { k.saturating_sub(1) };
            let refined = if j + 2 < x.len() {
                // inverse quadratic interpolation t(x) at x = 0
                let (x0, x1, x2) = (x[j], x[j + 1], x[j + 2]);
                let (t0, t1, t2) = (t[j], t[j + 1], t[j + 2]);
                let d01 = x0 - x1;
                let d02 = x0 - x2;
                let d12 = x1 - x2;
                if d01 != 0.0 && d02 != 0.0 && d12 != 0.0 {
                    let v = t0 * x1 * x2 / (d01 * d02) - t1 * x0 * x2 / (d01 * d12) + t2 * x0 * x1 / (d02 * d12);
                    if v >= t[k] && v <= t[k + 1] {
                        v
                    } else {
                        lin
                    }
                } else {
                    lin
                }
            } else {
                lin
            };
            out.push(refined);
        }
    }
    out
}

/// Classifies the decay of a trajectory.
///
/// Oscillatory tails are detected first (sign changes), then the regime
/// prescreen separates algebraic from exponential decay. Exponential tails
/// are split by regressing `log|y|` on `{1, t, ln t}` over the second half of
/// the time span: a unit `ln t` coefficient signals a resonant root.
pub fn classify_decay(traj: &Trajectory, sys: Option<&LinearizedSystem>) -> DecayClass {
    let mut diagnostics = Vec::new();
    let pre = prescreen(traj);
    let s = traj.samples();
    let t_end = traj.last().t;
    let t_half = 0.5 * (s[0].t + t_end);
    let ih = tail_start(traj, t_half).min(s.len().saturating_sub(3));
    let win = &s[ih..];
    let t: Vec<f64> = win.iter().map(|x| x.t).collect();

    match pre.regime {
        Regime::Oscillatory => {
            let dom = dominant_component(traj, ih);
            let x: Vec<f64> = win.iter().map(|s| s.y[dom]).collect();
            let zc = zero_crossings(&t, &x);
            if zc.len() < 3 {
                diagnostics.push(format!("only {} zero crossings in the fast window", zc.len()));
                return DecayClass::Undetermined { diagnostics };
            }
            let half_period = (zc[zc.len() - 1] - zc[0]) / (zc.len() - 1) as f64;
            let freq = std::f64::consts::PI / half_period;

            let envelope_rate = match (sys, traj.has_velocity()) {
                (Some(sys), true) if sys.dim() == traj.dim() => {
                    // G-norm of q = (u, u' - (m/2)u) decays exactly like e^{(m/2)t} on I1 modes
                    let ln: Vec<f64> = win
                        .iter()
                        .map(|x| {
                            let q = sys.state(&x.y, x.v.as_deref().expect("velocity")).expect("dimension checked");
                            0.5 * sys.g_inner(&q, &q).ln()
                        })
                        .collect();
                    line_fit(&t, &ln).map(|(sl, _)| sl)
                }
                _ => {
                    // peaks of |y_dom| between crossings
                    let mut pt = Vec::new();
                    let mut pv = Vec::new();
                    for k in 1..x.len().saturating_sub(1) {
                        let (a, b, c) = (x[k - 1].abs(), x[k].abs(), x[k + 1].abs());
                        if b >= a && b > c && b > 0.0 {
                            let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
                            let den = la - 2.0 * lb + lc;
                            let off = if den != 0.0 && den.is_finite() { 0.5 * (la - lc) / den } else { 0.0 };
                            let h = t[k + 1] - t[k];
                            pt.push(t[k] + off.clamp(-1.0, 1.0) * h);
                            pv.push(lb - 0.25 * (la - lc) * off);
                        }
                    }
                    if pt.len() >= 2 {
                        line_fit(&pt, &pv).map(|(sl, _)| sl)
                    } else {
                        None
                    }
                }
            };
            let Some(envelope_rate) = envelope_rate else {
                diagnostics.push("could not fit an envelope".into());
                return DecayClass::Undetermined { diagnostics };
            };
            let matched_beta = vec![sys.and_then(|sys| {
                sys.beta
                    .iter()
                    .flatten()
                    .min_by(|a, b| (*a - freq).abs().total_cmp(&(*b - freq).abs()))
                    .copied()
            })];
            DecayClass::FastOscillatory {
                envelope_rate,
                frequencies: vec![freq],
                matched_beta,
            }
        }
        Regime::Algebraic => match fit_rate_with(traj, &RateOptions::default()) {
            Ok(fit) => DecayClass::Slow {
                fit,
                direction: unit(&traj.last().y),
            },
            Err(e) => {
                diagnostics.push(format!("algebraic tail but rate fit failed: {e}"));
                DecayClass::Undetermined { diagnostics }
            }
        },
        Regime::Exponential => {
            let ly: Vec<f64> = win.iter().map(|x| norm(&x.y).ln()).collect();
            if t.len() < 4 || ly.iter().any(|v| !v.is_finite()) {
                diagnostics.push("fast window too short or contains zeros".into());
                return DecayClass::Undetermined { diagnostics };
            }
            let ones = vec![1.0; t.len()];
            let lt: Vec<f64> = t.iter().map(|x| x.max(1e-300).ln()).collect();
            let Some((c, _)) = lstsq(&[ones, t.clone(), lt.clone()], &ly) else {
                diagnostics.push("regression failed".into());
                return DecayClass::Undetermined { diagnostics };
            };
            let k = c[2];
            let resonant_hint = sys.map(|s| !s.indices(IndexClass::I2).is_empty()).unwrap_or(true);
            if (k - 1.0).abs() < 0.1 && resonant_hint {
                let adj: Vec<f64> = ly.iter().zip(&lt).map(|(a, b)| a - b).collect();
                let (rate, _) = line_fit(&t, &adj).expect("non-empty window");
                DecayClass::FastResonant { rate, t_power: k }
            } else if k.abs() < 0.1 {
                let (rate, _) = line_fit(&t, &ly).expect("non-empty window");
                let dirs: Vec<Vec<f64>> = win.iter().map(|x| unit(&x.y)).collect();
                let last = dirs.last().expect("non-empty").clone();
                let osc = dirs[dirs.len() / 2..]
                    .iter()
                    .map(|d| norm(&d.iter().zip(&last).map(|(a, b)| a - b).collect::<Vec<_>>()))
                    .fold(0.0, f64::max);
                if osc > 1e-3 {
                    diagnostics.push(format!("exponential envelope but secant still moves by {osc:.3e}"));
                    return DecayClass::Undetermined { diagnostics };
                }
                DecayClass::FastEigen { rate, direction: last }
            } else {
                diagnostics.push(format!("exponential tail with ln t coefficient {k:.3} (neither 0 nor 1)"));
                DecayClass::Undetermined { diagnostics }
            }
        }
        Regime::NotDecaying => {
            diagnostics.push("norm does not decrease on the tail".into());
            DecayClass::Undetermined { diagnostics }
        }
        Regime::Ambiguous => {
            diagnostics.push(format!(
                "late/early log-rate ratio {:.3} lies between the algebraic (<0.2) and exponential (>0.5) thresholds",
                pre.rate_ratio
            ));
            DecayClass::Undetermined { diagnostics }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::fit_rate;
    use crate::flow::{integrate_gradient, integrate_heavy_ball, vectorize, ErrorModel, Tolerances};
    use crate::potential::Potential;
    use nalgebra::DMatrix;

    fn scalar_run(lambda: f64, m: f64, u0: f64, v0: f64, t_end: f64) -> (Trajectory, LinearizedSystem) {
        let f = Potential::quadratic(&[-lambda]);
        let ctrl = Tolerances {
            atol: 1e-30,
            rtol: 1e-11,
            max_sample_gap: Some(0.05),
            validity_radius: None,
            blowup_factor: 1e6,
            ..Tolerances::default()
        };
        let traj = integrate_heavy_ball(&f, m, &[u0], &[v0], 0.0, t_end, &ctrl).unwrap();
        (traj, vectorize(&DMatrix::from_element(1, 1, lambda), m).unwrap())
    }

    #[test]
    fn scalar_oscillatory() {
        let (traj, sys) = scalar_run(1.0, -1.0, 0.1, 0.0, 60.0);
        match classify_decay(&traj, Some(&sys)) {
            DecayClass::FastOscillatory { envelope_rate, frequencies, matched_beta } => {
                assert!((envelope_rate + 0.5).abs() < 1e-6, "{envelope_rate}");
                assert!((frequencies[0] - 3f64.sqrt() / 2.0).abs() < 1e-4);
                assert_eq!(matched_beta[0], sys.beta[0]);
            }
            c => panic!("{c:?}"),
        }
        // without the system the peak envelope is used
        match classify_decay(&traj, None) {
            DecayClass::FastOscillatory { envelope_rate, .. } => assert!((envelope_rate + 0.5).abs() < 1e-3),
            c => panic!("{c:?}"),
        }
        assert!(fit_rate(&traj, None).is_err());
    }

    #[test]
    fn scalar_resonant() {
        let (traj, sys) = scalar_run(0.25, -1.0, 0.0, 1.0, 100.0);
        match classify_decay(&traj, Some(&sys)) {
            DecayClass::FastResonant { rate, t_power } => {
                assert!((rate + 0.5).abs() < 1e-6, "{rate}");
                assert!((t_power - 1.0).abs() < 1e-3);
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn scalar_eigen() {
        let (traj, sys) = scalar_run(0.16, -1.0, 0.1, 0.0, 100.0);
        match classify_decay(&traj, Some(&sys)) {
            DecayClass::FastEigen { rate, direction } => {
                assert!((rate - sys.gamma_plus[0].re).abs() < 1e-6, "{rate}");
                assert_eq!(direction.len(), 1);
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn slow_gradient_flow() {
        let g = Potential::radial(2, 4, 0.25).unwrap();
        let traj = integrate_gradient(&g, &[0.03, 0.04], 1.0, 1e5, &Tolerances::default(), &ErrorModel::None).unwrap();
        match classify_decay(&traj, None) {
            DecayClass::Slow { fit, direction } => {
                assert_eq!(fit.ell_star, 4.0);
                assert!((direction[0] - 0.6).abs() < 1e-9);
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn zero_crossing_refinement() {
        let t: Vec<f64> = (0..200).map(|k| 0.05 * k as f64).collect();
        let x: Vec<f64> = t.iter().map(|v| (2.0 * v + 0.3).sin()).collect();
        let zc = zero_crossings(&t, &x);
        for (j, z) in zc.iter().enumerate() {
            let exact = ((j + 1) as f64 * std::f64::consts::PI - 0.3) / 2.0;
            assert!((z - exact).abs() < 1e-4, "{z} vs {exact}");
        }
    }
}
