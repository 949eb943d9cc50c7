use serde::{Deserialize, Serialize};

use super::{line_fit, AsymptoticsError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MzVerdict {
    /// `(X+ + X-) / X0 -> 0`.
    Neutral { max_ratio: f64 },
    /// `(X+ + X0) / X- -> 0`; `rate` is the measured exponential rate of the
    /// total, compared with `-(b - eps)`.
    StableDominated { max_ratio: f64, rate: f64, bound_rate: f64, within_bound: bool },
    Violated { neutral_ratio: f64, stable_ratio: f64 },
}

impl MzVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            MzVerdict::Neutral { .. } => "Neutral",
            MzVerdict::StableDominated { .. } => "StableDominated",
            MzVerdict::Violated { .. } => "Violated",
        }
    }
}

const THRESHOLD: f64 = 0.05;

/// Merle–Zaag trichotomy on sampled non-negative series. A ratio counts as
/// tending to zero when it stays below 0.05 over the last decade of `t`
/// (or the second half of the span when it covers less than a decade).
pub fn mz_trichotomy(t: &[f64], xplus: &[f64], xzero: &[f64], xminus: &[f64], b: f64) -> Result<MzVerdict> {
    let n = t.len();
    if xplus.len() != n || xzero.len() != n || xminus.len() != n || n < 3 {
        return Err(AsymptoticsError::Invalid("series must share a time grid of at least 3 points".into()));
    }
    if !(b > 0.0) {
        return Err(AsymptoticsError::Invalid(format!("b must be positive, got {b}")));
    }
    if [xplus, xzero, xminus].iter().any(|s| s.iter().any(|v| !(*v >= 0.0) || !v.is_finite())) {
        return Err(AsymptoticsError::Invalid("series must be finite and non-negative".into()));
    }
    let t_end = t[n - 1];
    let t_lo = if t[0] > 0.0 && t[0] <= t_end / 10.0 { t_end / 10.0 } else { 0.5 * (t[0] + t_end) };
    let i0 = t.partition_point(|&x| x < t_lo).min(n - 2);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    let neutral = (i0..n).map(|k| ratio(xplus[k] + xminus[k], xzero[k])).fold(0.0, f64::max);
    let stable = (i0..n).map(|k| ratio(xplus[k] + xzero[k], xminus[k])).fold(0.0, f64::max);
    if neutral < THRESHOLD {
        return Ok(MzVerdict::Neutral { max_ratio: neutral });
    }
    if stable < THRESHOLD {
        let tt: Vec<f64> = t[i0..].to_vec();
        let ls: Vec<f64> = (i0..n).map(|k| (xplus[k] + xzero[k] + xminus[k]).ln()).collect();
        let rate = line_fit(&tt, &ls).map(|(s, _)| s).unwrap_or(f64::NAN);
        let eps = 0.05 * b;
        let bound_rate = -(b - eps);
        return Ok(MzVerdict::StableDominated {
            max_ratio: stable,
            rate,
            bound_rate,
            within_bound: rate <= bound_rate,
        });
    }
    Ok(MzVerdict::Violated { neutral_ratio: neutral, stable_ratio: stable })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_example() {
        let t: Vec<f64> = (0..200).map(|k| 10f64.powf(k as f64 / 40.0)).collect();
        let x0: Vec<f64> = t.iter().map(|v| 1.0 / v).collect();
        let x2: Vec<f64> = t.iter().map(|v| 1.0 / (v * v)).collect();
        assert!(matches!(mz_trichotomy(&t, &x2, &x0, &x2, 1.0).unwrap(), MzVerdict::Neutral { .. }));
    }

    #[test]
    fn stable_example() {
        let b = 0.7;
        let t: Vec<f64> = (1..=400).map(|k| 0.25 * k as f64).collect();
        let xm: Vec<f64> = t.iter().map(|v| (-b * v).exp()).collect();
        let x2: Vec<f64> = t.iter().map(|v| (-2.0 * b * v).exp()).collect();
        match mz_trichotomy(&t, &x2, &x2, &xm, b).unwrap() {
            MzVerdict::StableDominated { rate, .. } => assert!((rate + b).abs() < 0.05 * b),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn violated_and_invalid() {
        let t: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        let one = vec![1.0; 100];
        assert!(matches!(mz_trichotomy(&t, &one, &one, &one, 1.0).unwrap(), MzVerdict::Violated { .. }));
        assert!(mz_trichotomy(&t, &one, &one, &one[..5], 1.0).is_err());
        assert!(mz_trichotomy(&t, &one, &one, &one, 0.0).is_err());
    }
}
