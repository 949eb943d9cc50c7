use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{snap_rational, AsymptoticsError, Result};
use crate::potential::{norm, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    pub epsilon: f64,
    pub r: f64,
    pub omega: f64,
    pub q: f64,
}

impl RegionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.r > 0.0 && self.q > 0.0 && self.omega > 0.0 && self.omega <= 0.25) {
            return Err(AsymptoticsError::Invalid(format!(
                "region parameters need eps, r, q > 0 and omega in (0, 1/4]: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMembership {
    pub in_w: bool,
    pub in_w4: bool,
}

/// Membership of `y` in `W(eps, r)` and in `W(eps, r, omega, q)`.
pub fn region_membership(g: &Potential, y: &[f64], params: &RegionParams) -> Result<RegionMembership> {
    params.validate()?;
    let r = norm(y);
    if r == 0.0 {
        return Err(AsymptoticsError::Invalid("region membership needs y != 0".into()));
    }
    let gv = g.eval(y)?;
    let dr = g.radial_derivative(y)?;
    let tang = norm(&g.spherical_gradient(y)?);
    let in_w = r <= params.r && gv != 0.0 && params.epsilon * tang <= dr.abs();
    let in_w4 = in_w && dr != 0.0 && (1.0 - params.q * gv / (r * dr)).abs() <= 0.5 * r.powf(2.0 * params.omega);
    Ok(RegionMembership { in_w, in_w4 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExponentSampling {
    pub r: f64,
    pub epsilon: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Radii are drawn log-uniformly from `[r 10^-decades, r]`.
    pub decades: f64,
    /// When set, each point is also tested for membership in `W(eps, r, omega, q)`.
    pub omega: Option<f64>,
}

impl Default for ExponentSampling {
    fn default() -> Self {
        ExponentSampling {
            r: 0.005,
            epsilon: 1.0,
            n_samples: 20_000,
            seed: 0,
            decades: 2.0,
            omega: Some(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    /// Snapped rational value (equal to `q_raw` when no rational fits).
    pub q: f64,
    pub numer: Option<i64>,
    pub denom: Option<u32>,
    /// Median of `|y| d_r g / g` over the cluster.
    pub q_raw: f64,
    pub support_fraction: f64,
    pub count: usize,
    /// Share of the cluster lying in `W(eps, r, omega, q)`.
    pub in_w4_fraction: Option<f64>,
    /// Number of cluster points that also lie in `W(eps, r, omega, q')` for another exponent `q'`.
    pub overlap_count: Option<usize>,
}

/// Samples `W(eps, r)` and clusters `q(y) = |y| d_r g(y) / g(y)`.
pub fn characteristic_exponents(g: &Potential, sampling: &ExponentSampling) -> Result<Vec<Exponent>> {
    if !(sampling.r > 0.0 && sampling.epsilon > 0.0 && sampling.decades >= 0.0) {
        return Err(AsymptoticsError::Invalid("sampling needs r, eps > 0".into()));
    }
    let n = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut pts: Vec<(f64, Vec<f64>)> = Vec::new();
    for _ in 0..sampling.n_samples {
        let mut w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let wn = norm(&w);
        if wn == 0.0 {
            continue;
        }
        let rad = sampling.r * 10f64.powf(-sampling.decades * rng.random::<f64>());
        w.iter_mut().for_each(|x| *x *= rad / wn);
        let gv = g.eval(&w)?;
        let dr = g.radial_derivative(&w)?;
        let tang = norm(&g.spherical_gradient(&w)?);
        if gv != 0.0 && sampling.epsilon * tang <= dr.abs() {
            pts.push((rad * dr / gv, w));
        }
    }
    if pts.is_empty() {
        return Err(AsymptoticsError::EmptyRegion);
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = pts.len();

    // split at gaps larger than 5% of the local value
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..total {
        if pts[k].0 - pts[k - 1].0 > 0.05 * pts[k].0.abs().max(1e-12) {
            clusters.push(Vec::new());
        }
        clusters.last_mut().expect("non-empty").push(k);
    }

    let mut out: Vec<Exponent> = clusters
        .iter()
        .map(|c| {
            let q_raw = pts[c[c.len() / 2]].0;
            let snapped = snap_rational(q_raw, 64, 0.02);
            Exponent {
                q: snapped.map(|(p, d)| p as f64 / d as f64).unwrap_or(q_raw),
                numer: snapped.map(|s| s.0),
                denom: snapped.map(|s| s.1),
                q_raw,
                support_fraction: c.len() as f64 / total as f64,
                count: c.len(),
                in_w4_fraction: None,
                overlap_count: None,
            }
        })
        .collect();

    if let Some(omega) = sampling.omega {
        let qs: Vec<f64> = out.iter().map(|e| e.q).collect();
        for (e, c) in out.iter_mut().zip(&clusters) {
            let mut inside = 0;
            let mut overlap = 0;
            for &k in c {
                let y = &pts[k].1;
                let member = |q: f64| {
                    region_membership(g, y, &RegionParams { epsilon: sampling.epsilon, r: sampling.r, omega, q })
                        .map(|m| m.in_w4)
                        .unwrap_or(false)
                };
                if member(e.q) {
                    inside += 1;
                }
                if qs.iter().filter(|&&q| q != e.q).any(|&q| member(q)) {
                    overlap += 1;
                }
            }
            e.in_w4_fraction = Some(inside as f64 / c.len() as f64);
            e.overlap_count = Some(overlap);
        }
    }
    Ok(out)
}
