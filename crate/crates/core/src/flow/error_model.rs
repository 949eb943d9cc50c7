use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FlowError, Result};
use crate::potential::norm;

/// Perturbation added to the gradient flow right-hand side.
///
/// `SyntheticA2` produces `Err(t, y) = theta * b_n * (|y|^rho |grad g| + |y|^N) * d(t)`
/// where `d` is a smooth pseudorandom unit direction field, so the injected error
/// saturates exactly the fraction `theta` of the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ErrorModel {
    None,
    SyntheticA2 {
        rho: f64,
        #[serde(rename = "N")]
        n_pow: i32,
        b_n: f64,
        theta: f64,
        seed: u64,
    },
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel::None
    }
}

const MODES: usize = 6;

/// The direction field `d(t)` of a synthetic error model.
#[derive(Debug, Clone)]
pub(crate) struct DirectionField {
    base: Vec<f64>,
    amp: Vec<[f64; MODES]>,
    freq: Vec<[f64; MODES]>,
    phase: Vec<[f64; MODES]>,
}

impl DirectionField {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut base: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = norm(&base).max(1e-12);
        base.iter_mut().for_each(|b| *b *= 2.0 / r);
        let mut amp = vec![[0.0; MODES]; n];
        let mut freq = vec![[0.0; MODES]; n];
        let mut phase = vec![[0.0; MODES]; n];
        for i in 0..n {
            for k in 0..MODES {
                // sum of |amp| over all entries stays below 1 < |base|
                amp[i][k] = rng.random_range(-1.0..1.0) / (MODES * n) as f64;
                freq[i][k] = rng.random_range(0.2..3.0);
                phase[i][k] = rng.random_range(0.0..std::f64::consts::TAU);
            }
        }
        DirectionField { base, amp, freq, phase }
    }

    fn at(&self, t: f64, out: &mut [f64]) {
        let s = t.abs().ln_1p();
        for (i, o) in out.iter_mut().enumerate() {
            let mut v = self.base[i];
            for k in 0..MODES {
                v += self.amp[i][k] * (self.freq[i][k] * s + self.phase[i][k]).sin();
            }
            *o = v;
        }
        let r = norm(out);
        out.iter_mut().for_each(|o| *o /= r);
    }
}

/// A prepared error model that can be evaluated along a trajectory.
#[derive(Debug, Clone)]
pub(crate) enum Injector {
    None,
    A2 {
        rho: f64,
        n_pow: i32,
        b_n: f64,
        theta: f64,
        field: DirectionField,
    },
}

impl Injector {
    /// The A2 bound `b_N (|y|^rho |grad g| + |y|^N)`; zero when no model is active.
    pub(crate) fn bound(&self, y: &[f64], grad: &[f64]) -> f64 {
        match self {
            Injector::None => 0.0,
            Injector::A2 { rho, n_pow, b_n, .. } => {
                let r = norm(y);
                b_n * (r.powf(*rho) * norm(grad) + r.powi(*n_pow))
            }
        }
    }

    /// Adds the perturbation at `(t, y)` to `out`; returns its norm.
    pub(crate) fn add(&self, t: f64, y: &[f64], grad: &[f64], out: &mut [f64]) -> f64 {
        match self {
            Injector::None => 0.0,
            Injector::A2 { theta, field, .. } => {
                let scale = theta * self.bound(y, grad);
                let mut d = vec![0.0; y.len()];
                field.at(t, &mut d);
                for (o, di) in out.iter_mut().zip(&d) {
                    *o += scale * di;
                }
                scale * norm(&d)
            }
        }
    }
}

impl ErrorModel {
    pub fn describe(&self) -> String {
        match self {
            ErrorModel::None => "none".into(),
            ErrorModel::SyntheticA2 { rho, n_pow, b_n, theta, seed } => {
                format!("synthetic-a2(rho={rho}, N={n_pow}, b_N={b_n}, theta={theta}, seed={seed})")
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ErrorModel::None => None,
            ErrorModel::SyntheticA2 { seed, .. } => Some(*seed),
        }
    }

    pub(crate) fn injector(&self, n: usize) -> Result<Injector> {
        match *self {
            ErrorModel::None => Ok(Injector::None),
            ErrorModel::SyntheticA2 { rho, n_pow, b_n, theta, seed } => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(FlowError::InvalidInput(format!("rho must lie in (0,1), got {rho}")));
                }
                if n_pow < 1 {
                    return Err(FlowError::InvalidInput(format!("N must be >= 1, got {n_pow}")));
                }
                if !(b_n >= 0.0 && b_n.is_finite()) {
                    return Err(FlowError::InvalidInput(format!("b_N must be finite and >= 0, got {b_n}")));
                }
                if !(0.0..=1.0).contains(&theta) {
                    return Err(FlowError::InvalidInput(format!("theta must lie in [0,1], got {theta}")));
                }
                Ok(Injector::A2 {
                    rho,
                    n_pow,
                    b_n,
                    theta,
                    field: DirectionField::new(n, seed),
                })
            }
        }
    }
}
