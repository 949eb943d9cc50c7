//! Critical points of a homogeneous polynomial restricted to the unit sphere,
//! Adams–Simon sign conditions, and the radial ansatz solutions they generate.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{dot, norm, project_tangent, Potential, PotentialError};

#[derive(Error, Debug)]
pub enum CriticalError {
    #[error("expected a homogeneous polynomial of degree >= {min_degree}")]
    NotHomogeneous { min_degree: u32 },
    #[error("critical value {0} is not positive: no forward-decaying ansatz")]
    NonPositiveValue(f64),
    #[error("degree 2 is the exponential regime; the algebraic ansatz needs p >= 3")]
    ExponentialRegime,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

pub type Result<T> = std::result::Result<T, CriticalError>;

/// A critical point `w` of `g_p` restricted to the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub direction: Vec<f64>,
    pub value: f64,
    /// `|grad' g_p(w)|`
    pub residual: f64,
    /// Shared by points lying on one positive-dimensional critical orbit.
    pub orbit_id: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub n_starts: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_newton: usize,
    /// Angular threshold for merging duplicates.
    pub dedup_angle: f64,
    /// Minimum cluster size flagged as an orbit.
    pub orbit_min_points: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_starts: 200,
            tol: 1e-9,
            seed: 0,
            max_newton: 80,
            dedup_angle: 1e-6,
            orbit_min_points: 10,
        }
    }
}

fn homogeneous_degree(gp: &Potential, min_degree: u32) -> Result<u32> {
    match gp.homogeneous_degree() {
        Some(p) if p >= min_degree => Ok(p),
        _ => Err(CriticalError::NotHomogeneous { min_degree }),
    }
}

fn normalize(v: &mut [f64]) {
    let r = norm(v);
    v.iter_mut().for_each(|x| *x /= r);
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    2.0 * (0.5 * d).min(1.0).asin()
}

/// Riemannian gradient of `g_p` on the sphere at a unit vector `w`.
fn sphere_gradient(gp: &Potential, w: &[f64]) -> Vec<f64> {
    let g = gp.grad(w).expect("dimension checked");
    project_tangent(&g, w, 1.0)
}

/// Riemannian Hessian `P (H - <grad g, w> I) P` at a unit vector.
fn sphere_hessian(gp: &Potential, w: &[f64]) -> DMatrix<f64> {
    let n = w.len();
    let wv = DVector::from_column_slice(w);
    let p = DMatrix::identity(n, n) - &wv * wv.transpose();
    let mu = dot(&gp.grad(w).expect("dimension checked"), w);
    let h = gp.hessian(w).expect("dimension checked") - DMatrix::identity(n, n) * mu;
    &p * h * &p
}

fn newton_on_sphere(gp: &Potential, start: &[f64], cfg: &SearchConfig) -> Option<Vec<f64>> {
    let n = start.len();
    let mut w = start.to_vec();
    for _ in 0..cfg.max_newton {
        let s = sphere_gradient(gp, &w);
        if norm(&s) <= cfg.tol {
            return Some(w);
        }
        let wv = DVector::from_column_slice(&w);
        let a = sphere_hessian(gp, &w) + &wv * wv.transpose();
        let rhs = -DVector::from_column_slice(&s);
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let d = svd.solve(&rhs, 1e-12 * smax.max(1e-300)).ok()?;
        let mut step: Vec<f64> = project_tangent(d.as_slice(), &w, 1.0);
        let len = norm(&step);
        if !len.is_finite() {
            return None;
        }
        if len > 0.3 {
            step.iter_mut().for_each(|x| *x *= 0.3 / len);
        }
        for i in 0..n {
            w[i] += step[i];
        }
        normalize(&mut w);
    }
    (norm(&sphere_gradient(gp, &w)) <= cfg.tol).then_some(w)
}

/// Projected gradient descent (sign = 1) or ascent (sign = -1) on the sphere
/// with Armijo backtracking; returns the end point.
fn projected_gradient(gp: &Potential, start: &[f64], sign: f64, iters: usize) -> Vec<f64> {
    let mut w = start.to_vec();
    let mut step = 0.1;
    let val = |w: &[f64]| sign * gp.eval(w).expect("dimension checked");
    for _ in 0..iters {
        let s = sphere_gradient(gp, &w);
        let sn2 = dot(&s, &s);
        if sn2.sqrt() < 1e-6 {
            break;
        }
        let f0 = val(&w);
        loop {
            let mut cand: Vec<f64> = w.iter().zip(&s).map(|(wi, si)| wi - sign * step * si).collect();
            normalize(&mut cand);
            if val(&cand) <= f0 - 1e-4 * step * sn2 || step < 1e-12 {
                w = cand;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
    }
    w
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if norm(&v) > 1e-8 {
            normalize(&mut v);
            return v;
        }
    }
}

/// Multi-start search for critical points of `g_p` on the unit sphere.
///
/// Deterministic for a fixed seed: start `i` draws from its own ChaCha stream
/// and results are sorted before deduplication. An empty list means no start
/// converged.
pub fn critical_points(gp: &Potential, n_starts: usize, tol: f64, seed: u64) -> Result<Vec<CriticalPoint>> {
    critical_points_with(
        gp,
        &SearchConfig {
            n_starts,
            tol,
            seed,
            ..SearchConfig::default()
        },
    )
}

pub fn critical_points_with(gp: &Potential, cfg: &SearchConfig) -> Result<Vec<CriticalPoint>> {
    let p = homogeneous_degree(gp, 2)?;
    let n = gp.dim();
    let found: Vec<Vec<f64>> = (0..cfg.n_starts)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let start = random_unit(&mut rng, n);
            newton_on_sphere(gp, &start, cfg).or_else(|| {
                [1.0, -1.0].iter().find_map(|&sign| {
                    let w = projected_gradient(gp, &start, sign, 2000);
                    newton_on_sphere(gp, &w, cfg)
                })
            })
        })
        .collect();

    let mut pts: Vec<CriticalPoint> = found
        .into_iter()
        .map(|w| {
            let value = gp.eval(&w).expect("dimension checked");
            let residual = norm(&sphere_gradient(gp, &w));
            CriticalPoint {
                direction: w,
                value,
                residual,
                orbit_id: None,
            }
        })
        .collect();
    pts.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| a.direction.iter().zip(&b.direction).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y))))
    });

    let mut unique: Vec<CriticalPoint> = Vec::new();
    for pt in pts {
        match unique
            .iter_mut()
            .find(|u| angle(&u.direction, &pt.direction) < cfg.dedup_angle)
        {
            Some(u) if pt.residual < u.residual => *u = pt,
            Some(_) => {}
            None => unique.push(pt),
        }
    }
    label_orbits(gp, p, &mut unique, cfg);
    Ok(unique)
}

/// Flags positive-dimensional critical orbits: degenerate critical points of
/// equal value are linked when their angular gap is below three times the
/// sampling resolution (the largest nearest-neighbour gap in the group), and
/// linked clusters larger than `orbit_min_points` share an id.
fn label_orbits(gp: &Potential, _p: u32, pts: &mut [CriticalPoint], cfg: &SearchConfig) {
    if gp.dim() < 2 || pts.len() <= cfg.orbit_min_points {
        return;
    }
    let scale = gp.terms().iter().map(|t| t.coef.abs()).sum::<f64>().max(1e-300);
    let degenerate: Vec<bool> = pts
        .iter()
        .map(|pt| {
            let h = sphere_hessian(gp, &pt.direction);
            // one zero eigenvalue always comes from the normal direction
            let zeros = h
                .symmetric_eigenvalues()
                .iter()
                .filter(|l| l.abs() < 1e-6 * scale)
                .count();
            zeros >= 2
        })
        .collect();

    let m = pts.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut j = i;
        while parent[j] != r {
            let nx = parent[j];
            parent[j] = r;
            j = nx;
        }
        r
    }
    let same_value = |a: &CriticalPoint, b: &CriticalPoint| (a.value - b.value).abs() <= 1e-8 * (1.0 + a.value.abs());

    let candidates: Vec<usize> = (0..m).filter(|&i| degenerate[i]).collect();
    let mut nn = vec![f64::INFINITY; m];
    for &i in &candidates {
        for &j in &candidates {
            if i != j && same_value(&pts[i], &pts[j]) {
                nn[i] = nn[i].min(angle(&pts[i].direction, &pts[j].direction));
            }
        }
    }
    let resolution = candidates
        .iter()
        .map(|&i| nn[i])
        .filter(|d| d.is_finite())
        .fold(0.0f64, f64::max);
    for (a, &i) in candidates.iter().enumerate() {
        for &j in &candidates[a + 1..] {
            if same_value(&pts[i], &pts[j]) && angle(&pts[i].direction, &pts[j].direction) <= 3.0 * resolution {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut sizes = vec![0usize; m];
    for &i in &candidates {
        let r = find(&mut parent, i);
        sizes[r] += 1;
    }
    let mut ids: Vec<Option<usize>> = vec![None; m];
    let mut next = 0;
    for &i in &candidates {
        let r = find(&mut parent, i);
        if sizes[r] > cfg.orbit_min_points {
            if ids[r].is_none() {
                ids[r] = Some(next);
                next += 1;
            }
            pts[i].orbit_id = ids[r];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AdamsSimonMode {
    Parabolic,
    /// Critical values are scaled by `1/m`.
    Elliptic { m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AdamsSimonVerdict {
    Positive,
    NonnegativeOnly,
    Fails { diagnostic: String },
}

/// Evaluates the Adams–Simon positivity / non-negativity condition for `g_p`.
pub fn adams_simon(gp: &Potential, mode: AdamsSimonMode) -> Result<AdamsSimonVerdict> {
    let cfg = SearchConfig {
        n_starts: 64 * gp.dim().max(1),
        ..SearchConfig::default()
    };
    adams_simon_with(gp, mode, &cfg)
}

pub fn adams_simon_with(gp: &Potential, mode: AdamsSimonMode, cfg: &SearchConfig) -> Result<AdamsSimonVerdict> {
    let factor = match mode {
        AdamsSimonMode::Parabolic => 1.0,
        AdamsSimonMode::Elliptic { m } if m != 0.0 && m.is_finite() => 1.0 / m,
        AdamsSimonMode::Elliptic { m } => {
            return Err(CriticalError::Invalid(format!("elliptic mode needs m != 0, got {m}")))
        }
    };
    if gp.is_zero() {
        return Ok(AdamsSimonVerdict::Fails {
            diagnostic: "leading part vanishes identically (f constant)".into(),
        });
    }
    let pts = critical_points_with(gp, cfg)?;
    let tol = 1e-9;
    let best = pts.iter().map(|c| factor * c.value).fold(f64::NEG_INFINITY, f64::max);
    if pts.is_empty() {
        return Ok(AdamsSimonVerdict::Fails {
            diagnostic: format!("no critical point found from {} starts", cfg.n_starts),
        });
    }
    Ok(if best > tol {
        AdamsSimonVerdict::Positive
    } else if best >= -tol {
        AdamsSimonVerdict::NonnegativeOnly
    } else {
        AdamsSimonVerdict::Fails {
            diagnostic: format!("largest critical value {best:.6e} is negative"),
        }
    })
}

/// The exact radial solution `x(t) = (beta0 p (p-2) t)^(-1/(p-2)) w` of the
/// gradient flow of a homogeneous `g_p` of degree `p >= 3`, where
/// `beta0 = g_p(w) > 0` at a critical direction `w`.
pub fn ansatz_solution(gp: &Potential, w: &[f64], t: f64) -> Result<Vec<f64>> {
    let p = homogeneous_degree(gp, 2)?;
    if p == 2 {
        return Err(CriticalError::ExponentialRegime);
    }
    if !(t > 0.0) {
        return Err(CriticalError::Invalid(format!("ansatz needs t > 0, got {t}")));
    }
    let r = norm(w);
    if r == 0.0 || w.len() != gp.dim() {
        return Err(CriticalError::Invalid("direction must be a nonzero vector of matching dimension".into()));
    }
    let unit: Vec<f64> = w.iter().map(|x| x / r).collect();
    let beta0 = gp.eval(&unit)?;
    if !(beta0 > 0.0) {
        return Err(CriticalError::NonPositiveValue(beta0));
    }
    let pf = p as f64;
    let radius = (beta0 * pf * (pf - 2.0) * t).powf(-1.0 / (pf - 2.0));
    Ok(unit.into_iter().map(|x| radius * x).collect())
}
