//! Lyapunov–Schmidt reduction of the stationary model equation onto the kernel
//! of `d^2/dx^2 + 1`.
//!
//! Fields are represented by coordinates in the orthonormal eigenbasis used by
//! [`crate::pde::SpectralState::modes`]. Nonlinear terms are evaluated on a
//! `4K + 2` point grid, which integrates every product that appears exactly,
//! so the discrete problem coincides with the Fourier–Galerkin truncation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pde::{eigenvalue, Model};
use crate::potential::{norm, Potential, PotentialError};
use crate::sphere::{adams_simon, AdamsSimonMode, AdamsSimonVerdict, CriticalError};

#[derive(Error, Debug)]
pub enum ReductionError {
    #[error("Newton iteration for H did not converge (|v| = {norm_v:.3e}, trust radius {rho}, residual {residual:.3e})")]
    NoConvergence { norm_v: f64, rho: f64, residual: f64 },
    #[error("singular Jacobian on the complement")]
    SingularJacobian,
    #[error("degenerate polynomial fit (condition number {condition:.3e})")]
    DegenerateFit { condition: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Critical(#[from] CriticalError),
}

pub type Result<T> = std::result::Result<T, ReductionError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionSettings {
    pub k_max: usize,
    pub gap_tol: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Trust radius in kernel coordinates.
    pub rho: f64,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        ReductionSettings {
            k_max: 32,
            gap_tol: 1e-8,
            tol: 1e-14,
            max_iter: 50,
            rho: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub model: Model,
    pub settings: ReductionSettings,
    /// Grid values of the basis functions, one column per mode.
    phi: DMatrix<f64>,
    weight: f64,
    lambda: Vec<f64>,
    kernel: Vec<usize>,
    complement: Vec<usize>,
}

/// One evaluation of the reduced functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub v: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// `|Pi_perp M(v + H(v))|`
    pub residual: f64,
}

impl ReducedModel {
    pub fn new(model: Model) -> Self {
        Self::with_settings(model, ReductionSettings::default())
    }

    pub fn with_settings(model: Model, settings: ReductionSettings) -> Self {
        let k = settings.k_max;
        let n = 2 * k + 1;
        let m = 4 * k + 2;
        let mut phi = DMatrix::zeros(m, n);
        let mut lambda = vec![0.0; n];
        for i in 0..m {
            let x = 2.0 * PI * i as f64 / m as f64;
            phi[(i, 0)] = 1.0 / (2.0 * PI).sqrt();
            for j in 1..=k {
                phi[(i, 2 * j - 1)] = (j as f64 * x).cos() / PI.sqrt();
                phi[(i, 2 * j)] = (j as f64 * x).sin() / PI.sqrt();
            }
        }
        lambda[0] = eigenvalue(0);
        for j in 1..=k {
            lambda[2 * j - 1] = eigenvalue(j);
            lambda[2 * j] = eigenvalue(j);
        }
        let kernel: Vec<usize> = (0..n).filter(|&i| lambda[i].abs() < settings.gap_tol).collect();
        let complement: Vec<usize> = (0..n).filter(|&i| lambda[i].abs() >= settings.gap_tol).collect();
        ReducedModel {
            model,
            settings,
            phi,
            weight: 2.0 * PI / m as f64,
            lambda,
            kernel,
            complement,
        }
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.len()
    }

    pub fn n_modes(&self) -> usize {
        self.lambda.len()
    }

    /// Gram matrix of the kernel basis under the quadrature inner product.
    pub fn kernel_gram(&self) -> DMatrix<f64> {
        let cols: Vec<_> = self.kernel.iter().map(|&i| self.phi.column(i).into_owned()).collect();
        let b = DMatrix::from_columns(&cols);
        b.transpose() * &b * self.weight
    }

    /// Mode coordinates of `v` (kernel coordinates) embedded in the full space.
    pub fn embed(&self, v: &[f64]) -> Result<DVector<f64>> {
        if v.len() != self.kernel.len() {
            return Err(ReductionError::Invalid(format!("expected {} kernel coordinates, got {}", self.kernel.len(), v.len())));
        }
        let mut out = DVector::zeros(self.n_modes());
        for (&i, &x) in self.kernel.iter().zip(v) {
            out[i] = x;
        }
        Ok(out)
    }

    /// `M(u) = u_xx + u + s u^3` in mode coordinates.
    pub fn operator(&self, xi: &DVector<f64>) -> DVector<f64> {
        let s = self.model.s();
        let mut out = DVector::from_iterator(xi.len(), xi.iter().zip(&self.lambda).map(|(x, l)| l * x));
        if s != 0.0 {
            let u = &self.phi * xi;
            let u3 = u.map(|v| v * v * v);
            out += self.phi.tr_mul(&u3) * (s * self.weight);
        }
        out
    }

    /// `F(u) = int 1/2 u_x^2 - 1/2 u^2 - s/4 u^4`.
    pub fn energy(&self, xi: &DVector<f64>) -> f64 {
        let quad: f64 = xi.iter().zip(&self.lambda).map(|(x, l)| -0.5 * l * x * x).sum();
        let s = self.model.s();
        if s == 0.0 {
            return quad;
        }
        let u = &self.phi * xi;
        quad - 0.25 * s * self.weight * u.iter().map(|v| v.powi(4)).sum::<f64>()
    }

    fn complement_residual(&self, xi: &DVector<f64>) -> DVector<f64> {
        let m = self.operator(xi);
        DVector::from_iterator(self.complement.len(), self.complement.iter().map(|&i| m[i]))
    }

    /// `H(v)`: the complement field with `Pi_perp M(v + H(v)) = 0`, as full
    /// mode coordinates (kernel entries are zero).
    pub fn solve_h(&self, v: &[f64]) -> Result<DVector<f64>> {
        let nv = norm(v);
        let rho = self.settings.rho;
        let base = self.embed(v)?;
        if nv > rho {
            let residual = self.complement_residual(&base).norm();
            return Err(ReductionError::NoConvergence { norm_v: nv, rho, residual });
        }
        let s = self.model.s();
        let nc = self.complement.len();
        let mut xi = base;
        let mut residual = f64::INFINITY;
        for _ in 0..self.settings.max_iter {
            let r = self.complement_residual(&xi);
            residual = r.norm();
            if residual <= self.settings.tol {
                return Ok(self.strip_kernel(xi));
            }
            let mut jac = DMatrix::from_diagonal(&DVector::from_iterator(nc, self.complement.iter().map(|&i| self.lambda[i])));
            if s != 0.0 {
                let u = &self.phi * &xi;
                let pc = self.phi.select_columns(&self.complement);
                let mut scaled = pc.clone();
                for (i, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= 3.0 * s * self.weight * u[i] * u[i];
                }
                jac += pc.tr_mul(&scaled);
            }
            let step = jac.lu().solve(&(-r)).ok_or(ReductionError::SingularJacobian)?;
            if !step.iter().all(|x| x.is_finite()) {
                return Err(ReductionError::SingularJacobian);
            }
            for (k, &i) in self.complement.iter().enumerate() {
                xi[i] += step[k];
            }
            if (&xi - self.embed(v)?).norm() > rho {
                return Err(ReductionError::NoConvergence { norm_v: nv, rho, residual });
            }
        }
        // converged to round-off but above the requested tolerance
        if residual <= 1e3 * self.settings.tol {
            return Ok(self.strip_kernel(xi));
        }
        Err(ReductionError::NoConvergence { norm_v: nv, rho, residual })
    }

    fn strip_kernel(&self, mut xi: DVector<f64>) -> DVector<f64> {
        for &i in &self.kernel {
            xi[i] = 0.0;
        }
        xi
    }

    /// Evaluates `f(v) = F(v + H(v))` and `grad f(v) = -Pi^T M(v + H(v))`.
    pub fn sample(&self, v: &[f64]) -> Result<ReducedSample> {
        let h = self.solve_h(v)?;
        let xi = self.embed(v)? + h;
        let m = self.operator(&xi);
        Ok(ReducedSample {
            v: v.to_vec(),
            value: self.energy(&xi),
            gradient: self.kernel.iter().map(|&i| -m[i]).collect(),
            residual: self.complement_residual(&xi).norm(),
        })
    }

    pub fn reduced_value(&self, v: &[f64]) -> Result<f64> {
        Ok(self.sample(v)?.value)
    }

    pub fn reduced_gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.sample(v)?.gradient)
    }
}

/// Homogeneous pieces of a fitted reduced functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedFit {
    /// Lowest degree with coefficient norm above 1e-8 (`None` when `f` vanishes).
    pub p: Option<u32>,
    /// `(exponents, coefficient)` in graded-lex order, degrees `min_degree..=max_degree`.
    pub coefficients: Vec<(Vec<u32>, f64)>,
    /// Coefficient norm per degree.
    pub degree_norms: Vec<(u32, f64)>,
    /// Relative RMS residual of the least-squares fit.
    pub residual: f64,
    pub condition: f64,
    pub trust_radius: f64,
    pub radii: Vec<f64>,
    pub n_directions: usize,
    pub samples: Vec<ReducedSample>,
}

impl ReducedFit {
    /// The fitted polynomial as a potential on the kernel.
    pub fn polynomial(&self, dim: usize) -> Result<Potential> {
        Ok(Potential::new(dim, self.coefficients.iter().cloned())?.with_label("reduced"))
    }

    /// The leading homogeneous part `f_p` (zero when `p` is `None`).
    pub fn leading(&self, dim: usize) -> Result<Potential> {
        match self.p {
            Some(p) => Ok(Potential::new(
                dim,
                self.coefficients.iter().filter(|(e, _)| e.iter().sum::<u32>() == p).cloned(),
            )?
            .with_label(format!("reduced f_{p}"))),
            None => Ok(Potential::zero(dim)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub radii: Vec<f64>,
    pub n_directions: usize,
    pub min_degree: u32,
    pub max_degree: u32,
    /// Fits whose column-scaled condition number exceeds this are rejected.
    pub max_condition: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            radii: vec![0.02, 0.04, 0.08, 0.16],
            n_directions: 32,
            min_degree: 2,
            max_degree: 8,
            max_condition: 1e10,
            seed: 0,
        }
    }
}

/// Exponent vectors of total degree `d` in `n` variables, graded-lex order.
pub fn monomials(n: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == n {
            prefix.push(d);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=d).rev() {
            prefix.push(a);
            rec(n, d - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(n, d, &mut Vec::new(), &mut out);
    out
}

fn directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 2 {
        return (0..count)
            .map(|j| {
                let a = 2.0 * PI * (j as f64 + 0.5) / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = norm(&w);
            w.into_iter().map(|x| x / r).collect()
        })
        .collect()
}

/// Least-squares fit of sampled `f` values by polynomials in kernel coordinates.
pub fn fit_reduced_polynomial(model: &ReducedModel, opts: &FitOptions) -> Result<ReducedFit> {
    let n = model.kernel_dim();
    if n == 0 {
        return Err(ReductionError::Invalid("kernel is trivial".into()));
    }
    if opts.radii.iter().any(|&r| !(r > 0.0) || r > model.settings.rho) {
        return Err(ReductionError::Invalid(format!("radii must lie in (0, {}]", model.settings.rho)));
    }
    if opts.min_degree > opts.max_degree || opts.n_directions == 0 {
        return Err(ReductionError::Invalid("need min_degree <= max_degree and at least one direction".into()));
    }
    let dirs = directions(n, opts.n_directions, opts.seed);
    let points: Vec<Vec<f64>> = opts
        .radii
        .iter()
        .flat_map(|&r| dirs.iter().map(move |w| w.iter().map(|x| r * x).collect()))
        .collect();
    let samples: Vec<ReducedSample> = points.par_iter().map(|v| model.sample(v)).collect::<Result<_>>()?;

    let monos: Vec<Vec<u32>> = (opts.min_degree..=opts.max_degree).flat_map(|d| monomials(n, d)).collect();
    let rows = samples.len();
    let mut a = DMatrix::zeros(rows, monos.len());
    for (i, s) in samples.iter().enumerate() {
        for (j, e) in monos.iter().enumerate() {
            a[(i, j)] = s.v.iter().zip(e).map(|(x, &k)| x.powi(k as i32)).product::<f64>();
        }
    }
    let b = DVector::from_iterator(rows, samples.iter().map(|s| s.value));
    let scale: Vec<f64> = (0..monos.len()).map(|j| a.column(j).norm().max(f64::MIN_POSITIVE)).collect();
    for (j, sc) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / sc);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = if rows >= monos.len() { svd.singular_values.min() } else { 0.0 };
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > opts.max_condition {
        return Err(ReductionError::DegenerateFit { condition });
    }
    let x = svd.solve(&b, 0.0).map_err(|_| ReductionError::DegenerateFit { condition })?;
    let resid = (&a * &x - &b).norm();
    let residual = if b.norm() > 0.0 { resid / b.norm() } else { resid };

    let coefficients: Vec<(Vec<u32>, f64)> = monos.iter().zip(x.iter().zip(&scale)).map(|(e, (c, sc))| (e.clone(), c / sc)).collect();
    let degree_norms: Vec<(u32, f64)> = (opts.min_degree..=opts.max_degree)
        .map(|d| {
            let s = coefficients.iter().filter(|(e, _)| e.iter().sum::<u32>() == d).map(|(_, c)| c * c).sum::<f64>();
            (d, s.sqrt())
        })
        .collect();
    let p = degree_norms.iter().find(|(_, c)| *c > 1e-8).map(|(d, _)| *d);
    Ok(ReducedFit {
        p,
        coefficients,
        degree_norms,
        residual,
        condition,
        trust_radius: model.settings.rho,
        radii: opts.radii.clone(),
        n_directions: opts.n_directions,
        samples,
    })
}

/// Adams–Simon verdict for the leading part of the fitted reduced functional.
pub fn adams_simon_from_reduction(model: &ReducedModel, opts: &FitOptions) -> Result<(AdamsSimonVerdict, ReducedFit)> {
    let fit = fit_reduced_polynomial(model, opts)?;
    let lead = fit.leading(model.kernel_dim())?;
    let verdict = adams_simon(&lead, AdamsSimonMode::Parabolic)?;
    Ok((verdict, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cubic() -> ReducedModel {
        ReducedModel::new(Model::Cubic)
    }

    #[test]
    fn kernel_is_orthonormal_pair() {
        let m = cubic();
        assert_eq!(m.kernel_dim(), 2);
        let g = m.kernel_gram();
        assert!((g - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn h_vanishes_to_second_order() {
        let m = cubic();
        assert_eq!(m.solve_h(&[0.0, 0.0]).unwrap().amax(), 0.0);
        let e = 1e-3;
        for dir in [[1.0, 0.0], [0.0, 1.0]] {
            let hp = m.solve_h(&[e * dir[0], e * dir[1]]).unwrap();
            let hm = m.solve_h(&[-e * dir[0], -e * dir[1]]).unwrap();
            assert!(((hp - hm) / (2.0 * e)).amax() <= 1e-8);
        }
    }

    #[test]
    fn h_leading_order() {
        let m = cubic();
        let a: f64 = 0.05;
        let h = m.solve_h(&[a * PI.sqrt(), 0.0]).unwrap();
        // -(A^3/32) cos 3x has coordinate -(A^3/32) sqrt(pi) on cos(3x)/sqrt(pi)
        let mut expected = DVector::zeros(m.n_modes());
        expected[5] = -(a.powi(3) / 32.0) * PI.sqrt();
        // L2 norm of the difference equals the coordinate norm
        assert!((h - expected).norm() <= 10.0 * a.powi(5));
    }

    #[test]
    fn outside_trust_region() {
        let m = cubic();
        assert!(matches!(m.solve_h(&[0.6, 0.0]), Err(ReductionError::NoConvergence { .. })));
    }

    #[test]
    fn reduced_value_oracle() {
        let m = cubic();
        let s = m.sample(&[0.0, 0.0]).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.gradient, vec![0.0, 0.0]);
        let a: f64 = 0.05;
        let f = m.reduced_value(&[a * PI.sqrt(), 0.0]).unwrap();
        let oracle = 3.0 * PI / 16.0 * a.powi(4);
        assert!((f - oracle).abs() < 0.01 * oracle);
    }

    #[test]
    fn rotation_invariance() {
        let m = cubic();
        let v = [0.1, 0.05];
        let f = m.reduced_value(&v).unwrap();
        for psi in [0.3, 1.7, 4.0] {
            let (c, s) = (f64::cos(psi), f64::sin(psi));
            let fr = m.reduced_value(&[c * v[0] - s * v[1], s * v[0] + c * v[1]]).unwrap();
            assert!((fr - f).abs() <= 1e-8 * f.abs());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn gradient_matches_differences(r in 0.01f64..0.25, a in 0.0f64..6.283, b in 0.0f64..6.283) {
            let m = cubic();
            let v = [r * a.cos(), r * a.sin()];
            let d = [b.cos(), b.sin()];
            let h = 1e-4 * r;
            let fp = m.reduced_value(&[v[0] + h * d[0], v[1] + h * d[1]]).unwrap();
            let fm = m.reduced_value(&[v[0] - h * d[0], v[1] - h * d[1]]).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let g = m.reduced_gradient(&v).unwrap();
            let an = g[0] * d[0] + g[1] * d[1];
            let gn = norm(&g);
            prop_assert!((fd - an).abs() <= 1e-6 * gn, "fd {} vs {}", fd, an);
        }
    }

    #[test]
    fn residual_at_samples() {
        let m = cubic();
        let s = m.sample(&[0.2, -0.1]).unwrap();
        assert!(s.residual <= 1e-10);
    }

    #[test]
    fn fitted_quartic() {
        let m = cubic();
        let fit = fit_reduced_polynomial(&m, &FitOptions::default()).unwrap();
        assert_eq!(fit.p, Some(4));
        let c = 3.0 / (16.0 * PI);
        let get = |e: [u32; 2]| fit.coefficients.iter().find(|(x, _)| x == &e.to_vec()).unwrap().1;
        assert!((get([4, 0]) - c).abs() < 0.01 * c);
        assert!((get([0, 4]) - c).abs() < 0.01 * c);
        assert!((get([2, 2]) - 2.0 * c).abs() < 0.01 * 2.0 * c);
        assert!(get([3, 1]).abs() < 1e-3 * c);
    }

    #[test]
    fn three_radii_cannot_separate_degrees() {
        let m = cubic();
        let opts = FitOptions { radii: vec![0.02, 0.04, 0.08], ..FitOptions::default() };
        assert!(matches!(fit_reduced_polynomial(&m, &opts), Err(ReductionError::DegenerateFit { .. })));
        let opts = FitOptions { radii: vec![0.02, 0.04, 0.08], max_degree: 6, ..FitOptions::default() };
        let fit = fit_reduced_polynomial(&m, &opts).unwrap();
        assert_eq!(fit.p, Some(4));
    }

    #[test]
    fn linear_model_is_integrable() {
        let m = ReducedModel::new(Model::Linear);
        let fit = fit_reduced_polynomial(&m, &FitOptions::default()).unwrap();
        assert_eq!(fit.p, None);
        assert!(fit.samples.iter().all(|s| s.value.abs() < 1e-10));
        let (v, _) = adams_simon_from_reduction(&m, &FitOptions::default()).unwrap();
        match v {
            AdamsSimonVerdict::Fails { diagnostic } => assert!(diagnostic.contains("f constant")),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn adams_simon_signs() {
        let (v, _) = adams_simon_from_reduction(&cubic(), &FitOptions::default()).unwrap();
        assert_eq!(v, AdamsSimonVerdict::Positive);
        let (v, _) = adams_simon_from_reduction(&ReducedModel::new(Model::Flipped), &FitOptions::default()).unwrap();
        assert!(matches!(v, AdamsSimonVerdict::Fails { .. }));
    }

    #[test]
    fn monomial_order() {
        assert_eq!(monomials(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(monomials(3, 1), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }
}
