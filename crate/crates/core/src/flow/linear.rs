//! First-order vectorization of `u'' - m u' + A u = 0` with `q = (u, u' - (m/2) u)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FlowError, Result};

/// Position of an eigenvalue `lambda` relative to `m^2/4` and 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexClass {
    /// `lambda > m^2/4`: complex roots.
    I1,
    /// `lambda = m^2/4`: repeated root.
    I2,
    /// `lambda = 0`.
    I3,
    /// Real distinct roots, `lambda != 0`.
    I4,
}

/// Label of a basis vector, carrying the eigen index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisLabel {
    Osc1(usize),
    Osc2(usize),
    Res3(usize),
    Res4(usize),
    Plus(usize),
    Minus(usize),
}

impl BasisLabel {
    pub fn index(&self) -> usize {
        match *self {
            BasisLabel::Osc1(i)
            | BasisLabel::Osc2(i)
            | BasisLabel::Res3(i)
            | BasisLabel::Res4(i)
            | BasisLabel::Plus(i)
            | BasisLabel::Minus(i) => i,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            BasisLabel::Osc1(i) => format!("xi_{i},1"),
            BasisLabel::Osc2(i) => format!("xi_{i},2"),
            BasisLabel::Res3(i) => format!("xi_{i},3"),
            BasisLabel::Res4(i) => format!("xi_{i},4"),
            BasisLabel::Plus(i) => format!("xi_{i}+"),
            BasisLabel::Minus(i) => format!("xi_{i}-"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub a: DMatrix<f64>,
    pub m: f64,
    /// Eigenvalues in non-increasing order.
    pub lambda: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `lambda`.
    pub phi: DMatrix<f64>,
    pub gamma_plus: Vec<Complex64>,
    pub gamma_minus: Vec<Complex64>,
    /// `sqrt(lambda - m^2/4)` for `I1` indices.
    pub beta: Vec<Option<f64>>,
    pub class: Vec<IndexClass>,
    /// The 2n x 2n operator acting on `q = (v, w)`.
    pub l_op: DMatrix<f64>,
    /// Gram matrix of the bilinear form `G`.
    pub gram: DMatrix<f64>,
    /// G-adjoint of `l_op`.
    pub l_adj: DMatrix<f64>,
    pub basis: Vec<(BasisLabel, DVector<f64>)>,
}

/// Numerical verification of the structural identities of a [`LinearizedSystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorizeReport {
    pub orthonormality_error: f64,
    pub l_relation_error: f64,
    pub adjoint_relation_error: f64,
    pub adjoint_definition_error: f64,
    pub gram_min_eigenvalue: f64,
}

impl VectorizeReport {
    pub fn max_error(&self) -> f64 {
        self.orthonormality_error
            .max(self.l_relation_error)
            .max(self.adjoint_relation_error)
            .max(self.adjoint_definition_error)
    }
}

pub fn vectorize(a: &DMatrix<f64>, m: f64) -> Result<LinearizedSystem> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(FlowError::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if m == 0.0 || !m.is_finite() {
        return Err(FlowError::InvalidInput(format!("m must be a nonzero real, got {m}")));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(FlowError::NotSymmetric(asym));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.clone().try_symmetric_eigen(1e-15, 10_000).ok_or(FlowError::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let phi = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let q = m * m / 4.0;
    let tol = 1e-9 * (1.0 + q).max(scale);
    let mut class = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut gamma_plus = Vec::with_capacity(n);
    let mut gamma_minus = Vec::with_capacity(n);
    for &l in &lambda {
        let c = if (l - q).abs() <= tol {
            IndexClass::I2
        } else if l.abs() <= tol {
            IndexClass::I3
        } else if l > q {
            IndexClass::I1
        } else {
            IndexClass::I4
        };
        let disc = Complex64::new(q - l, 0.0).sqrt();
        let (gp, gm) = match c {
            IndexClass::I2 => (Complex64::new(m / 2.0, 0.0), Complex64::new(m / 2.0, 0.0)),
            IndexClass::I3 => {
                let d = m.abs() / 2.0;
                (Complex64::new(m / 2.0 + d, 0.0), Complex64::new(m / 2.0 - d, 0.0))
            }
            _ => (m / 2.0 + disc, m / 2.0 - disc),
        };
        class.push(c);
        beta.push((c == IndexClass::I1).then(|| (l - q).sqrt()));
        gamma_plus.push(gp);
        gamma_minus.push(gm);
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let mut l_op = DMatrix::zeros(2 * n, 2 * n);
    l_op.view_mut((0, 0), (n, n)).copy_from(&(&eye * (m / 2.0)));
    l_op.view_mut((0, n), (n, n)).copy_from(&eye);
    l_op.view_mut((n, 0), (n, n)).copy_from(&(-&sym + &eye * q));
    l_op.view_mut((n, n), (n, n)).copy_from(&(&eye * (m / 2.0)));

    let mut top = -&sym + &eye * q;
    for i in 0..n {
        let col = phi.column(i);
        let outer = &col * col.transpose();
        match class[i] {
            IndexClass::I1 => {
                let b = beta[i].expect("I1 has beta");
                top += outer * (2.0 * b * b);
            }
            IndexClass::I2 => top += outer,
            _ => {}
        }
    }
    let mut gram = DMatrix::zeros(2 * n, 2 * n);
    gram.view_mut((0, 0), (n, n)).copy_from(&top);
    gram.view_mut((n, n), (n, n)).copy_from(&eye);
    gram *= 2.0 / (m * m);
    gram = (&gram + gram.transpose()) * 0.5;

    let gram_inv = gram.clone().try_inverse().ok_or(FlowError::EigenFailure)?;
    let l_adj = &gram_inv * l_op.transpose() * &gram;

    let mut basis = Vec::with_capacity(2 * n);
    let pair = |v: DVector<f64>, w: DVector<f64>| {
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n).copy_from(&w);
        out
    };
    let s2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        let p: DVector<f64> = phi.column(i).into_owned();
        let z = DVector::zeros(n);
        match class[i] {
            IndexClass::I1 => {
                let b = beta[i].expect("I1 has beta");
                basis.push((BasisLabel::Osc1(i), pair(z.clone(), &p * (m / s2))));
                basis.push((BasisLabel::Osc2(i), pair(&p * (m / (s2 * b)), z)));
            }
            IndexClass::I2 => {
                basis.push((BasisLabel::Res3(i), pair(z.clone(), &p * (m / s2))));
                basis.push((BasisLabel::Res4(i), pair(&p * (m / s2), z)));
            }
            IndexClass::I3 | IndexClass::I4 => {
                for (label, g) in [(BasisLabel::Plus(i), gamma_plus[i].re), (BasisLabel::Minus(i), gamma_minus[i].re)] {
                    basis.push((label, pair(&p * (m / (m - 2.0 * g)), &p * (-m / 2.0))));
                }
            }
        }
    }

    Ok(LinearizedSystem {
        a: sym,
        m,
        lambda,
        phi,
        gamma_plus,
        gamma_minus,
        beta,
        class,
        l_op,
        gram,
        l_adj,
        basis,
    })
}

impl LinearizedSystem {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn g_inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * &self.gram * b)[(0, 0)]
    }

    pub fn indices(&self, c: IndexClass) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.class[i] == c).collect()
    }

    fn basis_vec(&self, label: BasisLabel) -> &DVector<f64> {
        &self.basis.iter().find(|(l, _)| *l == label).expect("label present").1
    }

    /// Expected images of each basis vector under the operator and its adjoint.
    fn expected(&self, label: BasisLabel, adjoint: bool) -> DVector<f64> {
        let h = self.m / 2.0;
        let v = |l: BasisLabel| self.basis_vec(l).clone();
        let sgn = if adjoint { -1.0 } else { 1.0 };
        match label {
            BasisLabel::Plus(i) => v(label) * self.gamma_plus[i].re,
            BasisLabel::Minus(i) => v(label) * self.gamma_minus[i].re,
            BasisLabel::Osc1(i) => {
                let b = self.beta[i].expect("I1");
                v(label) * h + v(BasisLabel::Osc2(i)) * (sgn * b)
            }
            BasisLabel::Osc2(i) => {
                let b = self.beta[i].expect("I1");
                v(label) * h - v(BasisLabel::Osc1(i)) * (sgn * b)
            }
            BasisLabel::Res3(i) if !adjoint => v(label) * h + v(BasisLabel::Res4(i)),
            BasisLabel::Res3(_) => v(label) * h,
            BasisLabel::Res4(_) if !adjoint => v(label) * h,
            BasisLabel::Res4(i) => v(label) * h + v(BasisLabel::Res3(i)),
        }
    }

    /// Checks G-orthonormality, the action of the operator and of its
    /// G-adjoint on the basis, and `G(Lx, y) = G(x, L^dag y)`.
    pub fn verify(&self) -> VectorizeReport {
        let k = self.basis.len();
        let mut ortho: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                let want = if a == b { 1.0 } else { 0.0 };
                ortho = ortho.max((self.g_inner(&self.basis[a].1, &self.basis[b].1) - want).abs());
            }
        }
        let mut lrel: f64 = 0.0;
        let mut arel: f64 = 0.0;
        for (label, v) in &self.basis {
            let s = v.amax().max(1.0);
            lrel = lrel.max((&self.l_op * v - self.expected(*label, false)).amax() / s);
            arel = arel.max((&self.l_adj * v - self.expected(*label, true)).amax() / s);
        }
        let lhs = self.l_op.transpose() * &self.gram;
        let rhs = &self.gram * &self.l_adj;
        let adj_def = (&lhs - &rhs).amax() / lhs.amax().max(1.0);
        let gmin = self
            .gram
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        VectorizeReport {
            orthonormality_error: ortho,
            l_relation_error: lrel,
            adjoint_relation_error: arel,
            adjoint_definition_error: adj_def,
            gram_min_eigenvalue: gmin,
        }
    }

    /// `q = (u, udot - (m/2) u)`.
    pub fn state(&self, u: &[f64], udot: &[f64]) -> Result<DVector<f64>> {
        let n = self.dim();
        for len in [u.len(), udot.len()] {
            if len != n {
                return Err(FlowError::DimensionMismatch { expected: n, got: len });
            }
        }
        let mut q = DVector::zeros(2 * n);
        for i in 0..n {
            q[i] = u[i];
            q[n + i] = udot[i] - 0.5 * self.m * u[i];
        }
        Ok(q)
    }
}

/// Coefficients of `q` in the G-orthonormal basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coefficients {
    pub entries: Vec<(BasisLabel, f64)>,
    /// `max |sum coef * psi - q|`.
    pub reconstruction_error: f64,
}

impl Coefficients {
    pub fn get(&self, label: BasisLabel) -> Option<f64> {
        self.entries.iter().find(|(l, _)| *l == label).map(|(_, c)| *c)
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c * c).sum()
    }
}

pub fn project_coefficients(sys: &LinearizedSystem, u: &[f64], udot: &[f64]) -> Result<Coefficients> {
    let q = sys.state(u, udot)?;
    let gq = &sys.gram * &q;
    let entries: Vec<(BasisLabel, f64)> = sys.basis.iter().map(|(l, psi)| (*l, psi.dot(&gq))).collect();
    let mut rec = DVector::zeros(q.len());
    for ((_, c), (_, psi)) in entries.iter().zip(&sys.basis) {
        rec += psi * *c;
    }
    let reconstruction_error = (rec - &q).amax();
    Ok(Coefficients {
        entries,
        reconstruction_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&b + b.transpose()) * 0.5
    }

    #[test]
    fn scalar_cases() {
        let s = vectorize(&DMatrix::from_element(1, 1, 0.0), 1.0).unwrap();
        assert_eq!(s.class, vec![IndexClass::I3]);
        assert_eq!(s.gamma_plus[0].re, 1.0);
        assert_eq!(s.gamma_minus[0].re, 0.0);

        let s = vectorize(&DMatrix::from_element(1, 1, 0.25), -1.0).unwrap();
        assert_eq!(s.class, vec![IndexClass::I2]);
        assert_eq!(s.gamma_plus[0], s.gamma_minus[0]);
        assert!(s.verify().max_error() < 1e-12);

        let s = vectorize(&DMatrix::from_element(1, 1, 1.0), -1.0).unwrap();
        assert_eq!(s.class, vec![IndexClass::I1]);
        assert!((s.beta[0].unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((s.gamma_plus[0].im - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_six_by_six() {
        for seed in 0..5 {
            let mut a = random_sym(6, seed) * 2.0;
            // force one resonant and one null eigenvalue
            let eig = a.clone().symmetric_eigen();
            let mut lam = eig.eigenvalues.clone();
            lam[0] = 0.25;
            lam[1] = 0.0;
            a = &eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose();
            a = (&a + a.transpose()) * 0.5;
            let s = vectorize(&a, -1.0).unwrap();
            assert_eq!(s.indices(IndexClass::I2).len(), 1);
            assert_eq!(s.indices(IndexClass::I3).len(), 1);
            let rep = s.verify();
            assert!(rep.max_error() < 1e-10, "{rep:?}");
            assert!(rep.gram_min_eigenvalue > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = 1e-3;
        assert!(matches!(vectorize(&a, 1.0), Err(FlowError::NotSymmetric(_))));
        assert!(vectorize(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.25, 0.0, -1.0]));
        let s = vectorize(&a, -1.0).unwrap();
        // u = phi_j for the null index, udot = 0
        let j = s.indices(IndexClass::I3)[0];
        let u: Vec<f64> = s.phi.column(j).iter().cloned().collect();
        let c = project_coefficients(&s, &u, &[0.0; 4]).unwrap();
        for (l, v) in &c.entries {
            if l.index() != j {
                assert!(v.abs() < 1e-12, "{l:?} {v}");
            }
        }
        assert!(c.reconstruction_error < 1e-12);

        // q equal to a basis vector
        let i = s.indices(IndexClass::I1)[0];
        let psi = s.basis_vec(BasisLabel::Osc1(i)).clone();
        let u: Vec<f64> = psi.rows(0, 4).iter().cloned().collect();
        let udot: Vec<f64> = (0..4).map(|k| psi[4 + k] + 0.5 * s.m * u[k]).collect();
        let c = project_coefficients(&s, &u, &udot).unwrap();
        for (l, v) in &c.entries {
            let want = if *l == BasisLabel::Osc1(i) { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
        assert!(project_coefficients(&s, &[1.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn parseval(seed in 0u64..500, m in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
                    u in prop::collection::vec(-1.0f64..1.0, 5), ud in prop::collection::vec(-1.0f64..1.0, 5)) {
            let s = vectorize(&random_sym(5, seed), m).unwrap();
            let c = project_coefficients(&s, &u, &ud).unwrap();
            let q = s.state(&u, &ud).unwrap();
            let nq = s.g_inner(&q, &q);
            prop_assert!((nq - c.sum_of_squares()).abs() <= 1e-10 * (1.0 + nq));
            prop_assert!(c.reconstruction_error <= 1e-10 * (1.0 + q.amax()));
        }
    }
}
