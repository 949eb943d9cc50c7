//! Exact multivariate polynomial potentials.
//!
//! A [`Potential`] is a real polynomial on `R^n` stored as a canonical list of
//! monomials in graded lexicographic order. Everything downstream (flows,
//! critical point searches, region tests) uses the exact derivatives provided
//! here rather than finite differences.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum PotentialError {
    #[error("dimension mismatch: potential has n = {expected}, input has length {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation undefined at y = 0")]
    ZeroVector,
    #[error("not a flow potential: {0}")]
    NotFlowPotential(String),
    #[error("potential is not homogeneous (degrees {0:?})")]
    NotHomogeneous(Vec<u32>),
    #[error("invalid potential: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PotentialError>;

/// One monomial `coef * y_1^exps[0] * ... * y_n^exps[n-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exps: Vec<u32>,
    pub coef: f64,
}

impl Term {
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

#[derive(Serialize, Deserialize)]
struct RawPotential {
    n: usize,
    terms: Vec<Term>,
    #[serde(default)]
    label: String,
}

/// Polynomial potential with canonical (graded-lex) term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct Potential {
    n: usize,
    terms: Vec<Term>,
    label: String,
}

impl TryFrom<RawPotential> for Potential {
    type Error = PotentialError;

    fn try_from(raw: RawPotential) -> Result<Self> {
        let p = Potential::new(raw.n, raw.terms.into_iter().map(|t| (t.exps, t.coef)))?;
        Ok(p.with_label(raw.label))
    }
}

impl From<Potential> for RawPotential {
    fn from(p: Potential) -> Self {
        RawPotential {
            n: p.n,
            terms: p.terms,
            label: p.label,
        }
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn graded_lex(a: &[u32], b: &[u32]) -> std::cmp::Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    da.cmp(&db).then_with(|| b.cmp(a))
}

pub fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Potential {
    /// Builds a canonical potential: duplicate monomials are merged, exact
    /// zeros dropped, terms sorted in graded-lex order.
    pub fn new(n: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(PotentialError::Invalid("dimension must be positive".into()));
        }
        let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (exps, coef) in terms {
            if exps.len() != n {
                return Err(PotentialError::DimensionMismatch {
                    expected: n,
                    got: exps.len(),
                });
            }
            if !coef.is_finite() {
                return Err(PotentialError::Invalid(format!("non-finite coefficient {coef}")));
            }
            *merged.entry(exps).or_insert(0.0) += coef;
        }
        let mut terms: Vec<Term> = merged
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(exps, coef)| Term { exps, coef })
            .collect();
        terms.sort_by(|a, b| graded_lex(&a.exps, &b.exps));
        Ok(Potential {
            n,
            terms,
            label: String::new(),
        })
    }

    pub fn zero(n: usize) -> Self {
        Potential {
            n,
            terms: Vec::new(),
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `(8/3) x1^3 + sqrt(2) (x1 + x2) x3^2 + (8/3) x2^3`, the reduced
    /// functional of the bubble-sheet tangent flow.
    pub fn bubble_sheet() -> Self {
        let r2 = std::f64::consts::SQRT_2;
        Potential::new(
            3,
            [
                (vec![3, 0, 0], 8.0 / 3.0),
                (vec![1, 0, 2], r2),
                (vec![0, 1, 2], r2),
                (vec![0, 3, 0], 8.0 / 3.0),
            ],
        )
        .expect("static potential")
        .with_label("bubble_sheet")
    }

    /// `coef * |y|^p` for even `p`, expanded exactly.
    pub fn radial(n: usize, p: u32, coef: f64) -> Result<Self> {
        if p % 2 != 0 {
            return Err(PotentialError::Invalid(format!(
                "|y|^{p} is not a polynomial for odd p"
            )));
        }
        let half = p / 2;
        // multinomial expansion of (sum y_i^2)^half
        let mut terms = Vec::new();
        let mut exps = vec![0u32; n];
        fn rec(
            i: usize,
            left: u32,
            exps: &mut Vec<u32>,
            coef: f64,
            half: u32,
            out: &mut Vec<(Vec<u32>, f64)>,
        ) {
            let n = exps.len();
            if i == n - 1 {
                exps[i] = 2 * left;
                let mut denom = 1.0;
                for e in exps.iter() {
                    denom *= factorial(e / 2);
                }
                out.push((exps.clone(), coef * factorial(half) / denom));
                return;
            }
            for k in 0..=left {
                exps[i] = 2 * k;
                rec(i + 1, left - k, exps, coef, half, out);
            }
        }
        rec(0, half, &mut exps, coef, half, &mut terms);
        Ok(Potential::new(n, terms)?.with_label(format!("{coef}*|y|^{p}")))
    }

    /// `sum_i lambda_i y_i^2 / 2`.
    pub fn quadratic(lambdas: &[f64]) -> Self {
        let n = lambdas.len();
        let terms = lambdas.iter().enumerate().map(|(i, &l)| {
            let mut e = vec![0; n];
            e[i] = 2;
            (e, 0.5 * l)
        });
        Potential::new(n, terms).expect("valid quadratic")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(Term::degree).max().unwrap_or(0)
    }

    /// Degree if every term has the same total degree.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let d = self.terms.first()?.degree();
        self.terms.iter().all(|t| t.degree() == d).then_some(d)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = Potential::new(
            self.n,
            self.terms.iter().map(|t| (t.exps.clone(), t.coef * c)),
        )
        .expect("scaling keeps validity");
        out.label = if self.label.is_empty() {
            String::new()
        } else {
            format!("{c}*{}", self.label)
        };
        out
    }

    pub fn add(&self, other: &Potential) -> Result<Self> {
        if other.n != self.n {
            return Err(PotentialError::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Potential::new(
            self.n,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|t| (t.exps.clone(), t.coef)),
        )
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n {
            return Err(PotentialError::DimensionMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        Ok(())
    }

    fn power_table(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let d = self.max_degree() as usize;
        y.iter()
            .map(|&v| {
                let mut row = Vec::with_capacity(d + 1);
                let mut acc = 1.0;
                for _ in 0..=d {
                    row.push(acc);
                    acc *= v;
                }
                row
            })
            .collect()
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        let pw = self.power_table(y);
        let mut acc = KahanSum::default();
        for t in &self.terms {
            let mut m = t.coef;
            for (i, &e) in t.exps.iter().enumerate() {
                m *= pw[i][e as usize];
            }
            acc.add(m);
        }
        Ok(acc.value())
    }

    pub fn grad(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        let pw = self.power_table(y);
        let mut acc = vec![KahanSum::default(); self.n];
        for t in &self.terms {
            for (i, &ei) in t.exps.iter().enumerate() {
                if ei == 0 {
                    continue;
                }
                let mut m = t.coef * ei as f64;
                for (j, &e) in t.exps.iter().enumerate() {
                    let e = if j == i { e - 1 } else { e };
                    m *= pw[j][e as usize];
                }
                acc[i].add(m);
            }
        }
        Ok(acc.iter().map(KahanSum::value).collect())
    }

    pub fn hessian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(y)?;
        let pw = self.power_table(y);
        let n = self.n;
        let mut acc = vec![KahanSum::default(); n * n];
        let mut e = vec![0u32; n];
        for t in &self.terms {
            for i in 0..n {
                if t.exps[i] == 0 {
                    continue;
                }
                for k in i..n {
                    e.copy_from_slice(&t.exps);
                    let mut m = t.coef * e[i] as f64;
                    e[i] -= 1;
                    if e[k] == 0 {
                        continue;
                    }
                    m *= e[k] as f64;
                    e[k] -= 1;
                    for (j, &ej) in e.iter().enumerate() {
                        m *= pw[j][ej as usize];
                    }
                    acc[i * n + k].add(m);
                }
            }
        }
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in i..n {
                let v = acc[i * n + k].value();
                h[(i, k)] = v;
                h[(k, i)] = v;
            }
        }
        Ok(h)
    }

    /// Components grouped by total degree.
    pub fn homogeneous_components(&self) -> BTreeMap<u32, Potential> {
        let mut map: BTreeMap<u32, Vec<Term>> = BTreeMap::new();
        for t in &self.terms {
            map.entry(t.degree()).or_default().push(t.clone());
        }
        map.into_iter()
            .map(|(d, terms)| {
                (
                    d,
                    Potential {
                        n: self.n,
                        terms,
                        label: String::new(),
                    },
                )
            })
            .collect()
    }

    /// Rejects potentials with a constant or linear part (`g(0) != 0` or
    /// `grad g(0) != 0`).
    pub fn check_flow_potential(&self) -> Result<()> {
        if let Some(t) = self.terms.iter().find(|t| t.degree() < 2) {
            return Err(PotentialError::NotFlowPotential(format!(
                "term of degree {} with coefficient {}",
                t.degree(),
                t.coef
            )));
        }
        Ok(())
    }

    /// Order of vanishing `p`: the smallest degree with a nonzero component.
    pub fn order_p(&self) -> Result<u32> {
        self.check_flow_potential()?;
        self.terms
            .first()
            .map(Term::degree)
            .ok_or_else(|| PotentialError::NotFlowPotential("potential is identically zero".into()))
    }

    /// Leading homogeneous part `g_p`.
    pub fn leading_part(&self) -> Result<Potential> {
        let p = self.order_p()?;
        Ok(self.homogeneous_components().remove(&p).expect("order present"))
    }

    /// `d_r g(y) = <grad g(y), y> / |y|`.
    pub fn radial_derivative(&self, y: &[f64]) -> Result<f64> {
        let r = self.nonzero_norm(y)?;
        let g = self.grad(y)?;
        Ok(dot(&g, y) / r)
    }

    /// `grad' g = grad g - (d_r g) y / |y|`.
    pub fn spherical_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let r = self.nonzero_norm(y)?;
        let g = self.grad(y)?;
        Ok(project_tangent(&g, y, r))
    }

    /// `G_q(y) = g(y) / |y|^q`.
    pub fn normalized_value(&self, y: &[f64], q: f64) -> Result<f64> {
        let r = self.nonzero_norm(y)?;
        Ok(self.eval(y)? / r.powf(q))
    }

    fn nonzero_norm(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        let r = norm(y);
        if r == 0.0 {
            return Err(PotentialError::ZeroVector);
        }
        Ok(r)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("potential serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// Removes the component of `g` along `y` (with `r = |y| > 0`).
pub(crate) fn project_tangent(g: &[f64], y: &[f64], r: f64) -> Vec<f64> {
    let radial = dot(g, y) / (r * r);
    g.iter().zip(y).map(|(gi, yi)| gi - radial * yi).collect()
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", t.coef)?;
            for (i, &e) in t.exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*y{}", i + 1)?,
                    _ => write!(f, "*y{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}
