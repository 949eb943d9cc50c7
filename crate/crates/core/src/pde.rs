//! Fourier–Galerkin simulator for `u_t = u_xx + u + s u^3` on the circle, with
//! eigenmode projections and neutral-mode observables.
//!
//! The cubic term is evaluated by exact convolution in coefficient space
//! (no aliasing, and modes outside an invariant subspace stay exactly zero).
//! Time stepping is ETDRK4 with the linear part integrated exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{ode::sample_times, Sample, Trajectory, TrajectoryMeta};

#[derive(Error, Debug)]
pub enum PdeError {
    #[error("numerical instability at t = {t:.6e}")]
    Unstable { t: f64, last_state: Box<SpectralState> },
    #[error("solution left the validity ball ||u|| <= {radius} at t = {t:.6e}")]
    OutsideValidityBall { t: f64, radius: f64, last_state: Box<SpectralState> },
    #[error("unstable constant mode excited: |xi_0| = {amplitude:.3e} at t = {t:.6e}")]
    UnstableModeExcited { t: f64, amplitude: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Flow(#[from] crate::flow::FlowError),
}

pub type Result<T> = std::result::Result<T, PdeError>;

/// Sign of the cubic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `u_t = u_xx + u - u^3`
    Cubic,
    /// `u_t = u_xx + u + u^3`
    Flipped,
    /// `u_t = u_xx + u`
    Linear,
}

impl Model {
    pub fn s(self) -> f64 {
        match self {
            Model::Cubic => -1.0,
            Model::Flipped => 1.0,
            Model::Linear => 0.0,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Cubic => "cubic",
            Model::Flipped => "flipped",
            Model::Linear => "linear",
        })
    }
}

impl FromStr for Model {
    type Err = PdeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cubic" => Ok(Model::Cubic),
            "flipped" => Ok(Model::Flipped),
            "linear" => Ok(Model::Linear),
            _ => Err(PdeError::Invalid(format!("unknown model '{s}' (expected cubic, flipped or linear)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Etdrk4,
    /// First-order: implicit linear part, explicit cubic term.
    ImexEuler,
}

/// Eigenvalue `1 - k^2` of `d^2/dx^2 + 1` on `cos(kx)`, `sin(kx)`.
pub fn eigenvalue(k: usize) -> f64 {
    1.0 - (k * k) as f64
}

/// A real field `u(x) = sum_{|k| <= K} c_k e^{ikx}` stored as `c_0..c_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    pub k_max: usize,
    pub coeffs: Vec<Complex64>,
    pub time: f64,
}

impl SpectralState {
    pub fn zero(k_max: usize) -> Self {
        SpectralState {
            k_max,
            coeffs: vec![Complex64::new(0.0, 0.0); k_max + 1],
            time: 0.0,
        }
    }

    /// `u = sum a_k cos(kx) + b_k sin(kx)` from `(k, a_k, b_k)` triples.
    pub fn from_modes(k_max: usize, modes: &[(usize, f64, f64)]) -> Result<Self> {
        let mut s = Self::zero(k_max);
        for &(k, a, b) in modes {
            if k > k_max {
                return Err(PdeError::Invalid(format!("mode {k} exceeds cutoff {k_max}")));
            }
            if k == 0 {
                s.coeffs[0] += Complex64::new(a, 0.0);
            } else {
                s.coeffs[k] += Complex64::new(0.5 * a, -0.5 * b);
            }
        }
        Ok(s)
    }

    /// `amplitude * cos(x - theta0)`.
    pub fn neutral_data(k_max: usize, amplitude: f64, theta0: f64) -> Result<Self> {
        Self::from_modes(k_max, &[(1, amplitude * theta0.cos(), amplitude * theta0.sin())])
    }

    /// Interpolates a real function on the `4K + 2`-point grid.
    pub fn from_function(k_max: usize, f: impl Fn(f64) -> f64) -> Self {
        let m = 4 * k_max + 2;
        let vals: Vec<f64> = (0..m).map(|j| f(2.0 * PI * j as f64 / m as f64)).collect();
        let mut s = Self::zero(k_max);
        for k in 0..=k_max {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in vals.iter().enumerate() {
                let ang = -2.0 * PI * (k * j) as f64 / m as f64;
                acc += Complex64::from_polar(*v, ang);
            }
            s.coeffs[k] = acc / m as f64;
        }
        s.coeffs[0].im = 0.0;
        s
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut u = self.coeffs[0].re;
        for k in 1..=self.k_max {
            u += 2.0 * (self.coeffs[k] * Complex64::from_polar(1.0, k as f64 * x)).re;
        }
        u
    }

    pub fn norm_l2(&self) -> f64 {
        let mut s = self.coeffs[0].norm_sqr();
        for c in &self.coeffs[1..] {
            s += 2.0 * c.norm_sqr();
        }
        (2.0 * PI * s).sqrt()
    }

    /// Coordinates in the orthonormal eigenbasis
    /// `[1/sqrt(2pi), cos(x)/sqrt(pi), sin(x)/sqrt(pi), cos(2x)/sqrt(pi), ...]`.
    pub fn modes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.k_max + 1);
        out.push((2.0 * PI).sqrt() * self.coeffs[0].re);
        let s = 2.0 * PI.sqrt();
        for c in &self.coeffs[1..] {
            out.push(s * c.re);
            out.push(-s * c.im);
        }
        out
    }

    /// Inverse of [`SpectralState::modes`].
    pub fn from_mode_vector(k_max: usize, xi: &[f64]) -> Result<Self> {
        if xi.len() != 2 * k_max + 1 {
            return Err(PdeError::Invalid(format!("expected {} mode coordinates, got {}", 2 * k_max + 1, xi.len())));
        }
        let mut s = Self::zero(k_max);
        s.coeffs[0] = Complex64::new(xi[0] / (2.0 * PI).sqrt(), 0.0);
        let f = 2.0 * PI.sqrt();
        for k in 1..=k_max {
            s.coeffs[k] = Complex64::new(xi[2 * k - 1] / f, -xi[2 * k] / f);
        }
        Ok(s)
    }

    /// Neutral coordinates `x = (xi_cos1, xi_sin1)`.
    pub fn neutral(&self) -> [f64; 2] {
        let s = 2.0 * PI.sqrt();
        match self.coeffs.get(1) {
            Some(c) => [s * c.re, -s * c.im],
            None => [0.0, 0.0],
        }
    }

    /// `u(x - psi)`.
    pub fn rotated(&self, psi: f64) -> Self {
        let mut s = self.clone();
        for (k, c) in s.coeffs.iter_mut().enumerate() {
            *c *= Complex64::from_polar(1.0, -(k as f64) * psi);
        }
        s
    }

    /// Full (two-sided) coefficient array indexed by `k + K`.
    fn two_sided(&self) -> Vec<Complex64> {
        let k = self.k_max;
        let mut full = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
        for j in 0..=k {
            full[k + j] = self.coeffs[j];
            full[k - j] = self.coeffs[j].conj();
        }
        full
    }

    /// Coefficients of `u^2` for `|j| <= 2K`, indexed by `j + 2K`.
    fn square(&self) -> Vec<Complex64> {
        let k = self.k_max;
        let full = self.two_sided();
        let mut sq = vec![Complex64::new(0.0, 0.0); 4 * k + 1];
        for (a, ca) in full.iter().enumerate() {
            if *ca == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (b, cb) in full.iter().enumerate() {
                sq[a + b] += ca * cb;
            }
        }
        sq
    }

    /// Galerkin projection of `u^3` onto `|k| <= K`, returned for `k = 0..K`.
    pub fn cube(&self) -> Vec<Complex64> {
        let k = self.k_max;
        let full = self.two_sided();
        let sq = self.square();
        let mut out = vec![Complex64::new(0.0, 0.0); k + 1];
        // (u^3)_m = sum_j sq_j c_{m-j}
        for (m, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (b, cb) in full.iter().enumerate() {
                if *cb == Complex64::new(0.0, 0.0) {
                    continue;
                }
                // index of c is b - K; need j = m - (b - K) in [-2K, 2K]
                let j = m as i64 - (b as i64 - k as i64);
                let idx = j + 2 * k as i64;
                if idx >= 0 && idx <= 4 * k as i64 {
                    acc += sq[idx as usize] * cb;
                }
            }
            *o = acc;
        }
        out[0].im = 0.0;
        out
    }

    /// `F(u) = int 1/2 u_x^2 - 1/2 u^2 - s/4 u^4 dx`.
    pub fn energy(&self, model: Model) -> f64 {
        let mut grad = 0.0;
        let mut l2 = self.coeffs[0].norm_sqr();
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            grad += 2.0 * (k * k) as f64 * c.norm_sqr();
            l2 += 2.0 * c.norm_sqr();
        }
        let quartic = if model.s() != 0.0 {
            self.square().iter().map(|c| c.norm_sqr()).sum::<f64>()
        } else {
            0.0
        };
        2.0 * PI * (0.5 * grad - 0.5 * l2 - 0.25 * model.s() * quartic)
    }

    /// Upper bound on `max |u|`.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs[0].norm() + 2.0 * self.coeffs[1..].iter().map(|c| c.norm()).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Observables recorded along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub norm_l2: f64,
    pub x1: f64,
    pub x2: f64,
    pub energy: f64,
    /// `|xi|` over modes with positive eigenvalue (k = 0).
    pub xplus: f64,
    /// Over the kernel (k = 1).
    pub xzero: f64,
    /// Over modes with negative eigenvalue (k >= 2).
    pub xminus: f64,
}

impl Observables {
    pub fn of(state: &SpectralState, model: Model) -> Self {
        let xi = state.modes();
        let xplus = xi[0].abs();
        let (x1, x2) = if xi.len() >= 3 { (xi[1], xi[2]) } else { (0.0, 0.0) };
        let xzero = x1.hypot(x2);
        let xminus = xi.iter().skip(3).map(|v| v * v).sum::<f64>().sqrt();
        Observables {
            t: state.time,
            norm_l2: state.norm_l2(),
            x1,
            x2,
            energy: state.energy(model),
            xplus,
            xzero,
            xminus,
        }
    }

    pub const CSV_HEADER: [&'static str; 8] = ["t", "norm_L2", "x1", "x2", "F_u", "Xplus", "Xzero", "Xminus"];

    pub fn csv_record(&self) -> [String; 8] {
        [self.t, self.norm_l2, self.x1, self.x2, self.energy, self.xplus, self.xzero, self.xminus].map(|v| format!("{v:?}"))
    }
}

#[derive(Debug, Clone)]
pub struct PdeRun {
    pub model: Model,
    pub observables: Vec<Observables>,
    /// Mode-coordinate trajectory (`y` = eigenbasis coordinates, `g` = energy).
    pub trajectory: Trajectory,
    pub final_state: SpectralState,
    pub steps: usize,
}

impl PdeRun {
    pub fn write_observables_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Observables::CSV_HEADER)?;
        for o in &self.observables {
            wr.write_record(o.csv_record())?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Writes a state snapshot as CSV rows `k,re,im`.
pub fn write_state_csv<W: std::io::Write>(state: &SpectralState, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["k", "re", "im"])?;
    for (k, c) in state.coeffs.iter().enumerate() {
        wr.write_record([k.to_string(), format!("{:?}", c.re), format!("{:?}", c.im)])?;
    }
    wr.flush()?;
    Ok(())
}

struct EtdCoeffs {
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

fn etd_coeffs(k_max: usize, h: f64) -> EtdCoeffs {
    let mut c = EtdCoeffs {
        e: vec![0.0; k_max + 1],
        e2: vec![0.0; k_max + 1],
        q: vec![0.0; k_max + 1],
        f1: vec![0.0; k_max + 1],
        f2: vec![0.0; k_max + 1],
        f3: vec![0.0; k_max + 1],
    };
    const M: usize = 32;
    for k in 0..=k_max {
        let z = h * eigenvalue(k);
        c.e[k] = z.exp();
        c.e2[k] = (0.5 * z).exp();
        let (q, f1, f2, f3) = if z.abs() < 1.0 {
            // contour mean avoids cancellation near z = 0
            let mut acc = [Complex64::new(0.0, 0.0); 4];
            for j in 0..M {
                let r = z + Complex64::from_polar(1.0, PI * (j as f64 + 0.5) / M as f64);
                let er = r.exp();
                let r3 = r * r * r;
                acc[0] += ((0.5 * r).exp() - 1.0) / r;
                acc[1] += (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3;
                acc[2] += (2.0 + r + er * (r - 2.0)) / r3;
                acc[3] += (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3;
            }
            // the contour is symmetric under conjugation: real parts of the half-circle sum
            let m = M as f64;
            (acc[0].re / m, acc[1].re / m, acc[2].re / m, acc[3].re / m)
        } else {
            let ez = z.exp();
            let z3 = z * z * z;
            (
                ((0.5 * z).exp() - 1.0) / z,
                (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3,
                (2.0 + z + ez * (z - 2.0)) / z3,
                (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3,
            )
        };
        c.q[k] = h * q;
        c.f1[k] = h * f1;
        c.f2[k] = h * f2;
        c.f3[k] = h * f3;
    }
    c
}

fn nonlinear(state: &SpectralState, s: f64) -> Vec<Complex64> {
    if s == 0.0 {
        return vec![Complex64::new(0.0, 0.0); state.k_max + 1];
    }
    state.cube().into_iter().map(|c| c * s).collect()
}

fn step(state: &SpectralState, model: Model, h: f64, scheme: Scheme) -> SpectralState {
    let s = model.s();
    let k_max = state.k_max;
    let mut out = state.clone();
    out.time = state.time + h;
    match scheme {
        Scheme::ImexEuler => {
            let n = nonlinear(state, s);
            for k in 0..=k_max {
                out.coeffs[k] = (state.coeffs[k] + n[k] * h) / (1.0 - h * eigenvalue(k));
            }
        }
        Scheme::Etdrk4 => {
            let c = etd_coeffs(k_max, h);
            let u = &state.coeffs;
            let nu = nonlinear(state, s);
            let mut a = state.clone();
            for k in 0..=k_max {
                a.coeffs[k] = u[k] * c.e2[k] + nu[k] * c.q[k];
            }
            let na = nonlinear(&a, s);
            let mut b = state.clone();
            for k in 0..=k_max {
                b.coeffs[k] = u[k] * c.e2[k] + na[k] * c.q[k];
            }
            let nb = nonlinear(&b, s);
            let mut cc = state.clone();
            for k in 0..=k_max {
                cc.coeffs[k] = a.coeffs[k] * c.e2[k] + (nb[k] * 2.0 - nu[k]) * c.q[k];
            }
            let nc = nonlinear(&cc, s);
            for k in 0..=k_max {
                out.coeffs[k] = u[k] * c.e[k] + nu[k] * c.f1[k] + (na[k] + nb[k]) * (2.0 * c.f2[k]) + nc[k] * c.f3[k];
            }
        }
    }
    out.coeffs[0].im = 0.0;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    /// Base step; the actual step is `dt * min(max(1, t / 0.1), 200 / (3 |s| max|u|^2))`,
    /// so halving `dt` halves every step.
    pub dt: f64,
    pub scheme: Scheme,
    pub samples_per_decade: usize,
    pub max_sample_gap: Option<f64>,
    /// Abort once `||u||` exceeds this radius.
    pub validity_radius: Option<f64>,
    /// Abort once `|xi_0|` exceeds this value.
    pub max_constant_mode: Option<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt: 1e-3,
            scheme: Scheme::Etdrk4,
            samples_per_decade: 40,
            max_sample_gap: None,
            validity_radius: Some(0.5),
            max_constant_mode: None,
        }
    }
}

fn guard(state: &SpectralState, prev: &SpectralState, opts: &EvolveOptions) -> Result<()> {
    if !state.is_finite() {
        return Err(PdeError::Unstable {
            t: state.time,
            last_state: Box::new(prev.clone()),
        });
    }
    if let Some(radius) = opts.validity_radius {
        if state.norm_l2() > radius {
            return Err(PdeError::OutsideValidityBall {
                t: state.time,
                radius,
                last_state: Box::new(prev.clone()),
            });
        }
    }
    if let Some(cap) = opts.max_constant_mode {
        let amp = (2.0 * PI).sqrt() * state.coeffs[0].re.abs();
        if amp > cap {
            return Err(PdeError::UnstableModeExcited { t: state.time, amplitude: amp });
        }
    }
    Ok(())
}

fn trajectory_of(model: Model, states: &[SpectralState], label: String) -> Result<Trajectory> {
    let samples = states
        .iter()
        .map(|s| Sample {
            t: s.time,
            y: s.modes(),
            v: None,
            g: s.energy(model),
        })
        .collect();
    Ok(Trajectory::new(
        samples,
        TrajectoryMeta {
            potential: label,
            integrator: "fourier-galerkin etdrk4".into(),
            error_model: "none".into(),
            ..Default::default()
        },
    )?)
}

/// Fixed-step evolution recording every step.
pub fn evolve(state: &SpectralState, model: Model, dt: f64, n_steps: usize, scheme: Scheme) -> Result<PdeRun> {
    if !(dt > 0.0) {
        return Err(PdeError::Invalid(format!("dt must be positive, got {dt}")));
    }
    let opts = EvolveOptions { dt, scheme, validity_radius: None, ..Default::default() };
    let mut states = vec![state.clone()];
    let mut cur = state.clone();
    for _ in 0..n_steps {
        let next = step(&cur, model, dt, scheme);
        guard(&next, &cur, &opts)?;
        cur = next;
        states.push(cur.clone());
    }
    let observables = states.iter().map(|s| Observables::of(s, model)).collect();
    Ok(PdeRun {
        model,
        observables,
        trajectory: trajectory_of(model, &states, format!("{model} K={}", state.k_max))?,
        final_state: cur,
        steps: n_steps,
    })
}

/// Adaptive-horizon evolution to `t_end` with geometric output sampling.
pub fn evolve_until(state: &SpectralState, model: Model, t_end: f64, opts: &EvolveOptions) -> Result<PdeRun> {
    if !(opts.dt > 0.0) || !(t_end > state.time) {
        return Err(PdeError::Invalid(format!("need dt > 0 and t_end > t0 (dt={}, t_end={t_end})", opts.dt)));
    }
    let ts = sample_times(state.time, t_end, opts.samples_per_decade, opts.max_sample_gap);
    let s = model.s().abs();
    let mut states = vec![state.clone()];
    let mut cur = state.clone();
    guard(&cur, &cur, opts)?;
    let mut steps = 0;
    for &target in &ts[1..] {
        while cur.time < target {
            let growth = (cur.time / 0.1).max(1.0);
            let cap = if s > 0.0 {
                let um = cur.sup_bound();
                200.0 / (3.0 * s * um * um).max(1e-300)
            } else {
                f64::INFINITY
            };
            let mut h = opts.dt * growth.min(cap);
            if cur.time + h >= target || target - (cur.time + h) < 1e-12 * target.abs().max(1.0) {
                h = target - cur.time;
            }
            let mut next = step(&cur, model, h, opts.scheme);
            if target - next.time < 1e-12 * target.abs().max(1.0) {
                next.time = target;
            }
            guard(&next, &cur, opts)?;
            cur = next;
            steps += 1;
        }
        states.push(cur.clone());
    }
    let observables = states.iter().map(|s| Observables::of(s, model)).collect();
    Ok(PdeRun {
        model,
        observables,
        trajectory: trajectory_of(model, &states, format!("{model} K={}", state.k_max))?,
        final_state: cur,
        steps,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlowDecayReport {
    pub t: Vec<f64>,
    pub sqrt_t_norm: Vec<f64>,
    /// Angle of the neutral coordinates `x(t)`.
    pub direction_angle: Vec<f64>,
    pub xplus: Vec<f64>,
    pub xzero: Vec<f64>,
    pub xminus: Vec<f64>,
    pub final_sqrt_t_norm: f64,
    pub final_angle: f64,
    pub steps: usize,
}

/// Runs from `amplitude cos(x - theta0)` and collects the slow-decay series.
pub fn slow_decay_report(
    model: Model,
    amplitude: f64,
    theta0: f64,
    k_max: usize,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<(SlowDecayReport, PdeRun)> {
    if !(amplitude > 0.0 && amplitude <= 0.2) {
        return Err(PdeError::Invalid(format!("amplitude must lie in (0, 0.2], got {amplitude}")));
    }
    let init = SpectralState::neutral_data(k_max, amplitude, theta0)?;
    let opts = EvolveOptions {
        max_constant_mode: Some(opts.max_constant_mode.unwrap_or(1e-6)),
        ..opts.clone()
    };
    let run = evolve_until(&init, model, t_end, &opts)?;
    let obs = &run.observables;
    let t: Vec<f64> = obs.iter().map(|o| o.t).collect();
    let sqrt_t_norm: Vec<f64> = obs.iter().map(|o| o.t.sqrt() * o.norm_l2).collect();
    let direction_angle: Vec<f64> = obs.iter().map(|o| o.x2.atan2(o.x1)).collect();
    let rep = SlowDecayReport {
        final_sqrt_t_norm: *sqrt_t_norm.last().expect("non-empty"),
        final_angle: *direction_angle.last().expect("non-empty"),
        xplus: obs.iter().map(|o| o.xplus).collect(),
        xzero: obs.iter().map(|o| o.xzero).collect(),
        xminus: obs.iter().map(|o| o.xminus).collect(),
        t,
        sqrt_t_norm,
        direction_angle,
        steps: run.steps,
    };
    Ok((rep, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(k_max: usize, band: usize, seed: u64, scale: f64) -> SpectralState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(usize, f64, f64)> = (1..=band)
            .map(|k| (k, scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0)))
            .collect();
        SpectralState::from_modes(k_max, &modes).unwrap()
    }

    #[test]
    fn projections() {
        let s = SpectralState::from_modes(8, &[(1, 1.0, 0.0)]).unwrap();
        let x = s.neutral();
        assert!((x[0] - PI.sqrt()).abs() < 1e-15 && x[1] == 0.0);
        let s = SpectralState::from_modes(8, &[(2, 1.0, 0.0)]).unwrap();
        assert_eq!(s.neutral(), [0.0, 0.0]);
        let s = random_state(16, 16, 3, 1.0);
        let xi = s.modes();
        let sum: f64 = xi.iter().map(|v| v * v).sum();
        assert!((sum - s.norm_l2().powi(2)).abs() < 1e-10);
        // quadrature check of the L2 norm
        let m = 2000;
        let quad: f64 = (0..m).map(|j| s.eval(2.0 * PI * j as f64 / m as f64).powi(2)).sum::<f64>() * 2.0 * PI / m as f64;
        assert!((quad - sum).abs() < 1e-10 * sum);
        let back = SpectralState::from_mode_vector(16, &xi).unwrap();
        for (a, b) in back.coeffs.iter().zip(&s.coeffs) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn from_function_recovers_modes() {
        let s = SpectralState::from_function(8, |x| 0.3 + (2.0 * x).cos() - 0.5 * (3.0 * x).sin());
        let xi = s.modes();
        assert!((xi[0] - 0.3 * (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((xi[3] - PI.sqrt()).abs() < 1e-12);
        assert!((xi[6] + 0.5 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cube_matches_quadrature() {
        let s = random_state(6, 6, 9, 0.3);
        let cube = s.cube();
        let m = 4096;
        for k in 0..=6 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m {
                let x = 2.0 * PI * j as f64 / m as f64;
                acc += Complex64::from_polar(s.eval(x).powi(3), -(k as f64) * x);
            }
            acc /= m as f64;
            assert!((acc - cube[k]).norm() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn energy_matches_quadrature() {
        let s = random_state(6, 6, 4, 0.3);
        let m = 4096;
        let h = 1e-6;
        let quad: f64 = (0..m)
            .map(|j| {
                let x = 2.0 * PI * j as f64 / m as f64;
                let u = s.eval(x);
                let ux = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
                0.5 * ux * ux - 0.5 * u * u + 0.25 * u.powi(4)
            })
            .sum::<f64>()
            * 2.0
            * PI
            / m as f64;
        assert!((quad - s.energy(Model::Cubic)).abs() < 1e-7);
    }

    #[test]
    fn zero_stays_zero() {
        let run = evolve(&SpectralState::zero(16), Model::Cubic, 1e-2, 100, Scheme::Etdrk4).unwrap();
        assert!(run.final_state.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn linear_model_is_exact() {
        let s = SpectralState::from_modes(8, &[(2, 0.1, 0.0), (3, 0.0, 0.05)]).unwrap();
        let run = evolve(&s, Model::Linear, 0.1, 20, Scheme::Etdrk4).unwrap();
        let t: f64 = 2.0;
        let c2 = run.final_state.coeffs[2].re;
        assert!((c2 - 0.05 * (-3.0 * t).exp()).abs() < 1e-15);
    }

    #[test]
    fn energy_dissipation_and_parity() {
        let s = SpectralState::from_modes(32, &[(2, 0.1, 0.03), (6, -0.05, 0.0)]).unwrap();
        let run = evolve_until(&s, Model::Cubic, 5.0, &EvolveOptions::default()).unwrap();
        for w in run.observables.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-10);
        }
        for (k, c) in run.final_state.coeffs.iter().enumerate() {
            if k % 4 != 2 {
                assert!(c.norm() < 1e-12, "mode {k}");
            }
        }
    }

    #[test]
    fn rotation_equivariance() {
        let s = random_state(24, 5, 11, 0.05);
        let opts = EvolveOptions::default();
        let psi = 0.7;
        let a = evolve_until(&s.rotated(psi), Model::Cubic, 10.0, &opts).unwrap().final_state;
        let b = evolve_until(&s, Model::Cubic, 10.0, &opts).unwrap().final_state.rotated(psi);
        let diff: f64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let size: f64 = b.coeffs.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff <= 1e-8 * size);
    }

    #[test]
    fn fast_decay_rate() {
        let s = SpectralState::from_modes(32, &[(2, 0.05, 0.0)]).unwrap();
        let run = evolve_until(&s, Model::Cubic, 8.0, &EvolveOptions { max_sample_gap: Some(0.1), ..Default::default() }).unwrap();
        let o = &run.observables;
        let n = o.len();
        let slope = (o[n - 1].norm_l2.ln() - o[n - 11].norm_l2.ln()) / (o[n - 1].t - o[n - 11].t);
        assert!((slope + 3.0).abs() < 0.06, "{slope}");
    }

    #[test]
    fn stiff_but_stable_with_large_k() {
        let s = random_state(128, 3, 5, 0.05);
        let run = evolve(&s, Model::Cubic, 0.01, 50, Scheme::Etdrk4).unwrap();
        assert!(run.final_state.is_finite());
        // first-order scheme: halving the step halves the gap to ETDRK4
        let gap = |h: f64, n: usize| {
            let imex = evolve(&s, Model::Cubic, h, n, Scheme::ImexEuler).unwrap();
            (imex.final_state.norm_l2() - run.final_state.norm_l2()).abs()
        };
        let ratio = gap(0.01, 50) / gap(0.005, 100);
        assert!((1.8..2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn flipped_model_leaves_ball() {
        let s = SpectralState::neutral_data(16, 0.2, 0.0).unwrap();
        let r = evolve_until(&s, Model::Flipped, 1e4, &EvolveOptions::default());
        assert!(matches!(r, Err(PdeError::OutsideValidityBall { .. })));
    }

    #[test]
    fn model_parsing() {
        assert_eq!("cubic".parse::<Model>().unwrap(), Model::Cubic);
        assert!("quintic".parse::<Model>().is_err());
    }
}
