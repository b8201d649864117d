//! Surface-data experiments for wave propagation in a box and in a half-space.
//!
//! The box `[0, pi]^2` carries Neumann eigenfunctions
//! `phi_m = gamma_m cos(m1 x1) cos(m2 x2)`; a source with finitely many modal
//! coefficients `f_m(t)` produces `u = sum_m u_m(t) phi_m(x)` with
//! `u_m(t) = (c / sqrt(lambda_m)) int_0^t sin(c sqrt(lambda_m) (t - tau)) f_m(tau) dtau`.
//! Two wave speeds can yield identical traces on `x2 = 0`. The half-space
//! lifting extends Dirichlet data on `x3 = 0` to `x3 > 0` by the Poisson
//! integral of the Dirichlet Green function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

use crate::specfun::gauss_legendre_interval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeophysicsError {
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GeophysicsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trig {
    Cos,
    Sin,
}

/// `amp e^{-decay t} cos(freq t)` or `amp e^{-decay t} sin(freq t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTrigTerm {
    pub amp: f64,
    pub decay: f64,
    pub freq: f64,
    pub kind: Trig,
}

impl ExpTrigTerm {
    pub fn exp(amp: f64, decay: f64) -> Self {
        Self {
            amp,
            decay,
            freq: 0.0,
            kind: Trig::Cos,
        }
    }

    /// `(z, s)` with the term equal to `Re(z e^{s t})`.
    fn complex_form(&self) -> (Complex64, Complex64) {
        let z = match self.kind {
            Trig::Cos => Complex64::new(self.amp, 0.0),
            Trig::Sin => Complex64::new(0.0, -self.amp),
        };
        (z, Complex64::new(-self.decay, self.freq))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (z, s) = self.complex_form();
        (z * (s * t).exp()).re
    }
}

/// Modal time dependence `f_m(t)`.
#[derive(Clone)]
pub enum TimeSignal {
    /// Sum of exponential-trigonometric terms, integrated in closed form.
    ExpTrig(Vec<ExpTrigTerm>),
    /// Arbitrary sampler, integrated by adaptive Simpson quadrature.
    Sampler(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for TimeSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeSignal::ExpTrig(t) => f.debug_tuple("ExpTrig").field(t).finish(),
            TimeSignal::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

impl TimeSignal {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeSignal::ExpTrig(terms) => terms.iter().map(|x| x.eval(t)).sum(),
            TimeSignal::Sampler(f) => f(t),
        }
    }
}

/// Source with finitely many nonzero modal coefficients on `[0, pi]^2`.
#[derive(Debug, Clone, Default)]
pub struct BoxSource {
    pub modes: Vec<((usize, usize), TimeSignal)>,
}

/// Normalization `gamma_m` of the Neumann eigenfunction.
pub fn gamma(m1: usize, m2: usize) -> f64 {
    match (m1 > 0, m2 > 0) {
        (false, false) => 1.0 / PI,
        (true, true) => 2.0 / PI,
        _ => 2f64.sqrt() / PI,
    }
}

pub fn eigenfunction(m: (usize, usize), x: &[f64; 2]) -> f64 {
    gamma(m.0, m.1) * (m.0 as f64 * x[0]).cos() * (m.1 as f64 * x[1]).cos()
}

/// `int_0^t sin(w (t - tau)) e^{s tau} dtau`.
fn duhamel_sin(w: f64, s: Complex64, t: f64) -> Complex64 {
    let den = s * s + w * w;
    if den.norm() > 1e-8 * (s.norm_sqr() + w * w) {
        let (sn, cs) = (w * t).sin_cos();
        return ((s * t).exp() * w - w * cs - s * sn) / den;
    }
    // s = +-i w.
    let res = Complex64::new(0.0, -0.5) * t * Complex64::from_polar(1.0, w * t)
        + Complex64::new(0.0, (w * t).sin() / (2.0 * w));
    if s.im > 0.0 {
        res
    } else {
        res.conj()
    }
}

/// `int_0^t (t - tau) e^{s tau} dtau`.
fn duhamel_ramp(s: Complex64, t: f64) -> Complex64 {
    let st = s * t;
    if st.norm() < 1e-3 {
        return t * t * (0.5 + st / 6.0 + st * st / 24.0 + st * st * st / 120.0);
    }
    ((st).exp() - 1.0 - st) / (s * s)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> (f64, f64) {
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
        simpson: &dyn Fn(f64, f64, f64, f64, f64) -> f64,
    ) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let err = (left + right - whole) / 15.0;
        if depth == 0 || err.abs() <= tol {
            return (left + right + err, err.abs());
        }
        let (l, el) = rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, simpson);
        let (r, er) = rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, simpson);
        (l + r, el + er)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    rec(f, a, b, fa, fm, fb, whole, tol, depth, &simpson)
}

/// `u_m(t)` for wave speed `c`; the second value is the quadrature error
/// estimate when the signal had no closed form.
pub fn modal_amplitude(c: f64, m: (usize, usize), signal: &TimeSignal, t: f64) -> (f64, Option<f64>) {
    let lambda = (m.0 * m.0 + m.1 * m.1) as f64;
    let w = c * lambda.sqrt();
    match signal {
        TimeSignal::ExpTrig(terms) => {
            let total: Complex64 = terms
                .iter()
                .map(|term| {
                    let (z, s) = term.complex_form();
                    if lambda == 0.0 {
                        z * duhamel_ramp(s, t) * (c * c)
                    } else {
                        z * duhamel_sin(w, s, t) * (c / lambda.sqrt())
                    }
                })
                .sum();
            (total.re, None)
        }
        TimeSignal::Sampler(f) => {
            if t == 0.0 {
                return (0.0, Some(0.0));
            }
            let kernel = |tau: f64| {
                let k = if lambda == 0.0 {
                    c * c * (t - tau)
                } else {
                    c / lambda.sqrt() * (w * (t - tau)).sin()
                };
                k * f(tau)
            };
            let (v, err) = adaptive_simpson(&kernel, 0.0, t, 1e-12, 40);
            (v, Some(err))
        }
    }
}

/// `u(x, t) = sum_m u_m(t) phi_m(x)` over source modes with `m1, m2 <= m_trunc`.
pub fn box_wavefield(c: f64, src: &BoxSource, x: &[f64; 2], t: f64, m_trunc: usize) -> Result<f64> {
    if !(c > 0.0) {
        return Err(GeophysicsError::InvalidArgument(format!("wave speed must be positive, got {c}")));
    }
    if !(t >= 0.0) {
        return Err(GeophysicsError::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    if !(0.0..=PI).contains(&x[0]) || !(0.0..=PI).contains(&x[1]) {
        return Err(GeophysicsError::InvalidArgument(format!("point {x:?} lies outside [0, pi]^2")));
    }
    let mut u = 0.0;
    for (m, sig) in &src.modes {
        if m.0 > m_trunc || m.1 > m_trunc {
            continue;
        }
        let (um, err) = modal_amplitude(c, *m, sig, t);
        if let Some(e) = err {
            log::debug!("mode {m:?} at t = {t}: quadrature error estimate {e:e}");
        }
        u += um * eigenfunction(*m, x);
    }
    Ok(u)
}

/// Sampling grid for traces on `x2 = 0`: `n_x` points on `[0, pi]`, `n_t` on `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceGrid {
    pub n_x: usize,
    pub n_t: usize,
    pub t_max: f64,
}

impl Default for TraceGrid {
    fn default() -> Self {
        Self {
            n_x: 50,
            n_t: 200,
            t_max: 10.0,
        }
    }
}

impl TraceGrid {
    fn axis(n: usize, hi: f64) -> Vec<f64> {
        if n <= 1 {
            return vec![0.0];
        }
        (0..n).map(|k| hi * k as f64 / (n - 1) as f64).collect()
    }
}

/// `u(x1, 0, t)` on a grid, row-major in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTrace {
    pub x1: Vec<f64>,
    pub t: Vec<f64>,
    /// `values[i * x1.len() + j] = u(x1[j], 0, t[i])`.
    pub values: Vec<f64>,
}

pub fn surface_trace(c: f64, src: &BoxSource, grid: &TraceGrid, m_trunc: usize) -> Result<SurfaceTrace> {
    let x1 = TraceGrid::axis(grid.n_x, PI);
    let t = TraceGrid::axis(grid.n_t, grid.t_max);
    let mut values = Vec::with_capacity(x1.len() * t.len());
    for ti in &t {
        for xj in &x1 {
            values.push(box_wavefield(c, src, &[*xj, 0.0], *ti, m_trunc)?);
        }
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(GeophysicsError::InvalidArgument("trace contains non-finite values".into()));
    }
    Ok(SurfaceTrace { x1, t, values })
}

/// Source `f = sqrt(2)/pi [f01(t) cos x2 + f02(t) cos 2x2]` with `f02 = e^{-t}` and
/// `f01 = -(2/17) e^{-t} - (15/17) [cos 4t + sin_sign (1/4) sin 4t]`.
/// `sin_sign = -1` makes the surface traces for `c = 1` and `c = 2` coincide.
pub fn nonuniqueness_source(sin_sign: f64) -> BoxSource {
    let f01 = vec![
        ExpTrigTerm::exp(-2.0 / 17.0, 1.0),
        ExpTrigTerm {
            amp: -15.0 / 17.0,
            decay: 0.0,
            freq: 4.0,
            kind: Trig::Cos,
        },
        ExpTrigTerm {
            amp: -15.0 / 17.0 * sin_sign * 0.25,
            decay: 0.0,
            freq: 4.0,
            kind: Trig::Sin,
        },
    ];
    BoxSource {
        modes: vec![
            ((0, 1), TimeSignal::ExpTrig(f01)),
            ((0, 2), TimeSignal::ExpTrig(vec![ExpTrigTerm::exp(1.0, 1.0)])),
        ],
    }
}

/// `max |u_1 - u_2|` on the trace grid for speeds `c1`, `c2` and a common source.
pub fn trace_residual(c1: f64, c2: f64, src: &BoxSource, grid: &TraceGrid, m_trunc: usize) -> Result<f64> {
    let a = surface_trace(c1, src, grid, m_trunc)?;
    let b = surface_trace(c2, src, grid, m_trunc)?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// [`trace_residual`] for `c1 = 1`, `c2 = 2` and [`nonuniqueness_source`]`(-1)`.
pub fn nonuniqueness_residual(grid: &TraceGrid, m_trunc: usize) -> Result<f64> {
    trace_residual(1.0, 2.0, &nonuniqueness_source(-1.0), grid, m_trunc)
}

/// Laplace transforms `f01~(p) = -(p^2 + 1) / ((p + 1)(p^2 + 16))`, `f02~(p) = 1 / (p + 1)`.
fn laplace_sources(p: f64) -> [f64; 2] {
    [-(p * p + 1.0) / ((p + 1.0) * (p * p + 16.0)), 1.0 / (p + 1.0)]
}

fn check_p(p_grid: &[f64]) -> Result<()> {
    if p_grid.is_empty() || p_grid.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(GeophysicsError::InvalidArgument("Laplace variables must be positive".into()));
    }
    Ok(())
}

/// `max_p |sum_{m2} gamma_{0 m2} f~_m(p) [c1^2 / (p^2 + c1^2 l) - c2^2 / (p^2 + c2^2 l)]|`, `l = m2^2`.
pub fn laplace_identity_residual(p_grid: &[f64], c1: f64, c2: f64) -> Result<f64> {
    check_p(p_grid)?;
    Ok(p_grid
        .iter()
        .map(|&p| {
            let f = laplace_sources(p);
            (1..=2usize)
                .map(|m2| {
                    let l = (m2 * m2) as f64;
                    gamma(0, m2)
                        * f[m2 - 1]
                        * (c1 * c1 / (p * p + c1 * c1 * l) - c2 * c2 / (p * p + c2 * c2 * l))
                })
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max))
}

/// [`laplace_identity_residual`] at `c1 = 1`, `c2 = 2`.
pub fn verify_laplace_identity(p_grid: &[f64]) -> Result<f64> {
    laplace_identity_residual(p_grid, 1.0, 2.0)
}

/// `max_p |f01~(p) - (-(2/17)/(p+1) - (15/17)(p-1)/(p^2+16))|`.
pub fn partial_fraction_residual(p_grid: &[f64]) -> Result<f64> {
    check_p(p_grid)?;
    Ok(p_grid
        .iter()
        .map(|&p| {
            let pf = -(2.0 / 17.0) / (p + 1.0) - (15.0 / 17.0) * (p - 1.0) / (p * p + 16.0);
            (laplace_sources(p)[0] - pf).abs()
        })
        .fold(0.0, f64::max))
}

/// Quadrature controls for [`lift_halfspace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftOptions {
    pub n_phi: usize,
    pub nodes_per_panel: usize,
    /// Largest radial panel width away from the target foot.
    pub max_panel: f64,
    /// Edge flag threshold for `max |w| on the rim / max |w| sampled`.
    pub edge_tol: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            n_phi: 96,
            nodes_per_panel: 16,
            max_panel: 1.0,
            edge_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftResult {
    pub value: Complex64,
    /// `max |w|` on the rim over `max |w|` at the quadrature nodes.
    pub edge_ratio: f64,
    /// Set when the trace has not decayed at the rim (truncated-aperture bias).
    pub edge_flagged: bool,
}

/// `dG_1/dy3` at `y3 = 0` for the half-space Dirichlet Green function
/// `G_1(x, y) = g(x - y) - g(x - y~)`: `x3 e^{iR} (1 - iR) / (2 pi R^3)`.
fn poisson_kernel(x3: f64, r: f64) -> Complex64 {
    Complex64::from_polar(1.0, r) * Complex64::new(1.0, -r) * (x3 / (2.0 * PI * r.powi(3)))
}

/// `w(x) = int_P dG_1(x, y)/dy3 w(y) dy'` over the disk `|y'| <= radius` for `x3 > 0`.
/// Polar quadrature about the foot of `x`, radially graded toward it.
pub fn lift_halfspace<F>(trace: F, radius: f64, target: &[f64; 3], opts: &LiftOptions) -> Result<LiftResult>
where
    F: Fn(&[f64; 2]) -> Complex64,
{
    let x3 = target[2];
    if !(x3 > 0.0) {
        return Err(GeophysicsError::InvalidArgument(format!("target must lie above the plane, got x3 = {x3}")));
    }
    let foot = [target[0], target[1]];
    let f2 = foot[0] * foot[0] + foot[1] * foot[1];
    if !(radius > 0.0) || f2 >= radius * radius {
        return Err(GeophysicsError::InvalidArgument("target foot must lie inside the aperture disk".into()));
    }
    let mut value = Complex64::new(0.0, 0.0);
    let mut peak = 0.0f64;
    let dphi = 2.0 * PI / opts.n_phi as f64;
    for k in 0..opts.n_phi {
        let phi = (k as f64 + 0.5) * dphi;
        let d = [phi.cos(), phi.sin()];
        let fd = foot[0] * d[0] + foot[1] * d[1];
        let rho_max = -fd + (fd * fd - f2 + radius * radius).sqrt();
        // Panels: geometric toward the foot, then at most max_panel wide.
        let mut edges = vec![0.0];
        let mut e = x3 / 16.0;
        while e < rho_max.min(opts.max_panel) {
            edges.push(e);
            e *= 2.0;
        }
        let mut last = *edges.last().unwrap();
        let n_tail = ((rho_max - last) / opts.max_panel).ceil().max(1.0) as usize;
        let step = (rho_max - last) / n_tail as f64;
        for _ in 0..n_tail {
            last += step;
            edges.push(last);
        }
        for w in edges.windows(2) {
            let (nodes, weights) = gauss_legendre_interval(opts.nodes_per_panel, w[0], w[1]);
            for (rho, wt) in nodes.iter().zip(&weights) {
                let y = [foot[0] + rho * d[0], foot[1] + rho * d[1]];
                let wy = trace(&y);
                peak = peak.max(wy.norm());
                let r = (rho * rho + x3 * x3).sqrt();
                value += poisson_kernel(x3, r) * wy * (wt * rho * dphi);
            }
        }
    }
    let rim = (0..opts.n_phi)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / opts.n_phi as f64;
            trace(&[radius * phi.cos(), radius * phi.sin()]).norm()
        })
        .fold(0.0, f64::max);
    let edge_ratio = if peak > 0.0 { rim / peak } else { 0.0 };
    Ok(LiftResult {
        value,
        edge_ratio,
        edge_flagged: edge_ratio > opts.edge_tol,
    })
}
