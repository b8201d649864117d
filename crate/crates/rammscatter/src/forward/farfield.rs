//! The scattering amplitude stored as a double harmonic expansion.
//!
//! `A(a', a) = sum_{p,q} C_{pq} Y_p(a') conj(Y_q(a))`, so that the coefficient
//! functions of the outgoing direction are `A_p(a) = sum_q C_{pq} conj(Y_q(a))`
//! and, for a radial potential, `C` is diagonal with entries
//! `A_l = 4 pi e^{i delta_l} sin(delta_l)`. In this basis the scattering operator
//! is the matrix `S = I + (i / 2 pi) C`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::radial::PhaseShifts;
use super::{ForwardError, Result};
use crate::specfun::{degree_of, n_harmonics, sph_harm_real, sph_harm_vec, sph_hankel_all, S2Quadrature};
use crate::variety::ComplexDirection;

/// Where a [`FarField`] came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub solver: String,
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
    pub potential_hash: String,
}

/// Noise applied before truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub delta: f64,
    pub seed: u64,
    pub n_trunc: usize,
}

/// Coefficient matrix `C_{pq}`, `p, q < (L+1)^2`, of the scattering amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FarField {
    pub l: usize,
    pub coeffs: DMatrix<Complex64>,
    /// Support radius of the generating potential or obstacle.
    pub a: f64,
    pub meta: Provenance,
    pub noise: Option<NoiseRecord>,
}

/// Outgoing direction for [`amplitude_eval`].
#[derive(Debug, Clone, Copy)]
pub enum Direction {
    Real([f64; 3]),
    Complex(ComplexDirection),
}

/// Amplitude value with its truncation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeValue {
    pub value: Complex64,
    /// Geometric extrapolation of the discarded degrees.
    pub tail_estimate: f64,
    /// Set when the tail estimate exceeds 1% of `|value|`.
    pub tail_flagged: bool,
}

impl FarField {
    pub fn zeros(l: usize, a: f64) -> Self {
        let n = n_harmonics(l);
        Self {
            l,
            coeffs: DMatrix::zeros(n, n),
            a,
            meta: Provenance::default(),
            noise: None,
        }
    }

    pub fn dim(&self) -> usize {
        n_harmonics(self.l)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Restriction to degrees `<= l`.
    pub fn truncated(&self, l: usize) -> FarField {
        let l = l.min(self.l);
        let n = n_harmonics(l);
        FarField {
            l,
            coeffs: self.coeffs.view((0, 0), (n, n)).into_owned(),
            a: self.a,
            meta: self.meta.clone(),
            noise: self.noise.clone(),
        }
    }

    /// `A_p(alpha) = sum_q C_{pq} conj(Y_q(alpha))`.
    pub fn coefficients_at(&self, alpha: &[f64; 3]) -> Vec<Complex64> {
        let y = sph_harm_real(self.l, alpha);
        let n = self.dim();
        (0..n)
            .map(|p| (0..n).map(|q| self.coeffs[(p, q)] * y[q].conj()).sum())
            .collect()
    }

    /// `A(a', a)` at real directions.
    pub fn eval_real(&self, out: &[f64; 3], inc: &[f64; 3]) -> Complex64 {
        let y = sph_harm_real(self.l, out);
        self.coefficients_at(inc).iter().zip(&y).map(|(c, y)| c * y).sum()
    }

    /// Samples `A(a_i, a_j)` on the nodes of `quad`.
    pub fn sample(&self, quad: &S2Quadrature) -> DMatrix<Complex64> {
        let y = harmonic_matrix(quad, self.l);
        &y * &self.coeffs * y.adjoint()
    }

    /// `max |A(a', a) - A(-a, -a')| / max |A|` on the quadrature of order `L + 2`.
    pub fn reciprocity_residual(&self) -> f64 {
        let quad = S2Quadrature::new(self.l + 2);
        let samples = self.sample(&quad);
        let neg = negated_nodes(&quad);
        let mut pw = 0.0f64;
        for i in 0..quad.len() {
            for j in 0..quad.len() {
                pw = pw.max((samples[(i, j)] - samples[(neg[j], neg[i])]).norm());
            }
        }
        let scale = samples.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        pw / scale
    }

    /// `max_a |Im A(a, a) - (1/4pi) int |A(a, b)|^2 db| / max |A|`.
    pub fn optical_residual(&self) -> f64 {
        let quad = S2Quadrature::new(self.l + 1);
        let s = self.sample(&quad);
        let scale = s.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..quad.len() {
            let integral: f64 = (0..quad.len()).map(|j| quad.weights[j] * s[(i, j)].norm_sqr()).sum();
            worst = worst.max((s[(i, i)].im - integral / (4.0 * PI)).abs());
        }
        worst / scale
    }

    /// Scattering matrix `I + (i / 2pi) C`.
    pub fn s_matrix(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        DMatrix::identity(n, n) + self.coeffs.map(|c| c * Complex64::new(0.0, 1.0 / (2.0 * PI)))
    }

    /// Operator norm of `S* S - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let s = self.s_matrix();
        let n = self.dim();
        let d = s.adjoint() * &s - DMatrix::<Complex64>::identity(n, n);
        d.singular_values().iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// `Y_p(node_i)` as an `nodes x (L+1)^2` matrix.
pub fn harmonic_matrix(quad: &S2Quadrature, l: usize) -> DMatrix<Complex64> {
    let n = n_harmonics(l);
    let mut y = DMatrix::zeros(quad.len(), n);
    for (i, node) in quad.nodes.iter().enumerate() {
        for (p, v) in sph_harm_real(l, node).into_iter().enumerate() {
            y[(i, p)] = v;
        }
    }
    y
}

/// Index of `-node_i` in the (antipodally symmetric) product rule.
fn negated_nodes(quad: &S2Quadrature) -> Vec<usize> {
    quad.nodes
        .iter()
        .map(|v| {
            let target = [-v[0], -v[1], -v[2]];
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (j, w) in quad.nodes.iter().enumerate() {
                let d = (w[0] - target[0]).powi(2) + (w[1] - target[1]).powi(2) + (w[2] - target[2]).powi(2);
                if d < bd {
                    bd = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Diagonal FarField of a radial potential.
pub fn far_field_from_radial(ps: &PhaseShifts) -> FarField {
    let l = ps.l();
    let mut ff = FarField::zeros(l, ps.support_radius);
    for p in 0..ff.dim() {
        ff.coeffs[(p, p)] = ps.a_ell[degree_of(p)];
    }
    ff.meta.solver = "radial".into();
    ff
}

/// Number of degrees beyond `L` summed by the tail estimate.
const TAIL_TERMS: usize = 20;

/// `A(theta', alpha) = sum_p A_p(alpha) Y_p(theta')` truncated at `L`, with an
/// estimate of the discarded degrees (see [`extrapolated_tail`]).
pub fn amplitude_eval(ff: &FarField, dir_out: &Direction, dir_in: &[f64; 3]) -> AmplitudeValue {
    let lt = ff.l + TAIL_TERMS;
    let y = match dir_out {
        Direction::Real(v) => sph_harm_real(lt, v),
        Direction::Complex(c) => sph_harm_vec(lt, &c.theta),
    };
    let coef = ff.coefficients_at(dir_in);
    let mut value = Complex64::new(0.0, 0.0);
    let mut block = vec![0.0; ff.l + 1];
    for ell in 0..=ff.l {
        for p in ell * ell..(ell + 1) * (ell + 1) {
            value += coef[p] * y[p];
            block[ell] += coef[p].norm_sqr();
        }
    }
    let block: Vec<f64> = block.into_iter().map(f64::sqrt).collect();
    let tail_estimate = extrapolated_tail(&block, ff.a, &degree_norms(&y, ff.l + 1, lt));
    AmplitudeValue {
        value,
        tail_estimate,
        tail_flagged: tail_estimate > 0.01 * value.norm(),
    }
}

/// `||Y_l.(theta)||` for `l` in `from..=to`, given all harmonics up to `to`.
fn degree_norms(y: &[Complex64], from: usize, to: usize) -> Vec<f64> {
    (from..=to)
        .map(|l| y[l * l..(l + 1) * (l + 1)].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Decay law `(a/l)^{1/2} (a e / 2l)^{l+1}` of the degree-`l` amplitude coefficients.
fn decay_law(l: usize, a: f64) -> f64 {
    let l = l.max(1) as f64;
    (a / l).sqrt() * (a * std::f64::consts::E / (2.0 * l)).powf(l + 1.0)
}

/// Tail of `sum_l <c_l., w_l.>` beyond the last computed degree `L`. The
/// coefficient block norms `block[l]` are continued geometrically with the
/// ratio of the last two blocks, capped by the ratio of the decay law, and
/// paired with `weights[k]`, a bound on the partner block of degree `L+1+k`.
pub(crate) fn extrapolated_tail(block: &[f64], a: f64, weights: &[f64]) -> f64 {
    let l = block.len() - 1;
    let last = block[l];
    if last == 0.0 {
        return 0.0;
    }
    let law = decay_law(l + 1, a) / decay_law(l, a);
    let rho = if l >= 1 && block[l - 1] > 0.0 {
        (last / block[l - 1]).min(law)
    } else {
        law
    };
    weights
        .iter()
        .enumerate()
        .map(|(k, w)| last * rho.powi(k as i32 + 1) * w)
        .sum()
}

fn check_outside(x: &[f64; 3], a: f64) -> Result<f64> {
    let r = crate::variety::norm3(x);
    // Points on the sphere itself may round to just inside it.
    if !(r >= a * (1.0 - 1e-12) && r > 0.0) {
        return Err(ForwardError::InsideSupport { r, a });
    }
    Ok(r)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `u(x, alpha) = e^{i alpha.x} + sum_p A_p(alpha) Y_p(x/|x|) h_l(|x|)` for `|x| >= a`.
pub fn field_outside(ff: &FarField, x: &[f64; 3], alpha: &[f64; 3]) -> Result<Complex64> {
    let r = check_outside(x, ff.a)?;
    let xh = [x[0] / r, x[1] / r, x[2] / r];
    let y = sph_harm_real(ff.l, &xh);
    let h = sph_hankel_all(ff.l, r);
    let coef = ff.coefficients_at(alpha);
    let scat: Complex64 = (0..ff.dim()).map(|p| coef[p] * y[p] * h[degree_of(p)]).sum();
    Ok(Complex64::from_polar(1.0, dot(alpha, x)) + scat)
}

/// Free outgoing Green function `e^{i|x-y|} / (4 pi |x-y|)`.
pub fn free_green(x: &[f64; 3], y: &[f64; 3]) -> Complex64 {
    let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
    Complex64::from_polar(1.0 / (4.0 * PI * d), d)
}

/// Green function of the scattering problem for `|x|, |y| > a`:
/// `g(x,y) + (1/4pi) sum C_{pq} Y_p(x/|x|) conj(Y_q(-y/|y|)) h_p(|x|) h_q(|y|)`.
pub fn green_outside(ff: &FarField, x: &[f64; 3], y: &[f64; 3]) -> Result<Complex64> {
    let rx = check_outside(x, ff.a)?;
    let ry = check_outside(y, ff.a)?;
    let yx = sph_harm_real(ff.l, &[x[0] / rx, x[1] / rx, x[2] / rx]);
    let yy = sph_harm_real(ff.l, &[-y[0] / ry, -y[1] / ry, -y[2] / ry]);
    let hx = sph_hankel_all(ff.l, rx);
    let hy = sph_hankel_all(ff.l, ry);
    let n = ff.dim();
    let mut s = Complex64::new(0.0, 0.0);
    for p in 0..n {
        let left = yx[p] * hx[degree_of(p)];
        for q in 0..n {
            let c = ff.coeffs[(p, q)];
            if c != Complex64::new(0.0, 0.0) {
                s += c * left * yy[q].conj() * hy[degree_of(q)];
            }
        }
    }
    Ok(free_green(x, y) + s / (4.0 * PI))
}
