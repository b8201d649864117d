//! Sound-soft sphere scattering, the limit of penetrable balls `q = t chi_B`
//! as `t -> infinity`, and recovery of the indicator transform
//! `chi~_D(xi) = int_D e^{-i xi.x} dx` from the obstacle amplitude.
//!
//! The indicator formula uses pairs with `theta - theta' = xi`, the opposite of
//! the orientation used by potential inversion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::forward::radial::{interior_norm_sq, RadialOptions};
use crate::forward::{solve_radial, FarField, ForwardError, Potential};
use crate::specfun::{degree_of, i_pow, n_harmonics, sph_bessel_j_all, sph_hankel_all, sph_harm_vec, S2Quadrature};
use crate::variety::{make_pair, norm3, DirectionPair, VarietyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObstacleError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("pair does not satisfy theta - theta' = xi (mismatch {0:e})")]
    PairMismatch(f64),
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error(transparent)]
    Variety(#[from] VarietyError),
}

pub type Result<T> = std::result::Result<T, ObstacleError>;

/// Origin-centred sphere with a homogeneous Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereObstacle {
    pub radius: f64,
}

impl SphereObstacle {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(ObstacleError::InvalidArgument(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }
}

/// `C_l = -4 pi i^l j_l(R) / h_l(R)` for `l <= lmax`.
fn dirichlet_coefficients(radius: f64, lmax: usize) -> Vec<Complex64> {
    let j = sph_bessel_j_all(lmax, radius);
    let h = sph_hankel_all(lmax, radius);
    (0..=lmax).map(|l| -i_pow(l as i64) * (4.0 * PI * j[l]) / h[l]).collect()
}

/// Diagonal FarField of the sound-soft sphere, degrees `<= l`.
pub fn dirichlet_sphere_farfield(obs: &SphereObstacle, l: usize) -> Result<FarField> {
    if l < 4 {
        return Err(ObstacleError::InvalidArgument(format!("degree must be at least 4, got {l}")));
    }
    let c = dirichlet_coefficients(obs.radius, l);
    let mut ff = FarField::zeros(l, obs.radius);
    for p in 0..ff.dim() {
        ff.coeffs[(p, p)] = c[degree_of(p)];
    }
    ff.meta.solver = "dirichlet-sphere".into();
    ff.meta.potential_hash = format!("sphere:{:e}", obs.radius);
    Ok(ff)
}

/// `P_0..=P_lmax` at real `x`.
fn legendre_all(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0; lmax + 1];
    if lmax >= 1 {
        p[1] = x;
    }
    for l in 2..=lmax {
        p[l] = ((2 * l - 1) as f64 * x * p[l - 1] - (l - 1) as f64 * p[l - 2]) / l as f64;
    }
    p
}

/// `sup_gamma |sum_l d_l (2l+1)/(4 pi) P_l(cos gamma)|` over `n_angles` equispaced angles,
/// the sup over direction pairs of a diagonal amplitude difference.
fn diagonal_sup(d: &[Complex64], n_angles: usize) -> f64 {
    let lmax = d.len() - 1;
    let n = n_angles.max(2);
    (0..n)
        .map(|k| {
            let x = (PI * k as f64 / (n - 1) as f64).cos();
            legendre_all(lmax, x)
                .iter()
                .enumerate()
                .map(|(l, p)| d[l] * ((2 * l + 1) as f64 / (4.0 * PI) * p))
                .sum::<Complex64>()
                .norm()
        })
        .fold(0.0, f64::max)
}

fn penetrable_coefficients(radius: f64, t: f64, l: usize) -> Result<Vec<Complex64>> {
    Ok(solve_radial(&Potential::ball(t, radius)?, l)?.a_ell)
}

/// One height of the penetrable-limit experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenetrableRow {
    pub t: f64,
    /// `||u(., alpha; t)||_{L^2(B)}`, independent of `alpha`.
    pub interior_norm: f64,
    /// `sup |A_t - A_D|` over direction pairs.
    pub amplitude_distance: f64,
}

/// Penetrable-limit table; heights whose radial solve was too stiff are listed in `skipped`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenetrableTable {
    pub radius: f64,
    pub rows: Vec<PenetrableRow>,
    pub skipped: Vec<f64>,
}

/// Interior norm and amplitude distance to the sound-soft sphere for `q = t chi_{B_R}`.
pub fn penetrable_limit(radius: f64, t_list: &[f64], l: usize, n_angles: usize) -> Result<PenetrableTable> {
    let obs = SphereObstacle::new(radius)?;
    if t_list.is_empty() || t_list.windows(2).any(|w| !(w[1] > w[0])) || !(t_list[0] > 0.0) {
        return Err(ObstacleError::InvalidArgument("heights must be positive and increasing".into()));
    }
    let dir = dirichlet_coefficients(obs.radius, l);
    let mut rows = Vec::with_capacity(t_list.len());
    let mut skipped = Vec::new();
    for &t in t_list {
        let q = Potential::ball(t, radius)?;
        let run = || -> std::result::Result<PenetrableRow, ForwardError> {
            let norm = interior_norm_sq(&q, l, RadialOptions::default())?.sqrt();
            let a = solve_radial(&q, l)?.a_ell;
            let d: Vec<Complex64> = a.iter().zip(&dir).map(|(x, y)| x - y).collect();
            Ok(PenetrableRow {
                t,
                interior_norm: norm,
                amplitude_distance: diagonal_sup(&d, n_angles),
            })
        };
        match run() {
            Ok(row) => rows.push(row),
            Err(e @ ForwardError::Stiff { .. }) => {
                log::warn!("penetrable limit: height {t} skipped: {e}");
                skipped.push(t);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(PenetrableTable { radius, rows, skipped })
}

/// `|A(t1) - A(t2)|` against `|t1 - t2|` for one pair of heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRow {
    pub t1: f64,
    pub t2: f64,
    pub distance: f64,
    /// `distance / |t1 - t2|`.
    pub ratio: f64,
}

/// Amplitude differences for every pair of heights in `t_grid`.
pub fn lipschitz_table(radius: f64, t_grid: &[f64], l: usize, n_angles: usize) -> Result<Vec<LipschitzRow>> {
    SphereObstacle::new(radius)?;
    let coeffs = t_grid
        .iter()
        .map(|&t| penetrable_coefficients(radius, t, l))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for i in 0..t_grid.len() {
        for j in i + 1..t_grid.len() {
            let dt = (t_grid[i] - t_grid[j]).abs();
            if dt == 0.0 {
                continue;
            }
            let d: Vec<Complex64> = coeffs[i].iter().zip(&coeffs[j]).map(|(x, y)| x - y).collect();
            let distance = diagonal_sup(&d, n_angles);
            rows.push(LipschitzRow {
                t1: t_grid[i],
                t2: t_grid[j],
                distance,
                ratio: distance / dt,
            })
        }
    }
    Ok(rows)
}

/// `chi~_B(xi) = 4 pi (sin s - s cos s) / s^3`, `s = R |xi|`, scaled by `R^3`.
pub fn ball_indicator_fourier(radius: f64, xi_norm: f64) -> f64 {
    let s = radius * xi_norm;
    if s < 1e-3 {
        return 4.0 * PI / 3.0 * radius.powi(3) * (1.0 - s * s / 10.0);
    }
    4.0 * PI * (s.sin() - s * s.cos()) / s.powi(3) * radius.powi(3)
}

/// Pair with `theta - theta' = xi` and growth `s`.
pub fn indicator_pair(xi: [f64; 3], s: f64) -> Result<DirectionPair> {
    let mut pair = make_pair([-xi[0], -xi[1], -xi[2]], s)?;
    pair.xi = xi;
    Ok(pair)
}

fn check_indicator_pair(pair: &DirectionPair, xi: &[f64; 3]) -> Result<()> {
    let mismatch = (0..3)
        .map(|k| (pair.theta.theta[k] - pair.theta_prime.theta[k] - xi[k]).norm())
        .fold(0.0, f64::max);
    if mismatch > 1e-9 * (1.0 + pair.theta.norm()) {
        return Err(ObstacleError::PairMismatch(mismatch));
    }
    Ok(())
}

fn quadrature_for(radius: f64, theta_norm: f64, l: usize) -> S2Quadrature {
    S2Quadrature::new(l + (radius * theta_norm).ceil() as usize + 16)
}

/// Harmonic coefficients `g_p = int_{S^2} i theta.s e^{i R theta.s} conj(Y_p(s)) ds`
/// of the normal derivative of `e^{i theta.x}` on the sphere of radius `R`.
fn normal_derivative_coefficients(radius: f64, theta: &[Complex64; 3], l: usize) -> Vec<Complex64> {
    let quad = quadrature_for(radius, crate::variety::cnorm(theta), l);
    let n = n_harmonics(l);
    let mut g = vec![Complex64::new(0.0, 0.0); n];
    for (s, w) in quad.nodes.iter().zip(&quad.weights) {
        let ts = theta[0] * s[0] + theta[1] * s[1] + theta[2] * s[2];
        let f = Complex64::i() * ts * (Complex64::i() * ts * radius).exp() * *w;
        let y = crate::specfun::sph_harm_real(l, s);
        for p in 0..n {
            g[p] += f * y[p].conj();
        }
    }
    g
}

/// Indicator transform `chi~_D(xi) = 8 pi |xi|^{-2} int A(theta', alpha) nu(alpha) d alpha`.
///
/// `nu` solves the ridge least-squares problem
/// `int u_N(s, alpha) nu(alpha) d alpha ~ d/dN e^{i theta.s}` on the sphere of
/// radius `radius`, with the normal derivative `u_N` of the sound-soft sphere
/// solution. Its harmonic expansion is diagonal, so the normal equations
/// decouple per coefficient; the ridge weight is `reg * max_l |d_l|^2`.
pub fn reconstruct_indicator(
    ff: &FarField,
    radius: f64,
    xi: [f64; 3],
    pair: &DirectionPair,
    reg: f64,
) -> Result<Complex64> {
    SphereObstacle::new(radius)?;
    let xn = norm3(&xi);
    if !(xn > 0.0) {
        return Err(ObstacleError::InvalidArgument("xi must be nonzero".into()));
    }
    if !(reg > 0.0) {
        return Err(ObstacleError::InvalidArgument(format!("ridge weight must be positive, got {reg}")));
    }
    check_indicator_pair(pair, &xi)?;
    let l = ff.l;
    let h = sph_hankel_all(l, radius);
    // u_N(s, alpha) = sum_p d_l conj(Y_p(alpha)) Y_p(s/R) on |s| = R.
    let d: Vec<Complex64> = (0..=l)
        .map(|ell| {
            let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
            sign * 4.0 * PI / (radius * radius * h[ell])
        })
        .collect();
    let lam = reg * d.iter().fold(0.0f64, |m, v| m.max(v.norm_sqr()));
    let g = normal_derivative_coefficients(radius, &pair.theta.theta, l);
    let n = ff.dim();
    let nu: Vec<Complex64> = (0..n)
        .map(|p| {
            let dl = d[degree_of(p)];
            dl.conj() * g[p] / (dl.norm_sqr() + lam)
        })
        .collect();
    let y = sph_harm_vec(l, &pair.theta_prime.theta);
    let integral: Complex64 = (0..n)
        .map(|p| y[p] * (0..n).map(|q| ff.coeffs[(p, q)] * nu[q]).sum::<Complex64>())
        .sum();
    Ok(integral * (8.0 * PI / (xn * xn)))
}

/// `int_{|s| = R} e^{-i theta'.s} d/dN e^{i theta.s} ds` by surface quadrature;
/// equals `-(|xi|^2 / 2) chi~_B(xi)` for the ball when `theta - theta' = xi`.
pub fn green_identity_surface(radius: f64, pair: &DirectionPair) -> Complex64 {
    let quad = quadrature_for(radius, pair.theta.norm().max(pair.theta_prime.norm()), 0);
    let (t, tp) = (&pair.theta.theta, &pair.theta_prime.theta);
    quad.nodes
        .iter()
        .zip(&quad.weights)
        .map(|(s, w)| {
            let ts = t[0] * s[0] + t[1] * s[1] + t[2] * s[2];
            let tps = tp[0] * s[0] + tp[1] * s[1] + tp[2] * s[2];
            Complex64::i() * ts * (Complex64::i() * radius * (ts - tps)).exp() * (w * radius * radius)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::field_outside;

    #[test]
    fn monopole_coefficient_closed_form() {
        let ff = dirichlet_sphere_farfield(&SphereObstacle::new(1.0).unwrap(), 6).unwrap();
        // -4 pi j0(1)/h0(1) with j0 = sin r / r, h0 = e^{ir}/r.
        let want = -4.0 * PI * 1f64.sin() * Complex64::from_polar(1.0, -1.0);
        assert!((ff.coeffs[(0, 0)] - want).norm() < 1e-13);
    }

    #[test]
    fn field_vanishes_on_sphere() {
        let ff = dirichlet_sphere_farfield(&SphereObstacle::new(1.0).unwrap(), 16).unwrap();
        let alpha = [0.0, 0.6, 0.8];
        for k in 0..20 {
            let (th, ph) = (0.15 * k as f64 + 0.05, 0.9 * k as f64);
            let x = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            assert!(field_outside(&ff, &x, &alpha).unwrap().norm() < 1e-8);
        }
    }

    #[test]
    fn green_identity_for_ball() {
        let xi = [0.0, 0.6, 0.8];
        let truth = ball_indicator_fourier(1.0, 1.0);
        for s in [0.0, 0.5, 1.0] {
            let pair = indicator_pair(xi, s).unwrap();
            let lhs = green_identity_surface(1.0, &pair);
            assert!((lhs + 0.5 * truth).norm() < 1e-10, "{lhs} vs {}", -0.5 * truth);
        }
    }

    #[test]
    fn rejects_wrong_orientation() {
        let ff = dirichlet_sphere_farfield(&SphereObstacle::new(1.0).unwrap(), 8).unwrap();
        let xi = [1.0, 0.0, 0.0];
        let pair = make_pair(xi, 1.0).unwrap();
        assert!(matches!(
            reconstruct_indicator(&ff, 1.0, xi, &pair, 1e-8),
            Err(ObstacleError::PairMismatch(_))
        ));
    }
}
