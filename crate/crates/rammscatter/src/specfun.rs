//! Spherical harmonics, associated Legendre functions and spherical Bessel/Hankel
//! functions in the conventions used throughout the crate.
//!
//! Harmonics carry the phase `(-1)^m i^l` and no Condon-Shortley factor inside
//! `P_{l,m}`:
//!
//! `Y_{l,m}(a) = (-1)^m i^l / sqrt(4 pi) * sqrt((2l+1)(l-m)!/(l+m)!) * e^{i m phi} P_{l,m}(cos t)`
//!
//! with `P_{l,m}(x) = (1-x^2)^{m/2} d^m P_l / dx^m`. Evaluated on a complex vector
//! `theta` the harmonics are polynomials in `theta_1 +- i theta_2` and `theta_3`,
//! which is the analytic continuation used on the complex variety.
//!
//! The Hankel function is normalized so that `h_l(r) ~ e^{ir}/r` at infinity,
//! i.e. `h_l = i^{l+1} (j_l + i y_l)`.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecfunError {
    #[error("order m = {m} exceeds degree l = {ell}")]
    OrderExceedsDegree { ell: usize, m: i64 },
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

pub type Result<T> = std::result::Result<T, SpecfunError>;

/// Degree/order pair of a spherical harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    pub ell: usize,
    pub m: i64,
}

impl HarmonicIndex {
    pub fn new(ell: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > ell {
            return Err(SpecfunError::OrderExceedsDegree { ell, m });
        }
        Ok(Self { ell, m })
    }

    /// Flat index `l^2 + l + m`.
    pub fn flat(&self) -> usize {
        ((self.ell * self.ell + self.ell) as i64 + self.m) as usize
    }

    pub fn from_flat(p: usize) -> Self {
        let ell = degree_of(p);
        let m = p as i64 - (ell * ell + ell) as i64;
        Self { ell, m }
    }
}

/// Number of harmonics with degree at most `l`.
pub fn n_harmonics(l: usize) -> usize {
    (l + 1) * (l + 1)
}

/// Degree of the harmonic with flat index `p`.
pub fn degree_of(p: usize) -> usize {
    let mut l = (p as f64).sqrt() as usize;
    while l * l > p {
        l -= 1;
    }
    while (l + 1) * (l + 1) <= p {
        l += 1;
    }
    l
}

/// Flat index of the harmonic `(l, -m)` given the flat index of `(l, m)`.
pub fn flip_m(p: usize) -> usize {
    let l = degree_of(p);
    2 * (l * l + l) - p
}

/// `i^l`.
pub fn i_pow(ell: i64) -> Complex64 {
    match ell.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A point on the sphere given by `cos(theta)` and `phi`, both possibly complex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexAngle {
    pub cos_theta: Complex64,
    pub phi: Complex64,
}

impl ComplexAngle {
    pub fn real(theta: f64, phi: f64) -> Self {
        Self {
            cos_theta: Complex64::new(theta.cos(), 0.0),
            phi: Complex64::new(phi, 0.0),
        }
    }

    /// Angles of a real unit vector.
    pub fn from_unit(v: &[f64; 3]) -> Self {
        let theta = v[2].clamp(-1.0, 1.0).acos();
        let phi = v[1].atan2(v[0]);
        Self::real(theta, phi)
    }
}

/// `d^m P_l / dx^m` by the three-term recurrence in `l`.
fn legendre_derivative(ell: usize, m: usize, x: Complex64) -> Complex64 {
    let mut dmm = 1.0;
    for k in 1..=m {
        dmm *= (2 * k - 1) as f64;
    }
    let mut prev = Complex64::new(dmm, 0.0);
    if ell == m {
        return prev;
    }
    let mut cur = x * (2 * m + 1) as f64 * dmm;
    for l in (m + 2)..=ell {
        let next = (x * cur * (2 * l - 1) as f64 - prev * (l + m - 1) as f64) / (l - m) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Associated Legendre function `P_{l,m}(x) = (1-x^2)^{m/2} d^m P_l/dx^m` for
/// `0 <= m <= l`, with the principal branch of the square root for complex `x`.
pub fn assoc_legendre(ell: usize, m: usize, x: Complex64) -> Result<Complex64> {
    if m > ell {
        return Err(SpecfunError::OrderExceedsDegree { ell, m: m as i64 });
    }
    let s = (Complex64::new(1.0, 0.0) - x * x).sqrt();
    Ok(s.powu(m as u32) * legendre_derivative(ell, m, x))
}

/// Table of `N_{l,m} d^m P_l/dx^m` for `0 <= m <= l <= lmax`, stored at
/// `[m * (lmax + 1) + l]`, with `N_{l,m} = sqrt((2l+1)(l-m)!/(4 pi (l+m)!))`.
fn normalized_derivative_table(lmax: usize, x: Complex64) -> Vec<Complex64> {
    let stride = lmax + 1;
    let mut e = vec![Complex64::new(0.0, 0.0); stride * stride];
    let mut emm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            emm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        e[m * stride + m] = Complex64::new(emm, 0.0);
        if m < lmax {
            e[m * stride + m + 1] = x * ((2 * m + 3) as f64).sqrt() * emm;
        }
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            e[m * stride + l] = (x * e[m * stride + l - 1] - e[m * stride + l - 2] * b) * a;
        }
    }
    e
}

fn harmonics_from_parts(lmax: usize, x: Complex64, wp: Complex64, wm: Complex64) -> Vec<Complex64> {
    let stride = lmax + 1;
    let e = normalized_derivative_table(lmax, x);
    let mut out = vec![Complex64::new(0.0, 0.0); n_harmonics(lmax)];
    let mut wp_pow = Complex64::new(1.0, 0.0);
    let mut wm_pow = Complex64::new(1.0, 0.0);
    for m in 0..=lmax {
        for l in m..=lmax {
            let base = i_pow(l as i64) * e[m * stride + l];
            let c = l * l + l;
            out[c + m] = base * wp_pow * sign(m as i64);
            if m > 0 {
                out[c - m] = base * wm_pow;
            }
        }
        wp_pow *= wp;
        wm_pow *= wm;
    }
    out
}

/// All harmonics `Y_p(theta)`, `p < (lmax+1)^2`, at a complex vector. For a
/// real unit vector this is the ordinary harmonic; for `theta` on the complex
/// variety it is the analytic continuation.
pub fn sph_harm_vec(lmax: usize, theta: &[Complex64; 3]) -> Vec<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    harmonics_from_parts(lmax, theta[2], theta[0] + i * theta[1], theta[0] - i * theta[1])
}

/// All harmonics at a real unit vector.
pub fn sph_harm_real(lmax: usize, v: &[f64; 3]) -> Vec<Complex64> {
    sph_harm_vec(lmax, &to_complex(v))
}

pub fn to_complex(v: &[f64; 3]) -> [Complex64; 3] {
    [
        Complex64::new(v[0], 0.0),
        Complex64::new(v[1], 0.0),
        Complex64::new(v[2], 0.0),
    ]
}

/// Single harmonic `Y_{l,m}` at a (possibly complex) angle. `sin(theta)` is
/// taken as the principal square root of `1 - cos^2(theta)`.
pub fn sph_harm(idx: HarmonicIndex, angle: ComplexAngle) -> Result<Complex64> {
    let idx = HarmonicIndex::new(idx.ell, idx.m)?;
    let x = angle.cos_theta;
    let s = (Complex64::new(1.0, 0.0) - x * x).sqrt();
    let i = Complex64::new(0.0, 1.0);
    let k = idx.m.unsigned_abs() as usize;
    // P_{l,-k} = (-1)^k (l-k)!/(l+k)! P_{l,k}; the factorials cancel against the
    // normalization, leaving the same N_{l,k} and no sign for negative orders.
    let d = legendre_derivative(idx.ell, k, x);
    let mut ratio = 1.0;
    for j in (idx.ell - k + 1)..=(idx.ell + k) {
        ratio /= j as f64;
    }
    let norm = ((2 * idx.ell + 1) as f64 * ratio / (4.0 * PI)).sqrt();
    let phase = (i * angle.phi * idx.m as f64).exp();
    let sgn = if idx.m >= 0 { sign(idx.m) } else { 1.0 };
    Ok(i_pow(idx.ell as i64) * sgn * norm * phase * s.powu(k as u32) * d)
}

/// Spherical Bessel function `j_l(r)`.
pub fn sph_bessel_j(ell: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(SpecfunError::NonPositiveRadius(r));
    }
    Ok(sph_bessel_j_all(ell, r)[ell])
}

fn j0_j1(r: f64) -> (f64, f64) {
    if r < 1e-3 {
        let r2 = r * r;
        (
            1.0 - r2 / 6.0 + r2 * r2 / 120.0,
            r / 3.0 - r * r2 / 30.0 + r * r2 * r2 / 840.0,
        )
    } else {
        let (s, c) = r.sin_cos();
        (s / r, s / (r * r) - c / r)
    }
}

/// `j_0..=j_lmax` at `r >= 0` by downward recurrence normalized against the
/// closed forms of `j_0` and `j_1`.
pub fn sph_bessel_j_all(lmax: usize, r: f64) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    if r == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = lmax.max(r.ceil() as usize) + 20 + (r.sqrt() * 4.0) as usize;
    let mut upper = 0.0f64;
    let mut cur = 1e-300f64;
    let mut vals = vec![0.0; lmax.max(1) + 1];
    for l in (1..=start).rev() {
        let lower = (2 * l + 1) as f64 / r * cur - upper;
        upper = cur;
        cur = lower;
        if l - 1 <= lmax.max(1) {
            vals[l - 1] = cur;
        }
        if l <= lmax.max(1) {
            vals[l] = upper;
        }
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            upper *= 1e-200;
            for v in vals.iter_mut() {
                *v *= 1e-200;
            }
        }
    }
    let (j0, j1) = j0_j1(r);
    let big = vals[0].abs().max(vals[1].abs());
    let (v0, v1) = (vals[0] / big, vals[1] / big);
    let scale = (j0 * v0 + j1 * v1) / (v0 * v0 + v1 * v1) / big;
    for l in 0..=lmax {
        out[l] = vals[l] * scale;
    }
    out[0] = j0;
    if lmax >= 1 {
        out[1] = j1;
    }
    out
}

/// `y_0..=y_lmax` at `r > 0` by upward recurrence.
pub fn sph_bessel_y_all(lmax: usize, r: f64) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    let (s, c) = r.sin_cos();
    out[0] = -c / r;
    if lmax >= 1 {
        out[1] = -c / (r * r) - s / r;
    }
    for l in 1..lmax {
        out[l + 1] = (2 * l + 1) as f64 / r * out[l] - out[l - 1];
    }
    out
}

/// `h_0..=h_lmax` at `r > 0`, `h_l = i^{l+1}(j_l + i y_l)`.
pub fn sph_hankel_all(lmax: usize, r: f64) -> Vec<Complex64> {
    let j = sph_bessel_j_all(lmax, r);
    let y = sph_bessel_y_all(lmax, r);
    (0..=lmax)
        .map(|l| i_pow(l as i64 + 1) * Complex64::new(j[l], y[l]))
        .collect()
}

/// Hankel function `h_l(r)` in the normalization `h_l(r) ~ e^{ir}/r`.
pub fn sph_hankel_h(ell: usize, r: f64) -> Result<Complex64> {
    if !(r > 0.0) {
        return Err(SpecfunError::NonPositiveRadius(r));
    }
    Ok(sph_hankel_all(ell, r)[ell])
}

/// Radial derivatives from `f_l' = f_{l-1} - (l+1)/r f_l`, `f_0' = -f_1`, valid
/// for `j`, `y`; requires values up to `lmax + 1`.
pub fn bessel_derivatives(vals: &[f64], r: f64) -> Vec<f64> {
    let lmax = vals.len() - 2;
    (0..=lmax)
        .map(|l| {
            if l == 0 {
                -vals[1]
            } else {
                vals[l - 1] - (l + 1) as f64 / r * vals[l]
            }
        })
        .collect()
}

/// `(j_l, j_l')` for `l <= lmax`.
pub fn sph_bessel_j_with_derivative(lmax: usize, r: f64) -> (Vec<f64>, Vec<f64>) {
    let j = sph_bessel_j_all(lmax + 1, r);
    let d = bessel_derivatives(&j, r);
    (j[..=lmax].to_vec(), d)
}

/// `(h_l, h_l')` for `l <= lmax`.
pub fn sph_hankel_with_derivative(lmax: usize, r: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let j = sph_bessel_j_all(lmax + 1, r);
    let y = sph_bessel_y_all(lmax + 1, r);
    let dj = bessel_derivatives(&j, r);
    let dy = bessel_derivatives(&y, r);
    let h = (0..=lmax)
        .map(|l| i_pow(l as i64 + 1) * Complex64::new(j[l], y[l]))
        .collect();
    let dh = (0..=lmax)
        .map(|l| i_pow(l as i64 + 1) * Complex64::new(dj[l], dy[l]))
        .collect();
    (h, dh)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    (
        x.iter().map(|t| a + h * (t + 1.0)).collect(),
        w.iter().map(|t| t * h).collect(),
    )
}

/// Product rule on the unit sphere: `order + 1` Gauss-Legendre nodes in
/// `cos(theta)` times `2 order + 2` equispaced azimuths. Exact for polynomials
/// of degree at most `2 order + 1`.
#[derive(Debug, Clone)]
pub struct S2Quadrature {
    pub order: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl S2Quadrature {
    pub fn new(order: usize) -> Self {
        let (x, w) = gauss_legendre(order + 1);
        let nphi = 2 * order + 2;
        let mut nodes = Vec::with_capacity(x.len() * nphi);
        let mut weights = Vec::with_capacity(x.len() * nphi);
        for (xi, wi) in x.iter().zip(&w) {
            let s = (1.0 - xi * xi).max(0.0).sqrt();
            for k in 0..nphi {
                let phi = 2.0 * PI * k as f64 / nphi as f64;
                nodes.push([s * phi.cos(), s * phi.sin(), *xi]);
                weights.push(wi * 2.0 * PI / nphi as f64);
            }
        }
        Self {
            order,
            nodes,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Harmonics up to degree `lmax` at every node, node-major.
    pub fn harmonics(&self, lmax: usize) -> Vec<Vec<Complex64>> {
        self.nodes.iter().map(|v| sph_harm_real(lmax, v)).collect()
    }
}
