//! Dirichlet-to-Neumann map `f -> dw/dN` on the sphere `|x| = a` for
//! `(nabla^2 + 1 - q) w = 0` in the ball, built from the scattering amplitude
//! through a single-layer density, and an independent per-mode radial solve.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::forward::radial::{solve_mode, RadialOptions};
use crate::forward::{green_outside, FarField, ForwardError, Potential};
use crate::specfun::{
    degree_of, flip_m, i_pow, n_harmonics, sph_bessel_j_with_derivative, sph_hankel_with_derivative, sph_harm_real,
    HarmonicIndex, S2Quadrature,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtnError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("radius {a} is within {distance:e} of an interior resonance at degree {ell}; nearby safe radii: {safe:?}")]
    Resonance {
        a: f64,
        ell: usize,
        distance: f64,
        safe: Vec<f64>,
    },
    #[error("density system could not be factorized")]
    Singular,
    #[error(transparent)]
    Forward(#[from] ForwardError),
}

pub type Result<T> = std::result::Result<T, DtnError>;

/// Newton distance `|f / f'|` below which a radius counts as resonant.
const RESONANCE_DISTANCE: f64 = 1e-6;

/// Function on `|x| = a` with harmonic coefficients `f = sum_p f_p Y_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunction {
    pub coeffs: Vec<Complex64>,
    pub a: f64,
    /// `||f||_{L^2(S_a)} = a (sum |f_p|^2)^{1/2}`.
    pub norm: f64,
}

impl BoundaryFunction {
    pub fn new(coeffs: Vec<Complex64>, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(DtnError::InvalidArgument(format!("radius must be positive, got {a}")));
        }
        if !coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(DtnError::InvalidArgument("boundary coefficients must be finite".into()));
        }
        let l = (coeffs.len() as f64).sqrt() as usize;
        if l == 0 || l * l != coeffs.len() {
            return Err(DtnError::InvalidArgument(format!(
                "coefficient count {} is not (L+1)^2",
                coeffs.len()
            )));
        }
        let norm = a * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        Ok(Self { coeffs, a, norm })
    }

    /// Projection of `f(s)` (`s` a unit vector) onto degrees `<= l`.
    pub fn from_fn<F: Fn(&[f64; 3]) -> Complex64>(a: f64, l: usize, f: F) -> Result<Self> {
        let quad = S2Quadrature::new(2 * l + 4);
        let n = n_harmonics(l);
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for (s, w) in quad.nodes.iter().zip(&quad.weights) {
            let v = f(s) * *w;
            for (cp, y) in c.iter_mut().zip(sph_harm_real(l, s)) {
                *cp += v * y.conj();
            }
        }
        Self::new(c, a)
    }

    pub fn l(&self) -> usize {
        degree_of(self.coeffs.len() - 1)
    }

    pub fn eval(&self, s: &[f64; 3]) -> Complex64 {
        self.coeffs.iter().zip(sph_harm_real(self.l(), s)).map(|(c, y)| c * y).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityConditioning {
    /// Singular-value ratio of the normalized density system.
    pub condition: f64,
    /// `max_l |h_l(a)| / (4 pi min_l |j_l(a)|)`, the factor by which errors in the
    /// amplitude coefficients enter the system.
    pub amplification: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DtnProvenance {
    /// Single-layer construction with the conditioning of its density system.
    FromAmplitude { reg: f64, conditioning: DensityConditioning },
    Direct,
}

/// Coefficient matrix of the map `f_p -> (dw/dN)_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtnMatrix {
    pub entries: DMatrix<Complex64>,
    pub a: f64,
    pub l: usize,
    pub provenance: DtnProvenance,
}

impl DtnMatrix {
    pub fn apply(&self, f: &BoundaryFunction) -> Result<BoundaryFunction> {
        if f.coeffs.len() != self.entries.ncols() {
            return Err(DtnError::InvalidArgument(format!(
                "boundary function has {} coefficients, map expects {}",
                f.coeffs.len(),
                self.entries.ncols()
            )));
        }
        let v = &self.entries * nalgebra::DVector::from_column_slice(&f.coeffs);
        BoundaryFunction::new(v.iter().copied().collect(), self.a)
    }

    /// Per-degree diagonal entries `Lambda_{pp}` at `m = 0`.
    pub fn mode_values(&self) -> Vec<Complex64> {
        (0..=self.l).map(|l| self.entries[(l * l + l, l * l + l)]).collect()
    }
}

fn safe_radii<F: Fn(f64) -> f64>(a: f64, floor: f64, worst_distance: F) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..=40 {
        for sign in [-1.0, 1.0] {
            let r = a + sign * 0.05 * k as f64;
            if r > floor && worst_distance(r) > 0.05 && out.len() < 3 {
                out.push(r);
            }
        }
    }
    out
}

/// Smallest `|j_l(a) / j_l'(a)|` over `l <= lmax` and the degree attaining it.
fn bessel_resonance(lmax: usize, a: f64) -> (usize, f64) {
    let (j, dj) = sph_bessel_j_with_derivative(lmax, a);
    (0..=lmax)
        .map(|l| (l, (j[l] / dj[l]).abs()))
        .fold((0, f64::INFINITY), |m, v| if v.1 < m.1 { v } else { m })
}

fn check_free_resonance(lmax: usize, a: f64, floor: f64) -> Result<()> {
    let (ell, distance) = bessel_resonance(lmax, a);
    if distance < RESONANCE_DISTANCE {
        return Err(DtnError::Resonance {
            a,
            ell,
            distance,
            safe: safe_radii(a, floor, |r| bessel_resonance(lmax, r).1),
        });
    }
    Ok(())
}

/// Single-layer density system. The unknown is `s~_q = int Y_q(s) sigma(a s) ds`;
/// row `q` reads
/// `s~_q + (1 / (4 pi i^l j_l(a))) sum_p C_{pq} h_{l_p}(a) s~_p = (-1)^m f_{q-bar} / (a^2 i^l j_l(a) h_l(a))`
/// with `q-bar = (l, -m)`.
struct DensitySystem {
    /// `1 / (a^2 i^l j_l(a) h_l(a))` per degree.
    rhs_scale: Vec<Complex64>,
    amplification: f64,
    svd: nalgebra::SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DensitySystem {
    fn new(ff: &FarField, a: f64, l: usize) -> Result<Self> {
        let n = n_harmonics(l);
        let (j, _) = sph_bessel_j_with_derivative(l, a);
        let (h, _) = sph_hankel_with_derivative(l, a);
        let mut matrix = DMatrix::<Complex64>::identity(n, n);
        let nf = ff.dim().min(n);
        for q in 0..nf {
            let lq = degree_of(q);
            let row = Complex64::new(1.0, 0.0) / (i_pow(lq as i64) * (4.0 * PI * j[lq]));
            for p in 0..nf {
                matrix[(q, p)] += row * ff.coeffs[(p, q)] * h[degree_of(p)];
            }
        }
        let rhs_scale = (0..=l)
            .map(|lq| Complex64::new(1.0, 0.0) / (i_pow(lq as i64) * (a * a * j[lq]) * h[lq]))
            .collect();
        let amplification =
            h.iter().fold(0.0f64, |m, v| m.max(v.norm())) / (4.0 * PI * j.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
        let svd = matrix.svd(true, true);
        if svd.u.is_none() || svd.v_t.is_none() {
            return Err(DtnError::Singular);
        }
        Ok(Self {
            rhs_scale,
            amplification,
            svd,
        })
    }

    fn conditioning(&self) -> DensityConditioning {
        let s = &self.svd.singular_values;
        DensityConditioning {
            condition: s.max() / s.min(),
            amplification: self.amplification,
        }
    }

    /// Ridge solution `argmin ||M x - b||^2 + reg s_max^2 ||x||^2`.
    fn solve(&self, b: &[Complex64], reg: f64) -> Vec<Complex64> {
        let (u, vt) = (self.svd.u.as_ref().unwrap(), self.svd.v_t.as_ref().unwrap());
        let s = &self.svd.singular_values;
        let lam = reg * s.max().powi(2);
        let n = b.len();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..s.len() {
            let c: Complex64 = (0..n).map(|i| u[(i, k)].conj() * b[i]).sum::<Complex64>() * (s[k] / (s[k] * s[k] + lam));
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += vt[(k, j)].conj() * c;
            }
        }
        x
    }

    /// Density `sigma = sum_p sigma_p Y_p` on `|s| = a` for boundary data `f`.
    fn density(&self, f: &[Complex64], reg: f64) -> Vec<Complex64> {
        let n = f.len();
        let b: Vec<Complex64> = (0..n)
            .map(|q| {
                let idx = HarmonicIndex::from_flat(q);
                let sign = if idx.m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                f[flip_m(q)] * self.rhs_scale[idx.ell] * sign
            })
            .collect();
        let tilde = self.solve(&b, reg);
        // sigma_p = int sigma conj(Y_p) = (-1)^{l+m} s~_{p-bar}.
        (0..n)
            .map(|p| {
                let idx = HarmonicIndex::from_flat(p);
                let sign = if (idx.ell as i64 + idx.m).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                tilde[flip_m(p)] * sign
            })
            .collect()
    }
}

fn check_radius(ff: &FarField, a: f64) -> Result<()> {
    if !(a > ff.a) {
        return Err(DtnError::InvalidArgument(format!(
            "sphere radius {a} must exceed the support radius {}",
            ff.a
        )));
    }
    Ok(())
}

/// Single-layer density `sigma` with `w = int g(., s) sigma(s) ds = f` on `|x| = a`.
pub fn single_layer_density(ff: &FarField, f: &BoundaryFunction, reg: f64) -> Result<BoundaryFunction> {
    check_radius(ff, f.a)?;
    check_free_resonance(f.l(), f.a, ff.a)?;
    let sys = DensitySystem::new(ff, f.a, f.l())?;
    BoundaryFunction::new(sys.density(&f.coeffs, reg), f.a)
}

/// `w(x) = int_{|s| = a} g(x, s) sigma(s) ds` by surface quadrature of order `order`,
/// with the scattering Green function of the potential behind `ff`. Requires `|x| > a`.
pub fn single_layer_field(ff: &FarField, sigma: &BoundaryFunction, x: &[f64; 3], order: usize) -> Result<Complex64> {
    let quad = S2Quadrature::new(order);
    let a = sigma.a;
    let mut w = Complex64::new(0.0, 0.0);
    for (s, wt) in quad.nodes.iter().zip(&quad.weights) {
        let y = [a * s[0], a * s[1], a * s[2]];
        w += green_outside(ff, x, &y)? * sigma.eval(s) * (wt * a * a);
    }
    Ok(w)
}

/// DtN matrix on `|x| = a`, degrees `<= l`, from the amplitude of a potential
/// supported inside the sphere. The exterior field of `f` is
/// `sum f_p Y_p h_l(r) / h_l(a)`; adding the density jump gives
/// `(Lambda f)_p = (h_l'(a) / h_l(a)) f_p + sigma_p`.
pub fn dtn_from_amplitude(ff: &FarField, a: f64, l: usize, reg: f64) -> Result<DtnMatrix> {
    check_radius(ff, a)?;
    if !(reg >= 0.0) {
        return Err(DtnError::InvalidArgument(format!("ridge weight must be >= 0, got {reg}")));
    }
    check_free_resonance(l, a, ff.a)?;
    let sys = DensitySystem::new(ff, a, l)?;
    let (h, dh) = sph_hankel_with_derivative(l, a);
    let n = n_harmonics(l);
    let mut entries = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let mut f = vec![Complex64::new(0.0, 0.0); n];
        f[k] = Complex64::new(1.0, 0.0);
        let sigma = sys.density(&f, reg);
        for p in 0..n {
            entries[(p, k)] = sigma[p];
        }
        let lk = degree_of(k);
        entries[(k, k)] += dh[lk] / h[lk];
    }
    let conditioning = sys.conditioning();
    log::debug!("dtn from amplitude: L = {l}, a = {a}, {conditioning:?}");
    Ok(DtnMatrix {
        entries,
        a,
        l,
        provenance: DtnProvenance::FromAmplitude { reg, conditioning },
    })
}

/// Conditioning of the density system at degree `l`.
pub fn density_conditioning(ff: &FarField, a: f64, l: usize) -> Result<DensityConditioning> {
    check_radius(ff, a)?;
    Ok(DensitySystem::new(ff, a, l)?.conditioning())
}

/// `R_l'(a) / R_l(a)` for the regular radial solution, `l <= lmax`, with the resonance check.
fn direct_log_derivatives(q: &Potential, a: f64, lmax: usize) -> Result<Vec<f64>> {
    let profile = q.profile().ok_or(ForwardError::NotRadial)?;
    if !(a > profile.radius()) {
        return Err(DtnError::InvalidArgument(format!(
            "sphere radius {a} must exceed the support radius {}",
            profile.radius()
        )));
    }
    let worst = |r: f64| -> Result<(usize, f64, Vec<f64>)> {
        let mut out = Vec::with_capacity(lmax + 1);
        let mut worst = (0, f64::INFINITY);
        for ell in 0..=lmax {
            let ld = solve_mode(profile, ell, r, RadialOptions::default())?.log_derivative();
            let distance = 1.0 / ld.abs();
            if distance < worst.1 {
                worst = (ell, distance);
            }
            out.push(ld);
        }
        Ok((worst.0, worst.1, out))
    };
    let (ell, distance, lds) = worst(a)?;
    if distance < RESONANCE_DISTANCE {
        let floor = profile.radius();
        return Err(DtnError::Resonance {
            a,
            ell,
            distance,
            safe: safe_radii(a, floor, |r| worst(r).map(|w| w.1).unwrap_or(0.0)),
        });
    }
    Ok(lds)
}

/// Normal derivative of the interior solution with boundary values `f`, from a
/// two-point radial solve per degree.
pub fn dtn_direct(q: &Potential, f: &BoundaryFunction) -> Result<BoundaryFunction> {
    let lds = direct_log_derivatives(q, f.a, f.l())?;
    let c = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(p, v)| v * lds[degree_of(p)])
        .collect();
    BoundaryFunction::new(c, f.a)
}

/// Diagonal DtN matrix from [`dtn_direct`] applied to every basis function.
pub fn dtn_direct_matrix(q: &Potential, a: f64, l: usize) -> Result<DtnMatrix> {
    let lds = direct_log_derivatives(q, a, l)?;
    let n = n_harmonics(l);
    let mut entries = DMatrix::zeros(n, n);
    for p in 0..n {
        entries[(p, p)] = Complex64::new(lds[degree_of(p)], 0.0);
    }
    Ok(DtnMatrix {
        entries,
        a,
        l,
        provenance: DtnProvenance::Direct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{far_field_from_radial, solve_radial};

    #[test]
    fn free_map_is_bessel_log_derivative() {
        let ff = FarField::zeros(8, 1.0);
        let m = dtn_from_amplitude(&ff, 2.0, 8, 1e-12).unwrap();
        let (j, dj) = sph_bessel_j_with_derivative(8, 2.0);
        let n = n_harmonics(8);
        for p in 0..n {
            for k in 0..n {
                let want = if p == k { dj[degree_of(p)] / j[degree_of(p)] } else { 0.0 };
                assert!((m.entries[(p, k)] - want).norm() < 1e-6, "{p} {k}");
            }
        }
    }

    #[test]
    fn direct_free_map() {
        let f = BoundaryFunction::new(vec![Complex64::new(1.0, 0.0); 16], 2.0).unwrap();
        let w = dtn_direct(&Potential::zero(1.0), &f).unwrap();
        let (j, dj) = sph_bessel_j_with_derivative(3, 2.0);
        for p in 0..16 {
            let l = degree_of(p);
            assert!((w.coeffs[p].re - dj[l] / j[l]).abs() < 1e-8);
        }
    }

    #[test]
    fn resonant_radius_rejected() {
        let ff = FarField::zeros(4, 1.0);
        assert!(matches!(dtn_from_amplitude(&ff, PI, 4, 1e-12), Err(DtnError::Resonance { ell: 0, .. })));
        let f = BoundaryFunction::new(vec![Complex64::new(1.0, 0.0); 4], PI).unwrap();
        match dtn_direct(&Potential::zero(1.0), &f) {
            Err(DtnError::Resonance { ell, safe, .. }) => {
                assert_eq!(ell, 0);
                assert!(!safe.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_layer_reproduces_exterior_series() {
        let q = Potential::ball(0.1, 1.0).unwrap();
        let ff = far_field_from_radial(&solve_radial(&q, 8).unwrap());
        let f = BoundaryFunction::from_fn(2.0, 5, |s| Complex64::new(s[0] + s[2] * s[2], 0.3 * s[1])).unwrap();
        let sigma = single_layer_density(&ff, &f, 1e-12).unwrap();
        let r = 3.0;
        let x = [0.0, 0.6 * r, 0.8 * r];
        let w = single_layer_field(&ff, &sigma, &x, 60).unwrap();
        let h = crate::specfun::sph_hankel_all(5, r);
        let ha = crate::specfun::sph_hankel_all(5, 2.0);
        let y = sph_harm_real(5, &[0.0, 0.6, 0.8]);
        let ext: Complex64 = f
            .coeffs
            .iter()
            .enumerate()
            .map(|(p, c)| c * y[p] * h[degree_of(p)] / ha[degree_of(p)])
            .sum();
        assert!((w - ext).norm() < 1e-6, "{w} vs {ext}");
    }

    #[test]
    fn weak_ball_round_trip() {
        let q = Potential::ball(0.1, 1.0).unwrap();
        let ff = far_field_from_radial(&solve_radial(&q, 8).unwrap());
        let m = dtn_from_amplitude(&ff, 2.0, 8, 1e-12).unwrap();
        let d = dtn_direct_matrix(&q, 2.0, 8).unwrap();
        for (l, (x, y)) in m.mode_values().iter().zip(d.mode_values()).enumerate().take(7) {
            assert!((x - y).norm() < 0.01 * y.norm(), "l = {l}: {x} vs {y}");
        }
    }
}
