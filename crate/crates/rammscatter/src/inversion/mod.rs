//! Fixed-energy inversion of amplitude data for `q~(xi) = int e^{-i xi.x} q(x) dx`.
//!
//! For a pair `theta' - theta = xi` on the complex variety, a mollifier
//! `nu(alpha) = sum_q nu_q Y_q(alpha)` is fitted so that
//! `rho(x) = e^{-i theta.x} int u(x, alpha) nu(alpha) d alpha - 1` is small on an
//! annulus `a1 <= |x| <= b` outside the support; `u` there is synthesized from the
//! data alone. Then `q^ = -4 pi int A(theta', alpha) nu(alpha) d alpha`, with error
//! of order `1/|theta|`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::forward::farfield::{extrapolated_tail, harmonic_matrix};
use crate::forward::{FarField, ForwardError};
use crate::specfun::{
    degree_of, gauss_legendre_interval, i_pow, n_harmonics, sph_bessel_j_all, sph_hankel_all, sph_harm_vec,
    S2Quadrature,
};
use crate::variety::{bilinear, ComplexDirection, DirectionPair, VarietyError};

pub mod indistinguishable;
mod lsq;
pub mod noisy;

pub use indistinguishable::{indistinguishable_pair, IndistinguishablePair, ShellSearch};

pub use noisy::{
    inject_noise, n_of_delta, reconstruct_noisy, stability_sweep, truncate_noisy, NoisyConfig, NoisyData, SweepRow,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InversionError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("least-squares system is numerically singular; raise the ridge weight (currently {reg:e})")]
    Singular { reg: f64 },
    #[error("amplitude series at |theta| = {theta_norm} is tail dominated (tail {tail:e} vs value {value:e}); raise L or lower |theta|")]
    TailDominated { theta_norm: f64, tail: f64, value: f64 },
    #[error("noise level {0} must satisfy 0 < delta < 1/e")]
    NoiseLevel(f64),
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error(transparent)]
    Variety(#[from] VarietyError),
}

pub type Result<T> = std::result::Result<T, InversionError>;

/// Annulus `a1 <= |x| <= b` with `n_r` Gauss nodes in radius and angular rule of order `l_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub a1: f64,
    pub b: f64,
    pub n_r: usize,
    /// Angular order; `None` picks `max(L, L_nu) + ceil(|theta| b) + 8`.
    pub l_q: Option<usize>,
}

impl AnnulusSpec {
    /// `a1 = 1.2 a`, `b = 1.5 a`, 12 radial nodes.
    pub fn default_for(a: f64) -> Self {
        Self {
            a1: 1.2 * a,
            b: 1.5 * a,
            n_r: 12,
            l_q: None,
        }
    }

    pub fn validate(&self, a: f64) -> Result<()> {
        if !(a < self.a1 && self.a1 < self.b) || self.n_r == 0 {
            return Err(InversionError::InvalidArgument(format!(
                "annulus needs a < a1 < b and n_r > 0 (a = {a}, a1 = {}, b = {}, n_r = {})",
                self.a1, self.b, self.n_r
            )));
        }
        Ok(())
    }
}

/// Fitted mollifier coefficients.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub nu: Vec<Complex64>,
    pub l_nu: usize,
    pub theta: ComplexDirection,
    /// `||nu||_{L^2(S^2)}`.
    pub norm_a: f64,
    /// `||rho||` on the annulus, evaluated directly from `nu`.
    pub rho_norm: f64,
    /// Smallest `||rho||` attainable by the factorized model.
    pub best_rho: f64,
    pub rank: usize,
    pub condition: f64,
}

/// One rung of a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub xi: [f64; 3],
    pub q_hat: Complex64,
    pub theta_norm: f64,
    pub rho_norm: f64,
    pub nu_norm: f64,
    pub l_nu: usize,
    pub truncation: Option<usize>,
    pub error_vs_truth: Option<Complex64>,
    pub tail_estimate: f64,
    /// Noisy runs: `|theta| (||rho|| + a(nu) e^{kappa b} mu)`.
    pub budget: Option<f64>,
    pub constraint_violated: bool,
}

/// `max(2 ceil|theta|, 12)` capped at 24.
pub fn default_l_nu(theta_norm: f64) -> usize {
    (2 * theta_norm.ceil() as usize).max(12).min(24)
}

/// Harmonic coefficient operator of `u` on a sphere of radius `r`:
/// `int u(r s, alpha) nu(alpha) d alpha = sum_p Y_p(s) (B nu)_p`,
/// `B = diag(4 pi i^l j_l(r)) + diag(h_l(r)) C`.
fn field_operator(ff: &FarField, l_nu: usize, lmax: usize, r: f64) -> DMatrix<Complex64> {
    let n_max = n_harmonics(lmax);
    let n_nu = n_harmonics(l_nu);
    let n_ff = ff.dim();
    let jl = sph_bessel_j_all(lmax, r);
    let hl = sph_hankel_all(ff.l, r);
    let mut b = DMatrix::zeros(n_max, n_nu);
    for p in 0..n_nu {
        let l = degree_of(p);
        b[(p, p)] = i_pow(l as i64) * (4.0 * PI * jl[l]);
    }
    for p in 0..n_ff {
        let h = hl[degree_of(p)];
        for q in 0..n_ff.min(n_nu) {
            b[(p, q)] += h * ff.coeffs[(p, q)];
        }
    }
    b
}

fn expi_neg(theta: &[Complex64; 3], x: &[f64; 3]) -> Complex64 {
    let tx = theta[0] * x[0] + theta[1] * x[1] + theta[2] * x[2];
    (Complex64::new(0.0, -1.0) * tx).exp()
}

struct Assembly {
    r_aug: DMatrix<Complex64>,
    y: DMatrix<Complex64>,
    /// Per shell: field operator and per-node `(e^{-i theta.x} wt, wt)`.
    shells: Vec<(DMatrix<Complex64>, Vec<(Complex64, f64)>)>,
}

impl Assembly {
    fn new(ff: &FarField, theta: &ComplexDirection, spec: &AnnulusSpec, l_nu: usize) -> Result<Self> {
        spec.validate(ff.a)?;
        let lmax = ff.l.max(l_nu);
        let n_nu = n_harmonics(l_nu);
        let l_q = spec
            .l_q
            .unwrap_or(lmax + (theta.norm() * spec.b).ceil() as usize + 8);
        let quad = S2Quadrature::new(l_q);
        let y = harmonic_matrix(&quad, lmax);
        let (rs, rw) = gauss_legendre_interval(spec.n_r, spec.a1, spec.b);
        let mut qr = lsq::StreamedQr::new(n_nu + 1);
        let mut shells = Vec::with_capacity(spec.n_r);
        for (r, w) in rs.iter().zip(&rw) {
            let b = field_operator(ff, l_nu, lmax, *r);
            let yb = &y * &b;
            let mut block = DMatrix::zeros(quad.len(), n_nu + 1);
            let mut rows = Vec::with_capacity(quad.len());
            for (i, node) in quad.nodes.iter().enumerate() {
                let x = [node[0] * r, node[1] * r, node[2] * r];
                let wt = (quad.weights[i] * w * r * r).sqrt();
                let d = expi_neg(&theta.theta, &x) * wt;
                for q in 0..n_nu {
                    block[(i, q)] = yb[(i, q)] * d;
                }
                block[(i, n_nu)] = Complex64::new(wt, 0.0);
                rows.push((d, wt));
            }
            qr.push(block);
            shells.push((b, rows));
        }
        Ok(Self { r_aug: qr.finish(), y, shells })
    }

    /// `||rho||` evaluated directly from the coefficients.
    fn rho_norm(&self, nu: &[Complex64]) -> f64 {
        let nu_vec = nalgebra::DVector::from_column_slice(nu);
        let mut rho2 = 0.0;
        for (b, rows) in &self.shells {
            let v = &self.y * (b * &nu_vec);
            for (i, (d, wt)) in rows.iter().enumerate() {
                rho2 += (v[i] * d - wt).norm_sqr();
            }
        }
        rho2.sqrt()
    }
}

/// Minimizes `||rho||^2 + reg ||nu||^2` over mollifiers of degree `<= l_nu`.
pub fn fit_mollifier_with(
    ff: &FarField,
    theta: &ComplexDirection,
    spec: &AnnulusSpec,
    reg: f64,
    l_nu: usize,
    rcond: f64,
) -> Result<Mollifier> {
    if !(reg >= 0.0) {
        return Err(InversionError::InvalidArgument(format!("ridge weight must be >= 0, got {reg}")));
    }
    let asm = Assembly::new(ff, theta, spec, l_nu)?;
    let sol = lsq::solve_augmented(&asm.r_aug, reg, rcond).ok_or(InversionError::Singular { reg })?;
    let rho_norm = asm.rho_norm(&sol.x);
    log::trace!("mollifier fit: factorized residual {:e}, direct {:e}", sol.residual, rho_norm);
    let smax = sol.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let smin_kept = sol
        .singular_values
        .iter()
        .copied()
        .filter(|s| *s >= rcond * smax)
        .fold(f64::INFINITY, f64::min);
    Ok(Mollifier {
        norm_a: sol.x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
        rho_norm,
        nu: sol.x,
        l_nu,
        theta: *theta,
        best_rho: sol.best_residual,
        rank: sol.rank,
        condition: smax / smin_kept,
    })
}

/// Default relative singular-value cutoff.
pub const DEFAULT_RCOND: f64 = 1e-15;

/// [`fit_mollifier_with`] at `theta = pair.theta`, the default `L_nu` and cutoff.
pub fn fit_mollifier(ff: &FarField, pair: &DirectionPair, spec: &AnnulusSpec, reg: f64) -> Result<Mollifier> {
    fit_mollifier_with(ff, &pair.theta, spec, reg, default_l_nu(pair.theta.norm()), DEFAULT_RCOND)
}

/// `q^ = -4 pi sum_p Y_p(theta') (C nu)_p` and the estimated tail of the series beyond `L`.
pub fn estimate(ff: &FarField, nu: &Mollifier, theta_prime: &ComplexDirection) -> (Complex64, f64) {
    let n_ff = ff.dim();
    let n = n_ff.min(nu.nu.len());
    let lt = ff.l.max(nu.l_nu);
    let y = sph_harm_vec(lt, &theta_prime.theta);
    let mut value = Complex64::new(0.0, 0.0);
    let mut block = vec![0.0; ff.l + 1];
    for l in 0..=ff.l {
        for p in l * l..(l + 1) * (l + 1) {
            let cnu: Complex64 = (0..n).map(|q| ff.coeffs[(p, q)] * nu.nu[q]).sum();
            value += y[p] * cnu;
            block[l] += (0..n_ff).map(|q| ff.coeffs[(p, q)].norm_sqr()).sum::<f64>();
        }
    }
    // Per-degree amplitude size: row-block Frobenius norm over sqrt(2l+1), which
    // is |A_l| for a radial potential. Degrees past L pair the extrapolated size
    // with the exact contraction sum_m nu_lm Y_lm(theta') of the known mollifier.
    let block: Vec<f64> = block
        .iter()
        .enumerate()
        .map(|(l, b)| (b / (2 * l + 1) as f64).sqrt())
        .collect();
    let weights: Vec<f64> = (ff.l + 1..=nu.l_nu)
        .map(|l| {
            (l * l..(l + 1) * (l + 1))
                .map(|p| nu.nu[p] * y[p])
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    let tail = 4.0 * PI * extrapolated_tail(&block, ff.a, &weights);
    (value * (-4.0 * PI), tail)
}

fn check_pair(pair: &DirectionPair, xi: &[f64; 3]) -> Result<()> {
    for k in 0..3 {
        if (pair.theta_prime.theta[k] - pair.theta.theta[k] - xi[k]).norm() > 1e-9 * (1.0 + pair.theta.norm()) {
            return Err(InversionError::InvalidArgument("ladder pair does not satisfy theta' - theta = xi".into()));
        }
    }
    debug_assert!((bilinear(&pair.theta.theta, &pair.theta.theta) - 1.0).norm() < 1e-9);
    Ok(())
}

/// Exact-data reconstruction along a ladder of pairs. A rung whose amplitude
/// series is tail dominated aborts the run with [`InversionError::TailDominated`].
pub fn reconstruct_exact(
    ff: &FarField,
    xi: [f64; 3],
    ladder: &[DirectionPair],
    spec: &AnnulusSpec,
    reg: f64,
    truth: Option<Complex64>,
) -> Result<Vec<ReconstructionReport>> {
    for pair in ladder {
        check_pair(pair, &xi)?;
    }
    ladder
        .par_iter()
        .map(|pair| {
            let m = fit_mollifier(ff, pair, spec, reg)?;
            let (q_hat, tail) = estimate(ff, &m, &pair.theta_prime);
            if tail > 0.01 * q_hat.norm() {
                return Err(InversionError::TailDominated {
                    theta_norm: pair.theta.norm(),
                    tail,
                    value: q_hat.norm(),
                });
            }
            Ok(ReconstructionReport {
                xi,
                q_hat,
                theta_norm: pair.theta.norm(),
                rho_norm: m.rho_norm,
                nu_norm: m.norm_a,
                l_nu: m.l_nu,
                truncation: None,
                error_vs_truth: truth.map(|t| q_hat - t),
                tail_estimate: tail,
                budget: None,
                constraint_violated: false,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
