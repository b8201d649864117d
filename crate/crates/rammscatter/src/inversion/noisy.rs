//! Reconstruction from amplitude samples known only up to `sup |A_delta - A| <= delta`.
//!
//! Samples are projected onto harmonics of degree at most
//! `N(delta) = [|ln delta| / ln|ln delta|]`. The mollifier on each rung of a
//! growth ladder minimizes `||rho_delta||^2 + (e^{kappa b} mu)^2 ||nu||^2` with
//! `mu = e^{-gamma N}`, and the largest `|theta|` whose budget
//! `|theta| (||rho_delta|| + a(nu) e^{kappa b} mu)` stays below `c_budget` is kept.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{estimate, fit_mollifier_with, AnnulusSpec, InversionError, ReconstructionReport, Result, DEFAULT_RCOND};
use crate::forward::farfield::harmonic_matrix;
use crate::forward::{FarField, NoiseRecord};
use crate::specfun::{degree_of, gauss_legendre_interval, n_harmonics, sph_hankel_all, S2Quadrature};
use crate::variety::growth_schedule;

/// Amplitude samples `A_delta(a_i, a_j)` on the product rule of order `order`
/// (rows: outgoing node, columns: incident node).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyData {
    pub samples: DMatrix<Complex64>,
    pub delta: f64,
    pub order: usize,
    pub a: f64,
    pub seed: u64,
}

/// Parameters of the noisy-data algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyConfig {
    pub spec: AnnulusSpec,
    /// Rate in `mu = e^{-gamma N}`; default `ln(a1 / a)`.
    pub gamma: f64,
    pub c_budget: f64,
    pub ladder_steps: usize,
}

impl NoisyConfig {
    pub fn default_for(a: f64) -> Self {
        let spec = AnnulusSpec::default_for(a);
        Self {
            gamma: (spec.a1 / a).ln(),
            spec,
            c_budget: 10.0,
            ladder_steps: 4,
        }
    }
}

/// `N(delta)`: nearest integer to `|ln delta| / ln|ln delta|`.
pub fn n_of_delta(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < (-1.0f64).exp()) {
        return Err(InversionError::NoiseLevel(delta));
    }
    let l = delta.ln().abs();
    Ok((l / l.ln()).round() as usize)
}

/// Samples `ff` on its order-`L` rule and adds independent perturbations uniform
/// in the complex disk of radius `delta`.
pub fn inject_noise(ff: &FarField, delta: f64, seed: u64) -> Result<NoisyData> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(InversionError::NoiseLevel(delta));
    }
    let quad = S2Quadrature::new(ff.l);
    let mut samples = ff.sample(&quad);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in samples.iter_mut() {
        let r = delta * rng.random::<f64>().sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        *v += Complex64::from_polar(r, phi);
    }
    Ok(NoisyData {
        samples,
        delta,
        order: ff.l,
        a: ff.a,
        seed,
    })
}

impl NoisyData {
    /// `A_{delta,p}(a_j) = sum_i w_i A_delta(a_i, a_j) conj(Y_p(a_i))` for `p` of degree `<= l`.
    pub fn outgoing_coefficients(&self, l: usize) -> DMatrix<Complex64> {
        let quad = S2Quadrature::new(self.order);
        let y = harmonic_matrix(&quad, l);
        let mut yw = y.adjoint();
        for (i, w) in quad.weights.iter().enumerate() {
            yw.column_mut(i).scale_mut(*w);
        }
        yw * &self.samples
    }
}

/// Projects the samples onto harmonics of degree `<= min(N(delta), order)` in both arguments.
pub fn truncate_noisy(nd: &NoisyData) -> Result<FarField> {
    let n = n_of_delta(nd.delta)?.min(nd.order);
    let quad = S2Quadrature::new(nd.order);
    let y = harmonic_matrix(&quad, n);
    let mut yw = y.clone();
    for (i, w) in quad.weights.iter().enumerate() {
        yw.row_mut(i).scale_mut(*w);
    }
    // C = (W Y)^H S (W conj(Y)), i.e. sum_ij w_i w_j S_ij conj(Y_p(a_i)) Y_q(a_j).
    let coeffs = yw.adjoint() * &nd.samples * &yw;
    let mut ff = FarField::zeros(n, nd.a);
    ff.coeffs = coeffs;
    ff.meta.solver = "noisy-projection".into();
    ff.noise = Some(NoiseRecord {
        delta: nd.delta,
        seed: nd.seed,
        n_trunc: n,
    });
    Ok(ff)
}

/// Noisy-data estimate of `q~(xi)` with budget-based rung selection.
pub fn reconstruct_noisy(
    nd: &NoisyData,
    xi: [f64; 3],
    cfg: &NoisyConfig,
    truth: Option<Complex64>,
) -> Result<ReconstructionReport> {
    let ff = truncate_noisy(nd)?;
    reconstruct_truncated(&ff, xi, cfg, truth)
}

fn reconstruct_truncated(
    ff: &FarField,
    xi: [f64; 3],
    cfg: &NoisyConfig,
    truth: Option<Complex64>,
) -> Result<ReconstructionReport> {
    let n = ff.noise.as_ref().map(|r| r.n_trunc).unwrap_or(ff.l);
    let mu = (-cfg.gamma * n as f64).exp();
    let ladder = growth_schedule(xi, cfg.ladder_steps.max(2))?;
    let mut reports = Vec::with_capacity(ladder.len());
    for pair in &ladder {
        let kappa = pair.theta.kappa;
        let pen = (kappa * cfg.spec.b).exp() * mu;
        let l_nu = super::default_l_nu(pair.theta.norm());
        let m = fit_mollifier_with(ff, &pair.theta, &cfg.spec, pen * pen, l_nu, DEFAULT_RCOND)?;
        let (q_hat, tail) = estimate(ff, &m, &pair.theta_prime);
        let budget = pair.theta.norm() * (m.rho_norm + m.norm_a * pen);
        reports.push(ReconstructionReport {
            xi,
            q_hat,
            theta_norm: pair.theta.norm(),
            rho_norm: m.rho_norm,
            nu_norm: m.norm_a,
            l_nu,
            truncation: Some(n),
            error_vs_truth: truth.map(|t| q_hat - t),
            tail_estimate: tail,
            budget: Some(budget),
            constraint_violated: budget > cfg.c_budget,
        });
    }
    let chosen = reports
        .iter()
        .rposition(|r| !r.constraint_violated)
        .unwrap_or(0);
    log::debug!(
        "noisy reconstruction: N = {n}, budgets {:?}, chosen |theta| = {}",
        reports.iter().map(|r| r.budget.unwrap_or(0.0)).collect::<Vec<_>>(),
        reports[chosen].theta_norm
    );
    Ok(reports.swap_remove(chosen))
}

/// One noise level of a stability sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub n_trunc: usize,
    /// Smallest selected `|theta|` over the xi grid.
    pub theta_norm: f64,
    pub sup_error: f64,
    /// `sup_alpha ||u_delta(., alpha) - u(., alpha)||_{L^2(annulus)}`.
    pub field_error: f64,
    /// `(ln|ln delta|)^2 / |ln delta|`.
    pub envelope_log: f64,
    /// `e^{-gamma N(delta)}`.
    pub envelope_exp: f64,
    pub violated: bool,
}

/// `sup_alpha` over the order-`L` rule of the annulus norm of the exterior-field
/// difference between two FarFields.
pub fn exterior_field_discrepancy(clean: &FarField, other: &FarField, spec: &AnnulusSpec) -> f64 {
    let l = clean.l.max(other.l);
    let n = n_harmonics(l);
    let mut d = DMatrix::<Complex64>::zeros(n, n);
    for p in 0..clean.dim() {
        for q in 0..clean.dim() {
            d[(p, q)] += clean.coeffs[(p, q)];
        }
    }
    for p in 0..other.dim() {
        for q in 0..other.dim() {
            d[(p, q)] -= other.coeffs[(p, q)];
        }
    }
    let (rs, rw) = gauss_legendre_interval(spec.n_r.max(8), spec.a1, spec.b);
    let radial: Vec<f64> = (0..=l)
        .map(|ell| {
            rs.iter()
                .zip(&rw)
                .map(|(r, w)| w * r * r * sph_hankel_all(l, *r)[ell].norm_sqr())
                .sum()
        })
        .collect();
    let quad = S2Quadrature::new(l + 1);
    let y = harmonic_matrix(&quad, l);
    let coef = &d * y.adjoint();
    (0..quad.len())
        .map(|j| {
            (0..n)
                .map(|p| coef[(p, j)].norm_sqr() * radial[degree_of(p)])
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Full noisy pipeline per noise level: inject, truncate, reconstruct over the
/// xi grid and measure the exterior-field discrepancy. `truth` supplies `q~(xi)`.
pub fn stability_sweep<F>(
    clean: &FarField,
    truth: F,
    deltas: &[f64],
    xi_grid: &[[f64; 3]],
    cfg: &NoisyConfig,
    seed: u64,
) -> Result<Vec<SweepRow>>
where
    F: Fn(&[f64; 3]) -> Complex64,
{
    if deltas.is_empty() || xi_grid.is_empty() {
        return Err(InversionError::InvalidArgument("stability sweep needs noise levels and xi values".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for (k, &delta) in deltas.iter().enumerate() {
        let nd = inject_noise(clean, delta, seed.wrapping_add(k as u64))?;
        let ff = truncate_noisy(&nd)?;
        let n = ff.noise.as_ref().map(|r| r.n_trunc).unwrap_or(ff.l);
        let mut sup_error = 0.0f64;
        let mut theta_norm = f64::INFINITY;
        let mut violated = false;
        for xi in xi_grid {
            let rep = reconstruct_truncated(&ff, *xi, cfg, Some(truth(xi)))?;
            sup_error = sup_error.max(rep.error_vs_truth.map(|e| e.norm()).unwrap_or(0.0));
            theta_norm = theta_norm.min(rep.theta_norm);
            violated |= rep.constraint_violated;
        }
        let ld = delta.ln().abs();
        rows.push(SweepRow {
            delta,
            n_trunc: n,
            theta_norm,
            sup_error,
            field_error: exterior_field_discrepancy(clean, &ff, &cfg.spec),
            envelope_log: ld.ln().powi(2) / ld,
            envelope_exp: (-cfg.gamma * n as f64).exp(),
            violated,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{far_field_from_radial, solve_radial, Potential};

    #[test]
    fn truncation_order() {
        assert_eq!(n_of_delta(1e-6).unwrap(), 5);
        assert_eq!(n_of_delta(1e-12).unwrap(), 8);
        assert!(n_of_delta(0.5).is_err());
    }

    #[test]
    fn noise_is_bounded_and_deterministic() {
        let ff = far_field_from_radial(&solve_radial(&Potential::ball(0.1, 1.0).unwrap(), 6).unwrap());
        let a = inject_noise(&ff, 1e-4, 7).unwrap();
        let b = inject_noise(&ff, 1e-4, 7).unwrap();
        assert_eq!(a, b);
        let clean = ff.sample(&S2Quadrature::new(6));
        let sup = (&a.samples - &clean).iter().fold(0.0f64, |m, c| m.max(c.norm()));
        assert!(sup <= 1e-4);
    }

    #[test]
    fn projection_recovers_clean_coefficients() {
        let ff = far_field_from_radial(&solve_radial(&Potential::ball(0.1, 1.0).unwrap(), 6).unwrap());
        let nd = inject_noise(&ff, 1e-14, 1).unwrap();
        let t = truncate_noisy(&nd).unwrap();
        let n = t.dim();
        for p in 0..n {
            for q in 0..n {
                assert!((t.coeffs[(p, q)] - ff.coeffs[(p, q)]).norm() < 1e-12);
            }
        }
    }
}
