//! Partial-wave solver for radial potentials.
//!
//! The regular solution `u = r R` of `u'' + (1 - q - l(l+1)/r^2) u = 0` is
//! integrated with an adaptive Dormand-Prince 5(4) stepper, together with the
//! Volterra integrals
//!
//! `I_j = int j_l q u r dr`, `I_y = int y_l q u r dr`, `I_u = int u^2 dr`.
//!
//! With `u` started as `(2l+1)!! r j_l`, outside the support
//! `R = j_l (I_c - I_y) + y_l I_j` where `I_c` is the running normalization, so
//! `tan(delta) = -I_j / (I_c - I_y)`. Small phase shifts keep full relative
//! accuracy because no cancellation between matched values occurs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::potential::{Potential, RadialProfile};
use super::{ForwardError, Result};
use crate::specfun::{sph_bessel_j_all, sph_bessel_y_all};

/// Phase shifts `delta_l` and partial amplitudes `A_l = 4 pi e^{i delta} sin(delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShifts {
    pub delta: Vec<f64>,
    pub a_ell: Vec<Complex64>,
    pub support_radius: f64,
}

impl PhaseShifts {
    pub fn from_deltas(delta: Vec<f64>, support_radius: f64) -> Self {
        let a_ell = delta
            .iter()
            .map(|d| 4.0 * PI * Complex64::from_polar(1.0, *d) * d.sin())
            .collect();
        Self {
            delta,
            a_ell,
            support_radius,
        }
    }

    pub fn l(&self) -> usize {
        self.delta.len() - 1
    }

    /// `max_l |1 + (i/2pi) A_l| - 1`.
    pub fn unitarity_defect(&self) -> f64 {
        self.a_ell
            .iter()
            .map(|a| ((Complex64::new(1.0, 0.0) + Complex64::new(0.0, 1.0 / (2.0 * PI)) * a).norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Integration tolerances for the radial stepper.
#[derive(Debug, Clone, Copy)]
pub struct RadialOptions {
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            max_steps: 2_000_000,
        }
    }
}

/// Final state of one partial wave.
#[derive(Debug, Clone, Copy)]
pub struct RadialMode {
    pub ell: usize,
    /// End radius of the integration.
    pub r_end: f64,
    pub delta: f64,
    /// `u`, `u'` at `r_end` in the internal scaling.
    pub u: f64,
    pub du: f64,
    /// `(I_c - I_y)^2 + I_j^2`: converts internal scaling to the physical one.
    pub norm_sq: f64,
    /// `int_0^{r_end} u^2 dr` in internal scaling.
    pub iu: f64,
}

impl RadialMode {
    /// `int_0^{r_end} |R_l|^2 r^2 dr` for the physical radial factor
    /// `R_l = e^{i delta}(j_l cos delta - y_l sin delta)` outside the support.
    pub fn interior_norm_sq(&self) -> f64 {
        self.iu / self.norm_sq
    }

    /// `R_l'(r_end) / R_l(r_end)`.
    pub fn log_derivative(&self) -> f64 {
        (self.du - self.u / self.r_end) / self.u
    }
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const N: usize = 5;

fn double_factorial(n: i64) -> f64 {
    let mut v = 1.0;
    let mut k = n;
    while k > 1 {
        v *= k as f64;
        k -= 2;
    }
    v
}

struct Mode<'a> {
    ell: usize,
    profile: &'a RadialProfile,
}

impl Mode<'_> {
    fn rhs(&self, r: f64, y: &[f64; N], inside: bool) -> [f64; N] {
        let l = self.ell;
        let q = if inside { self.profile.eval(r) } else { 0.0 };
        let cent = (l * (l + 1)) as f64 / (r * r);
        let mut out = [y[1], (q - 1.0 + cent) * y[0], 0.0, 0.0, y[0] * y[0]];
        if q != 0.0 {
            let j = sph_bessel_j_all(l, r)[l];
            let yy = sph_bessel_y_all(l, r)[l];
            out[2] = j * q * y[0] * r;
            out[3] = yy * q * y[0] * r;
        }
        out
    }
}

/// Integrates partial wave `ell` from the origin to `r_end >= support radius`.
pub fn solve_mode(profile: &RadialProfile, ell: usize, r_end: f64, opts: RadialOptions) -> Result<RadialMode> {
    let a = profile.radius();
    if r_end < a {
        return Err(ForwardError::InvalidArgument(format!(
            "radial integration must reach the support radius {a}, got {r_end}"
        )));
    }
    let mode = Mode { ell, profile };
    let lf = ell as f64;
    let r0 = a * (1e-4f64).max(10f64.powf(-120.0 / (lf + 1.0)));
    let q0 = profile.eval(0.0);
    let c1 = -(1.0 - q0) / (2.0 * (2.0 * lf + 3.0));
    let mut ic = double_factorial(2 * ell as i64 + 1);
    let mut y = [
        r0.powi(ell as i32 + 1) * (1.0 + c1 * r0 * r0),
        (lf + 1.0) * r0.powi(ell as i32) + c1 * (lf + 3.0) * r0.powi(ell as i32 + 2),
        q0 * r0.powi(2 * ell as i32 + 3) / (ic * (2.0 * lf + 3.0)),
        -q0 * double_factorial(2 * ell as i64 - 1) * r0 * r0 / 2.0,
        r0.powi(2 * ell as i32 + 3) / (2.0 * lf + 3.0),
    ];
    let mut segments: Vec<f64> = profile.breakpoints().into_iter().filter(|&b| b > r0).collect();
    if r_end > a {
        segments.push(r_end);
    }
    let mut r = r0;
    let mut h = (0.05f64).min(0.1 / (profile.sup_norm().sqrt() + 1.0)).min(a / 10.0);
    let mut maxabs = y.map(|v| v.abs());
    let mut steps = 0usize;
    for &seg_end in &segments {
        let inside = seg_end <= a + 1e-14;
        while r < seg_end {
            steps += 1;
            if steps > opts.max_steps {
                return Err(ForwardError::Stiff {
                    ell,
                    r,
                    step: h,
                    suggestion: h / 10.0,
                });
            }
            let last = r + h >= seg_end;
            let step = if last { seg_end - r } else { h };
            let mut k = [[0.0; N]; 7];
            for s in 0..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for i in 0..N {
                        ys[i] += step * DP_A[s][j] * kj[i];
                    }
                }
                // Evaluate stage points slightly inside the current segment so
                // discontinuities at the segment end are never sampled.
                let rs = (r + DP_C[s] * step).min(seg_end - 1e-15 * seg_end);
                k[s] = mode.rhs(rs, &ys, inside);
            }
            let mut ynew = y;
            let mut err = 0.0f64;
            for i in 0..N {
                let mut inc = 0.0;
                let mut e = 0.0;
                for s in 0..7 {
                    inc += DP_B[s] * k[s][i];
                    e += DP_E[s] * k[s][i];
                }
                ynew[i] = y[i] + step * inc;
                let scale = opts.rtol * y[i].abs().max(ynew[i].abs()).max(1e-6 * maxabs[i]) + 1e-300;
                err = err.max((step * e).abs() / scale);
            }
            if !err.is_finite() {
                h = step / 10.0;
                if h < 1e-14 * a {
                    return Err(ForwardError::Stiff {
                        ell,
                        r,
                        step: h,
                        suggestion: h,
                    });
                }
                continue;
            }
            if err <= 1.0 {
                r = if last { seg_end } else { r + step };
                y = ynew;
                for i in 0..N {
                    maxabs[i] = maxabs[i].max(y[i].abs());
                }
                let big = y[0].abs().max(y[1].abs());
                if big > 1e100 {
                    let s = 1.0 / big;
                    for v in y.iter_mut().take(4) {
                        *v *= s;
                    }
                    y[4] *= s * s;
                    ic *= s;
                    maxabs = y.map(|v| v.abs());
                }
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || err > 1.0 {
                h = step * fac;
            }
        }
    }
    let cpart = ic - y[3];
    let delta = (-y[2] / cpart).atan();
    Ok(RadialMode {
        ell,
        r_end,
        delta,
        u: y[0],
        du: y[1],
        norm_sq: cpart * cpart + y[2] * y[2],
        iu: y[4],
    })
}

/// Phase shifts `delta_0..=delta_l` of a radial potential.
pub fn solve_radial(q: &Potential, l: usize) -> Result<PhaseShifts> {
    solve_radial_with(q, l, RadialOptions::default())
}

pub fn solve_radial_with(q: &Potential, l: usize, opts: RadialOptions) -> Result<PhaseShifts> {
    let profile = q.profile().ok_or(ForwardError::NotRadial)?;
    let a = profile.radius();
    let delta = (0..=l)
        .map(|ell| {
            if q.sup_norm == 0.0 {
                Ok(0.0)
            } else {
                solve_mode(profile, ell, a, opts).map(|m| m.delta)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseShifts::from_deltas(delta, a))
}

/// `||u(., alpha)||^2` over the support ball, from the partial-wave sum
/// `sum_l 4 pi (2l+1) int |R_l|^2 r^2 dr`, truncated at `l`.
pub fn interior_norm_sq(q: &Potential, l: usize, opts: RadialOptions) -> Result<f64> {
    let profile = q.profile().ok_or(ForwardError::NotRadial)?;
    let a = profile.radius();
    let mut total = 0.0;
    for ell in 0..=l {
        let m = solve_mode(profile, ell, a, opts)?;
        total += 4.0 * PI * (2 * ell + 1) as f64 * m.interior_norm_sq();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_zero_shifts() {
        let ps = solve_radial(&Potential::zero(1.0), 6).unwrap();
        assert!(ps.delta.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn free_mode_norm_matches_bessel() {
        // q = 0 inside: R = j_l, int_0^1 j_1^2 r^2 dr by Gauss quadrature.
        let prof = RadialProfile::Ball { q0: 0.0, radius: 1.0 };
        let m = solve_mode(&prof, 1, 1.0, RadialOptions::default()).unwrap();
        let (x, w) = crate::specfun::gauss_legendre_interval(40, 0.0, 1.0);
        let want: f64 = x
            .iter()
            .zip(&w)
            .map(|(r, w)| w * (sph_bessel_j_all(1, *r)[1] * r).powi(2))
            .sum();
        assert!((m.interior_norm_sq() - want).abs() < 1e-10 * want);
    }

    #[test]
    fn ball_matches_closed_form_matching() {
        // Inside: R = j_l(k r), k = sqrt(1 - q0); match log-derivatives at r = 1.
        for &q0 in &[0.1, -0.5, 0.9] {
            let ps = solve_radial(&Potential::ball(q0, 1.0).unwrap(), 8).unwrap();
            let k = (1.0f64 - q0).sqrt();
            let (jin, djin) = crate::specfun::sph_bessel_j_with_derivative(8, k);
            let (j, dj) = crate::specfun::sph_bessel_j_with_derivative(8, 1.0);
            let yv = sph_bessel_y_all(9, 1.0);
            let dy = crate::specfun::bessel_derivatives(&yv, 1.0);
            for l in 0..=8 {
                let g = k * djin[l] / jin[l];
                let t = (g * j[l] - dj[l]) / (g * yv[l] - dy[l]);
                let want = t.atan();
                let rel = (ps.delta[l] - want).abs() / want.abs();
                assert!(rel < 1e-6 || (ps.delta[l] - want).abs() < 1e-13, "q0={q0} l={l} {} {}", ps.delta[l], want);
            }
            assert!(ps.unitarity_defect() < 1e-12);
        }
    }
}
