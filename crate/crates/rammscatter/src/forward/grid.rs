//! Volume Lippmann-Schwinger solver on a uniform voxel grid.
//!
//! Solves `u + K(q u) = e^{i alpha.x}` on the cube `[-a, a]^3` with `n` cells per
//! edge. `K` is the outgoing Helmholtz kernel sampled at cell-centre offsets
//! times the cell volume, with the singular cell replaced by the exact integral
//! over the ball of equal volume, `e^{i eps}(1 - i eps) - 1`. Products with `K`
//! use a zero-padded FFT of size `(2n)^3`; the system is solved by restarted
//! GMRES.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use super::farfield::{FarField, Provenance};
use super::potential::{Potential, PotentialKind};
use super::{ForwardError, Result};
use crate::specfun::{degree_of, i_pow, n_harmonics, sph_bessel_j_all, sph_harm_real, S2Quadrature};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Discretization and iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    pub n: usize,
    /// Relative residual target.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            n: 32,
            tol: 1e-10,
            restart: 30,
            max_iter: 600,
        }
    }
}

/// Total field `u(x, alpha)` at the cell centres.
#[derive(Debug, Clone)]
pub struct GridField {
    pub n: usize,
    pub a: f64,
    pub alpha: [f64; 3],
    /// x-major values, index `(i n + j) n + k`.
    pub values: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

impl GridField {
    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        cell_center(self.n, self.a, i, j, k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.values[(i * self.n + j) * self.n + k]
    }
}

fn cell_center(n: usize, a: f64, i: usize, j: usize, k: usize) -> [f64; 3] {
    let h = 2.0 * a / n as f64;
    [i, j, k].map(|t| -a + h * (t as f64 + 0.5))
}

/// Discretized operator `I + K Q` for one potential and grid.
pub struct LsGrid {
    pub n: usize,
    pub a: f64,
    pub h: f64,
    /// Cell averages of `q`.
    pub qbar: Vec<f64>,
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl LsGrid {
    pub fn new(q: &Potential, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(ForwardError::InvalidGrid(n));
        }
        let a = q.support_radius;
        let h = 2.0 * a / n as f64;
        let qbar = cell_averages(q, n);
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let eps = h * (3.0 / (4.0 * PI)).powf(1.0 / 3.0);
        let self_w = Complex64::from_polar(1.0, eps) * Complex64::new(1.0, -eps) - 1.0;
        let mut kern = vec![ZERO; m * m * m];
        let off = |t: usize| -> Option<f64> {
            match t.cmp(&n) {
                std::cmp::Ordering::Less => Some(t as f64),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(t as f64 - m as f64),
            }
        };
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let (Some(di), Some(dj), Some(dk)) = (off(i), off(j), off(k)) else {
                        continue;
                    };
                    let r = h * (di * di + dj * dj + dk * dk).sqrt();
                    kern[(i * m + j) * m + k] = if r == 0.0 {
                        self_w
                    } else {
                        Complex64::from_polar(h * h * h / (4.0 * PI * r), r)
                    };
                }
            }
        }
        let mut op = Self {
            n,
            a,
            h,
            qbar,
            kernel_hat: Vec::new(),
            fwd,
            inv,
        };
        op.fft3(&mut kern, true, m);
        op.kernel_hat = kern;
        Ok(op)
    }

    /// In-place 3-D transform of an `m^3` array. With `full = false` only the
    /// `n^3` corner is assumed nonzero on input (forward) or needed on output
    /// (inverse), and empty lines are skipped.
    fn fft3(&self, buf: &mut [Complex64], forward: bool, nz: usize) {
        let m = 2 * self.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        let mut line = vec![ZERO; m];
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        let axes: [usize; 3] = if forward { [2, 1, 0] } else { [0, 1, 2] };
        for (step, &axis) in axes.iter().enumerate() {
            // Extent of the other two indices that may be nonzero (forward) or are needed (inverse).
            let (ext_a, ext_b) = if forward {
                match step {
                    0 => (nz, nz),
                    1 => (nz, m),
                    _ => (m, m),
                }
            } else {
                match step {
                    0 => (m, m),
                    1 => (nz, m),
                    _ => (nz, nz),
                }
            };
            for u in 0..ext_a {
                for v in 0..ext_b {
                    let idx = |t: usize| match axis {
                        2 => (u * m + v) * m + t,
                        1 => (u * m + t) * m + v,
                        _ => (t * m + v) * m + u,
                    };
                    for t in 0..m {
                        line[t] = buf[idx(t)];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for t in 0..m {
                        buf[idx(t)] = line[t];
                    }
                }
            }
        }
    }

    /// `out = x + K(q x)`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let m = 2 * n;
        let mut buf = vec![ZERO; m * m * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = (i * n + j) * n + k;
                    buf[(i * m + j) * m + k] = x[c] * self.qbar[c];
                }
            }
        }
        self.fft3(&mut buf, true, n);
        for (b, kh) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= kh;
        }
        self.fft3(&mut buf, false, n);
        let scale = 1.0 / (m * m * m) as f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = (i * n + j) * n + k;
                    out[c] = x[c] + buf[(i * m + j) * m + k] * scale;
                }
            }
        }
    }

    pub fn plane_wave(&self, alpha: &[f64; 3]) -> Vec<Complex64> {
        let n = self.n;
        let mut v = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = cell_center(n, self.a, i, j, k);
                    v.push(Complex64::from_polar(1.0, alpha[0] * x[0] + alpha[1] * x[1] + alpha[2] * x[2]));
                }
            }
        }
        v
    }

    pub fn solve(&self, alpha: &[f64; 3], opts: &GridOptions) -> Result<GridField> {
        let b = self.plane_wave(alpha);
        if self.qbar.iter().all(|q| *q == 0.0) {
            return Ok(GridField {
                n: self.n,
                a: self.a,
                alpha: *alpha,
                values: b,
                iterations: 0,
                residual: 0.0,
            });
        }
        let (x, iterations, residual) = gmres(|x, y| self.apply(x, y), &b, opts.tol, opts.restart, opts.max_iter)?;
        Ok(GridField {
            n: self.n,
            a: self.a,
            alpha: *alpha,
            values: x,
            iterations,
            residual,
        })
    }

    /// `A(alpha', alpha) = -(1/4pi) sum_c h^3 e^{-i alpha'.x_c} q_c u_c`.
    pub fn amplitude(&self, u: &[Complex64], out: &[f64; 3]) -> Complex64 {
        let n = self.n;
        let mut s = ZERO;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = (i * n + j) * n + k;
                    if self.qbar[c] != 0.0 {
                        let x = cell_center(n, self.a, i, j, k);
                        s += Complex64::from_polar(self.qbar[c], -(out[0] * x[0] + out[1] * x[1] + out[2] * x[2])) * u[c];
                    }
                }
            }
        }
        -s * self.h.powi(3) / (4.0 * PI)
    }

    /// Rows `h^3 q_c (-i)^l conj(Y_p(x_c/|x_c|)) j_l(|x_c|)` for the active cells,
    /// so that `A_p(alpha) = -sum_c row_c[p] u_c`.
    fn projection(&self, l: usize) -> (Vec<usize>, DMatrix<Complex64>) {
        let n = self.n;
        let np = n_harmonics(l);
        let active: Vec<usize> = (0..n * n * n).filter(|&c| self.qbar[c] != 0.0).collect();
        let mut p = DMatrix::zeros(active.len(), np);
        let h3 = self.h.powi(3);
        for (row, &c) in active.iter().enumerate() {
            let (i, j, k) = (c / (n * n), (c / n) % n, c % n);
            let x = cell_center(n, self.a, i, j, k);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let y = sph_harm_real(l, &[x[0] / r, x[1] / r, x[2] / r]);
            let jl = sph_bessel_j_all(l, r);
            for q in 0..np {
                let ell = degree_of(q);
                p[(row, q)] = y[q].conj() * i_pow(-(ell as i64)) * jl[ell] * h3 * self.qbar[c];
            }
        }
        (active, p)
    }
}

fn cell_averages(q: &Potential, n: usize) -> Vec<f64> {
    let a = q.support_radius;
    let h = 2.0 * a / n as f64;
    if let PotentialKind::Grid { n: gn, values } = &q.kind {
        if *gn == n {
            return values.clone();
        }
    }
    let breaks: Vec<f64> = match &q.kind {
        PotentialKind::Radial(p) => p.breakpoints(),
        _ => vec![a],
    };
    let half_diag = h * 3f64.sqrt() / 2.0;
    let mut out = vec![0.0; n * n * n];
    out.par_iter_mut().enumerate().for_each(|(c, v)| {
        let (i, j, k) = (c / (n * n), (c / n) % n, c % n);
        let x = cell_center(n, a, i, j, k);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r - half_diag > a {
            return;
        }
        let s = if breaks.iter().any(|b| (r - b).abs() < half_diag) { 8 } else { 4 };
        let mut acc = 0.0;
        for u in 0..s {
            for w in 0..s {
                for z in 0..s {
                    let d = [u, w, z].map(|t| h * ((t as f64 + 0.5) / s as f64 - 0.5));
                    acc += q.eval([x[0] + d[0], x[1] + d[1], x[2] + d[2]]);
                }
            }
        }
        *v = acc / (s * s * s) as f64;
    });
    out
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES with zero initial guess. Returns the solution, the total
/// number of inner iterations and the final relative residual.
pub fn gmres<F>(apply: F, b: &[Complex64], tol: f64, restart: usize, max_iter: usize) -> Result<(Vec<Complex64>, usize, f64)>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut total = 0;
    let mut r = b.to_vec();
    let mut tmp = vec![ZERO; n];
    let mut rel = 1.0;
    while total < max_iter {
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= tol {
            break;
        }
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hm = vec![vec![ZERO; restart]; restart + 1];
        let mut cs = vec![ZERO; restart];
        let mut sn = vec![ZERO; restart];
        let mut g = vec![ZERO; restart + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..restart {
            apply(&v[k], &mut tmp);
            let mut w = tmp.clone();
            for (i, vi) in v.iter().enumerate() {
                let hik = dotc(vi, &w);
                hm[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            hm[k + 1][k] = Complex64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * hm[i][k] + sn[i].conj() * hm[i + 1][k];
                hm[i + 1][k] = -sn[i] * hm[i][k] + cs[i] * hm[i + 1][k];
                hm[i][k] = t;
            }
            let (a, bb) = (hm[k][k], hm[k + 1][k]);
            let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if d == 0.0 {
                cs[k] = Complex64::new(1.0, 0.0);
                sn[k] = ZERO;
            } else {
                cs[k] = a / d;
                sn[k] = bb / d;
            }
            hm[k][k] = cs[k].conj() * a + sn[k].conj() * bb;
            hm[k + 1][k] = ZERO;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            total += 1;
            k_used = k + 1;
            rel = g[k + 1].norm() / bnorm;
            if rel <= tol || wn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|z| z / wn).collect());
        }
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= hm[i][j] * y[j];
            }
            y[i] = s / hm[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vji) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vji;
            }
        }
        apply(&x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            break;
        }
    }
    if rel > tol {
        return Err(ForwardError::NotConverged {
            iterations: total,
            residual: rel,
        });
    }
    Ok((x, total, rel))
}

/// Solves the Lippmann-Schwinger equation for one incident direction.
pub fn solve_ls_grid(q: &Potential, alpha: &[f64; 3], n: usize, tol: f64) -> Result<GridField> {
    let op = LsGrid::new(q, n)?;
    op.solve(
        alpha,
        &GridOptions {
            n,
            tol,
            ..GridOptions::default()
        },
    )
}

/// FarField from volume solves at the nodes of the order-`L` sphere rule.
pub fn far_field_from_grid(q: &Potential, l: usize, opts: &GridOptions) -> Result<FarField> {
    let op = LsGrid::new(q, opts.n)?;
    let mut ff = FarField::zeros(l, q.support_radius);
    ff.meta = Provenance {
        solver: "grid".into(),
        grid_n: Some(opts.n),
        tol: Some(opts.tol),
        potential_hash: q.hash_hex(),
    };
    if op.qbar.iter().all(|v| *v == 0.0) {
        return Ok(ff);
    }
    let quad = S2Quadrature::new(l);
    let (active, proj) = op.projection(l);
    let cols: Vec<Vec<Complex64>> = quad
        .nodes
        .par_iter()
        .map(|alpha| -> Result<Vec<Complex64>> {
            let u = op.solve(alpha, opts)?;
            let np = proj.ncols();
            let mut out = vec![ZERO; np];
            for (row, &c) in active.iter().enumerate() {
                let uc = u.values[c];
                for (p, o) in out.iter_mut().enumerate() {
                    *o -= proj[(row, p)] * uc;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let np = n_harmonics(l);
    for (j, alpha) in quad.nodes.iter().enumerate() {
        let y = sph_harm_real(l, alpha);
        let w = quad.weights[j];
        for p in 0..np {
            let ap = cols[j][p] * w;
            for q in 0..np {
                ff.coeffs[(p, q)] += ap * y[q];
            }
        }
    }
    log::debug!("grid far field: n = {}, L = {}, {} directions", opts.n, l, quad.len());
    Ok(ff)
}
