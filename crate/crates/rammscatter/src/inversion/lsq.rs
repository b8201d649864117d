//! Tall least squares by streamed QR followed by a truncated SVD of the
//! column-scaled triangular factor.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Accumulates the triangular factor of an augmented matrix `[M | b]` block by block.
pub(crate) struct StreamedQr {
    ncols: usize,
    r: Option<DMatrix<Complex64>>,
}

impl StreamedQr {
    pub fn new(ncols: usize) -> Self {
        Self { ncols, r: None }
    }

    pub fn push(&mut self, block: DMatrix<Complex64>) {
        assert_eq!(block.ncols(), self.ncols);
        let stacked = match self.r.take() {
            None => block,
            Some(r) => {
                let mut s = DMatrix::zeros(r.nrows() + block.nrows(), self.ncols);
                s.view_mut((0, 0), (r.nrows(), self.ncols)).copy_from(&r);
                s.view_mut((r.nrows(), 0), (block.nrows(), self.ncols)).copy_from(&block);
                s
            }
        };
        self.r = Some(stacked.qr().r());
    }

    pub fn finish(self) -> DMatrix<Complex64> {
        self.r.unwrap_or_else(|| DMatrix::zeros(0, self.ncols))
    }
}

pub(crate) struct LsqSolution {
    pub x: Vec<Complex64>,
    /// `||M x - b||` predicted from the factorization.
    pub residual: f64,
    /// Smallest attainable `||M x - b||`.
    pub best_residual: f64,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

/// Solves `min ||M x - b||^2 + reg ||x||^2` from the factor `R_aug` of `[M | b]`,
/// after scaling the columns of `M` to unit norm and discarding singular values
/// below `rcond * s_max`.
pub(crate) fn solve_augmented(r_aug: &DMatrix<Complex64>, reg: f64, rcond: f64) -> Option<LsqSolution> {
    let np = r_aug.ncols() - 1;
    let rows = r_aug.nrows().min(np);
    let mut r = DMatrix::<Complex64>::zeros(np, np);
    let mut z = vec![Complex64::new(0.0, 0.0); np];
    for i in 0..rows {
        for j in 0..np {
            r[(i, j)] = r_aug[(i, j)];
        }
        z[i] = r_aug[(i, np)];
    }
    let r_out = if r_aug.nrows() > np { r_aug[(np, np)].norm() } else { 0.0 };
    let scale: Vec<f64> = (0..np)
        .map(|j| {
            let c = r.column(j).norm();
            if c > 0.0 {
                c
            } else {
                1.0
            }
        })
        .collect();
    let extra = if reg > 0.0 { np } else { 0 };
    let mut a = DMatrix::<Complex64>::zeros(np + extra, np);
    for j in 0..np {
        for i in 0..np {
            a[(i, j)] = r[(i, j)] / scale[j];
        }
        if reg > 0.0 {
            a[(np + j, j)] = Complex64::new(reg.sqrt() / scale[j], 0.0);
        }
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); np + extra];
    rhs[..np].copy_from_slice(&z);
    let svd = a.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let s = svd.singular_values;
    let smax = s.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(smax > 0.0) || !smax.is_finite() {
        return None;
    }
    let mut xs = vec![Complex64::new(0.0, 0.0); np];
    let mut rank = 0;
    for k in 0..s.len() {
        if s[k] < rcond * smax {
            continue;
        }
        rank += 1;
        let c: Complex64 = (0..rhs.len()).map(|i| u[(i, k)].conj() * rhs[i]).sum::<Complex64>() / s[k];
        for (j, x) in xs.iter_mut().enumerate() {
            *x += vt[(k, j)].conj() * c;
        }
    }
    let x: Vec<Complex64> = xs.iter().zip(&scale).map(|(v, c)| v / c).collect();
    let fit = (0..np)
        .map(|i| ((0..np).map(|j| r[(i, j)] * x[j]).sum::<Complex64>() - z[i]).norm_sqr())
        .sum::<f64>();
    let residual = (fit + r_out * r_out).sqrt();
    Some(LsqSolution {
        x,
        residual,
        best_residual: if reg > 0.0 { residual } else { r_out },
        singular_values: s.iter().copied().collect(),
        rank,
    })
}
