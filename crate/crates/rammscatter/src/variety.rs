//! Complex directions on the quadric `theta . theta = 1` (bilinear product) and
//! pairs `(theta, theta')` with a prescribed real difference `xi = theta' - theta`.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarietyError {
    #[error("point is off the variety: |theta.theta - 1| = {0:e}")]
    OffVariety(f64),
    #[error("growth s = {s} too small for |xi| = {t}: need s^2 >= t^2/4 - 1")]
    GrowthTooSmall { s: f64, t: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, VarietyError>;

pub type CVec3 = [Complex64; 3];

/// Unconjugated dot product.
pub fn bilinear(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Hermitian norm of a complex 3-vector.
pub fn cnorm(a: &CVec3) -> f64 {
    (a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()).sqrt()
}

pub fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// A point of the variety together with `kappa = |Im theta|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexDirection {
    pub theta: CVec3,
    pub kappa: f64,
}

impl ComplexDirection {
    pub fn new(theta: CVec3) -> Result<Self> {
        let d = (bilinear(&theta, &theta) - 1.0).norm();
        let tol = 1e-12 * cnorm(&theta).powi(2).max(1.0);
        if !(d < tol) {
            return Err(VarietyError::OffVariety(d));
        }
        let kappa = (theta[0].im.powi(2) + theta[1].im.powi(2) + theta[2].im.powi(2)).sqrt();
        Ok(Self { theta, kappa })
    }

    pub fn from_real(v: &[f64; 3]) -> Result<Self> {
        Self::new([
            Complex64::new(v[0], 0.0),
            Complex64::new(v[1], 0.0),
            Complex64::new(v[2], 0.0),
        ])
    }

    /// Hermitian norm `|theta|`.
    pub fn norm(&self) -> f64 {
        cnorm(&self.theta)
    }
}

/// Two points of the variety with `theta' - theta = xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionPair {
    pub theta: ComplexDirection,
    pub theta_prime: ComplexDirection,
    pub xi: [f64; 3],
}

/// Householder reflection mapping `e3` to the unit vector `n`; identity when
/// `n` is already `e3`.
fn householder_to(n: &[f64; 3]) -> [[f64; 3]; 3] {
    let v = [-n[0], -n[1], 1.0 - n[2]];
    let vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            h[i][j] = if vv < 1e-28 { id } else { id - 2.0 * v[i] * v[j] / vv };
        }
    }
    h
}

fn apply(h: &[[f64; 3]; 3], z: &CVec3) -> CVec3 {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += z[j] * h[i][j];
        }
    }
    out
}

/// Builds `theta = -(t/2) e3 + zeta2 e2 + zeta1 e1`, `theta' = theta + t e3` with
/// `zeta1 = i s`, `zeta2 = sqrt(1 - t^2/4 + s^2)`, in a frame where `xi = t e3`,
/// then rotates back. `|theta|^2 = 1 + 2 s^2`.
pub fn make_pair(xi: [f64; 3], s: f64) -> Result<DirectionPair> {
    if !(s >= 0.0) || !xi.iter().all(|v| v.is_finite()) {
        return Err(VarietyError::Invalid(format!("xi = {xi:?}, s = {s}")));
    }
    let t = norm3(&xi);
    let z2sq = 1.0 - t * t / 4.0 + s * s;
    if z2sq < 0.0 {
        return Err(VarietyError::GrowthTooSmall { s, t });
    }
    let zeta1 = Complex64::new(0.0, s);
    let zeta2 = Complex64::new(z2sq.sqrt(), 0.0);
    let local = [zeta1, zeta2, Complex64::new(-t / 2.0, 0.0)];
    let local_p = [zeta1, zeta2, Complex64::new(t / 2.0, 0.0)];
    let h = if t > 0.0 {
        householder_to(&[xi[0] / t, xi[1] / t, xi[2] / t])
    } else {
        householder_to(&[0.0, 0.0, 1.0])
    };
    let mut theta = apply(&h, &local);
    let mut theta_p = apply(&h, &local_p);
    // Enforce theta' - theta = xi exactly in floating point.
    for k in 0..3 {
        let mid = (theta[k] + theta_p[k]) * 0.5;
        theta[k] = mid - xi[k] / 2.0;
        theta_p[k] = mid + xi[k] / 2.0;
    }
    Ok(DirectionPair {
        theta: ComplexDirection::new(theta)?,
        theta_prime: ComplexDirection::new(theta_p)?,
        xi,
    })
}

/// Growth parameter giving `|theta| = norm`.
pub fn growth_for_norm(norm: f64) -> f64 {
    ((norm * norm - 1.0) / 2.0).max(0.0).sqrt()
}

/// Geometric ladder of pairs, `|theta|` starting at `max(2, |xi|)` and growing
/// by `factor` per rung.
pub fn growth_ladder(xi: [f64; 3], n_steps: usize, start: f64, factor: f64) -> Result<Vec<DirectionPair>> {
    if n_steps < 2 {
        return Err(VarietyError::Invalid("ladder needs at least two rungs".into()));
    }
    (0..n_steps)
        .map(|k| make_pair(xi, growth_for_norm(start * factor.powi(k as i32))))
        .collect()
}

/// Default ladder: start `max(2, |xi|)`, factor 1.5.
pub fn growth_schedule(xi: [f64; 3], n_steps: usize) -> Result<Vec<DirectionPair>> {
    growth_ladder(xi, n_steps, norm3(&xi).max(2.0), 1.5)
}
