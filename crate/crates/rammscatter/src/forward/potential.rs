use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::sync::Arc;

use super::{ForwardError, Result};
use crate::specfun::gauss_legendre_interval;

/// Closed-form radial profiles `q(r)`, all vanishing for `r > radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `q0` on `r < radius`.
    Ball { q0: f64, radius: f64 },
    /// `values[i]` on `radii[i-1] <= r < radii[i]` (with `radii[-1] = 0`).
    Shells { radii: Vec<f64>, values: Vec<f64> },
    /// Smooth compactly supported bump `amplitude * exp(-r^2 / (radius^2 - r^2))`.
    GaussianBump { amplitude: f64, radius: f64 },
}

impl RadialProfile {
    pub fn radius(&self) -> f64 {
        match self {
            RadialProfile::Ball { radius, .. } => *radius,
            RadialProfile::Shells { radii, .. } => radii.last().copied().unwrap_or(0.0),
            RadialProfile::GaussianBump { radius, .. } => *radius,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Ball { q0, radius } => {
                if r < *radius {
                    *q0
                } else {
                    0.0
                }
            }
            RadialProfile::Shells { radii, values } => radii
                .iter()
                .position(|&b| r < b)
                .map(|i| values[i])
                .unwrap_or(0.0),
            RadialProfile::GaussianBump { amplitude, radius } => {
                if r < *radius {
                    amplitude * (-r * r / (radius * radius - r * r)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Radii where the profile may be discontinuous, ascending, ending at the support radius.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            RadialProfile::Shells { radii, .. } => radii.clone(),
            _ => vec![self.radius()],
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            RadialProfile::Ball { q0, .. } => q0.abs(),
            RadialProfile::Shells { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            RadialProfile::GaussianBump { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Fourier transform `4 pi int q(r) r^2 j_0(|xi| r) dr`, closed form for balls,
    /// Gauss-Legendre on each smooth piece otherwise.
    pub fn fourier(&self, xi_norm: f64) -> f64 {
        if let RadialProfile::Ball { q0, radius } = self {
            return ball_fourier(*q0, *radius, xi_norm);
        }
        let mut lo = 0.0;
        let mut total = 0.0;
        for hi in self.breakpoints() {
            let (rs, ws) = gauss_legendre_interval(48, lo, hi);
            total += rs
                .iter()
                .zip(&ws)
                .map(|(r, w)| {
                    let t = xi_norm * r;
                    let j0 = if t < 1e-8 { 1.0 } else { t.sin() / t };
                    w * self.eval(*r) * r * r * j0
                })
                .sum::<f64>();
            lo = hi;
        }
        4.0 * std::f64::consts::PI * total
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            RadialProfile::Ball { q0, radius } => q0.is_finite() && *radius > 0.0,
            RadialProfile::Shells { radii, values } => {
                !radii.is_empty()
                    && radii.len() == values.len()
                    && radii[0] > 0.0
                    && radii.windows(2).all(|w| w[1] > w[0])
                    && values.iter().all(|v| v.is_finite())
            }
            RadialProfile::GaussianBump { amplitude, radius } => amplitude.is_finite() && *radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ForwardError::InvalidArgument(format!("bad radial profile {self:?}")))
        }
    }
}

pub type PointSampler = Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>;

/// How the potential is represented.
#[derive(Clone)]
pub enum PotentialKind {
    Radial(RadialProfile),
    /// Voxel values on `[-a, a]^3`, `n` cells per edge, x-major.
    Grid { n: usize, values: Vec<f64> },
    Closure(PointSampler),
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Radial(p) => write!(f, "Radial({p:?})"),
            PotentialKind::Grid { n, .. } => write!(f, "Grid {{ n: {n} }}"),
            PotentialKind::Closure(_) => write!(f, "Closure"),
        }
    }
}

/// Real compactly supported potential, zero outside the ball of radius `a`.
#[derive(Debug, Clone)]
pub struct Potential {
    pub kind: PotentialKind,
    pub support_radius: f64,
    pub sup_norm: f64,
}

impl Potential {
    pub fn radial(profile: RadialProfile) -> Result<Self> {
        profile.validate()?;
        Ok(Self {
            support_radius: profile.radius(),
            sup_norm: profile.sup_norm(),
            kind: PotentialKind::Radial(profile),
        })
    }

    /// `q0` times the indicator of the ball of radius `radius`.
    pub fn ball(q0: f64, radius: f64) -> Result<Self> {
        Self::radial(RadialProfile::Ball { q0, radius })
    }

    pub fn zero(radius: f64) -> Self {
        Self {
            kind: PotentialKind::Radial(RadialProfile::Ball { q0: 0.0, radius }),
            support_radius: radius,
            sup_norm: 0.0,
        }
    }

    pub fn grid(n: usize, a: f64, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != n * n * n || !(a > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(ForwardError::InvalidArgument("grid potential dimensions".into()));
        }
        let sup_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self {
            kind: PotentialKind::Grid { n, values },
            support_radius: a,
            sup_norm,
        })
    }

    /// Potential given by a point sampler; `sup_norm` is estimated on a 24^3 lattice.
    pub fn closure(a: f64, f: PointSampler) -> Result<Self> {
        if !(a > 0.0) {
            return Err(ForwardError::InvalidArgument("support radius must be positive".into()));
        }
        let m = 24;
        let mut sup = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = [i, j, k].map(|t| -a + 2.0 * a * (t as f64 + 0.5) / m as f64);
                    if p.iter().map(|v| v * v).sum::<f64>() <= a * a {
                        sup = sup.max(f(p).abs());
                    }
                }
            }
        }
        Ok(Self {
            kind: PotentialKind::Closure(f),
            support_radius: a,
            sup_norm: sup,
        })
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.kind, PotentialKind::Radial(_))
    }

    pub fn profile(&self) -> Option<&RadialProfile> {
        match &self.kind {
            PotentialKind::Radial(p) => Some(p),
            _ => None,
        }
    }

    /// `q(x)`, masked to zero outside the support ball.
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let a = self.support_radius;
        if r2 > a * a {
            return 0.0;
        }
        match &self.kind {
            PotentialKind::Radial(p) => p.eval(r2.sqrt()),
            PotentialKind::Grid { n, values } => {
                let idx = |v: f64| (((v + a) / (2.0 * a) * *n as f64).floor() as isize).clamp(0, *n as isize - 1) as usize;
                values[(idx(x[0]) * n + idx(x[1])) * n + idx(x[2])]
            }
            PotentialKind::Closure(f) => f(x),
        }
    }

    /// Stable hex digest identifying the potential.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.support_radius.to_le_bytes());
        match &self.kind {
            PotentialKind::Radial(p) => h.update(serde_json::to_vec(p).unwrap_or_default()),
            PotentialKind::Grid { n, values } => {
                h.update((*n as u64).to_le_bytes());
                for v in values {
                    h.update(v.to_le_bytes());
                }
            }
            PotentialKind::Closure(f) => {
                let m = 8;
                for i in 0..m * m * m {
                    let p = [i / (m * m), (i / m) % m, i % m]
                        .map(|t| -self.support_radius + 2.0 * self.support_radius * (t as f64 + 0.5) / m as f64);
                    h.update(f(p).to_le_bytes());
                }
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Fourier transform `int e^{-i xi.x} q0 chi_{|x|<R} dx` of a ball.
pub fn ball_fourier(q0: f64, radius: f64, xi_norm: f64) -> f64 {
    let t = xi_norm * radius;
    if t < 1e-4 {
        return q0 * 4.0 * std::f64::consts::PI * radius.powi(3) / 3.0 * (1.0 - t * t / 10.0);
    }
    q0 * 4.0 * std::f64::consts::PI * radius.powi(3) * (t.sin() - t * t.cos()) / t.powi(3)
}
