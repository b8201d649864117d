//! Coarse search for two radial potentials that differ by at least a given
//! amount in sup norm while their phase shifts nearly coincide.
//!
//! The reference is a ball `q1 = c0` on `r < R`. The candidate is a two-shell
//! profile `q2 = v1` on `r < r1`, `v2` on `r1 <= r < R`. For each `(R, r1, v1)`
//! on the grid, `v2` is fixed by matching `delta_0` through bisection, and the
//! candidate is scored by `max_l |delta_l(q1) - delta_l(q2)|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{InversionError, Result};
use crate::forward::{solve_radial, Potential, RadialProfile};

/// Search grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSearch {
    pub c0: f64,
    pub radii: Vec<f64>,
    /// Candidate inner radii as fractions of the outer radius.
    pub inner_fractions: Vec<f64>,
    /// Candidate offsets `v1 - c0`.
    pub offsets: Vec<f64>,
    /// Bracket for `v2`.
    pub v2_bracket: (f64, f64),
    /// Required `sup |q1 - q2|`.
    pub min_sup_diff: f64,
    /// Highest partial wave compared.
    pub l: usize,
}

impl Default for ShellSearch {
    fn default() -> Self {
        Self {
            c0: 1.0,
            radii: vec![0.5, 0.75, 1.0],
            inner_fractions: (4..=16).map(|k| k as f64 / 20.0).collect(),
            offsets: vec![-2.0, -1.0, 1.0, 2.0],
            v2_bracket: (-20.0, 20.0),
            min_sup_diff: 1.0,
            l: 12,
        }
    }
}

/// Best pair found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndistinguishablePair {
    pub q1: RadialProfile,
    pub q2: RadialProfile,
    pub sup_diff: f64,
    /// `max_l |delta_l(q1) - delta_l(q2)|` over `l <= L`.
    pub phase_diff: f64,
    /// `max(|delta_L(q1)|, |delta_L(q2)|)`, bounding the unchecked tail.
    pub tail: f64,
    pub candidates: usize,
}

fn deltas(profile: &RadialProfile, l: usize) -> Result<Vec<f64>> {
    Ok(solve_radial(&Potential::radial(profile.clone())?, l)?.delta)
}

fn two_shell(r1: f64, r: f64, v1: f64, v2: f64) -> RadialProfile {
    RadialProfile::Shells {
        radii: vec![r1, r],
        values: vec![v1, v2],
    }
}

/// Runs the grid search; candidates whose `delta_0` cannot be matched inside
/// the bracket are dropped.
pub fn indistinguishable_pair(search: &ShellSearch) -> Result<IndistinguishablePair> {
    let (lo0, hi0) = search.v2_bracket;
    if !(lo0 < hi0) || search.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(InversionError::InvalidArgument("search needs positive radii and an ordered bracket".into()));
    }
    if search.inner_fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(InversionError::InvalidArgument("inner fractions must lie in (0, 1)".into()));
    }
    let grid: Vec<(f64, f64, f64)> = search
        .radii
        .iter()
        .flat_map(|&r| {
            search
                .inner_fractions
                .iter()
                .flat_map(move |&f| search.offsets.iter().map(move |&o| (r, f * r, o)))
        })
        .collect();
    let scored: Vec<Option<(IndistinguishablePair, f64)>> = grid
        .par_iter()
        .map(|&(r, r1, off)| -> Result<Option<(IndistinguishablePair, f64)>> {
            let q1 = RadialProfile::Ball { q0: search.c0, radius: r };
            let d1 = deltas(&q1, search.l)?;
            let v1 = search.c0 + off;
            let mismatch = |v2: f64| -> Result<f64> { Ok(deltas(&two_shell(r1, r, v1, v2), 0)?[0] - d1[0]) };
            let (mut lo, mut hi) = (lo0, hi0);
            let (mut flo, fhi) = (mismatch(lo)?, mismatch(hi)?);
            if flo * fhi > 0.0 {
                return Ok(None);
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = mismatch(mid)?;
                if flo * fm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            let v2 = 0.5 * (lo + hi);
            let sup_diff = off.abs().max((v2 - search.c0).abs());
            if sup_diff < search.min_sup_diff {
                return Ok(None);
            }
            let q2 = two_shell(r1, r, v1, v2);
            let d2 = deltas(&q2, search.l)?;
            let phase_diff = d1.iter().zip(&d2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let tail = d1[search.l].abs().max(d2[search.l].abs());
            Ok(Some((
                IndistinguishablePair {
                    q1,
                    q2,
                    sup_diff,
                    phase_diff,
                    tail,
                    candidates: 0,
                },
                phase_diff,
            )))
        })
        .collect::<Result<_>>()?;
    let candidates = scored.iter().filter(|s| s.is_some()).count();
    let (mut best, _) = scored
        .into_iter()
        .flatten()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| InversionError::InvalidArgument("no admissible candidate on the search grid".into()))?;
    best.candidates = candidates;
    log::info!(
        "indistinguishable pair: {candidates} candidates, phase difference {:.3e}, sup difference {:.3}",
        best.phase_diff,
        best.sup_diff
    );
    Ok(best)
}
