//! Equivocation lower bounds from the two largest posteriors `(p*, p**)`.
//!
//! `φ(u, v)` is the minimum entropy of an `M`-cell PMF whose largest entry is `u` and second
//! largest is `v`: `n` cells at `v` plus one remainder cell, giving `h(u, n v) + n v ln n` with
//! `n = ⌊(1 − u)/v⌋`. `Φ` is its piecewise-linear convex minorant over the allowed triangle
//! `OAB = {0 ≤ v ≤ min(u, 1 − u)}`, built as a fan of triangles from `A = (1, 0)` over the
//! diagonal points `(1/(k+1), 1/(k+1))`, `k = 1..M−1`.

use crate::bounds::{Flagged, Flags, ADMISSIBLE_TOL};
use crate::entropy::ternary_entropy;
use crate::error::{input, Result};
use crate::mc::SampleBatch;
use crate::stats::McEstimate;

/// Fraction of projected draws above which [`fm_two_bound`] is flagged.
pub const PROJECTED_DRAW_FRACTION: f64 = 1e-4;

/// Movements smaller than this are treated as rounding and not flagged.
const ROUNDING_SLACK: f64 = 1e-12;

/// Branch `n` of `φ`: `h(u, n v) + n v ln n`.
pub fn phi_branch(u: f64, v: f64, n: usize) -> f64 {
    let nv = n as f64 * v;
    ternary_entropy(u, nv) + nv * (n as f64).ln()
}

/// Branch index selected for a feasible `(u, v)`.
pub fn phi_branch_index(u: f64, v: f64, m: usize) -> usize {
    if v <= 0.0 {
        return m - 1;
    }
    (((1.0 - u) / v).floor() as usize).clamp(1, m - 1)
}

fn check_oab(u: f64, v: f64) -> Result<()> {
    if u.is_nan() || v.is_nan() {
        return Err(input("(u, v) must not be NaN"));
    }
    let t = ADMISSIBLE_TOL;
    if u < -t || u > 1.0 + t || v < -t || v > u + t || v > 1.0 - u + t {
        return Err(input(format!("(u, v) = ({u}, {v}) lies outside the allowed triangle")));
    }
    Ok(())
}

fn clamp_oab(u: f64, v: f64) -> (f64, f64) {
    let u = u.clamp(0.0, 1.0);
    (u, v.clamp(0.0, u.min(1.0 - u)))
}

/// Nearest point of the set reachable by an `M`-cell PMF:
/// `u ≥ 1/M`, `(1 − u)/(M − 1) ≤ v ≤ min(u, 1 − u)`.
fn project_feasible(u: f64, v: f64, m: usize) -> (f64, f64) {
    let (mut u, mut v) = clamp_oab(u, v);
    let floor_u = 1.0 / m as f64;
    if u < floor_u {
        u = floor_u;
    }
    let v_min = (1.0 - u) / (m - 1) as f64;
    let v_max = u.min(1.0 - u);
    v = v.clamp(v_min.min(v_max), v_max);
    (u, v)
}

fn phi_projected(u: f64, v: f64, m: usize) -> Flagged<f64> {
    let (pu, pv) = project_feasible(u, v, m);
    let mut flags = Flags::empty();
    if (pu - u).abs() > ROUNDING_SLACK || (pv - v).abs() > ROUNDING_SLACK {
        flags |= Flags::PROJECTED;
    }
    let value = if pu >= 1.0 { 0.0 } else { phi_branch(pu, pv, phi_branch_index(pu, pv, m)) };
    Flagged { value, flags }
}

/// Two-posterior lower bound `φ(u, v)` on the conditional entropy at one output.
///
/// Points inside the allowed triangle but unreachable with `M` cells (too small a `v`) are
/// projected to the nearest reachable point and flagged; at `v → 0` this yields
/// `−u ln u − (1−u) ln((1−u)/(M−1))`.
pub fn phi_two(u: f64, v: f64, m: usize) -> Result<Flagged<f64>> {
    if m < 2 {
        return Err(input(format!("need at least 2 hypotheses, got {m}")));
    }
    check_oab(u, v)?;
    Ok(phi_projected(u, v, m))
}

/// One triangle of the fan triangulation of the allowed region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiRegion {
    /// `n ≥ 1`; the last index is the closure triangle through `O = (0, 0)`.
    pub index: usize,
    pub vertices: [(f64, f64); 3],
    pub values: [f64; 3],
}

/// Value of `φ` at the diagonal vertex `(1/(k+1), 1/(k+1))`: `h(1/(k+1), k/(k+1)) + k/(k+1) ln k = ln(k+1)`.
pub fn diagonal_vertex_value(k: usize) -> f64 {
    let kf = k as f64;
    ternary_entropy(1.0 / (kf + 1.0), kf / (kf + 1.0)) + kf / (kf + 1.0) * kf.ln()
}

/// `Φ` at `O`, continuing the last diagonal segment linearly down to the origin.
fn origin_value(m: usize) -> f64 {
    let mf = m as f64;
    mf.ln() + (mf - 1.0) * (mf / (mf - 1.0)).ln()
}

/// Triangles `A, D_k, D_{k+1}` for `k = 1..M−2`, then the closure `A, D_{M−1}, O`.
pub fn phi_regions(m: usize) -> Vec<PhiRegion> {
    let a = (1.0, 0.0);
    let diag = |k: usize| {
        let t = 1.0 / (k as f64 + 1.0);
        (t, t)
    };
    let mut regions: Vec<PhiRegion> = (1..m.saturating_sub(1))
        .map(|k| PhiRegion {
            index: k,
            vertices: [a, diag(k), diag(k + 1)],
            values: [0.0, diagonal_vertex_value(k), diagonal_vertex_value(k + 1)],
        })
        .collect();
    regions.push(PhiRegion {
        index: m - 1,
        vertices: [a, diag(m - 1), (0.0, 0.0)],
        values: [0.0, diagonal_vertex_value(m - 1), origin_value(m)],
    });
    regions
}

fn barycentric(p: (f64, f64), tri: &[(f64, f64); 3]) -> [f64; 3] {
    let [(x1, y1), (x2, y2), (x3, y3)] = *tri;
    let det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
    let l1 = ((y2 - y3) * (p.0 - x3) + (x3 - x2) * (p.1 - y3)) / det;
    let l2 = ((y3 - y1) * (p.0 - x3) + (x1 - x3) * (p.1 - y3)) / det;
    [l1, l2, 1.0 - l1 - l2]
}

/// Convex piecewise-linear minorant `Φ(u, v)` by barycentric interpolation of vertex values.
pub fn convex_phi(u: f64, v: f64, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(input(format!("need at least 2 hypotheses, got {m}")));
    }
    check_oab(u, v)?;
    let (u, v) = clamp_oab(u, v);
    let reach = 1.0 - u + v;
    if reach <= 0.0 {
        return Ok(0.0);
    }
    // where the ray from A through (u, v) meets the diagonal
    let d = v / reach;
    let regions = phi_regions(m);
    let region = regions
        .iter()
        .find(|r| d >= r.vertices[2].0 - 1e-15)
        .unwrap_or_else(|| regions.last().expect("at least the closure triangle"));
    let w = barycentric((u, v), &region.vertices);
    Ok(w.iter().zip(&region.values).map(|(a, b)| a * b).sum())
}

/// Averaged two-posterior bound `E_X[φ(p*(X), p**(X))]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPosteriorBound {
    pub estimate: McEstimate,
    pub projected: usize,
    pub flagged: bool,
}

/// Per-draw `φ(p*, p**)` values and whether each draw needed projection.
pub fn fm_two_terms(batch: &SampleBatch) -> Vec<Flagged<f64>> {
    let m = batch.num_hypotheses();
    batch.map_posteriors(|p| phi_projected(p.ranked(0), p.ranked(1), m))
}

pub fn fm_two_bound(batch: &SampleBatch) -> TwoPosteriorBound {
    let terms = fm_two_terms(batch);
    let values: Vec<f64> = terms.iter().map(|t| t.value).collect();
    let projected = terms.iter().filter(|t| t.flags.contains(Flags::PROJECTED)).count();
    TwoPosteriorBound {
        estimate: McEstimate::from_samples(&values),
        projected,
        flagged: projected as f64 > PROJECTED_DRAW_FRACTION * terms.len() as f64,
    }
}
