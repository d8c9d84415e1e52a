//! Scalar entropy helpers. Everything is in nats; `0 · ln 0` is taken as 0.

use std::f64::consts::LN_2;

/// `-x ln x` with the continuity convention at zero.
#[inline]
pub fn neg_xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Binary entropy `H(p)` in nats.
pub fn binary_entropy(p: f64) -> f64 {
    neg_xlogx(p) + neg_xlogx(1.0 - p)
}

/// Ternary entropy `h(p, q)` of the PMF `{p, q, 1 - p - q}`.
pub fn ternary_entropy(p: f64, q: f64) -> f64 {
    neg_xlogx(p) + neg_xlogx(q) + neg_xlogx(1.0 - p - q)
}

/// Shannon entropy of a PMF given as probabilities.
pub fn shannon(values: &[f64]) -> f64 {
    values.iter().copied().map(neg_xlogx).sum()
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

/// Numerically stable `ln Σ exp(x_i)`. Returns `-∞` when every term is `-∞`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}
