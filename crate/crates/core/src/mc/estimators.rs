use std::sync::OnceLock;

use crate::error::{input, Result};
use crate::mc::SampleBatch;
use crate::model::{tilted_posterior, PosteriorVector, Prior};
use crate::quadrature::GaussLegendre;
use crate::stats::McEstimate;

/// Log-ratios above this many nats are treated as overflow in the Δ integrand.
pub const DELTA_LOG_RATIO_LIMIT: f64 = 700.0;

/// Exclusion fraction above which the Δ integral is flagged unreliable.
pub const DELTA_UNRELIABLE_FRACTION: f64 = 1e-3;

/// Default ordered-statistics depth: `min(M − 1, 8)`.
pub fn default_depth(m: usize) -> usize {
    m.saturating_sub(1).clamp(1, 8)
}

/// Exact `H(Θ)` in nats.
pub fn prior_entropy(prior: &Prior) -> f64 {
    prior.entropy()
}

/// Expectations of the ordered posterior probabilities and the δ sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedStats {
    /// `E[p*] = 1 − MPE`.
    pub u: McEstimate,
    /// `E[p**]`.
    pub v: McEstimate,
    /// `E[p***]`.
    pub w: McEstimate,
    /// `δ_1 … δ_depth`.
    pub deltas: Vec<McEstimate>,
    /// `E[Σ_m p²(θ_m|X)]`.
    pub sum_sq: McEstimate,
    /// `E[ln max_m p(θ_m|X)]`.
    pub b_infinity: McEstimate,
    pub depth: usize,
}

/// MI estimate plus the fraction of prior entropy it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct MiEstimate {
    pub mi: McEstimate,
    /// `MI / H(Θ)`; `None` when `H(Θ) = 0`.
    pub fractional: Option<McEstimate>,
}

/// Δ-bound integral with its outlier bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaIntegral {
    pub estimate: McEstimate,
    pub excluded: usize,
    pub excluded_fraction: f64,
    pub unreliable: bool,
}

/// Conditional entropy of one posterior (the per-draw EE integrand).
pub fn draw_entropy(post: &PosteriorVector) -> f64 {
    post.entropy()
}

/// `δ_i` integrands for `i = 1..=depth`: tail mass after the top `i` times the gap to the next.
pub fn draw_deltas(post: &PosteriorVector, depth: usize) -> Vec<f64> {
    let m = post.len();
    let ranked: Vec<f64> = (0..m).map(|r| post.ranked(r)).collect();
    // tail[i] = Σ_{r ≥ i} ranked[r]
    let mut tail = vec![0.0; m + 1];
    for r in (0..m).rev() {
        tail[r] = tail[r + 1] + ranked[r];
    }
    (1..=depth)
        .map(|i| {
            if i >= m {
                0.0
            } else {
                tail[i] * (ranked[i - 1] - ranked[i])
            }
        })
        .collect()
}

/// Entropy of the order-`n` tilted posterior.
pub fn draw_gee(post: &PosteriorVector, n: f64) -> Result<f64> {
    Ok(tilted_posterior(post, n)?.entropy())
}

/// `Σ_m p_n(θ_m|x) ln p(θ_m|x)`; `n = ∞` (or any `n ≥ 1e6`) gives `ln max_m p`.
pub fn draw_bn(post: &PosteriorVector, n: f64) -> Result<f64> {
    let tilted = tilted_posterior(post, n)?;
    Ok(tilted
        .values()
        .iter()
        .zip(post.log_values())
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, l)| w * l)
        .sum())
}

/// `∫_1^∞ dn/n² H_n(Θ|X=x)` in closed form: `−ln max_m p(θ_m|x)`.
pub fn draw_gee_integral(post: &PosteriorVector) -> f64 {
    -post.log_max()
}

fn gee_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Entropy of `p^n / Z_n` at any finite `n`, without the large-order limit.
fn tilted_entropy_finite(log_p: &[f64], n: f64) -> f64 {
    let top = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = log_p.iter().map(|l| n * (l - top)).collect();
    let z: f64 = shifted.iter().map(|s| s.exp()).sum();
    let ln_z = z.ln();
    shifted
        .iter()
        .filter(|s| s.is_finite())
        .map(|s| {
            let lw = s - ln_z;
            -lw.exp() * lw
        })
        .sum()
}

/// Upper end of the `s = ln n` range; the neglected tail is below `ln M · e^{−45}`.
const GEE_LOG_ORDER_MAX: f64 = 45.0;

/// The same integral by adaptive quadrature over `s = ln n`: `∫_0^∞ e^{−s} H_{e^s} ds`.
///
/// The tilted entropy changes over an `O(1)` range of `s` around `−ln(ln p* − ln p_k)`, so those
/// points are used as panel edges.
pub fn draw_gee_integral_quadrature(post: &PosteriorVector) -> f64 {
    let log_p = post.log_values();
    let top = post.log_max();
    let mut edges: Vec<f64> = log_p
        .iter()
        .map(|l| -(top - l).ln())
        .filter(|s| *s > 0.0 && *s < GEE_LOG_ORDER_MAX)
        .collect();
    edges.extend([0.0, GEE_LOG_ORDER_MAX]);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
        .windows(2)
        .map(|w| {
            gee_rule().integrate_adaptive(w[0], w[1], 1e-14, |s| (-s).exp() * tilted_entropy_finite(log_p, s.exp()))
        })
        .sum()
}

/// Δ integrand at one output: `Σ_{m'} (p_{m'}²/p_m) P²(x|θ_{m'}) / P(x|θ_m) / P(x)` with `m` the
/// MAP index, evaluated from log joint weights. `None` when a log-ratio overflows.
pub fn draw_delta_term(post: &PosteriorVector) -> Option<f64> {
    delta_sum(post, true)
}

/// The cross terms `m' ≠ m` of [`draw_delta_term`] alone.
pub fn draw_delta_cross_term(post: &PosteriorVector) -> Option<f64> {
    delta_sum(post, false)
}

fn delta_sum(post: &PosteriorVector, include_map: bool) -> Option<f64> {
    let log_e = post.log_evidence();
    let joint = |k: usize| post.log_values()[k] + log_e;
    let map = post.order()[0];
    let lj_map = joint(map);
    let mut total = 0.0;
    for k in 0..post.len() {
        let lj = joint(k);
        if lj == f64::NEG_INFINITY || (k == map && !include_map) {
            continue;
        }
        let log_ratio = 2.0 * lj - lj_map - log_e;
        if !(log_ratio <= DELTA_LOG_RATIO_LIMIT) {
            return None;
        }
        total += log_ratio.exp();
    }
    Some(total)
}

fn estimate_per_draw<F>(batch: &SampleBatch, f: F) -> McEstimate
where
    F: Fn(&PosteriorVector) -> f64 + Sync + Send,
{
    McEstimate::from_samples(&batch.map_posteriors(f))
}

fn try_estimate_per_draw<F>(batch: &SampleBatch, f: F) -> Result<McEstimate>
where
    F: Fn(&PosteriorVector) -> Result<f64> + Sync + Send,
{
    let xs = batch.map_posteriors(f).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&xs))
}

/// `H(Θ|X)` in nats.
pub fn estimate_equivocation(batch: &SampleBatch) -> McEstimate {
    estimate_per_draw(batch, draw_entropy)
}

/// `I(Θ;X) = H(Θ) − H(Θ|X)`; the error bar is that of the equivocation.
pub fn estimate_mi(batch: &SampleBatch) -> MiEstimate {
    let h = prior_entropy(batch.prior());
    let mi = estimate_equivocation(batch).affine(h, -1.0);
    let fractional = (h > 0.0).then(|| McEstimate {
        mean: mi.mean / h,
        std_error: mi.std_error / h,
        count: mi.count,
    });
    MiEstimate { mi, fractional }
}

/// Minimum probability of error `1 − E[max_m p(θ_m|X)]`.
pub fn estimate_mpe(batch: &SampleBatch) -> McEstimate {
    estimate_per_draw(batch, |p| 1.0 - p.max())
}

pub fn estimate_ordered_stats(batch: &SampleBatch, depth: usize) -> Result<OrderedStats> {
    let m = batch.num_hypotheses();
    if depth == 0 || depth + 1 > m {
        return Err(input(format!("ordered-stats depth must be in 1..={}, got {depth}", m - 1)));
    }
    let column = |f: &(dyn Fn(&PosteriorVector) -> f64 + Sync)| estimate_per_draw(batch, f);
    let delta_rows = batch.map_posteriors(|p| draw_deltas(p, depth));
    let deltas = (0..depth)
        .map(|i| McEstimate::from_samples(&delta_rows.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect();
    Ok(OrderedStats {
        u: column(&|p| p.ranked(0)),
        v: column(&|p| p.ranked(1)),
        w: column(&|p| p.ranked(2)),
        deltas,
        sum_sq: column(&|p| p.sum_sq()),
        b_infinity: column(&|p| p.log_max()),
        depth,
    })
}

/// Generalized equivocation of order `n`.
pub fn estimate_gee(batch: &SampleBatch, n: f64) -> Result<McEstimate> {
    if n.is_nan() || n < 1.0 {
        return Err(input(format!("GEE order must be >= 1, got {n}")));
    }
    try_estimate_per_draw(batch, |p| draw_gee(p, n))
}

/// `E_x ∫_1^∞ dn/n² H_n(Θ|X=x)` via the closed form.
pub fn estimate_gee_integral(batch: &SampleBatch) -> McEstimate {
    estimate_per_draw(batch, draw_gee_integral)
}

/// The same expectation via adaptive quadrature per draw; kept as a cross-check.
pub fn estimate_gee_integral_quadrature(batch: &SampleBatch) -> McEstimate {
    estimate_per_draw(batch, draw_gee_integral_quadrature)
}

/// Δ-bound integral, importance-sampled against the evidence.
pub fn estimate_delta_integral(batch: &SampleBatch) -> DeltaIntegral {
    delta_estimate(batch.map_posteriors(draw_delta_term))
}

/// Cross-term part of the Δ integral, with the same exclusion rule.
pub fn estimate_delta_cross(batch: &SampleBatch) -> DeltaIntegral {
    delta_estimate(batch.map_posteriors(draw_delta_cross_term))
}

fn delta_estimate(terms: Vec<Option<f64>>) -> DeltaIntegral {
    let kept: Vec<f64> = terms.iter().filter_map(|t| *t).collect();
    let excluded = terms.len() - kept.len();
    let excluded_fraction = excluded as f64 / terms.len() as f64;
    DeltaIntegral {
        estimate: McEstimate::from_samples(&kept),
        excluded,
        excluded_fraction,
        unreliable: excluded_fraction > DELTA_UNRELIABLE_FRACTION,
    }
}

/// `B_n = E[Σ_m p_n(θ_m|X) ln p(θ_m|X)]`; pass `f64::INFINITY` for `B_∞`.
pub fn estimate_bn(batch: &SampleBatch, n: f64) -> Result<McEstimate> {
    if n.is_nan() || n < 1.0 {
        return Err(input(format!("B_n order must be >= 1, got {n}")));
    }
    try_estimate_per_draw(batch, |p| draw_bn(p, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{sample_joint, PosteriorReplay};
    use crate::model::{GaussianChannel, HypothesisModel};
    use approx::assert_abs_diff_eq;

    fn replay(p: &[f64], count: usize) -> SampleBatch {
        sample_joint(&PosteriorReplay::new(&[p.to_vec()]).unwrap(), count, 1).unwrap()
    }

    fn gaussian(means: &[f64], var: f64, prior: Prior, count: usize, seed: u64) -> SampleBatch {
        let ch = GaussianChannel::new(means.iter().map(|&m| vec![m]).collect(), var).unwrap();
        let model = HypothesisModel::with_prior(prior, ch).unwrap();
        sample_joint(&model, count, seed).unwrap()
    }

    #[test]
    fn prior_entropy_values() {
        assert_abs_diff_eq!(prior_entropy(&Prior::uniform(32).unwrap()), 32f64.ln(), epsilon = 1e-14);
        assert_eq!(prior_entropy(&Prior::new(vec![1.0, 0.0, 0.0]).unwrap()), 0.0);
        assert_abs_diff_eq!(prior_entropy(&Prior::uniform(2).unwrap()), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn ordered_stats_fixed_posterior() {
        let b = replay(&[0.5, 0.3, 0.2], 10);
        let s = estimate_ordered_stats(&b, 2).unwrap();
        assert_abs_diff_eq!(s.deltas[0].mean, 0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(s.deltas[1].mean, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(s.u.mean, 0.5);
        assert_abs_diff_eq!(s.w.mean, 0.2);
        assert!(estimate_ordered_stats(&b, 3).is_err());
        assert!(estimate_ordered_stats(&b, 0).is_err());
    }

    #[test]
    fn non_informative_channel_is_exact() {
        let b = gaussian(&[0.0; 4], 1.0, Prior::uniform(4).unwrap(), 500, 3);
        let ee = estimate_equivocation(&b);
        assert_abs_diff_eq!(ee.mean, 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(estimate_mpe(&b).mean, 0.75, epsilon = 1e-12);
        assert_eq!(estimate_mpe(&b).std_error, 0.0);
        let mi = estimate_mi(&b);
        assert!(mi.mi.agrees_with(0.0, 3.0));
        for n in [1.0, 2.0, 7.5, f64::INFINITY] {
            assert_abs_diff_eq!(estimate_gee(&b, n).unwrap().mean, 4f64.ln(), epsilon = 1e-12);
            assert_abs_diff_eq!(estimate_bn(&b, n).unwrap().mean, -(4f64.ln()), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(estimate_gee_integral(&b).mean, 4f64.ln(), epsilon = 1e-12);
        let s = estimate_ordered_stats(&b, 3).unwrap();
        assert!(s.deltas.iter().all(|d| d.mean.abs() < 1e-15));
    }

    #[test]
    fn deterministic_channel_limits() {
        let b = gaussian(&[0.0, 100.0, 200.0, 300.0], 1.0, Prior::uniform(4).unwrap(), 500, 4);
        assert!(estimate_equivocation(&b).mean < 1e-12);
        assert!(estimate_mpe(&b).mean < 1e-12);
        assert_abs_diff_eq!(estimate_mi(&b).mi.mean, 4f64.ln(), epsilon = 1e-10);
        for n in [1.0, 3.0] {
            assert!(estimate_gee(&b, n).unwrap().mean < 1e-12);
        }
        assert!(estimate_gee_integral(&b).mean < 1e-12);
        let s = estimate_ordered_stats(&b, 3).unwrap();
        assert!(s.deltas.iter().all(|d| d.mean < 1e-15));
        assert_abs_diff_eq!(estimate_delta_integral(&b).estimate.mean, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gee_order_one_is_equivocation() {
        let b = gaussian(&[0.0, 0.7, 1.9], 0.8, Prior::new(vec![0.5, 0.3, 0.2]).unwrap(), 2000, 5);
        let ee = estimate_equivocation(&b);
        assert_abs_diff_eq!(estimate_gee(&b, 1.0).unwrap().mean, ee.mean, epsilon = 1e-12);
        assert_abs_diff_eq!(estimate_bn(&b, 1.0).unwrap().mean, -ee.mean, epsilon = 1e-12);
        assert!(estimate_gee(&b, 0.9).is_err());
        assert!(estimate_bn(&b, 0.0).is_err());
    }

    #[test]
    fn bn_fixed_posterior_values() {
        let b = replay(&[0.8, 0.2], 4);
        let b2 = estimate_bn(&b, 2.0).unwrap().mean;
        let b1 = estimate_bn(&b, 1.0).unwrap().mean;
        let want2 = 16.0 / 17.0 * 0.8f64.ln() + 1.0 / 17.0 * 0.2f64.ln();
        assert_abs_diff_eq!(b2, want2, epsilon = 1e-14);
        assert_abs_diff_eq!(b2, -0.304_690_278, epsilon = 1e-9);
        assert_abs_diff_eq!(b1, -0.500_40, epsilon = 1e-5);
        assert!(b2 > b1);
    }

    #[test]
    fn gee_integral_closed_form_matches_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pmfs: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|r| r / s).collect()
            })
            .collect();
        let b = sample_joint(&PosteriorReplay::new(&pmfs).unwrap(), 200, 0).unwrap();
        let closed = estimate_gee_integral(&b).mean;
        let quad = estimate_gee_integral_quadrature(&b).mean;
        assert_abs_diff_eq!(closed, quad, epsilon = 1e-11);
        for p in b.posteriors() {
            assert_abs_diff_eq!((-draw_gee_integral_quadrature(p)).exp(), p.max(), epsilon = 1e-11);
        }
    }

    #[test]
    fn gee_integral_quadrature_near_ties() {
        for p in [vec![0.5, 0.5], vec![0.5 + 1e-9, 0.5 - 1e-9], vec![0.4, 0.4 - 1e-7, 0.2 + 1e-7], vec![1.0, 0.0]] {
            let post = PosteriorVector::from_probabilities(&p).unwrap();
            assert_abs_diff_eq!((-draw_gee_integral_quadrature(&post)).exp(), post.max(), epsilon = 1e-11);
        }
    }

    #[test]
    fn delta_integral_equal_means_is_one() {
        let b = gaussian(&[0.0, 0.0], 1.0, Prior::uniform(2).unwrap(), 300, 6);
        let d = estimate_delta_integral(&b);
        assert_abs_diff_eq!(d.estimate.mean, 1.0, epsilon = 1e-12);
        assert_eq!(d.excluded, 0);
        assert!(!d.unreliable);
    }

    #[test]
    fn delta_term_is_finite_for_extreme_evidence() {
        let q = PosteriorVector::from_log_weights(&[-2000.0, -2000.5, -2600.0]).unwrap();
        let t = draw_delta_term(&q).unwrap();
        assert_abs_diff_eq!(t, q.sum_sq() / q.max(), epsilon = 1e-12);
        let r = PosteriorVector::from_log_weights(&[900.0, 0.0]).unwrap();
        assert_abs_diff_eq!(draw_delta_term(&r).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn depth_default() {
        assert_eq!(default_depth(2), 1);
        assert_eq!(default_depth(32), 8);
        assert_eq!(default_depth(5), 4);
    }
}
