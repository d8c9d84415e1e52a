//! Hypothesis sets, priors, channel densities, and per-output posterior computations.
//!
//! All log quantities are natural logarithms. Posteriors are formed from log joint weights
//! `ln p_m + ln P(x|θ_m)` with a max shift, so extreme outputs never overflow or divide by zero.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::entropy::{log_sum_exp, neg_xlogx};
use crate::error::{input, Error, Result};

/// Tilt orders at or above this value are evaluated as the exact `n → ∞` limit.
pub const TILT_LIMIT_ORDER: f64 = 1e6;

const PRIOR_SUM_TOL: f64 = 1e-12;
const POSTERIOR_SUM_TOL: f64 = 1e-10;

/// The finite set of hypotheses `{θ_1, …, θ_M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    labels: Vec<String>,
}

impl HypothesisSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(input(format!("need at least 2 hypotheses, got {}", labels.len())));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(input(format!("duplicate hypothesis label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// Labels `h0, h1, …`.
    pub fn indexed(m: usize) -> Result<Self> {
        Self::new((0..m).map(|i| format!("h{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Prior PMF over the hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    probs: Vec<f64>,
}

impl Prior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(input("prior is empty"));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(input(format!("prior entry {bad} is not a finite non-negative number")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(input(format!("prior sums to {sum}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(input("prior is empty"));
        }
        Ok(Self { probs: vec![1.0 / m as f64; m] })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.probs.len() as f64;
        self.probs.iter().all(|p| (p - u).abs() <= PRIOR_SUM_TOL)
    }

    /// `H(Θ)` in nats, computed exactly.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().copied().map(neg_xlogx).sum()
    }

    /// Draw a hypothesis index by inverse-CDF lookup.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_from_pmf(&self.probs, rng)
    }
}

/// Inverse-CDF draw from a PMF.
pub fn sample_from_pmf<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap at the top of the CDF
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Conditional output density family `P(x|θ_m)`.
///
/// Implementations must return normalized log-densities; only [`GaussianChannel`] is checked
/// analytically; custom channels are trusted.
pub trait ChannelDensity: Send + Sync {
    fn num_hypotheses(&self) -> usize;

    /// Output dimension `N`.
    fn dim(&self) -> usize;

    /// `ln P(x|θ_m)` in nats.
    fn log_density(&self, m: usize, x: &[f64]) -> Result<f64>;

    /// Draw an output from `P(·|θ_m)`.
    fn sample(&self, m: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>>;
}

/// Isotropic Gaussian channel `X|θ_m ~ N(μ_m, σ² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel {
    means: Vec<Vec<f64>>,
    variance: f64,
    dim: usize,
    log_norm: f64,
}

impl GaussianChannel {
    pub fn new(means: Vec<Vec<f64>>, variance: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(input("gaussian channel needs at least one mean vector"));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(input(format!("variance must be positive and finite, got {variance}")));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(input("mean vectors must be non-empty"));
        }
        for (m, mu) in means.iter().enumerate() {
            if mu.len() != dim {
                return Err(input(format!(
                    "mean vector {m} has length {}, expected {dim}",
                    mu.len()
                )));
            }
            if mu.iter().any(|v| !v.is_finite()) {
                return Err(input(format!("mean vector {m} has a non-finite entry")));
            }
        }
        let log_norm = -0.5 * dim as f64 * (2.0 * PI * variance).ln();
        Ok(Self { means, variance, dim, log_norm })
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

impl ChannelDensity for GaussianChannel {
    fn num_hypotheses(&self) -> usize {
        self.means.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, m: usize, x: &[f64]) -> Result<f64> {
        let mu = self
            .means
            .get(m)
            .ok_or_else(|| input(format!("hypothesis index {m} out of range")))?;
        if x.len() != self.dim {
            return Err(input(format!("output has dimension {}, expected {}", x.len(), self.dim)));
        }
        let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(self.log_norm - sq / (2.0 * self.variance))
    }

    fn sample(&self, m: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mu = self
            .means
            .get(m)
            .ok_or_else(|| Error::Sampler(format!("hypothesis index {m} out of range")))?;
        let sd = self.variance.sqrt();
        Ok(mu
            .iter()
            .map(|&c| {
                let z: f64 = rng.sample(StandardNormal);
                c + sd * z
            })
            .collect())
    }
}

/// A prior together with the channel it drives.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisModel<C = GaussianChannel> {
    hypotheses: HypothesisSet,
    prior: Prior,
    channel: C,
}

impl<C: ChannelDensity> HypothesisModel<C> {
    pub fn new(hypotheses: HypothesisSet, prior: Prior, channel: C) -> Result<Self> {
        let m = hypotheses.len();
        if prior.len() != m || channel.num_hypotheses() != m {
            return Err(input(format!(
                "hypothesis count mismatch: labels {m}, prior {}, channel {}",
                prior.len(),
                channel.num_hypotheses()
            )));
        }
        Ok(Self { hypotheses, prior, channel })
    }

    /// Model with indexed labels.
    pub fn with_prior(prior: Prior, channel: C) -> Result<Self> {
        let hyps = HypothesisSet::indexed(prior.len())?;
        Self::new(hyps, prior, channel)
    }

    pub fn hypotheses(&self) -> &HypothesisSet {
        &self.hypotheses
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn channel(&self) -> &C {
        &self.channel
    }

    pub fn num_hypotheses(&self) -> usize {
        self.hypotheses.len()
    }
}

/// Normalized posterior PMF for one output, with its descending-order permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorVector {
    values: Vec<f64>,
    log_values: Vec<f64>,
    order: Vec<usize>,
    log_evidence: f64,
}

impl PosteriorVector {
    /// Normalize log joint weights `ln p_m + ln P(x|θ_m)`.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(input("empty log-weight vector"));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(input("log weights must be finite or -inf"));
        }
        let log_evidence = log_sum_exp(log_weights);
        if log_evidence == f64::NEG_INFINITY {
            return Err(Error::Degenerate("all log-weights are -inf".into()));
        }
        let log_values: Vec<f64> = log_weights.iter().map(|w| w - log_evidence).collect();
        Ok(Self::from_normalized_logs(log_values, log_evidence))
    }

    /// Wrap an explicit PMF (used for replayed posteriors).
    pub fn from_probabilities(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(input("posterior needs at least 2 entries"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(input("posterior entries must be finite and non-negative"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > POSTERIOR_SUM_TOL {
            return Err(input(format!("posterior sums to {sum}, expected 1")));
        }
        let log_values = values.iter().map(|v| v.ln()).collect();
        Ok(Self::from_normalized_logs(log_values, 0.0))
    }

    fn from_normalized_logs(log_values: Vec<f64>, log_evidence: f64) -> Self {
        let values: Vec<f64> = log_values.iter().map(|l| l.exp()).collect();
        let mut order: Vec<usize> = (0..values.len()).collect();
        // stable: equal entries keep ascending index
        order.sort_by(|&a, &b| log_values[b].total_cmp(&log_values[a]));
        Self { values, log_values, order, log_evidence }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `ln P(x)`; for a tilted posterior this is `ln Z_n` instead.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// The `rank`-th largest entry (0 = `p*`). Ranks past the end are 0.
    pub fn ranked(&self, rank: usize) -> f64 {
        self.order.get(rank).map_or(0.0, |&i| self.values[i])
    }

    pub fn max(&self) -> f64 {
        self.ranked(0)
    }

    pub fn log_max(&self) -> f64 {
        self.log_values[self.order[0]]
    }

    /// Shannon entropy of the PMF in nats.
    pub fn entropy(&self) -> f64 {
        // -Σ p ln p using the log values directly keeps tiny entries accurate
        self.values
            .iter()
            .zip(&self.log_values)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| -p * l)
            .sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|p| p * p).sum()
    }
}

/// `ln P(x|θ_m)` for any channel.
pub fn log_likelihood<C: ChannelDensity + ?Sized>(channel: &C, m: usize, x: &[f64]) -> Result<f64> {
    if m >= channel.num_hypotheses() {
        return Err(input(format!("hypothesis index {m} out of range")));
    }
    channel.log_density(m, x)
}

/// Log joint weights `ln p_m + ln P(x|θ_m)` for every hypothesis.
pub fn log_joint<C: ChannelDensity + ?Sized>(prior: &Prior, channel: &C, x: &[f64]) -> Result<Vec<f64>> {
    if prior.len() != channel.num_hypotheses() {
        return Err(input("prior length does not match channel"));
    }
    if x.len() != channel.dim() {
        return Err(input(format!("output has dimension {}, expected {}", x.len(), channel.dim())));
    }
    prior
        .probs()
        .iter()
        .enumerate()
        .map(|(m, &p)| {
            if p == 0.0 {
                Ok(f64::NEG_INFINITY)
            } else {
                Ok(p.ln() + channel.log_density(m, x)?)
            }
        })
        .collect()
}

/// Bayes posterior `p(θ_m|x)`.
pub fn posterior<C: ChannelDensity + ?Sized>(prior: &Prior, channel: &C, x: &[f64]) -> Result<PosteriorVector> {
    PosteriorVector::from_log_weights(&log_joint(prior, channel, x)?)
}

/// Tilted posterior `p_n(θ_m|x) = p^n(θ_m|x) / Z_n(x)`.
///
/// The ordering permutation is carried over from `post`. For `n ≥ TILT_LIMIT_ORDER` the
/// exact limit is returned: uniform over the entries tied at the maximum (one-hot when the
/// maximum is unique).
pub fn tilted_posterior(post: &PosteriorVector, n: f64) -> Result<PosteriorVector> {
    if n.is_nan() || n < 1.0 {
        return Err(input(format!("tilt order must be >= 1, got {n}")));
    }
    let lmax = post.log_max();
    let scaled: Vec<f64> = if n >= TILT_LIMIT_ORDER {
        post.log_values
            .iter()
            .map(|&l| if l == lmax { 0.0 } else { f64::NEG_INFINITY })
            .collect()
    } else {
        post.log_values.iter().map(|&l| n * (l - lmax)).collect()
    };
    let shift = log_sum_exp(&scaled);
    let log_values: Vec<f64> = scaled.iter().map(|s| s - shift).collect();
    let values = log_values.iter().map(|l| l.exp()).collect();
    let log_z = if n >= TILT_LIMIT_ORDER { f64::NEG_INFINITY } else { n * lmax + shift };
    Ok(PosteriorVector { values, log_values, order: post.order.clone(), log_evidence: log_z })
}

/// MAP decision `argmax_m p(θ_m|x)`, lowest index on ties.
pub fn map_decision(post: &PosteriorVector) -> usize {
    post.order[0]
}
