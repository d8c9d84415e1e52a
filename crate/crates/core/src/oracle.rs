//! Deterministic quadrature reference values for scalar Gaussian models.
//!
//! Every expectation is `∫ Σ_m p_m N(x; μ_m, σ²) f(posterior(x)) dx`, integrated with a composite
//! Gauss–Legendre rule over `[min μ − 12σ, max μ + 12σ]`. Panels are split at each crossing
//! `p_m N(x; μ_m) = p_m' N(x; μ_m')`, where the ordered posteriors have kinks, and are no wider
//! than `σ/4`. Posteriors are computed here directly from the parameters.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input, Result};
use crate::mc::{estimate_equivocation, estimate_ordered_stats, sample_joint, SampleBatch};
use crate::model::{GaussianChannel, HypothesisModel, Prior};
use crate::quadrature::GaussLegendre;
use crate::stats::McEstimate;

const HALF_WIDTH_SIGMAS: f64 = 12.0;
const PANEL_SIGMAS: f64 = 0.25;
const PANEL_NODES: usize = 24;

/// A model with scalar output `x | θ_m ~ N(μ_m, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGaussian {
    pub prior: Vec<f64>,
    pub means: Vec<f64>,
    pub variance: f64,
}

impl ScalarGaussian {
    pub fn new(prior: Vec<f64>, means: Vec<f64>, variance: f64) -> Result<Self> {
        if prior.len() != means.len() || prior.len() < 2 {
            return Err(input("prior and means must have the same length, at least 2"));
        }
        if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(input("prior must be a probability vector"));
        }
        if means.iter().any(|m| !m.is_finite()) || !(variance.is_finite() && variance > 0.0) {
            return Err(input("means must be finite and the variance positive"));
        }
        Ok(Self { prior, means, variance })
    }

    pub fn from_model(model: &HypothesisModel<GaussianChannel>) -> Result<Self> {
        let ch = model.channel();
        if ch.means().iter().any(|m| m.len() != 1) {
            return Err(input("the quadrature oracle needs a one-dimensional output"));
        }
        Self::new(model.prior().probs().to_vec(), ch.means().iter().map(|m| m[0]).collect(), ch.variance())
    }

    pub fn to_model(&self) -> Result<HypothesisModel> {
        let ch = GaussianChannel::new(self.means.iter().map(|&m| vec![m]).collect(), self.variance)?;
        HypothesisModel::with_prior(Prior::new(self.prior.clone())?, ch)
    }

    fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.prior.len()).filter(|&m| self.prior[m] > 0.0)
    }

    /// Panel edges: domain ends plus every pairwise crossing inside the domain.
    fn breakpoints(&self) -> Vec<f64> {
        let sigma = self.variance.sqrt();
        let lo = self.means.iter().copied().fold(f64::INFINITY, f64::min) - HALF_WIDTH_SIGMAS * sigma;
        let hi = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + HALF_WIDTH_SIGMAS * sigma;
        let mut pts = vec![lo, hi];
        let act: Vec<usize> = self.active().collect();
        for (i, &a) in act.iter().enumerate() {
            for &b in &act[i + 1..] {
                let (ma, mb) = (self.means[a], self.means[b]);
                if ma == mb {
                    continue;
                }
                let x = (ma * ma - mb * mb - 2.0 * self.variance * (self.prior[a] / self.prior[b]).ln())
                    / (2.0 * (ma - mb));
                if x > lo && x < hi {
                    pts.push(x);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut edges = vec![pts[0]];
        for w in pts.windows(2) {
            let pieces = ((w[1] - w[0]) / (PANEL_SIGMAS * sigma)).ceil().max(1.0) as usize;
            for j in 1..=pieces {
                edges.push(w[0] + (w[1] - w[0]) * j as f64 / pieces as f64);
            }
        }
        edges
    }

    /// Joint densities `p_m N(x; μ_m, σ²)` at `x`.
    fn joint(&self, x: f64) -> Vec<f64> {
        let norm = (2.0 * PI * self.variance).sqrt();
        self.prior
            .iter()
            .zip(&self.means)
            .map(|(p, mu)| p * (-(x - mu) * (x - mu) / (2.0 * self.variance)).exp() / norm)
            .collect()
    }

    /// `∫ P(x) f(posterior) dx` for each of several functionals at once.
    fn integrate<const K: usize>(&self, f: impl Fn(&[f64]) -> [f64; K]) -> [f64; K] {
        let rule = GaussLegendre::new(PANEL_NODES);
        let edges = self.breakpoints();
        let mut acc = [0.0; K];
        for w in edges.windows(2) {
            for (x, wt) in rule.mapped(w[0], w[1]) {
                let joint = self.joint(x);
                let evidence: f64 = joint.iter().sum();
                if evidence <= 0.0 || !evidence.is_finite() {
                    continue;
                }
                let post: Vec<f64> = joint.iter().map(|j| j / evidence).collect();
                for (a, v) in acc.iter_mut().zip(f(&post)) {
                    *a += wt * evidence * v;
                }
            }
        }
        acc
    }

    /// Total number of quadrature nodes used.
    pub fn node_count(&self) -> usize {
        (self.breakpoints().len() - 1) * PANEL_NODES
    }

    pub fn evaluate(&self) -> OracleValues {
        let [mass, ee, p1, p2, sum_sq] = self.integrate(|post| {
            let mut sorted = post.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let h: f64 = post.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
            [1.0, h, sorted[0], sorted[1], post.iter().map(|p| p * p).sum()]
        });
        let prior_entropy: f64 = self.prior.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
        OracleValues {
            mass,
            ee,
            mi: prior_entropy - ee,
            mpe: 1.0 - p1,
            p_star: p1,
            p_star2: p2,
            sum_sq,
        }
    }
}

/// Reference expectations in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValues {
    /// `∫ P(x) dx`, which should be 1 to within the truncation error.
    pub mass: f64,
    pub ee: f64,
    pub mi: f64,
    pub mpe: f64,
    pub p_star: f64,
    pub p_star2: f64,
    pub sum_sq: f64,
}

/// Random scalar Gaussian models with `2 ≤ M ≤ 8`; even indices get a uniform prior, odd
/// indices a random one bounded away from zero.
pub fn random_fleet(count: usize, seed: u64) -> Vec<ScalarGaussian> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let m = rng.random_range(2..=8usize);
            let prior = if i % 2 == 0 {
                vec![1.0 / m as f64; m]
            } else {
                let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|r| r / total).collect()
            };
            let means = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let variance = rng.random_range(0.1..2.0);
            ScalarGaussian::new(prior, means, variance).expect("generated models are valid")
        })
        .collect()
}

/// One Monte Carlo estimate next to its reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: &'static str,
    pub estimate: McEstimate,
    pub reference: f64,
}

impl OracleCheck {
    /// Deviation in standard errors; `0` for exact agreement of a zero-variance estimate.
    pub fn z_score(&self) -> f64 {
        let dev = (self.estimate.mean - self.reference).abs();
        if dev <= 1e-12 {
            0.0
        } else {
            dev / self.estimate.std_error
        }
    }

    pub fn agrees(&self, k: f64) -> bool {
        self.estimate.agrees_with(self.reference, k)
    }
}

/// Compare Monte Carlo estimates of EE, MI, MPE, `E[p*]`, `E[p**]` and `E[Σp²]` with the oracle.
pub fn compare_with_oracle(model: &ScalarGaussian, samples: usize, seed: u64) -> Result<Vec<OracleCheck>> {
    let batch = sample_joint(&model.to_model()?, samples, seed)?;
    compare_batch_with_oracle(model, &batch)
}

/// As [`compare_with_oracle`] on a batch already drawn from `model`.
pub fn compare_batch_with_oracle(model: &ScalarGaussian, batch: &SampleBatch) -> Result<Vec<OracleCheck>> {
    let reference = model.evaluate();
    let ee = estimate_equivocation(batch);
    let stats = estimate_ordered_stats(batch, 1)?;
    let h = batch.prior().entropy();
    let check = |name, estimate, reference| OracleCheck { name, estimate, reference };
    Ok(vec![
        check("EE", ee, reference.ee),
        check("MI", ee.affine(h, -1.0), reference.mi),
        check("MPE", stats.u.affine(1.0, -1.0), reference.mpe),
        check("E[p*]", stats.u, reference.p_star),
        check("E[p**]", stats.v, reference.p_star2),
        check("E[sum p^2]", stats.sum_sq, reference.sum_sq),
    ])
}
