use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{input, Result};
use crate::model::{posterior, sample_from_pmf, ChannelDensity, HypothesisModel, PosteriorVector, Prior};

/// One joint draw `(θ, x)` and its posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRecord {
    pub truth: usize,
    pub output: Vec<f64>,
    pub posterior: PosteriorVector,
}

/// Anything that can produce joint `(θ, x)` draws.
pub trait JointSampler: Sync {
    fn prior(&self) -> &Prior;

    /// Produce draw number `index` using the randomness in `rng`, which is private to this draw.
    fn draw(&self, index: u64, rng: &mut ChaCha8Rng) -> Result<DrawRecord>;
}

impl<C: ChannelDensity> JointSampler for HypothesisModel<C> {
    fn prior(&self) -> &Prior {
        HypothesisModel::prior(self)
    }

    fn draw(&self, _index: u64, rng: &mut ChaCha8Rng) -> Result<DrawRecord> {
        let truth = HypothesisModel::prior(self).sample_index(rng);
        let output = self.channel().sample(truth, rng)?;
        let posterior = posterior(HypothesisModel::prior(self), self.channel(), &output)?;
        Ok(DrawRecord { truth, output, posterior })
    }
}

/// Replays a fixed list of posteriors, cycling through it draw by draw.
///
/// The implied prior is the average of the replayed posteriors, and each draw's true
/// hypothesis is sampled from its posterior, so the joint law is self-consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorReplay {
    posteriors: Vec<PosteriorVector>,
    prior: Prior,
}

impl PosteriorReplay {
    pub fn new(pmfs: &[Vec<f64>]) -> Result<Self> {
        if pmfs.is_empty() {
            return Err(input("posterior replay needs at least one posterior"));
        }
        let m = pmfs[0].len();
        if pmfs.iter().any(|p| p.len() != m) {
            return Err(input("replayed posteriors must all have the same length"));
        }
        let posteriors = pmfs
            .iter()
            .map(|p| PosteriorVector::from_probabilities(p))
            .collect::<Result<Vec<_>>>()?;
        let mut avg = vec![0.0; m];
        for p in &posteriors {
            for (a, v) in avg.iter_mut().zip(p.values()) {
                *a += v;
            }
        }
        let total: f64 = avg.iter().sum();
        let prior = Prior::new(avg.iter().map(|a| a / total).collect())
            .or_else(|_| {
                // renormalize once more when the average is off by rounding
                let s: f64 = avg.iter().map(|a| a / total).sum();
                Prior::new(avg.iter().map(|a| a / total / s).collect())
            })?;
        Ok(Self { posteriors, prior })
    }

    pub fn posteriors(&self) -> &[PosteriorVector] {
        &self.posteriors
    }
}

impl JointSampler for PosteriorReplay {
    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn draw(&self, index: u64, rng: &mut ChaCha8Rng) -> Result<DrawRecord> {
        let post = &self.posteriors[(index % self.posteriors.len() as u64) as usize];
        let truth = sample_from_pmf(post.values(), rng);
        Ok(DrawRecord { truth, output: Vec::new(), posterior: post.clone() })
    }
}

/// A seeded batch of joint draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    prior: Prior,
    seed: u64,
    records: Vec<DrawRecord>,
}

impl SampleBatch {
    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[DrawRecord] {
        &self.records
    }

    pub fn num_hypotheses(&self) -> usize {
        self.prior.len()
    }

    pub fn posteriors(&self) -> impl Iterator<Item = &PosteriorVector> + '_ {
        self.records.iter().map(|r| &r.posterior)
    }

    /// Apply `f` to every posterior in parallel, preserving draw order.
    pub fn map_posteriors<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&PosteriorVector) -> T + Sync + Send,
    {
        self.records.par_iter().map(|r| f(&r.posterior)).collect()
    }
}

/// Draw `count` joint samples.
///
/// The randomness for draw `i` depends only on `(seed, i)`, so the batch is identical for any
/// number of worker threads.
pub fn sample_joint<S: JointSampler + ?Sized>(sampler: &S, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(input("sample count must be at least 1"));
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = base.clone();
            rng.set_stream(i);
            sampler.draw(i, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch { prior: sampler.prior().clone(), seed, records })
}
