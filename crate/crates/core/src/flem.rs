//! Ring of single-pixel multispectral imagers localizing and spectrally typing a point flash.
//!
//! Hypothesis `(d, k)` (index `d·K + k`) is a flash from direction `φ_d` with spectral
//! signature `k`. Imager `s` at angle `α_s` sees in band `b` the mean
//! `bg_mean + s_peak · max(cos(α_s − φ_d), 0) · trace_k(b)` with `s_peak = psbr · bg_mean`,
//! plus white Gaussian noise of variance `read_noise_var + background variance`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::bounds::{assemble_report, Report, ReportConfig};
use crate::error::{input, Error, Result};
use crate::mc::sample_joint;
use crate::model::{GaussianChannel, HypothesisModel, HypothesisSet, Prior};

/// Angles of regularly spaced imagers on a ring.
#[derive(Debug, Clone, PartialEq)]
pub struct RingGeometry {
    angles: Vec<f64>,
}

impl RingGeometry {
    /// `imagers` angles `offset + 2πs/S`, wrapped into `[0, 2π)` and sorted.
    pub fn new(imagers: usize, offset: f64) -> Result<Self> {
        if imagers < 4 {
            return Err(input(format!("need at least 4 imagers, got {imagers}")));
        }
        if !offset.is_finite() {
            return Err(input("ring offset must be finite"));
        }
        let mut angles: Vec<f64> =
            (0..imagers).map(|s| (offset + TAU * s as f64 / imagers as f64).rem_euclid(TAU)).collect();
        angles.sort_by(f64::total_cmp);
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Obliquity factor `max(cos(α_s − φ), 0)`.
    pub fn obliquity(&self, imager: usize, direction: f64) -> f64 {
        (self.angles[imager] - direction).cos().max(0.0)
    }
}

/// Unit-sum spectral traces, one row per signature.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLibrary {
    traces: Vec<Vec<f64>>,
}

impl SpectralLibrary {
    pub fn new(traces: Vec<Vec<f64>>) -> Result<Self> {
        let bands = traces.first().map_or(0, Vec::len);
        if traces.is_empty() || bands == 0 {
            return Err(input("spectral library needs at least one non-empty trace"));
        }
        for (k, t) in traces.iter().enumerate() {
            if t.len() != bands {
                return Err(input(format!("trace {k} has {} bands, expected {bands}", t.len())));
            }
            if t.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(input(format!("trace {k} has a negative or non-finite weight")));
            }
            if (t.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(input(format!("trace {k} does not sum to 1")));
            }
            if traces[..k].contains(t) {
                return Err(input(format!("trace {k} duplicates an earlier trace")));
            }
        }
        Ok(Self { traces })
    }

    /// Half flat, half a distinct shape: one-hot bands, rising and falling ramps, then
    /// symmetric band pairs `e_i + e_{B+1−i}`.
    pub fn standard(signatures: usize, bands: usize) -> Result<Self> {
        if bands < 2 {
            return Err(input(format!("need at least 2 bands, got {bands}")));
        }
        let one_hot = |i: usize| (0..bands).map(|b| f64::from(u8::from(b == i))).collect::<Vec<_>>();
        let mut shapes: Vec<Vec<f64>> = (0..bands).map(one_hot).collect();
        shapes.push((1..=bands).map(|b| b as f64).collect());
        shapes.push((1..=bands).rev().map(|b| b as f64).collect());
        for i in 0..bands / 2 {
            let j = bands - 1 - i;
            if i + 1 != j || bands > 3 {
                shapes.push((0..bands).map(|b| f64::from(u8::from(b == i || b == j))).collect());
            }
        }
        if signatures == 0 || signatures > shapes.len() {
            return Err(input(format!(
                "{bands} bands support 1..={} standard signatures, got {signatures}",
                shapes.len()
            )));
        }
        let flat = 1.0 / bands as f64;
        let traces = shapes
            .into_iter()
            .take(signatures)
            .map(|shape| {
                let total: f64 = shape.iter().sum();
                let mut t: Vec<f64> = shape.iter().map(|x| 0.5 * flat + 0.5 * x / total).collect();
                let s: f64 = t.iter().sum();
                t.iter_mut().for_each(|x| *x /= s);
                t
            })
            .collect();
        Self::new(traces)
    }

    pub fn traces(&self) -> &[Vec<f64>] {
        &self.traces
    }

    pub fn signatures(&self) -> usize {
        self.traces.len()
    }

    pub fn bands(&self) -> usize {
        self.traces[0].len()
    }
}

/// How the background fluctuation fraction enters the noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundFluctuation {
    /// The fraction of the mean is a standard deviation: variance `(frac · bg_mean)²`.
    #[default]
    StdDev,
    /// The fraction of the mean is itself the variance: `frac · bg_mean`.
    Variance,
}

/// Model parameters. Missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlemConfig {
    pub psbr: f64,
    pub directions: usize,
    pub signatures: usize,
    pub bands: usize,
    pub imagers: usize,
    pub read_noise_var: f64,
    pub bg_mean: f64,
    pub bg_fluctuation_frac: f64,
    pub bg_fluctuation: BackgroundFluctuation,
    /// Common rotation of imagers and flash directions, radians.
    pub ring_offset: f64,
    /// Explicit prior over the `directions · signatures` hypotheses; uniform when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

impl Default for FlemConfig {
    fn default() -> Self {
        Self {
            psbr: 1.0,
            directions: 4,
            signatures: 8,
            bands: 4,
            imagers: 16,
            read_noise_var: 25.0,
            bg_mean: 10.0,
            bg_fluctuation_frac: 0.5,
            bg_fluctuation: BackgroundFluctuation::StdDev,
            ring_offset: 0.0,
            prior: None,
        }
    }
}

impl FlemConfig {
    pub fn num_hypotheses(&self) -> usize {
        self.directions * self.signatures
    }

    /// Total per-component noise variance.
    pub fn noise_variance(&self) -> f64 {
        let bg = match self.bg_fluctuation {
            BackgroundFluctuation::StdDev => (self.bg_fluctuation_frac * self.bg_mean).powi(2),
            BackgroundFluctuation::Variance => self.bg_fluctuation_frac * self.bg_mean,
        };
        self.read_noise_var + bg
    }

    /// Head-on band-summed signal `psbr · bg_mean`.
    pub fn peak_signal(&self) -> f64 {
        self.psbr * self.bg_mean
    }

    /// Flash directions `offset + π/16 + 2πd/D`, off the imager normals.
    pub fn direction_angles(&self) -> Vec<f64> {
        (0..self.directions)
            .map(|d| self.ring_offset + PI / 16.0 + TAU * d as f64 / self.directions as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let field = |key: &str, message: String| Err(Error::Config { key: format!("flem.{key}"), message });
        if !(self.psbr.is_finite() && self.psbr >= 0.0) {
            return field("psbr", format!("must be finite and >= 0, got {}", self.psbr));
        }
        if self.directions == 0 {
            return field("directions", "must be at least 1".into());
        }
        if self.num_hypotheses() < 2 {
            return field("signatures", "directions × signatures must be at least 2".into());
        }
        if self.imagers < 4 {
            return field("imagers", format!("must be at least 4, got {}", self.imagers));
        }
        if !(self.read_noise_var.is_finite() && self.read_noise_var >= 0.0) {
            return field("read_noise_var", format!("must be finite and >= 0, got {}", self.read_noise_var));
        }
        if !(self.bg_mean.is_finite() && self.bg_mean > 0.0) {
            return field("bg_mean", format!("must be finite and > 0, got {}", self.bg_mean));
        }
        if !(self.bg_fluctuation_frac.is_finite() && self.bg_fluctuation_frac >= 0.0) {
            return field("bg_fluctuation_frac", format!("must be finite and >= 0, got {}", self.bg_fluctuation_frac));
        }
        if !self.ring_offset.is_finite() {
            return field("ring_offset", "must be finite".into());
        }
        if !(self.noise_variance() > 0.0) {
            return field("read_noise_var", "total noise variance must be positive".into());
        }
        if let Some(p) = &self.prior {
            if p.len() != self.num_hypotheses() {
                return Err(input(format!(
                    "prior has {} entries but directions × signatures = {}",
                    p.len(),
                    self.num_hypotheses()
                )));
            }
        }
        Ok(())
    }
}

/// Gaussian hypothesis model for `config`; output dimension `imagers · bands`, imager-major.
pub fn build_model(config: &FlemConfig) -> Result<HypothesisModel> {
    config.validate()?;
    let ring = RingGeometry::new(config.imagers, config.ring_offset)?;
    let library = SpectralLibrary::standard(config.signatures, config.bands)?;
    let prior = match &config.prior {
        Some(p) => Prior::new(p.clone())?,
        None => Prior::uniform(config.num_hypotheses())?,
    };
    let peak = config.peak_signal();
    let dirs = config.direction_angles();
    let mut means = Vec::with_capacity(config.num_hypotheses());
    let mut labels = Vec::with_capacity(config.num_hypotheses());
    for (d, &phi) in dirs.iter().enumerate() {
        for (k, trace) in library.traces().iter().enumerate() {
            let mut mean = Vec::with_capacity(ring.len() * library.bands());
            for s in 0..ring.len() {
                let lit = peak * ring.obliquity(s, phi);
                mean.extend(trace.iter().map(|w| config.bg_mean + lit * w));
            }
            means.push(mean);
            labels.push(format!("d{d}-k{k}"));
        }
    }
    let channel = GaussianChannel::new(means, config.noise_variance())?;
    HypothesisModel::new(HypothesisSet::new(labels)?, prior, channel)
}

/// One report per PSBR value, all drawn with the same seed.
pub fn psbr_sweep(
    config: &FlemConfig,
    psbr_values: &[f64],
    samples: usize,
    seed: u64,
    report: &ReportConfig,
) -> Result<Vec<(f64, Report)>> {
    if psbr_values.is_empty() {
        return Err(input("PSBR list is empty"));
    }
    psbr_values
        .iter()
        .map(|&psbr| {
            let model = build_model(&FlemConfig { psbr, ..config.clone() })?;
            let batch = sample_joint(&model, samples, seed)?;
            Ok((psbr, assemble_report(&batch, report)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundName;
    use crate::entropy::nats_to_bits;
    use crate::model::ChannelDensity;
    use approx::assert_abs_diff_eq;

    #[test]
    fn defaults() {
        let c = FlemConfig::default();
        let model = build_model(&c).unwrap();
        assert_eq!(model.num_hypotheses(), 32);
        assert_eq!(model.channel().dim(), 64);
        assert_abs_diff_eq!(nats_to_bits(model.prior().entropy()), 5.0, epsilon = 1e-12);
        assert_eq!(c.noise_variance(), 50.0);
        let alt = FlemConfig { bg_fluctuation: BackgroundFluctuation::Variance, ..c };
        assert_eq!(alt.noise_variance(), 30.0);
    }

    #[test]
    fn library_rows() {
        let lib = SpectralLibrary::standard(8, 4).unwrap();
        assert_eq!(lib.signatures(), 8);
        for t in lib.traces() {
            assert!((t.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(t.iter().all(|x| *x > 0.0));
        }
        assert!(SpectralLibrary::standard(9, 4).is_err());
        assert!(SpectralLibrary::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn ring_angles() {
        let r = RingGeometry::new(16, 0.3).unwrap();
        assert!(r.angles().windows(2).all(|w| w[0] < w[1]));
        assert!(r.angles().iter().all(|a| (0.0..TAU).contains(a)));
        assert!(RingGeometry::new(3, 0.0).is_err());
    }

    #[test]
    fn band_sum_is_peak_signal_times_obliquity() {
        let c = FlemConfig { psbr: 2.5, ring_offset: 0.7, ..FlemConfig::default() };
        let model = build_model(&c).unwrap();
        let ring = RingGeometry::new(c.imagers, c.ring_offset).unwrap();
        for (d, &phi) in c.direction_angles().iter().enumerate() {
            for k in 0..c.signatures {
                let mean = &model.channel().means()[d * c.signatures + k];
                for s in 0..ring.len() {
                    let excess: f64 = mean[s * c.bands..(s + 1) * c.bands].iter().map(|x| x - c.bg_mean).sum();
                    assert_abs_diff_eq!(excess, c.peak_signal() * ring.obliquity(s, phi), epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_psbr_has_identical_means() {
        let model = build_model(&FlemConfig { psbr: 0.0, ..FlemConfig::default() }).unwrap();
        let first = &model.channel().means()[0];
        assert!(model.channel().means().iter().all(|m| m == first));
    }

    #[test]
    fn rejects_bad_prior_length() {
        let c = FlemConfig { prior: Some(vec![0.5, 0.5]), ..FlemConfig::default() };
        assert!(matches!(build_model(&c), Err(Error::Input(_))));
        let c = FlemConfig { psbr: -1.0, ..FlemConfig::default() };
        assert!(matches!(build_model(&c), Err(Error::Config { .. })));
    }

    #[test]
    fn sweep_shapes() {
        let r = ReportConfig::default();
        assert!(psbr_sweep(&FlemConfig::default(), &[], 10, 0, &r).is_err());
        let out = psbr_sweep(&FlemConfig::default(), &[0.0, 8.0], 2000, 4, &r).unwrap();
        assert_eq!(out.len(), 2);
        let mi0 = out[0].1.row(BoundName::Mi);
        assert!(mi0.value.abs() <= 1e-9);
        assert!(out[1].1.value(BoundName::Mi) > 3.0 * out[1].1.row(BoundName::Mi).std_error);
    }
}
