//! Evaluation of every bound on one batch, with batch-means error bars.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    cfm_phi_star, convex_phi, delta_ee_lower, fano1_ee_upper, fano2_ee_upper, fano_ee_upper,
    fm_ee_lower, fmbn_ee_lower, mpe_upper_bn, mpe_upper_fm, mpe_upper_integral, mpe_upper_lambda,
    phi_two, sum_sq_ee_lower, Flagged, Flags, PROJECTED_DRAW_FRACTION,
};
use crate::entropy::nats_to_bits;
use crate::error::{input, Error, Result};
use crate::mc::{
    default_depth, draw_bn, draw_deltas, draw_delta_term, draw_gee, draw_gee_integral,
    SampleBatch, DELTA_UNRELIABLE_FRACTION,
};
use crate::stats::{batch_means_se, block_ranges, McEstimate};

/// Row identifiers in canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundName {
    Ee,
    Mi,
    Mpe,
    Fmb,
    Cfmb,
    Fmb1,
    Fmb2,
    FmTwo,
    CfmTwo,
    Capacity,
    Delta,
    Fano,
    Fano1,
    Fano2,
    MpeFm,
    MpeLambda,
    MpeIntegral,
    MpeBn,
}

impl BoundName {
    pub const ALL: [BoundName; 18] = [
        BoundName::Ee,
        BoundName::Mi,
        BoundName::Mpe,
        BoundName::Fmb,
        BoundName::Cfmb,
        BoundName::Fmb1,
        BoundName::Fmb2,
        BoundName::FmTwo,
        BoundName::CfmTwo,
        BoundName::Capacity,
        BoundName::Delta,
        BoundName::Fano,
        BoundName::Fano1,
        BoundName::Fano2,
        BoundName::MpeFm,
        BoundName::MpeLambda,
        BoundName::MpeIntegral,
        BoundName::MpeBn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundName::Ee => "EE",
            BoundName::Mi => "MI",
            BoundName::Mpe => "MPE",
            BoundName::Fmb => "FMB",
            BoundName::Cfmb => "CFMB",
            BoundName::Fmb1 => "FMB1",
            BoundName::Fmb2 => "FMB2",
            BoundName::FmTwo => "FMp*p**",
            BoundName::CfmTwo => "CFMp*p**",
            BoundName::Capacity => "CapacityBound",
            BoundName::Delta => "DeltaBound",
            BoundName::Fano => "Fano",
            BoundName::Fano1 => "Fano1",
            BoundName::Fano2 => "Fano2",
            BoundName::MpeFm => "MPE-FM",
            BoundName::MpeLambda => "MPE-λ",
            BoundName::MpeIntegral => "MPE-Integral",
            BoundName::MpeBn => "MPE-Bn",
        }
    }

    pub fn kind(self) -> BoundKind {
        use BoundName::*;
        match self {
            Ee => BoundKind::Equivocation,
            Mi => BoundKind::MutualInformation,
            Mpe => BoundKind::ErrorProbability,
            Fmb | Cfmb | Fmb1 | Fmb2 | FmTwo | CfmTwo | Capacity | Delta => BoundKind::EeLower,
            Fano | Fano1 | Fano2 => BoundKind::EeUpper,
            MpeFm | MpeLambda | MpeIntegral | MpeBn => BoundKind::MpeUpper,
        }
    }
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| input(format!("unknown bound name {s:?}")))
    }
}

/// What a row estimates or bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    EeLower,
    EeUpper,
    MpeUpper,
    MiUpper,
    MiLower,
    Equivocation,
    MutualInformation,
    ErrorProbability,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::EeLower => "EE-lower",
            BoundKind::EeUpper => "EE-upper",
            BoundKind::MpeUpper => "MPE-upper",
            BoundKind::MiUpper => "MI-upper",
            BoundKind::MiLower => "MI-lower",
            BoundKind::Equivocation => "EE",
            BoundKind::MutualInformation => "MI",
            BoundKind::ErrorProbability => "MPE",
        }
    }

    /// Kind of `H(Θ) − value`: EE bounds become MI bounds of the opposite direction.
    pub fn mi_counterpart(self) -> Option<BoundKind> {
        match self {
            BoundKind::EeLower => Some(BoundKind::MiUpper),
            BoundKind::EeUpper => Some(BoundKind::MiLower),
            BoundKind::Equivocation => Some(BoundKind::MutualInformation),
            _ => None,
        }
    }

    /// Rows measured in information units rather than as probabilities.
    pub fn is_information(self) -> bool {
        !matches!(self, BoundKind::MpeUpper | BoundKind::ErrorProbability)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Information units for rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Bits,
    Nats,
}

impl Units {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Units::Bits => nats_to_bits(nats),
            Units::Nats => nats,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" => Ok(Units::Bits),
            "nats" => Ok(Units::Nats),
            _ => Err(input(format!("units must be bits or nats, got {s:?}"))),
        }
    }
}

/// One row of a report. Information values are stored in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: BoundName,
    pub kind: BoundKind,
    pub value: f64,
    pub std_error: f64,
    pub flags: Flags,
    /// Statistics the row was computed from, in nats or as probabilities.
    pub inputs: Vec<(&'static str, f64)>,
    /// The row recomputed on each batch-means block, for paired comparisons.
    pub block_values: Vec<f64>,
}

impl BoundReport {
    /// Value in the requested units; probabilities are returned unchanged.
    pub fn value_in(&self, units: Units) -> f64 {
        if self.kind.is_information() {
            units.from_nats(self.value)
        } else {
            self.value
        }
    }

    pub fn std_error_in(&self, units: Units) -> f64 {
        if self.kind.is_information() {
            units.from_nats(self.std_error)
        } else {
            self.std_error
        }
    }

    /// `H(Θ) − value` for EE rows, `value` for the MI row, with the matching kind.
    pub fn mi_value(&self, prior_entropy: f64) -> Option<(BoundKind, f64)> {
        match self.kind {
            BoundKind::MutualInformation => Some((self.kind, self.value)),
            k => k.mi_counterpart().map(|mk| (mk, prior_entropy - self.value)),
        }
    }

    /// Fractional MI rendering; `None` for probability rows or a zero-entropy prior.
    pub fn fmi(&self, prior_entropy: f64) -> Option<(f64, f64)> {
        if prior_entropy <= 0.0 {
            return None;
        }
        self.mi_value(prior_entropy).map(|(_, v)| (v / prior_entropy, self.std_error / prior_entropy))
    }

    pub fn failed(&self) -> bool {
        self.flags.contains(Flags::FAILED)
    }
}

/// Tunables for [`assemble_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    /// Number of δ terms computed (at least 2 are always computed); `None` uses `min(M − 1, 8)`.
    pub depth: Option<usize>,
    /// Order of the generalized equivocation in the MPE-λ bound.
    pub lambda: f64,
    /// Order of `B_n` in the MPE-Bn bound.
    pub bn_order: f64,
    /// Number of blocks for batch-means standard errors.
    pub blocks: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { depth: None, lambda: 2.0, bn_order: 2.0, blocks: 32 }
    }
}

/// All rows for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub num_hypotheses: usize,
    /// `H(Θ)` in nats.
    pub prior_entropy: f64,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<BoundReport>,
}

impl Report {
    pub fn row(&self, name: BoundName) -> &BoundReport {
        self.rows.iter().find(|r| r.name == name).expect("every report carries all rows")
    }

    pub fn value(&self, name: BoundName) -> f64 {
        self.row(name).value
    }

    /// `value(a) − value(b)` with its batch-means standard error from the paired block values.
    pub fn paired_difference(&self, a: BoundName, b: BoundName) -> (f64, f64) {
        let (ra, rb) = (self.row(a), self.row(b));
        let diffs: Vec<f64> = ra.block_values.iter().zip(&rb.block_values).map(|(x, y)| x - y).collect();
        (ra.value - rb.value, batch_means_se(&diffs))
    }
}

struct DrawColumns {
    ee: f64,
    ranked: [f64; 3],
    deltas: Vec<f64>,
    sum_sq: f64,
    gee_lambda: f64,
    gee_integral: f64,
    bn: f64,
    delta_term: Option<f64>,
    phi: Flagged<f64>,
}

/// Block (or whole-batch) averages of the per-draw columns.
#[derive(Debug, Clone)]
struct Summary {
    count: usize,
    ee: f64,
    ranked: [f64; 3],
    deltas: Vec<f64>,
    sum_sq: f64,
    gee_lambda: f64,
    gee_integral: f64,
    bn: f64,
    delta_integral: f64,
    delta_excluded: usize,
    phi: f64,
    phi_projected: usize,
}

fn summarize(cols: &[DrawColumns], depth: usize) -> Summary {
    let n = cols.len() as f64;
    let mean = |f: &dyn Fn(&DrawColumns) -> f64| cols.iter().map(f).sum::<f64>() / n;
    let kept: Vec<f64> = cols.iter().filter_map(|c| c.delta_term).collect();
    Summary {
        count: cols.len(),
        ee: mean(&|c| c.ee),
        ranked: [mean(&|c| c.ranked[0]), mean(&|c| c.ranked[1]), mean(&|c| c.ranked[2])],
        deltas: (0..depth).map(|i| mean(&|c| c.deltas[i])).collect(),
        sum_sq: mean(&|c| c.sum_sq),
        gee_lambda: mean(&|c| c.gee_lambda),
        gee_integral: mean(&|c| c.gee_integral),
        bn: mean(&|c| c.bn),
        delta_integral: if kept.is_empty() { f64::NAN } else { kept.iter().sum::<f64>() / kept.len() as f64 },
        delta_excluded: cols.len() - kept.len(),
        phi: mean(&|c| c.phi.value),
        phi_projected: cols.iter().filter(|c| c.phi.flags.contains(Flags::PROJECTED)).count(),
    }
}

fn plain(value: Result<f64>) -> Result<Flagged<f64>> {
    value.map(|value| Flagged { value, flags: Flags::empty() })
}

/// Bound rows computed from averaged statistics.
fn bound_value(name: BoundName, s: &Summary, m: usize, lambda: f64) -> Result<Flagged<f64>> {
    let pe = (1.0 - s.ranked[0]).max(0.0);
    match name {
        BoundName::Fmb => plain(fm_ee_lower(pe)),
        BoundName::Cfmb => cfm_phi_star(pe, m),
        BoundName::Fmb1 => plain(fmbn_ee_lower(pe, &s.deltas[..1])),
        BoundName::Fmb2 => plain(fmbn_ee_lower(pe, &s.deltas[..2])),
        BoundName::FmTwo => {
            let mut flags = Flags::empty();
            if s.phi_projected as f64 > PROJECTED_DRAW_FRACTION * s.count as f64 {
                flags |= Flags::PROJECTED;
            }
            Ok(Flagged { value: s.phi, flags })
        }
        BoundName::CfmTwo => plain(convex_phi(s.ranked[0], s.ranked[1], m)),
        BoundName::Capacity => plain(sum_sq_ee_lower(s.sum_sq)),
        BoundName::Delta => {
            let mut flags = Flags::empty();
            if s.delta_excluded as f64 > DELTA_UNRELIABLE_FRACTION * s.count as f64 {
                flags |= Flags::UNRELIABLE;
            }
            delta_ee_lower(pe, s.delta_integral).map(|value| Flagged { value, flags })
        }
        BoundName::Fano => plain(fano_ee_upper(pe, m)),
        BoundName::Fano1 => plain(fano1_ee_upper(pe, s.ranked[1], m)),
        BoundName::Fano2 => plain(fano2_ee_upper(pe, s.ranked[1], s.ranked[2], m)),
        BoundName::MpeFm => plain(mpe_upper_fm(s.ee)),
        BoundName::MpeLambda => plain(mpe_upper_lambda(s.ee, s.gee_lambda, lambda)),
        BoundName::MpeIntegral => plain(mpe_upper_integral(s.gee_integral)),
        BoundName::MpeBn => plain(mpe_upper_bn(s.bn)),
        BoundName::Ee | BoundName::Mi | BoundName::Mpe => unreachable!("exact rows are per-draw means"),
    }
}

fn inputs_for(name: BoundName, s: &Summary, config: &ReportConfig) -> Vec<(&'static str, f64)> {
    let pe = 1.0 - s.ranked[0];
    match name {
        BoundName::Fmb | BoundName::Cfmb | BoundName::Fano => vec![("pe", pe)],
        BoundName::Fmb1 => vec![("pe", pe), ("delta1", s.deltas[0])],
        BoundName::Fmb2 => vec![("pe", pe), ("delta1", s.deltas[0]), ("delta2", s.deltas[1])],
        BoundName::FmTwo => vec![("projected_draws", s.phi_projected as f64)],
        BoundName::CfmTwo => vec![("p*", s.ranked[0]), ("p**", s.ranked[1])],
        BoundName::Capacity => vec![("sum_sq", s.sum_sq)],
        BoundName::Delta => {
            vec![("pe", pe), ("integral", s.delta_integral), ("excluded_draws", s.delta_excluded as f64)]
        }
        BoundName::Fano1 => vec![("pe", pe), ("p**", s.ranked[1])],
        BoundName::Fano2 => vec![("pe", pe), ("p**", s.ranked[1]), ("p***", s.ranked[2])],
        BoundName::MpeFm => vec![("ee", s.ee)],
        BoundName::MpeLambda => vec![("ee", s.ee), ("gee_lambda", s.gee_lambda), ("lambda", config.lambda)],
        BoundName::MpeIntegral => vec![("gee_integral", s.gee_integral)],
        BoundName::MpeBn => vec![("bn", s.bn), ("order", config.bn_order)],
        BoundName::Ee | BoundName::Mi | BoundName::Mpe => Vec::new(),
    }
}

fn draw_columns(
    post: &crate::model::PosteriorVector,
    m: usize,
    depth: usize,
    config: &ReportConfig,
) -> Result<DrawColumns> {
    Ok(DrawColumns {
        ee: post.entropy(),
        ranked: [post.ranked(0), post.ranked(1), post.ranked(2)],
        deltas: draw_deltas(post, depth),
        sum_sq: post.sum_sq(),
        gee_lambda: draw_gee(post, config.lambda)?,
        gee_integral: draw_gee_integral(post),
        bn: draw_bn(post, config.bn_order)?,
        delta_term: draw_delta_term(post),
        phi: phi_two(post.ranked(0), post.ranked(1), m)?,
    })
}

fn validate(config: &ReportConfig, m: usize) -> Result<usize> {
    if !(config.lambda > 1.0) || !config.lambda.is_finite() {
        return Err(input(format!("lambda must be a finite value above 1, got {}", config.lambda)));
    }
    if config.bn_order.is_nan() || config.bn_order < 1.0 {
        return Err(input(format!("bn_order must be >= 1, got {}", config.bn_order)));
    }
    if config.blocks < 2 {
        return Err(input(format!("blocks must be >= 2, got {}", config.blocks)));
    }
    let depth = config.depth.unwrap_or_else(|| default_depth(m));
    if depth == 0 || depth > m.saturating_sub(1).max(1) {
        return Err(input(format!("depth must be in 1..={}, got {depth}", m.saturating_sub(1).max(1))));
    }
    Ok(depth.max(2))
}

/// Evaluate every row on `batch`.
///
/// Exact rows (EE, MI, MPE) carry plain standard errors. Bound rows are nonlinear in the
/// averaged statistics; their error bars come from recomputing each bound on contiguous
/// blocks of draws. A bound that cannot be evaluated is kept as a `FAILED` row with a NaN value.
pub fn assemble_report(batch: &SampleBatch, config: &ReportConfig) -> Result<Report> {
    let m = batch.num_hypotheses();
    let depth = validate(config, m)?;
    let h = batch.prior().entropy();
    let cols: Vec<DrawColumns> = batch
        .map_posteriors(|p| draw_columns(p, m, depth, config))
        .into_iter()
        .collect::<Result<_>>()?;

    let total = summarize(&cols, depth);
    let blocks: Vec<Summary> = block_ranges(cols.len(), config.blocks)
        .into_iter()
        .map(|r| summarize(&cols[r], depth))
        .collect();

    let ee = McEstimate::from_samples(&cols.iter().map(|c| c.ee).collect::<Vec<_>>());
    let mpe = McEstimate::from_samples(&cols.iter().map(|c| 1.0 - c.ranked[0]).collect::<Vec<_>>());
    let mi = ee.affine(h, -1.0);

    let mut rows = Vec::with_capacity(BoundName::ALL.len());
    for name in BoundName::ALL {
        let (value, std_error, flags, block_values) = match name {
            BoundName::Ee => (ee.mean, ee.std_error, Flags::empty(), blocks.iter().map(|b| b.ee).collect()),
            BoundName::Mi => (mi.mean, mi.std_error, Flags::empty(), blocks.iter().map(|b| h - b.ee).collect()),
            BoundName::Mpe => {
                (mpe.mean, mpe.std_error, Flags::empty(), blocks.iter().map(|b| 1.0 - b.ranked[0]).collect())
            }
            _ => {
                let block_values: Vec<f64> = blocks
                    .iter()
                    .map(|b| bound_value(name, b, m, config.lambda).map_or(f64::NAN, |v| v.value))
                    .collect();
                match bound_value(name, &total, m, config.lambda) {
                    Ok(v) => {
                        let finite: Vec<f64> = block_values.iter().copied().filter(|x| x.is_finite()).collect();
                        (v.value, batch_means_se(&finite), v.flags, block_values)
                    }
                    Err(e) => {
                        log::warn!("{name}: {e}");
                        (f64::NAN, f64::NAN, Flags::FAILED, block_values)
                    }
                }
            }
        };
        let flags = if value.is_finite() { flags } else { flags | Flags::FAILED };
        rows.push(BoundReport {
            name,
            kind: name.kind(),
            value,
            std_error,
            flags,
            inputs: inputs_for(name, &total, config),
            block_values,
        });
    }
    Ok(Report { num_hypotheses: m, prior_entropy: h, samples: batch.count(), seed: batch.seed(), rows })
}
