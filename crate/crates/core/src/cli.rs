//! Run configuration, report rendering, and output writing for the command-line tool.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{assemble_report, BoundKind, BoundReport, Report, ReportConfig, Units};
use crate::error::{input, Error, Result};
use crate::flem::{build_model, FlemConfig};
use crate::mc::{default_depth, sample_joint, JointSampler, PosteriorReplay};
use crate::model::{GaussianChannel, HypothesisModel, Prior};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_PSBR_GRID: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 3.0, 5.0];

/// Output document format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(input(format!("format must be csv or json, got {s:?}"))),
        }
    }
}

/// Gaussian model with explicit means; the prior is uniform when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
    pub variance: f64,
}

/// Fixed posteriors replayed cyclically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySpec {
    pub posteriors: Vec<Vec<f64>>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_lambda() -> f64 {
    2.0
}

fn default_bn_order() -> f64 {
    2.0
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Contents of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_bn_order")]
    pub bn_order: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub format: Format,
    #[serde(default, skip_serializing_if = "is_default")]
    pub units: Units,
    /// PSBR values for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psbr_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flem: Option<FlemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianSpec>,
    #[serde(default, rename = "posterior-replay", skip_serializing_if = "Option::is_none")]
    pub posterior_replay: Option<ReplaySpec>,
}

impl Default for RunConfig {
    /// FLEM-FLASH at its defaults.
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            depth: None,
            lambda: 2.0,
            bn_order: 2.0,
            format: Format::Csv,
            units: Units::Bits,
            psbr_grid: None,
            flem: Some(FlemConfig::default()),
            gaussian: None,
            posterior_replay: None,
        }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

/// Parse and validate a TOML configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let key = e.span().map_or_else(|| "<document>".to_string(), |s| locate_key(text, s.start));
        config_error(&key, e.message())
    })?;
    config.validate()?;
    Ok(config)
}

/// Best-effort `table.key` path of the byte offset `at` in a TOML document.
fn locate_key(text: &str, at: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            table = name.trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        offset += line.len();
        if offset > at {
            break;
        }
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "<document>".into(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

/// Render a configuration that [`parse_config`] reads back unchanged.
pub fn render_config(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| config_error("<document>", e.to_string()))
}

/// The model a configuration selects.
pub enum Sampler {
    Gaussian(HypothesisModel),
    Replay(PosteriorReplay),
}

impl Sampler {
    pub fn as_joint(&self) -> &dyn JointSampler {
        match self {
            Sampler::Gaussian(m) => m,
            Sampler::Replay(r) => r,
        }
    }

    pub fn num_hypotheses(&self) -> usize {
        self.as_joint().prior().len()
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let present = [self.flem.is_some(), self.gaussian.is_some(), self.posterior_replay.is_some()];
        match present.iter().filter(|p| **p).count() {
            1 => {}
            0 => return Err(config_error("<model>", "one of [flem], [gaussian], [posterior-replay] is required")),
            _ => {
                return Err(config_error(
                    "<model>",
                    "only one of [flem], [gaussian], [posterior-replay] may be present",
                ))
            }
        }
        if self.samples == 0 {
            return Err(config_error("samples", "must be at least 1"));
        }
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(config_error("lambda", format!("must be a finite value above 1, got {}", self.lambda)));
        }
        if !(self.bn_order >= 1.0) {
            return Err(config_error("bn_order", format!("must be >= 1, got {}", self.bn_order)));
        }
        if let Some(grid) = &self.psbr_grid {
            if grid.is_empty() {
                return Err(config_error("psbr_grid", "must not be empty"));
            }
            if grid.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(config_error("psbr_grid", "values must be finite and >= 0"));
            }
        }
        let m = self.build_sampler()?.num_hypotheses();
        if let Some(d) = self.depth {
            if d == 0 || d > m.saturating_sub(1).max(1) {
                return Err(config_error("depth", format!("must be in 1..={}, got {d}", m.saturating_sub(1).max(1))));
            }
        }
        Ok(())
    }

    pub fn build_sampler(&self) -> Result<Sampler> {
        let keyed = |key: &'static str| move |e: Error| config_error(key, e.to_string());
        if let Some(f) = &self.flem {
            return Ok(Sampler::Gaussian(build_model(f).map_err(|e| match e {
                Error::Config { .. } => e,
                other => config_error("flem", other.to_string()),
            })?));
        }
        if let Some(g) = &self.gaussian {
            let channel = GaussianChannel::new(g.means.clone(), g.variance).map_err(keyed("gaussian"))?;
            let prior = match &g.prior {
                Some(p) => Prior::new(p.clone()).map_err(keyed("gaussian.prior"))?,
                None => Prior::uniform(g.means.len()).map_err(keyed("gaussian.means"))?,
            };
            return Ok(Sampler::Gaussian(HypothesisModel::with_prior(prior, channel).map_err(keyed("gaussian"))?));
        }
        if let Some(r) = &self.posterior_replay {
            return Ok(Sampler::Replay(PosteriorReplay::new(&r.posteriors).map_err(keyed("posterior-replay.posteriors"))?));
        }
        Err(config_error("<model>", "no model section"))
    }

    pub fn report_config(&self) -> ReportConfig {
        ReportConfig { depth: self.depth, lambda: self.lambda, bn_order: self.bn_order, ..ReportConfig::default() }
    }

    /// Effective ordered-statistics depth for `m` hypotheses.
    pub fn effective_depth(&self, m: usize) -> usize {
        self.depth.unwrap_or_else(|| default_depth(m))
    }

    /// SHA-256 of the model section and sampling parameters.
    pub fn model_digest(&self) -> String {
        #[derive(Serialize)]
        struct Digest<'a> {
            flem: &'a Option<FlemConfig>,
            gaussian: &'a Option<GaussianSpec>,
            posterior_replay: &'a Option<ReplaySpec>,
        }
        let canonical = serde_json::to_string(&Digest {
            flem: &self.flem,
            gaussian: &self.gaussian,
            posterior_replay: &self.posterior_replay,
        })
        .expect("model sections serialize");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn with_psbr(&self, psbr: f64) -> Result<RunConfig> {
        let flem = self.flem.as_ref().ok_or_else(|| config_error("psbr", "PSBR applies only to [flem] models"))?;
        Ok(RunConfig { flem: Some(FlemConfig { psbr, ..flem.clone() }), ..self.clone() })
    }
}

/// Draw the batch and evaluate every bound.
pub fn run_report(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let sampler = config.build_sampler()?;
    let batch = sample_joint(sampler.as_joint(), config.samples, config.seed)?;
    assemble_report(&batch, &config.report_config())
}

fn units_label(row: &BoundReport, units: Units) -> &'static str {
    if row.kind.is_information() {
        units.as_str()
    } else {
        "probability"
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
fn num(x: f64) -> String {
    if !x.is_finite() {
        "NaN".into()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn csv_error(e: csv::Error) -> Error {
    input(format!("CSV output failed: {e}"))
}

/// CSV with columns `bound_name, kind, value, std_error, units, flags`.
pub fn render_csv(report: &Report, units: Units) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bound_name", "kind", "value", "std_error", "units", "flags"]).map_err(csv_error)?;
    for row in &report.rows {
        w.write_record([
            row.name.as_str().to_string(),
            row.kind.as_str().to_string(),
            num(row.value_in(units)),
            num(row.std_error_in(units)),
            units_label(row, units).to_string(),
            row.flags.to_string(),
        ])
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| input(format!("CSV output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[derive(Serialize)]
struct JsonMetadata<'a> {
    seed: u64,
    samples: usize,
    model_digest: String,
    num_hypotheses: usize,
    prior_entropy: f64,
    units: &'a str,
    lambda: f64,
    bn_order: f64,
    depth: usize,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    bound_name: &'a str,
    kind: &'a str,
    value: Option<f64>,
    std_error: Option<f64>,
    units: &'a str,
    flags: String,
    mi_kind: Option<&'a str>,
    mi_value: Option<f64>,
    fmi: Option<f64>,
    fmi_std_error: Option<f64>,
    inputs: serde_json::Map<String, serde_json::Value>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn json_rows<'a>(report: &'a Report, units: Units) -> Vec<JsonRow<'a>> {
    report
        .rows
        .iter()
        .map(|row| {
            let mi = row.mi_value(report.prior_entropy);
            let fmi = row.fmi(report.prior_entropy);
            JsonRow {
                bound_name: row.name.as_str(),
                kind: row.kind.as_str(),
                value: finite(row.value_in(units)),
                std_error: finite(row.std_error_in(units)),
                units: units_label(row, units),
                flags: row.flags.to_string(),
                mi_kind: mi.map(|(k, _)| k.as_str()),
                mi_value: mi.and_then(|(_, v)| finite(units.from_nats(v))),
                fmi: fmi.and_then(|(v, _)| finite(v)),
                fmi_std_error: fmi.and_then(|(_, se)| finite(se)),
                inputs: row.inputs.iter().map(|(k, v)| ((*k).to_string(), serde_json::json!(finite(*v)))).collect(),
            }
        })
        .collect()
}

fn metadata<'a>(config: &RunConfig, report: &Report, units: &'a Units) -> JsonMetadata<'a> {
    JsonMetadata {
        seed: config.seed,
        samples: config.samples,
        model_digest: config.model_digest(),
        num_hypotheses: report.num_hypotheses,
        prior_entropy: units.from_nats(report.prior_entropy),
        units: units.as_str(),
        lambda: config.lambda,
        bn_order: config.bn_order,
        depth: config.effective_depth(report.num_hypotheses),
    }
}

/// JSON document `{ metadata, rows }`.
pub fn render_json(config: &RunConfig, report: &Report) -> Result<String> {
    let units = config.units;
    let doc = serde_json::json!({
        "metadata": metadata(config, report, &units),
        "rows": json_rows(report, units),
    });
    serde_json::to_string_pretty(&doc).map(|s| s + "\n").map_err(|e| input(e.to_string()))
}

/// Report rendered in the configured format.
pub fn render_report(config: &RunConfig, report: &Report) -> Result<String> {
    match config.format {
        Format::Csv => render_csv(report, config.units),
        Format::Json => render_json(config, report),
    }
}

/// A row as plotted against PSBR: EE rows as fractional MI bounds, MPE rows as probabilities.
pub fn sweep_value(row: &BoundReport, prior_entropy: f64) -> (f64, f64) {
    match row.kind {
        BoundKind::Equivocation if prior_entropy > 0.0 => (row.value / prior_entropy, row.std_error / prior_entropy),
        _ => row.fmi(prior_entropy).unwrap_or((row.value, row.std_error)),
    }
}

/// Long-format CSV `psbr, bound_name, value, std_error`.
pub fn render_sweep_csv(points: &[(f64, Report)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["psbr", "bound_name", "value", "std_error"]).map_err(csv_error)?;
    for (psbr, report) in points {
        for row in &report.rows {
            let (v, se) = sweep_value(row, report.prior_entropy);
            w.write_record([num(*psbr), row.name.as_str().to_string(), num(v), num(se)]).map_err(csv_error)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| input(format!("CSV output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// JSON sweep: shared metadata plus one report block per PSBR.
pub fn render_sweep_json(config: &RunConfig, points: &[(f64, Report)]) -> Result<String> {
    let units = config.units;
    let blocks: Vec<serde_json::Value> = points
        .iter()
        .map(|(psbr, report)| {
            let point = config.with_psbr(*psbr).unwrap_or_else(|_| config.clone());
            serde_json::json!({
                "psbr": psbr,
                "metadata": metadata(&point, report, &units),
                "rows": json_rows(report, units),
            })
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "points": blocks }))
        .map(|s| s + "\n")
        .map_err(|e| input(e.to_string()))
}

/// One report per PSBR value on a `[flem]` configuration.
pub fn run_sweep(config: &RunConfig, psbrs: &[f64]) -> Result<Vec<(f64, Report)>> {
    if psbrs.is_empty() {
        return Err(input("PSBR list is empty"));
    }
    psbrs.iter().map(|&p| Ok((p, run_report(&config.with_psbr(p)?)?))).collect()
}

pub fn render_sweep(config: &RunConfig, points: &[(f64, Report)]) -> Result<String> {
    match config.format {
        Format::Csv => render_sweep_csv(points),
        Format::Json => render_sweep_json(config, points),
    }
}

/// Comma-separated list of non-negative reals.
pub fn parse_psbr_list(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| input(format!("bad PSBR value {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(input("PSBR list is empty"));
    }
    if values.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(input("PSBR values must be finite and >= 0"));
    }
    Ok(values)
}

/// Write `contents` to `path` via a temporary file in the same directory and an atomic rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| input(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Plain-text oracle comparison table.
pub fn render_oracle_table(results: &[(usize, Vec<crate::oracle::OracleCheck>)], k: f64) -> String {
    let mut out = String::from("model quantity reference estimate std_error z status\n");
    for (i, checks) in results {
        for c in checks {
            let _ = writeln!(
                out,
                "{i} {} {:.9} {:.9} {:.3e} {:.2} {}",
                c.name,
                c.reference,
                c.estimate.mean,
                c.estimate.std_error,
                c.z_score(),
                if c.agrees(k) { "ok" } else { "MISMATCH" }
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundName;

    #[test]
    fn minimal_flem_defaults() {
        let c = parse_config("[flem]\npsbr = 2.0\n").unwrap();
        assert_eq!(c.samples, 100_000);
        assert_eq!(c.seed, 0);
        assert_eq!(c.lambda, 2.0);
        assert_eq!(c.units, Units::Bits);
        assert_eq!(c.build_sampler().unwrap().num_hypotheses(), 32);
        assert_eq!(c.effective_depth(32), 8);
    }

    #[test]
    fn rejects_zero_samples() {
        let err = parse_config("samples = 0\n[flem]\npsbr = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("samples"), "{err}");
    }

    #[test]
    fn rejects_two_models() {
        let text = "[flem]\npsbr = 1.0\n[gaussian]\nmeans = [[0.0], [1.0]]\nvariance = 1.0\n";
        assert!(matches!(parse_config(text), Err(Error::Config { .. })));
    }

    #[test]
    fn rejects_unknown_keys_with_path() {
        let err = parse_config("[flem]\npsbr = 1.0\ncolour = 3\n").unwrap_err();
        assert!(err.to_string().contains("flem"), "{err}");
        let err = parse_config("sample = 4\n[flem]\n").unwrap_err();
        assert!(err.to_string().contains("sample"), "{err}");
    }

    #[test]
    fn round_trip() {
        let configs = [
            RunConfig::default(),
            parse_config("samples = 77\nseed = 5\ndepth = 1\nlambda = 3.5\nformat = \"json\"\nunits = \"nats\"\n[gaussian]\nprior = [0.25, 0.75]\nmeans = [[0.0, 1.0], [1.0, 0.1]]\nvariance = 0.3\n").unwrap(),
            parse_config("psbr_grid = [0.5, 1.0]\n[flem]\npsbr = 0.1\nbg_fluctuation = \"variance\"\nring_offset = 0.3\n").unwrap(),
            parse_config("[posterior-replay]\nposteriors = [[0.6, 0.3, 0.1], [0.2, 0.2, 0.6]]\n").unwrap(),
        ];
        for c in configs {
            let text = render_config(&c).unwrap();
            assert_eq!(parse_config(&text).unwrap(), c, "{text}");
        }
    }

    #[test]
    fn deterministic_toy_model_has_full_fmi() {
        let c = parse_config("samples = 500\n[gaussian]\nmeans = [[0.0], [100.0], [200.0]]\nvariance = 1.0\n").unwrap();
        let r = run_report(&c).unwrap();
        let (fmi, _) = r.row(BoundName::Mi).fmi(r.prior_entropy).unwrap();
        assert!((fmi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_columns_and_units() {
        let c = parse_config("samples = 200\n[posterior-replay]\nposteriors = [[0.5, 0.5]]\n").unwrap();
        let r = run_report(&c).unwrap();
        let csv = render_csv(&r, Units::Bits).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "bound_name,kind,value,std_error,units,flags");
        let ee: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!((ee[0], ee[1], ee[4], ee[5]), ("EE", "EE", "bits", ""));
        assert!((ee[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(csv.lines().count(), 19);
        let again = render_csv(&run_report(&c).unwrap(), Units::Bits).unwrap();
        assert_eq!(csv, again);
        let json = render_json(&c, &r).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["metadata"]["samples"], 200);
        assert_eq!(v["metadata"]["model_digest"].as_str().unwrap().len(), 64);
        assert_eq!(v["rows"].as_array().unwrap().len(), 18);
    }

    #[test]
    fn sweep_structure() {
        let c = RunConfig { samples: 300, ..RunConfig::default() };
        assert!(run_sweep(&c, &[]).is_err());
        let points = run_sweep(&c, &[1.0, 4.0]).unwrap();
        let csv = render_sweep_csv(&points).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 18);
        let single = run_sweep(&c, &[4.0]).unwrap();
        assert_eq!(single[0].1, points[1].1);
        let g = parse_config("[gaussian]\nmeans = [[0.0], [1.0]]\nvariance = 1.0\n").unwrap();
        assert!(run_sweep(&g, &[1.0]).is_err());
    }

    #[test]
    fn psbr_lists() {
        assert_eq!(parse_psbr_list("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_psbr_list("").is_err());
        assert!(parse_psbr_list("1,x").is_err());
        assert!(parse_psbr_list("-1").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
    }
}
