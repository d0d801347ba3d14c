//! The run configuration document and `--set` overrides.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fieldkde_core::lab::{BlockSpec, ExperimentConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// One JSON document for every subcommand: the shared experiment plus a
/// section per subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub check_conditions: CheckSection,
    #[serde(default)]
    pub gen_field: GenFieldSection,
    #[serde(default)]
    pub kde: KdeSection,
    #[serde(default)]
    pub blocks: BlocksSection,
    #[serde(default)]
    pub moment_check: MomentSection,
    #[serde(default)]
    pub fixed_m_gap: GapSection,
}

fn default_qsum_radius() -> usize {
    256
}

fn default_final_fraction() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    /// δ for the growth sequences; defaults to the midpoint of the feasible window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Exponent for the summability check; defaults to `5d/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qsum_q: Option<f64>,
    #[serde(default = "default_qsum_radius")]
    pub qsum_radius: usize,
    #[serde(default = "default_final_fraction")]
    pub trend_final_fraction: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            delta: None,
            qsum_q: None,
            qsum_radius: default_qsum_radius(),
            trend_final_fraction: default_final_fraction(),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenFieldSection {
    /// Lattice side; defaults to the first grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub replicate: usize,
    /// Lags for the autocovariance diagnostics.
    #[serde(default)]
    pub lags: Vec<Vec<usize>>,
    #[serde(default = "yes")]
    pub write_binary: bool,
    #[serde(default)]
    pub write_csv: bool,
}

impl Default for GenFieldSection {
    fn default() -> Self {
        GenFieldSection {
            n: None,
            m: None,
            replicate: 0,
            lags: Vec::new(),
            write_binary: true,
            write_csv: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub replicate: usize,
}

fn default_eps() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksSection {
    #[serde(default)]
    pub block: BlockSpec,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
}

impl Default for BlocksSection {
    fn default() -> Self {
        BlocksSection {
            block: BlockSpec::default(),
            eps: default_eps(),
        }
    }
}

fn default_wu_p() -> Vec<f64> {
    vec![1.0, 2.0]
}

fn default_wu_sample() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSection {
    /// Defaults to the cubes of side `2^r`, `r ≥ 2`, that fit the smallest n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rectangles: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_wu_p")]
    pub wu_p: Vec<f64>,
    #[serde(default = "default_wu_sample")]
    pub wu_sample: usize,
    /// Lags for the covariance profile; defaults to `k·e_1`, `k = 1..=4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<Vec<i64>>>,
}

impl Default for MomentSection {
    fn default() -> Self {
        MomentSection {
            rectangles: None,
            wu_p: default_wu_p(),
            wu_sample: default_wu_sample(),
            lags: None,
        }
    }
}

fn default_gap_m() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSection {
    #[serde(default = "default_gap_m")]
    pub m: usize,
    /// Also run the companion with `m = m_n`.
    #[serde(default = "yes")]
    pub growing: bool,
}

impl Default for GapSection {
    fn default() -> Self {
        GapSection {
            m: default_gap_m(),
            growing: true,
        }
    }
}

/// Reads the config file (or starts from an empty document) and applies
/// `key=value` overrides before typing it.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut doc = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => Value::Object(Map::new()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let text = doc.to_string();
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        anyhow::anyhow!("invalid config at `{at}`: {}", e.into_inner())
    })?;
    cfg.experiment.validate().context("invalid experiment config")?;
    Ok(cfg)
}

/// `a.b.c=value`; the value is read as JSON when it parses, else as a
/// string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let Some((key, raw)) = spec.split_once('=') else {
        bail!("override `{spec}` is not of the form key=value");
    };
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        bail!("override `{spec}` has an empty key segment");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            bail!("override `{spec}`: `{}` is not an object", parts[..i].join("."));
        }
        let map = node.as_object_mut().expect("checked object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("key has at least one segment")
}
