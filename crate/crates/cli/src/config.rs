//! Strict, versioned experiment configuration.
//!
//! Configs are JSON documents validated before any computation: unknown
//! fields are rejected, every diagnostic names the offending field by
//! path, and the effective config (after a seed override) is hashed so
//! artifacts can certify what produced them.

use std::path::Path;

use idos_core::dos::NormalizationMode;
use idos_core::lattice::Boundary;
use idos_core::operators::EnsembleSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Config schema version this binary reads.
pub const CONFIG_VERSION: u32 = 1;

/// Uniform spectral grid request.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub low: f64,
    pub high: f64,
    pub points: usize,
}

/// Parameters of the localized-trace density-of-states estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DosSection {
    /// Sides of the fundamental block carrying the trace vector.
    pub block_sides: Vec<i64>,
    /// Sites of padding added around the block on every side.
    pub padding: i64,
    /// Seeds for the trace estimate; defaults to the top-level count.
    #[serde(default)]
    pub realizations: Option<usize>,
}

/// Tolerances and schedules for the `check` subcommand. Every field is
/// optional; defaults are the ones the acceptance suite pins.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default = "default_trace_tolerance")]
    pub trace_tolerance: f64,
    #[serde(default = "default_laplace_tolerance")]
    pub laplace_tolerance: f64,
    /// Jumps at least this heavy define exclusion zones for sup-distance
    /// comparisons.
    #[serde(default = "default_jump_floor")]
    pub jump_floor: f64,
    /// Heat-semigroup time for the boundary-independence diagnostic.
    #[serde(default = "default_heat_time")]
    pub heat_time: f64,
    /// Padding for the boundary-independence diagnostic.
    #[serde(default = "default_boundary_padding")]
    pub boundary_padding: i64,
    /// Box sides for the boundary-independence diagnostic; when absent a
    /// feasible doubling schedule is derived from the main sides.
    #[serde(default)]
    pub boundary_sides: Option<Vec<i64>>,
    /// Consecutive boundary deviations must shrink by this factor
    /// (unless already at the numerical floor).
    #[serde(default = "default_min_boundary_ratio")]
    pub min_boundary_ratio: f64,
    /// Intervals for the spectral dichotomy sweep; when absent a sweep
    /// across the model band is derived from the spectral grid.
    #[serde(default)]
    pub intervals: Option<Vec<(f64, f64)>>,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            trace_tolerance: default_trace_tolerance(),
            laplace_tolerance: default_laplace_tolerance(),
            jump_floor: default_jump_floor(),
            heat_time: default_heat_time(),
            boundary_padding: default_boundary_padding(),
            boundary_sides: None,
            min_boundary_ratio: default_min_boundary_ratio(),
            intervals: None,
        }
    }
}

fn default_trace_tolerance() -> f64 {
    0.02
}
fn default_laplace_tolerance() -> f64 {
    0.02
}
fn default_jump_floor() -> f64 {
    0.005
}
fn default_heat_time() -> f64 {
    1.0
}
fn default_boundary_padding() -> i64 {
    8
}
fn default_min_boundary_ratio() -> f64 {
    1.8
}

/// Parameters of the finite-cluster atom comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsSection {
    /// Cluster-size cap for the enumeration (hard limit 8).
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    /// Empirical mass is collected within this radius of each predicted
    /// location.
    #[serde(default = "default_location_radius")]
    pub location_radius: f64,
    /// Empirical atoms below this mass are ignored.
    #[serde(default = "default_atom_floor")]
    pub atom_floor: f64,
}

fn default_max_cells() -> usize {
    8
}
fn default_location_radius() -> f64 {
    0.05
}
fn default_atom_floor() -> f64 {
    0.01
}

/// What the `delone` subcommand should generate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum DeloneSection {
    /// Exact square lattice on an nx-by-ny generator grid.
    Square { nx: usize, ny: usize },
    /// Independently displaced square lattice; the amplitude comes from
    /// the model spec and the seed from the top-level base seed.
    Perturbed { nx: usize, ny: usize },
    /// One-dimensional quasiperiodic chain by the cut-and-project rule.
    Fibonacci { count: usize, phase: f64 },
}

/// The one experiment description every subcommand reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    pub model: EnsembleSpec,
    pub dimension: usize,
    /// Side schedule of the box exhaustion (cubes).
    pub sides: Vec<i64>,
    pub realizations: usize,
    pub base_seed: u64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_mode")]
    pub mode: NormalizationMode,
    /// Spectral grid; when absent the model's default band is used.
    #[serde(default)]
    pub lambda: Option<GridSpec>,
    /// Laplace-route time grid; when absent {0.5, 1, 2} is used.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Output directory; the `--out` flag overrides it.
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub dos: Option<DosSection>,
    #[serde(default)]
    pub checks: Option<ChecksSection>,
    #[serde(default)]
    pub atoms: Option<AtomsSection>,
    #[serde(default)]
    pub delone: Option<DeloneSection>,
}

fn default_boundary() -> Boundary {
    Boundary::Open
}
fn default_mode() -> NormalizationMode {
    NormalizationMode::Volume
}

/// A parsed config together with its canonical JSON value and hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// The effective config as a JSON value (seed override applied),
    /// with object keys in canonical (sorted) order.
    pub value: serde_json::Value,
    /// SHA-256 of the canonical serialization of `value`, lowercase hex.
    pub hash: String,
}

/// Hash a canonical JSON value. serde_json keeps object keys sorted, so
/// serializing the parsed value is already canonical up to float
/// formatting, which the shortest-roundtrip writer makes deterministic.
pub fn hash_value(value: &serde_json::Value) -> String {
    let text = serde_json::to_string(value).expect("JSON values serialize");
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex(&hasher.finalize())
}

pub fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Parse a config document strictly, naming the failing field by path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, String> {
    let mut deserializer = serde_json::Deserializer::from_str(text);
    let parsed: Result<ExperimentConfig, _> =
        serde_path_to_error::deserialize(&mut deserializer);
    match parsed {
        Ok(config) => Ok(config),
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            if path.is_empty() || path == "." {
                Err(format!("config: {inner}"))
            } else {
                Err(format!("config field `{path}`: {inner}"))
            }
        }
    }
}

/// Load a config file, apply an optional seed override, validate, and
/// hash the effective document.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<LoadedConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    load_config_text(&text, seed_override)
}

/// Same as [`load_config`] for already-read text (replay uses this on
/// the manifest's embedded copy).
pub fn load_config_text(text: &str, seed_override: Option<u64>) -> Result<LoadedConfig, String> {
    let mut config = parse_config(text)?;
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
    if let Some(seed) = seed_override {
        config.base_seed = seed;
        value["base_seed"] = serde_json::json!(seed);
    }
    validate(&config)?;
    let hash = hash_value(&value);
    Ok(LoadedConfig {
        config,
        value,
        hash,
    })
}

/// Build a LoadedConfig from an effective JSON value (replay path).
pub fn load_config_value(value: &serde_json::Value) -> Result<LoadedConfig, String> {
    let text = serde_json::to_string(value).expect("JSON values serialize");
    load_config_text(&text, None)
}

fn validate(c: &ExperimentConfig) -> Result<(), String> {
    if c.config_version != CONFIG_VERSION {
        return Err(format!(
            "config field `config_version`: unsupported version {} (this binary reads version {CONFIG_VERSION})",
            c.config_version
        ));
    }
    c.model.validate().map_err(|e| {
        let field = match &c.model {
            EnsembleSpec::PercolationAdjacency { .. }
            | EnsembleSpec::PercolationLaplacian { .. } => "model.p",
            EnsembleSpec::Anderson { .. } => "model",
            EnsembleSpec::DeloneVoronoi { .. } => "model.amplitude",
        };
        format!("config field `{field}`: {e}")
    })?;
    if !(1..=3).contains(&c.dimension) {
        return Err(format!(
            "config field `dimension`: must be 1, 2, or 3, got {}",
            c.dimension
        ));
    }
    if c.sides.is_empty() {
        return Err("config field `sides`: must list at least one box side".to_string());
    }
    if c.sides.iter().any(|&s| s <= 0) {
        return Err("config field `sides`: box sides must be positive".to_string());
    }
    if c.sides.windows(2).any(|w| w[1] <= w[0]) {
        return Err("config field `sides`: sides must strictly increase".to_string());
    }
    if c.realizations == 0 {
        return Err("config field `realizations`: must be at least 1".to_string());
    }
    if let Some(g) = &c.lambda {
        if !(g.low.is_finite() && g.high.is_finite() && g.low < g.high) {
            return Err(format!(
                "config field `lambda`: needs finite low < high, got [{}, {}]",
                g.low, g.high
            ));
        }
        if g.points < 2 {
            return Err("config field `lambda.points`: needs at least 2 points".to_string());
        }
    }
    if let Some(times) = &c.times {
        if times.is_empty() {
            return Err("config field `times`: must not be empty".to_string());
        }
        for (i, &t) in times.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(format!(
                    "config field `times[{i}]`: times must be positive and finite, got {t}"
                ));
            }
        }
    }
    if let Some(dos) = &c.dos {
        if dos.block_sides.len() != c.dimension {
            return Err(format!(
                "config field `dos.block_sides`: expected {} sides for dimension {}, got {}",
                c.dimension,
                c.dimension,
                dos.block_sides.len()
            ));
        }
        if dos.block_sides.iter().any(|&s| s <= 0) {
            return Err("config field `dos.block_sides`: sides must be positive".to_string());
        }
        if dos.padding < 0 {
            return Err("config field `dos.padding`: must be nonnegative".to_string());
        }
        if dos.realizations == Some(0) {
            return Err("config field `dos.realizations`: must be at least 1".to_string());
        }
    }
    if let Some(checks) = &c.checks {
        for (name, v) in [
            ("checks.trace_tolerance", checks.trace_tolerance),
            ("checks.laplace_tolerance", checks.laplace_tolerance),
            ("checks.jump_floor", checks.jump_floor),
            ("checks.heat_time", checks.heat_time),
            ("checks.min_boundary_ratio", checks.min_boundary_ratio),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!(
                    "config field `{name}`: must be positive and finite, got {v}"
                ));
            }
        }
        if checks.boundary_padding <= 0 {
            return Err("config field `checks.boundary_padding`: must be positive".to_string());
        }
        if let Some(sides) = &checks.boundary_sides {
            if sides.len() < 2 {
                return Err(
                    "config field `checks.boundary_sides`: needs at least two scales".to_string()
                );
            }
            if sides.iter().any(|&s| s <= 0) || sides.windows(2).any(|w| w[1] <= w[0]) {
                return Err(
                    "config field `checks.boundary_sides`: sides must be positive and strictly increasing"
                        .to_string(),
                );
            }
        }
        if let Some(intervals) = &checks.intervals {
            for (i, (a, b)) in intervals.iter().enumerate() {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(format!(
                        "config field `checks.intervals[{i}]`: needs finite a < b, got ({a}, {b})"
                    ));
                }
            }
        }
    }
    if let Some(atoms) = &c.atoms {
        if atoms.max_cells == 0 || atoms.max_cells > 8 {
            return Err(format!(
                "config field `atoms.max_cells`: must lie in 1..=8, got {}",
                atoms.max_cells
            ));
        }
        if !(atoms.location_radius > 0.0) {
            return Err("config field `atoms.location_radius`: must be positive".to_string());
        }
        if !(atoms.atom_floor > 0.0) {
            return Err("config field `atoms.atom_floor`: must be positive".to_string());
        }
    }
    if let Some(delone) = &c.delone {
        match delone {
            DeloneSection::Square { nx, ny } | DeloneSection::Perturbed { nx, ny } => {
                if *nx < 2 || *ny < 2 {
                    return Err(
                        "config field `delone`: generator grid needs nx, ny >= 2".to_string()
                    );
                }
            }
            DeloneSection::Fibonacci { count, phase } => {
                if *count < 2 {
                    return Err(
                        "config field `delone.count`: chain needs at least two points".to_string()
                    );
                }
                if !phase.is_finite() {
                    return Err("config field `delone.phase`: must be finite".to_string());
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "config_version": 1,
            "model": {"kind": "percolation-adjacency", "p": 0.5},
            "dimension": 2,
            "sides": [8, 16],
            "realizations": 4,
            "base_seed": 7
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses() {
        let loaded = load_config_text(&minimal(), None).unwrap();
        assert_eq!(loaded.config.realizations, 4);
        assert_eq!(loaded.config.boundary, Boundary::Open);
        assert_eq!(loaded.hash.len(), 64);
    }

    #[test]
    fn unknown_field_is_rejected_by_name() {
        let text = minimal().replace("\"base_seed\": 7", "\"base_seed\": 7, \"extra\": 1");
        let err = load_config_text(&text, None).unwrap_err();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn nested_unknown_field_names_the_path() {
        let text = minimal().replace(
            "\"p\": 0.5",
            "\"p\": 0.5, \"q\": 0.1",
        );
        let err = load_config_text(&text, None).unwrap_err();
        assert!(err.contains("model") && err.contains('q'), "{err}");
    }

    #[test]
    fn out_of_range_density_names_the_field() {
        let text = minimal().replace("\"p\": 0.5", "\"p\": 1.5");
        let err = load_config_text(&text, None).unwrap_err();
        assert!(err.contains("model.p"), "{err}");
    }

    #[test]
    fn version_mismatch_is_refused() {
        let text = minimal().replace("\"config_version\": 1", "\"config_version\": 2");
        let err = load_config_text(&text, None).unwrap_err();
        assert!(err.contains("config_version"), "{err}");
    }

    #[test]
    fn seed_override_changes_hash_and_config() {
        let a = load_config_text(&minimal(), None).unwrap();
        let b = load_config_text(&minimal(), Some(99)).unwrap();
        assert_eq!(b.config.base_seed, 99);
        assert_ne!(a.hash, b.hash);
        assert_eq!(b.value["base_seed"], serde_json::json!(99));
    }

    #[test]
    fn hash_ignores_formatting_but_not_content() {
        let spaced = minimal().replace('\n', "\n\n  ");
        let a = load_config_text(&minimal(), None).unwrap();
        let b = load_config_text(&spaced, None).unwrap();
        assert_eq!(a.hash, b.hash);
        let c = load_config_text(&minimal().replace("0.5", "0.25"), None).unwrap();
        assert_ne!(a.hash, c.hash);
    }
}
