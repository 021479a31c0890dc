//! Run configuration: TOML or JSON files with command-line overrides, plus
//! the canonical hash embedded in every output artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use undersmooth::functionals::Functional;
use undersmooth::io::CsvSchema;
use undersmooth::sim::{EstimatorKind, SimDesign};
use undersmooth::tu::CandidateMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_sbar() -> usize {
    10
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// The resolved configuration of one invocation. Serialized canonically for
/// hashing and echoed into output metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Mistake budget (largest path step for sensitivity output).
    #[serde(default = "default_sbar")]
    pub sbar: usize,
    /// Worker threads; an execution knob, never part of the hashed
    /// configuration so identical analyses give identical artifacts.
    #[serde(skip_serializing, default)]
    pub threads: Option<usize>,
    /// Output location; also an execution knob, excluded from the hash.
    #[serde(skip_serializing, default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    pub command: CommandConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandConfig {
    Analyze(AnalyzeConfig),
    Simulate(SimulateConfig),
    Expand(ExpandConfig),
    TestHeterogeneity(TestHetConfig),
}

impl CommandConfig {
    pub fn label(&self) -> &'static str {
        match self {
            CommandConfig::Analyze(_) => "analyze",
            CommandConfig::Simulate(_) => "simulate",
            CommandConfig::Expand(_) => "expand",
            CommandConfig::TestHeterogeneity(_) => "test-heterogeneity",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub input: PathBuf,
    pub schema: CsvSchema,
    pub functional: Functional,
    #[serde(default)]
    pub candidate_mode: Option<CandidateMode>,
    /// Use the sample-split variant with this seed for the half partition.
    #[serde(default)]
    pub split: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    /// Preset name sim1..sim6, or an explicit design.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub design: Option<SimDesign>,
    #[serde(default)]
    pub estimators: Option<Vec<EstimatorKind>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExpandMethod {
    Interaction,
    Hadamard,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpandConfig {
    pub input: PathBuf,
    /// Dummy columns to expand; all columns when omitted.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    pub method: ExpandMethod,
    #[serde(default)]
    pub max_order: Option<usize>,
    #[serde(default)]
    pub min_size: Option<usize>,
    #[serde(default)]
    pub max_size: Option<usize>,
    #[serde(default)]
    pub subset_cap: Option<u128>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestHetConfig {
    pub input: PathBuf,
    pub schema: CsvSchema,
    #[serde(default)]
    pub candidate_mode: Option<CandidateMode>,
}

/// Resolve a preset name to its design.
pub fn preset_design(name: &str) -> Option<SimDesign> {
    let d = match name {
        "sim1" => SimDesign::preset(202, 4),
        "sim2" => SimDesign::preset(202, 8),
        "sim3" => SimDesign::preset(202, 16),
        "sim4" => SimDesign::preset(602, 4),
        "sim5" => SimDesign::preset(602, 8),
        "sim6" => SimDesign::preset(602, 16),
        _ => return None,
    };
    Some(d)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false)
            || raw.trim_start().starts_with('{');
        if is_json {
            serde_json::from_str(&raw).map_err(|e| format!("config parse error: {e}"))
        } else {
            toml::from_str(&raw).map_err(|e| format!("config parse error: {e}"))
        }
    }

    /// Canonical hash over the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(&hasher.finalize()[..16])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash_stability() {
        let toml_text = r#"
seed = 42
alpha = 0.05
sbar = 3

[command]
name = "simulate"
preset = "sim1"
"#;
        let cfg: RunConfig = toml::from_str(toml_text).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.sbar, 3);
        assert!(matches!(cfg.command, CommandConfig::Simulate(_)));
        let h1 = cfg.hash();
        let h2 = cfg.hash();
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 32);
    }

    #[test]
    fn json_config_accepted() {
        let json_text = r#"{
            "seed": 7,
            "command": {
                "name": "expand",
                "input": "dummies.csv",
                "method": "interaction",
                "max_order": 2
            }
        }"#;
        let cfg: RunConfig = serde_json::from_str(json_text).unwrap();
        assert!(matches!(cfg.command, CommandConfig::Expand(_)));
        assert_eq!(cfg.alpha, 0.05);
    }

    #[test]
    fn presets_cover_the_six_designs() {
        for (name, p, s0) in [
            ("sim1", 202, 4),
            ("sim2", 202, 8),
            ("sim3", 202, 16),
            ("sim4", 602, 4),
            ("sim5", 602, 8),
            ("sim6", 602, 16),
        ] {
            let d = preset_design(name).unwrap();
            assert_eq!((d.p, d.s0), (p, s0));
        }
        assert!(preset_design("sim7").is_none());
    }
}
