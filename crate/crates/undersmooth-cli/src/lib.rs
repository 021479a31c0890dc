//! Orchestration for the command-line interface: resolve a configuration,
//! run the requested analysis, and write self-describing artifacts.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use undersmooth::features::{hadamard_walsh_expand, interaction_expand, FeatureMatrix};
use undersmooth::io::{self, format_float, ingest_csv};
use undersmooth::lasso::HeteroLassoConfig;
use undersmooth::sim::{run_battery, BatteryConfig, SimReport};
use undersmooth::tu::{
    tu_interval_split, tu_wald_test, CandidateMode, TuConfig, TuResult, TuWaldResult,
};
use undersmooth::Dataset;

use config::{
    preset_design, AnalyzeConfig, CommandConfig, ExpandConfig, ExpandMethod, RunConfig,
    SimulateConfig, TestHetConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metadata stamped into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactMeta {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl ArtifactMeta {
    fn new(cfg: &RunConfig) -> Self {
        ArtifactMeta {
            command: cfg.command.label().to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: VERSION.to_string(),
        }
    }

    fn csv_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("command".into(), self.command.clone()),
            ("config_hash".into(), self.config_hash.clone()),
            ("seed".into(), self.seed.to_string()),
            ("version".into(), self.version.clone()),
        ]
    }
}

#[derive(Debug, Serialize)]
struct Artifact<T: Serialize> {
    meta: ArtifactMeta,
    result: T,
}

/// Machine-readable failure report printed on any error.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub command: String,
    pub config_hash: String,
}

pub type RunError = String;

/// Execute one configuration; returns the paths written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, RunError> {
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| format!("thread pool: {e}"))?;
            pool.install(|| dispatch(cfg))
        }
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &RunConfig) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out_dir.display()))?;
    match &cfg.command {
        CommandConfig::Analyze(a) => run_analyze(cfg, a),
        CommandConfig::Simulate(s) => run_simulate(cfg, s),
        CommandConfig::Expand(e) => run_expand(cfg, e),
        CommandConfig::TestHeterogeneity(t) => run_test_het(cfg, t),
    }
}

fn write_json<T: Serialize>(path: &PathBuf, meta: &ArtifactMeta, result: &T) -> Result<(), RunError> {
    let artifact = Artifact {
        meta: meta.clone(),
        result,
    };
    let mut buf = serde_json::to_vec_pretty(&artifact).map_err(|e| e.to_string())?;
    buf.push(b'\n');
    fs::write(path, buf).map_err(|e| format!("write {}: {e}", path.display()))
}

fn write_csv(
    path: &PathBuf,
    meta: &ArtifactMeta,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), RunError> {
    let mut out = Vec::new();
    io::write_table_csv(&mut out, &meta.csv_pairs(), header, rows).map_err(|e| e.to_string())?;
    fs::write(path, out).map_err(|e| format!("write {}: {e}", path.display()))
}

fn load_dataset(input: &Path, schema: &undersmooth::io::CsvSchema) -> Result<Dataset, RunError> {
    let (data, log) = ingest_csv(input, schema).map_err(|e| e.to_string())?;
    eprintln!(
        "ingested {} rows, {} columns from {}",
        log.n_rows,
        log.columns.len(),
        input.display()
    );
    for col in &log.columns {
        eprintln!("  column {} checksum {}", col.name, col.checksum);
    }
    Ok(data)
}

fn run_analyze(cfg: &RunConfig, a: &AnalyzeConfig) -> Result<Vec<PathBuf>, RunError> {
    let meta = ArtifactMeta::new(cfg);
    let data = load_dataset(&a.input, &a.schema)?;
    let result: TuResult = if a.split {
        let mut tu_cfg = TuConfig::new(cfg.sbar, cfg.alpha);
        if let Some(mode) = a.candidate_mode {
            tu_cfg.mode = mode;
        }
        tu_interval_split(&data, &a.functional, &tu_cfg, cfg.seed).map_err(|e| e.to_string())?
    } else if cfg.sbar == 0 {
        let tu_cfg = TuConfig::new(0, cfg.alpha);
        undersmooth::tu::tu_interval(&data, &a.functional, &tu_cfg, None)
            .map_err(|e| e.to_string())?
    } else {
        let mut tu_cfg = TuConfig::new(cfg.sbar, cfg.alpha);
        if let Some(mode) = a.candidate_mode {
            tu_cfg.mode = mode;
        }
        undersmooth::tu::tu_interval(&data, &a.functional, &tu_cfg, None)
            .map_err(|e| e.to_string())?
    };

    let mut written = Vec::new();
    if cfg.format.wants_json() {
        let path = cfg.out_dir.join("analyze_result.json");
        write_json(&path, &meta, &result)?;
        written.push(path);
    }
    if cfg.format.wants_csv() {
        let rows: Vec<Vec<String>> = result
            .per_sbar
            .iter()
            .enumerate()
            .map(|(s, &(lo, up))| {
                vec![
                    s.to_string(),
                    format_float(lo),
                    format_float(up),
                    format_float(up - lo),
                ]
            })
            .collect();
        let path = cfg.out_dir.join("sensitivity.csv");
        write_csv(&path, &meta, &["sbar", "lower", "upper", "length"], &rows)?;
        written.push(path);
    }
    Ok(written)
}

fn resolve_design(cfg: &RunConfig, s: &SimulateConfig) -> Result<undersmooth::sim::SimDesign, RunError> {
    let mut design = match (&s.preset, &s.design) {
        (Some(name), None) => {
            preset_design(name).ok_or_else(|| format!("unknown preset {name:?}"))?
        }
        (None, Some(d)) => d.clone(),
        (Some(_), Some(_)) => return Err("give either a preset or a design, not both".into()),
        (None, None) => return Err("simulate needs a preset or a design".into()),
    };
    design.seed = cfg.seed;
    design.alpha = cfg.alpha;
    Ok(design)
}

fn run_simulate(cfg: &RunConfig, s: &SimulateConfig) -> Result<Vec<PathBuf>, RunError> {
    let meta = ArtifactMeta::new(cfg);
    let design = resolve_design(cfg, s)?;
    let mut battery = BatteryConfig::new(design);
    battery.sbar_max = cfg.sbar;
    if let Some(estimators) = &s.estimators {
        battery = battery.with_estimators(estimators.clone());
    }
    let report: SimReport = run_battery(&battery).map_err(|e| e.to_string())?;
    eprintln!(
        "{} replications done in {:.1}s ({} failed)",
        report.meta.reps_completed, report.meta.runtime_seconds, report.meta.reps_failed
    );

    let mut written = Vec::new();
    if cfg.format.wants_json() {
        let path = cfg.out_dir.join("sim_report.json");
        write_json(&path, &meta, &report)?;
        written.push(path);
    }
    if cfg.format.wants_csv() {
        let path = cfg.out_dir.join("sim_report.csv");
        write_csv(
            &path,
            &meta,
            &["estimator", "functional", "metric", "value"],
            &report.metric_records(),
        )?;
        written.push(path);
        let path = cfg.out_dir.join("tu_path.csv");
        write_csv(
            &path,
            &meta,
            &["functional", "sbar", "coverage", "coverage_se", "mean_length"],
            &report.path_records(),
        )?;
        written.push(path);
    }
    Ok(written)
}

fn run_expand(cfg: &RunConfig, e: &ExpandConfig) -> Result<Vec<PathBuf>, RunError> {
    let meta = ArtifactMeta::new(cfg);
    // read all columns as covariates: reuse the ingest path with a synthetic
    // outcome by taking the first column as outcome then restoring it
    let raw = read_plain_matrix(&e.input)?;
    let (names, values) = raw;
    let selected: Vec<usize> = match &e.columns {
        Some(wanted) => wanted
            .iter()
            .map(|w| {
                names
                    .iter()
                    .position(|n| n == w)
                    .ok_or_else(|| format!("column {w:?} not found"))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => (0..names.len()).collect(),
    };
    let sub_names: Vec<String> = selected.iter().map(|&j| names[j].clone()).collect();
    let sub = values.select(ndarray::Axis(1), &selected);

    let fm: FeatureMatrix = match e.method {
        ExpandMethod::Interaction => {
            let order = e.max_order.unwrap_or(2);
            interaction_expand(&sub, &sub_names, order).map_err(|err| err.to_string())?
        }
        ExpandMethod::Hadamard => {
            let min_size = e.min_size.unwrap_or(2);
            let max_size = e.max_size.unwrap_or(min_size.max(3));
            let cap = e.subset_cap.unwrap_or(200_000);
            hadamard_walsh_expand(&sub, &sub_names, min_size, max_size, cap)
                .map_err(|err| err.to_string())?
        }
    };
    let path = cfg.out_dir.join("features.csv");
    let mut out = Vec::new();
    io::write_feature_csv(&mut out, &fm, &meta.csv_pairs()).map_err(|err| err.to_string())?;
    fs::write(&path, out).map_err(|err| format!("write {}: {err}", path.display()))?;
    Ok(vec![path])
}

/// Read a headered all-numeric CSV into names and values.
fn read_plain_matrix(path: &Path) -> Result<(Vec<String>, ndarray::Array2<f64>), RunError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| e.to_string())?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ri, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let mut row = Vec::with_capacity(names.len());
        for (ci, field) in rec.iter().enumerate() {
            row.push(field.trim().parse::<f64>().map_err(|_| {
                format!(
                    "non-numeric cell {field:?} at row {}, column {:?}",
                    ri + 1,
                    names[ci]
                )
            })?);
        }
        rows.push(row);
    }
    let n = rows.len();
    let k = names.len();
    let mut values = ndarray::Array2::zeros((n, k));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    Ok((names, values))
}

fn run_test_het(cfg: &RunConfig, t: &TestHetConfig) -> Result<Vec<PathBuf>, RunError> {
    let meta = ArtifactMeta::new(cfg);
    let data = load_dataset(&t.input, &t.schema)?;
    let mode = t.candidate_mode.unwrap_or(CandidateMode::Single);
    let result: TuWaldResult = tu_wald_test(
        &data,
        cfg.sbar,
        mode,
        None,
        None,
        &HeteroLassoConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let path = cfg.out_dir.join("wald_path.json");
    write_json(&path, &meta, &result)?;
    Ok(vec![path])
}

/// Top-level entry: run and report, returning the process exit code.
pub fn run_reporting(cfg: &RunConfig) -> i32 {
    match run(cfg) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            let report = ErrorReport {
                error: e,
                command: cfg.command.label().to_string(),
                config_hash: cfg.hash(),
            };
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(
                stdout,
                "{}",
                serde_json::to_string(&report).unwrap_or_else(|_| "{\"error\":\"unknown\"}".into())
            );
            1
        }
    }
}
