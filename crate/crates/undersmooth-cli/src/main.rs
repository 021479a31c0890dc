use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use undersmooth::io::CsvSchema;
use undersmooth::tu::CandidateMode;
use undersmooth_cli::config::{
    AnalyzeConfig, CommandConfig, ExpandConfig, ExpandMethod, OutputFormat, RunConfig,
    SimulateConfig, TestHetConfig,
};
use undersmooth_cli::run_reporting;

/// Sparsity-based model selection with selection-mistake-robust confidence
/// sets, plus a Monte Carlo harness for coverage studies.
#[derive(Parser, Debug)]
#[command(name = "undersmooth", version, about)]
struct Cli {
    /// Configuration file (TOML or JSON); flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Mistake budget for the greedy search.
    #[arg(long, global = true)]
    sbar: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Replications (simulate).
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Option<CliCommand>,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Robust confidence interval for a functional of an ingested dataset.
    Analyze {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Outcome column name.
        #[arg(long)]
        outcome: Option<String>,
        /// Treatment column name.
        #[arg(long)]
        treatment: Option<String>,
        /// Functional description as inline JSON, e.g.
        /// '{"kind":"cate_at","x":[0.5,0.5]}'.
        #[arg(long)]
        functional: Option<String>,
        /// Use the sample-split variant.
        #[arg(long)]
        split: bool,
        /// Add candidates slot-by-slot instead of as covariate pairs.
        #[arg(long)]
        single_slots: bool,
    },
    /// Monte Carlo coverage study.
    Simulate {
        /// Design preset sim1..sim6.
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated estimator subset
        /// (true,all,lasso,post_lasso,lasso_cv,tu).
        #[arg(long)]
        estimators: Option<String>,
    },
    /// Expand dummy columns into interaction or sign-transform bases.
    Expand {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<ExpandMethod>,
        #[arg(long)]
        max_order: Option<usize>,
        #[arg(long)]
        min_size: Option<usize>,
        #[arg(long)]
        max_size: Option<usize>,
        /// Comma-separated dummy columns (default: all).
        #[arg(long)]
        columns: Option<String>,
    },
    /// Conservative heterogeneity test along the greedy path.
    TestHeterogeneity {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        outcome: Option<String>,
        #[arg(long)]
        treatment: Option<String>,
        /// Add candidates as covariate pairs instead of single slots.
        #[arg(long)]
        paired: bool,
    },
}

fn parse_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect()
}

fn build_config(cli: Cli) -> Result<RunConfig, String> {
    let mut cfg: Option<RunConfig> = match &cli.config {
        Some(path) => Some(RunConfig::load(path)?),
        None => None,
    };

    // command from flags overrides or supplies the config command
    if let Some(command) = cli.command {
        let command_cfg = match command {
            CliCommand::Analyze {
                input,
                outcome,
                treatment,
                functional,
                split,
                single_slots,
            } => {
                let base = cfg.as_ref().and_then(|c| match &c.command {
                    CommandConfig::Analyze(a) => Some(a.clone()),
                    _ => None,
                });
                let functional = match functional {
                    Some(text) => serde_json::from_str(&text)
                        .map_err(|e| format!("functional parse error: {e}"))?,
                    None => base
                        .as_ref()
                        .map(|a| a.functional.clone())
                        .ok_or("analyze needs --functional or a config file")?,
                };
                let input = input
                    .or_else(|| base.as_ref().map(|a| a.input.clone()))
                    .ok_or("analyze needs --input")?;
                let schema = match (&outcome, &base) {
                    (Some(y), _) => CsvSchema {
                        outcome: y.clone(),
                        treatment: treatment.clone(),
                        covariates: None,
                    },
                    (None, Some(b)) => b.schema.clone(),
                    (None, None) => return Err("analyze needs --outcome".into()),
                };
                let candidate_mode = if single_slots {
                    Some(CandidateMode::Single)
                } else {
                    base.as_ref().and_then(|b| b.candidate_mode)
                };
                CommandConfig::Analyze(AnalyzeConfig {
                    input,
                    schema,
                    functional,
                    candidate_mode,
                    split: split || base.map(|b| b.split).unwrap_or(false),
                })
            }
            CliCommand::Simulate { preset, estimators } => {
                let base = cfg.as_ref().and_then(|c| match &c.command {
                    CommandConfig::Simulate(s) => Some(s.clone()),
                    _ => None,
                });
                let estimators = match estimators {
                    Some(list) => Some(
                        parse_list(&list)
                            .iter()
                            .map(|name| {
                                serde_json::from_value(serde_json::Value::String(name.clone()))
                                    .map_err(|_| format!("unknown estimator {name:?}"))
                            })
                            .collect::<Result<Vec<_>, _>>()?,
                    ),
                    None => base.as_ref().and_then(|b| b.estimators.clone()),
                };
                CommandConfig::Simulate(SimulateConfig {
                    preset: preset.or_else(|| base.as_ref().and_then(|b| b.preset.clone())),
                    design: base.and_then(|b| b.design),
                    estimators,
                })
            }
            CliCommand::Expand {
                input,
                method,
                max_order,
                min_size,
                max_size,
                columns,
            } => {
                let base = cfg.as_ref().and_then(|c| match &c.command {
                    CommandConfig::Expand(e) => Some(e.clone()),
                    _ => None,
                });
                CommandConfig::Expand(ExpandConfig {
                    input: input
                        .or_else(|| base.as_ref().map(|b| b.input.clone()))
                        .ok_or("expand needs --input")?,
                    columns: columns
                        .map(|c| parse_list(&c))
                        .or_else(|| base.as_ref().and_then(|b| b.columns.clone())),
                    method: method
                        .or_else(|| base.as_ref().map(|b| b.method))
                        .ok_or("expand needs --method")?,
                    max_order: max_order.or_else(|| base.as_ref().and_then(|b| b.max_order)),
                    min_size: min_size.or_else(|| base.as_ref().and_then(|b| b.min_size)),
                    max_size: max_size.or_else(|| base.as_ref().and_then(|b| b.max_size)),
                    subset_cap: base.and_then(|b| b.subset_cap),
                })
            }
            CliCommand::TestHeterogeneity {
                input,
                outcome,
                treatment,
                paired,
            } => {
                let base = cfg.as_ref().and_then(|c| match &c.command {
                    CommandConfig::TestHeterogeneity(t) => Some(t.clone()),
                    _ => None,
                });
                let schema = match (&outcome, &base) {
                    (Some(y), _) => CsvSchema {
                        outcome: y.clone(),
                        treatment: treatment.clone(),
                        covariates: None,
                    },
                    (None, Some(b)) => b.schema.clone(),
                    (None, None) => return Err("test-heterogeneity needs --outcome".into()),
                };
                CommandConfig::TestHeterogeneity(TestHetConfig {
                    input: input
                        .or_else(|| base.as_ref().map(|b| b.input.clone()))
                        .ok_or("test-heterogeneity needs --input")?,
                    schema,
                    candidate_mode: if paired {
                        Some(CandidateMode::Paired)
                    } else {
                        base.and_then(|b| b.candidate_mode)
                    },
                })
            }
        };
        match cfg.as_mut() {
            Some(c) => c.command = command_cfg,
            None => {
                cfg = Some(RunConfig {
                    seed: 0,
                    alpha: 0.05,
                    sbar: 10,
                    threads: None,
                    out_dir: PathBuf::from("out"),
                    format: OutputFormat::Both,
                    command: command_cfg,
                })
            }
        }
    }

    let mut cfg = cfg.ok_or("no subcommand and no config file given")?;

    // flag overrides win over file values
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(sbar) = cli.sbar {
        cfg.sbar = sbar;
    }
    if let Some(alpha) = cli.alpha {
        cfg.alpha = alpha;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = Some(threads);
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    if let Some(reps) = cli.reps {
        if let CommandConfig::Simulate(s) = &mut cfg.command {
            match (&mut s.design, &s.preset) {
                (Some(d), _) => d.reps = reps,
                (None, Some(name)) => {
                    let mut d = undersmooth_cli::config::preset_design(name)
                        .ok_or_else(|| format!("unknown preset {name:?}"))?;
                    d.reps = reps;
                    s.design = Some(d);
                    s.preset = None;
                }
                (None, None) => return Err("--reps needs a simulate design".into()),
            }
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match build_config(cli) {
        Ok(cfg) => ExitCode::from(run_reporting(&cfg) as u8),
        Err(e) => {
            println!("{}", serde_json::json!({ "error": e }));
            ExitCode::from(2)
        }
    }
}
