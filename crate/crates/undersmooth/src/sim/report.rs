//! Aggregation of replication outcomes into the coverage/length report, and
//! its CSV projections.

use serde::{Deserialize, Serialize};

use super::battery::{BatteryConfig, EstimatorKind, FunctionalKind, RepOutcome};
use super::dgp::{Calibration, TrueTargets};
use super::SimDesign;
use crate::io::format_float;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub design: SimDesign,
    pub calibration: Calibration,
    pub targets: TrueTargets,
    pub estimators: Vec<String>,
    pub sbar_max: usize,
    pub reps_completed: usize,
    pub reps_failed: usize,
    pub failures: Vec<String>,
    /// Wall-clock time; not serialized, so identical runs produce identical
    /// artifacts.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

/// One estimator × functional row. Point metrics are absent for estimators
/// without a point estimate (the undersmoothing rows) or skipped estimators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub estimator: String,
    pub functional: String,
    pub bias: Option<f64>,
    pub std_dev: Option<f64>,
    pub rmse: Option<f64>,
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    pub mean_length: Option<f64>,
    pub n_reps: usize,
}

/// Coverage and mean length along the undersmoothing path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuPathRow {
    pub functional: String,
    pub sbar: usize,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_length: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub meta: ReportMeta,
    pub rows: Vec<MetricRow>,
    pub tu_path: Vec<TuPathRow>,
}

fn coverage_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub(crate) fn aggregate(
    cfg: &BatteryConfig,
    calibration: &Calibration,
    targets: &TrueTargets,
    outcomes: &[RepOutcome],
) -> SimReport {
    let ok: Vec<&RepOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let failures: Vec<String> = outcomes
        .iter()
        .filter_map(|o| o.error.clone())
        .take(50)
        .collect();

    let mut rows = Vec::new();
    for kind in &cfg.estimators {
        if *kind == EstimatorKind::Tu {
            continue; // handled through the path aggregates below
        }
        for fk in FunctionalKind::all_kinds() {
            let truth = fk.target(targets);
            let mut estimates = Vec::new();
            let mut covered = 0usize;
            let mut total_len = 0.0;
            for o in &ok {
                for (ek, ofk, p) in &o.points {
                    if ek == kind && ofk == &fk {
                        estimates.push(p.estimate);
                        if p.lower <= truth && truth <= p.upper {
                            covered += 1;
                        }
                        total_len += p.upper - p.lower;
                    }
                }
            }
            let m = estimates.len();
            if m == 0 {
                rows.push(MetricRow {
                    estimator: kind.label().to_string(),
                    functional: fk.label().to_string(),
                    bias: None,
                    std_dev: None,
                    rmse: None,
                    coverage: None,
                    coverage_se: None,
                    mean_length: None,
                    n_reps: 0,
                });
                continue;
            }
            let mf = m as f64;
            let mean = estimates.iter().sum::<f64>() / mf;
            let bias = mean - truth;
            // population variance so that rmse² = bias² + sd² exactly
            let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / mf;
            let rmse = estimates
                .iter()
                .map(|e| (e - truth) * (e - truth))
                .sum::<f64>()
                / mf;
            let cov = covered as f64 / mf;
            rows.push(MetricRow {
                estimator: kind.label().to_string(),
                functional: fk.label().to_string(),
                bias: Some(bias),
                std_dev: Some(var.sqrt()),
                rmse: Some(rmse.sqrt()),
                coverage: Some(cov),
                coverage_se: Some(coverage_se(cov, m)),
                mean_length: Some(total_len / mf),
                n_reps: m,
            });
        }
    }

    // undersmoothing path aggregates; the headline rows get budget 1 and the
    // largest budget
    let mut tu_path = Vec::new();
    if cfg.estimators.contains(&EstimatorKind::Tu) {
        for fk in FunctionalKind::all_kinds() {
            let truth = fk.target(targets);
            for s in 0..=cfg.sbar_max {
                let mut covered = 0usize;
                let mut total_len = 0.0;
                let mut m = 0usize;
                for o in &ok {
                    for (ofk, per_sbar) in &o.tu_paths {
                        if ofk != &fk {
                            continue;
                        }
                        let (lo, up) = per_sbar[s.min(per_sbar.len() - 1)];
                        if lo <= truth && truth <= up {
                            covered += 1;
                        }
                        total_len += up - lo;
                        m += 1;
                    }
                }
                if m == 0 {
                    continue;
                }
                let cov = covered as f64 / m as f64;
                tu_path.push(TuPathRow {
                    functional: fk.label().to_string(),
                    sbar: s,
                    coverage: cov,
                    coverage_se: coverage_se(cov, m),
                    mean_length: total_len / m as f64,
                    n_reps: m,
                });
            }
            for s in [1, cfg.sbar_max] {
                if let Some(row) = tu_path
                    .iter()
                    .find(|r| r.functional == fk.label() && r.sbar == s)
                {
                    rows.push(MetricRow {
                        estimator: format!("tu({s})"),
                        functional: fk.label().to_string(),
                        bias: None,
                        std_dev: None,
                        rmse: None,
                        coverage: Some(row.coverage),
                        coverage_se: Some(row.coverage_se),
                        mean_length: Some(row.mean_length),
                        n_reps: row.n_reps,
                    });
                }
            }
        }
    }

    SimReport {
        meta: ReportMeta {
            design: cfg.design.clone(),
            calibration: *calibration,
            targets: *targets,
            estimators: cfg.estimators.iter().map(|e| e.label().to_string()).collect(),
            sbar_max: cfg.sbar_max,
            reps_completed: ok.len(),
            reps_failed: outcomes.len() - ok.len(),
            failures,
            runtime_seconds: 0.0,
        },
        rows,
        tu_path,
    }
}

impl SimReport {
    /// Look up a headline row.
    pub fn row(&self, estimator: &str, functional: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.functional == functional)
    }

    /// Path row for a functional at a budget.
    pub fn path_row(&self, functional: &str, sbar: usize) -> Option<&TuPathRow> {
        self.tu_path
            .iter()
            .find(|r| r.functional == functional && r.sbar == sbar)
    }

    /// Long-format metric table: one row per estimator × functional × metric.
    pub fn metric_records(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        let fmt = |v: Option<f64>| v.map_or(String::new(), format_float);
        for r in &self.rows {
            let metrics: [(&str, Option<f64>); 6] = [
                ("bias", r.bias),
                ("std_dev", r.std_dev),
                ("rmse", r.rmse),
                ("coverage", r.coverage),
                ("coverage_se", r.coverage_se),
                ("mean_length", r.mean_length),
            ];
            for (name, value) in metrics {
                out.push(vec![
                    r.estimator.clone(),
                    r.functional.clone(),
                    name.to_string(),
                    fmt(value),
                ]);
            }
        }
        out
    }

    /// Path table: one row per functional × budget step.
    pub fn path_records(&self) -> Vec<Vec<String>> {
        self.tu_path
            .iter()
            .map(|r| {
                vec![
                    r.functional.clone(),
                    r.sbar.to_string(),
                    format_float(r.coverage),
                    format_float(r.coverage_se),
                    format_float(r.mean_length),
                ]
            })
            .collect()
    }
}
