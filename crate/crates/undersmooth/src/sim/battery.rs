//! The estimator battery: per replication, draw a dataset, run each
//! estimator, evaluate the three functionals, and aggregate coverage and
//! length metrics against the true targets.

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{calibrate_c25, draw_dataset, draw_tau, true_targets, SimTruth, TrueTargets};
use super::report::{aggregate, SimReport};
use super::{substream_rng, SimDesign, CALIBRATION_STREAM, FIXED_TAU_STREAM, REP_STREAM_BASE, TARGET_STREAM};
use crate::dataset::{Dataset, SupportSet};
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::inference::{fit_with_coefficients, functional_interval, ols_hc_fit, ModelFit};
use crate::lasso::{cv_lasso, hetero_lasso, FitResult, HeteroLassoConfig};
use crate::selection::{HetModelSpec, Slot};
use crate::tu::{tu_interval, TuConfig};

pub const ORACLE_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Infeasible OLS on the exact true support.
    True,
    /// OLS on every covariate; skipped when the parameter count reaches n.
    All,
    /// Arm-split heteroskedastic lasso coefficients with sandwich standard
    /// errors from the lasso residuals.
    Lasso,
    /// OLS refit on the lasso-selected model.
    PostLasso,
    /// Arm-split cross-validated lasso, standard errors from its residuals.
    LassoCv,
    /// Targeted undersmoothing paths off the post-lasso initial model.
    Tu,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::True => "true",
            EstimatorKind::All => "all",
            EstimatorKind::Lasso => "lasso",
            EstimatorKind::PostLasso => "post_lasso",
            EstimatorKind::LassoCv => "lasso_cv",
            EstimatorKind::Tu => "tu",
        }
    }

    pub fn all_kinds() -> Vec<EstimatorKind> {
        vec![
            EstimatorKind::True,
            EstimatorKind::All,
            EstimatorKind::Lasso,
            EstimatorKind::PostLasso,
            EstimatorKind::LassoCv,
            EstimatorKind::Tu,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// The first interaction coefficient.
    Coefficient,
    /// Treatment effect at x* = 0.5·1.
    TreatmentEffect,
    /// Profit differential of the targeting rule versus treating no one.
    Profit,
}

impl FunctionalKind {
    pub fn label(self) -> &'static str {
        match self {
            FunctionalKind::Coefficient => "coefficient",
            FunctionalKind::TreatmentEffect => "treatment_effect",
            FunctionalKind::Profit => "profit",
        }
    }

    pub fn all_kinds() -> [FunctionalKind; 3] {
        [
            FunctionalKind::Coefficient,
            FunctionalKind::TreatmentEffect,
            FunctionalKind::Profit,
        ]
    }

    fn build(self, design: &SimDesign) -> Functional {
        match self {
            FunctionalKind::Coefficient => Functional::coefficient(Slot::Interaction(0)),
            FunctionalKind::TreatmentEffect => Functional::cate_at(vec![0.5; design.k()]),
            FunctionalKind::Profit => Functional::ProfitVsNone {
                nu: design.nu,
                cost: design.cost,
            },
        }
    }

    pub fn target(self, targets: &TrueTargets) -> f64 {
        match self {
            FunctionalKind::Coefficient => targets.coefficient,
            FunctionalKind::TreatmentEffect => targets.cate,
            FunctionalKind::Profit => targets.profit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatteryConfig {
    pub design: SimDesign,
    pub estimators: Vec<EstimatorKind>,
    /// Largest mistake budget on the undersmoothing path.
    pub sbar_max: usize,
    pub selector: HeteroLassoConfig,
}

impl BatteryConfig {
    pub fn new(design: SimDesign) -> Self {
        BatteryConfig {
            design,
            estimators: EstimatorKind::all_kinds(),
            sbar_max: 10,
            selector: HeteroLassoConfig::default(),
        }
    }

    pub fn with_estimators(mut self, estimators: Vec<EstimatorKind>) -> Self {
        self.estimators = estimators;
        self
    }
}

/// One estimator's point interval for one functional.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointOutcome {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Everything a single replication contributes to the aggregates.
#[derive(Debug, Clone, Default)]
pub(crate) struct RepOutcome {
    /// (estimator, functional) -> interval; missing entries were skipped.
    pub points: Vec<(EstimatorKind, FunctionalKind, PointOutcome)>,
    /// Per functional: nested intervals for budgets 0..=sbar_max.
    pub tu_paths: Vec<(FunctionalKind, Vec<(f64, f64)>)>,
    pub nesting_ok: bool,
    pub error: Option<String>,
}

/// Map two arm-wise penalized fits onto the union model's slot coefficients:
/// control-arm values fill the base slots, treated-minus-control differences
/// fill the interaction slots.
fn arm_fits_to_slot_coefficients(
    model: &HetModelSpec,
    fit0: &FitResult,
    fit1: &FitResult,
) -> Array1<f64> {
    let slots = model.slots();
    let mut out = Array1::zeros(slots.len());
    for (c, slot) in slots.iter().enumerate() {
        out[c] = match slot {
            Slot::Intercept => fit0.intercept,
            Slot::Base(j) => fit0.coefficients[*j],
            Slot::Treatment => fit1.intercept - fit0.intercept,
            Slot::Interaction(j) => fit1.coefficients[*j] - fit0.coefficients[*j],
        };
    }
    out
}

fn eval_point(
    data: &Dataset,
    fit: &ModelFit,
    functionals: &[(FunctionalKind, Functional)],
    alpha: f64,
    kind: EstimatorKind,
    out: &mut RepOutcome,
) -> Result<()> {
    for (fk, f) in functionals {
        let iv = functional_interval(fit, data, f, alpha)?;
        out.points.push((
            kind,
            *fk,
            PointOutcome {
                estimate: iv.estimate,
                lower: iv.lower,
                upper: iv.upper,
            },
        ));
    }
    Ok(())
}

fn run_replication(
    cfg: &BatteryConfig,
    truth: &SimTruth,
    rep: usize,
    fixed_tau: Option<&Array1<f64>>,
) -> RepOutcome {
    let mut out = RepOutcome {
        nesting_ok: true,
        ..RepOutcome::default()
    };
    match replication_inner(cfg, truth, rep, fixed_tau, &mut out) {
        Ok(()) => out,
        Err(e) => {
            out.error = Some(format!("rep {rep}: {e}"));
            out
        }
    }
}

fn replication_inner(
    cfg: &BatteryConfig,
    truth: &SimTruth,
    rep: usize,
    fixed_tau: Option<&Array1<f64>>,
    out: &mut RepOutcome,
) -> Result<()> {
    let design = &cfg.design;
    let mut rng = substream_rng(design.seed, REP_STREAM_BASE + rep as u64);
    let data = draw_dataset(design, truth, &mut rng, fixed_tau)?;
    let cv_seed0: u64 = rand::Rng::random(&mut rng);
    let cv_seed1: u64 = rand::Rng::random(&mut rng);

    let alpha = design.alpha;
    let functionals: Vec<(FunctionalKind, Functional)> = FunctionalKind::all_kinds()
        .iter()
        .map(|fk| (*fk, fk.build(design)))
        .collect();

    let needs_selection = cfg.estimators.iter().any(|e| {
        matches!(
            e,
            EstimatorKind::Lasso | EstimatorKind::PostLasso | EstimatorKind::Tu
        )
    });
    let arm0_rows = data.arm_rows(0)?;
    let arm1_rows = data.arm_rows(1)?;
    let data0 = data.subset(&arm0_rows);
    let data1 = data.subset(&arm1_rows);

    // arm-split heteroskedastic lasso selection, shared by Lasso/PL/TU
    let selection = if needs_selection {
        let fit0 = hetero_lasso(data0.x(), data0.y(), &cfg.selector)?;
        let fit1 = hetero_lasso(data1.x(), data1.y(), &cfg.selector)?;
        let union = fit0.support.union(&fit1.support);
        Some((HetModelSpec::new(union.clone(), union), fit0, fit1))
    } else {
        None
    };

    for kind in &cfg.estimators {
        match kind {
            EstimatorKind::True => {
                let support: SupportSet = truth.support().into_iter().collect();
                let model = HetModelSpec::new(support.clone(), support);
                let fit = ols_hc_fit(&data, &model)?;
                eval_point(&data, &fit, &functionals, alpha, *kind, out)?;
            }
            EstimatorKind::All => {
                if design.p >= design.n {
                    continue; // infeasible, reported as missing
                }
                let model = HetModelSpec::saturated(design.k());
                let fit = ols_hc_fit(&data, &model)?;
                eval_point(&data, &fit, &functionals, alpha, *kind, out)?;
            }
            EstimatorKind::Lasso => {
                let (model, fit0, fit1) = selection.as_ref().expect("selection ran");
                let coeffs = arm_fits_to_slot_coefficients(model, fit0, fit1);
                let fit = fit_with_coefficients(&data, model, coeffs)?;
                eval_point(&data, &fit, &functionals, alpha, *kind, out)?;
            }
            EstimatorKind::PostLasso => {
                let (model, _, _) = selection.as_ref().expect("selection ran");
                let fit = ols_hc_fit(&data, model)?;
                eval_point(&data, &fit, &functionals, alpha, *kind, out)?;
            }
            EstimatorKind::LassoCv => {
                let cv0 = cv_lasso(data0.x(), data0.y(), 10, cv_seed0)?;
                let cv1 = cv_lasso(data1.x(), data1.y(), 10, cv_seed1)?;
                let union = cv0.fit.support.union(&cv1.fit.support);
                let model = HetModelSpec::new(union.clone(), union);
                if model.n_slots() >= design.n {
                    continue; // cross-validation picked an unusably dense model
                }
                let coeffs = arm_fits_to_slot_coefficients(&model, &cv0.fit, &cv1.fit);
                let fit = fit_with_coefficients(&data, &model, coeffs)?;
                eval_point(&data, &fit, &functionals, alpha, *kind, out)?;
            }
            EstimatorKind::Tu => {
                let (model, _, _) = selection.as_ref().expect("selection ran");
                let tu_cfg = TuConfig {
                    sbar: cfg.sbar_max,
                    alpha,
                    ..TuConfig::new(cfg.sbar_max, alpha)
                };
                for (fk, f) in &functionals {
                    let res = tu_interval(&data, f, &tu_cfg, Some(model.clone()))?;
                    for s in 1..res.per_sbar.len() {
                        let (lo_prev, up_prev) = res.per_sbar[s - 1];
                        let (lo, up) = res.per_sbar[s];
                        if lo > lo_prev || up < up_prev {
                            out.nesting_ok = false;
                        }
                    }
                    out.tu_paths.push((*fk, res.per_sbar.clone()));
                }
            }
        }
    }
    Ok(())
}

/// Run the battery: calibrate the signal scale, compute the true targets,
/// run all replications in parallel (one RNG substream each), and aggregate
/// in replication order so the report is identical for any worker count.
pub fn run_battery(cfg: &BatteryConfig) -> Result<SimReport> {
    let design = &cfg.design;
    design.validate()?;
    let start = std::time::Instant::now();

    let mut cal_rng = substream_rng(design.seed, CALIBRATION_STREAM);
    let calibration = calibrate_c25(design, ORACLE_DRAWS, &mut cal_rng);
    let truth = SimTruth::unit(design).scaled(calibration.c);
    let mut target_rng = substream_rng(design.seed, TARGET_STREAM);
    let targets = true_targets(design, &truth, ORACLE_DRAWS, &mut target_rng);

    let fixed_tau = if design.fixed_tau {
        let mut tau_rng = substream_rng(design.seed, FIXED_TAU_STREAM);
        Some(draw_tau(&mut tau_rng, design.k()))
    } else {
        None
    };

    let outcomes: Vec<RepOutcome> = (0..design.reps)
        .into_par_iter()
        .map(|rep| run_replication(cfg, &truth, rep, fixed_tau.as_ref()))
        .collect();

    let nesting_violations = outcomes.iter().filter(|o| !o.nesting_ok).count();
    if nesting_violations > 0 {
        return Err(Error::invalid(
            "tu",
            format!("{nesting_violations} replications violated interval nesting"),
        ));
    }

    let mut report = aggregate(cfg, &calibration, &targets, &outcomes);
    report.meta.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_design() -> SimDesign {
        SimDesign {
            n: 120,
            p: 22,
            s0: 4,
            r2_target: 0.25,
            reps: 4,
            seed: 99,
            nu: 0.3,
            cost: 0.7,
            alpha: 0.05,
            fixed_tau: false,
        }
    }

    #[test]
    fn battery_runs_and_reports_all_estimators() {
        let mut cfg = BatteryConfig::new(tiny_design());
        cfg.sbar_max = 2;
        let report = run_battery(&cfg).unwrap();
        assert_eq!(report.meta.reps_failed, 0);
        let estimators: std::collections::HashSet<&str> =
            report.rows.iter().map(|r| r.estimator.as_str()).collect();
        for label in ["true", "all", "lasso", "post_lasso", "lasso_cv", "tu(1)", "tu(2)"] {
            assert!(estimators.contains(label), "missing {label}");
        }
        // coverage numbers are probabilities with binomial standard errors
        for row in &report.rows {
            if let Some(cov) = row.coverage {
                assert!((0.0..=1.0).contains(&cov));
                let se = row.coverage_se.unwrap();
                let expect = (cov * (1.0 - cov) / row.n_reps as f64).sqrt();
                assert!((se - expect).abs() < 1e-12);
            }
        }
        // rmse² = bias² + sd² with the population-variance convention
        for row in &report.rows {
            if let (Some(b), Some(s), Some(r)) = (row.bias, row.std_dev, row.rmse) {
                assert!((r * r - (b * b + s * s)).abs() < 1e-6, "rmse identity violated");
            }
        }
        assert_eq!(report.tu_path.len(), 3 * 3); // 3 functionals × budgets 0..=2
    }

    #[test]
    fn replication_failures_are_reported_not_silent() {
        // tiny n: some replications draw a treatment arm below the
        // selector's minimum and must be logged and excluded
        let design = SimDesign {
            n: 24,
            p: 10,
            s0: 4,
            r2_target: 0.25,
            reps: 20,
            seed: 3,
            nu: 0.3,
            cost: 0.7,
            alpha: 0.05,
            fixed_tau: false,
        };
        let cfg = BatteryConfig::new(design)
            .with_estimators(vec![EstimatorKind::PostLasso]);
        let report = run_battery(&cfg).unwrap();
        assert!(report.meta.reps_failed > 0, "expected some failed replications");
        assert_eq!(report.meta.failures.len(), report.meta.reps_failed);
        let row = report.row("post_lasso", "coefficient").unwrap();
        assert_eq!(row.n_reps, report.meta.reps_completed);
        assert!(row.n_reps < 20);
    }

    #[test]
    fn report_identical_across_thread_counts() {
        let mut cfg = BatteryConfig::new(tiny_design());
        cfg.sbar_max = 1;
        cfg.estimators = vec![EstimatorKind::True, EstimatorKind::PostLasso, EstimatorKind::Tu];
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = pool1.install(|| run_battery(&cfg)).unwrap();
        let r4 = pool4.install(|| run_battery(&cfg)).unwrap();
        let s1 = serde_json::to_string(&r1).unwrap();
        let s4 = serde_json::to_string(&r4).unwrap();
        assert_eq!(s1, s4);
    }

    #[test]
    fn tu_coverage_nondecreasing_in_budget() {
        let mut cfg = BatteryConfig::new(tiny_design());
        cfg.design.reps = 6;
        cfg.sbar_max = 3;
        cfg.estimators = vec![EstimatorKind::Tu];
        let report = run_battery(&cfg).unwrap();
        for fk in FunctionalKind::all_kinds() {
            let mut rows: Vec<&crate::sim::TuPathRow> = report
                .tu_path
                .iter()
                .filter(|r| r.functional == fk.label())
                .collect();
            rows.sort_by_key(|r| r.sbar);
            for w in rows.windows(2) {
                assert!(
                    w[1].coverage >= w[0].coverage - 1e-12,
                    "coverage dropped from {} to {}",
                    w[0].coverage,
                    w[1].coverage
                );
            }
        }
    }
}
