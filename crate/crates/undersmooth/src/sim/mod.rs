//! Monte Carlo harness: data-generating process, signal calibration,
//! estimator battery, and coverage/length reporting.

mod battery;
mod dgp;
mod report;

pub use battery::{run_battery, BatteryConfig, EstimatorKind, FunctionalKind};
pub use dgp::{calibrate_c25, draw_dataset, draw_latent_prefix, true_targets, Calibration, SimTruth, TrueTargets};
pub use report::{MetricRow, ReportMeta, SimReport, TuPathRow};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved RNG stream ids; replication r uses stream `REP_STREAM_BASE + r`.
pub(crate) const CALIBRATION_STREAM: u64 = 1;
pub(crate) const TARGET_STREAM: u64 = 2;
pub(crate) const FIXED_TAU_STREAM: u64 = 3;
pub(crate) const REP_STREAM_BASE: u64 = 1000;

/// Independent substream of a counter-based generator: reproducible per
/// replication index regardless of worker count.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One simulation design: interacted linear model with censored-normal
/// covariates, AR-correlated latent draws, and a signal scaled to a target
/// population R².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub n: usize,
    /// Total parameter count 2 + 2k (constant, k main effects, treatment,
    /// k interactions).
    pub p: usize,
    /// Sparsity pattern size; must be a positive multiple of 4.
    pub s0: usize,
    pub r2_target: f64,
    pub reps: usize,
    pub seed: u64,
    /// Margin of the targeting rule.
    pub nu: f64,
    /// Per-person targeting cost.
    pub cost: f64,
    pub alpha: f64,
    /// Redraw censoring thresholds each replication (default) or hold them
    /// fixed across replications.
    #[serde(default)]
    pub fixed_tau: bool,
}

impl SimDesign {
    /// Desk-scale defaults at the study's sample size.
    pub fn preset(p: usize, s0: usize) -> SimDesign {
        SimDesign {
            n: 400,
            p,
            s0,
            r2_target: 0.25,
            reps: 500,
            seed: 20_240_401,
            nu: 0.30,
            cost: 0.70,
            alpha: 0.05,
            fixed_tau: false,
        }
    }

    /// Number of covariates k = (p - 2) / 2.
    pub fn k(&self) -> usize {
        (self.p - 2) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 4 || self.p % 2 != 0 {
            return Err(Error::invalid("p", format!("{} must be even and >= 4", self.p)));
        }
        if self.s0 == 0 || self.s0 % 4 != 0 {
            return Err(Error::invalid(
                "s0",
                format!("{} must be a positive multiple of 4", self.s0),
            ));
        }
        if self.s0 / 2 > self.k() {
            return Err(Error::invalid(
                "s0",
                format!("support {} exceeds covariate count {}", self.s0 / 2, self.k()),
            ));
        }
        if !(0.0..1.0).contains(&self.r2_target) {
            return Err(Error::invalid("r2_target", "must be in [0,1)"));
        }
        if self.n < 20 {
            return Err(Error::invalid("n", "must be at least 20"));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) || self.cost <= 0.0 {
            return Err(Error::invalid("nu/cost", "need 0 < nu < 1 and cost > 0"));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::invalid("alpha", "must be in (0,1)"));
        }
        Ok(())
    }
}
