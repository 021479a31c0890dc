//! The data-generating process: AR-correlated latent normals censored at
//! uniform thresholds, Bernoulli treatment, and a sparse interacted signal
//! with alternating-sign strong and weak coefficient blocks, scaled so the
//! population R² hits its target.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimDesign;
use crate::dataset::Dataset;
use crate::error::Result;

const AR_COEFF: f64 = 0.8;
const TAU_MAX: f64 = 1.28;

/// True model coefficients. The two covariate blocks of size s0/4 hold the
/// "strong" and "weak" entries; signs alternate with column index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTruth {
    pub alpha0: f64,
    pub beta0: Vec<f64>,
    pub gamma0: f64,
    pub zeta0: Vec<f64>,
    pub c25: f64,
}

impl SimTruth {
    /// Coefficients at unit scale (c = 1).
    pub fn unit(design: &SimDesign) -> SimTruth {
        let k = design.k();
        let s0 = design.s0 as f64;
        let n = design.n as f64;
        let quarter = design.s0 / 4;
        let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };

        let mut beta0 = vec![0.0; k];
        let mut zeta0 = vec![0.0; k];
        for j in 0..quarter {
            beta0[j] = 2.0 / s0.sqrt() * sign(j);
            zeta0[j] = 4.0 / (n * s0).sqrt() * sign(j);
        }
        for j in quarter..2 * quarter {
            beta0[j] = 2.0 / (n * s0).sqrt() * sign(j);
            zeta0[j] = 4.0 / s0.sqrt() * sign(j);
        }
        SimTruth {
            alpha0: 1.0 / s0.sqrt(),
            beta0,
            gamma0: 1.0 / (2.0 * s0.sqrt()),
            zeta0,
            c25: 1.0,
        }
    }

    /// Scale every coefficient by c.
    pub fn scaled(&self, c: f64) -> SimTruth {
        SimTruth {
            alpha0: c * self.alpha0,
            beta0: self.beta0.iter().map(|b| c * b).collect(),
            gamma0: c * self.gamma0,
            zeta0: self.zeta0.iter().map(|z| c * z).collect(),
            c25: c * self.c25,
        }
    }

    /// Indices of nonzero covariate coefficients (same for both blocks).
    pub fn support(&self) -> Vec<usize> {
        (0..self.beta0.len())
            .filter(|&j| self.beta0[j] != 0.0 || self.zeta0[j] != 0.0)
            .collect()
    }
}

/// Draw the AR(1) latent prefix w_0..w_{len-1}; the recursion induces
/// corr(w_a, w_b) = 0.8^{|a-b|} exactly.
pub fn draw_latent_prefix(rng: &mut ChaCha8Rng, len: usize, out: &mut [f64]) {
    let innovation = (1.0 - AR_COEFF * AR_COEFF).sqrt();
    let mut prev = 0.0;
    for (j, slot) in out.iter_mut().enumerate().take(len) {
        let eta: f64 = rng.sample(StandardNormal);
        prev = if j == 0 { eta } else { AR_COEFF * prev + innovation * eta };
        *slot = prev;
    }
}

fn censor(w: f64, tau: f64) -> f64 {
    if w >= tau {
        w - tau
    } else {
        0.0
    }
}

pub fn draw_tau(rng: &mut ChaCha8Rng, k: usize) -> Array1<f64> {
    Array1::from_shape_fn(k, |_| rng.random::<f64>() * TAU_MAX)
}

/// One replication's dataset. Draw order: thresholds (unless supplied), then
/// per row the latent normals, the treatment flip, and the outcome noise.
pub fn draw_dataset(
    design: &SimDesign,
    truth: &SimTruth,
    rng: &mut ChaCha8Rng,
    tau: Option<&Array1<f64>>,
) -> Result<Dataset> {
    let n = design.n;
    let k = design.k();
    let local_tau;
    let tau = match tau {
        Some(t) => t,
        None => {
            local_tau = draw_tau(rng, k);
            &local_tau
        }
    };
    let mut x = Array2::zeros((n, k));
    let mut y = Array1::zeros(n);
    let mut d = Array1::zeros(n);
    let mut w = vec![0.0; k];
    for i in 0..n {
        draw_latent_prefix(rng, k, &mut w);
        for j in 0..k {
            x[[i, j]] = censor(w[j], tau[j]);
        }
        let di = f64::from(rng.random::<f64>() < 0.5);
        let eps: f64 = rng.sample(StandardNormal);
        d[i] = di;
        let mut signal = truth.alpha0 + di * truth.gamma0;
        for (j, (&b, &z)) in truth.beta0.iter().zip(&truth.zeta0).enumerate() {
            if b != 0.0 || z != 0.0 {
                signal += (b + di * z) * x[[i, j]];
            }
        }
        y[i] = signal + eps;
    }
    Dataset::from_parts(y, x, Some(d))
}

/// Streaming mean/variance with a fourth central moment, for the calibration
/// oracle's standard error.
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    fn new() -> Self {
        Moments {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
            m3: 0.0,
            m4: 0.0,
        }
    }

    fn push(&mut self, v: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let delta = v - self.mean;
        let delta_n = delta / self.n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (self.n * self.n - 3.0 * self.n + 3.0)
            + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (self.n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    fn variance(&self) -> f64 {
        self.m2 / self.n
    }

    /// Asymptotic standard error of the variance estimate.
    fn variance_se(&self) -> f64 {
        let v = self.variance();
        let mu4 = self.m4 / self.n;
        ((mu4 - v * v).max(0.0) / self.n).sqrt()
    }
}

/// Calibration output: the scale constant plus the oracle's own estimate and
/// standard error of the unit-signal variance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Calibration {
    pub c: f64,
    pub unit_signal_variance: f64,
    pub unit_signal_variance_se: f64,
    pub draws: usize,
}

/// Monte Carlo estimate of the unit-coefficient signal variance, and the
/// scale c = sqrt((r2/(1-r2)) / Var_unit) that puts the population R² of the
/// outcome regression at its target (noise variance is 1). Thresholds are
/// redrawn every draw, i.e. the population is the joint law over thresholds
/// and latent normals.
pub fn calibrate_c25(design: &SimDesign, oracle_draws: usize, rng: &mut ChaCha8Rng) -> Calibration {
    let unit = SimTruth::unit(design);
    let active = design.s0 / 2; // only the leading block carries signal
    let mut w = vec![0.0; active];
    let mut moments = Moments::new();
    for _ in 0..oracle_draws {
        let mut signal = unit.alpha0;
        draw_latent_prefix(rng, active, &mut w);
        let di = f64::from(rng.random::<f64>() < 0.5);
        signal += di * unit.gamma0;
        for j in 0..active {
            let tau: f64 = rng.random::<f64>() * TAU_MAX;
            let x = censor(w[j], tau);
            signal += (unit.beta0[j] + di * unit.zeta0[j]) * x;
        }
        moments.push(signal);
    }
    let var = moments.variance();
    let c = if design.r2_target == 0.0 {
        0.0
    } else {
        (design.r2_target / (1.0 - design.r2_target) / var).sqrt()
    };
    Calibration {
        c,
        unit_signal_variance: var,
        unit_signal_variance_se: moments.variance_se(),
        draws: oracle_draws,
    }
}

/// The three scalar estimands of the study.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrueTargets {
    /// The first interaction coefficient.
    pub coefficient: f64,
    /// Treatment effect at x* = 0.5·1.
    pub cate: f64,
    /// Mean per-person profit gain of the targeting rule over treating no
    /// one, by Monte Carlo over the covariate law.
    pub profit: f64,
    pub profit_se: f64,
}

/// Closed forms where available; the profit target by Monte Carlo.
pub fn true_targets(
    design: &SimDesign,
    truth: &SimTruth,
    oracle_draws: usize,
    rng: &mut ChaCha8Rng,
) -> TrueTargets {
    let coefficient = truth.zeta0[0];
    let cate = truth.gamma0 + 0.5 * truth.zeta0.iter().sum::<f64>();

    let active = design.s0 / 2;
    let mut w = vec![0.0; active];
    let mut moments = Moments::new();
    for _ in 0..oracle_draws {
        draw_latent_prefix(rng, active, &mut w);
        let mut te = truth.gamma0;
        for j in 0..active {
            let tau: f64 = rng.random::<f64>() * TAU_MAX;
            te += truth.zeta0[j] * censor(w[j], tau);
        }
        let gain = if design.nu * te > design.cost {
            design.nu * te - design.cost
        } else {
            0.0
        };
        moments.push(gain);
    }
    TrueTargets {
        coefficient,
        cate,
        profit: moments.mean,
        profit_se: (moments.variance() / moments.n).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{substream_rng, CALIBRATION_STREAM};
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_coefficients_follow_the_block_pattern() {
        let design = SimDesign::preset(202, 4);
        let t = SimTruth::unit(&design);
        // s0 = 4: one strong beta, one weak beta, one weak zeta, one strong zeta
        assert_abs_diff_eq!(t.alpha0, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.beta0[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.beta0[1], -2.0 / (400.0f64 * 4.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.gamma0, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t.zeta0[0], 4.0 / (400.0f64 * 4.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.zeta0[1], -2.0, epsilon = 1e-15);
        assert!(t.beta0[2..].iter().all(|&b| b == 0.0));
        assert_eq!(t.support(), vec![0, 1]);
    }

    #[test]
    fn latent_autocorrelation_matches_ar_structure() {
        let mut rng = substream_rng(7, 10);
        let n = 100_000;
        let len = 5;
        let mut w = vec![0.0; len];
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            draw_latent_prefix(&mut rng, len, &mut w);
            rows.push(w.clone());
        }
        let corr = |a: usize, b: usize| {
            let ma: f64 = rows.iter().map(|r| r[a]).sum::<f64>() / n as f64;
            let mb: f64 = rows.iter().map(|r| r[b]).sum::<f64>() / n as f64;
            let mut num = 0.0;
            let mut va = 0.0;
            let mut vb = 0.0;
            for r in &rows {
                num += (r[a] - ma) * (r[b] - mb);
                va += (r[a] - ma).powi(2);
                vb += (r[b] - mb).powi(2);
            }
            num / (va.sqrt() * vb.sqrt())
        };
        assert_abs_diff_eq!(corr(0, 1), 0.8, epsilon = 0.01);
        assert_abs_diff_eq!(corr(1, 3), 0.64, epsilon = 0.01);
        assert_abs_diff_eq!(corr(0, 3), 0.512, epsilon = 0.01);
    }

    #[test]
    fn censored_zero_fraction_tracks_normal_cdf() {
        let design = SimDesign {
            n: 100_000,
            p: 12,
            s0: 4,
            ..SimDesign::preset(202, 4)
        };
        let truth = SimTruth::unit(&design).scaled(0.5);
        let mut rng = substream_rng(13, 42);
        let tau = draw_tau(&mut rng, design.k());
        let data = draw_dataset(&design, &truth, &mut rng, Some(&tau)).unwrap();
        for j in 0..design.k() {
            let zero_frac = data.x().column(j).iter().filter(|&&v| v == 0.0).count() as f64
                / design.n as f64;
            let expected = crate::stats::normal_cdf(tau[j]);
            assert!(expected > 0.49 && expected < 0.91);
            assert_abs_diff_eq!(zero_frac, expected, epsilon = 0.01);
        }
    }

    #[test]
    fn treatment_share_is_binomial() {
        let design = SimDesign::preset(202, 4);
        let truth = SimTruth::unit(&design);
        let mut rng = substream_rng(5, 77);
        let data = draw_dataset(&design, &truth, &mut rng, None).unwrap();
        let share = data.treatment().unwrap().sum() / design.n as f64;
        assert!((0.40..=0.60).contains(&share), "share {share}");
    }

    #[test]
    fn calibration_scale_law_and_zero_target() {
        let design = SimDesign::preset(202, 4);
        let mut rng = substream_rng(design.seed, CALIBRATION_STREAM);
        let cal = calibrate_c25(&design, 200_000, &mut rng);
        assert!(cal.c > 0.0);
        // doubling all coefficients quadruples the unit-signal variance, so
        // the returned scale halves
        let doubled = SimTruth::unit(&design).scaled(2.0);
        let mut w = vec![0.0; 2];
        let mut rng2 = substream_rng(design.seed, CALIBRATION_STREAM);
        let mut m = Moments::new();
        for _ in 0..200_000 {
            let mut s = doubled.alpha0;
            draw_latent_prefix(&mut rng2, 2, &mut w);
            let di = f64::from(rng2.random::<f64>() < 0.5);
            s += di * doubled.gamma0;
            for j in 0..2 {
                let tau: f64 = rng2.random::<f64>() * TAU_MAX;
                s += (doubled.beta0[j] + di * doubled.zeta0[j]) * censor(w[j], tau);
            }
            m.push(s);
        }
        let c_doubled = (design.r2_target / (1.0 - design.r2_target) / m.variance()).sqrt();
        assert_abs_diff_eq!(c_doubled, cal.c / 2.0, epsilon = 1e-3 * cal.c);

        let mut rng3 = substream_rng(1, 1);
        let zero = calibrate_c25(
            &SimDesign {
                r2_target: 0.0,
                ..design
            },
            10_000,
            &mut rng3,
        );
        assert_eq!(zero.c, 0.0);
    }

    #[test]
    fn calibrated_r2_hits_target_on_independent_seed() {
        let design = SimDesign::preset(202, 4);
        let mut rng = substream_rng(design.seed, CALIBRATION_STREAM);
        let cal = calibrate_c25(&design, 1_000_000, &mut rng);
        // independent draw: R² = c²V' / (c²V' + 1)
        let mut check_rng = substream_rng(design.seed.wrapping_add(999), 55);
        let cal2 = calibrate_c25(&design, 1_000_000, &mut check_rng);
        let r2 = cal.c * cal.c * cal2.unit_signal_variance
            / (cal.c * cal.c * cal2.unit_signal_variance + 1.0);
        assert!(
            (0.245..=0.255).contains(&r2),
            "independent-seed R² {r2} out of band"
        );
    }

    #[test]
    fn targets_closed_forms() {
        let design = SimDesign::preset(202, 4);
        let truth = SimTruth::unit(&design).scaled(1.3);
        let mut rng = substream_rng(3, 3);
        let t = true_targets(&design, &truth, 100_000, &mut rng);
        assert_abs_diff_eq!(t.coefficient, truth.zeta0[0], epsilon = 1e-15);
        let expect_cate = truth.gamma0 + 0.5 * (truth.zeta0[0] + truth.zeta0[1]);
        assert_abs_diff_eq!(t.cate, expect_cate, epsilon = 1e-12);
        assert!(t.profit >= 0.0);
    }

    #[test]
    fn profit_target_zero_when_rule_never_fires() {
        // scale gamma down so nu·te can never clear the cost
        let design = SimDesign::preset(202, 4);
        let truth = SimTruth::unit(&design).scaled(1e-6);
        let mut rng = substream_rng(4, 4);
        let t = true_targets(&design, &truth, 50_000, &mut rng);
        assert_eq!(t.profit, 0.0);
    }

    #[test]
    fn cate_at_origin_equals_main_effect() {
        let design = SimDesign::preset(202, 8);
        let truth = SimTruth::unit(&design).scaled(0.9);
        // x* = 0 reduces the effect to gamma0
        let zero_cate = truth.gamma0;
        assert_abs_diff_eq!(
            truth.gamma0 + 0.0 * truth.zeta0.iter().sum::<f64>(),
            zero_cate,
            epsilon = 1e-15
        );
    }
}
