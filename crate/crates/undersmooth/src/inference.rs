//! Per-model estimation and confidence intervals: OLS on a fixed slot set,
//! White's heteroskedasticity-consistent covariance (HC0, no small-sample
//! adjustment), delta-method intervals for functionals, and Wald tests.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::functionals::{CoefView, Functional};
use crate::linalg::{self, hc0_covariance};
use crate::selection::{HetModelSpec, Slot};
use crate::stats;

const RANK_TOL: f64 = 1e-10;

/// Estimates and sandwich covariance for one model.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: HetModelSpec,
    pub slots: Vec<Slot>,
    pub coefficients: Array1<f64>,
    pub covariance: Array2<f64>,
    pub residuals: Array1<f64>,
    pub n_used: usize,
    /// Slots zeroed out for rank deficiency, reported so functionals that
    /// need them can fail loudly.
    pub dropped: Vec<Slot>,
}

impl ModelFit {
    pub fn coef_view(&self) -> CoefView<'_> {
        CoefView::new(&self.slots, &self.coefficients)
    }
}

/// A per-model confidence interval for a scalar functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelInterval {
    pub model: HetModelSpec,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    /// Set when the functional touches slots outside the model, whose
    /// coefficients were treated as exact zeros with zero variance.
    pub extrapolated_zero: bool,
}

impl ModelInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Design matrix in slot order [1, x_S, d, d·x_S].
pub fn design_matrix(data: &Dataset, model: &HetModelSpec) -> Result<Array2<f64>> {
    let slots = model.slots();
    let n = data.n();
    let needs_d = slots
        .iter()
        .any(|s| matches!(s, Slot::Treatment | Slot::Interaction(_)));
    if needs_d && data.treatment().is_none() {
        return Err(Error::MissingTreatment);
    }
    let mut x = Array2::zeros((n, slots.len()));
    for (c, slot) in slots.iter().enumerate() {
        match slot {
            Slot::Intercept => x.column_mut(c).fill(1.0),
            Slot::Base(j) => {
                check_cov(data, *j)?;
                x.column_mut(c).assign(&data.x().column(*j));
            }
            Slot::Treatment => x.column_mut(c).assign(data.treatment().unwrap()),
            Slot::Interaction(j) => {
                check_cov(data, *j)?;
                let d = data.treatment().unwrap();
                for i in 0..n {
                    x[[i, c]] = d[i] * data.x()[[i, *j]];
                }
            }
        }
    }
    Ok(x)
}

fn check_cov(data: &Dataset, j: usize) -> Result<()> {
    if j >= data.k() {
        return Err(Error::invalid(
            "model",
            format!("covariate index {j} out of range for k={}", data.k()),
        ));
    }
    Ok(())
}

/// OLS of y on the model's slots with an HC0 sandwich covariance
/// (X'X)⁻¹ X' diag(e²) X (X'X)⁻¹. Rank-deficient slots are dropped at
/// tolerance 1e-10 and reported in the fit.
pub fn ols_hc_fit(data: &Dataset, model: &HetModelSpec) -> Result<ModelFit> {
    let slots = model.slots();
    let n = data.n();
    if slots.len() >= n {
        return Err(Error::TooManySlots {
            slots: slots.len(),
            n,
        });
    }
    let x = design_matrix(data, model)?;
    let (fit, qr) = linalg::ols(&x, data.y(), RANK_TOL);
    let covariance = hc0_covariance(&x, &qr, fit.rank, &fit.residuals);
    let dropped = fit.dropped.iter().map(|&c| slots[c]).collect();
    Ok(ModelFit {
        model: model.clone(),
        slots,
        coefficients: fit.coefficients,
        covariance,
        residuals: fit.residuals,
        n_used: n,
        dropped,
    })
}

/// Sandwich covariance for externally supplied coefficients (e.g. penalized
/// estimates): residuals are recomputed at those coefficients and plugged
/// into the HC0 form on the model's design.
pub fn fit_with_coefficients(
    data: &Dataset,
    model: &HetModelSpec,
    coefficients: Array1<f64>,
) -> Result<ModelFit> {
    let slots = model.slots();
    let n = data.n();
    if slots.len() >= n {
        return Err(Error::TooManySlots {
            slots: slots.len(),
            n,
        });
    }
    if coefficients.len() != slots.len() {
        return Err(Error::DimensionMismatch {
            what: "slot coefficients".into(),
            expected: slots.len(),
            got: coefficients.len(),
        });
    }
    let x = design_matrix(data, model)?;
    let residuals = data.y() - &x.dot(&coefficients);
    let qr = linalg::PivotedQr::factor(&x);
    let rank = qr.rank(RANK_TOL);
    let covariance = hc0_covariance(&x, &qr, rank, &residuals);
    let dropped = qr.perm()[rank..].iter().map(|&c| slots[c]).collect();
    Ok(ModelFit {
        model: model.clone(),
        slots,
        coefficients,
        covariance,
        residuals,
        n_used: n,
        dropped,
    })
}

/// Delta-method interval: estimate ± z_{1-alpha/2} sqrt(g'Vg) with the
/// gradient restricted to the model's slots. Slots outside the model
/// contribute coefficient zero; slots dropped for rank deficiency are an
/// error if the functional needs them.
pub fn functional_interval(
    fit: &ModelFit,
    data: &Dataset,
    f: &Functional,
    alpha: f64,
) -> Result<ModelInterval> {
    let touched = f.touches(data);
    for slot in &touched {
        if fit.dropped.contains(slot) {
            return Err(Error::DroppedSlot {
                slot: slot.to_string(),
            });
        }
    }
    let coef = fit.coef_view();
    let estimate = f.value(coef, data)?;
    let g = f.gradient_on(&fit.slots, coef, data)?;
    let var = g.dot(&fit.covariance.dot(&g)).max(0.0);
    let std_error = var.sqrt();
    let z = stats::z_critical(alpha)?;
    let extrapolated_zero = touched.iter().any(|s| !fit.model.contains(*s));
    Ok(ModelInterval {
        model: fit.model.clone(),
        estimate,
        std_error,
        lower: estimate - z * std_error,
        upper: estimate + z * std_error,
        alpha,
        extrapolated_zero,
    })
}

/// Wald test output.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WaldTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// W = b' V⁻¹ b over the given slots, p = P(chi²_df > W). Slots must be in
/// the model and not dropped; a singular restricted covariance is an error.
pub fn wald_test(fit: &ModelFit, slots: &[Slot]) -> Result<WaldTest> {
    if slots.is_empty() {
        return Ok(WaldTest {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
        });
    }
    let mut idx = Vec::with_capacity(slots.len());
    for slot in slots {
        if fit.dropped.contains(slot) {
            return Err(Error::DroppedSlot {
                slot: slot.to_string(),
            });
        }
        let pos = fit
            .slots
            .iter()
            .position(|s| s == slot)
            .ok_or_else(|| Error::invalid("wald slots", format!("slot {slot} not in model")))?;
        idx.push(pos);
    }
    let m = idx.len();
    let mut v = Array2::zeros((m, m));
    let mut b = Array1::zeros(m);
    for (r, &ir) in idx.iter().enumerate() {
        b[r] = fit.coefficients[ir];
        for (c, &ic) in idx.iter().enumerate() {
            v[[r, c]] = fit.covariance[[ir, ic]];
        }
    }
    let z = linalg::solve_symmetric(&v, &b, RANK_TOL)?;
    let statistic = b.dot(&z).max(0.0);
    let p_value = stats::chi2_sf(statistic, m)?;
    Ok(WaldTest {
        statistic,
        df: m,
        p_value,
    })
}

/// Wald test of "no treatment-effect heterogeneity": all interaction slots
/// of the fitted model equal zero. Models without interaction slots return
/// the degenerate (0, 0, 1) result.
pub fn heterogeneity_wald(fit: &ModelFit) -> Result<WaldTest> {
    let slots: Vec<Slot> = fit
        .slots
        .iter()
        .copied()
        .filter(|s| matches!(s, Slot::Interaction(_)))
        .collect();
    wald_test(fit, &slots)
}
