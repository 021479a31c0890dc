//! Scalar targets of the interacted linear model: a single coefficient, the
//! conditional treatment effect at a covariate point, and per-person profit
//! differentials of the thresholded targeting rule against the two blanket
//! strategies.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::selection::Slot;

/// Coefficients attached to an explicit slot list; slots absent from the
/// list read as exactly zero.
#[derive(Debug, Clone, Copy)]
pub struct CoefView<'a> {
    slots: &'a [Slot],
    values: &'a Array1<f64>,
}

impl<'a> CoefView<'a> {
    pub fn new(slots: &'a [Slot], values: &'a Array1<f64>) -> Self {
        debug_assert_eq!(slots.len(), values.len());
        Self { slots, values }
    }

    pub fn get(&self, slot: Slot) -> f64 {
        self.slots
            .iter()
            .position(|&s| s == slot)
            .map_or(0.0, |i| self.values[i])
    }

    pub fn slots(&self) -> &[Slot] {
        self.slots
    }

    /// Does the slot list carry this slot?
    pub fn has(&self, slot: Slot) -> bool {
        self.slots.contains(&slot)
    }
}

/// A scalar functional with a plug-in value and a delta-method gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    /// A single coefficient slot.
    Coefficient { slot: Slot },
    /// Treatment effect at a covariate point: d-coefficient + x*'(interactions).
    CateAt { x: Vec<f64> },
    /// Mean profit gain of targeting 1{nu·te(x) > cost} over treating no one.
    ProfitVsNone { nu: f64, cost: f64 },
    /// Mean profit gain of the same rule over treating everyone.
    ProfitVsAll { nu: f64, cost: f64 },
    /// Marker for the conservative heterogeneity test path; not interval-valued.
    HeterogeneityWald,
}

impl Functional {
    pub fn coefficient(slot: Slot) -> Self {
        Functional::Coefficient { slot }
    }

    pub fn cate_at(x: Vec<f64>) -> Self {
        Functional::CateAt { x }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Functional::Coefficient { .. } => "coefficient",
            Functional::CateAt { .. } => "cate",
            Functional::ProfitVsNone { .. } => "profit_vs_none",
            Functional::ProfitVsAll { .. } => "profit_vs_all",
            Functional::HeterogeneityWald => "heterogeneity_wald",
        }
    }

    fn validate_profit(nu: f64, cost: f64) -> Result<()> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::invalid("nu", format!("{nu} outside (0,1)")));
        }
        if cost <= 0.0 {
            return Err(Error::invalid("cost", format!("{cost} must be positive")));
        }
        Ok(())
    }

    /// Plug-in value at the given coefficients.
    pub fn value(&self, coef: CoefView<'_>, data: &Dataset) -> Result<f64> {
        match self {
            Functional::Coefficient { slot } => Ok(coef.get(*slot)),
            Functional::CateAt { x } => {
                if x.len() != data.k() {
                    return Err(Error::DimensionMismatch {
                        what: "cate point".into(),
                        expected: data.k(),
                        got: x.len(),
                    });
                }
                Ok(cate_value(&coef, x))
            }
            Functional::ProfitVsNone { nu, cost } => {
                Self::validate_profit(*nu, *cost)?;
                let te = individual_effects(&coef, data);
                Ok(profit_vs_none(&te, *nu, *cost))
            }
            Functional::ProfitVsAll { nu, cost } => {
                Self::validate_profit(*nu, *cost)?;
                let te = individual_effects(&coef, data);
                Ok(profit_vs_all(&te, *nu, *cost))
            }
            Functional::HeterogeneityWald => Err(Error::NotIntervalValued {
                kind: self.label().into(),
            }),
        }
    }

    /// Gradient restricted to the given slot list, evaluated at `coef`.
    /// Targeting indicators are held fixed through the kink.
    pub fn gradient_on(&self, slots: &[Slot], coef: CoefView<'_>, data: &Dataset) -> Result<Array1<f64>> {
        let mut g = Array1::zeros(slots.len());
        match self {
            Functional::Coefficient { slot } => {
                if let Some(i) = slots.iter().position(|s| s == slot) {
                    g[i] = 1.0;
                }
            }
            Functional::CateAt { x } => {
                for (i, s) in slots.iter().enumerate() {
                    g[i] = match s {
                        Slot::Treatment => 1.0,
                        Slot::Interaction(j) => x[*j],
                        _ => 0.0,
                    };
                }
            }
            Functional::ProfitVsNone { nu, cost } | Functional::ProfitVsAll { nu, cost } => {
                Self::validate_profit(*nu, *cost)?;
                let te = individual_effects(&coef, data);
                let shift = matches!(self, Functional::ProfitVsAll { .. });
                let n = data.n() as f64;
                let x = data.x();
                for i in 0..data.n() {
                    let active = nu * te[i] > *cost;
                    let w = if shift {
                        f64::from(active) - 1.0
                    } else {
                        f64::from(active)
                    };
                    if w == 0.0 {
                        continue;
                    }
                    for (c, s) in slots.iter().enumerate() {
                        match s {
                            Slot::Treatment => g[c] += w,
                            Slot::Interaction(j) => g[c] += w * x[[i, *j]],
                            _ => {}
                        }
                    }
                }
                g.mapv_inplace(|v| v * nu / n);
            }
            Functional::HeterogeneityWald => {
                return Err(Error::NotIntervalValued {
                    kind: self.label().into(),
                })
            }
        }
        Ok(g)
    }

    /// Slots whose coefficients enter the functional at all (used to flag
    /// extrapolated zeros when the model omits some of them).
    pub fn touches(&self, data: &Dataset) -> Vec<Slot> {
        match self {
            Functional::Coefficient { slot } => vec![*slot],
            Functional::CateAt { x } => {
                let mut v = vec![Slot::Treatment];
                v.extend(
                    x.iter()
                        .enumerate()
                        .filter(|(_, &xi)| xi != 0.0)
                        .map(|(j, _)| Slot::Interaction(j)),
                );
                v
            }
            Functional::ProfitVsNone { .. } | Functional::ProfitVsAll { .. } => {
                let mut v = vec![Slot::Treatment];
                v.extend((0..data.k()).map(Slot::Interaction));
                v
            }
            Functional::HeterogeneityWald => Vec::new(),
        }
    }
}

/// Treatment-effect coefficient at point x*: g + x*'z over interaction slots.
pub fn cate_value(coef: &CoefView<'_>, x_star: &[f64]) -> f64 {
    let mut v = coef.get(Slot::Treatment);
    for (i, s) in coef.slots().iter().enumerate() {
        if let Slot::Interaction(j) = s {
            v += coef.values[i] * x_star[*j];
        }
    }
    v
}

/// Per-row treatment effects te_i = g + x_i'z over the interaction slots.
pub fn individual_effects(coef: &CoefView<'_>, data: &Dataset) -> Array1<f64> {
    let n = data.n();
    let mut te = Array1::from_elem(n, coef.get(Slot::Treatment));
    let x = data.x();
    for (c, s) in coef.slots().iter().enumerate() {
        if let Slot::Interaction(j) = s {
            let z = coef.values[c];
            if z != 0.0 {
                for i in 0..n {
                    te[i] += z * x[[i, *j]];
                }
            }
        }
    }
    te
}

/// (nu/n) Σ_i 1{nu·te_i > cost} (te_i - cost/nu): always nonnegative.
pub fn profit_vs_none(te: &Array1<f64>, nu: f64, cost: f64) -> f64 {
    let n = te.len() as f64;
    let threshold = cost / nu;
    let s: f64 = te
        .iter()
        .filter(|&&t| nu * t > cost)
        .map(|&t| t - threshold)
        .sum();
    nu * s / n
}

/// (nu/n) Σ_i (1{nu·te_i > cost} - 1)(te_i - cost/nu).
pub fn profit_vs_all(te: &Array1<f64>, nu: f64, cost: f64) -> f64 {
    let n = te.len() as f64;
    let threshold = cost / nu;
    let s: f64 = te
        .iter()
        .map(|&t| {
            let ind = f64::from(nu * t > cost);
            (ind - 1.0) * (t - threshold)
        })
        .sum();
    nu * s / n
}
