//! Model slots for the heterogeneous-effects linear model
//! y = a + x'b + d·g + (d·x)'z + e, and the arm-split initial selector.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SupportSet};
use crate::error::{Error, Result};
use crate::lasso::{hetero_lasso, HeteroLassoConfig};

/// One coefficient slot of the interacted linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    /// The constant term.
    Intercept,
    /// Main effect of covariate `j` (a `b` coefficient).
    Base(usize),
    /// Main treatment effect.
    Treatment,
    /// Treatment interaction with covariate `j` (a `z` coefficient).
    Interaction(usize),
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Slot::Intercept => write!(f, "const"),
            Slot::Base(j) => write!(f, "x[{j}]"),
            Slot::Treatment => write!(f, "d"),
            Slot::Interaction(j) => write!(f, "d*x[{j}]"),
        }
    }
}

/// A structured model: which covariates enter as main effects and which as
/// treatment interactions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HetModelSpec {
    pub base_indices: SupportSet,
    pub interact_indices: SupportSet,
    pub includes_constant: bool,
    pub includes_treatment: bool,
}

impl HetModelSpec {
    pub fn new(base: SupportSet, interact: SupportSet) -> Self {
        Self {
            base_indices: base,
            interact_indices: interact,
            includes_constant: true,
            includes_treatment: true,
        }
    }

    /// Model with no covariates, just constant and main treatment effect.
    pub fn minimal() -> Self {
        Self::new(SupportSet::empty(), SupportSet::empty())
    }

    /// All covariates enter both parts.
    pub fn saturated(k: usize) -> Self {
        let all: SupportSet = (0..k).collect();
        Self::new(all.clone(), all)
    }

    /// Design-matrix slot order: [const, x_base, d, d·x_interact].
    pub fn slots(&self) -> Vec<Slot> {
        let mut out = Vec::with_capacity(self.n_slots());
        if self.includes_constant {
            out.push(Slot::Intercept);
        }
        out.extend(self.base_indices.iter().map(Slot::Base));
        if self.includes_treatment {
            out.push(Slot::Treatment);
        }
        out.extend(self.interact_indices.iter().map(Slot::Interaction));
        out
    }

    pub fn n_slots(&self) -> usize {
        usize::from(self.includes_constant)
            + self.base_indices.len()
            + usize::from(self.includes_treatment)
            + self.interact_indices.len()
    }

    pub fn contains(&self, slot: Slot) -> bool {
        match slot {
            Slot::Intercept => self.includes_constant,
            Slot::Treatment => self.includes_treatment,
            Slot::Base(j) => self.base_indices.contains(j),
            Slot::Interaction(j) => self.interact_indices.contains(j),
        }
    }

    /// New model with both slots of covariate `j` present.
    pub fn with_pair(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.base_indices.insert(j);
        out.interact_indices.insert(j);
        out
    }

    /// New model with a single extra slot.
    pub fn with_slot(&self, slot: Slot) -> Self {
        let mut out = self.clone();
        match slot {
            Slot::Intercept => out.includes_constant = true,
            Slot::Treatment => out.includes_treatment = true,
            Slot::Base(j) => out.base_indices.insert(j),
            Slot::Interaction(j) => out.interact_indices.insert(j),
        }
        out
    }
}

/// Minimum observations required per treatment arm.
pub const MIN_ARM_SIZE: usize = 10;

/// Arm-split initial model selection: fit the heteroskedastic lasso of y on x
/// separately within the control and treated subsamples (each demeaned via the
/// solver's internal centering), then include the union of the two selected
/// supports as paired main-effect and interaction slots, plus the constant
/// and the main treatment effect.
pub fn select_initial_model(data: &Dataset, cfg: &HeteroLassoConfig) -> Result<HetModelSpec> {
    let arm0 = data.arm_rows(0)?;
    let arm1 = data.arm_rows(1)?;
    for (arm, rows) in [(0u8, &arm0), (1u8, &arm1)] {
        if rows.len() < MIN_ARM_SIZE {
            return Err(Error::ArmTooSmall {
                arm,
                n: rows.len(),
                min: MIN_ARM_SIZE,
            });
        }
    }
    let d0 = data.subset(&arm0);
    let d1 = data.subset(&arm1);
    let fit0 = hetero_lasso(d0.x(), d0.y(), cfg)?;
    let fit1 = hetero_lasso(d1.x(), d1.y(), cfg)?;
    let union = fit0.support.union(&fit1.support);
    Ok(HetModelSpec::new(union.clone(), union))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn planted_dataset(seed: u64, n: usize, p: usize, effect: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let d = Array1::from_shape_fn(n, |_| f64::from(rng.random::<bool>()));
        let y = Array1::from_shape_fn(n, |i| {
            effect * x[[i, 2]] + 0.5 * d[i] + rng.sample::<f64, _>(StandardNormal)
        });
        Dataset::from_parts(y, x, Some(d)).unwrap()
    }

    #[test]
    fn output_contains_constant_and_treatment() {
        let data = planted_dataset(1, 120, 8, 3.0);
        let spec = select_initial_model(&data, &HeteroLassoConfig::default()).unwrap();
        assert!(spec.includes_constant);
        assert!(spec.includes_treatment);
    }

    #[test]
    fn base_and_interact_are_paired() {
        let data = planted_dataset(2, 120, 8, 3.0);
        let spec = select_initial_model(&data, &HeteroLassoConfig::default()).unwrap();
        assert_eq!(spec.base_indices, spec.interact_indices);
        assert!(spec.n_slots() <= 2 * spec.base_indices.len() + 2);
    }

    #[test]
    fn rejects_small_arm() {
        let mut data = planted_dataset(3, 40, 4, 1.0);
        // force an almost-empty treated arm
        let y = data.y().clone();
        let x = data.x().clone();
        let mut d = Array1::zeros(40);
        d[0] = 1.0;
        data = Dataset::from_parts(y, x, Some(d)).unwrap();
        assert!(matches!(
            select_initial_model(&data, &HeteroLassoConfig::default()),
            Err(Error::ArmTooSmall { arm: 1, .. })
        ));
    }

    #[test]
    fn invariant_to_row_permutation() {
        let data = planted_dataset(4, 100, 6, 2.5);
        let spec_a = select_initial_model(&data, &HeteroLassoConfig::default()).unwrap();
        let mut order: Vec<usize> = (0..100).collect();
        order.reverse();
        let shuffled = data.subset(&order);
        let spec_b = select_initial_model(&shuffled, &HeteroLassoConfig::default()).unwrap();
        assert_eq!(spec_a, spec_b);
    }

    #[test]
    fn slot_order_is_const_base_treat_interact() {
        let spec = HetModelSpec::new(SupportSet::new(vec![3, 1]), SupportSet::new(vec![2]));
        assert_eq!(
            spec.slots(),
            vec![
                Slot::Intercept,
                Slot::Base(1),
                Slot::Base(3),
                Slot::Treatment,
                Slot::Interaction(2)
            ]
        );
    }
}
