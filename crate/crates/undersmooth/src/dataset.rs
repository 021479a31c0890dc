//! Core data containers: the analysis dataset and ordered index sets.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcomes, covariates, and an optional binary treatment indicator.
///
/// Rows are observations. Covariate columns carry human-readable names that
/// are preserved through feature expansion and output serialization.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Array1<f64>,
    x: Array2<f64>,
    treatment: Option<Array1<f64>>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(
        y: Array1<f64>,
        x: Array2<f64>,
        treatment: Option<Array1<f64>>,
        names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "design matrix rows".into(),
                expected: n,
                got: x.nrows(),
            });
        }
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                what: "column names".into(),
                expected: x.ncols(),
                got: names.len(),
            });
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::invalid("names", format!("duplicate column {name:?}")));
            }
        }
        if let Some(d) = &treatment {
            if d.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "treatment length".into(),
                    expected: n,
                    got: d.len(),
                });
            }
            if let Some(bad) = d.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::invalid(
                    "treatment",
                    format!("non-binary value {} at row {bad}", d[bad]),
                ));
            }
        }
        Ok(Self {
            y,
            x,
            treatment,
            names,
        })
    }

    /// Convenience constructor with generated names `x1..xk`.
    pub fn from_parts(y: Array1<f64>, x: Array2<f64>, treatment: Option<Array1<f64>>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(y, x, treatment, names)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariate columns (excludes the treatment indicator).
    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn treatment(&self) -> Option<&Array1<f64>> {
        self.treatment.as_ref()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Row indices belonging to treatment arm `arm` (0 or 1).
    pub fn arm_rows(&self, arm: u8) -> Result<Vec<usize>> {
        let d = self.treatment.as_ref().ok_or(Error::MissingTreatment)?;
        Ok(d.iter()
            .enumerate()
            .filter(|(_, &v)| v == f64::from(arm))
            .map(|(i, _)| i)
            .collect())
    }

    /// New dataset restricted to the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let y = rows.iter().map(|&i| self.y[i]).collect::<Array1<f64>>();
        let x = self.x.select(Axis(0), rows);
        let treatment = self
            .treatment
            .as_ref()
            .map(|d| rows.iter().map(|&i| d[i]).collect::<Array1<f64>>());
        Dataset {
            y,
            x,
            treatment,
            names: self.names.clone(),
        }
    }
}

/// An ordered, duplicate-free set of column indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SupportSet(indices)
    }

    pub fn empty() -> Self {
        SupportSet(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.0.binary_search(&idx).is_ok()
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        SupportSet::new(v)
    }

    pub fn insert(&mut self, idx: usize) {
        if let Err(pos) = self.0.binary_search(&idx) {
            self.0.insert(pos, idx);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl From<Vec<usize>> for SupportSet {
    fn from(v: Vec<usize>) -> Self {
        SupportSet::new(v)
    }
}

impl FromIterator<usize> for SupportSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        SupportSet::new(iter.into_iter().collect())
    }
}
