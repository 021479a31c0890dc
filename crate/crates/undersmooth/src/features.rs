//! Covariate basis construction from binary dummy variables: interaction
//! products, the sign-valued Hadamard-Walsh transforms, and pruning of
//! degenerate columns.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::SupportSet;
use crate::error::{Error, Result};
use crate::linalg::PivotedQr;

/// Where a constructed column came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Raw,
    Interaction { order: usize },
    Hadamard { subset_size: usize },
}

/// A named feature matrix with per-column provenance tags.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    names: Vec<String>,
    provenance: Vec<Provenance>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, names: Vec<String>, provenance: Vec<Provenance>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                what: "feature names".into(),
                expected: values.ncols(),
                got: names.len(),
            });
        }
        if provenance.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                what: "provenance tags".into(),
                expected: values.ncols(),
                got: provenance.len(),
            });
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::invalid("names", format!("duplicate column {name:?}")));
            }
        }
        for (j, tag) in provenance.iter().enumerate() {
            if matches!(tag, Provenance::Hadamard { .. }) {
                if let Some(row) = values
                    .column(j)
                    .iter()
                    .position(|&v| v != 1.0 && v != -1.0)
                {
                    return Err(Error::invalid(
                        "hadamard column",
                        format!("column {j} has value {} at row {row}, expected ±1", values[[row, j]]),
                    ));
                }
            }
        }
        Ok(Self {
            values,
            names,
            provenance,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    /// Horizontal concatenation, keeping names and provenance.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.nrows() != other.nrows() {
            return Err(Error::DimensionMismatch {
                what: "hstack rows".into(),
                expected: self.nrows(),
                got: other.nrows(),
            });
        }
        let mut values = Array2::zeros((self.nrows(), self.ncols() + other.ncols()));
        values
            .slice_mut(ndarray::s![.., ..self.ncols()])
            .assign(&self.values);
        values
            .slice_mut(ndarray::s![.., self.ncols()..])
            .assign(&other.values);
        let mut names = self.names.clone();
        names.extend_from_slice(&other.names);
        let mut provenance = self.provenance.clone();
        provenance.extend_from_slice(&other.provenance);
        FeatureMatrix::new(values, names, provenance)
    }

    /// Restriction to the given columns.
    pub fn select(&self, support: &SupportSet) -> FeatureMatrix {
        let idx: Vec<usize> = support.iter().collect();
        FeatureMatrix {
            values: self.values.select(ndarray::Axis(1), &idx),
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            provenance: idx.iter().map(|&j| self.provenance[j].clone()).collect(),
        }
    }
}

fn check_binary(dummies: &Array2<f64>, names: &[String]) -> Result<()> {
    for j in 0..dummies.ncols() {
        if let Some(row) = dummies.column(j).iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryColumn {
                index: j,
                name: names.get(j).cloned().unwrap_or_else(|| format!("col{j}")),
                row,
                value: dummies[[row, j]],
            });
        }
    }
    Ok(())
}

/// Subsets of {0..k-1} of size `size` in lexicographic order.
fn subsets_of_size(k: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn rec(k: usize, size: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        let remaining = size - current.len();
        for j in start..=k.saturating_sub(remaining) {
            current.push(j);
            rec(k, size, j + 1, current, out);
            current.pop();
        }
    }
    if size == 0 {
        out.push(Vec::new());
    } else if size <= k {
        rec(k, size, 0, &mut current, &mut out);
    }
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All distinct products of up to `max_order` dummy columns. Order-1 terms
/// are the dummies themselves; no constant (order-0) column is emitted.
pub fn interaction_expand(
    dummies: &Array2<f64>,
    names: &[String],
    max_order: usize,
) -> Result<FeatureMatrix> {
    let (n, k) = dummies.dim();
    if max_order == 0 || max_order > k {
        return Err(Error::invalid(
            "max_order",
            format!("must be in 1..={k}, got {max_order}"),
        ));
    }
    check_binary(dummies, names)?;

    let mut cols: Vec<Array1<f64>> = Vec::new();
    let mut out_names = Vec::new();
    let mut provenance = Vec::new();
    for order in 1..=max_order {
        for subset in subsets_of_size(k, order) {
            let mut col = Array1::from_elem(n, 1.0);
            for &j in &subset {
                for i in 0..n {
                    col[i] *= dummies[[i, j]];
                }
            }
            let name = subset
                .iter()
                .map(|&j| names[j].clone())
                .collect::<Vec<_>>()
                .join("*");
            cols.push(col);
            out_names.push(name);
            provenance.push(Provenance::Interaction { order });
        }
    }
    let mut values = Array2::zeros((n, cols.len()));
    for (j, col) in cols.iter().enumerate() {
        values.column_mut(j).assign(col);
    }
    FeatureMatrix::new(values, out_names, provenance)
}

/// Sign-valued transforms psi_A(v) = (-1)^{|A ∩ {j : v_j = 1}|}, one column
/// per subset A with min_size <= |A| <= max_size, enumerated lexicographically
/// by index set.
pub fn hadamard_walsh_expand(
    dummies: &Array2<f64>,
    names: &[String],
    min_size: usize,
    max_size: usize,
    subset_cap: u128,
) -> Result<FeatureMatrix> {
    let (n, k) = dummies.dim();
    if min_size < 1 || min_size > max_size || max_size > k {
        return Err(Error::invalid(
            "subset sizes",
            format!("need 1 <= min_size <= max_size <= {k}, got [{min_size}, {max_size}]"),
        ));
    }
    check_binary(dummies, names)?;

    let count: u128 = (min_size..=max_size).map(|s| binomial(k, s)).sum();
    if count > subset_cap {
        return Err(Error::SubsetCapExceeded {
            count,
            cap: subset_cap,
        });
    }

    // lexicographic by index set across all admissible sizes
    let mut subsets: Vec<Vec<usize>> = (min_size..=max_size)
        .flat_map(|s| subsets_of_size(k, s))
        .collect();
    subsets.sort();

    let mut values = Array2::zeros((n, subsets.len()));
    let mut out_names = Vec::with_capacity(subsets.len());
    let mut provenance = Vec::with_capacity(subsets.len());
    for (c, subset) in subsets.iter().enumerate() {
        for i in 0..n {
            let mut parity = 0usize;
            for &j in subset {
                if dummies[[i, j]] == 1.0 {
                    parity ^= 1;
                }
            }
            values[[i, c]] = if parity == 1 { -1.0 } else { 1.0 };
        }
        out_names.push(format!(
            "hw({})",
            subset
                .iter()
                .map(|&j| names[j].clone())
                .collect::<Vec<_>>()
                .join(",")
        ));
        provenance.push(Provenance::Hadamard {
            subset_size: subset.len(),
        });
    }
    FeatureMatrix::new(values, out_names, provenance)
}

/// Drop degenerate columns: first any column whose nonzero count within some
/// group is <= `min_nonzero`, then any column whose diagonal R entry in a
/// column-pivoted QR of the remaining submatrix within some group falls below
/// `qr_tol`. Returns the retained column indices.
pub fn prune_columns(
    x: &FeatureMatrix,
    groups: &[Vec<usize>],
    min_nonzero: usize,
    qr_tol: f64,
) -> Result<SupportSet> {
    if qr_tol <= 0.0 {
        return Err(Error::invalid("qr_tol", "must be positive"));
    }
    for (gi, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::EmptyGroup { index: gi });
        }
    }
    let m = x.ncols();
    let values = x.values();

    // count pass
    let mut keep: Vec<bool> = vec![true; m];
    for g in groups {
        for j in 0..m {
            if !keep[j] {
                continue;
            }
            let nnz = g.iter().filter(|&&i| values[[i, j]] != 0.0).count();
            if nnz <= min_nonzero {
                keep[j] = false;
            }
        }
    }
    let after_count: Vec<usize> = (0..m).filter(|&j| keep[j]).collect();

    // QR pass per group on the count-retained submatrix; drop in pivot order
    let mut qr_keep = vec![true; after_count.len()];
    for g in groups {
        let sub = values
            .select(ndarray::Axis(0), g)
            .select(ndarray::Axis(1), &after_count);
        let qr = PivotedQr::factor(&sub);
        let diag = qr.r_diag();
        for (t, d) in diag.iter().enumerate() {
            if d.abs() < qr_tol {
                qr_keep[qr.perm()[t]] = false;
            }
        }
        // columns beyond the factored square (m > n within group) never got a
        // pivot; they are linearly dependent on the rest and are dropped too
        for t in diag.len()..after_count.len() {
            qr_keep[qr.perm()[t]] = false;
        }
    }

    Ok(after_count
        .iter()
        .zip(&qr_keep)
        .filter(|(_, &k)| k)
        .map(|(&j, _)| j)
        .collect())
}
