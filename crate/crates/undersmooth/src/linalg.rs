//! Dense least-squares machinery: Householder QR with column pivoting,
//! rank-revealing solves, and the (X'X)⁻¹ blocks needed for sandwich
//! covariances. Self-contained; no external BLAS/LAPACK.
//!
//! The factorization stores the working matrix column-major (each column a
//! contiguous slice) so the Householder updates run on contiguous memory.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        *yi += alpha * xi;
    }
}

/// Column-pivoted Householder QR factorization of an n×m matrix.
///
/// `cols[t]` holds the pivoted column t: R entries in positions `..=t`, the
/// Householder vector (normalized so v[t] = 1) below; `perm[t]` is the
/// original index of the column pivoted to position `t`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    cols: Vec<Vec<f64>>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    steps: usize,
    n: usize,
    m: usize,
}

impl PivotedQr {
    pub fn factor(x: &Array2<f64>) -> PivotedQr {
        let (n, m) = x.dim();
        let mut cols: Vec<Vec<f64>> = (0..m).map(|j| x.column(j).to_vec()).collect();
        Self::factor_cols(&mut cols, n, m)
    }

    /// Factor from pre-extracted contiguous columns (consumed).
    pub fn factor_columns(cols: Vec<Vec<f64>>, n: usize) -> PivotedQr {
        let m = cols.len();
        let mut cols = cols;
        Self::factor_cols(&mut cols, n, m)
    }

    fn factor_cols(cols: &mut Vec<Vec<f64>>, n: usize, m: usize) -> PivotedQr {
        let mut perm: Vec<usize> = (0..m).collect();
        let kmax = n.min(m);
        let mut tau = vec![0.0; kmax];

        let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
        let norms_at_entry = norms.clone();
        let mut steps = kmax;

        for t in 0..kmax {
            let mut jbest = t;
            for j in t + 1..m {
                if norms[j] > norms[jbest] {
                    jbest = j;
                }
            }
            if norms[jbest] <= 0.0 {
                steps = t;
                break;
            }
            if jbest != t {
                cols.swap(t, jbest);
                norms.swap(t, jbest);
                perm.swap(t, jbest);
            }

            // Householder for cols[t][t..]
            let (head, tail) = cols.split_at_mut(t + 1);
            let ct = &mut head[t];
            let alpha = ct[t];
            let sigma = dot(&ct[t + 1..], &ct[t + 1..]);
            if sigma == 0.0 {
                tau[t] = 0.0;
            } else {
                let mu = (alpha * alpha + sigma).sqrt();
                let beta = if alpha <= 0.0 { mu } else { -mu };
                let v0 = alpha - beta;
                tau[t] = -v0 / beta;
                let inv_v0 = 1.0 / v0;
                for v in ct[t + 1..].iter_mut() {
                    *v *= inv_v0;
                }
                ct[t] = beta;
                let tau_t = tau[t];
                for cj in tail.iter_mut() {
                    // w = tau * (cj[t] + v'·cj[t+1..]); cj -= w * v (v0 = 1)
                    let mut w = cj[t] + dot(&ct[t + 1..], &cj[t + 1..]);
                    w *= tau_t;
                    cj[t] -= w;
                    axpy(-w, &ct[t + 1..], &mut cj[t + 1..]);
                }
            }

            for j in t + 1..m {
                let rtj = cols[j][t];
                norms[j] -= rtj * rtj;
                // guard against cancellation in the downdate
                if norms[j] <= 1e-10 * norms_at_entry[j] {
                    norms[j] = dot(&cols[j][t + 1..], &cols[j][t + 1..]);
                }
            }
        }

        PivotedQr {
            cols: std::mem::take(cols),
            tau,
            perm,
            steps,
            n,
            m,
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Number of completed elimination steps.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Entry of the R factor (row <= col < m).
    #[inline]
    pub fn r_entry(&self, row: usize, col: usize) -> f64 {
        self.cols[col][row]
    }

    /// Apply Q' to a raw vector in place.
    pub fn apply_qt_in_place(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        for t in 0..self.steps {
            if self.tau[t] == 0.0 {
                continue;
            }
            let ct = &self.cols[t];
            let mut w = v[t] + dot(&ct[t + 1..], &v[t + 1..]);
            w *= self.tau[t];
            v[t] -= w;
            axpy(-w, &ct[t + 1..], &mut v[t + 1..]);
        }
    }

    /// Diagonal of R, zero-filled past the last completed elimination step.
    pub fn r_diag(&self) -> Vec<f64> {
        let kmax = self.n.min(self.m);
        (0..kmax)
            .map(|t| if t < self.steps { self.r_entry(t, t) } else { 0.0 })
            .collect()
    }

    /// Numerical rank: longest pivot prefix with |R_tt| > rel_tol·|R_00|.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let diag = self.r_diag();
        if diag.is_empty() || diag[0] == 0.0 {
            return 0;
        }
        let cutoff = rel_tol * diag[0].abs();
        let mut r = 0;
        for d in &diag {
            if d.abs() > cutoff {
                r += 1;
            } else {
                break;
            }
        }
        r
    }

    /// Q'y for the implicit Q.
    pub fn apply_qt(&self, y: &Array1<f64>) -> Array1<f64> {
        let mut v = y.to_vec();
        for t in 0..self.steps {
            if self.tau[t] == 0.0 {
                continue;
            }
            let ct = &self.cols[t];
            let mut w = v[t] + dot(&ct[t + 1..], &v[t + 1..]);
            w *= self.tau[t];
            v[t] -= w;
            axpy(-w, &ct[t + 1..], &mut v[t + 1..]);
        }
        Array1::from_vec(v)
    }

    /// Least-squares coefficients in original column order using the leading
    /// `rank` pivots; pivoted-out columns get exact zeros.
    pub fn solve_ls(&self, y: &Array1<f64>, rank: usize) -> Array1<f64> {
        let qty = self.apply_qt(y);
        let mut beta_piv = vec![0.0; rank];
        for t in (0..rank).rev() {
            let mut s = qty[t];
            for j in t + 1..rank {
                s -= self.r_entry(t, j) * beta_piv[j];
            }
            beta_piv[t] = s / self.r_entry(t, t);
        }
        let mut out = Array1::zeros(self.m);
        for t in 0..rank {
            out[self.perm[t]] = beta_piv[t];
        }
        out
    }

    /// (X_r' X_r)⁻¹ for the leading `rank` pivot columns, in pivot order.
    pub fn xtx_inverse(&self, rank: usize) -> Array2<f64> {
        // R_r upper triangular, invert by back substitution
        let mut rinv = Array2::zeros((rank, rank));
        for col in 0..rank {
            let mut e = vec![0.0; rank];
            e[col] = 1.0;
            for t in (0..=col).rev() {
                let mut s = e[t];
                for j in t + 1..rank {
                    s -= self.r_entry(t, j) * rinv[[j, col]];
                }
                rinv[[t, col]] = s / self.r_entry(t, t);
            }
        }
        // (R'R)⁻¹ = R⁻¹ R⁻ᵀ
        let mut out = Array2::zeros((rank, rank));
        for i in 0..rank {
            for j in i..rank {
                let mut s = 0.0;
                for l in i.max(j)..rank {
                    s += rinv[[i, l]] * rinv[[j, l]];
                }
                out[[i, j]] = s;
                out[[j, i]] = s;
            }
        }
        out
    }
}

/// Least-squares fit with rank handling.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Array1<f64>,
    pub fitted: Array1<f64>,
    pub residuals: Array1<f64>,
    /// Original column indices retained, in pivot order.
    pub retained: Vec<usize>,
    /// Original column indices dropped for rank deficiency, sorted.
    pub dropped: Vec<usize>,
    pub rank: usize,
}

/// OLS of y on the columns of x (no implicit intercept). Columns pivoted out
/// at relative tolerance `rel_tol` get zero coefficients and are reported.
pub fn ols(x: &Array2<f64>, y: &Array1<f64>, rel_tol: f64) -> (OlsFit, PivotedQr) {
    let qr = PivotedQr::factor(x);
    let rank = qr.rank(rel_tol);
    let coefficients = qr.solve_ls(y, rank);
    let fitted = x.dot(&coefficients);
    let residuals = y - &fitted;
    let retained: Vec<usize> = qr.perm()[..rank].to_vec();
    let mut dropped: Vec<usize> = qr.perm()[rank..].to_vec();
    dropped.sort_unstable();
    (
        OlsFit {
            coefficients,
            fitted,
            residuals,
            retained,
            dropped,
            rank,
        },
        qr,
    )
}

/// HC0 sandwich (X'X)⁻¹ X' diag(e²) X (X'X)⁻¹ over the retained columns,
/// embedded into an m×m matrix with zero rows/columns for dropped ones.
pub fn hc0_covariance(
    x: &Array2<f64>,
    qr: &PivotedQr,
    rank: usize,
    residuals: &Array1<f64>,
) -> Array2<f64> {
    let n = x.nrows();
    let m = x.ncols();
    let minv = qr.xtx_inverse(rank);
    // B = diag(e) X_r (X_r'X_r)⁻¹, V_r = B'B
    let mut x_sel = Array2::zeros((n, rank));
    for t in 0..rank {
        x_sel.column_mut(t).assign(&x.column(qr.perm()[t]));
    }
    let mut b = x_sel.dot(&minv);
    for (i, &e) in residuals.iter().enumerate() {
        for t in 0..rank {
            b[[i, t]] *= e;
        }
    }
    let v_piv = b.t().dot(&b);
    let mut out = Array2::zeros((m, m));
    for s in 0..rank {
        for t in 0..rank {
            out[[qr.perm()[s], qr.perm()[t]]] = v_piv[[s, t]];
        }
    }
    // exact symmetry
    for s in 0..m {
        for t in s + 1..m {
            let avg = 0.5 * (out[[s, t]] + out[[t, s]]);
            out[[s, t]] = avg;
            out[[t, s]] = avg;
        }
    }
    out
}

/// Solve the symmetric system A z = b, failing if A is rank deficient at the
/// given relative tolerance.
pub fn solve_symmetric(a: &Array2<f64>, b: &Array1<f64>, rel_tol: f64) -> Result<Array1<f64>> {
    let qr = PivotedQr::factor(a);
    if qr.rank(rel_tol) < a.ncols() {
        return Err(Error::SingularCovariance { tol: rel_tol });
    }
    Ok(qr.solve_ls(b, a.ncols()))
}

/// Column means and the centered matrix.
pub fn center_columns(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let means = x.sum_axis(ndarray::Axis(0)) / n;
    let mut xc = x.to_owned();
    for (j, &mj) in means.iter().enumerate() {
        xc.column_mut(j).mapv_inplace(|v| v - mj);
    }
    (xc, means)
}

pub fn center_vector(y: &Array1<f64>) -> (Array1<f64>, f64) {
    let mean = y.sum() / y.len() as f64;
    (y.mapv(|v| v - mean), mean)
}
