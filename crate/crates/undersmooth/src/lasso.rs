//! Penalized estimation: weighted-penalty lasso by coordinate descent,
//! post-lasso OLS refits, cross-validated lasso, and the residual-based
//! penalty loading construction for heteroskedastic errors.
//!
//! The solver minimizes, jointly over an unpenalized intercept a and slopes b,
//!
//! ```text
//! Q(a, b) = (1/n) ||y - a - X b||² + (lambda/n) Σ_j psi_j |b_j|
//! ```
//!
//! Data are centered internally so the intercept is carried analytically.
//! A fit satisfies the subgradient (KKT) conditions at the returned tolerance:
//! |2 X_j'(y - a - Xb)| <= lambda psi_j + tol·n when b_j = 0 and
//! |2 X_j'(y - a - Xb) - lambda psi_j sign(b_j)| <= tol·n otherwise.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::SupportSet;
use crate::error::{Error, Result};
use crate::linalg::{self, center_columns, center_vector};
use crate::stats;

/// Overall penalty level and strictly positive per-coefficient loadings.
#[derive(Debug, Clone)]
pub struct PenaltyPlan {
    pub level: f64,
    pub loadings: Array1<f64>,
}

impl PenaltyPlan {
    pub fn new(level: f64, loadings: Array1<f64>) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::InvalidPenaltyPlan {
                reason: format!("level {level} must be finite and nonnegative"),
            });
        }
        if let Some(j) = loadings.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidPenaltyPlan {
                reason: format!("loading {} at index {j} must be positive and finite", loadings[j]),
            });
        }
        Ok(Self { level, loadings })
    }
}

/// A penalized (or refitted) regression result. `support` always equals the
/// set of nonzero slope coefficients, and residuals are recomputable as
/// y - intercept - X·coefficients.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: Array1<f64>,
    pub intercept: f64,
    pub support: SupportSet,
    pub residuals: Array1<f64>,
    pub objective: f64,
    pub lambda: f64,
    pub converged: bool,
}

impl FitResult {
    fn from_solution(
        x: &Array2<f64>,
        y: &Array1<f64>,
        coefficients: Array1<f64>,
        x_means: &Array1<f64>,
        y_mean: f64,
        objective: f64,
        lambda: f64,
        converged: bool,
    ) -> Self {
        let intercept = y_mean - x_means.dot(&coefficients);
        let residuals = y - &(x.dot(&coefficients) + intercept);
        let support: SupportSet = coefficients
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(j, _)| j)
            .collect();
        FitResult {
            coefficients,
            intercept,
            support,
            residuals,
            objective,
            lambda,
            converged,
        }
    }

    pub fn rss(&self) -> f64 {
        self.residuals.dot(&self.residuals)
    }
}

/// Residuals from OLS of y on an intercept plus the k columns with the
/// largest absolute marginal correlation with y; ties broken by lower column
/// index. Rank-deficient selections fall back to a maximal independent
/// subset at tolerance 1e-10.
pub fn marginal_topk_residuals(x: &Array2<f64>, y: &Array1<f64>, k: usize) -> Result<Array1<f64>> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "outcome length".into(),
            expected: n,
            got: y.len(),
        });
    }
    if k == 0 || k > p.min(n.saturating_sub(1)) {
        return Err(Error::invalid(
            "k",
            format!("must be in 1..=min(n-1, p) = {}", p.min(n.saturating_sub(1))),
        ));
    }
    let (yc, _) = center_vector(y);
    let sy = yc.dot(&yc).sqrt();
    if sy == 0.0 {
        return Err(Error::ConstantOutcome);
    }
    let (xc, _) = center_columns(x);
    let mut scored: Vec<(usize, f64)> = (0..p)
        .map(|j| {
            let col = xc.column(j);
            let sx = col.dot(&col).sqrt();
            let c = if sx == 0.0 { 0.0 } else { (col.dot(&yc) / (sx * sy)).abs() };
            (j, c)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = scored[..k].iter().map(|(j, _)| *j).collect();
    chosen.sort_unstable();

    let mut design = Array2::zeros((n, k + 1));
    design.column_mut(0).fill(1.0);
    for (c, &j) in chosen.iter().enumerate() {
        design.column_mut(c + 1).assign(&x.column(j));
    }
    let (fit, _) = linalg::ols(&design, y, 1e-10);
    Ok(fit.residuals)
}

/// psi_j = sqrt((1/n) Σ_i x_ij² e_i²). Rejects zero loadings, which can only
/// arise from columns that vanish wherever the residual is nonzero.
pub fn penalty_loadings(x: &Array2<f64>, residuals: &Array1<f64>) -> Result<Array1<f64>> {
    let (n, p) = x.dim();
    if residuals.len() != n {
        return Err(Error::DimensionMismatch {
            what: "residual length".into(),
            expected: n,
            got: residuals.len(),
        });
    }
    if residuals.iter().all(|&e| e == 0.0) {
        return Err(Error::invalid("residuals", "identically zero"));
    }
    let mut out = Array1::zeros(p);
    for j in 0..p {
        let mut s = 0.0;
        for i in 0..n {
            let v = x[[i, j]] * residuals[i];
            s += v * v;
        }
        out[j] = (s / n as f64).sqrt();
        if out[j] == 0.0 {
            return Err(Error::ZeroLoading { index: j });
        }
    }
    Ok(out)
}

/// lambda = 2 c sqrt(n) Phi^{-1}(1 - gamma/(2p)), with the default
/// gamma = 0.1 / log(max(p, n)).
pub fn penalty_level(n: usize, p: usize, c: f64, gamma: Option<f64>) -> Result<f64> {
    if n < 2 || p < 1 {
        return Err(Error::invalid("penalty_level", format!("need n >= 2, p >= 1; got n={n}, p={p}")));
    }
    let gamma = gamma.unwrap_or(0.1 / (p.max(n) as f64).ln());
    if gamma >= 1.0 || gamma <= 0.0 {
        return Err(Error::invalid("gamma", format!("{gamma} outside (0,1)")));
    }
    let q = stats::normal_quantile(1.0 - gamma / (2.0 * p as f64))?;
    Ok(2.0 * c * (n as f64).sqrt() * q)
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalized objective on centered data.
fn objective(xc: &Array2<f64>, yc: &Array1<f64>, beta: &Array1<f64>, lambda: f64, psi: &Array1<f64>) -> f64 {
    let n = yc.len() as f64;
    let r = yc - &xc.dot(beta);
    let l1: f64 = beta
        .iter()
        .zip(psi.iter())
        .map(|(b, w)| w * b.abs())
        .sum();
    r.dot(&r) / n + lambda * l1 / n
}

/// Largest KKT violation of a candidate solution on centered data, on the
/// gradient scale of the unnormalized objective (compare against tol·n).
pub fn kkt_violation(
    xc: &Array2<f64>,
    yc: &Array1<f64>,
    beta: &Array1<f64>,
    lambda: f64,
    psi: &Array1<f64>,
) -> f64 {
    let r = yc - &xc.dot(beta);
    let mut worst = 0.0f64;
    for j in 0..xc.ncols() {
        let g = 2.0 * xc.column(j).dot(&r);
        let v = if beta[j] == 0.0 {
            (g.abs() - lambda * psi[j]).max(0.0)
        } else {
            (g - lambda * psi[j] * beta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

struct CdSolution {
    beta: Array1<f64>,
    converged: bool,
}

#[inline]
fn slice_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// A centered design staged for repeated coordinate-descent solves:
/// contiguous column buffers and cached squared norms.
struct CdProblem {
    cols: Vec<Vec<f64>>,
    col_sq: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    p: usize,
}

impl CdProblem {
    fn new(xc: &Array2<f64>, yc: &Array1<f64>) -> Self {
        let (n, p) = xc.dim();
        let cols: Vec<Vec<f64>> = (0..p).map(|j| xc.column(j).to_vec()).collect();
        let col_sq: Vec<f64> = cols.iter().map(|c| slice_dot(c, c)).collect();
        CdProblem {
            cols,
            col_sq,
            y: yc.to_vec(),
            n,
            p,
        }
    }

    fn kkt_ok(&self, beta: &Array1<f64>, resid: &[f64], lambda: f64, psi: &Array1<f64>, tol: f64) -> bool {
        let mut worst = 0.0f64;
        for j in 0..self.p {
            let g = 2.0 * slice_dot(&self.cols[j], resid);
            let v = if beta[j] == 0.0 {
                (g.abs() - lambda * psi[j]).max(0.0)
            } else {
                (g - lambda * psi[j] * beta[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        worst <= tol * self.n as f64
    }

    /// Cyclic coordinate descent with active-set iteration.
    fn solve(
        &self,
        lambda: f64,
        psi: &Array1<f64>,
        tol: f64,
        max_iter: usize,
        warm: Option<&Array1<f64>>,
    ) -> CdSolution {
        let p = self.p;
        let mut beta = warm.map_or_else(|| Array1::zeros(p), |w| w.to_owned());
        let mut resid = self.y.clone();
        for j in 0..p {
            if beta[j] != 0.0 {
                let b = beta[j];
                for (ri, ci) in resid.iter_mut().zip(&self.cols[j]) {
                    *ri -= ci * b;
                }
            }
        }

        let update = |j: usize, beta: &mut Array1<f64>, resid: &mut Vec<f64>| -> f64 {
            if self.col_sq[j] == 0.0 {
                return 0.0;
            }
            let old = beta[j];
            let col = &self.cols[j];
            let rho = slice_dot(col, resid) + self.col_sq[j] * old;
            let new = soft_threshold(rho, lambda * psi[j] / 2.0) / self.col_sq[j];
            if new != old {
                let delta = new - old;
                for (ri, ci) in resid.iter_mut().zip(col) {
                    *ri -= ci * delta;
                }
                beta[j] = new;
            }
            (new - old).abs()
        };

        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < max_iter {
            // full sweep over all coordinates
            let mut max_delta = 0.0f64;
            for j in 0..p {
                max_delta = max_delta.max(update(j, &mut beta, &mut resid));
            }
            sweeps += 1;
            // iterate on the active set until stable
            loop {
                if sweeps >= max_iter {
                    break;
                }
                let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
                if active.is_empty() {
                    break;
                }
                let mut inner_delta = 0.0f64;
                for &j in &active {
                    inner_delta = inner_delta.max(update(j, &mut beta, &mut resid));
                }
                sweeps += 1;
                if inner_delta < tol {
                    break;
                }
            }
            if max_delta < tol {
                // candidate convergence; verify subgradient conditions exactly
                if self.kkt_ok(&beta, &resid, lambda, psi, tol) {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            converged = self.kkt_ok(&beta, &resid, lambda, psi, tol);
        }
        CdSolution { beta, converged }
    }
}

fn cd_solve(
    xc: &Array2<f64>,
    yc: &Array1<f64>,
    lambda: f64,
    psi: &Array1<f64>,
    tol: f64,
    max_iter: usize,
    warm: Option<&Array1<f64>>,
) -> CdSolution {
    CdProblem::new(xc, yc).solve(lambda, psi, tol, max_iter, warm)
}

/// Weighted-penalty lasso via coordinate descent.
pub fn lasso_cd(
    x: &Array2<f64>,
    y: &Array1<f64>,
    plan: &PenaltyPlan,
    tol: f64,
    max_iter: usize,
) -> Result<FitResult> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "outcome length".into(),
            expected: n,
            got: y.len(),
        });
    }
    if plan.loadings.len() != p {
        return Err(Error::DimensionMismatch {
            what: "penalty loadings".into(),
            expected: p,
            got: plan.loadings.len(),
        });
    }
    if let Some((i, j)) = x
        .indexed_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|((i, j), _)| (i, j))
    {
        return Err(Error::invalid("design", format!("non-finite entry at ({i}, {j})")));
    }
    let (xc, x_means) = center_columns(x);
    let (yc, y_mean) = center_vector(y);
    let sol = cd_solve(&xc, &yc, plan.level, &plan.loadings, tol, max_iter, None);
    let obj = objective(&xc, &yc, &sol.beta, plan.level, &plan.loadings);
    Ok(FitResult::from_solution(
        x, y, sol.beta, &x_means, y_mean, obj, plan.level, sol.converged,
    ))
}

/// OLS refit of y on an intercept plus the columns in `support`; coefficients
/// outside the support are exactly zero. Rank-deficient supports drop
/// pivoted-out columns at tolerance 1e-10.
pub fn post_lasso(x: &Array2<f64>, y: &Array1<f64>, support: &SupportSet) -> Result<FitResult> {
    let (n, p) = x.dim();
    if support.len() >= n {
        return Err(Error::TooManySlots {
            slots: support.len() + 1,
            n,
        });
    }
    if let Some(j) = support.iter().find(|&j| j >= p) {
        return Err(Error::invalid("support", format!("index {j} out of range for p={p}")));
    }
    let idx: Vec<usize> = support.iter().collect();
    let mut design = Array2::zeros((n, idx.len() + 1));
    design.column_mut(0).fill(1.0);
    for (c, &j) in idx.iter().enumerate() {
        design.column_mut(c + 1).assign(&x.column(j));
    }
    let (fit, _) = linalg::ols(&design, y, 1e-10);
    let mut coefficients = Array1::zeros(p);
    for (c, &j) in idx.iter().enumerate() {
        coefficients[j] = fit.coefficients[c + 1];
    }
    let intercept = fit.coefficients[0];
    let residuals = fit.residuals.clone();
    let support: SupportSet = coefficients
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, _)| j)
        .collect();
    let objective = residuals.dot(&residuals) / n as f64;
    Ok(FitResult {
        coefficients,
        intercept,
        support,
        residuals,
        objective,
        lambda: 0.0,
        converged: true,
    })
}

/// Configuration for the residual-refined heteroskedastic lasso.
#[derive(Debug, Clone)]
pub struct HeteroLassoConfig {
    /// Multiplier c in the penalty level.
    pub penalty_c: f64,
    /// Slack probability; `None` selects 0.1 / log(max(p, n)).
    pub gamma: Option<f64>,
    /// Number of covariates in the initial marginal-correlation regression.
    pub topk: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HeteroLassoConfig {
    fn default() -> Self {
        Self {
            penalty_c: 1.1,
            gamma: None,
            topk: 5,
            tol: 1e-8,
            max_iter: 20_000,
        }
    }
}

/// Heteroskedasticity-adapted lasso: initial loadings from the residuals of a
/// top-k marginal-correlation regression, then exactly one loading refinement
/// from the first lasso fit's residuals.
pub fn hetero_lasso(x: &Array2<f64>, y: &Array1<f64>, cfg: &HeteroLassoConfig) -> Result<FitResult> {
    let (n, p) = x.dim();
    if p == 0 {
        return Err(Error::invalid("design", "no columns"));
    }
    // columns with no within-sample variation cannot be selected and would
    // produce zero loadings; run the solver on the informative ones
    let (xc, _) = center_columns(x);
    let live: Vec<usize> = (0..p)
        .filter(|&j| xc.column(j).iter().any(|&v| v != 0.0))
        .collect();
    if live.is_empty() {
        return Err(Error::invalid("design", "all columns constant"));
    }
    let x_live = x.select(ndarray::Axis(1), &live);
    let xc_live = xc.select(ndarray::Axis(1), &live);

    let k = cfg.topk.min(live.len()).min(n.saturating_sub(1)).max(1);
    let e0 = marginal_topk_residuals(&x_live, y, k)?;
    let lambda = penalty_level(n, live.len(), cfg.penalty_c, cfg.gamma)?;

    let psi0 = penalty_loadings(&xc_live, &e0)?;
    let plan0 = PenaltyPlan::new(lambda, psi0)?;
    let fit1 = lasso_cd(&x_live, y, &plan0, cfg.tol, cfg.max_iter)?;

    let final_fit = if fit1.residuals.iter().all(|&e| e == 0.0) {
        fit1
    } else {
        let psi1 = penalty_loadings(&xc_live, &fit1.residuals)?;
        let plan1 = PenaltyPlan::new(lambda, psi1)?;
        lasso_cd(&x_live, y, &plan1, cfg.tol, cfg.max_iter)?
    };
    if !final_fit.converged {
        return Err(Error::NotConverged {
            max_iter: cfg.max_iter,
            violation: f64::NAN,
        });
    }

    // expand back to the original column indexing
    let mut coefficients = Array1::zeros(p);
    for (c, &j) in live.iter().enumerate() {
        coefficients[j] = final_fit.coefficients[c];
    }
    let support: SupportSet = coefficients
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, _)| j)
        .collect();
    Ok(FitResult {
        coefficients,
        intercept: final_fit.intercept,
        support,
        residuals: final_fit.residuals,
        objective: final_fit.objective,
        lambda: final_fit.lambda,
        converged: true,
    })
}

/// Cross-validated lasso output: the selected full-sample fit plus the
/// deviance curve over the penalty grid.
#[derive(Debug, Clone)]
pub struct CvLasso {
    pub fit: FitResult,
    pub lambda_grid: Vec<f64>,
    pub cv_errors: Vec<f64>,
    pub chosen: usize,
}

/// Lasso with the penalty level chosen by seeded k-fold cross validation over
/// a 100-point log grid from lambda_max down by a factor 1e-4. Loadings are
/// the column standard deviations; fold penalties are rescaled by fold size.
pub fn cv_lasso(x: &Array2<f64>, y: &Array1<f64>, folds: usize, seed: u64) -> Result<CvLasso> {
    const GRID: usize = 100;
    const RATIO: f64 = 1e-4;
    let (n, p) = x.dim();
    if folds < 2 || folds > n {
        return Err(Error::invalid("folds", format!("need 2 <= folds <= n = {n}")));
    }
    let (xc, _) = center_columns(x);
    let (yc, _) = center_vector(y);
    if yc.iter().all(|&v| v == 0.0) {
        return Err(Error::ConstantOutcome);
    }
    let ones = Array1::ones(n);
    let psi_all = penalty_loadings_or_unit(&xc, &ones);

    let lambda_max = (0..p)
        .filter(|&j| psi_all[j] > 0.0)
        .map(|j| (2.0 * xc.column(j).dot(&yc)).abs() / psi_all[j])
        .fold(0.0f64, f64::max);
    if lambda_max == 0.0 {
        return Err(Error::invalid("cv_lasso", "all covariates uncorrelated and constant"));
    }
    let grid: Vec<f64> = (0..GRID)
        .map(|i| lambda_max * RATIO.powf(i as f64 / (GRID - 1) as f64))
        .collect();

    // seeded fold assignment
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / folds;
    let extra = n % folds;
    let mut fold_of = vec![0usize; n];
    let mut pos = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        for _ in 0..size {
            fold_of[order[pos]] = f;
            pos += 1;
        }
    }

    let mut cv_sq_err = vec![0.0f64; GRID];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xt = x.select(ndarray::Axis(0), &train);
        let yt: Array1<f64> = train.iter().map(|&i| y[i]).collect();
        let (xt_c, xt_means) = center_columns(&xt);
        let (yt_c, yt_mean) = center_vector(&yt);
        let psi = penalty_loadings_or_unit(&xt_c, &Array1::ones(train.len()));
        let scale = train.len() as f64 / n as f64;
        let problem = CdProblem::new(&xt_c, &yt_c);
        let mut warm: Option<Array1<f64>> = None;
        for (gi, &lam) in grid.iter().enumerate() {
            // fold fits only rank penalty levels; they can run at a looser
            // tolerance than the returned full-sample fit
            let sol = problem.solve(lam * scale, &psi, 1e-5, 1_000, warm.as_ref());
            for &i in &test {
                let mut pred = yt_mean;
                for j in 0..p {
                    if sol.beta[j] != 0.0 {
                        pred += sol.beta[j] * (x[[i, j]] - xt_means[j]);
                    }
                }
                let d = y[i] - pred;
                cv_sq_err[gi] += d * d;
            }
            warm = Some(sol.beta);
        }
    }
    let cv_errors: Vec<f64> = cv_sq_err.iter().map(|s| s / n as f64).collect();
    let mut chosen = 0;
    for (gi, &e) in cv_errors.iter().enumerate() {
        if e < cv_errors[chosen] {
            chosen = gi;
        }
    }

    let plan = PenaltyPlan::new(grid[chosen], clamp_positive(&psi_all))?;
    let fit = lasso_cd(x, y, &plan, 1e-8, 20_000)?;
    Ok(CvLasso {
        fit,
        lambda_grid: grid,
        cv_errors,
        chosen,
    })
}

/// Column RMS loadings, with zero-variance columns given a unit loading so
/// the plan stays valid (such columns can never enter: their gradient is 0).
fn penalty_loadings_or_unit(xc: &Array2<f64>, weight: &Array1<f64>) -> Array1<f64> {
    let n = xc.nrows() as f64;
    Array1::from_iter((0..xc.ncols()).map(|j| {
        let s: f64 = xc
            .column(j)
            .iter()
            .zip(weight.iter())
            .map(|(v, w)| (v * w) * (v * w))
            .sum();
        (s / n).sqrt()
    }))
}

fn clamp_positive(psi: &Array1<f64>) -> Array1<f64> {
    psi.mapv(|v| if v > 0.0 { v } else { 1.0 })
}
