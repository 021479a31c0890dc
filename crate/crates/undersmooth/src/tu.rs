//! The targeted-undersmoothing engine: greedy forward enlargements of an
//! initially selected model chosen to push the lower interval endpoint down
//! and the upper endpoint up, the sample-split variant, the conservative
//! Wald-test variant, and sensitivity paths over the mistake budget.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::inference::{functional_interval, ols_hc_fit, wald_test, ModelInterval, WaldTest};
use crate::lasso::HeteroLassoConfig;
use crate::selection::{select_initial_model, HetModelSpec, Slot};

/// How candidate covariates enter an augmented model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// A covariate enters with both its main-effect and interaction slot.
    Paired,
    /// Main-effect and interaction slots are separate candidates.
    Single,
}

/// One candidate augmentation unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    /// Both slots of covariate j.
    Pair(usize),
    /// A single slot.
    Single(Slot),
}

impl Candidate {
    fn apply(&self, model: &HetModelSpec) -> HetModelSpec {
        match self {
            Candidate::Pair(j) => model.with_pair(*j),
            Candidate::Single(s) => model.with_slot(*s),
        }
    }

    fn new_slot_count(&self, model: &HetModelSpec) -> usize {
        match self {
            Candidate::Pair(j) => {
                usize::from(!model.base_indices.contains(*j))
                    + usize::from(!model.interact_indices.contains(*j))
            }
            Candidate::Single(s) => usize::from(!model.contains(*s)),
        }
    }
}

impl std::fmt::Display for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Candidate::Pair(j) => write!(f, "pair[{j}]"),
            Candidate::Single(s) => write!(f, "{s}"),
        }
    }
}

/// Search configuration.
#[derive(Debug, Clone)]
pub struct TuConfig {
    /// Mistake budget: greedy steps per direction.
    pub sbar: usize,
    pub alpha: f64,
    pub mode: CandidateMode,
    /// Candidate covariate indices; `None` means all covariates.
    pub candidates: Option<Vec<usize>>,
    /// Settings for the initial selector when no model is supplied.
    pub selector: HeteroLassoConfig,
}

impl TuConfig {
    pub fn new(sbar: usize, alpha: f64) -> Self {
        Self {
            sbar,
            alpha,
            mode: CandidateMode::Paired,
            candidates: None,
            selector: HeteroLassoConfig::default(),
        }
    }
}

/// One accepted greedy step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathStep {
    pub candidate: Candidate,
    pub interval: ModelInterval,
}

/// Result of the two-direction greedy search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuResult {
    pub initial_model: HetModelSpec,
    pub initial_interval: ModelInterval,
    pub lower_path: Vec<PathStep>,
    pub upper_path: Vec<PathStep>,
    /// Nested intervals: entry s is the interval with mistake budget s.
    pub per_sbar: Vec<(f64, f64)>,
    pub alpha: f64,
    pub sbar: usize,
    /// Search stopped early because the model would exceed n - 1 slots.
    pub truncated: bool,
    /// Candidates skipped for evaluation failures across all steps.
    pub skipped: usize,
}

impl TuResult {
    /// Final interval [l, u] at the full budget.
    pub fn interval(&self) -> (f64, f64) {
        *self.per_sbar.last().expect("per_sbar nonempty")
    }

    /// Interval at a smaller budget s <= sbar.
    pub fn interval_at(&self, s: usize) -> (f64, f64) {
        self.per_sbar[s.min(self.per_sbar.len() - 1)]
    }
}

/// Per-budget summary row for sensitivity reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub sbar: usize,
    pub lower: f64,
    pub upper: f64,
    pub length: f64,
}

fn default_candidates(data: &Dataset, explicit: Option<&Vec<usize>>) -> Vec<usize> {
    match explicit {
        Some(v) => {
            let mut v = v.clone();
            v.sort_unstable();
            v.dedup();
            v
        }
        None => (0..data.k()).collect(),
    }
}

fn candidate_units(
    covariates: &[usize],
    model: &HetModelSpec,
    mode: CandidateMode,
    used: &[Candidate],
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for &j in covariates {
        match mode {
            CandidateMode::Paired => {
                let c = Candidate::Pair(j);
                if c.new_slot_count(model) > 0 && !used.contains(&c) {
                    out.push(c);
                }
            }
            CandidateMode::Single => {
                for slot in [Slot::Base(j), Slot::Interaction(j)] {
                    let c = Candidate::Single(slot);
                    if c.new_slot_count(model) > 0 && !used.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

/// Per-step candidate evaluator. The base model's design is factored once;
/// each candidate appends its one or two columns through incremental
/// Householder steps, and the delta-method variance is computed along the
/// gradient direction only, never forming the full covariance matrix.
/// Results match the direct fit path up to floating-point roundoff.
struct StepEvaluator<'a> {
    data: &'a Dataset,
    model: &'a HetModelSpec,
    base_slots: Vec<Slot>,
    base_cols: Vec<Vec<f64>>,
    qr: crate::linalg::PivotedQr,
    qty: Vec<f64>,
    r00: f64,
    alpha: f64,
    z_crit: f64,
}

const RANK_TOL: f64 = 1e-10;

fn slot_column(data: &Dataset, slot: Slot) -> Vec<f64> {
    let n = data.n();
    match slot {
        Slot::Intercept => vec![1.0; n],
        Slot::Base(j) => data.x().column(j).to_vec(),
        Slot::Treatment => data.treatment().expect("treatment present").to_vec(),
        Slot::Interaction(j) => {
            let d = data.treatment().expect("treatment present");
            let xj = data.x().column(j);
            (0..n).map(|i| d[i] * xj[i]).collect()
        }
    }
}

impl<'a> StepEvaluator<'a> {
    /// None when the base design is rank deficient (callers fall back to the
    /// direct path).
    fn new(data: &'a Dataset, model: &'a HetModelSpec, alpha: f64) -> Result<Option<Self>> {
        let base_slots = model.slots();
        if base_slots.len() >= data.n() {
            return Err(Error::TooManySlots {
                slots: base_slots.len(),
                n: data.n(),
            });
        }
        if data.treatment().is_none() {
            return Err(Error::MissingTreatment);
        }
        let base_cols: Vec<Vec<f64>> = base_slots.iter().map(|&s| slot_column(data, s)).collect();
        let qr = crate::linalg::PivotedQr::factor_columns(base_cols.clone(), data.n());
        if qr.rank(RANK_TOL) < base_slots.len() {
            return Ok(None);
        }
        let mut qty = data.y().to_vec();
        qr.apply_qt_in_place(&mut qty);
        let r00 = qr.r_entry(0, 0).abs();
        let z_crit = crate::stats::z_critical(alpha)?;
        Ok(Some(StepEvaluator {
            data,
            model,
            base_slots,
            base_cols,
            qr,
            qty,
            r00,
            alpha,
            z_crit,
        }))
    }

    fn evaluate(&self, cand: Candidate, f: &Functional) -> Option<ModelInterval> {
        let n = self.data.n();
        let m = self.base_slots.len();
        let augmented = cand.apply(self.model);
        let new_slots: Vec<Slot> = augmented
            .slots()
            .into_iter()
            .filter(|s| !self.base_slots.contains(s))
            .collect();
        let z = new_slots.len();
        let ma = m + z;
        if ma >= n {
            return None;
        }

        // original and Q'-transformed copies of the appended columns
        let new_orig: Vec<Vec<f64>> = new_slots.iter().map(|&s| slot_column(self.data, s)).collect();
        let mut new_tr: Vec<Vec<f64>> = new_orig.clone();
        for col in new_tr.iter_mut() {
            self.qr.apply_qt_in_place(col);
        }
        // incremental Householder elimination of the appended columns
        let mut taus = vec![0.0; z];
        for idx in 0..z {
            let t = m + idx;
            let (head, tail) = new_tr.split_at_mut(idx + 1);
            let ct = &mut head[idx];
            let alpha_t = ct[t];
            let sigma: f64 = ct[t + 1..].iter().map(|v| v * v).sum();
            let norm = (alpha_t * alpha_t + sigma).sqrt();
            if norm <= RANK_TOL * self.r00.max(1.0) {
                return None; // candidate column linearly dependent: skip
            }
            if sigma == 0.0 {
                taus[idx] = 0.0;
            } else {
                let beta = if alpha_t <= 0.0 { norm } else { -norm };
                let v0 = alpha_t - beta;
                let tau = -v0 / beta;
                let inv = 1.0 / v0;
                for v in ct[t + 1..].iter_mut() {
                    *v *= inv;
                }
                ct[t] = beta;
                taus[idx] = tau;
                for cj in tail.iter_mut() {
                    let mut w = cj[t];
                    for (a, b) in ct[t + 1..].iter().zip(&cj[t + 1..]) {
                        w += a * b;
                    }
                    w *= tau;
                    cj[t] -= w;
                    for (a, b) in ct[t + 1..].iter().zip(cj[t + 1..].iter_mut()) {
                        *b -= w * a;
                    }
                }
            }
        }

        let mut qty = self.qty.clone();
        for idx in 0..z {
            if taus[idx] == 0.0 {
                continue;
            }
            let t = m + idx;
            let ct = &new_tr[idx];
            let mut w = qty[t];
            for (a, b) in ct[t + 1..].iter().zip(&qty[t + 1..]) {
                w += a * b;
            }
            w *= taus[idx];
            qty[t] -= w;
            for (a, b) in ct[t + 1..].iter().zip(qty[t + 1..].iter_mut()) {
                *b -= w * a;
            }
        }

        // augmented R: base entries from the pivoted factor, then new columns
        let r_entry = |row: usize, col: usize| -> f64 {
            if col < m {
                self.qr.r_entry(row, col)
            } else {
                new_tr[col - m][row]
            }
        };
        // coefficients in pivot order
        let mut beta_piv = vec![0.0; ma];
        for t in (0..ma).rev() {
            let mut s = qty[t];
            for j in t + 1..ma {
                s -= r_entry(t, j) * beta_piv[j];
            }
            beta_piv[t] = s / r_entry(t, t);
        }
        // slot order matching the pivot order
        let slot_order: Vec<Slot> = self
            .qr
            .perm()
            .iter()
            .map(|&t| self.base_slots[t])
            .chain(new_slots.iter().copied())
            .collect();
        let original_col = |t: usize| -> &[f64] {
            if t < m {
                &self.base_cols[self.qr.perm()[t]]
            } else {
                &new_orig[t - m]
            }
        };

        let mut residuals = self.data.y().to_vec();
        for t in 0..ma {
            let b = beta_piv[t];
            if b != 0.0 {
                for (r, x) in residuals.iter_mut().zip(original_col(t)) {
                    *r -= b * x;
                }
            }
        }

        let beta_arr = ndarray::Array1::from_vec(beta_piv);
        let coef = crate::functionals::CoefView::new(&slot_order, &beta_arr);
        let estimate = f.value(coef, self.data).ok()?;
        let g = f.gradient_on(&slot_order, coef, self.data).ok()?;

        // w = (X'X)^{-1} g via R'u = g, Rw = u; then var = Σ e² (Xw)²
        let mut u = vec![0.0; ma];
        for t in 0..ma {
            let mut s = g[t];
            for j in 0..t {
                s -= r_entry(j, t) * u[j];
            }
            u[t] = s / r_entry(t, t);
        }
        let mut w = vec![0.0; ma];
        for t in (0..ma).rev() {
            let mut s = u[t];
            for j in t + 1..ma {
                s -= r_entry(t, j) * w[j];
            }
            w[t] = s / r_entry(t, t);
        }
        let mut proj = vec![0.0; n];
        for t in 0..ma {
            if w[t] != 0.0 {
                for (pi, x) in proj.iter_mut().zip(original_col(t)) {
                    *pi += w[t] * x;
                }
            }
        }
        let var: f64 = residuals
            .iter()
            .zip(&proj)
            .map(|(e, p)| e * e * p * p)
            .sum::<f64>()
            .max(0.0);
        let std_error = var.sqrt();
        let touched = f.touches(self.data);
        let extrapolated_zero = touched.iter().any(|s| !augmented.contains(*s));
        Some(ModelInterval {
            model: augmented,
            estimate,
            std_error,
            lower: estimate - self.z_crit * std_error,
            upper: estimate + self.z_crit * std_error,
            alpha: self.alpha,
            extrapolated_zero,
        })
    }
}

/// Evaluate the interval for every candidate augmentation of `model`,
/// in parallel over a read-only dataset. Failures are collected, not fatal.
fn evaluate_candidates(
    data: &Dataset,
    model: &HetModelSpec,
    candidates: &[Candidate],
    f: &Functional,
    alpha: f64,
) -> Result<Vec<(Candidate, Option<ModelInterval>)>> {
    match StepEvaluator::new(data, model, alpha)? {
        Some(eval) => Ok(candidates
            .par_iter()
            .map(|c| (*c, eval.evaluate(*c, f)))
            .collect()),
        None => Ok(candidates
            .par_iter()
            .map(|c| {
                let augmented = c.apply(model);
                let res = ols_hc_fit(data, &augmented)
                    .and_then(|fit| functional_interval(&fit, data, f, alpha))
                    .ok();
                (*c, res)
            })
            .collect()),
    }
}

enum Direction {
    Lower,
    Upper,
}

/// One greedy path. Returns the accepted steps and the number of skipped
/// candidate evaluations; sets `truncated` if the slot budget ran out.
fn greedy_path(
    data: &Dataset,
    initial: &HetModelSpec,
    covariates: &[usize],
    f: &Functional,
    cfg: &TuConfig,
    direction: Direction,
) -> Result<(Vec<PathStep>, usize, bool)> {
    let mut model = initial.clone();
    let mut used: Vec<Candidate> = Vec::new();
    let mut steps = Vec::new();
    let mut skipped = 0usize;
    let mut truncated = false;

    for _ in 0..cfg.sbar {
        let units = candidate_units(covariates, &model, cfg.mode, &used);
        let feasible: Vec<Candidate> = units
            .into_iter()
            .filter(|c| model.n_slots() + c.new_slot_count(&model) <= data.n().saturating_sub(1))
            .collect();
        if feasible.is_empty() {
            truncated = true;
            break;
        }
        let evals = evaluate_candidates(data, &model, &feasible, f, cfg.alpha)?;
        let mut best: Option<(Candidate, ModelInterval)> = None;
        for (cand, res) in evals {
            match res {
                Some(iv) => {
                    let better = match &best {
                        None => true,
                        Some((bc, biv)) => match direction {
                            // strict improvement; ties keep the earlier
                            // (lower-indexed) candidate
                            Direction::Lower => {
                                iv.lower < biv.lower || (iv.lower == biv.lower && cand < *bc)
                            }
                            Direction::Upper => {
                                iv.upper > biv.upper || (iv.upper == biv.upper && cand < *bc)
                            }
                        },
                    };
                    if better {
                        best = Some((cand, iv));
                    }
                }
                None => skipped += 1,
            }
        }
        let Some((cand, interval)) = best else {
            truncated = true;
            break;
        };
        model = cand.apply(&model);
        used.push(cand);
        steps.push(PathStep {
            candidate: cand,
            interval,
        });
    }
    Ok((steps, skipped, truncated))
}

/// Two independent greedy searches of length `sbar` starting from the initial
/// model: the lower path adds the candidate minimizing the lower endpoint,
/// the upper path the candidate maximizing the upper endpoint. The reported
/// interval at budget s is the running extremum over path prefixes of length
/// s, including step 0, so intervals are nested across budgets.
pub fn tu_interval(
    data: &Dataset,
    f: &Functional,
    cfg: &TuConfig,
    initial: Option<HetModelSpec>,
) -> Result<TuResult> {
    let initial_model = match initial {
        Some(m) => m,
        None => select_initial_model(data, &cfg.selector)?,
    };
    let fit0 = ols_hc_fit(data, &initial_model)?;
    let initial_interval = functional_interval(&fit0, data, f, cfg.alpha)?;
    let covariates = default_candidates(data, cfg.candidates.as_ref());

    let (lower_path, sk_l, trunc_l) =
        greedy_path(data, &initial_model, &covariates, f, cfg, Direction::Lower)?;
    let (upper_path, sk_u, trunc_u) =
        greedy_path(data, &initial_model, &covariates, f, cfg, Direction::Upper)?;

    let mut per_sbar = Vec::with_capacity(cfg.sbar + 1);
    let mut lo = initial_interval.lower;
    let mut up = initial_interval.upper;
    per_sbar.push((lo, up));
    for s in 1..=cfg.sbar {
        if let Some(step) = lower_path.get(s - 1) {
            lo = lo.min(step.interval.lower);
        }
        if let Some(step) = upper_path.get(s - 1) {
            up = up.max(step.interval.upper);
        }
        per_sbar.push((lo, up));
    }

    Ok(TuResult {
        initial_model,
        initial_interval,
        lower_path,
        upper_path,
        per_sbar,
        alpha: cfg.alpha,
        sbar: cfg.sbar,
        truncated: trunc_l || trunc_u,
        skipped: sk_l + sk_u,
    })
}

/// Sample-split variant: the initial model is selected on a random half A and
/// every interval evaluation runs on the other half B only.
pub fn tu_interval_split(
    data: &Dataset,
    f: &Functional,
    cfg: &TuConfig,
    split_seed: u64,
) -> Result<TuResult> {
    let n = data.n();
    if n < 20 {
        return Err(Error::invalid("split", format!("need n >= 20, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    order.shuffle(&mut rng);
    let half = n.div_ceil(2);
    let mut a_rows = order[..half].to_vec();
    let mut b_rows = order[half..].to_vec();
    a_rows.sort_unstable();
    b_rows.sort_unstable();
    let data_a = data.subset(&a_rows);
    let data_b = data.subset(&b_rows);
    let initial = select_initial_model(&data_a, &cfg.selector)?;
    tu_interval(&data_b, f, cfg, Some(initial))
}

/// One step of the conservative Wald search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaldPathStep {
    pub candidate: Candidate,
    pub test: WaldTest,
}

/// Result of the test variant: the most conservative (maximal) p-value over
/// the greedy path, with the whole path reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuWaldResult {
    pub initial_model: HetModelSpec,
    pub initial_test: WaldTest,
    pub path: Vec<WaldPathStep>,
    /// Running-max p-value per budget, entry s for budget s.
    pub per_sbar_p: Vec<f64>,
    /// The test at the maximal p-value over the whole path.
    pub test: WaldTest,
    pub sbar: usize,
}

fn interaction_slots(model: &HetModelSpec) -> Vec<Slot> {
    model
        .slots()
        .into_iter()
        .filter(|s| matches!(s, Slot::Interaction(_)))
        .collect()
}

/// Greedy heterogeneity test: the null is "all interaction coefficients zero"
/// on the initial model's interaction block. Each step adds the candidate
/// maximizing the p-value of the Wald test on the augmented model's
/// interaction block; the reported p-value is the running maximum.
///
/// Candidates default to single slots so the search can trade off main-effect
/// additions (degrees of freedom unchanged) against interaction additions
/// (block grows by one); a paired mode is available.
pub fn tu_wald_test(
    data: &Dataset,
    sbar: usize,
    mode: CandidateMode,
    candidates: Option<Vec<usize>>,
    initial: Option<HetModelSpec>,
    selector: &HeteroLassoConfig,
) -> Result<TuWaldResult> {
    let initial_model = match initial {
        Some(m) => m,
        None => select_initial_model(data, selector)?,
    };
    let fit0 = ols_hc_fit(data, &initial_model)?;
    let initial_test = wald_test(&fit0, &interaction_slots(&initial_model))?;
    let covariates = default_candidates(data, candidates.as_ref());

    let mut model = initial_model.clone();
    let mut used: Vec<Candidate> = Vec::new();
    let mut path = Vec::new();
    let mut per_sbar_p = vec![initial_test.p_value];
    let mut best_test = initial_test;
    let mut running_p = initial_test.p_value;

    for _ in 0..sbar {
        let units = candidate_units(&covariates, &model, mode, &used);
        let feasible: Vec<Candidate> = units
            .into_iter()
            .filter(|c| model.n_slots() + c.new_slot_count(&model) <= data.n().saturating_sub(1))
            .collect();
        if feasible.is_empty() {
            break;
        }
        let evals: Vec<(Candidate, Result<WaldTest>)> = feasible
            .par_iter()
            .map(|c| {
                let augmented = c.apply(&model);
                let res = ols_hc_fit(data, &augmented)
                    .and_then(|fit| wald_test(&fit, &interaction_slots(&augmented)));
                (*c, res)
            })
            .collect();
        let mut best: Option<(Candidate, WaldTest)> = None;
        for (cand, res) in evals {
            if let Ok(t) = res {
                let better = match &best {
                    None => true,
                    Some((bc, bt)) => {
                        t.p_value > bt.p_value || (t.p_value == bt.p_value && cand < *bc)
                    }
                };
                if better {
                    best = Some((cand, t));
                }
            }
        }
        let Some((cand, test)) = best else { break };
        model = cand.apply(&model);
        used.push(cand);
        if test.p_value > running_p {
            running_p = test.p_value;
            best_test = test;
        }
        per_sbar_p.push(running_p);
        path.push(WaldPathStep { candidate: cand, test });
    }
    while per_sbar_p.len() < sbar + 1 {
        per_sbar_p.push(running_p);
    }

    Ok(TuWaldResult {
        initial_model,
        initial_test,
        path,
        per_sbar_p,
        test: best_test,
        sbar,
    })
}

/// Single greedy run at the largest budget; per-budget rows are prefixes.
pub fn sensitivity_path(
    data: &Dataset,
    f: &Functional,
    sbar_max: usize,
    alpha: f64,
    initial: Option<HetModelSpec>,
) -> Result<(TuResult, Vec<SensitivityRow>)> {
    if sbar_max < 1 {
        return Err(Error::invalid("sbar_max", "must be at least 1"));
    }
    let cfg = TuConfig::new(sbar_max, alpha);
    let result = tu_interval(data, f, &cfg, initial)?;
    let rows = result
        .per_sbar
        .iter()
        .enumerate()
        .map(|(s, &(lo, up))| SensitivityRow {
            sbar: s,
            lower: lo,
            upper: up,
            length: up - lo,
        })
        .collect();
    Ok((result, rows))
}

/// Exhaustive version of the two-direction search for small candidate pools:
/// evaluates every model `initial ⊆ K` with at most `sbar` added units.
/// Intended for oracle checks against the greedy approximation.
pub fn exhaustive_interval(
    data: &Dataset,
    f: &Functional,
    cfg: &TuConfig,
    initial: &HetModelSpec,
) -> Result<(f64, f64)> {
    let covariates = default_candidates(data, cfg.candidates.as_ref());
    let units = candidate_units(&covariates, initial, cfg.mode, &[]);
    let fit0 = ols_hc_fit(data, initial)?;
    let iv0 = functional_interval(&fit0, data, f, cfg.alpha)?;
    let mut lo = iv0.lower;
    let mut up = iv0.upper;

    fn rec(
        data: &Dataset,
        f: &Functional,
        alpha: f64,
        model: &HetModelSpec,
        units: &[Candidate],
        start: usize,
        remaining: usize,
        lo: &mut f64,
        up: &mut f64,
    ) -> Result<()> {
        if remaining == 0 {
            return Ok(());
        }
        for i in start..units.len() {
            let augmented = units[i].apply(model);
            if augmented.n_slots() > data.n().saturating_sub(1) {
                continue;
            }
            if let Ok(fit) = ols_hc_fit(data, &augmented) {
                if let Ok(iv) = functional_interval(&fit, data, f, alpha) {
                    *lo = lo.min(iv.lower);
                    *up = up.max(iv.upper);
                }
            }
            rec(data, f, alpha, &augmented, units, i + 1, remaining - 1, lo, up)?;
        }
        Ok(())
    }
    rec(
        data, f, cfg.alpha, initial, &units, 0, cfg.sbar, &mut lo, &mut up,
    )?;
    Ok((lo, up))
}
