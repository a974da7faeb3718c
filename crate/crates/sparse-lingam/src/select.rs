//! Tuning-parameter machinery: the log-spaced α grid, adaptive-lasso
//! weights from a pilot estimate, K-fold cross-validation with the
//! median-of-argmax rule, and α escalation until the pruning cutoff is
//! small enough.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::admm::{demixing_estimate, fit, Init, SolverConfig, SolverState};
use crate::data::{whiten, Dataset, Whitening};
use crate::error::{Error, Result};
use crate::ica::log_likelihood_rows;
use crate::postprocess::{postprocess, AdjacencyEstimate};

/// Ascending grid of candidate sparsity levels.
#[derive(Debug, Clone)]
pub struct AlphaGrid {
    values: Vec<f64>,
}

impl AlphaGrid {
    /// `count` log-spaced points from `lo` to `hi` inclusive.
    pub fn log_spaced(count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::Parameter(format!("grid needs at least 2 points, got {count}")));
        }
        if !(lo > 0.0 && hi > lo && hi < 1.0) {
            return Err(Error::Parameter(format!(
                "grid bounds must satisfy 0 < lo < hi < 1, got [{lo}, {hi}]"
            )));
        }
        let (llo, lhi) = (lo.log10(), hi.log10());
        let step = (lhi - llo) / (count - 1) as f64;
        let values = (0..count).map(|i| 10f64.powf(llo + step * i as f64)).collect();
        Ok(Self { values })
    }

    /// The default sweep: 50 log-spaced points from 10⁻³ to 10⁻⁰·⁵.
    pub fn default_grid() -> Self {
        Self::log_spaced(50, 1e-3, 10f64.powf(-0.5)).expect("default bounds are valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the grid point closest to `alpha`.
    pub fn nearest_index(&self, alpha: f64) -> usize {
        let mut best = 0;
        let mut gap = f64::INFINITY;
        for (i, v) in self.values.iter().enumerate() {
            let g = (v - alpha).abs();
            if g < gap {
                gap = g;
                best = i;
            }
        }
        best
    }
}

/// Per-entry penalty multipliers c_jk^γ built from a pilot estimate.
#[derive(Debug, Clone)]
pub struct AdaptiveWeights {
    /// The matrix of c_jk^γ values, all finite and positive.
    pub c: DMatrix<f64>,
}

/// c_jk = min(1 / |m⁰_jk|, cap), returned as c_jk^γ. Entries where the
/// pilot estimate is zero take the cap, so they stay heavily penalized
/// without introducing non-finite arithmetic.
pub fn adaptive_weights(m0: &DMatrix<f64>, gamma: f64, cap: f64) -> Result<AdaptiveWeights> {
    if !(cap > 0.0) {
        return Err(Error::Parameter(format!("weight cap must be positive, got {cap}")));
    }
    if gamma < 0.0 {
        return Err(Error::Parameter(format!("weight exponent must be nonnegative, got {gamma}")));
    }
    let c = m0.map(|m| {
        let base = if m.abs() > 0.0 { (1.0 / m.abs()).min(cap) } else { cap };
        base.powf(gamma)
    });
    Ok(AdaptiveWeights { c })
}

/// Pilot fit: unweighted (γ = 0 ⇒ all multipliers 1), with the inner
/// sparsity level 0 for d < 50 and 0.1 for larger problems. Returns the
/// demixing estimate on the standardized scale together with the solver
/// state (its densities and converged flag feed later stages).
pub fn initial_estimate(
    wh: &Whitening,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<(DMatrix<f64>, SolverState)> {
    let d = wh.v.nrows();
    let mut pilot_cfg = cfg.clone();
    pilot_cfg.alpha = if d < 50 { 0.0 } else { 0.1 };
    let ones = DMatrix::from_element(d, d, 1.0);
    let state = fit(wh, &pilot_cfg, &ones, None, seed)?;
    let m0 = demixing_estimate(&state, wh);
    Ok((m0, state))
}

/// How cross-validation folds are formed and how each fold's sweep starts.
#[derive(Debug, Clone)]
pub struct CvConfig {
    /// Number of folds K (≥ 2).
    pub folds: usize,
    /// Seed for the row shuffle that defines the folds.
    pub seed: u64,
    /// Start each fold's ascending sweep from the pilot estimate mapped
    /// into that fold's whitened coordinates, instead of a random
    /// orthogonal matrix. Subsequent grid points always warm-start from
    /// the previous one.
    pub warm_from_pilot: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { folds: 10, seed: 0, warm_from_pilot: true }
    }
}

/// Outcome of the cross-validated sweep.
#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    /// Lower median of the per-fold choices.
    pub selected_alpha: f64,
    /// Per-fold choice: the largest α whose held-out likelihood is within
    /// one standard error of that fold's maximum.
    pub fold_alpha: Vec<f64>,
    /// Held-out average log-likelihood per fold per grid point
    /// (`paths[fold][grid_index]`); NaN marks a failed fit.
    pub paths: Vec<Vec<f64>>,
}

/// Within-fold choice of α from per-row held-out log-likelihoods (one
/// vector per grid point; `None` marks a failed fit). Individual held-out
/// paths are nearly flat around their peak, so the literal argmax is
/// decided by noise and often lands at the unregularized end of the grid.
/// This resolves such ties toward the sparser model with a paired
/// one-standard-error convention: the choice is the largest grid point
/// whose mean log-likelihood lies within one standard error of the
/// argmax's — where the standard error is that of the per-row likelihood
/// *differences* against the argmax model on the shared validation rows.
/// Pairing cancels the between-row variance (which dwarfs the
/// between-model differences), so a genuinely worse fit is not excused.
/// Returns the chosen α and the mean-likelihood path; `None` when every
/// fit failed.
pub fn one_se_choice(grid: &[f64], row_lls: &[Option<Vec<f64>>]) -> Option<(f64, Vec<f64>)> {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let path: Vec<f64> =
        row_lls.iter().map(|r| r.as_deref().map_or(f64::NAN, mean)).collect();
    let mut best: Option<usize> = None;
    for (i, v) in path.iter().enumerate() {
        if v.is_finite() && best.map_or(true, |b| *v > path[b]) {
            best = Some(i);
        }
    }
    let best = best?;
    let best_rows = row_lls[best].as_deref().expect("argmax fit exists");
    for i in (best + 1..grid.len()).rev() {
        let Some(rows) = row_lls[i].as_deref() else { continue };
        let n = rows.len() as f64;
        let diffs: Vec<f64> = rows.iter().zip(best_rows).map(|(a, b)| a - b).collect();
        let d_mean = mean(&diffs);
        let var = diffs.iter().map(|d| (d - d_mean) * (d - d_mean)).sum::<f64>()
            / (n - 1.0).max(1.0);
        let se = (var / n).sqrt();
        if d_mean >= -se {
            return Some((grid[i], path));
        }
    }
    Some((grid[best], path))
}

/// Splits `0..n` into `k` contiguous blocks of a seeded shuffle; the first
/// `n mod k` blocks are one element longer.
fn fold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::{Rng, SeedableRng};
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[at..at + len].to_vec());
        at += len;
    }
    folds
}

fn rows_of(data: &Dataset, idx: &[usize]) -> DMatrix<f64> {
    let d = data.n_vars();
    DMatrix::from_fn(idx.len(), d, |i, j| data.values[(idx[i], j)])
}

/// Maps a demixing estimate `m0` (original standardized coordinates) into
/// a whitening's coordinates: W₀ = M⁰ V diag(D), rows normalized.
pub fn map_pilot_to_whitened(m0: &DMatrix<f64>, wh: &Whitening) -> Result<DMatrix<f64>> {
    let mut w0 = m0 * &wh.v;
    for k in 0..w0.ncols() {
        let s = wh.d_scales[k];
        for j in 0..w0.nrows() {
            w0[(j, k)] *= s;
        }
    }
    crate::ica::row_normalize(&mut w0)?;
    Ok(w0)
}

/// K-fold cross-validation over the grid. Each fold recomputes whitening
/// on its training rows, sweeps the grid in ascending order with warm
/// starts, scores each fit by the average held-out log-likelihood of the
/// validation rows mapped through the training whitening, and records its
/// one-standard-error choice (see [`one_se_choice`]); the selection is the
/// lower median of the K per-fold choices.
///
/// A fit that fails contributes NaN to the path and is skipped; a fold in
/// which every fit fails aborts selection.
pub fn cv_select_alpha(
    data: &Dataset,
    grid: &AlphaGrid,
    cv: &CvConfig,
    cfg: &SolverConfig,
    weights: &AdaptiveWeights,
    pilot: Option<&DMatrix<f64>>,
) -> Result<CvReport> {
    if cv.folds < 2 {
        return Err(Error::Parameter(format!("need at least 2 folds, got {}", cv.folds)));
    }
    let n = data.n_samples();
    if n < 2 * cv.folds {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot support {} folds (need at least {})",
            cv.folds,
            2 * cv.folds
        )));
    }
    if !data.is_standardized() {
        return Err(Error::Parameter("cross-validation expects standardized data".into()));
    }
    let folds = fold_indices(n, cv.folds, cv.seed);

    let per_fold: Vec<Result<(f64, Vec<f64>)>> = (0..cv.folds)
        .into_par_iter()
        .map(|k| {
            let val_idx = &folds[k];
            let mut tr_idx = Vec::with_capacity(n - val_idx.len());
            for (f, fold) in folds.iter().enumerate() {
                if f != k {
                    tr_idx.extend_from_slice(fold);
                }
            }
            let x_tr = Dataset::from_matrix(rows_of(data, &tr_idx))?;
            let x_val = rows_of(data, val_idx);
            let wh_k = whiten(&x_tr)?;
            // validation rows in the training whitening's coordinates
            let mut z_val = &x_val * &wh_k.v;
            for c in 0..z_val.ncols() {
                let inv = 1.0 / wh_k.d_scales[c];
                for r in 0..z_val.nrows() {
                    z_val[(r, c)] *= inv;
                }
            }

            let warm0 = pilot
                .filter(|_| cv.warm_from_pilot)
                .map(|m0| map_pilot_to_whitened(m0, &wh_k))
                .transpose()?;
            let mut prev: Option<SolverState> = None;
            let mut row_lls: Vec<Option<Vec<f64>>> = Vec::with_capacity(grid.values().len());
            for &alpha in grid.values() {
                let mut fold_cfg = cfg.clone();
                fold_cfg.alpha = alpha;
                let init = match (&prev, &warm0) {
                    (Some(state), _) => Some(Init::State(state)),
                    (None, Some(w0)) => Some(Init::Matrix(w0)),
                    (None, None) => None,
                };
                match fit(&wh_k, &fold_cfg, &weights.c, init, cv.seed) {
                    Ok(state) => {
                        row_lls.push(Some(log_likelihood_rows(&state.w, &z_val, &state.kinds)?));
                        prev = Some(state);
                    }
                    Err(_) => row_lls.push(None),
                }
            }
            let (chosen, path) = one_se_choice(grid.values(), &row_lls).ok_or_else(|| {
                Error::Selection(format!(
                    "every fit in fold {k} failed across the {}-point grid",
                    grid.values().len()
                ))
            })?;
            Ok((chosen, path))
        })
        .collect();

    let mut fold_alpha = Vec::with_capacity(cv.folds);
    let mut paths = Vec::with_capacity(cv.folds);
    for r in per_fold {
        let (a, p) = r?;
        fold_alpha.push(a);
        paths.push(p);
    }
    let selected_alpha = lower_median(&fold_alpha);
    Ok(CvReport { selected_alpha, fold_alpha, paths })
}

/// Lower median: the element at index ⌊(len − 1) / 2⌋ of the sorted values.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("argmax values are finite"));
    sorted[(sorted.len() - 1) / 2]
}

/// Result of the escalation stage.
#[derive(Debug, Clone)]
pub struct EscalationOutcome {
    pub state: SolverState,
    pub estimate: AdjacencyEstimate,
    /// Grid point the returned estimate was fitted at.
    pub alpha_used: f64,
    /// Pruning cutoff observed at the originally selected α.
    pub cutoff_at_selected: f64,
    /// True when the grid was exhausted with the cutoff still above ω₁.
    pub cutoff_violating: bool,
}

/// Fits at the selected α and post-processes; while the acyclification
/// cutoff exceeds `omega1`, advances to the next strictly larger grid
/// point (warm start) and refits. Exhausting the grid is not an error:
/// the last state comes back flagged.
///
/// `selected_alpha` need not lie on the grid (a fixed α from the caller
/// is honored exactly); escalation continues through the grid points
/// above it. `column_scales` are the pre-standardization scales used to
/// express M̂ in the original units before post-processing; `pilot`
/// optionally warm-starts the first fit.
#[allow(clippy::too_many_arguments)]
pub fn escalate_alpha(
    wh: &Whitening,
    grid: &AlphaGrid,
    selected_alpha: f64,
    cfg: &SolverConfig,
    weights: &AdaptiveWeights,
    column_scales: &[f64],
    omega1: f64,
    omega2: f64,
    pilot: Option<&DMatrix<f64>>,
    seed: u64,
) -> Result<EscalationOutcome> {
    if !(selected_alpha >= 0.0 && selected_alpha.is_finite()) {
        return Err(Error::Parameter(format!(
            "starting sparsity level must be finite and nonnegative, got {selected_alpha}"
        )));
    }
    let mut sweep = Vec::with_capacity(grid.values().len() + 1);
    sweep.push(selected_alpha);
    sweep.extend(grid.values().iter().copied().filter(|a| *a > selected_alpha));
    let warm0 = pilot.map(|m0| map_pilot_to_whitened(m0, wh)).transpose()?;
    let mut prev: Option<SolverState> = None;
    let mut cutoff_at_selected = f64::NAN;
    let mut outcome: Option<(SolverState, AdjacencyEstimate, f64)> = None;
    for &alpha in &sweep {
        let mut step_cfg = cfg.clone();
        step_cfg.alpha = alpha;
        let init = match (&prev, &warm0) {
            (Some(state), _) => Some(Init::State(state)),
            (None, Some(w0)) => Some(Init::Matrix(w0)),
            (None, None) => None,
        };
        let state = fit(wh, &step_cfg, &weights.c, init, seed)?;
        let mut m_raw = demixing_estimate(&state, wh);
        for c in 0..m_raw.ncols() {
            let inv = 1.0 / column_scales[c];
            for r in 0..m_raw.nrows() {
                m_raw[(r, c)] *= inv;
            }
        }
        let estimate = postprocess(&m_raw, omega2)?;
        let cutoff = estimate.cutoff_applied;
        if cutoff_at_selected.is_nan() {
            cutoff_at_selected = cutoff;
        }
        let done = cutoff <= omega1;
        outcome = Some((state, estimate, alpha));
        if done {
            let (state, estimate, alpha_used) = outcome.expect("just set");
            return Ok(EscalationOutcome {
                state,
                estimate,
                alpha_used,
                cutoff_at_selected,
                cutoff_violating: false,
            });
        }
        prev = outcome.as_ref().map(|(s, _, _)| s.clone());
    }
    let (state, estimate, alpha_used) =
        outcome.ok_or_else(|| Error::Selection("selected α lies beyond the grid".into()))?;
    Ok(EscalationOutcome { state, estimate, alpha_used, cutoff_at_selected, cutoff_violating: true })
}
