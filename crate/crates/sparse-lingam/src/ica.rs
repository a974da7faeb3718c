//! Component densities, the ICA log-likelihood, and its plain, natural, and
//! tangent-projected gradients.

use nalgebra::DMatrix;

use crate::admm::SolverConfig;
use crate::data::Whitening;
use crate::error::{Error, Result};

/// Candidate model density for one independent component.
///
/// The two candidates are the extended-infomax pair: a super-Gaussian density
/// with log p̃(s) = −2·log cosh(s) and a sub-Gaussian density with
/// log p̃(s) = −(s²/2 − log cosh(s)), normalization constants dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    SuperGaussian,
    SubGaussian,
}

/// Evaluates the model score g̃(s) = d log p̃/ds and its derivative g̃′(s).
pub fn score_function(s: f64, kind: DensityKind) -> (f64, f64) {
    let t = s.tanh();
    match kind {
        DensityKind::SuperGaussian => (-2.0 * t, -2.0 * (1.0 - t * t)),
        DensityKind::SubGaussian => (-s + t, -(t * t)),
    }
}

/// log p̃(s) up to the dropped normalization constant.
pub fn log_density(s: f64, kind: DensityKind) -> f64 {
    // ln cosh(s) = |s| + ln(1 + e^{-2|s|}) − ln 2, stable for large |s|
    let lc = s.abs() + (-2.0 * s.abs()).exp().ln_1p() - std::f64::consts::LN_2;
    match kind {
        DensityKind::SuperGaussian => -2.0 * lc,
        DensityKind::SubGaussian => -(s * s / 2.0 - lc),
    }
}

/// Empirical stability statistic (1/N)Σᵢ [sᵢ·g̃(sᵢ) − g̃′(sᵢ)] for one
/// candidate density; positive means the candidate yields a consistent
/// estimator for this component.
pub fn stability_statistic(samples: &[f64], kind: DensityKind) -> f64 {
    let mut acc = 0.0;
    for &s in samples {
        let (g, gp) = score_function(s, kind);
        acc += s * g - gp;
    }
    acc / samples.len() as f64
}

/// Picks the candidate density with the positive stability statistic, the
/// larger one if both are positive (ties toward super-Gaussian). Returns the
/// choice and whether it satisfies the positivity condition; `false` marks a
/// component too close to Gaussian to be identifiable.
pub fn select_density(component_samples: &[f64]) -> (DensityKind, bool) {
    let sup = stability_statistic(component_samples, DensityKind::SuperGaussian);
    let sub = stability_statistic(component_samples, DensityKind::SubGaussian);
    let kind = if sup >= sub { DensityKind::SuperGaussian } else { DensityKind::SubGaussian };
    (kind, sup.max(sub) > 0.0)
}

/// Average log-likelihood ℓ̃(W; Z) = (1/N)ΣᵢΣⱼ log p̃ⱼ(wⱼᵀzᵢ) + log|det W|.
pub fn log_likelihood(w: &DMatrix<f64>, z: &DMatrix<f64>, kinds: &[DensityKind]) -> Result<f64> {
    let n = z.nrows();
    let det = w.clone().lu().determinant();
    if det.abs() < 1e-300 {
        return Err(Error::Singular("determinant vanishes in log-likelihood".into()));
    }
    let y = z * w.transpose();
    let mut acc = 0.0;
    for j in 0..y.ncols() {
        let kind = kinds[j];
        for i in 0..n {
            acc += log_density(y[(i, j)], kind);
        }
    }
    Ok(acc / n as f64 + det.abs().ln())
}

/// Per-row log-likelihoods: element i is Σⱼ log p̃ⱼ(wⱼᵀzᵢ) + log|det W|,
/// so their average equals [`log_likelihood`]. Keeping the rows lets two
/// models be compared on the same validation data with paired statistics.
pub fn log_likelihood_rows(
    w: &DMatrix<f64>,
    z: &DMatrix<f64>,
    kinds: &[DensityKind],
) -> Result<Vec<f64>> {
    let n = z.nrows();
    let det = w.clone().lu().determinant();
    if det.abs() < 1e-300 {
        return Err(Error::Singular("determinant vanishes in log-likelihood".into()));
    }
    let log_det = det.abs().ln();
    let y = z * w.transpose();
    let mut rows = vec![log_det; n];
    for j in 0..y.ncols() {
        let kind = kinds[j];
        for i in 0..n {
            rows[i] += log_density(y[(i, j)], kind);
        }
    }
    Ok(rows)
}

/// Euclidean gradient of −ℓ̃ with respect to W:
/// −(1/N)·GᵀZ − (Wᵀ)⁻¹, where Y = ZWᵀ and G applies g̃ⱼ column-wise to Y.
pub fn grad_negloglik(
    w: &DMatrix<f64>,
    z: &DMatrix<f64>,
    kinds: &[DensityKind],
) -> Result<DMatrix<f64>> {
    let n = z.nrows() as f64;
    let y = z * w.transpose();
    let g = score_matrix(&y, kinds);
    let wt_inv = w
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Singular("demixing matrix is not invertible".into()))?;
    Ok(g.tr_mul(z) * (-1.0 / n) - wt_inv)
}

/// G with gᵢⱼ = g̃ⱼ(yᵢⱼ).
fn score_matrix(y: &DMatrix<f64>, kinds: &[DensityKind]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(y.nrows(), y.ncols());
    for j in 0..y.ncols() {
        let kind = kinds[j];
        for i in 0..y.nrows() {
            g[(i, j)] = score_function(y[(i, j)], kind).0;
        }
    }
    g
}

/// All W-dependent pieces of the augmented Lagrangian, evaluated together:
///
///   𝓛ρ(W) = −ℓ̃(W;Z) + λ(1−α)/2·‖PᵀW − I‖²_F + λα·Σ c|m|
///           + tr[Uᵀ(WD⁻¹Vᵀ − M)] + ρ/2·‖WD⁻¹Vᵀ − M‖²_F
pub fn lagrangian_value(
    w: &DMatrix<f64>,
    p: &DMatrix<f64>,
    m: &DMatrix<f64>,
    u: &DMatrix<f64>,
    c: &DMatrix<f64>,
    kinds: &[DensityKind],
    wh: &Whitening,
    cfg: &SolverConfig,
) -> Result<f64> {
    let d = w.nrows();
    let ll = log_likelihood(w, &wh.z, kinds)?;
    let mut ptw = p.tr_mul(w);
    for i in 0..d {
        ptw[(i, i)] -= 1.0;
    }
    let orth = cfg.lambda * (1.0 - cfg.alpha) / 2.0 * ptw.norm_squared();
    let sparse = cfg.lambda * cfg.alpha * c.zip_fold(m, 0.0, |acc, cjk, mjk| acc + cjk * mjk.abs());
    let a = wh.demix_to_original(w);
    let r = a - m;
    let aug = u.dot(&r) + cfg.rho / 2.0 * r.norm_squared();
    Ok(-ll + orth + sparse + aug)
}

/// Euclidean gradient of the augmented Lagrangian with respect to W:
///
///   ∂𝓛ρ/∂W = [−(1/N)GᵀZ − (Wᵀ)⁻¹] + λ(1−α)(W − P) + [U + ρ(WD⁻¹Vᵀ − M)]VD⁻¹
///
/// (P is orthogonal, so P·PᵀW collapses to W in the middle term.)
pub fn grad_lagrangian(
    w: &DMatrix<f64>,
    p: &DMatrix<f64>,
    m: &DMatrix<f64>,
    u: &DMatrix<f64>,
    kinds: &[DensityKind],
    wh: &Whitening,
    cfg: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let mut grad = grad_negloglik(w, &wh.z, kinds)?;
    grad += (w - p) * (cfg.lambda * (1.0 - cfg.alpha));
    let a = wh.demix_to_original(w);
    let mut coupling = (u + (a - m) * cfg.rho) * &wh.v;
    for j in 0..coupling.ncols() {
        let s = 1.0 / wh.d_scales[j];
        coupling.column_mut(j).scale_mut(s);
    }
    Ok(grad + coupling)
}

/// Natural gradient ΔW̃ = ∂𝓛ρ/∂W · WᵀW, assembled in the grouped form
///
///   ΔW̃ = −[(1/N)GᵀY + I]W + λ(1−α)(W − P)WᵀW + [U + ρ(WD⁻¹Vᵀ − M)]VD⁻¹WᵀW
///
/// where Y = ZWᵀ. The first term uses (Wᵀ)⁻¹WᵀW = W so no inverse is formed.
pub fn natural_gradient(
    w: &DMatrix<f64>,
    p: &DMatrix<f64>,
    m: &DMatrix<f64>,
    u: &DMatrix<f64>,
    kinds: &[DensityKind],
    wh: &Whitening,
    cfg: &SolverConfig,
    work: &mut GradWorkspace,
) -> DMatrix<f64> {
    let z = &wh.z;
    let d = w.nrows();
    let n = z.nrows() as f64;
    if work.y.shape() != (z.nrows(), d) {
        work.y = DMatrix::zeros(z.nrows(), d);
        work.g = DMatrix::zeros(z.nrows(), d);
    }
    z.mul_to(&w.transpose(), &mut work.y);
    for j in 0..d {
        let kind = kinds[j];
        for i in 0..z.nrows() {
            work.g[(i, j)] = score_function(work.y[(i, j)], kind).0;
        }
    }
    let mut gty = work.g.tr_mul(&work.y) / n;
    for i in 0..d {
        gty[(i, i)] += 1.0;
    }
    let wtw = w.tr_mul(w);
    let mut delta = -(&gty * w);
    delta += (w - p) * (cfg.lambda * (1.0 - cfg.alpha)) * &wtw;
    let a = wh.demix_to_original(w);
    let mut coupling = (u + (a - m) * cfg.rho) * &wh.v;
    for j in 0..d {
        let s = 1.0 / wh.d_scales[j];
        coupling.column_mut(j).scale_mut(s);
    }
    delta += coupling * &wtw;
    delta
}

/// Reusable buffers for the gradient hot path (Y and G are N×d).
#[derive(Debug, Default)]
pub struct GradWorkspace {
    y: DMatrix<f64>,
    g: DMatrix<f64>,
}

/// Projects a raw update onto the tangent space of the unit-row-norm
/// manifold: δwⱼ ← δw̃ⱼ − (⟨wⱼ, δw̃ⱼ⟩/‖wⱼ‖²)·wⱼ, making diag(W·ΔWᵀ) = 0.
pub fn tangent_project(w: &DMatrix<f64>, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = delta.clone();
    for j in 0..w.nrows() {
        let wj = w.row(j);
        let coeff = wj.dot(&delta.row(j)) / wj.norm_squared();
        let scaled = wj * coeff;
        let mut row = out.row_mut(j);
        row -= scaled;
    }
    out
}

/// Scales every row to unit Euclidean norm.
pub fn row_normalize(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = w.clone();
    for j in 0..w.nrows() {
        let norm = w.row(j).norm();
        if norm == 0.0 {
            return Err(Error::DegenerateRow { row: j + 1 });
        }
        out.row_mut(j).scale_mut(1.0 / norm);
    }
    Ok(out)
}

/// Per-column density selection from the current source estimates Y = ZWᵀ.
/// Columns are rescaled to unit empirical variance before the statistic is
/// computed. Returns the selections and per-component identifiability flags.
pub fn select_densities_from_sources(
    z: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> (Vec<DensityKind>, Vec<bool>) {
    let y = z * w.transpose();
    let n = y.nrows() as f64;
    let mut kinds = Vec::with_capacity(y.ncols());
    let mut identifiable = Vec::with_capacity(y.ncols());
    let mut buf = vec![0.0; y.nrows()];
    for j in 0..y.ncols() {
        let col = y.column(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(f64::MIN_POSITIVE);
        for (i, v) in col.iter().enumerate() {
            buf[i] = (v - mean) / sd;
        }
        let (kind, ok) = select_density(&buf);
        kinds.push(kind);
        identifiable.push(ok);
    }
    (kinds, identifiable)
}
