//! Out-of-matrix (cold-start) prediction: test objects enter through their
//! kernel columns against the training objects, are pushed through the fitted
//! projection and weight posteriors, and come out as Gaussian score summaries
//! and (for binary variants) class probabilities.
//!
//! Products of Gaussians are moment-matched: the predictive score keeps the
//! exact mean and variance of the product of independent components and is
//! then treated as Gaussian. Cross-kernel covariance between different
//! kernels' component predictions is dropped, mirroring the factorization of
//! the posterior.

use nalgebra::DMatrix;

use crate::distributions::norm_log_cdf;
use crate::error::{KbmfError, Result};
use crate::kernels::CrossKernelBundle;
use crate::vb::{DomainPosteriors, KbmfModel};

/// Predictive latent components for a batch of test objects: an R×N_test mean
/// and a per-object R-vector of variances (diagonal approximation).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveComponents {
    pub mean: DMatrix<f64>,
    pub variance: DMatrix<f64>,
}

impl PredictiveComponents {
    pub fn n_test(&self) -> usize {
        self.mean.ncols()
    }

    pub fn rank(&self) -> usize {
        self.mean.nrows()
    }
}

/// Score summaries for a grid of test pairs; `p_positive` is present for the
/// binary variants only.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePrediction {
    pub f_mean: DMatrix<f64>,
    pub f_std: DMatrix<f64>,
    pub p_positive: Option<DMatrix<f64>>,
}

/// Normalized class probabilities for one test pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassProb {
    pub positive: f64,
    pub negative: f64,
}

/// Propagates test objects through one domain's posteriors.
///
/// Per kernel m and test object t the component prediction has mean
/// μ(A)ᵀk_{m,t} and per-coordinate variance σ_g² + k_{m,t}ᵀΣ(a_s)k_{m,t};
/// the composite aggregates them with the kernel-weight posterior. For the
/// single-kernel variant the lone component block is the latent
/// representation itself and the weight layer is skipped.
pub fn project_test(
    domain: &DomainPosteriors,
    cross: &CrossKernelBundle,
    sigma_g: f64,
    sigma_h: f64,
) -> Result<PredictiveComponents> {
    let n = domain.n();
    let r = domain.rank();
    let p = domain.p();
    if cross.p() != p {
        return Err(KbmfError::Shape(format!(
            "{} cross kernels for {} trained kernels",
            cross.p(),
            p
        )));
    }
    if cross.n_train() != n {
        return Err(KbmfError::Shape(format!(
            "cross kernels have {} training rows, model has {}",
            cross.n_train(),
            n
        )));
    }
    let n_test = cross.n_test();
    let sg2 = sigma_g * sigma_g;

    // Per-kernel component predictions.
    let mut comp_means = Vec::with_capacity(p);
    let mut comp_vars = Vec::with_capacity(p);
    for m in 0..p {
        let k = cross.matrix(m);
        let mean = domain.proj.mean.transpose() * k; // R×N_test
        let mut var = DMatrix::zeros(r, n_test);
        for s in 0..r {
            let cov = &domain.proj.covariances[s];
            for t in 0..n_test {
                let col = k.column(t);
                var[(s, t)] = sg2 + (cov * col).dot(&col);
            }
        }
        comp_means.push(mean);
        comp_vars.push(var);
    }

    match &domain.mkl {
        None => Ok(PredictiveComponents {
            mean: comp_means.pop().unwrap(),
            variance: comp_vars.pop().unwrap(),
        }),
        Some(mkl) => {
            let e_mean = &mkl.weights.mean;
            let e_cov = mkl.weights.shared_cov();
            let sh2 = sigma_h * sigma_h;
            let mut mean = DMatrix::zeros(r, n_test);
            for m in 0..p {
                mean += &comp_means[m] * e_mean[(m, 0)];
            }
            let mut variance = DMatrix::zeros(r, n_test);
            for t in 0..n_test {
                for s in 0..r {
                    // Var(Σ_m e_m g_m) = ĝᵀΣ(e)ĝ + Σ_m E[e_m²]·Var(g_m)
                    // for independent weight and component uncertainties.
                    let mut v = sh2;
                    for m in 0..p {
                        let gm = comp_means[m][(s, t)];
                        let e2 = e_mean[(m, 0)] * e_mean[(m, 0)] + e_cov[(m, m)];
                        v += e2 * comp_vars[m][(s, t)];
                        for o in 0..p {
                            v += e_cov[(m, o)] * gm * comp_means[o][(s, t)];
                        }
                    }
                    variance[(s, t)] = v;
                }
            }
            Ok(PredictiveComponents { mean, variance })
        }
    }
}

/// Moment-matched score distribution for every (row-test, column-test) pair:
/// f_mean = hxᵀhz and f_var = 1 + Σ_s (vx·hz² + vz·hx² + vx·vz).
pub fn predict_scores(hx: &PredictiveComponents, hz: &PredictiveComponents) -> Result<ScorePrediction> {
    if hx.rank() != hz.rank() {
        return Err(KbmfError::Shape(format!(
            "component ranks differ: {} vs {}",
            hx.rank(),
            hz.rank()
        )));
    }
    let r = hx.rank();
    let f_mean = hx.mean.transpose() * &hz.mean;
    let mut f_std = DMatrix::zeros(hx.n_test(), hz.n_test());
    for b in 0..hz.n_test() {
        for a in 0..hx.n_test() {
            let mut var = 1.0;
            for s in 0..r {
                let (mx, vx) = (hx.mean[(s, a)], hx.variance[(s, a)]);
                let (mz, vz) = (hz.mean[(s, b)], hz.variance[(s, b)]);
                var += vx * mz * mz + vz * mx * mx + vx * vz;
            }
            f_std[(a, b)] = var.sqrt();
        }
    }
    Ok(ScorePrediction {
        f_mean,
        f_std,
        p_positive: None,
    })
}

/// Normalized probability of the positive class for one score summary:
/// p₊ = Φ((μ−ν)/σ) / [Φ((μ−ν)/σ) + Φ((−μ−ν)/σ)], evaluated in log space.
pub fn class_probability(f_mean: f64, f_std: f64, margin: f64) -> Result<ClassProb> {
    if !(f_std > 0.0) {
        return Err(KbmfError::Parameter(format!(
            "score standard deviation must be positive, got {f_std}"
        )));
    }
    let log_pos = norm_log_cdf((f_mean - margin) / f_std);
    let log_neg = norm_log_cdf((-f_mean - margin) / f_std);
    let peak = log_pos.max(log_neg);
    let wp = (log_pos - peak).exp();
    let wn = (log_neg - peak).exp();
    // Both tail masses are positive for finite means; keep the rounded
    // probabilities machine-strictly inside (0, 1).
    let clamp = |p: f64| p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    Ok(ClassProb {
        positive: clamp(wp / (wp + wn)),
        negative: clamp(wn / (wp + wn)),
    })
}

/// Batch prediction for every test pair. Binary models also get `p_positive`;
/// regression models return means and standard deviations only.
pub fn predict_matrix(
    model: &KbmfModel,
    cross_x: &CrossKernelBundle,
    cross_z: &CrossKernelBundle,
) -> Result<ScorePrediction> {
    let hp = &model.hyperparams;
    let hx = project_test(&model.x, cross_x, hp.sigma_g, hp.sigma_h)?;
    let hz = project_test(&model.z, cross_z, hp.sigma_g, hp.sigma_h)?;
    let mut scores = predict_scores(&hx, &hz)?;
    if model.variant.is_binary() {
        let mut p = DMatrix::zeros(scores.f_mean.nrows(), scores.f_mean.ncols());
        for j in 0..p.ncols() {
            for i in 0..p.nrows() {
                p[(i, j)] =
                    class_probability(scores.f_mean[(i, j)], scores.f_std[(i, j)], hp.margin_nu)?
                        .positive;
            }
        }
        scores.p_positive = Some(p);
    }
    Ok(scores)
}

/// Scores held-out row objects against the trained column objects: the row
/// side is projected out-of-matrix, the column side keeps its posterior
/// components (mean plus diagonal covariance).
pub fn predict_rows_vs_trained(model: &KbmfModel, cross_x: &CrossKernelBundle) -> Result<ScorePrediction> {
    let hp = &model.hyperparams;
    let hx = project_test(&model.x, cross_x, hp.sigma_g, hp.sigma_h)?;
    let hz = trained_components(&model.z);
    let mut scores = predict_scores(&hx, &hz)?;
    if model.variant.is_binary() {
        let mut p = DMatrix::zeros(scores.f_mean.nrows(), scores.f_mean.ncols());
        for j in 0..p.ncols() {
            for i in 0..p.nrows() {
                p[(i, j)] =
                    class_probability(scores.f_mean[(i, j)], scores.f_std[(i, j)], hp.margin_nu)?
                        .positive;
            }
        }
        scores.p_positive = Some(p);
    }
    Ok(scores)
}

/// The trained latent representation of a domain, as predictive components
/// (posterior mean with the shared covariance diagonal as per-object variance).
pub fn trained_components(domain: &DomainPosteriors) -> PredictiveComponents {
    let latent = domain.latent();
    let diag = latent.shared_cov().diagonal();
    let n = latent.mean.ncols();
    let variance = DMatrix::from_fn(latent.mean.nrows(), n, |s, _| diag[s]);
    PredictiveComponents {
        mean: latent.mean.clone(),
        variance,
    }
}

/// Prediction CSV: one line per test pair with row id, column id, mean,
/// standard deviation, and class probability when present.
pub fn prediction_to_csv(scores: &ScorePrediction) -> String {
    let mut out = String::new();
    match &scores.p_positive {
        Some(_) => out.push_str("row,col,f_mean,f_std,p_positive\n"),
        None => out.push_str("row,col,f_mean,f_std\n"),
    }
    for i in 0..scores.f_mean.nrows() {
        for j in 0..scores.f_mean.ncols() {
            match &scores.p_positive {
                Some(p) => out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    i,
                    j,
                    scores.f_mean[(i, j)],
                    scores.f_std[(i, j)],
                    p[(i, j)]
                )),
                None => out.push_str(&format!(
                    "{},{},{},{}\n",
                    i,
                    j,
                    scores.f_mean[(i, j)],
                    scores.f_std[(i, j)]
                )),
            }
        }
    }
    out
}
