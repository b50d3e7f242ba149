//! Multilabel classification cast as bipartite factorization: samples form
//! the row domain (five Gaussian kernels at widths √(D/4)…√(4D)), labels form
//! the column domain (one Jaccard kernel over the training label supports).
//! The rank is chosen by training Hamming loss, test samples are scored
//! out-of-matrix, and probabilities are thresholded at one half.

use nalgebra::DMatrix;

use super::metrics::hamming_loss;
use super::report::{CellRecord, EvalReport};
use crate::error::{KbmfError, Result};
use crate::kernels::{gaussian_kernel, CrossKernelBundle, KernelBundle};
use crate::predict::{class_probability, predict_scores, project_test, trained_components};
use crate::vb::{fit, HyperParams, KbmfModel, Variant};

/// Inputs: features D×N (objects in columns) and 0/1 label matrices L×N.
#[derive(Debug, Clone)]
pub struct MultilabelData {
    pub features_train: DMatrix<f64>,
    pub features_test: DMatrix<f64>,
    pub labels_train: DMatrix<f64>,
    pub labels_test: DMatrix<f64>,
}

/// Result of a multilabel run.
#[derive(Debug, Clone)]
pub struct MultilabelOutcome {
    pub report: EvalReport,
    pub selected_rank: usize,
    pub test_hamming: f64,
    /// Per-label majority-class predictor on the same test set.
    pub baseline_hamming: f64,
    /// ±1 predictions, samples × labels.
    pub predictions: DMatrix<f64>,
}

/// The rank grid searched during rank selection: 1..=min(L, 15).
pub fn multilabel_rank_grid(n_labels: usize) -> Vec<usize> {
    (1..=n_labels.min(15)).collect()
}

/// The five Gaussian kernel widths used over sample features.
pub fn sample_kernel_widths(d: usize) -> [f64; 5] {
    let d = d as f64;
    [
        (d / 4.0).sqrt(),
        (d / 2.0).sqrt(),
        d.sqrt(),
        (2.0 * d).sqrt(),
        (4.0 * d).sqrt(),
    ]
}

fn validate(data: &MultilabelData) -> Result<()> {
    if data.features_train.nrows() != data.features_test.nrows() {
        return Err(KbmfError::Shape(format!(
            "train/test feature dimensions differ: {} vs {}",
            data.features_train.nrows(),
            data.features_test.nrows()
        )));
    }
    if data.labels_train.ncols() != data.features_train.ncols() {
        return Err(KbmfError::Shape(format!(
            "{} training label columns for {} training samples",
            data.labels_train.ncols(),
            data.features_train.ncols()
        )));
    }
    if data.labels_test.ncols() != data.features_test.ncols() {
        return Err(KbmfError::Shape(format!(
            "{} test label columns for {} test samples",
            data.labels_test.ncols(),
            data.features_test.ncols()
        )));
    }
    if data.labels_train.nrows() != data.labels_test.nrows() {
        return Err(KbmfError::Shape(format!(
            "train/test label counts differ: {} vs {}",
            data.labels_train.nrows(),
            data.labels_test.nrows()
        )));
    }
    Ok(())
}

/// 0/1 on disk maps to −1/+1 internally.
fn to_signs(labels01: &DMatrix<f64>) -> DMatrix<f64> {
    labels01.map(|v| if v > 0.0 { 1.0 } else { -1.0 })
}

/// Runs the full multilabel protocol over the given rank grid (callers
/// usually pass 1..=min(L,15)). Returns per-rank training losses and the
/// selected-rank test loss.
pub fn run_multilabel(data: &MultilabelData, hp_base: &HyperParams, ranks: &[usize]) -> Result<MultilabelOutcome> {
    validate(data)?;
    if ranks.is_empty() {
        return Err(KbmfError::Parameter("need at least one rank".into()));
    }
    let d = data.features_train.nrows();
    let n_labels = data.labels_train.nrows();

    // Sample-side kernels.
    let widths = sample_kernel_widths(d);
    let mut sample_kernels = Vec::with_capacity(widths.len());
    let mut names = Vec::with_capacity(widths.len());
    for (idx, &w) in widths.iter().enumerate() {
        sample_kernels.push(gaussian_kernel(&data.features_train, &data.features_train, w)?);
        names.push(format!("gaussian{idx}"));
    }
    let kx = KernelBundle::new(sample_kernels, Some(names))?;

    // Label-side kernel: Jaccard over the labels' training supports.
    for l in 0..n_labels {
        if data.labels_train.row(l).iter().all(|&v| v == 0.0) {
            log::warn!("label {l} has an empty training support; its Jaccard row degenerates");
        }
    }
    let label_profiles = data.labels_train.transpose(); // samples × labels
    let kz = KernelBundle::single(jaccard_of(&label_profiles)?, "jaccard")?;

    let y_train = to_signs(&data.labels_train.transpose()); // samples × labels

    // Rank selection on training Hamming loss, ties to the smaller rank.
    let mut report = EvalReport::default();
    let mut best: Option<(usize, f64, KbmfModel)> = None;
    for &rank in ranks {
        let hp = HyperParams {
            rank,
            ..hp_base.clone()
        };
        let model = fit(&kx, &kz, &y_train, &hp, Variant::MklBinary)?;
        let train_pred = threshold_scores(&model.fitted_scores(), hp_base.margin_nu)?;
        let loss = hamming_loss(&train_pred, &y_train)?;
        report.push(CellRecord::ok("train_hamming", 0, 0, rank, loss));
        let better = match &best {
            None => true,
            Some((_, best_loss, _)) => loss < *best_loss,
        };
        if better {
            best = Some((rank, loss, model));
        }
    }
    let (selected_rank, _, model) = best.expect("at least one rank was fitted");

    // Out-of-matrix prediction for the test samples against the trained labels.
    let mut cross_kernels = Vec::with_capacity(widths.len());
    for &w in &widths {
        cross_kernels.push(gaussian_kernel(&data.features_train, &data.features_test, w)?);
    }
    let cross = CrossKernelBundle::new(cross_kernels)?;
    let hp = &model.hyperparams;
    let hx = project_test(&model.x, &cross, hp.sigma_g, hp.sigma_h)?;
    let hz = trained_components(&model.z);
    let scores = predict_scores(&hx, &hz)?;
    let mut predictions = DMatrix::zeros(scores.f_mean.nrows(), scores.f_mean.ncols());
    for j in 0..predictions.ncols() {
        for i in 0..predictions.nrows() {
            let p = class_probability(scores.f_mean[(i, j)], scores.f_std[(i, j)], hp.margin_nu)?;
            predictions[(i, j)] = if p.positive > 0.5 { 1.0 } else { -1.0 };
        }
    }

    let truth = to_signs(&data.labels_test.transpose());
    let test_hamming = hamming_loss(&predictions, &truth)?;
    report.push(CellRecord::ok("test_hamming", 0, 0, selected_rank, test_hamming));

    let baseline_hamming = majority_baseline_hamming(&y_train, &truth)?;
    report.push(CellRecord::ok("baseline_hamming", 0, 0, selected_rank, baseline_hamming));

    Ok(MultilabelOutcome {
        report,
        selected_rank,
        test_hamming,
        baseline_hamming,
        predictions,
    })
}

fn jaccard_of(profiles: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    crate::kernels::jaccard_kernel(profiles)
}

/// ±1 labels from in-matrix scores: positive-class probability over one half
/// (equivalently, positive score mean under the unit output scale).
fn threshold_scores(scores: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(scores.nrows(), scores.ncols());
    for j in 0..scores.ncols() {
        for i in 0..scores.nrows() {
            let p = class_probability(scores[(i, j)], 1.0, margin)?;
            out[(i, j)] = if p.positive > 0.5 { 1.0 } else { -1.0 };
        }
    }
    Ok(out)
}

/// Hamming loss of the per-label majority-class predictor (majority taken
/// over the training samples; ties predict positive).
pub fn majority_baseline_hamming(y_train: &DMatrix<f64>, truth_test: &DMatrix<f64>) -> Result<f64> {
    if y_train.ncols() != truth_test.ncols() {
        return Err(KbmfError::Shape(format!(
            "train has {} labels, test {}",
            y_train.ncols(),
            truth_test.ncols()
        )));
    }
    let pred = DMatrix::from_fn(truth_test.nrows(), truth_test.ncols(), |_, l| {
        if y_train.column(l).sum() >= 0.0 {
            1.0
        } else {
            -1.0
        }
    });
    hamming_loss(&pred, truth_test)
}
