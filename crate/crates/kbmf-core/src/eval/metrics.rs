//! Evaluation metrics: ranking AUC, RMSE, multilabel Hamming loss,
//! precision@k retrieval, and the row/column-average baseline predictor.

use nalgebra::{DMatrix, DVector};

use crate::error::{KbmfError, Result};

/// Column means of the observed training rows; the score a held-out row
/// receives for each column.
pub fn baseline_column_scores(y_train: &DMatrix<f64>) -> Result<DVector<f64>> {
    if y_train.nrows() == 0 {
        return Err(KbmfError::Data("baseline needs at least one observed row".into()));
    }
    let n = y_train.nrows() as f64;
    Ok(DVector::from_fn(y_train.ncols(), |j, _| y_train.column(j).sum() / n))
}

/// Area under the ROC curve as the Mann–Whitney statistic; tied scores
/// contribute one half. Labels are ±1. Errors when only one class is present.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(KbmfError::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l > 0.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(KbmfError::Evaluation(format!(
            "AUC undefined with {n_pos} positive and {n_neg} negative labels"
        )));
    }
    // Average ranks over ties, then the rank-sum statistic.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("scores must be comparable"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; tied block [i, j] shares the average rank.
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] > 0.0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Root mean squared error between two equally long vectors.
pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(KbmfError::Shape(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let sse: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// RMSE over whole matrices.
pub fn rmse_matrix(pred: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(KbmfError::Shape(format!(
            "rmse shapes differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    rmse(pred.as_slice(), target.as_slice())
}

/// Fraction of (sample, label) cells where the ±1 sign differs.
pub fn hamming_loss(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(KbmfError::Shape(format!(
            "hamming shapes differ: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    if pred.is_empty() {
        return Err(KbmfError::Shape("hamming loss of an empty matrix".into()));
    }
    let mismatches = pred
        .iter()
        .zip(truth.iter())
        .filter(|(p, t)| (**p > 0.0) != (**t > 0.0))
        .count();
    Ok(mismatches as f64 / pred.len() as f64)
}

/// Mean precision at the top-k retrieved objects: each object queries the
/// rest, ranked by descending similarity with ties broken by ascending index;
/// the score is the fraction of the top k sharing the query's class.
pub fn precision_at_k(similarity: &DMatrix<f64>, classes: &[usize], k: usize) -> Result<f64> {
    let n = similarity.nrows();
    if similarity.ncols() != n || classes.len() != n {
        return Err(KbmfError::Shape(format!(
            "similarity is {}x{} with {} classes",
            n,
            similarity.ncols(),
            classes.len()
        )));
    }
    if k >= n {
        return Err(KbmfError::Parameter(format!(
            "k = {k} must be smaller than the number of objects {n}"
        )));
    }
    if k == 0 {
        return Err(KbmfError::Parameter("k must be at least 1".into()));
    }
    let mut total = 0.0;
    for query in 0..n {
        let mut candidates: Vec<usize> = (0..n).filter(|&i| i != query).collect();
        candidates.sort_by(|&a, &b| {
            similarity[(query, b)]
                .partial_cmp(&similarity[(query, a)])
                .expect("similarities must be comparable")
                .then(a.cmp(&b))
        });
        let hits = candidates[..k].iter().filter(|&&i| classes[i] == classes[query]).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / n as f64)
}
