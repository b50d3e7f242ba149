//! Replicated cross-validation over one axis of the target matrix: hold out
//! whole rows, fit on the rest, score the held-out rows out-of-matrix, and
//! compare against the column-average baseline. Cells run on a worker pool;
//! assembly is deterministic.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::metrics::{auc, baseline_column_scores, rmse};
use super::report::{CellRecord, EvalReport};
use super::splits::{SplitAxis, SplitPlan};
use crate::error::{KbmfError, Result};
use crate::kernels::KernelBundle;
use crate::predict::predict_rows_vs_trained;
use crate::vb::{fit, HyperParams, Variant};

/// Which headline metric a CV run scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvMetric {
    Auc,
    Rmse,
}

impl CvMetric {
    fn name(self) -> &'static str {
        match self {
            CvMetric::Auc => "auc",
            CvMetric::Rmse => "rmse",
        }
    }

    fn baseline_name(self) -> &'static str {
        match self {
            CvMetric::Auc => "baseline_auc",
            CvMetric::Rmse => "baseline_rmse",
        }
    }

    fn score(self, scores: &[f64], targets: &[f64]) -> Result<f64> {
        match self {
            CvMetric::Auc => auc(scores, targets),
            CvMetric::Rmse => rmse(scores, targets),
        }
    }
}

/// Cross-validation with an arbitrary scorer. The scorer receives the
/// training rows, the held-out rows, and the rank, and returns a score matrix
/// (held-out rows × all columns). The baseline predictor is always evaluated
/// alongside it. Cells run concurrently; failures are recorded per cell.
pub fn run_cv_with<F>(
    y: &DMatrix<f64>,
    ranks: &[usize],
    plan: &SplitPlan,
    metric: CvMetric,
    scorer: F,
) -> Result<EvalReport>
where
    F: Fn(&[usize], &[usize], usize) -> Result<DMatrix<f64>> + Sync,
{
    if plan.axis != SplitAxis::Rows {
        return Err(KbmfError::Parameter(
            "row-holdout harness needs a rows-axis split plan; transpose the problem for columns".into(),
        ));
    }
    if plan.n_objects() != y.nrows() {
        return Err(KbmfError::Shape(format!(
            "split plan covers {} objects, target matrix has {} rows",
            plan.n_objects(),
            y.nrows()
        )));
    }
    if ranks.is_empty() {
        return Err(KbmfError::Parameter("need at least one rank".into()));
    }

    let mut cells = Vec::new();
    for &rank in ranks {
        for rep in 0..plan.replications {
            for fold in 0..plan.folds {
                cells.push((rank, rep, fold));
            }
        }
    }

    let records: Vec<Vec<CellRecord>> = cells
        .par_iter()
        .map(|&(rank, rep, fold)| {
            let (train, test) = plan.split(rep, fold);
            let y_train = y.select_rows(train.iter());
            let y_test = y.select_rows(test.iter());
            let targets: Vec<f64> = y_test.iter().copied().collect();
            let mut out = Vec::with_capacity(2);

            match scorer(&train, &test, rank) {
                Ok(scores) => {
                    if scores.shape() != y_test.shape() {
                        out.push(CellRecord::failed(
                            metric.name(),
                            rep,
                            fold,
                            rank,
                            format!("scorer returned {:?}, expected {:?}", scores.shape(), y_test.shape()),
                        ));
                    } else {
                        let flat: Vec<f64> = scores.iter().copied().collect();
                        match metric.score(&flat, &targets) {
                            Ok(v) => out.push(CellRecord::ok(metric.name(), rep, fold, rank, v)),
                            Err(e) => {
                                out.push(CellRecord::failed(metric.name(), rep, fold, rank, e.to_string()))
                            }
                        }
                    }
                }
                Err(e) => out.push(CellRecord::failed(metric.name(), rep, fold, rank, e.to_string())),
            }

            match baseline_column_scores(&y_train) {
                Ok(cols) => {
                    let baseline = DMatrix::from_fn(test.len(), y.ncols(), |_, j| cols[j]);
                    let flat: Vec<f64> = baseline.iter().copied().collect();
                    match metric.score(&flat, &targets) {
                        Ok(v) => out.push(CellRecord::ok(metric.baseline_name(), rep, fold, rank, v)),
                        Err(e) => {
                            out.push(CellRecord::failed(metric.baseline_name(), rep, fold, rank, e.to_string()))
                        }
                    }
                }
                Err(e) => out.push(CellRecord::failed(metric.baseline_name(), rep, fold, rank, e.to_string())),
            }
            out
        })
        .collect();

    Ok(EvalReport::new(records.into_iter().flatten().collect()))
}

/// The full protocol: for each (replication, fold, rank), fit the requested
/// variant on the training rows and score the held-out rows out-of-matrix.
/// Binary variants report AUC, the regression variant RMSE; the baseline
/// predictor is scored in every cell.
pub fn run_cv_experiment(
    kx: &KernelBundle,
    kz: &KernelBundle,
    y: &DMatrix<f64>,
    ranks: &[usize],
    variant: Variant,
    hp_base: &HyperParams,
    plan: &SplitPlan,
) -> Result<EvalReport> {
    if plan.axis == SplitAxis::Columns {
        let flipped = SplitPlan {
            axis: SplitAxis::Rows,
            ..plan.clone()
        };
        return run_cv_experiment(kz, kx, &y.transpose(), ranks, variant, hp_base, &flipped);
    }
    if kx.n() != y.nrows() || kz.n() != y.ncols() {
        return Err(KbmfError::Shape(format!(
            "kernels give {}x{}, target matrix is {}x{}",
            kx.n(),
            kz.n(),
            y.nrows(),
            y.ncols()
        )));
    }
    let metric = if variant.is_binary() { CvMetric::Auc } else { CvMetric::Rmse };
    run_cv_with(y, ranks, plan, metric, |train, test, rank| {
        let kx_train = kx.select_objects(train)?;
        let cross = kx.cross_slice(train, test)?;
        let y_train = y.select_rows(train.iter());
        let hp = HyperParams {
            rank,
            ..hp_base.clone()
        };
        let model = fit(&kx_train, kz, &y_train, &hp, variant)?;
        let scores = predict_rows_vs_trained(&model, &cross)?;
        Ok(scores.f_mean)
    })
}
