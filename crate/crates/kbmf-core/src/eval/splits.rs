//! Replicated k-fold split plans over one axis of the target matrix.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KbmfError, Result};

/// Axis of the target matrix the folds cut across.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitAxis {
    Rows,
    Columns,
}

/// A replicated k-fold assignment: `assignments[rep][object]` is the fold
/// index of that object in that replication. Folds are balanced within ±1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub replications: usize,
    pub folds: usize,
    pub axis: SplitAxis,
    pub seed: u64,
    pub assignments: Vec<Vec<usize>>,
}

impl SplitPlan {
    /// Object indices held out (test) and kept (train) for one (rep, fold).
    pub fn split(&self, rep: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let assignment = &self.assignments[rep];
        let test: Vec<usize> = (0..assignment.len()).filter(|&i| assignment[i] == fold).collect();
        let train: Vec<usize> = (0..assignment.len()).filter(|&i| assignment[i] != fold).collect();
        (train, test)
    }

    pub fn n_objects(&self) -> usize {
        self.assignments.first().map_or(0, |a| a.len())
    }
}

/// Builds a seeded, deterministic split plan: each replication shuffles the
/// objects with its own ChaCha8 stream and deals them round-robin into folds.
pub fn make_splits(n: usize, replications: usize, folds: usize, axis: SplitAxis, seed: u64) -> Result<SplitPlan> {
    if folds < 2 {
        return Err(KbmfError::Parameter(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(KbmfError::Parameter(format!("cannot split {n} objects into {folds} folds")));
    }
    if replications == 0 {
        return Err(KbmfError::Parameter("need at least one replication".into()));
    }
    let mut assignments = Vec::with_capacity(replications);
    for rep in 0..replications {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut assignment = vec![0usize; n];
        for (position, &object) in order.iter().enumerate() {
            assignment[object] = position % folds;
        }
        assignments.push(assignment);
    }
    Ok(SplitPlan {
        replications,
        folds,
        axis,
        seed,
        assignments,
    })
}
