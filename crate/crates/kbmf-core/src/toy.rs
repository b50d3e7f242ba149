//! Synthetic benchmark data: two feature panels drawn from isotropic standard
//! normals and a real-valued target matrix built from three paired features
//! per domain plus unit-variance noise. The defaults reproduce the 40×60
//! benchmark with 15- and 10-dimensional features where only features
//! {1, 4, 7} (rows) and {3, 8, 10} (columns) carry signal.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KbmfError, Result};

/// Generator settings. Active feature indices are 1-based and are paired in
/// order: target = Σ_t x[active_x[t]]·z[active_z[t]] + noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub n_x: usize,
    pub n_z: usize,
    pub d_x: usize,
    pub d_z: usize,
    pub active_x: Vec<usize>,
    pub active_z: Vec<usize>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            n_x: 40,
            n_z: 60,
            d_x: 15,
            d_z: 10,
            active_x: vec![1, 4, 7],
            active_z: vec![3, 8, 10],
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

impl ToySpec {
    pub fn validate(&self) -> Result<()> {
        if self.active_x.len() != self.active_z.len() {
            return Err(KbmfError::Parameter(format!(
                "active feature lists must pair up: {} vs {}",
                self.active_x.len(),
                self.active_z.len()
            )));
        }
        for &i in &self.active_x {
            if i == 0 || i > self.d_x {
                return Err(KbmfError::Parameter(format!(
                    "active row feature {i} outside 1..={}",
                    self.d_x
                )));
            }
        }
        for &j in &self.active_z {
            if j == 0 || j > self.d_z {
                return Err(KbmfError::Parameter(format!(
                    "active column feature {j} outside 1..={}",
                    self.d_z
                )));
            }
        }
        if !(self.noise_sd >= 0.0) {
            return Err(KbmfError::Parameter(format!(
                "noise_sd must be non-negative, got {}",
                self.noise_sd
            )));
        }
        if self.n_x == 0 || self.n_z == 0 || self.d_x == 0 || self.d_z == 0 {
            return Err(KbmfError::Parameter("toy dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Generated toy data: features in rows, objects in columns, plus the target
/// matrix and its noiseless counterpart.
#[derive(Debug, Clone)]
pub struct ToyData {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub y_noiseless: DMatrix<f64>,
}

/// Draws the toy data set deterministically from the spec's seed (ChaCha8;
/// X column-major, then Z, then the noise panel).
pub fn toy_generate(spec: &ToySpec) -> Result<ToyData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = draw_matrix(spec.d_x, spec.n_x, &mut rng);
    let z = draw_matrix(spec.d_z, spec.n_z, &mut rng);

    let mut y_noiseless = DMatrix::zeros(spec.n_x, spec.n_z);
    for (&fx, &fz) in spec.active_x.iter().zip(&spec.active_z) {
        for j in 0..spec.n_z {
            for i in 0..spec.n_x {
                y_noiseless[(i, j)] += x[(fx - 1, i)] * z[(fz - 1, j)];
            }
        }
    }
    let mut y = y_noiseless.clone();
    for j in 0..spec.n_z {
        for i in 0..spec.n_x {
            let eps: f64 = rng.sample(rand_distr::StandardNormal);
            y[(i, j)] += spec.noise_sd * eps;
        }
    }
    Ok(ToyData { x, z, y, y_noiseless })
}

fn draw_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = rng.sample(rand_distr::StandardNormal);
        }
    }
    m
}
