//! Construction, validation, and caching of the per-domain kernel matrices.
//!
//! A [`KernelBundle`] is a stack of symmetric N×N similarity matrices for one
//! domain together with a lazily computed cache of Σ_m K_m K_mᵀ, the quantity
//! the projection update needs on every sweep. Bundles are immutable after
//! construction, so the cache can be shared freely across threads.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{KbmfError, Result};
use crate::linalg;

/// Absolute tolerance for accepting an input matrix as symmetric; matrices
/// within tolerance are symmetrized as (K + Kᵀ)/2 on load.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// A stack of P symmetric N×N kernel matrices for one domain.
#[derive(Debug)]
pub struct KernelBundle {
    matrices: Vec<DMatrix<f64>>,
    names: Vec<String>,
    gram_sum: OnceLock<DMatrix<f64>>,
}

impl Clone for KernelBundle {
    fn clone(&self) -> Self {
        Self {
            matrices: self.matrices.clone(),
            names: self.names.clone(),
            gram_sum: match self.gram_sum.get() {
                Some(g) => OnceLock::from(g.clone()),
                None => OnceLock::new(),
            },
        }
    }
}

impl KernelBundle {
    /// Validates and symmetrizes the member matrices. Names default to
    /// `k0, k1, ...` when not supplied.
    pub fn new(matrices: Vec<DMatrix<f64>>, names: Option<Vec<String>>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(KbmfError::Shape("kernel bundle needs at least one matrix".into()));
        }
        let n = matrices[0].nrows();
        let names = match names {
            Some(names) => {
                if names.len() != matrices.len() {
                    return Err(KbmfError::Shape(format!(
                        "{} names for {} kernels",
                        names.len(),
                        matrices.len()
                    )));
                }
                names
            }
            None => (0..matrices.len()).map(|m| format!("k{m}")).collect(),
        };
        let mut symmetrized = Vec::with_capacity(matrices.len());
        for (matrix, name) in matrices.into_iter().zip(&names) {
            if matrix.nrows() != n || matrix.ncols() != n {
                return Err(KbmfError::Shape(format!(
                    "kernel '{name}' is {}x{}, expected {n}x{n}",
                    matrix.nrows(),
                    matrix.ncols()
                )));
            }
            if matrix.iter().any(|v| !v.is_finite()) {
                return Err(KbmfError::Data(format!("kernel '{name}' contains non-finite values")));
            }
            linalg::check_symmetric(&matrix, SYMMETRY_TOL)
                .map_err(|e| KbmfError::Data(format!("kernel '{name}': {e}")))?;
            symmetrized.push(linalg::symmetrize(&matrix));
        }
        Ok(Self {
            matrices: symmetrized,
            names,
            gram_sum: OnceLock::new(),
        })
    }

    pub fn single(matrix: DMatrix<f64>, name: impl Into<String>) -> Result<Self> {
        Self::new(vec![matrix], Some(vec![name.into()]))
    }

    /// Number of objects N.
    pub fn n(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Number of kernels P.
    pub fn p(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn matrix(&self, m: usize) -> &DMatrix<f64> {
        &self.matrices[m]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Σ_m K_m K_mᵀ, computed on first use and cached.
    pub fn gram_sum(&self) -> &DMatrix<f64> {
        self.gram_sum.get_or_init(|| {
            let n = self.n();
            let mut sum = DMatrix::zeros(n, n);
            for k in &self.matrices {
                sum += k * k.transpose();
            }
            sum
        })
    }

    /// Appends a kernel, revalidating and invalidating the Gram cache.
    pub fn push_kernel(&mut self, matrix: DMatrix<f64>, name: impl Into<String>) -> Result<()> {
        let name = name.into();
        let n = self.n();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(KbmfError::Shape(format!(
                "kernel '{name}' is {}x{}, expected {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(KbmfError::Data(format!("kernel '{name}' contains non-finite values")));
        }
        linalg::check_symmetric(&matrix, SYMMETRY_TOL)?;
        self.matrices.push(linalg::symmetrize(&matrix));
        self.names.push(name);
        self.gram_sum = OnceLock::new();
        Ok(())
    }

    /// Restriction of every kernel to the given objects (rows and columns).
    pub fn select_objects(&self, idx: &[usize]) -> Result<Self> {
        let n = self.n();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(KbmfError::Shape(format!("object index {bad} out of range for N={n}")));
        }
        let matrices = self
            .matrices
            .iter()
            .map(|k| k.select_rows(idx.iter()).select_columns(idx.iter()))
            .collect();
        Self::new(matrices, Some(self.names.clone()))
    }

    /// Cross kernels between `train_idx` objects (rows) and `test_idx`
    /// objects (columns), one per member kernel.
    pub fn cross_slice(&self, train_idx: &[usize], test_idx: &[usize]) -> Result<CrossKernelBundle> {
        let n = self.n();
        for &i in train_idx.iter().chain(test_idx.iter()) {
            if i >= n {
                return Err(KbmfError::Shape(format!("object index {i} out of range for N={n}")));
            }
        }
        let matrices = self
            .matrices
            .iter()
            .map(|k| k.select_rows(train_idx.iter()).select_columns(test_idx.iter()))
            .collect();
        CrossKernelBundle::new(matrices)
    }
}

/// Cross-kernel columns for out-of-matrix objects: P matrices, each
/// N_train×N_test, column t holding k_m(·, test object t).
#[derive(Debug, Clone)]
pub struct CrossKernelBundle {
    matrices: Vec<DMatrix<f64>>,
}

impl CrossKernelBundle {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(KbmfError::Shape("cross-kernel bundle needs at least one matrix".into()));
        }
        let shape = matrices[0].shape();
        for (m, matrix) in matrices.iter().enumerate() {
            if matrix.shape() != shape {
                return Err(KbmfError::Shape(format!(
                    "cross kernel {m} is {:?}, expected {:?}",
                    matrix.shape(),
                    shape
                )));
            }
            if matrix.iter().any(|v| !v.is_finite()) {
                return Err(KbmfError::Data(format!("cross kernel {m} contains non-finite values")));
            }
        }
        Ok(Self { matrices })
    }

    pub fn p(&self) -> usize {
        self.matrices.len()
    }

    pub fn n_train(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn n_test(&self) -> usize {
        self.matrices[0].ncols()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn matrix(&self, m: usize) -> &DMatrix<f64> {
        &self.matrices[m]
    }
}

/// Gaussian (RBF) kernel exp(−‖x_i − x_j‖²/(2·width²)) between the columns of
/// two feature matrices (features in rows, objects in columns).
pub fn gaussian_kernel(x1: &DMatrix<f64>, x2: &DMatrix<f64>, width: f64) -> Result<DMatrix<f64>> {
    if x1.nrows() != x2.nrows() {
        return Err(KbmfError::Shape(format!(
            "feature dimensions differ: {} vs {}",
            x1.nrows(),
            x2.nrows()
        )));
    }
    if !(width > 0.0) {
        return Err(KbmfError::Parameter(format!("kernel width must be positive, got {width}")));
    }
    if x1.iter().chain(x2.iter()).any(|v| !v.is_finite()) {
        return Err(KbmfError::Data("features contain non-finite values".into()));
    }
    let d = x1.nrows();
    let denom = 2.0 * width * width;
    let mut k = DMatrix::zeros(x1.ncols(), x2.ncols());
    for i in 0..x1.ncols() {
        for j in 0..x2.ncols() {
            let mut dist2 = 0.0;
            for f in 0..d {
                let diff = x1[(f, i)] - x2[(f, j)];
                dist2 += diff * diff;
            }
            k[(i, j)] = (-dist2 / denom).exp();
        }
    }
    Ok(k)
}

/// One linear kernel per feature row: matrix m has entry (i,j) = x_i^m · x_j^m.
pub fn per_feature_linear_kernels(x: &DMatrix<f64>) -> Result<KernelBundle> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(KbmfError::Shape(format!("feature matrix is {}x{}", x.nrows(), x.ncols())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(KbmfError::Data("features contain non-finite values".into()));
    }
    let mut matrices = Vec::with_capacity(x.nrows());
    let mut names = Vec::with_capacity(x.nrows());
    for m in 0..x.nrows() {
        let row = x.row(m).transpose();
        matrices.push(&row * row.transpose());
        names.push(format!("feature{m}"));
    }
    KernelBundle::new(matrices, Some(names))
}

/// Cross version of [`per_feature_linear_kernels`] between training and test
/// feature matrices (shared feature dimension).
pub fn per_feature_linear_cross(x_train: &DMatrix<f64>, x_test: &DMatrix<f64>) -> Result<CrossKernelBundle> {
    if x_train.nrows() != x_test.nrows() {
        return Err(KbmfError::Shape(format!(
            "feature dimensions differ: {} vs {}",
            x_train.nrows(),
            x_test.nrows()
        )));
    }
    let mut matrices = Vec::with_capacity(x_train.nrows());
    for m in 0..x_train.nrows() {
        let train_row = x_train.row(m).transpose();
        let test_row = x_test.row(m).transpose();
        matrices.push(&train_row * test_row.transpose());
    }
    CrossKernelBundle::new(matrices)
}

/// Jaccard similarity between the column supports of a binary membership
/// matrix: entry (j,j') = |S_j ∩ S_j'| / |S_j ∪ S_j'|, defined as 1.0 when
/// both supports are empty.
pub fn jaccard_kernel(profiles: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    for v in profiles.iter() {
        if *v != 0.0 && *v != 1.0 {
            return Err(KbmfError::Data(format!(
                "membership matrix entries must be 0 or 1, found {v}"
            )));
        }
    }
    let n = profiles.ncols();
    let supports: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..profiles.nrows()).filter(|&i| profiles[(i, j)] == 1.0).collect())
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for jp in j..n {
            let a = &supports[j];
            let b = &supports[jp];
            let inter = intersection_size(a, b);
            let union = a.len() + b.len() - inter;
            let sim = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
            k[(j, jp)] = sim;
            k[(jp, j)] = sim;
        }
    }
    Ok(k)
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    // Both lists are sorted by construction.
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Per-matrix findings from [`validate_matrices`] / [`validate_bundle`].
#[derive(Debug, Clone)]
pub struct MatrixFindings {
    pub name: String,
    pub symmetry_defect: f64,
    pub nan_count: usize,
    /// Power-iteration estimates; absent when the matrix is not finite.
    pub min_eigenvalue: Option<f64>,
    pub max_eigenvalue: Option<f64>,
}

/// Diagnostic report over a set of candidate kernel matrices.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub findings: Vec<MatrixFindings>,
}

impl ValidationReport {
    pub fn all_symmetric(&self, tol: f64) -> bool {
        self.findings.iter().all(|f| f.symmetry_defect <= tol)
    }

    pub fn total_nan_count(&self) -> usize {
        self.findings.iter().map(|f| f.nan_count).sum()
    }
}

/// Reports symmetry defect, NaN count, and eigenvalue estimates for raw
/// matrices (before any bundle-level symmetrization). Never mutates.
pub fn validate_matrices(matrices: &[DMatrix<f64>], names: &[String]) -> ValidationReport {
    let findings = matrices
        .iter()
        .enumerate()
        .map(|(m, matrix)| {
            let nan_count = matrix.iter().filter(|v| v.is_nan()).count();
            let finite = matrix.iter().all(|v| v.is_finite());
            let (min_eigenvalue, max_eigenvalue) = if finite {
                let sym = linalg::symmetrize(matrix);
                let (lo, hi) = linalg::extreme_eigenvalues(&sym, 200);
                (Some(lo), Some(hi))
            } else {
                (None, None)
            };
            MatrixFindings {
                name: names.get(m).cloned().unwrap_or_else(|| format!("k{m}")),
                symmetry_defect: linalg::symmetry_defect(matrix),
                nan_count,
                min_eigenvalue,
                max_eigenvalue,
            }
        })
        .collect();
    ValidationReport { findings }
}

/// [`validate_matrices`] over the members of an existing bundle.
pub fn validate_bundle(bundle: &KernelBundle) -> ValidationReport {
    validate_matrices(bundle.matrices(), bundle.names())
}
