//! Coordinate-ascent variational inference for kernelized Bayesian matrix
//! factorization, in three flavours:
//!
//! - multi-kernel with binary outputs (truncated-normal output layer),
//! - multi-kernel with real-valued outputs,
//! - single kernel per domain with binary outputs (no kernel-weight layer;
//!   the kernel-specific components couple the domains directly).
//!
//! Every update is the exact conditional of the factorized posterior, so the
//! evidence lower bound is non-decreasing across sweeps; [`FitTrace`] records
//! it per iteration for convergence control.

mod elbo;
mod fit;
mod model_io;
mod updates;

pub use elbo::elbo as elbo_of;
pub use fit::{fit, fit_with, DomainOrder, FitOptions};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{truncated_moments, GammaGrid, MatrixNormalPosterior};
use crate::error::{KbmfError, Result};
use crate::kernels::KernelBundle;

/// Which generative model the engine runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Multiple kernels per domain, binary target matrix.
    MklBinary,
    /// Multiple kernels per domain, real-valued target matrix.
    MklRegression,
    /// One kernel per domain, binary target matrix.
    TwinKernelBinary,
}

impl Variant {
    pub fn is_binary(self) -> bool {
        matches!(self, Variant::MklBinary | Variant::TwinKernelBinary)
    }

    pub fn has_kernel_weights(self) -> bool {
        matches!(self, Variant::MklBinary | Variant::MklRegression)
    }
}

impl std::str::FromStr for Variant {
    type Err = KbmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mkl-binary" => Ok(Variant::MklBinary),
            "mkl-regression" => Ok(Variant::MklRegression),
            "twin-kernel-binary" => Ok(Variant::TwinKernelBinary),
            other => Err(KbmfError::Config(format!(
                "unknown variant '{other}' (expected mkl-binary, mkl-regression, or twin-kernel-binary)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::MklBinary => "mkl-binary",
            Variant::MklRegression => "mkl-regression",
            Variant::TwinKernelBinary => "twin-kernel-binary",
        };
        f.write_str(s)
    }
}

/// The two object domains: rows of Y (`X`) and columns of Y (`Z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Z,
}

/// Hyperparameters and run controls.
///
/// `margin_nu` drives the binary variants, `sigma_y` the regression variant;
/// the inactive one is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha_eta: f64,
    pub beta_eta: f64,
    pub alpha_lambda: f64,
    pub beta_lambda: f64,
    pub sigma_g: f64,
    pub sigma_h: f64,
    /// Margin of the low-density band between classes (binary variants).
    pub margin_nu: f64,
    /// Output noise level (regression variant).
    pub sigma_y: f64,
    /// Latent subspace dimensionality R.
    pub rank: usize,
    pub max_iter: usize,
    /// Relative ELBO change below which the fit stops.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha_eta: 1.0,
            beta_eta: 1.0,
            alpha_lambda: 1.0,
            beta_lambda: 1.0,
            sigma_g: 0.1,
            sigma_h: 0.1,
            margin_nu: 1.0,
            sigma_y: 1.0,
            rank: 5,
            max_iter: 200,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self, variant: Variant) -> Result<()> {
        let positives = [
            ("alpha_eta", self.alpha_eta),
            ("beta_eta", self.beta_eta),
            ("alpha_lambda", self.alpha_lambda),
            ("beta_lambda", self.beta_lambda),
            ("sigma_g", self.sigma_g),
            ("sigma_h", self.sigma_h),
            ("rel_tol", self.rel_tol),
        ];
        for (name, value) in positives {
            if !(value > 0.0) {
                return Err(KbmfError::Parameter(format!("{name} must be positive, got {value}")));
            }
        }
        if self.rank == 0 {
            return Err(KbmfError::Parameter("rank must be at least 1".into()));
        }
        match variant {
            Variant::MklBinary | Variant::TwinKernelBinary => {
                if !self.margin_nu.is_finite() {
                    return Err(KbmfError::Parameter(format!(
                        "margin_nu must be finite, got {}",
                        self.margin_nu
                    )));
                }
            }
            Variant::MklRegression => {
                if !(self.sigma_y > 0.0) {
                    return Err(KbmfError::Parameter(format!(
                        "sigma_y must be positive, got {}",
                        self.sigma_y
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Variational posteriors for one domain.
///
/// Shapes, for N objects, P kernels, and rank R:
/// - `lambda`: N×R Gamma grid of projection precisions,
/// - `proj`: projection matrix posterior, mean N×R with one N×N covariance per
///   latent component,
/// - `components`: P kernel-specific component posteriors, each mean R×N with
///   a single R×R covariance shared by all object columns,
/// - `mkl`: kernel weights and composite components; absent for the
///   single-kernel variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPosteriors {
    pub lambda: GammaGrid,
    pub proj: MatrixNormalPosterior,
    pub components: Vec<MatrixNormalPosterior>,
    pub mkl: Option<MklPosteriors>,
}

/// The multiple-kernel-learning block of one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MklPosteriors {
    /// P×1 Gamma grid of kernel-weight precisions.
    pub eta: GammaGrid,
    /// Kernel weights: mean P×1 with a P×P covariance.
    pub weights: MatrixNormalPosterior,
    /// Composite components: mean R×N with a shared R×R covariance.
    pub composite: MatrixNormalPosterior,
}

impl DomainPosteriors {
    pub fn n(&self) -> usize {
        self.proj.mean.nrows()
    }

    pub fn rank(&self) -> usize {
        self.proj.mean.ncols()
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    /// The per-object latent representation that couples the two domains:
    /// the composite components when kernel weights are present, otherwise
    /// the single kernel-specific component block.
    pub fn latent(&self) -> &MatrixNormalPosterior {
        match &self.mkl {
            Some(mkl) => &mkl.composite,
            None => &self.components[0],
        }
    }

    /// Posterior means of the kernel weights, when the variant has them.
    pub fn kernel_weights(&self) -> Option<Vec<f64>> {
        self.mkl.as_ref().map(|m| m.weights.mean.column(0).iter().copied().collect())
    }
}

/// Truncated-normal summaries of the predicted-output matrix for the binary
/// variants. The underlying location-scale normal has unit variance; the
/// fields below are the post-truncation per-entry summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryOutputs {
    pub mean: DMatrix<f64>,
    pub variance: DMatrix<f64>,
    pub log_z: DMatrix<f64>,
    pub entropy: DMatrix<f64>,
}

/// Posterior over the predicted-output matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputPosterior {
    Binary(BinaryOutputs),
    /// Real-valued outputs are observed directly; there is no output factor.
    Regression,
}

impl OutputPosterior {
    pub fn binary(&self) -> Option<&BinaryOutputs> {
        match self {
            OutputPosterior::Binary(b) => Some(b),
            OutputPosterior::Regression => None,
        }
    }
}

/// Per-iteration ELBO values and convergence outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub elbo_per_iter: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub wall_time_secs: f64,
}

impl FitTrace {
    pub fn empty() -> Self {
        Self {
            elbo_per_iter: Vec::new(),
            iterations_run: 0,
            converged: false,
            wall_time_secs: 0.0,
        }
    }
}

/// Full mutable inference state: both domains plus the output posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitState {
    pub x: DomainPosteriors,
    pub z: DomainPosteriors,
    pub output: OutputPosterior,
}

impl FitState {
    pub fn domain(&self, side: Side) -> &DomainPosteriors {
        match side {
            Side::X => &self.x,
            Side::Z => &self.z,
        }
    }

    /// Swaps the two domains and transposes the output posterior; running the
    /// swapped state against (kz, kx, yᵀ) with the domain order reversed
    /// retraces the original fit with the roles exchanged.
    pub fn mirrored(mut self) -> Self {
        std::mem::swap(&mut self.x, &mut self.z);
        if let OutputPosterior::Binary(b) = &mut self.output {
            b.mean = b.mean.transpose();
            b.variance = b.variance.transpose();
            b.log_z = b.log_z.transpose();
            b.entropy = b.entropy.transpose();
        }
        self
    }
}

/// A fitted model: variant, hyperparameters, both domain posteriors, the
/// output posterior, and the ELBO trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbmfModel {
    pub format_version: u32,
    pub variant: Variant,
    pub hyperparams: HyperParams,
    pub x: DomainPosteriors,
    pub z: DomainPosteriors,
    pub output: OutputPosterior,
    pub trace: FitTrace,
}

/// Current model JSON format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

impl KbmfModel {
    /// In-matrix predicted scores: the inner products of the posterior-mean
    /// latent representations, one per training pair.
    pub fn fitted_scores(&self) -> DMatrix<f64> {
        self.x.latent().mean.transpose() * &self.z.latent().mean
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        model_io::save_json(self, path)
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        model_io::load_json(path)
    }

    pub fn to_json_string(&self) -> Result<String> {
        model_io::to_json_string(self)
    }
}

fn validate_targets(y: &DMatrix<f64>, variant: Variant) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(KbmfError::Data("target matrix contains non-finite values".into()));
    }
    if variant.is_binary() {
        for v in y.iter() {
            if *v != 1.0 && *v != -1.0 {
                return Err(KbmfError::Data(format!(
                    "binary variants require labels in {{-1, +1}}, found {v}"
                )));
            }
        }
    }
    Ok(())
}

/// Builds the deterministic starting state for a fit.
///
/// The projection means are drawn i.i.d. standard normal from a ChaCha8
/// stream seeded with `hp.seed` (domain X first, column-major); component
/// means start at μ(A)ᵀK_m, the composite at the average of the component
/// blocks, kernel weights at one, precisions at their priors, and binary
/// output means at label·(margin + 1).
pub fn init_state(
    kx: &KernelBundle,
    kz: &KernelBundle,
    y: &DMatrix<f64>,
    hp: &HyperParams,
    variant: Variant,
) -> Result<FitState> {
    hp.validate(variant)?;
    if y.nrows() != kx.n() || y.ncols() != kz.n() {
        return Err(KbmfError::Shape(format!(
            "target matrix is {}x{}, kernels give {}x{}",
            y.nrows(),
            y.ncols(),
            kx.n(),
            kz.n()
        )));
    }
    validate_targets(y, variant)?;
    if variant == Variant::TwinKernelBinary && (kx.p() != 1 || kz.p() != 1) {
        return Err(KbmfError::Parameter(format!(
            "twin-kernel variant takes exactly one kernel per domain, got {} and {}",
            kx.p(),
            kz.p()
        )));
    }
    if hp.rank > kx.n().min(kz.n()) {
        log::warn!(
            "rank {} exceeds min(N_x, N_z) = {}; the model stays well-defined but components are redundant",
            hp.rank,
            kx.n().min(kz.n())
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let x = init_domain(kx, hp, variant, &mut rng);
    let z = init_domain(kz, hp, variant, &mut rng);

    let output = if variant.is_binary() {
        let nu = hp.margin_nu;
        let shape = (y.nrows(), y.ncols());
        let mut mean = DMatrix::zeros(shape.0, shape.1);
        let mut variance = DMatrix::zeros(shape.0, shape.1);
        let mut log_z = DMatrix::zeros(shape.0, shape.1);
        let mut entropy = DMatrix::zeros(shape.0, shape.1);
        for j in 0..shape.1 {
            for i in 0..shape.0 {
                let label = y[(i, j)];
                let location = label * (nu + 1.0);
                let tm = truncated_moments(location, 1.0, label, nu)?;
                // The documented starting mean is label·(ν+1); the remaining
                // summaries are taken at that location.
                mean[(i, j)] = location;
                variance[(i, j)] = tm.variance;
                log_z[(i, j)] = tm.log_z;
                entropy[(i, j)] = tm.entropy;
            }
        }
        OutputPosterior::Binary(BinaryOutputs {
            mean,
            variance,
            log_z,
            entropy,
        })
    } else {
        OutputPosterior::Regression
    };

    Ok(FitState { x, z, output })
}

fn init_domain(
    bundle: &KernelBundle,
    hp: &HyperParams,
    variant: Variant,
    rng: &mut ChaCha8Rng,
) -> DomainPosteriors {
    let n = bundle.n();
    let p = bundle.p();
    let r = hp.rank;

    // Column-major draw order keeps initialization reproducible.
    let mut proj_mean = DMatrix::zeros(n, r);
    for s in 0..r {
        for i in 0..n {
            proj_mean[(i, s)] = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
    }
    let proj_covs = vec![DMatrix::identity(n, n); r];

    let sg2 = hp.sigma_g * hp.sigma_g;
    let components: Vec<MatrixNormalPosterior> = (0..p)
        .map(|m| {
            let mean = proj_mean.transpose() * bundle.matrix(m);
            MatrixNormalPosterior::new(mean, vec![DMatrix::identity(r, r) * sg2])
        })
        .collect();

    let mkl = if variant.has_kernel_weights() {
        let sh2 = hp.sigma_h * hp.sigma_h;
        // Average of the component blocks: starting from the sum puts the
        // composite a factor P above the components and strands the fit in a
        // scale-degenerate basin.
        let mut composite_mean = DMatrix::zeros(r, n);
        for c in &components {
            composite_mean += &c.mean;
        }
        composite_mean /= p as f64;
        Some(MklPosteriors {
            eta: GammaGrid::constant(p, 1, hp.alpha_eta, hp.beta_eta),
            weights: MatrixNormalPosterior::new(
                DMatrix::from_element(p, 1, 1.0),
                vec![DMatrix::identity(p, p)],
            ),
            composite: MatrixNormalPosterior::new(
                composite_mean,
                vec![DMatrix::identity(r, r) * sh2],
            ),
        })
    } else {
        None
    };

    DomainPosteriors {
        lambda: GammaGrid::constant(n, r, hp.alpha_lambda, hp.beta_lambda),
        proj: MatrixNormalPosterior::new(proj_mean, proj_covs),
        components,
        mkl,
    }
}
