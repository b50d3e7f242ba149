//! Scalar distribution utilities: standard-normal pdf/cdf, one-sided truncated
//! normal moments and entropy, and the Gamma/Normal posterior parameter records
//! shared by the inference engine.
//!
//! Tail-sensitive quantities (`log Φ`, the ratio `φ/Φ`) switch to an asymptotic
//! series below z = -30, where direct evaluation of Φ starts losing precision
//! and eventually underflows (near z ≈ -38 in doubles).

use libm::erfc;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{KbmfError, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_2PI: f64 = 1.8378770664093453;
/// z below which Φ(z) is evaluated through the Mills-ratio asymptotic series.
const ASYMPTOTIC_Z: f64 = -30.0;

/// φ(x), the standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Φ(x), the standard normal cumulative distribution function.
///
/// Uses the complementary error function for |x| ≤ 30 and the log-space
/// asymptotic branch below, so the result stays positive (subnormal) down to
/// x ≈ -38 instead of underflowing to zero.
pub fn norm_cdf(x: f64) -> f64 {
    if x < ASYMPTOTIC_Z {
        norm_log_cdf(x).exp()
    } else {
        0.5 * erfc(-x / SQRT_2)
    }
}

/// log Φ(x), finite for all finite x.
pub fn norm_log_cdf(x: f64) -> f64 {
    if x >= ASYMPTOTIC_Z {
        let c = 0.5 * erfc(-x / SQRT_2);
        c.ln()
    } else {
        // Φ(z) = φ(z)/(-z) · S(z) with S the alternating (2k-1)!! series.
        let log_pdf = -0.5 * x * x - 0.5 * LN_2PI;
        log_pdf - (-x).ln() + mills_series(x).ln()
    }
}

/// Truncated series Σ (-1)^k (2k-1)!!/z^{2k}; relative error ~1e-14 at |z|=30.
fn mills_series(z: f64) -> f64 {
    let iz2 = 1.0 / (z * z);
    1.0 - iz2 * (1.0 - iz2 * (3.0 - iz2 * (15.0 - iz2 * (105.0 - iz2 * 945.0))))
}

/// The ratio φ(z)/Φ(z), stable for arbitrarily negative z.
pub fn mills_ratio(z: f64) -> f64 {
    if z >= ASYMPTOTIC_Z {
        norm_pdf(z) / norm_cdf(z)
    } else {
        -z / mills_series(z)
    }
}

/// (φ(x), Φ(x)) as a pair.
pub fn std_normal(x: f64) -> (f64, f64) {
    (norm_pdf(x), norm_cdf(x))
}

/// Parameters of a Gamma posterior in the shape/scale convention
/// (mean = shape·scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPosterior {
    pub shape: f64,
    pub scale: f64,
}

impl GammaPosterior {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0) || !(scale > 0.0) {
            return Err(KbmfError::Parameter(format!(
                "gamma parameters must be positive, got shape={shape}, scale={scale}"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    /// E[ln λ] under this posterior.
    pub fn mean_log(&self) -> f64 {
        statrs::function::gamma::digamma(self.shape) + self.scale.ln()
    }

    /// Differential entropy of the Gamma(shape, scale) density.
    pub fn entropy(&self) -> f64 {
        let a = self.shape;
        a + self.scale.ln()
            + statrs::function::gamma::ln_gamma(a)
            + (1.0 - a) * statrs::function::gamma::digamma(a)
    }

    /// E[ln p(λ)] for a Gamma(prior_shape, prior_scale) prior, under this posterior.
    pub fn expected_log_prior(&self, prior_shape: f64, prior_scale: f64) -> f64 {
        -statrs::function::gamma::ln_gamma(prior_shape) - prior_shape * prior_scale.ln()
            + (prior_shape - 1.0) * self.mean_log()
            - self.mean() / prior_scale
    }
}

/// The conjugate Gamma step: posterior given a prior and the expected squared
/// value of the governed coefficient.
pub fn gamma_update(prior_shape: f64, prior_scale: f64, second_moment: f64) -> Result<GammaPosterior> {
    if !(prior_shape > 0.0) || !(prior_scale > 0.0) {
        return Err(KbmfError::Parameter(format!(
            "gamma prior must be positive, got shape={prior_shape}, scale={prior_scale}"
        )));
    }
    if !(second_moment >= 0.0) {
        return Err(KbmfError::Parameter(format!(
            "second moment must be non-negative, got {second_moment}"
        )));
    }
    GammaPosterior::new(
        prior_shape + 0.5,
        1.0 / (1.0 / prior_scale + 0.5 * second_moment),
    )
}

/// A grid of independent Gamma posteriors (one per matrix entry).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaGrid {
    pub shape: DMatrix<f64>,
    pub scale: DMatrix<f64>,
}

impl GammaGrid {
    /// Every entry at the same (shape, scale) starting point.
    pub fn constant(nrows: usize, ncols: usize, shape: f64, scale: f64) -> Self {
        Self {
            shape: DMatrix::from_element(nrows, ncols, shape),
            scale: DMatrix::from_element(nrows, ncols, scale),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> GammaPosterior {
        GammaPosterior {
            shape: self.shape[(i, j)],
            scale: self.scale[(i, j)],
        }
    }

    pub fn set_entry(&mut self, i: usize, j: usize, g: GammaPosterior) {
        self.shape[(i, j)] = g.shape;
        self.scale[(i, j)] = g.scale;
    }

    /// Elementwise posterior means shape·scale.
    pub fn mean(&self) -> DMatrix<f64> {
        self.shape.component_mul(&self.scale)
    }
}

/// A matrix-variate normal posterior factored over columns: a dense mean and
/// one covariance per factored column (or a single shared covariance when the
/// update makes every column's covariance identical).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixNormalPosterior {
    pub mean: DMatrix<f64>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl MatrixNormalPosterior {
    pub fn new(mean: DMatrix<f64>, covariances: Vec<DMatrix<f64>>) -> Self {
        Self { mean, covariances }
    }

    /// The single covariance shared by every column.
    ///
    /// Panics if the posterior carries per-column covariances.
    pub fn shared_cov(&self) -> &DMatrix<f64> {
        assert_eq!(self.covariances.len(), 1, "posterior has per-column covariances");
        &self.covariances[0]
    }

    /// Σ_cols (μ_c μ_cᵀ + Σ_c): the summed second moment of the columns.
    /// Only valid for the shared-covariance layout.
    pub fn column_scatter(&self) -> DMatrix<f64> {
        let n = self.mean.ncols() as f64;
        &self.mean * self.mean.transpose() + self.shared_cov() * n
    }

    /// Checks symmetry (1e-9) and positive definiteness of every covariance.
    pub fn validate(&self) -> Result<()> {
        for (idx, cov) in self.covariances.iter().enumerate() {
            crate::linalg::check_symmetric(cov, 1e-9)
                .map_err(|e| KbmfError::Data(format!("covariance {idx}: {e}")))?;
            if nalgebra::Cholesky::new(cov.clone()).is_none() {
                return Err(KbmfError::Numerical(format!(
                    "covariance {idx} is not positive definite"
                )));
            }
        }
        Ok(())
    }
}

/// Moments of a one-sided truncated normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub mean: f64,
    pub variance: f64,
    /// log of the normalizer Φ(z), z = (label·mu − margin)/sigma.
    pub log_z: f64,
    pub entropy: f64,
}

/// Moments of N(mu, sigma²) restricted to { f : f·label > margin }.
///
/// label ∈ {−1, +1}. All ratios are evaluated through [`mills_ratio`] so the
/// result stays accurate when the admissible region is deep in the tail.
pub fn truncated_moments(mu: f64, sigma: f64, label: f64, margin: f64) -> Result<TruncatedMoments> {
    if !(sigma > 0.0) {
        return Err(KbmfError::Parameter(format!(
            "truncation requires sigma > 0, got {sigma}"
        )));
    }
    if label != 1.0 && label != -1.0 {
        return Err(KbmfError::Parameter(format!(
            "label must be +1 or -1, got {label}"
        )));
    }
    let z = (label * mu - margin) / sigma;
    let r = mills_ratio(z);
    let mean = mu + label * sigma * r;
    let variance = sigma * sigma * truncated_variance_factor(z, r);
    let log_z = norm_log_cdf(z);
    // Closed form for the one-sided truncation: the Gaussian entropy plus the
    // log-mass kept, minus the tail correction z·r/2.
    let entropy = 0.5 * (LN_2PI + 1.0) + sigma.ln() + log_z - 0.5 * z * r;
    Ok(TruncatedMoments {
        mean,
        variance,
        log_z,
        entropy,
    })
}

/// (1 − z·r − r²) with an asymptotic fallback where the direct form cancels.
/// Capped one ulp below 1 so the variance stays strictly under σ² even when
/// the true reduction falls below double precision.
fn truncated_variance_factor(z: f64, r: f64) -> f64 {
    let factor = if z >= ASYMPTOTIC_Z {
        1.0 - z * r - r * r
    } else {
        let iz2 = 1.0 / (z * z);
        iz2 * (1.0 - iz2 * (6.0 - iz2 * 50.0))
    };
    factor.min(1.0 - f64::EPSILON)
}
