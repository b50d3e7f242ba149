//! The closed-form coordinate updates. Each method replaces one factor of the
//! approximate posterior with its exact conditional given the others, so any
//! call sequence is valid coordinate ascent on the bound.

use nalgebra::DMatrix;

use super::{FitState, HyperParams, Side, Variant};
use crate::distributions::{gamma_update, truncated_moments};
use crate::error::Result;
use crate::kernels::KernelBundle;
use crate::linalg::{frob, spd_cholesky};

impl FitState {
    fn domain_mut(&mut self, side: Side) -> &mut super::DomainPosteriors {
        match side {
            Side::X => &mut self.x,
            Side::Z => &mut self.z,
        }
    }

    /// Refreshes the projection-precision posteriors from the current
    /// projection second moments: shape α_λ + 1/2, scale
    /// (1/β_λ + E[a²]/2)⁻¹ per entry.
    pub fn update_projection_priors(&mut self, side: Side, hp: &HyperParams) -> Result<()> {
        let d = self.domain_mut(side);
        let (n, r) = d.proj.mean.shape();
        for s in 0..r {
            let cov = &d.proj.covariances[s];
            for i in 0..n {
                let mean = d.proj.mean[(i, s)];
                let second_moment = mean * mean + cov[(i, i)];
                let post = gamma_update(hp.alpha_lambda, hp.beta_lambda, second_moment)?;
                d.lambda.set_entry(i, s, post);
            }
        }
        Ok(())
    }

    /// Projection-matrix update. Per latent component s:
    /// Σ(a_s) = (diag(λ̃_s) + Σ_m K_m K_mᵀ/σ_g²)⁻¹ and
    /// μ(a_s) = Σ(a_s) Σ_m K_m g̃_m(s,·)ᵀ/σ_g².
    pub fn update_projections(&mut self, side: Side, bundle: &KernelBundle, hp: &HyperParams) -> Result<()> {
        let sg2 = hp.sigma_g * hp.sigma_g;
        let gram = bundle.gram_sum().clone();
        let d = self.domain_mut(side);
        let (n, r) = d.proj.mean.shape();
        let lambda_mean = d.lambda.mean();
        for s in 0..r {
            let mut precision = &gram / sg2;
            for i in 0..n {
                precision[(i, i)] += lambda_mean[(i, s)];
            }
            let chol = spd_cholesky(precision, &format!("projection component {s}"))?;
            let mut rhs = DMatrix::zeros(n, 1);
            for (m, comp) in d.components.iter().enumerate() {
                rhs += bundle.matrix(m) * comp.mean.row(s).transpose();
            }
            rhs /= sg2;
            let mean = chol.solve(&rhs);
            d.proj.mean.set_column(s, &mean.column(0));
            d.proj.covariances[s] = chol.inverse();
        }
        Ok(())
    }

    /// Kernel-specific component update for the multi-kernel variants.
    ///
    /// Sweeps kernels in ascending index order, using the freshest values of
    /// the other components (Gauss–Seidel). The covariance is isotropic:
    /// (1/σ_g² + ẽ_m²/σ_h²)⁻¹ · I.
    pub fn update_kernel_components(&mut self, side: Side, bundle: &KernelBundle, hp: &HyperParams) {
        let sg2 = hp.sigma_g * hp.sigma_g;
        let sh2 = hp.sigma_h * hp.sigma_h;
        let d = self.domain_mut(side);
        let r = d.rank();
        let p = d.p();
        let mkl = d.mkl.as_ref().expect("multi-kernel update on a single-kernel state");
        let e_mean = mkl.weights.mean.clone();
        let e_cov = mkl.weights.shared_cov().clone();
        let h_mean = mkl.composite.mean.clone();
        for m in 0..p {
            let em = e_mean[(m, 0)];
            let e2 = em * em + e_cov[(m, m)];
            let var = 1.0 / (1.0 / sg2 + e2 / sh2);
            let mut b = d.proj.mean.transpose() * bundle.matrix(m) / sg2;
            b += &h_mean * (em / sh2);
            for o in 0..p {
                if o == m {
                    continue;
                }
                let cross = em * e_mean[(o, 0)] + e_cov[(m, o)];
                b -= &d.components[o].mean * (cross / sh2);
            }
            d.components[m].mean = b * var;
            d.components[m].covariances[0] = DMatrix::identity(r, r) * var;
        }
    }

    /// Kernel-weight layer update: first the η precisions from the current
    /// weight second moments, then the weight posterior itself with
    /// Σ(e) = (diag(η̃) + M/σ_h²)⁻¹ where M collects Frobenius products of the
    /// component blocks, and μ(e) = Σ(e)·v/σ_h² with v_m = ⟨G̃_m, H̃⟩.
    pub fn update_kernel_weights(&mut self, side: Side, hp: &HyperParams) -> Result<()> {
        let sh2 = hp.sigma_h * hp.sigma_h;
        let d = self.domain_mut(side);
        let n = d.n() as f64;
        let p = d.p();

        {
            let mkl = d.mkl.as_mut().expect("kernel-weight update on a single-kernel state");
            for m in 0..p {
                let em = mkl.weights.mean[(m, 0)];
                let e2 = em * em + mkl.weights.shared_cov()[(m, m)];
                let post = gamma_update(hp.alpha_eta, hp.beta_eta, e2)?;
                mkl.eta.set_entry(m, 0, post);
            }
        }

        let mut gram = DMatrix::zeros(p, p);
        for m in 0..p {
            for o in m..p {
                let v = frob(&d.components[m].mean, &d.components[o].mean);
                gram[(m, o)] = v;
                gram[(o, m)] = v;
            }
            gram[(m, m)] += n * d.components[m].shared_cov().trace();
        }
        let mkl = d.mkl.as_mut().unwrap();
        let eta_mean = mkl.eta.mean();
        let mut precision = gram / sh2;
        for m in 0..p {
            precision[(m, m)] += eta_mean[(m, 0)];
        }
        let chol = spd_cholesky(precision, "kernel weights")?;
        let mut rhs = DMatrix::zeros(p, 1);
        for m in 0..p {
            rhs[(m, 0)] = frob(&d.components[m].mean, &mkl.composite.mean) / sh2;
        }
        mkl.weights.mean = chol.solve(&rhs);
        mkl.weights.covariances[0] = chol.inverse();
        Ok(())
    }

    /// Composite-component update; the one place information crosses between
    /// the domains. Σ(h) = (I/σ_h² + S_other)⁻¹ with S_other the other
    /// domain's summed latent second moment (scaled by 1/σ_y² for real-valued
    /// outputs, where the observed targets stand in for the output posterior).
    pub fn update_composite(
        &mut self,
        side: Side,
        hp: &HyperParams,
        y: &DMatrix<f64>,
        variant: Variant,
    ) -> Result<()> {
        let sh2 = hp.sigma_h * hp.sigma_h;
        let (own, other, output) = match side {
            Side::X => (&mut self.x, &self.z, &self.output),
            Side::Z => (&mut self.z, &self.x, &self.output),
        };
        let r = own.rank();
        let scatter = other.latent().column_scatter();
        let coupling = match variant {
            Variant::MklBinary => {
                let f = &output.binary().expect("binary output state").mean;
                match side {
                    Side::X => other.latent().mean.clone() * f.transpose(),
                    Side::Z => other.latent().mean.clone() * f,
                }
            }
            Variant::MklRegression => {
                let sy2 = hp.sigma_y * hp.sigma_y;
                (match side {
                    Side::X => other.latent().mean.clone() * y.transpose(),
                    Side::Z => other.latent().mean.clone() * y,
                }) / sy2
            }
            Variant::TwinKernelBinary => {
                panic!("composite update does not exist for the single-kernel variant")
            }
        };
        let scatter_scale = match variant {
            Variant::MklRegression => 1.0 / (hp.sigma_y * hp.sigma_y),
            _ => 1.0,
        };
        let mut precision = scatter * scatter_scale;
        for s in 0..r {
            precision[(s, s)] += 1.0 / sh2;
        }
        let chol = spd_cholesky(precision, "composite components")?;

        let mkl = own.mkl.as_mut().expect("composite update on a single-kernel state");
        let mut b = coupling;
        for (m, comp) in own.components.iter().enumerate() {
            b += &comp.mean * (mkl.weights.mean[(m, 0)] / sh2);
        }
        mkl.composite.mean = chol.solve(&b);
        mkl.composite.covariances[0] = chol.inverse();
        Ok(())
    }

    /// Component update for the single-kernel variant, where the
    /// kernel-specific components couple the domains directly:
    /// Σ(g) = (I/σ_g² + S_other)⁻¹, μ(g_i) = Σ(g)(Ãᵀk_i/σ_g² + G̃_other f̃ᵢᵀ).
    pub fn update_twin_components(&mut self, side: Side, bundle: &KernelBundle, hp: &HyperParams) -> Result<()> {
        let sg2 = hp.sigma_g * hp.sigma_g;
        let (own, other, output) = match side {
            Side::X => (&mut self.x, &self.z, &self.output),
            Side::Z => (&mut self.z, &self.x, &self.output),
        };
        let r = own.rank();
        let f = &output.binary().expect("binary output state").mean;
        let mut precision = other.components[0].column_scatter();
        for s in 0..r {
            precision[(s, s)] += 1.0 / sg2;
        }
        let chol = spd_cholesky(precision, "twin kernel components")?;
        let mut b = own.proj.mean.transpose() * bundle.matrix(0) / sg2;
        b += match side {
            Side::X => &other.components[0].mean * f.transpose(),
            Side::Z => &other.components[0].mean * f,
        };
        own.components[0].mean = chol.solve(&b);
        own.components[0].covariances[0] = chol.inverse();
        Ok(())
    }

    /// Output update for the binary variants: each entry becomes the
    /// truncated normal at location h̃_x,iᵀh̃_z,j with unit scale, restricted
    /// to the side of the margin its label demands.
    pub fn update_outputs(&mut self, hp: &HyperParams, y: &DMatrix<f64>) -> Result<()> {
        let locations = self.x.latent().mean.transpose() * &self.z.latent().mean;
        let out = match &mut self.output {
            super::OutputPosterior::Binary(b) => b,
            super::OutputPosterior::Regression => {
                panic!("output update does not exist for the regression variant")
            }
        };
        for j in 0..y.ncols() {
            for i in 0..y.nrows() {
                let tm = truncated_moments(locations[(i, j)], 1.0, y[(i, j)], hp.margin_nu)?;
                out.mean[(i, j)] = tm.mean;
                out.variance[(i, j)] = tm.variance;
                out.log_z[(i, j)] = tm.log_z;
                out.entropy[(i, j)] = tm.entropy;
            }
        }
        Ok(())
    }
}
