//! Evidence-lower-bound assembly: expected log joint under the factorized
//! posterior plus the posterior entropies, term by term. Everything here is
//! read-only; the updates own the state.

use nalgebra::DMatrix;

use super::{DomainPosteriors, FitState, HyperParams, OutputPosterior, Variant};
use crate::error::{KbmfError, Result};
use crate::kernels::KernelBundle;
use crate::linalg::{frob, spd_log_det};

const LN_2PI: f64 = 1.8378770664093453;
const LN_2PI_E: f64 = 2.8378770664093453;

fn check(term: f64, name: &str) -> Result<f64> {
    if term.is_finite() {
        Ok(term)
    } else {
        Err(KbmfError::Numerical(format!("ELBO term '{name}' is not finite ({term})")))
    }
}

/// E_q[log p(Y, Θ, Ξ | K)] − E_q[log q(Θ, Ξ)] for the current state.
pub fn elbo(
    state: &FitState,
    kx: &KernelBundle,
    kz: &KernelBundle,
    y: &DMatrix<f64>,
    hp: &HyperParams,
    variant: Variant,
) -> Result<f64> {
    let mut total = 0.0;
    total += domain_terms(&state.x, kx, hp, "x")?;
    total += domain_terms(&state.z, kz, hp, "z")?;
    total += output_terms(state, y, hp, variant)?;
    check(total, "total")
}

fn domain_terms(d: &DomainPosteriors, bundle: &KernelBundle, hp: &HyperParams, tag: &str) -> Result<f64> {
    let n = d.n();
    let r = d.rank();
    let p = d.p();
    let nf = n as f64;
    let sg2 = hp.sigma_g * hp.sigma_g;

    // Projection precisions: expected log prior plus entropy.
    let mut lambda_term = 0.0;
    // Projections given precisions.
    let mut proj_term = 0.0;
    for s in 0..r {
        let cov = &d.proj.covariances[s];
        for i in 0..n {
            let post = d.lambda.entry(i, s);
            lambda_term += post.expected_log_prior(hp.alpha_lambda, hp.beta_lambda) + post.entropy();
            let second_moment = d.proj.mean[(i, s)].powi(2) + cov[(i, i)];
            proj_term += -0.5 * LN_2PI + 0.5 * post.mean_log() - 0.5 * post.mean() * second_moment;
        }
    }
    check(lambda_term, &format!("lambda[{tag}]"))?;
    check(proj_term, &format!("proj|lambda[{tag}]"))?;

    let mut proj_entropy = 0.0;
    for s in 0..r {
        proj_entropy += 0.5 * nf * LN_2PI_E
            + 0.5 * spd_log_det(&d.proj.covariances[s], &format!("proj cov {s} [{tag}]"))?;
    }
    check(proj_entropy, &format!("H[proj][{tag}]"))?;

    // Kernel-specific components given projections.
    let mut comp_residual = 0.0;
    for (m, comp) in d.components.iter().enumerate() {
        let mean_pred = d.proj.mean.transpose() * bundle.matrix(m);
        comp_residual += frob(&comp.mean, &comp.mean) + nf * comp.shared_cov().trace()
            - 2.0 * frob(&comp.mean, &mean_pred);
    }
    let gram = bundle.gram_sum();
    for s in 0..r {
        let a_s = d.proj.mean.column(s);
        comp_residual += (gram * a_s).dot(&a_s) + frob(&d.proj.covariances[s], gram);
    }
    let comp_term = -0.5 * (nf * r as f64 * p as f64) * (LN_2PI + sg2.ln()) - comp_residual / (2.0 * sg2);
    check(comp_term, &format!("components|proj[{tag}]"))?;

    let mut comp_entropy = 0.0;
    for (m, comp) in d.components.iter().enumerate() {
        comp_entropy += nf * (r as f64) * 0.5 * LN_2PI_E
            + 0.5 * nf * spd_log_det(comp.shared_cov(), &format!("component cov {m} [{tag}]"))?;
    }
    check(comp_entropy, &format!("H[components][{tag}]"))?;

    let mut total = lambda_term + proj_term + proj_entropy + comp_term + comp_entropy;

    if let Some(mkl) = &d.mkl {
        let sh2 = hp.sigma_h * hp.sigma_h;
        let e_mean = &mkl.weights.mean;
        let e_cov = mkl.weights.shared_cov();

        let mut eta_term = 0.0;
        let mut weight_term = 0.0;
        for m in 0..p {
            let post = mkl.eta.entry(m, 0);
            eta_term += post.expected_log_prior(hp.alpha_eta, hp.beta_eta) + post.entropy();
            let second_moment = e_mean[(m, 0)].powi(2) + e_cov[(m, m)];
            weight_term += -0.5 * LN_2PI + 0.5 * post.mean_log() - 0.5 * post.mean() * second_moment;
        }
        check(eta_term, &format!("eta[{tag}]"))?;
        check(weight_term, &format!("weights|eta[{tag}]"))?;

        let weight_entropy =
            0.5 * p as f64 * LN_2PI_E + 0.5 * spd_log_det(e_cov, &format!("weight cov [{tag}]"))?;

        // Composite components given weights and kernel-specific components.
        let h_mean = &mkl.composite.mean;
        let h_cov = mkl.composite.shared_cov();
        let mut residual = frob(h_mean, h_mean) + nf * h_cov.trace();
        for (m, comp) in d.components.iter().enumerate() {
            residual -= 2.0 * e_mean[(m, 0)] * frob(h_mean, &comp.mean);
        }
        for m in 0..p {
            for o in 0..p {
                let e2 = e_mean[(m, 0)] * e_mean[(o, 0)] + e_cov[(m, o)];
                let mut block = frob(&d.components[m].mean, &d.components[o].mean);
                if m == o {
                    block += nf * d.components[m].shared_cov().trace();
                }
                residual += e2 * block;
            }
        }
        let composite_term = -0.5 * nf * r as f64 * (LN_2PI + sh2.ln()) - residual / (2.0 * sh2);
        check(composite_term, &format!("composite|weights[{tag}]"))?;

        let composite_entropy = nf * (r as f64) * 0.5 * LN_2PI_E
            + 0.5 * nf * spd_log_det(h_cov, &format!("composite cov [{tag}]"))?;

        total += eta_term + weight_term + weight_entropy + composite_term + composite_entropy;
    }

    Ok(total)
}

fn output_terms(state: &FitState, y: &DMatrix<f64>, hp: &HyperParams, variant: Variant) -> Result<f64> {
    let latent_x = state.x.latent();
    let latent_z = state.z.latent();
    let cells = (y.nrows() * y.ncols()) as f64;
    let cross_product = latent_x.mean.transpose() * &latent_z.mean;
    let quad = frob(&latent_x.column_scatter(), &latent_z.column_scatter());

    match (variant, &state.output) {
        (Variant::MklBinary | Variant::TwinKernelBinary, OutputPosterior::Binary(f)) => {
            let mut second_moment = 0.0;
            for (mean, var) in f.mean.iter().zip(f.variance.iter()) {
                second_moment += mean * mean + var;
            }
            let likelihood =
                -0.5 * cells * LN_2PI - 0.5 * (second_moment - 2.0 * frob(&f.mean, &cross_product) + quad);
            check(likelihood, "outputs|latents")?;
            // The label factor δ(f·y > ν) is identically one on the support
            // of q(F), so it contributes nothing.
            let entropy = f.entropy.sum();
            check(entropy, "H[outputs]")?;
            Ok(likelihood + entropy)
        }
        (Variant::MklRegression, OutputPosterior::Regression) => {
            let sy2 = hp.sigma_y * hp.sigma_y;
            let residual = frob(y, y) - 2.0 * frob(y, &cross_product) + quad;
            let likelihood = -0.5 * cells * (LN_2PI + sy2.ln()) - residual / (2.0 * sy2);
            check(likelihood, "targets|latents")
        }
        _ => Err(KbmfError::Numerical(
            "output posterior does not match the variant".into(),
        )),
    }
}
