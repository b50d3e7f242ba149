//! The fit driver: initialization, the per-iteration update cycle, ELBO
//! tracking, and convergence control.

use std::time::Instant;

use nalgebra::DMatrix;

use super::{
    init_state, FitState, FitTrace, HyperParams, KbmfModel, Side, Variant, MODEL_FORMAT_VERSION,
};
use crate::error::{KbmfError, Result};
use crate::kernels::KernelBundle;

/// Which domain is updated first within each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DomainOrder {
    #[default]
    XThenZ,
    ZThenX,
}

impl DomainOrder {
    fn sides(self) -> [Side; 2] {
        match self {
            DomainOrder::XThenZ => [Side::X, Side::Z],
            DomainOrder::ZThenX => [Side::Z, Side::X],
        }
    }
}

/// Knobs beyond the hyperparameters: the domain update order and an optional
/// externally built starting state (used by mirrored-fit checks).
#[derive(Debug, Default)]
pub struct FitOptions {
    pub domain_order: DomainOrder,
    pub initial_state: Option<FitState>,
}

/// Fits the chosen variant with the default update order (domain X, then
/// domain Z, then the outputs where the variant has them).
pub fn fit(
    kx: &KernelBundle,
    kz: &KernelBundle,
    y: &DMatrix<f64>,
    hp: &HyperParams,
    variant: Variant,
) -> Result<KbmfModel> {
    fit_with(kx, kz, y, hp, variant, FitOptions::default())
}

/// [`fit`] with explicit options.
pub fn fit_with(
    kx: &KernelBundle,
    kz: &KernelBundle,
    y: &DMatrix<f64>,
    hp: &HyperParams,
    variant: Variant,
    options: FitOptions,
) -> Result<KbmfModel> {
    let start = Instant::now();
    let mut state = match options.initial_state {
        Some(state) => {
            check_state_shapes(&state, kx, kz, y, hp, variant)?;
            state
        }
        None => init_state(kx, kz, y, hp, variant)?,
    };

    let mut trace = FitTrace::empty();
    let mut previous_elbo: Option<f64> = None;
    for iteration in 1..=hp.max_iter {
        run_cycle(&mut state, kx, kz, y, hp, variant, options.domain_order)
            .map_err(|e| KbmfError::Numerical(format!("iteration {iteration}: {e}")))?;
        let elbo = super::elbo::elbo(&state, kx, kz, y, hp, variant)
            .map_err(|e| KbmfError::Numerical(format!("iteration {iteration}: {e}")))?;
        trace.elbo_per_iter.push(elbo);
        trace.iterations_run = iteration;
        if let Some(prev) = previous_elbo {
            let denom = prev.abs().max(f64::MIN_POSITIVE);
            if (elbo - prev).abs() / denom < hp.rel_tol {
                trace.converged = true;
                break;
            }
        }
        previous_elbo = Some(elbo);
    }
    trace.wall_time_secs = start.elapsed().as_secs_f64();

    Ok(KbmfModel {
        format_version: MODEL_FORMAT_VERSION,
        variant,
        hyperparams: hp.clone(),
        x: state.x,
        z: state.z,
        output: state.output,
        trace,
    })
}

fn run_cycle(
    state: &mut FitState,
    kx: &KernelBundle,
    kz: &KernelBundle,
    y: &DMatrix<f64>,
    hp: &HyperParams,
    variant: Variant,
    order: DomainOrder,
) -> Result<()> {
    for side in order.sides() {
        let bundle = match side {
            Side::X => kx,
            Side::Z => kz,
        };
        state.update_projection_priors(side, hp)?;
        state.update_projections(side, bundle, hp)?;
        match variant {
            Variant::MklBinary | Variant::MklRegression => {
                state.update_kernel_components(side, bundle, hp);
                state.update_kernel_weights(side, hp)?;
                state.update_composite(side, hp, y, variant)?;
            }
            Variant::TwinKernelBinary => {
                state.update_twin_components(side, bundle, hp)?;
            }
        }
    }
    if variant.is_binary() {
        state.update_outputs(hp, y)?;
    }
    Ok(())
}

fn check_state_shapes(
    state: &FitState,
    kx: &KernelBundle,
    kz: &KernelBundle,
    y: &DMatrix<f64>,
    hp: &HyperParams,
    variant: Variant,
) -> Result<()> {
    hp.validate(variant)?;
    let ok = state.x.n() == kx.n()
        && state.z.n() == kz.n()
        && state.x.p() == kx.p()
        && state.z.p() == kz.p()
        && state.x.rank() == hp.rank
        && state.z.rank() == hp.rank
        && y.nrows() == kx.n()
        && y.ncols() == kz.n()
        && state.x.mkl.is_some() == variant.has_kernel_weights()
        && state.z.mkl.is_some() == variant.has_kernel_weights();
    if !ok {
        return Err(KbmfError::Shape(
            "initial state does not match the kernels, targets, and variant".into(),
        ));
    }
    match (&state.output, variant.is_binary()) {
        (super::OutputPosterior::Binary(b), true) => {
            if b.mean.shape() != (y.nrows(), y.ncols()) {
                return Err(KbmfError::Shape("output posterior shape mismatch".into()));
            }
        }
        (super::OutputPosterior::Regression, false) => {}
        _ => {
            return Err(KbmfError::Shape(
                "output posterior does not match the variant".into(),
            ))
        }
    }
    Ok(())
}
