//! Reusable equivalence drivers: each function sweeps randomized instances
//! and panics with context if the engine update disagrees with its naive
//! oracle beyond the given mixed tolerance.

use nalgebra::DMatrix;

use kbmf_core::vb::{Side, Variant};

use super::{naive, synth};

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

pub fn assert_matrix_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64, what: &str) {
    assert_eq!(a.shape(), b.shape(), "{what}: shape mismatch");
    for (ea, eb) in a.iter().zip(b.iter()) {
        assert!(close(*ea, *eb, tol), "{what}: {ea} vs {eb}");
    }
}

pub fn variant_for(trial: u64) -> Variant {
    match trial % 3 {
        0 => Variant::MklBinary,
        1 => Variant::MklRegression,
        _ => Variant::TwinKernelBinary,
    }
}

pub fn check_projection_priors(trials: u64, tol: f64) {
    for trial in 0..trials {
        let instance = synth::random_instance(trial, variant_for(trial));
        let mut state = synth::random_state(&instance, trial);
        let expected = naive::lambda_update(&state.x, &instance.hp);
        state.update_projection_priors(Side::X, &instance.hp).unwrap();
        assert_matrix_close(&state.x.lambda.shape, &expected.shape, tol, "lambda shape");
        assert_matrix_close(&state.x.lambda.scale, &expected.scale, tol, "lambda scale");
    }
}

pub fn check_projections(trials: u64, tol: f64) {
    for trial in 0..trials {
        let instance = synth::random_instance(trial.wrapping_add(10_000), variant_for(trial));
        let mut state = synth::random_state(&instance, trial);
        let (mean, covs) = naive::projection_update(&state.x, &instance.kx, &instance.hp);
        state.update_projections(Side::X, &instance.kx, &instance.hp).unwrap();
        assert_matrix_close(&state.x.proj.mean, &mean, tol, "projection mean");
        for (s, cov) in covs.iter().enumerate() {
            assert_matrix_close(&state.x.proj.covariances[s], cov, tol, "projection covariance");
        }
    }
}

pub fn check_kernel_components(trials: u64, tol: f64) {
    let mut done = 0;
    let mut trial = 0u64;
    while done < trials {
        let variant = variant_for(trial);
        trial += 1;
        if variant == Variant::TwinKernelBinary {
            continue;
        }
        let instance = synth::random_instance(trial.wrapping_add(20_000), variant);
        let mut state = synth::random_state(&instance, trial);
        let (means, vars) = naive::mkl_components_update(&state.x, &instance.kx, &instance.hp);
        state.update_kernel_components(Side::X, &instance.kx, &instance.hp);
        for m in 0..instance.kx.p() {
            assert_matrix_close(&state.x.components[m].mean, &means[m], tol, "component mean");
            let cov = state.x.components[m].shared_cov();
            for s in 0..state.x.rank() {
                for t in 0..state.x.rank() {
                    let expect = if s == t { vars[m] } else { 0.0 };
                    assert!(close(cov[(s, t)], expect, 1e-12), "component covariance");
                }
            }
        }
        done += 1;
    }
}

pub fn check_kernel_weights(trials: u64, tol: f64) {
    let mut done = 0;
    let mut trial = 0u64;
    while done < trials {
        let variant = variant_for(trial);
        trial += 1;
        if variant == Variant::TwinKernelBinary {
            continue;
        }
        let instance = synth::random_instance(trial.wrapping_add(30_000), variant);
        let mut state = synth::random_state(&instance, trial);
        let (eta, e_mean, e_cov) = naive::weights_update(&state.x, &instance.hp);
        state.update_kernel_weights(Side::X, &instance.hp).unwrap();
        let mkl = state.x.mkl.as_ref().unwrap();
        assert_matrix_close(&mkl.eta.shape, &eta.shape, 1e-12, "eta shape");
        assert_matrix_close(&mkl.eta.scale, &eta.scale, 1e-12, "eta scale");
        assert_matrix_close(&mkl.weights.mean, &e_mean, tol, "weight mean");
        assert_matrix_close(mkl.weights.shared_cov(), &e_cov, tol, "weight covariance");
        done += 1;
    }
}

pub fn check_composites(trials: u64, tol: f64) {
    let mut done = 0;
    let mut trial = 0u64;
    while done < trials {
        let variant = variant_for(trial);
        trial += 1;
        if variant == Variant::TwinKernelBinary {
            continue;
        }
        let instance = synth::random_instance(trial.wrapping_add(40_000), variant);
        let mut state = synth::random_state(&instance, trial);
        let (mean, cov) = naive::composite_update(&state, Side::X, &instance.hp, &instance.y, variant);
        state.update_composite(Side::X, &instance.hp, &instance.y, variant).unwrap();
        let mkl = state.x.mkl.as_ref().unwrap();
        assert_matrix_close(&mkl.composite.mean, &mean, tol, "composite mean");
        assert_matrix_close(mkl.composite.shared_cov(), &cov, tol, "composite covariance");
        done += 1;
    }
}

pub fn check_twin_components(trials: u64, tol: f64) {
    for trial in 0..trials {
        let instance = synth::random_instance(trial.wrapping_add(50_000), Variant::TwinKernelBinary);
        let mut state = synth::random_state(&instance, trial);
        let (mean, cov) = naive::twin_components_update(&state, Side::Z, &instance.kz, &instance.hp);
        state.update_twin_components(Side::Z, &instance.kz, &instance.hp).unwrap();
        assert_matrix_close(&state.z.components[0].mean, &mean, tol, "twin component mean");
        assert_matrix_close(state.z.components[0].shared_cov(), &cov, tol, "twin component covariance");
    }
}

pub fn check_outputs(trials: u64, tol: f64) {
    for trial in 0..trials {
        let variant = if trial % 2 == 0 { Variant::MklBinary } else { Variant::TwinKernelBinary };
        let instance = synth::random_instance(trial.wrapping_add(60_000), variant);
        let mut state = synth::random_state(&instance, trial);
        let expected = naive::outputs_update_by_quadrature(&state, &instance.y, instance.hp.margin_nu);
        state.update_outputs(&instance.hp, &instance.y).unwrap();
        let f = state.output.binary().unwrap();
        assert_matrix_close(&f.mean, &expected, tol, "output mean");
        for j in 0..instance.y.ncols() {
            for i in 0..instance.y.nrows() {
                assert!(instance.y[(i, j)] * f.mean[(i, j)] > instance.hp.margin_nu);
            }
        }
    }
}

pub fn check_elbo_assembly(trials: u64, tol: f64) {
    for trial in 0..trials {
        let variant = variant_for(trial);
        let instance = synth::random_instance(trial.wrapping_add(70_000), variant);
        let state = synth::random_state(&instance, trial);
        let fast =
            kbmf_core::vb::elbo_of(&state, &instance.kx, &instance.kz, &instance.y, &instance.hp, variant)
                .unwrap();
        let slow = naive::elbo(&state, &instance.kx, &instance.kz, &instance.y, &instance.hp, variant);
        assert!(
            (fast - slow).abs() <= tol * slow.abs().max(1.0),
            "elbo mismatch on trial {trial} ({variant:?}): {fast} vs {slow}"
        );
    }
}
