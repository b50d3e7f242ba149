//! Randomized instances and planted synthetic data sets for the oracle and
//! acceptance suites.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kbmf_core::distributions::truncated_moments;
use kbmf_core::eval::MultilabelData;
use kbmf_core::kernels::KernelBundle;
use kbmf_core::vb::{init_state, FitState, HyperParams, OutputPosterior, Variant};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// A well-conditioned random PSD kernel.
pub fn random_kernel(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = normal_matrix(rng, n, n + 2);
    &b * b.transpose() / (n as f64 + 2.0) + DMatrix::identity(n, n) * 0.3
}

pub fn random_bundle(rng: &mut ChaCha8Rng, n: usize, p: usize) -> KernelBundle {
    let matrices = (0..p).map(|_| random_kernel(rng, n)).collect();
    KernelBundle::new(matrices, None).unwrap()
}

/// A small random SPD matrix with eigenvalues bounded away from zero.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let b = normal_matrix(rng, n, n);
    (&b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5) * scale
}

/// A random problem instance for one variant: kernels for both domains, a
/// target matrix of the right kind, and hyperparameters.
pub struct Instance {
    pub kx: KernelBundle,
    pub kz: KernelBundle,
    pub y: DMatrix<f64>,
    pub hp: HyperParams,
    pub variant: Variant,
}

pub fn random_instance(seed: u64, variant: Variant) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.random_range(4..=8);
    let nz = rng.random_range(4..=8);
    let p_max = if variant == Variant::TwinKernelBinary { 1 } else { 3 };
    let px = rng.random_range(1..=p_max);
    let pz = rng.random_range(1..=p_max);
    let rank = rng.random_range(1..=3);
    let kx = random_bundle(&mut rng, nx, px);
    let kz = random_bundle(&mut rng, nz, pz);
    let y = match variant {
        Variant::MklRegression => normal_matrix(&mut rng, nx, nz),
        _ => DMatrix::from_fn(nx, nz, |_, _| if rng.random_range(0..2) == 0 { -1.0 } else { 1.0 }),
    };
    let hp = HyperParams {
        alpha_eta: rng.random_range(0.5..2.0),
        beta_eta: rng.random_range(0.5..2.0),
        alpha_lambda: rng.random_range(0.5..2.0),
        beta_lambda: rng.random_range(0.5..2.0),
        sigma_g: rng.random_range(0.2..1.0),
        sigma_h: rng.random_range(0.2..1.0),
        margin_nu: [0.0, 0.5, 1.0][rng.random_range(0..3)],
        sigma_y: rng.random_range(0.5..1.5),
        rank,
        max_iter: 15,
        rel_tol: 1e-12,
        seed,
    };
    Instance {
        kx,
        kz,
        y,
        hp,
        variant,
    }
}

/// A randomized valid posterior state for an instance: means are random,
/// covariances random SPD (isotropic where the engine keeps them isotropic),
/// output summaries consistent with random locations.
pub fn random_state(instance: &Instance, seed: u64) -> FitState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut state = init_state(
        &instance.kx,
        &instance.kz,
        &instance.y,
        &instance.hp,
        instance.variant,
    )
    .unwrap();

    for d in [&mut state.x, &mut state.z] {
        let n = d.n();
        let r = d.rank();
        let p = d.p();
        d.proj.mean = normal_matrix(&mut rng, n, r);
        for s in 0..r {
            let scale = rng.random_range(0.05..0.4);
            d.proj.covariances[s] = random_spd(&mut rng, n, scale);
        }
        for s in 0..r {
            for i in 0..n {
                d.lambda.shape[(i, s)] = rng.random_range(0.6..2.5);
                d.lambda.scale[(i, s)] = rng.random_range(0.4..2.0);
            }
        }
        let isotropic = d.mkl.is_some();
        for comp in &mut d.components {
            comp.mean = normal_matrix(&mut rng, r, n);
            comp.covariances[0] = if isotropic {
                DMatrix::identity(r, r) * rng.random_range(0.02..0.5)
            } else {
                let scale = rng.random_range(0.05..0.4);
                random_spd(&mut rng, r, scale)
            };
        }
        if let Some(mkl) = &mut d.mkl {
            for m in 0..p {
                mkl.eta.shape[(m, 0)] = rng.random_range(0.6..2.5);
                mkl.eta.scale[(m, 0)] = rng.random_range(0.4..2.0);
                mkl.weights.mean[(m, 0)] = normal(&mut rng);
            }
            let scale_w = rng.random_range(0.05..0.4);
            mkl.weights.covariances[0] = random_spd(&mut rng, p, scale_w);
            mkl.composite.mean = normal_matrix(&mut rng, r, n);
            let scale_h = rng.random_range(0.05..0.4);
            mkl.composite.covariances[0] = random_spd(&mut rng, r, scale_h);
        }
    }

    if let OutputPosterior::Binary(f) = &mut state.output {
        for j in 0..instance.y.ncols() {
            for i in 0..instance.y.nrows() {
                let location = 2.0 * normal(&mut rng);
                let tm =
                    truncated_moments(location, 1.0, instance.y[(i, j)], instance.hp.margin_nu).unwrap();
                f.mean[(i, j)] = tm.mean;
                f.variance[(i, j)] = tm.variance;
                f.log_z[(i, j)] = tm.log_z;
                f.entropy[(i, j)] = tm.entropy;
            }
        }
    }
    state
}

/// Planted low-rank binary interaction data: rank-3 latents on both sides,
/// scores thresholded at the 90th percentile (10% positive rate), noisy
/// copies of the latents as features, and two kernels per domain (linear and
/// Gaussian) computed from them.
pub struct PlantedBinary {
    pub kx: KernelBundle,
    pub kz: KernelBundle,
    pub y: DMatrix<f64>,
}

pub fn planted_binary(seed: u64, n: usize) -> PlantedBinary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = 3;
    let u = normal_matrix(&mut rng, rank, n);
    let v = normal_matrix(&mut rng, rank, n);
    let scores = u.transpose() * &v;
    let mut flat: Vec<f64> = scores.iter().copied().collect();
    flat.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let threshold = flat[(flat.len() as f64 * 0.9) as usize];
    let y = scores.map(|s| if s > threshold { 1.0 } else { -1.0 });

    let features_x = &u + normal_matrix(&mut rng, rank, n) * 0.15;
    let features_z = &v + normal_matrix(&mut rng, rank, n) * 0.15;
    PlantedBinary {
        kx: two_kernel_bundle(&features_x),
        kz: two_kernel_bundle(&features_z),
        y,
    }
}

fn two_kernel_bundle(features: &DMatrix<f64>) -> KernelBundle {
    let d = features.nrows() as f64;
    let linear = features.transpose() * features / d;
    let gaussian = kbmf_core::kernels::gaussian_kernel(features, features, d.sqrt()).unwrap();
    KernelBundle::new(vec![linear, gaussian], Some(vec!["linear".into(), "gaussian".into()])).unwrap()
}

/// Planted multilabel data: labels fire on correlated linear projections of
/// the features, so label structure is learnable and labels are unbalanced.
pub fn planted_multilabel(seed: u64, n_train: usize, n_test: usize, d: usize, l: usize) -> MultilabelData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Pairs of labels share a base direction: plantable correlation.
    let n_bases = l.div_ceil(2);
    let bases = normal_matrix(&mut rng, d, n_bases);
    let mut weights = DMatrix::zeros(d, l);
    for label in 0..l {
        let base = bases.column(label / 2);
        for row in 0..d {
            weights[(row, label)] = base[row] + 0.3 * normal(&mut rng);
        }
    }
    // Per-label offsets make prevalence range from scarce to common.
    let offsets: Vec<f64> = (0..l).map(|label| 0.3 + 0.9 * (label as f64) / (l as f64)).collect();

    let mut make = |n: usize| {
        let features = normal_matrix(&mut rng, d, n);
        let mut labels = DMatrix::zeros(l, n);
        for i in 0..n {
            for label in 0..l {
                let score: f64 = (0..d).map(|row| weights[(row, label)] * features[(row, i)]).sum();
                let norm: f64 = weights.column(label).norm();
                labels[(label, i)] = if score / norm > offsets[label] { 1.0 } else { 0.0 };
            }
        }
        (features, labels)
    };
    let (features_train, labels_train) = make(n_train);
    let (features_test, labels_test) = make(n_test);
    MultilabelData {
        features_train,
        features_test,
        labels_train,
        labels_test,
    }
}
