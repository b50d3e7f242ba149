use std::time::Instant;

use kbmf_core::eval::rmse_matrix;
use kbmf_core::kernels::per_feature_linear_kernels;
use kbmf_core::toy::{toy_generate, ToySpec};
use kbmf_core::vb::{fit, HyperParams, Variant};

fn top3(weights: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].abs().partial_cmp(&weights[a].abs()).unwrap());
    let mut top: Vec<usize> = idx[..3].to_vec();
    top.sort_unstable();
    top
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let max_iter: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut recovered = 0;
    for seed in 0..10u64 {
        let spec = ToySpec { seed, ..Default::default() };
        let data = toy_generate(&spec).unwrap();
        let kx = per_feature_linear_kernels(&data.x).unwrap();
        let kz = per_feature_linear_kernels(&data.z).unwrap();
        let hp = HyperParams {
            rank: 5,
            seed,
            max_iter,
            rel_tol: 1e-6,
            ..Default::default()
        };
        let started = Instant::now();
        let model = fit(&kx, &kz, &data.y, &hp, Variant::MklRegression).unwrap();
        let secs = started.elapsed().as_secs_f64();
        let rmse = rmse_matrix(&model.fitted_scores(), &data.y).unwrap();
        let wx = model.x.kernel_weights().unwrap();
        let wz = model.z.kernel_weights().unwrap();
        let ok = top3(&wx) == vec![0, 3, 6] && top3(&wz) == vec![2, 7, 9];
        if ok {
            recovered += 1;
        }
        println!(
            "seed {seed}: iters {} converged {} rmse {rmse:.4} secs {secs:.2} recovery {ok} (x {:?} z {:?})",
            model.trace.iterations_run, model.trace.converged, top3(&wx), top3(&wz)
        );
    }
    println!("recovered in {recovered}/10 seeds");
}
