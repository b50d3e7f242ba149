use kbmf_core::eval::rmse_matrix;
use kbmf_core::kernels::per_feature_linear_kernels;
use kbmf_core::toy::{toy_generate, ToySpec};
use kbmf_core::vb::{fit, HyperParams, Variant};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let max_iter: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let spec = ToySpec {
        seed: 0,
        ..Default::default()
    };
    let data = toy_generate(&spec).unwrap();
    let kx = per_feature_linear_kernels(&data.x).unwrap();
    let kz = per_feature_linear_kernels(&data.z).unwrap();
    let hp = HyperParams {
        rank: 5,
        seed: 0,
        max_iter,
        rel_tol: 1e-10,
        ..Default::default()
    };
    let model = fit(&kx, &kz, &data.y, &hp, Variant::MklRegression).unwrap();
    let n = model.trace.elbo_per_iter.len();
    println!("iterations: {n}, converged: {}", model.trace.converged);
    for (i, e) in model.trace.elbo_per_iter.iter().enumerate() {
        if i < 5 || i % 25 == 0 || i + 1 == n {
            println!("  elbo[{i}] = {e:.3}");
        }
    }
    println!("rmse = {}", rmse_matrix(&model.fitted_scores(), &data.y).unwrap());
    println!("rmse vs noiseless = {}", rmse_matrix(&model.fitted_scores(), &data.y_noiseless).unwrap());
    println!("weights x: {:?}", model.x.kernel_weights().unwrap().iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    println!("weights z: {:?}", model.z.kernel_weights().unwrap().iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>());
}
