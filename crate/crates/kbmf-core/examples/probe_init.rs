use kbmf_core::eval::rmse_matrix;
use kbmf_core::kernels::per_feature_linear_kernels;
use kbmf_core::toy::{toy_generate, ToySpec};
use kbmf_core::vb::{fit_with, init_state, DomainOrder, FitOptions, HyperParams, Variant};

fn top3(weights: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].abs().partial_cmp(&weights[a].abs()).unwrap());
    let mut top: Vec<usize> = idx[..3].to_vec();
    top.sort_unstable();
    top
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let max_iter: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut recovered = 0;
    let mut in_range = 0;
    for seed in 0..10u64 {
        let spec = ToySpec { seed, ..Default::default() };
        let data = toy_generate(&spec).unwrap();
        let kx = per_feature_linear_kernels(&data.x).unwrap();
        let kz = per_feature_linear_kernels(&data.z).unwrap();
        let hp = HyperParams { rank: 5, seed, max_iter, rel_tol: 1e-7, ..Default::default() };
        let mut state = init_state(&kx, &kz, &data.y, &hp, Variant::MklRegression).unwrap();
        // mode 0: spec init as-is.
        // mode 1: composite = mean of components instead of sum.
        // mode 2: projection means scaled to make components O(1).
        for (d, bundle) in [(&mut state.x, &kx), (&mut state.z, &kz)] {
            match mode {
                1 => {
                    let p = d.components.len() as f64;
                    let mkl = d.mkl.as_mut().unwrap();
                    mkl.composite.mean /= p;
                }
                2 => {
                    let scale = 1.0 / (bundle.n() as f64 * bundle.p() as f64).sqrt();
                    d.proj.mean *= scale;
                    for m in 0..bundle.p() {
                        d.components[m].mean = d.proj.mean.transpose() * bundle.matrix(m);
                    }
                    let mut h = nalgebra::DMatrix::zeros(hp.rank, bundle.n());
                    for c in &d.components {
                        h += &c.mean;
                    }
                    d.mkl.as_mut().unwrap().composite.mean = h;
                }
                _ => {}
            }
        }
        let model = fit_with(
            &kx, &kz, &data.y, &hp, Variant::MklRegression,
            FitOptions { domain_order: DomainOrder::XThenZ, initial_state: Some(state) },
        ).unwrap();
        let rmse = rmse_matrix(&model.fitted_scores(), &data.y).unwrap();
        let wx = model.x.kernel_weights().unwrap();
        let wz = model.z.kernel_weights().unwrap();
        let ok = top3(&wx) == vec![0, 3, 6] && top3(&wz) == vec![2, 7, 9];
        if ok { recovered += 1; }
        if (0.85..=1.15).contains(&rmse) { in_range += 1; }
        let ex: f64 = wx.iter().map(|w| w.abs()).fold(0.0, f64::max);
        let ez: f64 = wz.iter().map(|w| w.abs()).fold(0.0, f64::max);
        println!(
            "seed {seed}: iters {} rmse {rmse:.4} recovery {ok} |e|max x {ex:.3} z {ez:.3}",
            model.trace.iterations_run
        );
    }
    println!("mode {mode}: rmse in range {in_range}/10, recovered {recovered}/10");
}
