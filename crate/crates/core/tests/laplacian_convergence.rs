//! Uniform circle of unit length: for `f = sin 2πt` both operators tend to
//! `f'' = -(2π)² f` and the Dirichlet form to `∫ f'² = 2π²`.

use std::f64::consts::PI;

use selftune::bandwidth::{knn_distances, normalize_bandwidth, Window};
use selftune::kernel::{build_selftuned, KernelSpec};
use selftune::laplacian::{apply_l_rw_prime, apply_l_un, dirichlet_form, LaplacianConfig, LaplacianKind};
use selftune::manifold::{DensityProfile, Generator, ManifoldDataset};

#[test]
fn uniform_circle_limits() {
    let data = ManifoldDataset::new(Generator::CircleR2, DensityProfile::uniform(), 11);
    let x = data.sample_points(8000, 11).unwrap();
    let y = data.sample_points(16000, 12).unwrap();
    let t = x.intrinsic().unwrap().to_vec();
    let bw = normalize_bandwidth(knn_distances(&x, &y, 256, false).unwrap(), 1, Window::Indicator).unwrap();
    let eps = 2e-3;
    let w = build_selftuned(&x, &bw, &KernelSpec::selftuned_eps(eps, 1.0)).unwrap();
    let f: Vec<f64> = t.iter().map(|s| (2.0 * PI * s).sin()).collect();
    let truth: Vec<f64> = f.iter().map(|v| -(2.0 * PI).powi(2) * v).collect();

    // The pointwise variance is large at this N; the projection onto f
    // averages it out and isolates the operator constant.
    let coefficient = |est: &[f64]| {
        let num: f64 = est.iter().zip(&f).map(|(a, b)| a * b).sum();
        num / f.iter().map(|v| v * v).sum::<f64>()
    };
    let un_cfg = LaplacianConfig::gaussian(LaplacianKind::Un, eps, 1.0, 1);
    let rw_cfg = LaplacianConfig::gaussian(LaplacianKind::RwPrime, eps, 1.0, 1);
    let lun = apply_l_un(&w, &f, &un_cfg).unwrap();
    let lrw = apply_l_rw_prime(&w, &f, &rw_cfg).unwrap();
    let expected = -(2.0 * PI).powi(2);
    let (cu, cr) = (coefficient(&lun), coefficient(&lrw));
    assert!((cu / expected - 1.0).abs() < 0.05, "L_un coefficient {cu}");
    assert!((cr / expected - 1.0).abs() < 0.05, "L_rw' coefficient {cr}");
    let rw_rms = (lrw.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / f.len() as f64).sqrt();
    let un_rms = (lun.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / f.len() as f64).sqrt();
    for (name, rms) in [("L_un", un_rms), ("L_rw'", rw_rms)] {
        assert!(rms < 0.3 * expected.abs(), "{name} rms error {rms}");
    }
    let energy = dirichlet_form(&w, &f, &un_cfg).unwrap();
    let target = 2.0 * PI * PI;
    assert!((energy - target).abs() < 0.03 * target, "E_N {energy} vs {target}");
}
