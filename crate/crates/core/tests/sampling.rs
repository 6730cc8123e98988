//! Statistical checks of the channel, CSI-error and ECSI generators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wiretap_core::chanmodel::{derive_seed, generate_channels, perturb_ecsi, sample_csi_error, CsiErrorModel};
use wiretap_core::linalg::{c, complex_gaussian, hermitian_part, CMat};
use wiretap_core::oracle::sample_error_covariance;

#[test]
fn channel_entries_are_unit_variance_circular() {
    let (mut re2, mut im2, mut reim, mut mean_re, mut pseudo) = (0.0, 0.0, 0.0, 0.0, c(0.0, 0.0));
    let mut count = 0.0;
    for t in 0..4000 {
        let ch = generate_channels(3, 2, 2, 0.5, derive_seed(11, t, 0)).unwrap();
        for z in ch.h_ba.as_mat().iter() {
            re2 += z.re * z.re;
            im2 += z.im * z.im;
            reim += z.re * z.im;
            mean_re += z.re;
            pseudo += z * z;
            count += 1.0;
        }
    }
    // 24000 samples: standard error of each second moment is about 0.005
    assert!((re2 / count - 0.5).abs() < 0.02);
    assert!((im2 / count - 0.5).abs() < 0.02);
    assert!((reim / count).abs() < 0.02);
    assert!((mean_re / count).abs() < 0.02);
    assert!((pseudo / count).norm() < 0.03);
}

#[test]
fn eve_channel_has_requested_gain() {
    let mut p = 0.0;
    let mut n = 0.0;
    for t in 0..3000 {
        let ch = generate_channels(4, 4, 3, 0.25, derive_seed(12, t, 0)).unwrap();
        p += ch.h_ea.as_mat().iter().map(|z| z.norm_sqr()).sum::<f64>();
        n += 12.0;
    }
    assert!((p / n - 0.25).abs() < 0.01);
}

#[test]
fn iid_error_covariance_is_scaled_identity() {
    let err = CsiErrorModel::iid(0.2).unwrap();
    let s = sample_error_covariance(&err, 2, 3, 40_000, 3).unwrap();
    let diff = s - CMat::identity(6, 6) * c(0.2, 0.0);
    assert!(diff.iter().all(|z| z.norm() < 0.01), "{diff}");
}

#[test]
fn full_error_covariance_is_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = complex_gaussian(&mut rng, 4, 4, 1.0);
    let cov = hermitian_part(&(&a * a.adjoint() * c(0.1, 0.0)));
    let err = CsiErrorModel::full(cov.clone()).unwrap();
    let s = sample_error_covariance(&err, 2, 2, 60_000, 4).unwrap();
    let rel = (s - &cov).norm() / cov.norm();
    assert!(rel < 0.03, "relative error {rel}");
}

#[test]
fn error_draws_scale_with_sigma() {
    let a = sample_csi_error(&CsiErrorModel::iid(1.0).unwrap(), 3, 3, 42).unwrap();
    let b = sample_csi_error(&CsiErrorModel::iid(0.01).unwrap(), 3, 3, 42).unwrap();
    let d = (a.as_mat() * c(0.1, 0.0) - b.as_mat()).norm();
    assert!(d < 1e-14);
}

#[test]
fn ecsi_blend_preserves_channel_power() {
    let mut p = 0.0;
    let mut corr = 0.0;
    let trials = 3000;
    for t in 0..trials {
        let ch = generate_channels(3, 3, 3, 1.0, derive_seed(13, t, 0)).unwrap();
        let blended = perturb_ecsi(&ch.h_ea, 0.05, derive_seed(13, t, 2)).unwrap();
        p += blended.as_mat().iter().map(|z| z.norm_sqr()).sum::<f64>() / 9.0;
        corr += ch.h_ea.as_mat().dotc(blended.as_mat()).re / 9.0;
    }
    let n = trials as f64;
    assert!((p / n - 1.0).abs() < 0.03);
    assert!((corr / n - 0.95f64.sqrt()).abs() < 0.03);
}
