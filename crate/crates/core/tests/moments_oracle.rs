//! Closed-form perturbation moments against the brute-force estimator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wiretap_core::chanmodel::{CsiErrorModel, SvdPartition};
use wiretap_core::linalg::{complex_gaussian, c, CMat};
use wiretap_core::oracle::{estimate_moments, MomentEstimate};
use wiretap_core::perturb::{compute_moments, PerturbMoments};
use wiretap_core::validate::{close, oracle_channel};

fn mismatches(svd: &SvdPartition, cf: &PerturbMoments, mc: &MomentEstimate) -> Vec<String> {
    let mut bad = Vec::new();
    let mut cmp = |name: String, a: f64, b: f64| {
        if !close(a, b) {
            bad.push(format!("{name}: {a:.4e} vs {b:.4e}"));
        }
    };
    let f = svd.rank();
    for j in 0..f {
        cmp(format!("E dsigma_{j}"), cf.e_dsigma[j], mc.e_dsigma[j]);
    }
    cmp("E dsigma_1^2".into(), cf.e_dsigma1_sq, mc.e_dsigma1_sq);
    cmp("E v1^H dv1".into(), cf.e_v1_dv1, mc.e_v1_dv1);
    cmp("leakage".into(), cf.leak_v1, mc.leak_v1);
    let mc_dv_s = mc.e_dv.columns(0, f - 1).into_owned();
    let mc_vs_dvs = svd.v_s().adjoint() * &mc_dv_s;
    let pairs: [(&str, &CMat, &CMat); 6] = [
        ("E dV_s", &cf.e_dv_s, &mc_dv_s),
        ("E V_s^H dV_s", &cf.e_vs_dvs, &mc_vs_dvs),
        ("G", &cf.g, &mc.g),
        ("G'", &cf.g_prime, &mc.g_prime),
        ("G''", &cf.g_dprime, &mc.g_dprime),
        ("K", &cf.k, &mc.k),
    ];
    for (name, a, b) in pairs {
        for (k, (x, y)) in a.iter().zip(b.iter()).enumerate() {
            cmp(format!("{name}[{k}].re"), x.re, y.re);
            cmp(format!("{name}[{k}].im"), x.im, y.im);
        }
    }
    for i in 0..svd.cols() {
        cmp(format!("E dv1[{i}].re"), cf.e_dv1[i].re, mc.e_dv[(i, 0)].re);
        cmp(format!("E dv1[{i}].im"), cf.e_dv1[i].im, mc.e_dv[(i, 0)].im);
    }
    bad
}

#[test]
fn iid_moments_match_monte_carlo_on_wide_channels() {
    let err = CsiErrorModel::iid(0.01).unwrap();
    for (n, seed) in [(2, 101), (4, 102)] {
        let (ch0, _) = oracle_channel(n + 1, 0.1, seed).unwrap();
        // drop one receive row to get a wide channel
        let wide = wiretap_core::ChannelMatrix::new(ch0.h_ba.as_mat().rows(0, n).into_owned()).unwrap();
        let svd = wiretap_core::partition_svd(&wide).unwrap();
        let cf = compute_moments(&svd, &err).unwrap();
        let mc = estimate_moments(&wide, &svd, &err, 200_000, seed).unwrap();
        let bad = mismatches(&svd, &cf, &mc);
        assert!(bad.is_empty(), "{n}x{}: {bad:?}", n + 1);
    }
}

#[test]
fn correlated_moments_match_monte_carlo() {
    let n = 3;
    let (ch, svd) = oracle_channel(n, 0.1, 77).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = complex_gaussian(&mut rng, n * n, n * n, 1.0);
    let raw = &a * a.adjoint();
    let scale = 0.01 * (n * n) as f64 / (0..n * n).map(|i| raw[(i, i)].re).sum::<f64>();
    let cov = wiretap_core::linalg::hermitian_part(&(raw * c(scale, 0.0)));
    let err = CsiErrorModel::full(cov).unwrap();
    let cf = compute_moments(&svd, &err).unwrap();
    let mc = estimate_moments(&ch.h_ba, &svd, &err, 200_000, 9).unwrap();
    let bad = mismatches(&svd, &cf, &mc);
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn estimator_is_deterministic() {
    let (ch, svd) = oracle_channel(3, 0.1, 4).unwrap();
    let err = CsiErrorModel::iid(0.01).unwrap();
    let a = estimate_moments(&ch.h_ba, &svd, &err, 3000, 1).unwrap();
    let b = estimate_moments(&ch.h_ba, &svd, &err, 3000, 1).unwrap();
    assert_eq!(a.e_dsigma, b.e_dsigma);
    assert_eq!(a.g, b.g);
}
