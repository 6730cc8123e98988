//! Second-order perturbation statistics of the SVD of Bob's channel under a
//! zero-mean circularly-symmetric CSI error, and the closed-form prediction
//! of Bob's SINR under the naive scheme.
//!
//! Work happens in the rotated frame `A = U^H dH V` (full `U`, `V`), where the
//! unperturbed Gram matrix `H^H H` is diagonal. Each right singular vector
//! `v_j` is treated as an eigenvector of `(Sigma + A)^H (Sigma + A)` and
//! expanded to second order, with the perturbed vector normalised and
//! rotated so that `v_j^H v~_j` is real and positive. Circular symmetry
//! removes every pseudo-covariance term `E{a a}`, so only `E{a_ij conj(a_kl)}`
//! enters.

use crate::chanmodel::{ChannelSet, CsiErrorModel, SvdPartition};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, C64};
use crate::txscheme::{self, SinrReport, TxScheme};

/// Expected perturbation statistics for one channel and error model.
#[derive(Clone, Debug)]
pub struct PerturbMoments {
    /// `D = (Sigma_s^2 - sigma_F^2 I)^-1`, diagonal entries.
    pub d: Vec<f64>,
    /// `E{dH v_F v_F^H dH^H}` (nb x nb).
    pub g: CMat,
    /// `E{dH V_s D V_s^H dH^H}` (nb x nb).
    pub g_prime: CMat,
    /// `E{dH^H U_s D U_s^H dH}` (na x na).
    pub g_dprime: CMat,
    /// `E{dH V_s V_s^H dH^H}` (nb x nb).
    pub k: CMat,
    /// `E{dV_s}` (na x (F-1)).
    pub e_dv_s: CMat,
    /// `E{V_s^H dV_s}` ((F-1) x (F-1)).
    pub e_vs_dvs: CMat,
    /// `E{d sigma_j}` for all `F` singular values.
    pub e_dsigma: Vec<f64>,
    pub e_dsigma1: f64,
    pub e_dsigma1_sq: f64,
    /// `E{dv_1}` (na).
    pub e_dv1: CVec,
    /// `E{v_1^H dv_1}`; real to second order.
    pub e_v1_dv1: f64,
    /// `E{||P_perp dv_1||^2}`, the expected power of `v~_1` leaking out of `span(v_1)`.
    pub leak_v1: f64,
}

/// Covariance of the rotated error `A = U^H dH V` as `E{a_ij conj(a_kl)}`.
enum RotatedCov {
    Iid(f64),
    Full { nb: usize, cov: CMat },
}

impl RotatedCov {
    fn new(model: &CsiErrorModel, u: &CMat, v: &CMat) -> Self {
        match model {
            CsiErrorModel::Iid { sigma_h_sq } => Self::Iid(*sigma_h_sq),
            CsiErrorModel::Full { cov } => {
                // vec(U^H dH V) = (V^T kron U^H) vec(dH)
                let t = v.transpose().kronecker(&u.adjoint());
                Self::Full { nb: u.nrows(), cov: &t * cov * t.adjoint() }
            }
        }
    }

    fn get(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        match self {
            Self::Iid(s) => {
                if i == k && j == l {
                    c(*s, 0.0)
                } else {
                    c(0.0, 0.0)
                }
            }
            Self::Full { nb, cov } => {
                if i >= *nb || k >= *nb {
                    return c(0.0, 0.0);
                }
                cov[(j * nb + i, l * nb + k)]
            }
        }
    }

    fn var(&self, i: usize, j: usize) -> f64 {
        self.get(i, j, i, j).re
    }
}

/// Second-order statistics of one singular triplet.
struct TripletMoments {
    e_dv: CVec,
    e_dsigma: f64,
    e_dsigma_sq: f64,
    leak: f64,
}

fn triplet_moments(j: usize, sigma: &[f64], v: &CMat, nb: usize, cov: &RotatedCov) -> TripletMoments {
    let na = v.nrows();
    let s = |k: usize| if k < sigma.len() { sigma[k] } else { 0.0 };
    let lam = |k: usize| s(k) * s(k);
    let sj = s(j);
    let lj = lam(j);

    // E|M1_kj|^2 with M1 = Sigma^H A + A^H Sigma
    let m1_sq = |k: usize| s(k) * s(k) * cov.var(k, j) + sj * sj * cov.var(j, k);

    let mut leak = 0.0;
    let mut eig_shift = 0.0;
    for k in (0..na).filter(|&k| k != j) {
        let gap = lj - lam(k);
        leak += m1_sq(k) / (gap * gap);
        eig_shift += m1_sq(k) / gap;
    }

    // second-order coefficients along e_k, k != j
    let mut coef = CVec::zeros(na);
    coef[j] = c(-0.5 * leak, 0.0);
    for k in (0..na).filter(|&k| k != j) {
        let gk = lj - lam(k);
        let mut acc = c(0.0, 0.0);
        for m in (0..na).filter(|&m| m != j) {
            let gm = lj - lam(m);
            let e = cov.get(k, m, j, m) * (s(k) * sj) + cov.get(m, j, m, k) * (s(m) * s(m));
            acc += e / (gk * gm);
        }
        let e_jj_kj = cov.get(k, j, j, j) * (sj * s(k)) + cov.get(j, j, j, k) * (sj * sj);
        acc -= e_jj_kj / (gk * gk);
        let mut m2 = c(0.0, 0.0);
        for r in 0..nb {
            m2 += cov.get(r, j, r, k);
        }
        acc += m2 / gk;
        coef[k] = acc;
    }

    let col_power: f64 = (0..nb).filter(|&i| i != j).map(|i| cov.var(i, j)).sum();
    let e_dsigma = (0.5 * cov.var(j, j) + col_power + eig_shift) / (2.0 * sj);

    TripletMoments { e_dv: v * coef, e_dsigma, e_dsigma_sq: 0.5 * cov.var(j, j), leak }
}

/// Closed-form expected perturbation statistics.
///
/// Requires `rows <= cols` and well separated singular values.
pub fn compute_moments(svd: &SvdPartition, err: &CsiErrorModel) -> Result<PerturbMoments> {
    let (nb, na) = (svd.rows(), svd.cols());
    if na < nb {
        return Err(Error::Orientation { rows: nb, cols: na });
    }
    err.check_dims(nb, na)?;
    let sigma = svd.sigma();
    let f = sigma.len();
    if svd.ill_conditioned_gap {
        let gap = sigma.windows(2).map(|w| w[0] * w[0] - w[1] * w[1]).fold(f64::INFINITY, f64::min);
        return Err(Error::IllConditionedGap { gap, sigma_1_sq: sigma[0] * sigma[0] });
    }
    let sf = svd.sigma_f();
    let d: Vec<f64> = svd.sigma_s().iter().map(|s| 1.0 / (s * s - sf * sf)).collect();

    let u_s = svd.u_s();
    let v_s = svd.v_s();
    let (g, g_prime, g_dprime, k) = match err {
        CsiErrorModel::Iid { sigma_h_sq } => {
            let tr_d: f64 = d.iter().sum();
            (
                CMat::identity(nb, nb) * c(*sigma_h_sq, 0.0),
                CMat::identity(nb, nb) * c(sigma_h_sq * tr_d, 0.0),
                CMat::identity(na, na) * c(sigma_h_sq * tr_d, 0.0),
                CMat::identity(nb, nb) * c(sigma_h_sq * (f - 1) as f64, 0.0),
            )
        }
        CsiErrorModel::Full { .. } => {
            let dmat = CMat::from_diagonal(&CVec::from_iterator(d.len(), d.iter().map(|&x| c(x, 0.0))));
            let v_f = svd.v_f();
            let w_g = &v_f * v_f.adjoint();
            let w_gp = &v_s * &dmat * v_s.adjoint();
            let w_k = &v_s * v_s.adjoint();
            let z_gpp = &u_s * &dmat * u_s.adjoint();
            (
                row_weighted(err, nb, na, &w_g),
                row_weighted(err, nb, na, &w_gp),
                col_weighted(err, nb, na, &z_gpp),
                row_weighted(err, nb, na, &w_k),
            )
        }
    };

    let cov = RotatedCov::new(err, svd.u(), svd.v());
    let triplets: Vec<TripletMoments> = (0..f).map(|j| triplet_moments(j, sigma, svd.v(), nb, &cov)).collect();

    let mut e_dv_s = CMat::zeros(na, f - 1);
    for (j, t) in triplets.iter().take(f - 1).enumerate() {
        e_dv_s.set_column(j, &t.e_dv);
    }
    let e_vs_dvs = v_s.adjoint() * &e_dv_s;
    let first = &triplets[0];
    let e_v1_dv1 = svd.v_1().dotc(&first.e_dv).re;

    Ok(PerturbMoments {
        d,
        g,
        g_prime,
        g_dprime,
        k,
        e_dv_s,
        e_vs_dvs,
        e_dsigma: triplets.iter().map(|t| t.e_dsigma).collect(),
        e_dsigma1: first.e_dsigma,
        e_dsigma1_sq: first.e_dsigma_sq,
        e_dv1: first.e_dv.clone(),
        e_v1_dv1,
        leak_v1: first.leak,
    })
}

/// `E{dH W dH^H} = sum_pq W_pq C_pq`.
fn row_weighted(err: &CsiErrorModel, nb: usize, na: usize, w: &CMat) -> CMat {
    let mut out = CMat::zeros(nb, nb);
    for p in 0..na {
        for q in 0..na {
            if w[(p, q)].norm() != 0.0 {
                out += err.column_block(nb, p, q) * w[(p, q)];
            }
        }
    }
    out
}

/// `E{dH^H Z dH}` with entries `Tr(Z C_qp)`.
fn col_weighted(err: &CsiErrorModel, nb: usize, na: usize, z: &CMat) -> CMat {
    CMat::from_fn(na, na, |p, q| crate::linalg::trace(&(z * err.column_block(nb, q, p))))
}

/// Largest ratio of the error standard deviation `sigma_h` to an adjacent
/// singular-value gap or to `sigma_F`. The second-order expansion is only
/// meaningful while this stays well below one.
pub fn perturbation_ratio(svd: &SvdPartition, sigma_h: f64) -> f64 {
    let s = svd.sigma();
    s.windows(2)
        .map(|w| sigma_h / (w[0] - w[1]))
        .fold(sigma_h / svd.sigma_f(), f64::max)
}

/// Expected signal and interference-plus-noise power at Bob's unit-norm
/// naive receiver `u_1`, to second order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NaivePrediction {
    pub signal: f64,
    pub interference_noise: f64,
    /// The nominal design was in outage (no jamming, full data power).
    pub outage: bool,
}

impl NaivePrediction {
    pub fn sinr(&self) -> f64 {
        self.signal / self.interference_noise
    }
}

pub fn predict_naive_powers(
    svd: &SvdPartition,
    moments: &PerturbMoments,
    chan: &ChannelSet,
    target_sinr: f64,
) -> Result<NaivePrediction> {
    let s1 = svd.sigma_1();
    let s1_sq = s1 * s1;
    let p = chan.power_p;
    let rho = chan.sigma_b_sq * target_sinr / (s1_sq * p);
    // E{v1^H dv1} + E{dv1^H v1}
    let pair = 2.0 * moments.e_v1_dv1;
    let na = svd.cols();
    let (signal, den, outage) = if rho > 1.0 || na < 2 {
        let r = rho.min(1.0);
        (s1_sq * r * p * (1.0 + pair), chan.sigma_b_sq, rho > 1.0)
    } else {
        let beta = (1.0 - rho) * p / (na - 1) as f64;
        let upsilon = 2.0 * moments.e_dsigma1 / s1 + moments.e_dsigma1_sq / s1_sq;
        (s1_sq * rho * p * (1.0 + pair - upsilon), -s1_sq * beta * pair + chan.sigma_b_sq, false)
    };
    if !(den > 0.0) || !(signal > 0.0) {
        return Err(Error::ValidityRange(format!(
            "second-order prediction has signal {signal:e}, interference-plus-noise {den:e}"
        )));
    }
    Ok(NaivePrediction { signal, interference_noise: den, outage })
}

/// Closed-form expected SINR at Bob under the naive scheme (ratio of expectations).
pub fn predict_naive_sinr(svd: &SvdPartition, moments: &PerturbMoments, chan: &ChannelSet, target_sinr: f64) -> Result<f64> {
    Ok(predict_naive_powers(svd, moments, chan, target_sinr)?.sinr())
}

/// Alice's artificial-noise design computed from her estimate `H + dH`.
pub fn design_from_estimate(chan: &ChannelSet, err_sample: &crate::chanmodel::ChannelMatrix, target_sinr: f64) -> Result<TxScheme> {
    if err_sample.rows() != chan.nb() || err_sample.cols() != chan.na() {
        return Err(Error::Dimension("CSI error does not match Bob's channel".into()));
    }
    let est = chan.with_h_ba(&chan.h_ba + err_sample)?;
    let svd_est = crate::chanmodel::partition_svd(&est.h_ba)?;
    txscheme::design_artificial_noise(&est, &svd_est, target_sinr)
}

/// One Monte Carlo draw of the naive scheme: Alice designs from `H + dH`,
/// Bob keeps the matched filter `H v_1` of the true channel, Eve runs her MMSE
/// receiver against the covariance actually transmitted.
pub fn simulate_naive(chan: &ChannelSet, err_sample: &crate::chanmodel::ChannelMatrix, target_sinr: f64) -> Result<SinrReport> {
    let svd = crate::chanmodel::partition_svd(&chan.h_ba)?;
    simulate_naive_with(chan, &svd, err_sample, target_sinr)
}

pub fn simulate_naive_with(
    chan: &ChannelSet,
    svd: &SvdPartition,
    err_sample: &crate::chanmodel::ChannelMatrix,
    target_sinr: f64,
) -> Result<SinrReport> {
    let scheme = design_from_estimate(chan, err_sample, target_sinr)?;
    let w_b = txscheme::RxBeamformer {
        w: chan.h_ba.as_mat() * svd.v_1(),
        kind: txscheme::RxKind::Matched,
    };
    let w_e = txscheme::eve_mmse_beamformer(chan, &scheme)?;
    txscheme::evaluate_sinr(chan, &scheme, &w_b, &w_e, &scheme.q_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chanmodel::{generate_channels, partition_svd, ChannelMatrix};

    #[test]
    fn zero_covariance_gives_zero_moments() {
        let ch = generate_channels(4, 3, 2, 1.0, 12).unwrap();
        let svd = partition_svd(&ch.h_ba).unwrap();
        let m = compute_moments(&svd, &CsiErrorModel::iid(0.0).unwrap()).unwrap();
        assert!(m.g.iter().chain(m.k.iter()).chain(m.e_dv_s.iter()).all(|z| z.norm() == 0.0));
        assert_eq!((m.e_dsigma1, m.e_dsigma1_sq, m.e_v1_dv1), (0.0, 0.0, 0.0));
        let m_full = compute_moments(&svd, &CsiErrorModel::full(CMat::zeros(12, 12)).unwrap()).unwrap();
        assert!(m_full.e_dv1.iter().all(|z| z.norm() == 0.0));
        assert_eq!(m_full.e_dsigma1, 0.0);
    }

    #[test]
    fn iid_g_is_scaled_identity() {
        let ch = generate_channels(5, 5, 5, 1.0, 3).unwrap();
        let svd = partition_svd(&ch.h_ba).unwrap();
        let m = compute_moments(&svd, &CsiErrorModel::iid(0.0025).unwrap()).unwrap();
        assert_eq!(m.g, CMat::identity(5, 5) * c(0.0025, 0.0));
        assert_eq!(m.k, CMat::identity(5, 5) * c(0.0025 * 4.0, 0.0));
    }

    #[test]
    fn iid_and_full_identity_agree() {
        let ch = generate_channels(4, 3, 2, 1.0, 19).unwrap();
        let svd = partition_svd(&ch.h_ba).unwrap();
        let a = compute_moments(&svd, &CsiErrorModel::iid(0.01).unwrap()).unwrap();
        let b = compute_moments(&svd, &CsiErrorModel::full(CMat::identity(12, 12) * c(0.01, 0.0)).unwrap()).unwrap();
        assert!((a.e_dsigma1 - b.e_dsigma1).abs() < 1e-14);
        assert!((a.e_dv1.clone() - b.e_dv1.clone()).norm() < 1e-14);
        assert!((a.g_prime.clone() - b.g_prime.clone()).norm() < 1e-13);
        assert!((a.g_dprime.clone() - b.g_dprime.clone()).norm() < 1e-13);
        assert!((a.k.clone() - b.k.clone()).norm() < 1e-13);
    }

    #[test]
    fn orientation_and_gap_errors() {
        let ch = generate_channels(2, 3, 1, 1.0, 1).unwrap();
        let svd = partition_svd(&ch.h_ba).unwrap();
        assert!(matches!(
            compute_moments(&svd, &CsiErrorModel::iid(0.01).unwrap()),
            Err(Error::Orientation { .. })
        ));
        let eye = ChannelMatrix::from_real_rows(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let svd = partition_svd(&eye).unwrap();
        assert!(matches!(
            compute_moments(&svd, &CsiErrorModel::iid(0.01).unwrap()),
            Err(Error::IllConditionedGap { .. })
        ));
    }

    #[test]
    fn prediction_reduces_to_target_without_error() {
        let ch = generate_channels(5, 5, 5, 1.0, 4).unwrap();
        let svd = partition_svd(&ch.h_ba).unwrap();
        let m = compute_moments(&svd, &CsiErrorModel::iid(0.0).unwrap()).unwrap();
        let s = predict_naive_sinr(&svd, &m, &ch, 100.0).unwrap();
        assert!((s - 100.0).abs() < 1e-12 * 100.0);
    }

    #[test]
    fn simulate_without_error_hits_target() {
        let ch = generate_channels(4, 4, 4, 1.0, 6).unwrap();
        let zero = ChannelMatrix::new(CMat::zeros(4, 4)).unwrap();
        let r = simulate_naive(&ch, &zero, 100.0).unwrap();
        assert!((r.sinr_b - 100.0).abs() < 1e-9 * 100.0);
    }

    #[test]
    fn v1_pair_is_real_and_nonpositive_for_iid() {
        let ch = generate_channels(5, 5, 5, 1.0, 8).unwrap();
        let svd = partition_svd(&ch.h_ba).unwrap();
        let m = compute_moments(&svd, &CsiErrorModel::iid(0.01).unwrap()).unwrap();
        let z = svd.v_1().dotc(&m.e_dv1);
        assert!(z.im.abs() <= 1e-10 * z.norm());
        assert!(m.e_v1_dv1 < 0.0);
        assert!((m.e_vs_dvs[(0, 0)].re - m.e_v1_dv1).abs() < 1e-15);
    }
}
