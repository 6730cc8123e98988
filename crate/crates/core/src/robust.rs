//! Robust receive beamforming at Bob when Alice designs from imperfect CSI.
//!
//! In both protocols Bob knows the true channel `H_ba`, builds a model of the
//! interference-plus-noise covariance he will see, picks the max-SINR
//! receiver for that model and reports back the data power fraction `rho`
//! at which the model predicts `SINR_b = S`. Alice then transmits along her
//! own `v~_1` with that `rho` and the rest of the power spread over her `T~'`.
//!
//! * FDD: Bob fed back `H~_ba`, so he knows `t~` and `T~'` exactly.
//! * TDD: Bob only knows the error statistics and uses the second-order
//!   expectations of `v~_1` and of the interference covariance.

use serde::{Deserialize, Serialize};

use crate::chanmodel::{partition_svd, ChannelMatrix, ChannelSet, SvdPartition};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::perturb::PerturbMoments;
use crate::txscheme::{self, RxBeamformer, RxKind, SinrReport, TxScheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustMode {
    Fdd,
    Tdd,
}

/// Bob's side of a robust protocol.
#[derive(Clone, Debug)]
pub struct RobustContext {
    pub mode: RobustMode,
    /// Bob's interference-plus-noise covariance model at the chosen `rho`.
    pub q_int: CMat,
    /// Alice's data beamformer as Bob knows (FDD) or estimates (TDD) it.
    pub t_hat: CVec,
    /// Power fraction Bob requested.
    pub rho: f64,
    /// Diagonal loading was needed to make `q_int` positive definite.
    pub loaded: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FddOptions {
    /// Propagate the jamming through `H~_ba` instead of the true `H_ba`
    /// when forming Bob's covariance.
    pub jam_through_estimate: bool,
}

/// `q(rho) = beta(rho) * shape + noise * I` as a function of the power fraction,
/// in the eigenbasis of `shape`.
struct CovarianceFamily {
    eigvals: Vec<f64>,
    eigvecs: CMat,
    noise: f64,
    power: f64,
    jam_dims: usize,
}

impl CovarianceFamily {
    fn new(shape: &CMat, noise: f64, power: f64, jam_dims: usize) -> Self {
        let (eigvals, eigvecs) = linalg::hermitian_eigen(shape);
        Self { eigvals, eigvecs, noise, power, jam_dims }
    }

    fn beta(&self, rho: f64) -> f64 {
        if self.jam_dims == 0 {
            0.0
        } else {
            (1.0 - rho) * self.power / self.jam_dims as f64
        }
    }

    /// Extra diagonal loading needed at `rho` (zero when already positive definite).
    fn loading(&self, rho: f64) -> f64 {
        let b = self.beta(rho);
        let min = self.eigvals.iter().map(|&m| b * m).fold(f64::INFINITY, f64::min) + self.noise;
        if min > 0.0 {
            0.0
        } else {
            let tr: f64 = self.eigvals.iter().map(|&m| b * m + self.noise).sum();
            -min + 1e-8 * tr.abs() / self.eigvals.len() as f64
        }
    }

    fn matrix(&self, rho: f64) -> CMat {
        let b = self.beta(rho);
        let load = self.loading(rho);
        let n = self.eigvals.len();
        let diag = CVec::from_iterator(n, self.eigvals.iter().map(|&m| c(b * m + self.noise + load, 0.0)));
        linalg::hermitian_part(&(&self.eigvecs * CMat::from_diagonal(&diag) * self.eigvecs.adjoint()))
    }

    /// Model SINR `rho P g^H q(rho)^-1 g` of the max-SINR receiver.
    fn model_sinr(&self, rho: f64, g: &CVec) -> f64 {
        let proj = self.eigvecs.adjoint() * g;
        let b = self.beta(rho);
        let load = self.loading(rho);
        rho * self.power
            * proj
                .iter()
                .zip(&self.eigvals)
                .map(|(z, &m)| z.norm_sqr() / (b * m + self.noise + load))
                .sum::<f64>()
    }

    /// Smallest `rho` with model SINR `>= target`. Returns the requested
    /// fraction, which exceeds one when even full data power falls short.
    fn solve_rho(&self, g: &CVec, target: f64) -> f64 {
        let full = self.model_sinr(1.0, g);
        if full < target {
            return target / full;
        }
        if self.jam_dims == 0 {
            return target / full;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.model_sinr(mid, g) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    }
}

fn finish(
    chan: &ChannelSet,
    scheme: &TxScheme,
    q_model: CMat,
    g: &CVec,
) -> Result<(CVec, SinrReport)> {
    let w = linalg::solve_hpd(&q_model, g)?;
    let w_b = RxBeamformer { w: w.clone(), kind: RxKind::Matched };
    let w_e = txscheme::eve_mmse_beamformer(chan, scheme)?;
    let report = txscheme::evaluate_sinr(chan, scheme, &w_b, &w_e, &scheme.q_z)?;
    Ok((w, report))
}

/// FDD robust receiver: Bob knows the estimate `h_tilde` Alice designs from.
pub fn fdd_receiver(
    chan: &ChannelSet,
    h_tilde: &ChannelMatrix,
    target_sinr: f64,
    opts: FddOptions,
) -> Result<(RxBeamformer, SinrReport, RobustContext)> {
    if h_tilde.rows() != chan.nb() || h_tilde.cols() != chan.na() {
        return Err(Error::Dimension("estimate does not match Bob's channel".into()));
    }
    let svd_t = partition_svd(h_tilde)?;
    let t_tilde = svd_t.v_1();
    let t_prime = svd_t.t_prime();
    let h = chan.h_ba.as_mat();
    let prop = if opts.jam_through_estimate { h_tilde.as_mat() } else { h };
    let shape = linalg::hermitian_part(&(prop * &t_prime * t_prime.adjoint() * prop.adjoint()));
    let fam = CovarianceFamily::new(&shape, chan.sigma_b_sq, chan.power_p, t_prime.ncols());
    let g = h * &t_tilde;
    let rho_req = fam.solve_rho(&g, target_sinr);
    let scheme = TxScheme::artificial_noise(t_tilde.clone(), &t_prime, rho_req, chan.power_p, target_sinr);
    let q_int = fam.matrix(scheme.rho);
    let loaded = fam.loading(scheme.rho) > 0.0;
    let (w, report) = finish(chan, &scheme, q_int.clone(), &g)?;
    let ctx = RobustContext { mode: RobustMode::Fdd, q_int, t_hat: t_tilde, rho: scheme.rho, loaded };
    Ok((RxBeamformer { w, kind: RxKind::RobustFdd }, report, ctx))
}

/// `rho P t^H H^H Q^-1 H t`: SINR of the max-SINR receiver when `Q` is exact.
pub fn mmse_sinr(chan: &ChannelSet, t: &CVec, rho: f64, q_int: &CMat) -> Result<f64> {
    let g = chan.h_ba.as_mat() * t;
    let x = linalg::solve_hpd(q_int, &g)?;
    Ok(rho * chan.power_p * g.dotc(&x).re)
}

/// Bob's TDD interference shape, i.e. the expected covariance divided by `beta`
/// without the noise term, made exactly Hermitian.
pub fn tdd_interference_shape(h: &CMat, svd: &SvdPartition, moments: &PerturbMoments) -> CMat {
    let s1 = svd.sigma_1();
    let u1 = svd.u_1();
    let e_dv1 = &moments.e_dv1;
    let raw = h * h.adjoint()
        - &u1 * u1.adjoint() * c(s1 * s1, 0.0)
        - &u1 * e_dv1.adjoint() * h.adjoint() * c(s1, 0.0)
        - h * e_dv1 * u1.adjoint() * c(s1, 0.0);
    linalg::hermitian_part(&raw)
}

/// TDD robust receiver. `err_sample` only drives Alice's side; Bob uses
/// `svd` of the true channel and the expected moments.
pub fn tdd_receiver(
    chan: &ChannelSet,
    svd: &SvdPartition,
    moments: &PerturbMoments,
    err_sample: &ChannelMatrix,
    target_sinr: f64,
) -> Result<(RxBeamformer, SinrReport, RobustContext)> {
    if err_sample.rows() != chan.nb() || err_sample.cols() != chan.na() {
        return Err(Error::Dimension("CSI error does not match Bob's channel".into()));
    }
    let h = chan.h_ba.as_mat();
    let t_hat = svd.v_1() + &moments.e_dv1;
    let shape = tdd_interference_shape(h, svd, moments);
    let jam_dims = chan.na() - 1;
    let fam = CovarianceFamily::new(&shape, chan.sigma_b_sq, chan.power_p, jam_dims);
    let g_hat = h * &t_hat;
    let rho_req = fam.solve_rho(&g_hat, target_sinr);

    let est = partition_svd(&(&chan.h_ba + err_sample))?;
    let scheme = TxScheme::artificial_noise(est.v_1(), &est.t_prime(), rho_req, chan.power_p, target_sinr);
    let q_hat = fam.matrix(scheme.rho);
    let loaded = fam.loading(scheme.rho) > 0.0;
    let (w, report) = finish(chan, &scheme, q_hat.clone(), &g_hat)?;
    let ctx = RobustContext { mode: RobustMode::Tdd, q_int: q_hat, t_hat, rho: scheme.rho, loaded };
    Ok((RxBeamformer { w, kind: RxKind::RobustTdd }, report, ctx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chanmodel::{generate_channels, sample_csi_error, CsiErrorModel};
    use crate::perturb::compute_moments;

    #[test]
    fn fdd_without_error_matches_perfect_csi() {
        let ch = generate_channels(4, 4, 4, 1.0, 3).unwrap();
        let (_, r, ctx) = fdd_receiver(&ch, &ch.h_ba, 100.0, FddOptions::default()).unwrap();
        assert!((r.sinr_b - 100.0).abs() < 1e-9 * 100.0);
        let svd = partition_svd(&ch.h_ba).unwrap();
        let s1 = svd.sigma_1();
        assert!((ctx.rho - 100.0 / (s1 * s1 * 100.0)).abs() < 1e-9 * ctx.rho);
    }

    #[test]
    fn tdd_without_error_matches_perfect_csi() {
        let ch = generate_channels(5, 5, 5, 1.0, 4).unwrap();
        let svd = partition_svd(&ch.h_ba).unwrap();
        let m = compute_moments(&svd, &CsiErrorModel::iid(0.0).unwrap()).unwrap();
        let zero = ChannelMatrix::new(CMat::zeros(5, 5)).unwrap();
        let (_, r, _) = tdd_receiver(&ch, &svd, &m, &zero, 100.0).unwrap();
        assert!((r.sinr_b - 100.0).abs() < 1e-9 * 100.0);
    }

    #[test]
    fn fdd_closed_form_equals_generic_evaluation() {
        let ch = generate_channels(5, 5, 5, 1.0, 9).unwrap();
        let err = CsiErrorModel::iid(0.1).unwrap();
        let dh = sample_csi_error(&err, 5, 5, 77).unwrap();
        let ht = &ch.h_ba + &dh;
        let (_, r, ctx) = fdd_receiver(&ch, &ht, 100.0, FddOptions::default()).unwrap();
        let closed = mmse_sinr(&ch, &ctx.t_hat, ctx.rho, &ctx.q_int).unwrap();
        assert!((closed - r.sinr_b).abs() < 1e-9 * r.sinr_b);
        if !r.outage {
            assert!((r.sinr_b - 100.0).abs() < 1e-9 * 100.0);
        }
    }

    #[test]
    fn tdd_covariance_is_exactly_hermitian() {
        let ch = generate_channels(4, 3, 3, 1.0, 5).unwrap();
        let svd = partition_svd(&ch.h_ba).unwrap();
        let m = compute_moments(&svd, &CsiErrorModel::iid(0.05).unwrap()).unwrap();
        let q = tdd_interference_shape(ch.h_ba.as_mat(), &svd, &m);
        assert_eq!(q, q.adjoint());
    }
}
