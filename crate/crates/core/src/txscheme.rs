//! Perfect-CSI transmit designs, receive beamformers and SINR / secrecy metrics.

use serde::{Deserialize, Serialize};

use crate::chanmodel::{ChannelMatrix, ChannelSet, SvdPartition, RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};

/// Alice's transmission: unit-norm data beamformer `t` carrying power
/// `rho * P`, plus an artificial-interference covariance `q_z`.
#[derive(Clone, Debug)]
pub struct TxScheme {
    pub t: CVec,
    pub q_z: CMat,
    pub rho: f64,
    pub power_p: f64,
    pub target_sinr: f64,
    /// The requested power fraction exceeded 1; all power went to data.
    pub outage: bool,
}

impl TxScheme {
    /// Artificial-noise transmission along `t` with the remaining power spread
    /// uniformly over the columns of `t_prime`.
    ///
    /// A requested fraction above one is an outage: `rho = 1`, no jamming.
    /// An empty `t_prime` (single transmit antenna) leaves the residual power unused.
    pub fn artificial_noise(t: CVec, t_prime: &CMat, rho_requested: f64, power_p: f64, target_sinr: f64) -> Self {
        let outage = rho_requested > 1.0;
        let rho = rho_requested.min(1.0);
        let na = t.len();
        let q_z = if outage || t_prime.ncols() == 0 || rho >= 1.0 {
            CMat::zeros(na, na)
        } else {
            let beta = (1.0 - rho) * power_p / t_prime.ncols() as f64;
            linalg::hermitian_part(&(t_prime * t_prime.adjoint() * c(beta, 0.0)))
        };
        Self { t, q_z, rho, power_p, target_sinr, outage }
    }

    /// Per-dimension jamming power `beta = (1 - rho) P / (Na - 1)`.
    pub fn beta(&self) -> f64 {
        let na = self.t.len();
        if na < 2 || self.outage {
            0.0
        } else {
            (1.0 - self.rho) * self.power_p / (na - 1) as f64
        }
    }

    pub fn data_power(&self) -> f64 {
        self.rho * self.power_p
    }

    pub fn jamming_power(&self) -> f64 {
        linalg::trace(&self.q_z).re
    }

    /// Full transmit covariance `rho P t t^H + Q'_z`.
    pub fn transmit_covariance(&self) -> CMat {
        &self.t * self.t.adjoint() * c(self.data_power(), 0.0) + &self.q_z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RxKind {
    Matched,
    Mmse,
    RobustFdd,
    RobustTdd,
}

#[derive(Clone, Debug)]
pub struct RxBeamformer {
    pub w: CVec,
    pub kind: RxKind,
}

/// Per-trial link metrics (linear SINR, bits per channel use).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub sinr_b: f64,
    pub sinr_e: f64,
    pub secrecy_capacity: f64,
    pub outage: bool,
    /// Bob's signal power at the output of the unit-normalised receive beamformer.
    pub bob_signal: f64,
    /// Bob's interference-plus-noise power at the same output.
    pub bob_interference_noise: f64,
    pub eve_signal: f64,
    pub eve_interference_noise: f64,
}

/// Unknown-ECSI design: `t = v_1`, minimal `rho` for `SINR_b = S`,
/// residual power spread over `T'`.
pub fn design_artificial_noise(chan: &ChannelSet, svd: &SvdPartition, target_sinr: f64) -> Result<TxScheme> {
    check_target(target_sinr)?;
    if svd.cols() != chan.na() || svd.rows() != chan.nb() {
        return Err(Error::Dimension("SVD does not match Bob's channel".into()));
    }
    let s1 = svd.sigma_1();
    let rho = chan.sigma_b_sq * target_sinr / (s1 * s1 * chan.power_p);
    Ok(TxScheme::artificial_noise(svd.v_1(), &svd.t_prime(), rho, chan.power_p, target_sinr))
}

fn check_target(target_sinr: f64) -> Result<()> {
    if !(target_sinr > 0.0) || !target_sinr.is_finite() {
        return Err(Error::Parameter(format!("target SINR must be positive, got {target_sinr}")));
    }
    Ok(())
}

/// Maximal-ratio combiner `w = H_ba t`.
pub fn bob_matched_beamformer(chan: &ChannelSet, scheme: &TxScheme) -> RxBeamformer {
    RxBeamformer { w: chan.h_ba.as_mat() * &scheme.t, kind: RxKind::Matched }
}

/// Eve's max-SINR receiver `(H_ea Q H_ea^H + sigma_e^2 I)^-1 H_ea t` for the given covariance.
pub fn eve_mmse_beamformer_for(chan: &ChannelSet, t: &CVec, q_z: &CMat) -> Result<RxBeamformer> {
    let h = chan.h_ea.as_mat();
    let q_int = interference_covariance(h, q_z, chan.sigma_e_sq);
    let w = linalg::solve_hpd(&q_int, &(h * t))?;
    Ok(RxBeamformer { w, kind: RxKind::Mmse })
}

pub fn eve_mmse_beamformer(chan: &ChannelSet, scheme: &TxScheme) -> Result<RxBeamformer> {
    eve_mmse_beamformer_for(chan, &scheme.t, &scheme.q_z)
}

/// `H Q H^H + noise I`.
pub fn interference_covariance(h: &CMat, q_z: &CMat, noise: f64) -> CMat {
    let n = h.nrows();
    linalg::hermitian_part(&(h * q_z * h.adjoint() + CMat::identity(n, n) * c(noise, 0.0)))
}

/// Signal and interference-plus-noise power at the output of `w / ||w||`.
/// A zero beamformer captures nothing.
pub fn output_powers(h: &CMat, t: &CVec, data_power: f64, q_z: &CMat, noise: f64, w: &CVec) -> (f64, f64) {
    let nrm = w.norm_squared();
    if nrm == 0.0 {
        return (0.0, noise);
    }
    let sig = data_power * w.dotc(&(h * t)).norm_sqr() / nrm;
    let den = linalg::quad_form(&interference_covariance(h, q_z, noise), w) / nrm;
    (sig, den)
}

/// SINR of Bob and Eve for the given beamformers, with `q_z_true` the
/// interference covariance actually transmitted.
pub fn evaluate_sinr(
    chan: &ChannelSet,
    scheme: &TxScheme,
    w_b: &RxBeamformer,
    w_e: &RxBeamformer,
    q_z_true: &CMat,
) -> Result<SinrReport> {
    let p = scheme.data_power();
    let (bs, bn) = output_powers(chan.h_ba.as_mat(), &scheme.t, p, q_z_true, chan.sigma_b_sq, &w_b.w);
    let (es, en) = output_powers(chan.h_ea.as_mat(), &scheme.t, p, q_z_true, chan.sigma_e_sq, &w_e.w);
    if !(bn > 0.0) || !(en > 0.0) {
        return Err(Error::Numeric("non-positive interference-plus-noise power".into()));
    }
    let sinr_b = bs / bn;
    let sinr_e = es / en;
    if !sinr_b.is_finite() || !sinr_e.is_finite() {
        return Err(Error::Numeric("non-finite SINR".into()));
    }
    Ok(SinrReport {
        sinr_b,
        sinr_e,
        secrecy_capacity: secrecy_capacity_proxy(sinr_b, sinr_e),
        outage: scheme.outage,
        bob_signal: bs,
        bob_interference_noise: bn,
        eve_signal: es,
        eve_interference_noise: en,
    })
}

/// Matched filter at Bob and MMSE at Eve, both against `scheme.q_z`.
pub fn evaluate_default(chan: &ChannelSet, scheme: &TxScheme) -> Result<SinrReport> {
    let wb = bob_matched_beamformer(chan, scheme);
    let we = eve_mmse_beamformer(chan, scheme)?;
    evaluate_sinr(chan, scheme, &wb, &we, &scheme.q_z)
}

/// `max(0, log2(1 + SINR_b) - log2(1 + SINR_e))`.
pub fn secrecy_capacity_proxy(sinr_b: f64, sinr_e: f64) -> f64 {
    ((1.0 + sinr_b.max(0.0)).log2() - (1.0 + sinr_e.max(0.0)).log2()).max(0.0)
}

/// Determinant form of the wiretap secrecy rate with transmit covariance
/// `rho P t t^H + Q'_z`, each side normalised by its own noise power.
pub fn secrecy_capacity_mimo(chan: &ChannelSet, scheme: &TxScheme) -> Result<f64> {
    let qa = scheme.transmit_covariance();
    let rate = |h: &CMat, noise: f64| -> Result<f64> {
        let n = h.nrows();
        linalg::log2_det_hpd(&(CMat::identity(n, n) + h * &qa * h.adjoint() * c(1.0 / noise, 0.0)))
    };
    let cb = rate(chan.h_ba.as_mat(), chan.sigma_b_sq)?;
    let ce = rate(chan.h_ea.as_mat(), chan.sigma_e_sq)?;
    Ok((cb - ce).max(0.0))
}

/// Power policy for the known-ECSI design.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownEcsiPower {
    /// Smallest data power reaching `SINR_b = S`; the remainder stays unused.
    #[default]
    FixedQos,
    /// Always transmit the data stream at full power.
    FullPower,
}

/// Largest generalised eigenpair of `a t = lambda b t` with `b` Hermitian PD.
pub fn generalized_eig_max(a: &CMat, b: &CMat) -> Result<(f64, CVec)> {
    let (vals, vecs, linv_h) = reduce_generalized(a, b)?;
    let mut t = &linv_h * vecs.column(0);
    t /= c(t.norm(), 0.0);
    linalg::fix_phase(&mut t);
    Ok((vals[0], t))
}

/// Smallest generalised eigenpair of `a t = mu b t` with `b` Hermitian PD.
pub fn generalized_eig_min(a: &CMat, b: &CMat) -> Result<(f64, CVec)> {
    let (vals, vecs, linv_h) = reduce_generalized(a, b)?;
    let n = vals.len();
    let mut t = &linv_h * vecs.column(n - 1);
    t /= c(t.norm(), 0.0);
    linalg::fix_phase(&mut t);
    Ok((vals[n - 1], t))
}

/// Cholesky reduction `L^-1 a L^-H` of the pencil; returns its eigenpairs and `L^-H`.
fn reduce_generalized(a: &CMat, b: &CMat) -> Result<(Vec<f64>, CMat, CMat)> {
    let n = b.nrows();
    let chol = linalg::hermitian_part(b)
        .cholesky()
        .ok_or_else(|| Error::Numeric("generalised eigenproblem: right-hand matrix not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .solve_lower_triangular(&CMat::identity(n, n))
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let reduced = &linv * a * linv.adjoint();
    let (vals, vecs) = linalg::hermitian_eigen(&reduced);
    Ok((vals, vecs, linv.adjoint()))
}

/// Beamformer minimising Eve's SINR for a given Bob SINR.
///
/// When `h_ea` has a non-trivial nullspace, the beamformer is the direction
/// inside that nullspace that maximises Bob's gain (the zero-eigenvalue limit
/// of the reversed pencil `H_ea^H H_ea t = mu H_ba^H H_ba t`). Otherwise the
/// pencil `H_ba^H H_ba t = lambda H_ea^H H_ea t` is solved directly.
pub fn secrecy_beamformer(h_ba: &CMat, h_ea: &CMat) -> Result<CVec> {
    let na = h_ba.ncols();
    let a = h_ba.adjoint() * h_ba;
    let svd = linalg::full_svd(h_ea)?;
    let s1 = svd.sigma[0];
    let rank = svd.sigma.iter().filter(|&&s| s > RANK_TOL * s1.max(f64::MIN_POSITIVE)).count();
    let rank = if s1 > 0.0 { rank } else { 0 };
    let mut t = if rank < na {
        let null = svd.v.columns(rank, na - rank).into_owned();
        let reduced = null.adjoint() * &a * &null;
        let (vals, vecs) = linalg::hermitian_eigen(&reduced);
        if !(vals[0] > RANK_TOL * linalg::trace(&a).re) {
            return Err(Error::DegenerateChannel { sigma_1: vals[0].max(0.0).sqrt(), sigma_f: 0.0 });
        }
        null * vecs.column(0)
    } else {
        generalized_eig_max(&a, &(h_ea.adjoint() * h_ea))?.1
    };
    t /= c(t.norm(), 0.0);
    linalg::fix_phase(&mut t);
    Ok(t)
}

/// Known-ECSI design against Alice's belief `h_ea_assumed` (no artificial noise).
pub fn design_known_ecsi(
    chan: &ChannelSet,
    h_ea_assumed: &ChannelMatrix,
    target_sinr: f64,
    policy: KnownEcsiPower,
) -> Result<TxScheme> {
    check_target(target_sinr)?;
    if h_ea_assumed.cols() != chan.na() {
        return Err(Error::Dimension("assumed Eve channel has wrong transmit dimension".into()));
    }
    let t = secrecy_beamformer(chan.h_ba.as_mat(), h_ea_assumed.as_mat())?;
    let gain = (chan.h_ba.as_mat() * &t).norm_squared();
    let needed = chan.sigma_b_sq * target_sinr / (chan.power_p * gain);
    let outage = needed > 1.0;
    let rho = match policy {
        KnownEcsiPower::FixedQos => needed.min(1.0),
        KnownEcsiPower::FullPower => 1.0,
    };
    let na = chan.na();
    Ok(TxScheme { t, q_z: CMat::zeros(na, na), rho, power_p: chan.power_p, target_sinr, outage })
}
