//! Brute-force Monte Carlo estimators for the perturbation statistics.
//!
//! These re-derive every quantity of [`crate::perturb::PerturbMoments`] by
//! drawing CSI errors, recomputing the SVD of the perturbed channel and
//! averaging. Nothing here goes through the closed-form expansion, so the
//! two can be checked against each other.
//!
//! Draws come in antithetic pairs `dH, -dH`, which cancels the zero-mean
//! first-order fluctuation of every statistic exactly.

use rayon::prelude::*;

use crate::chanmodel::{derive_seed, sample_csi_error, ChannelMatrix, CsiErrorModel, SvdPartition};
use crate::error::Result;
use crate::linalg::{self, c, CMat, CVec};

const CHUNK: usize = 1024;

#[derive(Clone, Debug)]
pub struct MomentEstimate {
    /// Independent error samples; twice as many perturbed SVDs were averaged.
    pub draws: usize,
    /// Sample mean of `sigma~_j - sigma_j`, all `F` values.
    pub e_dsigma: Vec<f64>,
    pub e_dsigma1_sq: f64,
    /// Sample mean of the phase-aligned `v~_j - v_j`, columns `0..F`.
    pub e_dv: CMat,
    pub e_v1_dv1: f64,
    pub leak_v1: f64,
    pub g: CMat,
    pub g_prime: CMat,
    pub g_dprime: CMat,
    pub k: CMat,
}

struct Acc {
    dsigma: Vec<f64>,
    dsigma1_sq: f64,
    dv: CMat,
    v1_dv1: f64,
    leak: f64,
    g: CMat,
    g_prime: CMat,
    g_dprime: CMat,
    k: CMat,
}

impl Acc {
    fn zeros(nb: usize, na: usize, f: usize) -> Self {
        Self {
            dsigma: vec![0.0; f],
            dsigma1_sq: 0.0,
            dv: CMat::zeros(na, f),
            v1_dv1: 0.0,
            leak: 0.0,
            g: CMat::zeros(nb, nb),
            g_prime: CMat::zeros(nb, nb),
            g_dprime: CMat::zeros(na, na),
            k: CMat::zeros(nb, nb),
        }
    }

    fn add(&mut self, o: &Acc) {
        for (a, b) in self.dsigma.iter_mut().zip(&o.dsigma) {
            *a += b;
        }
        self.dsigma1_sq += o.dsigma1_sq;
        self.dv += &o.dv;
        self.v1_dv1 += o.v1_dv1;
        self.leak += o.leak;
        self.g += &o.g;
        self.g_prime += &o.g_prime;
        self.g_dprime += &o.g_dprime;
        self.k += &o.k;
    }
}

/// Estimates the perturbation statistics of `h` (with SVD `svd`) from
/// `draws` independent error samples, each used with both signs. Deterministic for a given seed
/// regardless of the thread count.
pub fn estimate_moments(
    h: &ChannelMatrix,
    svd: &SvdPartition,
    err: &CsiErrorModel,
    draws: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    let (nb, na) = (h.rows(), h.cols());
    let f = svd.rank();
    let sigma = svd.sigma().to_vec();
    let v = svd.v().clone();
    let u_s = svd.u_s();
    let v_s = svd.v_s();
    let v_f = svd.v_f();
    let d: Vec<f64> = svd.sigma_s().iter().map(|s| 1.0 / (s * s - svd.sigma_f().powi(2))).collect();
    let dmat = CMat::from_diagonal(&CVec::from_iterator(d.len(), d.iter().map(|&x| c(x, 0.0))));
    let w_g = &v_f * v_f.adjoint();
    let w_gp = &v_s * &dmat * v_s.adjoint();
    let w_k = &v_s * v_s.adjoint();
    let z_gpp = &u_s * &dmat * u_s.adjoint();

    let n_chunks = draws.div_ceil(CHUNK);
    let chunks: Vec<Result<Acc>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = Acc::zeros(nb, na, f);
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(draws);
            for i in lo..hi {
                let base = sample_csi_error(err, nb, na, derive_seed(seed, i as u64, 0))?;
                for sign in [1.0, -1.0] {
                    let dhm = base.as_mat() * c(sign, 0.0);
                    let pert = linalg::full_svd(&(h.as_mat() + &dhm))?;
                    for j in 0..f {
                        let vj = v.column(j).into_owned();
                        let vt = pert.v.column(j).into_owned();
                        let ip = vj.dotc(&vt);
                        let align = if ip.norm() > 0.0 { ip.conj() / ip.norm() } else { c(1.0, 0.0) };
                        let dv = vt * align - &vj;
                        if j == 0 {
                            acc.v1_dv1 += vj.dotc(&dv).re;
                            acc.leak += 1.0 - ip.norm_sqr();
                            acc.dsigma1_sq += (pert.sigma[0] - sigma[0]).powi(2);
                        }
                        let col = acc.dv.column(j) + dv;
                        acc.dv.set_column(j, &col);
                        acc.dsigma[j] += pert.sigma[j] - sigma[j];
                    }
                    acc.g += &dhm * &w_g * dhm.adjoint();
                    acc.g_prime += &dhm * &w_gp * dhm.adjoint();
                    acc.k += &dhm * &w_k * dhm.adjoint();
                    acc.g_dprime += dhm.adjoint() * &z_gpp * &dhm;
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = Acc::zeros(nb, na, f);
    for ch in chunks {
        total.add(&ch?);
    }
    let n = 2.0 * draws as f64;
    let inv = c(1.0 / n, 0.0);
    Ok(MomentEstimate {
        draws,
        e_dsigma: total.dsigma.iter().map(|x| x / n).collect(),
        e_dsigma1_sq: total.dsigma1_sq / n,
        e_dv: total.dv * inv,
        e_v1_dv1: total.v1_dv1 / n,
        leak_v1: total.leak / n,
        g: total.g * inv,
        g_prime: total.g_prime * inv,
        g_dprime: total.g_dprime * inv,
        k: total.k * inv,
    })
}

/// Sample second moment of `vec(dH)`, for checking the error sampler.
pub fn sample_error_covariance(err: &CsiErrorModel, nb: usize, na: usize, draws: usize, seed: u64) -> Result<CMat> {
    let n = nb * na;
    let n_chunks = draws.div_ceil(CHUNK);
    let parts: Vec<Result<CMat>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = CMat::zeros(n, n);
            for i in ci * CHUNK..((ci + 1) * CHUNK).min(draws) {
                let dh = sample_csi_error(err, nb, na, derive_seed(seed, i as u64, 0))?;
                let x = CVec::from_column_slice(dh.as_mat().as_slice());
                acc += &x * x.adjoint();
            }
            Ok(acc)
        })
        .collect();
    let mut total = CMat::zeros(n, n);
    for p in parts {
        total += p?;
    }
    Ok(total * c(1.0 / draws as f64, 0.0))
}
