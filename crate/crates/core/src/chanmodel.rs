//! Channel representation, random channel generation, the partitioned SVD of
//! Bob's channel and CSI-error sampling.
//!
//! Complex Gaussian draws are CN(0, s): real and imaginary parts are
//! independent with variance s/2 each, so unit variance means
//! `E|h_ij|^2 = 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, complex_gaussian, full_svd, CMat, CVec};

/// Relative tolerance under which the smallest singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Relative tolerance (w.r.t. sigma_1^2) on squared singular-value gaps.
pub const GAP_TOL: f64 = 1e-8;

/// Mixes `(master, trial, stream)` into an independent 64-bit seed.
///
/// Uses the splitmix64 finaliser; each trial of an experiment owns its own
/// generator so results do not depend on scheduling.
pub fn derive_seed(master: u64, trial: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ trial) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A finite complex channel matrix (rows = receive antennas, cols = transmit antennas).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix(CMat);

impl ChannelMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Dimension(format!("empty {}x{} channel", m.nrows(), m.ncols())));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("channel has non-finite entries".into()));
        }
        Ok(Self(m))
    }

    /// Builds a real-valued channel from row-major data.
    pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::new(CMat::from_fn(rows, cols, |i, j| c(data[i * cols + j], 0.0)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    /// Average per-entry power `||H||_F^2 / (rows * cols)`.
    pub fn mean_gain(&self) -> f64 {
        linalg::frobenius_sq(&self.0) / (self.rows() * self.cols()) as f64
    }

    /// Rescales so that the average per-entry power equals `gain_sq`.
    pub fn normalized(&self, gain_sq: f64) -> Result<Self> {
        let g = self.mean_gain();
        if g <= 0.0 {
            return Err(Error::Numeric("cannot normalise an all-zero channel".into()));
        }
        Self::new(&self.0 * c((gain_sq / g).sqrt(), 0.0))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

impl std::ops::Add<&ChannelMatrix> for &ChannelMatrix {
    type Output = ChannelMatrix;
    fn add(self, rhs: &ChannelMatrix) -> ChannelMatrix {
        ChannelMatrix(&self.0 + &rhs.0)
    }
}

/// Channels and link budget for one trial. All powers are linear.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    pub h_ba: ChannelMatrix,
    pub h_ea: ChannelMatrix,
    pub sigma_b_sq: f64,
    pub sigma_e_sq: f64,
    pub power_p: f64,
}

impl ChannelSet {
    pub fn new(
        h_ba: ChannelMatrix,
        h_ea: ChannelMatrix,
        sigma_b_sq: f64,
        sigma_e_sq: f64,
        power_p: f64,
    ) -> Result<Self> {
        if h_ba.cols() != h_ea.cols() {
            return Err(Error::Dimension(format!(
                "Bob and Eve channels disagree on transmit antennas ({} vs {})",
                h_ba.cols(),
                h_ea.cols()
            )));
        }
        for (name, v) in [("sigma_b_sq", sigma_b_sq), ("sigma_e_sq", sigma_e_sq), ("power_p", power_p)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { h_ba, h_ea, sigma_b_sq, sigma_e_sq, power_p })
    }

    pub fn with_link_budget(self, power_p: f64, sigma_b_sq: f64, sigma_e_sq: f64) -> Result<Self> {
        Self::new(self.h_ba, self.h_ea, sigma_b_sq, sigma_e_sq, power_p)
    }

    /// Same link budget, different Bob channel.
    pub fn with_h_ba(&self, h_ba: ChannelMatrix) -> Result<Self> {
        Self::new(h_ba, self.h_ea.clone(), self.sigma_b_sq, self.sigma_e_sq, self.power_p)
    }

    pub fn na(&self) -> usize {
        self.h_ba.cols()
    }

    pub fn nb(&self) -> usize {
        self.h_ba.rows()
    }

    pub fn ne(&self) -> usize {
        self.h_ea.rows()
    }
}

/// Draws i.i.d. CN(0,1) Bob and CN(0, gamma_ea_sq) Eve channels.
///
/// The link budget defaults to `P = 100`, `sigma_b^2 = sigma_e^2 = 1`; use
/// [`ChannelSet::with_link_budget`] to change it. Bob's channel is drawn
/// first, so it does not depend on `ne`.
pub fn generate_channels(na: usize, nb: usize, ne: usize, gamma_ea_sq: f64, rng_seed: u64) -> Result<ChannelSet> {
    if na == 0 || nb == 0 || ne == 0 {
        return Err(Error::Dimension(format!("antenna counts must be >= 1 (na={na}, nb={nb}, ne={ne})")));
    }
    if !(gamma_ea_sq > 0.0) || !gamma_ea_sq.is_finite() {
        return Err(Error::Parameter(format!("gamma_ea_sq must be positive, got {gamma_ea_sq}")));
    }
    let mut rng = rng_from_seed(rng_seed);
    let h_ba = complex_gaussian(&mut rng, nb, na, 1.0);
    let h_ea = complex_gaussian(&mut rng, ne, na, gamma_ea_sq);
    ChannelSet::new(ChannelMatrix::new(h_ba)?, ChannelMatrix::new(h_ea)?, 1.0, 1.0, 100.0)
}

/// Partitioned SVD of Bob's channel.
///
/// Stores the full decomposition; the partition into the leading `F-1`
/// components, the weakest component `F` and the interference subspace
/// `T'` is exposed through accessors.
#[derive(Clone, Debug)]
pub struct SvdPartition {
    u: CMat,
    sigma: Vec<f64>,
    v: CMat,
    /// Set when adjacent squared singular values are closer than `GAP_TOL * sigma_1^2`.
    pub ill_conditioned_gap: bool,
}

impl SvdPartition {
    /// `F = min(rows, cols)`.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// Full left singular basis (rows x rows).
    pub fn u(&self) -> &CMat {
        &self.u
    }

    /// Full right singular basis (cols x cols).
    pub fn v(&self) -> &CMat {
        &self.v
    }

    /// All `F` singular values, descending.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn u_s(&self) -> CMat {
        self.u.columns(0, self.rank() - 1).into_owned()
    }

    pub fn sigma_s(&self) -> &[f64] {
        &self.sigma[..self.rank() - 1]
    }

    pub fn v_s(&self) -> CMat {
        self.v.columns(0, self.rank() - 1).into_owned()
    }

    pub fn u_f(&self) -> CVec {
        self.u.column(self.rank() - 1).into_owned()
    }

    pub fn sigma_f(&self) -> f64 {
        self.sigma[self.rank() - 1]
    }

    pub fn v_f(&self) -> CVec {
        self.v.column(self.rank() - 1).into_owned()
    }

    pub fn sigma_1(&self) -> f64 {
        self.sigma[0]
    }

    pub fn u_1(&self) -> CVec {
        self.u.column(0).into_owned()
    }

    pub fn v_1(&self) -> CVec {
        self.v.column(0).into_owned()
    }

    /// The `cols - 1` right singular vectors orthogonal to `v_1` (weakest last).
    pub fn t_prime(&self) -> CMat {
        let n = self.cols();
        self.v.columns(1, n - 1).into_owned()
    }

    /// `U_s Sigma_s V_s^H + sigma_F u_F v_F^H`.
    pub fn reconstruct(&self) -> CMat {
        let mut out = CMat::zeros(self.rows(), self.cols());
        for (k, &s) in self.sigma.iter().enumerate() {
            out += self.u.column(k) * self.v.column(k).adjoint() * c(s, 0.0);
        }
        out
    }
}

/// Full SVD of `h` partitioned as above.
///
/// Rejects rank-deficient channels; flags (but accepts) near-repeated
/// singular values. Tall channels are accepted here because transmit design
/// only needs the right singular vectors; the perturbation analysis enforces
/// `rows <= cols` itself.
pub fn partition_svd(h: &ChannelMatrix) -> Result<SvdPartition> {
    let svd = full_svd(h.as_mat())?;
    let s1 = svd.sigma[0];
    let sf = *svd.sigma.last().unwrap();
    if !(s1 > 0.0) || sf < RANK_TOL * s1 {
        return Err(Error::DegenerateChannel { sigma_1: s1, sigma_f: sf });
    }
    let min_gap = svd
        .sigma
        .windows(2)
        .map(|w| w[0] * w[0] - w[1] * w[1])
        .fold(f64::INFINITY, f64::min);
    Ok(SvdPartition {
        u: svd.u,
        sigma: svd.sigma,
        v: svd.v,
        ill_conditioned_gap: min_gap < GAP_TOL * s1 * s1,
    })
}

/// Second-order description of the CSI error `vec(dH)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CsiErrorModel {
    /// `C = sigma_h_sq * I`.
    Iid { sigma_h_sq: f64 },
    /// Full covariance of `vec(dH)` (column stacking), `(nb*na) x (nb*na)`.
    Full { cov: CMat },
}

impl CsiErrorModel {
    pub fn iid(sigma_h_sq: f64) -> Result<Self> {
        if !(sigma_h_sq >= 0.0) || !sigma_h_sq.is_finite() {
            return Err(Error::Parameter(format!("sigma_h_sq must be >= 0, got {sigma_h_sq}")));
        }
        Ok(Self::Iid { sigma_h_sq })
    }

    /// Validates Hermitian PSD within 1e-9 (relative to the largest entry).
    pub fn full(cov: CMat) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() == 0 {
            return Err(Error::Dimension("covariance must be square and non-empty".into()));
        }
        let scale = cov.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let asym = linalg::frobenius_sq(&(&cov - cov.adjoint())).sqrt();
        if asym > 1e-9 * scale {
            return Err(Error::Parameter("covariance is not Hermitian".into()));
        }
        let (vals, _) = linalg::hermitian_eigen(&cov);
        if vals.last().copied().unwrap_or(0.0) < -1e-9 * scale {
            return Err(Error::Parameter("covariance is not positive semi-definite".into()));
        }
        Ok(Self::Full { cov: linalg::hermitian_part(&cov) })
    }

    /// Scales the covariance by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            Self::Iid { sigma_h_sq } => Self::Iid { sigma_h_sq: sigma_h_sq * alpha },
            Self::Full { cov } => Self::Full { cov: cov * c(alpha, 0.0) },
        }
    }

    pub fn check_dims(&self, nb: usize, na: usize) -> Result<()> {
        if let Self::Full { cov } = self {
            if cov.nrows() != nb * na {
                return Err(Error::Dimension(format!(
                    "covariance is {0}x{0} but channel has {1} entries",
                    cov.nrows(),
                    nb * na
                )));
            }
        }
        Ok(())
    }

    /// Full covariance matrix of `vec(dH)`.
    pub fn covariance(&self, nb: usize, na: usize) -> CMat {
        match self {
            Self::Iid { sigma_h_sq } => CMat::identity(nb * na, nb * na) * c(*sigma_h_sq, 0.0),
            Self::Full { cov } => cov.clone(),
        }
    }

    /// Column-block covariance `C_ij = E{dH[:,i] dH[:,j]^H}` (nb x nb).
    pub fn column_block(&self, nb: usize, i: usize, j: usize) -> CMat {
        match self {
            Self::Iid { sigma_h_sq } => {
                if i == j {
                    CMat::identity(nb, nb) * c(*sigma_h_sq, 0.0)
                } else {
                    CMat::zeros(nb, nb)
                }
            }
            Self::Full { cov } => cov.view((i * nb, j * nb), (nb, nb)).into_owned(),
        }
    }
}

/// Draws `dH` with the model's covariance.
pub fn sample_csi_error(model: &CsiErrorModel, nb: usize, na: usize, rng_seed: u64) -> Result<ChannelMatrix> {
    if nb == 0 || na == 0 {
        return Err(Error::Dimension("error matrix dimensions must be >= 1".into()));
    }
    model.check_dims(nb, na)?;
    let mut rng = rng_from_seed(rng_seed);
    match model {
        CsiErrorModel::Iid { sigma_h_sq } => {
            // draw unit variance then scale, so one seed gives the same shape at every level
            let w = complex_gaussian(&mut rng, nb, na, 1.0);
            ChannelMatrix::new(w * c(sigma_h_sq.sqrt(), 0.0))
        }
        CsiErrorModel::Full { cov } => {
            let (vals, vecs) = linalg::hermitian_eigen(cov);
            let mut root = vecs.clone();
            for (k, &lam) in vals.iter().enumerate() {
                let s = lam.max(0.0).sqrt();
                let col = root.column(k) * c(s, 0.0);
                root.set_column(k, &col);
            }
            let w = complex_gaussian(&mut rng, nb * na, 1, 1.0);
            let x = root * w;
            ChannelMatrix::new(CMat::from_column_slice(nb, na, x.as_slice()))
        }
    }
}

/// ECSI blend `sqrt(1-gamma) H_ea + sqrt(gamma) W` with `W` i.i.d. CN(0,1).
pub fn perturb_ecsi(h_ea: &ChannelMatrix, gamma: f64, rng_seed: u64) -> Result<ChannelMatrix> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Parameter(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(h_ea.clone());
    }
    let mut rng = rng_from_seed(rng_seed);
    let w = complex_gaussian(&mut rng, h_ea.rows(), h_ea.cols(), 1.0);
    ChannelMatrix::new(h_ea.as_mat() * c((1.0 - gamma).sqrt(), 0.0) + w * c(gamma.sqrt(), 0.0))
}

/// `10 log10(gamma / (1 - gamma))`, the perturbation-to-signal ratio of an ECSI blend.
pub fn ecsi_perturbation_db(gamma: f64) -> f64 {
    10.0 * (gamma / (1.0 - gamma)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_sq;

    #[test]
    fn diag_partition() {
        let h = ChannelMatrix::from_real_rows(2, 2, &[2.0, 0.0, 0.0, 1.0]).unwrap();
        let p = partition_svd(&h).unwrap();
        assert_eq!(p.sigma(), &[2.0, 1.0]);
        assert!((p.v_1() - linalg::unit(2, 0)).norm() < 1e-15);
        assert!((p.v_f() - linalg::unit(2, 1)).norm() < 1e-15);
        assert!(!p.ill_conditioned_gap);
    }

    #[test]
    fn unitary_flags_gap() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = ChannelMatrix::new(CMat::from_row_slice(
            3,
            3,
            &[c(s, 0.0), c(s, 0.0), c(0.0, 0.0), c(-s, 0.0), c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
        ))
        .unwrap();
        let p = partition_svd(&h).unwrap();
        assert!(p.sigma().iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert!(p.ill_conditioned_gap);
    }

    #[test]
    fn rank_deficient_rejected() {
        let h = ChannelMatrix::from_real_rows(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(partition_svd(&h), Err(Error::DegenerateChannel { .. })));
    }

    #[test]
    fn fat_random_reconstructs_and_t_prime_orthogonal() {
        let ch = generate_channels(4, 2, 1, 1.0, 7).unwrap();
        let p = partition_svd(&ch.h_ba).unwrap();
        let h = ch.h_ba.as_mat();
        assert!(frobenius_sq(&(p.reconstruct() - h)).sqrt() < 1e-9 * frobenius_sq(h).sqrt());
        let tp = p.t_prime();
        assert_eq!(tp.ncols(), 3);
        let gram = tp.adjoint() * &tp;
        assert!(frobenius_sq(&(gram - CMat::identity(3, 3))) < 1e-24);
        assert!((tp.adjoint() * p.v_1()).norm() < 1e-12);
    }

    #[test]
    fn degenerate_dimensions() {
        let ch = generate_channels(1, 1, 1, 1.0, 0).unwrap();
        assert_eq!((ch.h_ba.rows(), ch.h_ba.cols(), ch.h_ea.rows()), (1, 1, 1));
        assert!(generate_channels(0, 1, 1, 1.0, 0).is_err());
    }

    #[test]
    fn same_seed_same_channels() {
        let a = generate_channels(4, 4, 3, 1.0, 42).unwrap();
        let b = generate_channels(4, 4, 3, 1.0, 42).unwrap();
        assert_eq!(a.h_ba, b.h_ba);
        assert_eq!(a.h_ea, b.h_ea);
    }

    #[test]
    fn zero_error_is_zero() {
        let e = sample_csi_error(&CsiErrorModel::iid(0.0).unwrap(), 3, 4, 5).unwrap();
        assert!(e.as_mat().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn ecsi_blend_edges() {
        let ch = generate_channels(3, 3, 2, 1.0, 1).unwrap();
        assert_eq!(perturb_ecsi(&ch.h_ea, 0.0, 9).unwrap(), ch.h_ea);
        assert!(perturb_ecsi(&ch.h_ea, 1.5, 9).is_err());
        assert!(perturb_ecsi(&ch.h_ea, -0.1, 9).is_err());
        assert!((ecsi_perturbation_db(0.05) + 12.8).abs() < 0.05);
    }

    #[test]
    fn covariance_validation() {
        let mut bad = CMat::identity(4, 4);
        bad[(0, 1)] = c(1.0, 0.0);
        assert!(CsiErrorModel::full(bad).is_err());
        let neg = CMat::identity(4, 4) * c(-1.0, 0.0);
        assert!(CsiErrorModel::full(neg).is_err());
        let m = CsiErrorModel::full(CMat::identity(4, 4)).unwrap();
        assert!(sample_csi_error(&m, 3, 3, 0).is_err());
    }

    #[test]
    fn derive_seed_spreads() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }
}
