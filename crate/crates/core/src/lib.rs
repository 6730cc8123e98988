//! Secure MIMO transmission with artificial noise under imperfect channel
//! state information.
//!
//! The crate covers channel and error generation ([`chanmodel`]), transmit
//! schemes and SINR evaluation ([`txscheme`]), second-order SVD perturbation
//! statistics ([`perturb`]), robust receivers for FDD and TDD feedback
//! ([`robust`]) and a Monte Carlo harness ([`sim`]).

pub mod chanmodel;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod perturb;
pub mod robust;
pub mod sim;
pub mod txscheme;
pub mod validate;

pub use chanmodel::{
    generate_channels, partition_svd, sample_csi_error, ChannelMatrix, ChannelSet, CsiErrorModel, SvdPartition,
};
pub use error::{Error, Result};
pub use perturb::{compute_moments, predict_naive_sinr, PerturbMoments};
pub use txscheme::{evaluate_sinr, SinrReport, TxScheme};
