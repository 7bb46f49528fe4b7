//! Secrecy outage analysis over fluctuating two-ray (FTR) fading channels.
//!
//! The crate is layered bottom-up:
//!
//! - [`special`]: log-gamma, integer-shape incomplete gamma, binomials and
//!   associated Legendre functions of real degree for arguments `x >= 1`.
//! - [`ftr`]: the FTR mixture coefficients `d_j`, the PDF/CDF/CCDF series
//!   with adaptive truncation and the high-SNR CDF.
//! - [`secrecy`]: the modified secrecy outage probability in closed form and
//!   by quadrature, the conventional definition, the asymptotic form and the
//!   slope-based diversity order.
//! - [`monte_carlo`]: a deterministic, batch-parallel simulation of the
//!   physical FTR model used as an independent oracle.
//! - [`cli`]: the command-line surface (CSV output and run manifests).

pub mod cli;
pub mod error;
pub mod ftr;
pub mod monte_carlo;
pub mod quadrature;
pub mod secrecy;
pub mod special;

pub use error::{Error, Result};
pub use ftr::{
    d0, d_coeff, d_coeff_angular, ftr_ccdf, ftr_cdf, ftr_cdf_asymptotic, ftr_pdf,
    sigma2_from_avg_snr, FtrDistribution, FtrParams, LinkBudget, Truncation,
};
pub use monte_carlo::{mc_conventional_sop, mc_modified_sop, sample_ftr_snr, McConfig, McEstimate};
pub use secrecy::{
    asop, conventional_sop, diversity_order, modified_sop, modified_sop_quadrature,
    IncGammaScaling, SecrecyConfig, SecrecyScenario, SopMethod,
};
