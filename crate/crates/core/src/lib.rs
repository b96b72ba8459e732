//! Pricing and calibration for shifted lognormal-mixture dynamics.
//!
//! Single assets follow a shifted lognormal mixture local-volatility model
//! (`smile`). Pairs of assets are joined either through the multivariate
//! mixture construction, where correlation lives between the instrumental
//! processes, or through a plain Brownian correlation (`multivariate`).
//! Options on the product of two assets are priced semi-analytically under
//! the uncertain-volatility model whose Markovian projection is the
//! multivariate mixture (`cross`), and `montecarlo` provides simulation
//! engines that serve as independent oracles for all of the above.
//!
//! The numerical core is generic over the scalar type ([`Scalar`]); the
//! calibration and simulation layers work in `f64`. Concrete `f64` aliases
//! are re-exported at the crate root.

pub mod analytic;
pub mod calibration;
pub mod cross;
mod error;
pub mod montecarlo;
pub mod multivariate;
pub mod optimize;
pub mod quadrature;
mod scalar;
pub mod smile;

pub use error::{Error, NoSolutionKind, Result};
pub use scalar::Scalar;

pub use analytic::OptionType;

/// One asset's shifted mixture parameters in double precision.
pub type MixtureParams = smile::ShiftedMixtureParams<f64>;
/// Correlation structure in double precision.
pub type Correlation = multivariate::CorrelationSpec<f64>;
/// A calibrated pair of assets in double precision.
pub type PairModel = multivariate::CrossModel<f64>;
/// Rates attached to a pair in double precision.
pub type PairRates = multivariate::CrossRates<f64>;
/// Cross pricing request in double precision.
pub type CrossRequest = cross::CrossPricingRequest<f64>;
