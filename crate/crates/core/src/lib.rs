//! Symmetric birth-death processes: transition probabilities, first-passage
//! densities, taboo probabilities and Monte Carlo oracles.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod acceptance;
pub mod csv;
pub mod error;
pub mod figures;
pub mod fpt;
pub mod kernels;
pub mod quadrature;
pub mod rates;
pub mod scalar;
pub mod sim;
pub mod special;
pub mod twod;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RateModel = rates::RateModel<f64>;
pub type PresetParams = rates::PresetParams<f64>;
pub type SymmetryReport = rates::SymmetryReport<f64>;
pub type ProbabilityGrid = kernels::ProbabilityGrid<f64>;
pub type FptDensity = fpt::FptDensity<f64>;
pub type TabooGrid = fpt::TabooGrid<f64>;
pub type PlaneModel = twod::PlaneModel<f64>;
pub type LineCrossing = twod::LineCrossing<f64>;
pub type CrossingProbability = twod::CrossingProbability<f64>;
pub type EmpiricalEstimate = sim::EmpiricalEstimate<f64>;
pub type Histogram = sim::Histogram<f64>;
