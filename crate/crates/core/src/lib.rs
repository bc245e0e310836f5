//! Maximal-projection tests of uniformity on the hypersphere `S^{d-1}`.
//!
//! The crate covers the statistics `T_{n,β}` and their closed forms, the
//! zonal covariance kernels of their Gaussian limits, simulation of those
//! limits, samplers for standard alternatives, competing uniformity tests,
//! local Bahadur efficiencies and a Monte Carlo harness that drives them.

pub mod bahadur;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod legendre;
pub mod limit_sim;
pub mod quadrature;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod statistics;
pub mod zonal_kernel;

pub use error::{Error, Result};
pub use geometry::{make_cover, sample_uniform, DirectionCover, SphericalSample, UnitVector};
pub use legendre::{nu, power_expansion, psi, LegendrePolynomial, PowerExpansion};
pub use limit_sim::{limit_quantile, LimitMethod, LimitQuantile};
pub use samplers::{AlternativeSpec, Sampler};
pub use statistics::{t_stat, TestOutcome};
pub use zonal_kernel::{ShiftFunction, Spectrum, ZonalKernel};
