//! Simulation of non-Markovian open quantum systems via time-local
//! (time-convolutionless) master equations and their stochastic unraveling
//! as a piecewise-deterministic jump process in a doubled Hilbert space.
//!
//! The library is organized bottom-up:
//!
//! - [`hilbert`]: finite-dimensional complex linear algebra and the
//!   doubled-space state pair `θ = (φ, ψ)`,
//! - [`models`]: reservoir models, their spectral densities `J(ω)` and the
//!   real correlation functions `Φ(t)`, `Ψ(t)`,
//! - [`rates`]: time-dependent decay rate `γ(t)` and energy shift `S(t)`
//!   under the Markov, TCL2, TCL4, GME-Born and exact schemes,
//! - [`oracle`]: analytic reference solutions (survival amplitude,
//!   populations, breakdown time in strong coupling),
//! - [`mastereq`]: deterministic propagation of general time-local master
//!   equations `∂ρ/∂t = Aρ + ρB† + Σᵢ CᵢρDᵢ†`,
//! - [`unravel`]: jump-process trajectories on the single and the doubled
//!   Hilbert space, including negative transition rates,
//! - [`ensemble`]: parallel trajectory ensembles with reproducible seeding
//!   and deterministic reduction,
//! - [`scenario`]: CLI-facing presets and CSV/manifest emission.
//!
//! All core math is generic over the scalar type through [`scalar::Real`];
//! concrete `f64` aliases live at the crate root.

pub mod ensemble;
pub mod error;
pub mod export;
pub mod grid;
pub mod hilbert;
pub mod mastereq;
pub mod models;
pub mod oracle;
pub mod rates;
pub mod scalar;
pub mod scenario;
pub mod unravel;

pub use error::Error;
pub use scalar::Real;

/// Default double-precision scalar.
pub type R64 = f64;
/// Double-precision complex amplitude.
pub type C64 = num_complex::Complex<f64>;

pub type CVector64 = hilbert::CVector<f64>;
pub type COperator64 = hilbert::COperator<f64>;
pub type DoubledState64 = hilbert::DoubledState<f64>;
pub type ModelSpec64 = models::ModelSpec<f64>;
pub type RatePair64 = rates::RatePair<f64>;
pub type TimeLocalGenerator64 = mastereq::TimeLocalGenerator<f64>;
pub type DensitySeries64 = mastereq::DensitySeries<f64>;
pub type EnsembleEstimate64 = ensemble::EnsembleEstimate<f64>;
