//! Quantization of probability measures by empirical measures.
//!
//! This crate measures how well a probability measure `μ` on `R^d` is
//! approximated by the empirical measure `μ̂_N` of `N` independent samples,
//! where approximation quality is the `p`-th Wasserstein distance
//! `ρ_p(μ, ν) = inf_ξ (∫ ‖x−y‖^p dξ)^{1/p}` over couplings `ξ` of `μ` and `ν`.
//! The quantity of interest is the averaged error `E[ρ_p^p(μ, μ̂_N)]^{1/p}`
//! together with its decay rate in `N` and the explicit constants that bound it.
//!
//! The pieces:
//!
//! * [`measures`] — measure families with exact samplers, exact box masses and
//!   max-norm moments, plus norms and discrete (weighted-atom) measures.
//! * [`transport`] — exact discrete–discrete `ρ_p` via a network-simplex
//!   min-cost-flow solver, a brute-force assignment oracle, and a semi-discrete
//!   estimator with a certified two-sided discretization bracket.
//! * [`dyadic`] — the nested dyadic partition of the unit cube, measure
//!   approximation on a partition, a multiscale transport upper bound with an
//!   explicit truncation tail, and a cellwise resampling coupling.
//! * [`quantize`] — seeded Monte Carlo estimation of the random quantization
//!   error, an exact two-point oracle, a Lloyd-type optimal quantizer baseline,
//!   log-log rate fits, and the rescaled-error trace.
//! * [`bounds`] — closed-form constants (`kappa_cube`, `kappa_pierce`), moment
//!   bounds, high-resolution integrals, and pass/fail bound reports.
//!
//! Numeric kernels are generic over the scalar type through [`Real`] (both
//! `f32` and `f64` implement it); the experiment harness and all serialized
//! artifacts use `f64`. Aliases for the common `f64` instantiations live at the
//! crate root.

pub mod bounds;
pub mod dyadic;
pub mod error;
pub mod measures;
pub mod num;
pub mod quantize;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
pub use num::Real;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use measures::{unit_cube_diameter, AxisBox, DiscreteMeasure, ModelMeasure, Norm, Point};

pub use bounds::{
    check_report, hr_integral, kappa_cube, kappa_pierce, pierce_rhs, BoundReport,
    BoundSelection, CheckRow,
};
pub use dyadic::{dyadic_bound, resample_coupling, DyadicBoundResult, DyadicCell};
pub use quantize::{
    kappa_trace_from_summaries, kappa_unif_trace, optimal_quantizer, rate_fit,
    two_point_exact, v_rand_estimate, ExperimentSpec, KappaTrace, NSummary,
    QuantizerResult, RateFit, ReplicationRecord, SolverChoice,
};
pub use transport::{rho_bruteforce, rho_exact, semidiscrete, SemiDiscreteResult};

/// `f64` instantiations used by the experiment harness and the CLI.
pub type Point64 = Point<f64>;
pub type AxisBox64 = AxisBox<f64>;
pub type DiscreteMeasure64 = DiscreteMeasure<f64>;
pub type ModelMeasure64 = ModelMeasure<f64>;
pub type ExperimentSpec64 = ExperimentSpec<f64>;
