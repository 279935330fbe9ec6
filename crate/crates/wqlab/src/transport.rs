//! Wasserstein distances of order `p` under weighted couplings.
//!
//! Three solvers with different contracts:
//!
//! * [`rho_exact`] — exact `ρ_p(μ, ν)` between two discrete measures via a
//!   network simplex, returning the optimal coupling as a [`TransportPlan`].
//! * [`rho_bruteforce`] — permutation enumeration for equal-weight measures
//!   of at most eight atoms; an independent oracle for the simplex.
//! * [`semidiscrete`] — `ρ_p(μ, ν)` for a bounded-support model measure
//!   against a discrete one, via a dyadic grid discretization with a
//!   certified two-sided error ([`SemiDiscreteResult`]).

mod exact;
mod semidiscrete;
mod simplex;

pub use exact::{
    rho_bruteforce, rho_exact, rho_exact_capped, PlanEntry, TransportPlan, DEFAULT_ATOM_CAP,
};
pub use semidiscrete::{
    semidiscrete, semidiscrete_grid, SemiDiscreteResult, GRID_CELL_CAP,
};
