//! Exact Wasserstein distances between discrete measures.
//!
//! `ρ_p(μ, ν) = (min Σ ξ_{ij} ‖x_i − y_j‖^p)^{1/p}` over couplings `ξ` with
//! marginals `μ` and `ν`. The minimum is computed exactly by the network
//! simplex in [`super::simplex`]; small problems materialize the complete
//! bipartite graph, large ones run column generation (seed each source with
//! its nearest targets, then alternate pivoting with a full pricing sweep
//! over all virtual arcs until none prices in). Either way the result is
//! certified: final potentials are recomputed exactly from the basis tree,
//! every source–target pair is priced against them, and no artificial mass
//! may remain.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Norm};
use crate::num::Real;
use crate::transport::simplex::{FlowEntry, Simplex};

/// Default cap on `mu.len() + nu.len()` for one exact solve.
pub const DEFAULT_ATOM_CAP: usize = 50_000;
/// Above this many source×target pairs the solver stops materializing the
/// complete graph and switches to column generation. Both paths end in the
/// same optimality certificate; column generation overtakes the dense
/// simplex well before this size because the optimal support stays sparse.
pub(crate) const DENSE_PAIR_LIMIT: usize = 1 << 16;
/// Hard cap on materialized arcs, dense or generated.
const ARC_CAP: u64 = 20_000_000;
/// Nearest targets seeded per source under column generation.
const SEED_ARCS_PER_SOURCE: usize = 8;
/// Most-violated virtual arcs admitted per source and pricing round.
const ADDS_PER_SOURCE: usize = 4;
/// Pricing rounds before concluding the solve is not converging. Pricing
/// admits only never-materialized arcs, so each violated round grows the
/// arc set and termination is guaranteed; this cap only bounds wall time.
/// Grid-vs-sample instances around 2^15 × 2^11 atoms take 60-odd rounds.
const MAX_PRICING_ROUNDS: u64 = 1000;

/// One entry of an optimal coupling.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlanEntry<T> {
    pub source: usize,
    pub target: usize,
    pub mass: T,
}

/// An optimal coupling of two discrete measures.
#[derive(Debug, Clone, Serialize)]
pub struct TransportPlan<T> {
    pub entries: Vec<PlanEntry<T>>,
    /// `Σ mass·‖x−y‖^p` of the plan.
    pub cost_p: T,
}

impl<T: Real> TransportPlan<T> {
    /// Checks that the plan is a coupling: nonnegative masses whose row sums
    /// reproduce `mu` and whose column sums reproduce `nu`, within `tol`.
    pub fn validate_against(
        &self,
        mu: &DiscreteMeasure<T>,
        nu: &DiscreteMeasure<T>,
        tol: T,
    ) -> Result<()> {
        let mut row = vec![T::zero(); mu.len()];
        let mut col = vec![T::zero(); nu.len()];
        for e in &self.entries {
            if e.mass < T::zero() || e.source >= mu.len() || e.target >= nu.len() {
                return Err(Error::InvalidInput(format!(
                    "plan entry ({}, {}, {}) out of range",
                    e.source, e.target, e.mass
                )));
            }
            row[e.source] = row[e.source] + e.mass;
            col[e.target] = col[e.target] + e.mass;
        }
        for (i, &r) in row.iter().enumerate() {
            if (r - mu.weight(i)).abs() > tol {
                return Err(Error::MassMismatch { mu: mu.weight(i).as_f64(), nu: r.as_f64() });
            }
        }
        for (j, &c) in col.iter().enumerate() {
            if (c - nu.weight(j)).abs() > tol {
                return Err(Error::MassMismatch { mu: nu.weight(j).as_f64(), nu: c.as_f64() });
            }
        }
        Ok(())
    }
}

/// `‖x−y‖^p` with fast paths for the common exponents.
#[inline]
pub(crate) fn dist_pow_p<T: Real>(norm: Norm, a: &[T], b: &[T], p: T) -> T {
    let d = norm.distance(a, b);
    if p == T::one() {
        d
    } else if p == T::of(2.0) {
        d * d
    } else {
        d.powf(p)
    }
}

/// Largest possible `‖x−y‖^p` between atoms of the two measures, from their
/// joint bounding box. Dominates every structural arc cost.
fn cost_cap<T: Real>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>, p: T, norm: Norm) -> T {
    let d = mu.dim();
    let mut lo = vec![T::infinity(); d];
    let mut hi = vec![-T::infinity(); d];
    for (pt, _) in mu.atoms().iter().chain(nu.atoms()) {
        for axis in 0..d {
            lo[axis] = lo[axis].min(pt[axis]);
            hi[axis] = hi[axis].max(pt[axis]);
        }
    }
    dist_pow_p(norm, &lo, &hi, p)
}

/// Exact minimum-cost transport; shared by [`rho_exact`] and the
/// semi-discrete solver. `dense_limit` decides when column generation kicks
/// in (tests shrink it to force that path).
pub(crate) fn min_cost_transport<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    p: T,
    norm: Norm,
    dense_limit: usize,
) -> Result<(T, Vec<FlowEntry<T>>)> {
    if mu.dim() != nu.dim() {
        return Err(Error::InvalidInput(format!(
            "measures live in dimensions {} and {}",
            mu.dim(),
            nu.dim()
        )));
    }
    if !p.is_finite() || p < T::one() {
        return Err(Error::Domain(format!("exponent p = {p} must satisfy p ≥ 1")));
    }
    if (mu.total_mass() - nu.total_mass()).abs() > T::of(1e-9) {
        return Err(Error::MassMismatch {
            mu: mu.total_mass().as_f64(),
            nu: nu.total_mass().as_f64(),
        });
    }
    let (m, n) = (mu.len(), nu.len());
    let supplies: Vec<T> = mu.atoms().iter().map(|&(_, w)| w).collect();
    let demands: Vec<T> = nu.atoms().iter().map(|&(_, w)| w).collect();
    let cap = cost_cap(mu, nu, p, norm);
    let mut s = Simplex::new(&supplies, &demands, cap)?;

    // Flat coordinate blocks: the pricing sweeps touch every source–target
    // pair, and chasing one heap allocation per point would dominate them.
    let d = mu.dim();
    let mu_flat: Vec<T> =
        mu.atoms().iter().flat_map(|(pt, _)| pt.coords().iter().copied()).collect();
    let nu_flat: Vec<T> =
        nu.atoms().iter().flat_map(|(pt, _)| pt.coords().iter().copied()).collect();
    let source = |i: usize| &mu_flat[i * d..(i + 1) * d];
    let target = |j: usize| &nu_flat[j * d..(j + 1) * d];

    let dense = m.saturating_mul(n) <= dense_limit;
    // Sparse path only: per-source sorted lists of materialized targets,
    // kept small, so pricing can test membership with a short binary search.
    let mut materialized: Vec<Vec<u32>> = Vec::new();
    if dense {
        for i in 0..m {
            let x = source(i);
            for j in 0..n {
                s.add_arc(i, j, dist_pow_p(norm, x, target(j), p));
            }
        }
    } else {
        // Seed each source with its nearest targets; pricing adds the rest.
        let k = SEED_ARCS_PER_SOURCE.min(n);
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        materialized = Vec::with_capacity(m);
        for i in 0..m {
            let x = source(i);
            best.clear();
            for j in 0..n {
                let c = dist_pow_p(norm, x, target(j), p);
                let pos = best.partition_point(|&(bc, _)| bc <= c);
                if pos < k {
                    best.insert(pos, (c, j));
                    best.truncate(k);
                }
            }
            for &(c, j) in best.iter() {
                s.add_arc(i, j, c);
            }
            let mut ids: Vec<u32> = best.iter().map(|&(_, j)| j as u32).collect();
            ids.sort_unstable();
            materialized.push(ids);
        }
    }

    let mass_tol = T::of(1e-9) * mu.total_mass().max(T::one());

    let mut rounds = 0u64;
    loop {
        s.optimize()?;
        s.refresh_exact()?;
        if dense {
            // Every arc is materialized: exact-potential pricing over them is
            // the whole certificate.
            if s.worst_structural_violation() >= -s.pricing_eps() {
                if s.artificial_mass() > mass_tol {
                    return Err(Error::Domain(
                        "transport left artificial mass with no arc pricing in".into(),
                    ));
                }
                break;
            }
        } else {
            // Price only arcs the solver has never seen. Materialized arcs
            // are the simplex's own responsibility: counting their
            // refresh-rounding noise as violations here could spin the loop
            // forever without adding anything. Restricted to fresh arcs,
            // every violated round materializes at least one new arc, so
            // the round count is genuinely bounded.
            let eps = s.pricing_eps();
            let mut violated = false;
            let mut worst: Vec<(T, usize)> = Vec::with_capacity(ADDS_PER_SOURCE + 1);
            for i in 0..m {
                let x = source(i);
                let pi_i = s.pi_source(i);
                let seen = &materialized[i];
                worst.clear();
                for j in 0..n {
                    let rc = dist_pow_p(norm, x, target(j), p) + pi_i - s.pi_target(j);
                    if rc < -eps && seen.binary_search(&(j as u32)).is_err() {
                        violated = true;
                        let pos = worst.partition_point(|&(wc, _)| wc <= rc);
                        if pos < ADDS_PER_SOURCE {
                            worst.insert(pos, (rc, j));
                            worst.truncate(ADDS_PER_SOURCE);
                        }
                    }
                }
                for &(_, j) in worst.iter() {
                    s.add_arc(i, j, dist_pow_p(norm, x, target(j), p));
                    let id = j as u32;
                    let pos = materialized[i].binary_search(&id).unwrap_err();
                    materialized[i].insert(pos, id);
                }
            }
            if !violated {
                if s.artificial_mass() > mass_tol {
                    return Err(Error::Domain(
                        "transport left artificial mass with no arc pricing in".into(),
                    ));
                }
                break;
            }
            if s.num_structural_arcs() as u64 > ARC_CAP {
                return Err(Error::Capacity {
                    what: "materialized transport arcs",
                    needed: s.num_structural_arcs() as u64,
                    cap: ARC_CAP,
                });
            }
        }
        rounds += 1;
        if rounds > MAX_PRICING_ROUNDS {
            return Err(Error::Capacity {
                what: "transport pricing rounds",
                needed: rounds,
                cap: MAX_PRICING_ROUNDS,
            });
        }
    }

    let min_flow = T::of(1e-15) * mu.total_mass().max(T::one());
    Ok((s.structural_cost(), s.flows(min_flow)))
}

/// Exact `ρ_p(μ, ν)` with an optimal coupling, under the default size cap.
pub fn rho_exact<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    p: T,
    norm: Norm,
) -> Result<(T, TransportPlan<T>)> {
    rho_exact_capped(mu, nu, p, norm, DEFAULT_ATOM_CAP)
}

/// Exact `ρ_p(μ, ν)` with a caller-chosen cap on the combined atom count.
pub fn rho_exact_capped<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    p: T,
    norm: Norm,
    atom_cap: usize,
) -> Result<(T, TransportPlan<T>)> {
    let combined = mu.len() + nu.len();
    if combined > atom_cap {
        return Err(Error::Capacity {
            what: "combined transport atoms",
            needed: combined as u64,
            cap: atom_cap as u64,
        });
    }
    let (cost_p, flows) = min_cost_transport(mu, nu, p, norm, DENSE_PAIR_LIMIT)?;
    let entries = flows
        .into_iter()
        .map(|f| PlanEntry { source: f.source, target: f.target, mass: f.amount })
        .collect();
    let rho = if p == T::one() { cost_p } else { cost_p.powf(T::one() / p) };
    Ok((rho, TransportPlan { entries, cost_p }))
}

/// `ρ_p` by enumerating all assignments of equal-weight measures.
///
/// For two measures of `n ≤ 8` atoms, each of weight `1/n`, the optimal
/// coupling is a permutation (Birkhoff), so the minimum over all `n!`
/// assignments is exact.
pub fn rho_bruteforce<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    p: T,
    norm: Norm,
) -> Result<T> {
    if !p.is_finite() || p < T::one() {
        return Err(Error::Domain(format!("exponent p = {p} must satisfy p ≥ 1")));
    }
    let n = mu.len();
    if n != nu.len() || n > 8 {
        return Err(Error::Unsupported(format!(
            "assignment enumeration needs equal atom counts ≤ 8, got {} and {}",
            n,
            nu.len()
        )));
    }
    let w = T::one() / T::of_usize(n);
    let uniform = |m: &DiscreteMeasure<T>| {
        m.atoms().iter().all(|&(_, wt)| (wt - w).abs() <= T::of(1e-12))
    };
    if !uniform(mu) || !uniform(nu) {
        return Err(Error::Unsupported(
            "assignment enumeration needs equal weights 1/n on both sides".into(),
        ));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::InvalidInput(format!(
            "measures live in dimensions {} and {}",
            mu.dim(),
            nu.dim()
        )));
    }
    let cost: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| dist_pow_p(norm, mu.point(i).coords(), nu.point(j).coords(), p))
                .collect()
        })
        .collect();
    // Heap's algorithm over target indices, tracking the best assignment cost.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut counters = vec![0usize; n];
    let eval = |perm: &[usize]| -> T {
        perm.iter().enumerate().fold(T::zero(), |acc, (i, &j)| acc + cost[i][j])
    };
    let mut best = eval(&perm);
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            let c = eval(&perm);
            if c < best {
                best = c;
            }
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    let mean = best * w;
    Ok(if p == T::one() { mean } else { mean.powf(T::one() / p) })
}
