//! Multiscale dyadic transport bound on `[0,1)^d` and the cell-resampling
//! coupling.
//!
//! The half-open unit cube is refined into nested partitions `P_l` of
//! `2^{ld}` congruent cells; every cell of `P_{l+1}` has a unique father in
//! `P_l`. For probability measures `μ` (a model measure) and `ν` (discrete)
//! on the cube, the transport cost is dominated level by level:
//!
//! `ρ_p^p(μ, ν) ≤ ½ 𝔡^p Σ_{l≥0} 2^{-pl} Σ_{F∈P_l} Σ_{C child of F}
//!  |ν(C) − ν(F)·μ(C)/μ(F)|`,
//!
//! with `𝔡` the diameter of the unit cube under the chosen norm and the
//! convention `0/0 = 0`. [`dyadic_bound`] evaluates the series up to a
//! truncation level and closes it with the geometric tail
//! `Σ_{l≥L} ½ 𝔡^p 2^{-pl} · 2 = 𝔡^p 2^{-pL}/(1 − 2^{-p})`, valid because
//! each inner sum is at most `2‖ν‖`. The output therefore remains a
//! certified upper bound at every truncation level.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{unit_cube_diameter, AxisBox, DiscreteMeasure, ModelMeasure, Norm, Point};
use crate::num::Real;
use crate::rng::{self, tag};

/// One cell of the nested dyadic partition of the unit cube: the box
/// `index·2^{-level} + [0, 2^{-level})^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DyadicCell {
    pub level: u32,
    pub index: Vec<u32>,
}

impl DyadicCell {
    pub fn new(level: u32, index: Vec<u32>) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::InvalidInput("dyadic cell needs at least one axis".into()));
        }
        if level >= 32 {
            return Err(Error::InvalidInput(format!("dyadic level {level} out of range")));
        }
        let side = 1u64 << level;
        if let Some(&bad) = index.iter().find(|&&i| u64::from(i) >= side) {
            return Err(Error::InvalidInput(format!(
                "index coordinate {bad} outside [0, 2^{level})"
            )));
        }
        Ok(DyadicCell { level, index })
    }

    /// The cell as a half-open box inside the unit cube.
    pub fn to_box<T: Real>(&self) -> AxisBox<T> {
        AxisBox::unit_cube(self.index.len()).dyadic_cell(self.level, &self.index)
    }

    /// The unique containing cell one level up, or `None` at the root.
    pub fn father(&self) -> Option<DyadicCell> {
        if self.level == 0 {
            return None;
        }
        Some(DyadicCell {
            level: self.level - 1,
            index: self.index.iter().map(|&i| i >> 1).collect(),
        })
    }

    /// All `2^d` children one level down, last axis varying fastest.
    pub fn children(&self) -> Vec<DyadicCell> {
        let d = self.index.len();
        (0..1u32 << d)
            .map(|mask| DyadicCell {
                level: self.level + 1,
                index: (0..d)
                    .map(|axis| (self.index[axis] << 1) | ((mask >> (d - 1 - axis)) & 1))
                    .collect(),
            })
            .collect()
    }
}

/// Per-cell data of the piecewise-rescaling approximation: the measure that
/// redistributes each cell's target mass along the source profile.
#[derive(Debug, Clone, Serialize)]
pub struct CellApproximation<T: Real> {
    pub cell: AxisBox<T>,
    pub nu_mass: T,
    pub mu_mass: T,
    /// `nu_mass / mu_mass` with `0/0 = 0`.
    pub ratio: T,
}

/// Outcome of the truncated multiscale bound, on the `ρ_p^p` scale for the
/// two sum fields and on the `ρ_p` scale for `upper_bound`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DyadicBoundResult<T> {
    /// `½ 𝔡^p Σ_{l<L} 2^{-pl} S_l`.
    pub partial_sum: T,
    /// `𝔡^p 2^{-pL}/(1 − 2^{-p})`, dominating every truncated level.
    pub tail_bound: T,
    /// `(partial_sum + tail_bound)^{1/p} ≥ ρ_p(μ, ν)`.
    pub upper_bound: T,
    /// The truncation level `L`.
    pub levels_used: u32,
}

/// Default truncation level for an `n`-point sample in dimension `d`:
/// `⌈log2(n^{1/d})⌉ + 8`, deep enough that the tail is negligible against
/// the empirical fluctuation scale.
pub fn default_truncation_level(n: usize, d: usize) -> u32 {
    let n = n.max(1) as f64;
    ((n.log2() / d.max(1) as f64).ceil() as u32) + 8
}

fn check_disjoint<T: Real>(cells: &[AxisBox<T>]) -> Result<()> {
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i + 1..] {
            if a.overlap_volume(b) > T::zero() {
                return Err(Error::InvalidInput(
                    "partition cells must be pairwise disjoint".into(),
                ));
            }
        }
    }
    Ok(())
}

fn describe_box<T: Real>(b: &AxisBox<T>) -> String {
    let lo: Vec<String> = b.lower().iter().map(|x| format!("{x}")).collect();
    let hi: Vec<String> = b.upper().iter().map(|x| format!("{x}")).collect();
    format!("[{}) × .. × [{})", lo.join(", "), hi.join(", "))
}

/// Computes, cell by cell, the rescaling approximation of a source measure
/// (given through its box-mass function) to a discrete target measure: on
/// each cell the approximation carries the target's mass with the source's
/// profile, i.e. has density `ratio` times the source there.
///
/// Cells must be pairwise disjoint and jointly cover both supports. A cell
/// with target mass but zero source mass admits no such rescaling and is a
/// support violation.
pub fn partition_approximation<T, F>(
    mu_mass: F,
    nu: &DiscreteMeasure<T>,
    cells: &[AxisBox<T>],
) -> Result<Vec<CellApproximation<T>>>
where
    T: Real,
    F: Fn(&AxisBox<T>) -> Result<T>,
{
    check_disjoint(cells)?;
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells {
        let nu_mass = nu.mass_in(cell);
        let mu = mu_mass(cell)?;
        if !(mu >= T::zero()) {
            return Err(Error::Domain(format!(
                "source mass {mu} on cell {} is not a nonnegative number",
                describe_box(cell)
            )));
        }
        let ratio = if mu > T::zero() {
            nu_mass / mu
        } else if nu_mass > T::zero() {
            return Err(Error::SupportViolation {
                cell: describe_box(cell),
                nu_mass: nu_mass.as_f64(),
            });
        } else {
            T::zero()
        };
        out.push(CellApproximation { cell: cell.clone(), nu_mass, mu_mass: mu, ratio });
    }
    Ok(out)
}

/// ν-masses of charged cells per level, `0 ..= L`, keyed by index vector.
fn charged_cells<T: Real>(
    nu: &DiscreteMeasure<T>,
    d: usize,
    top_level: u32,
) -> Result<Vec<BTreeMap<Vec<u32>, T>>> {
    let unit = AxisBox::unit_cube(d);
    let mut finest: BTreeMap<Vec<u32>, T> = BTreeMap::new();
    for (pt, w) in nu.atoms() {
        let idx = unit.dyadic_index_of(top_level, pt.coords()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "sample point {:?} lies outside the half-open unit cube",
                pt.coords()
            ))
        })?;
        *finest.entry(idx).or_insert_with(T::zero) = *finest.get(&idx).unwrap_or(&T::zero()) + *w;
    }
    let mut levels = vec![finest];
    for _ in 0..top_level {
        let finer = levels.last().expect("at least one level");
        let mut coarser: BTreeMap<Vec<u32>, T> = BTreeMap::new();
        for (idx, mass) in finer {
            let up: Vec<u32> = idx.iter().map(|&i| i >> 1).collect();
            let slot = coarser.entry(up).or_insert_with(T::zero);
            *slot = *slot + *mass;
        }
        levels.push(coarser);
    }
    levels.reverse();
    Ok(levels)
}

/// Evaluates the truncated multiscale transport bound for a model measure
/// `μ` and a discrete measure `ν`, both probability measures on `[0,1)^d`.
///
/// Only ν-charged fathers are visited: an uncharged father has `ν(F) = 0`
/// and all its children satisfy `ν(C) = 0`, so every term under it is
/// `|0 − 0| = 0` (when `μ(F) = 0` too, by the `0/0 = 0` convention). The
/// support condition `ν(C) > 0 ⇒ μ(C) > 0` is verified on every charged
/// cell down to the truncation level.
pub fn dyadic_bound<T: Real>(
    measure: &ModelMeasure<T>,
    nu: &DiscreteMeasure<T>,
    p: T,
    norm: Norm,
    truncation_level: u32,
) -> Result<DyadicBoundResult<T>> {
    if !p.is_finite() || p < T::one() {
        return Err(Error::Domain(format!("exponent p = {p} must satisfy p ≥ 1")));
    }
    let d = measure.dim();
    if nu.dim() != d {
        return Err(Error::InvalidInput(format!(
            "measure has dimension {d}, sample has dimension {}",
            nu.dim()
        )));
    }
    if d > 20 {
        return Err(Error::Capacity { what: "dyadic dimension", needed: d as u64, cap: 20 });
    }
    if truncation_level == 0 || truncation_level >= 31 {
        return Err(Error::InvalidInput(format!(
            "truncation level {truncation_level} outside 1..=30"
        )));
    }
    if (nu.total_mass() - T::one()).abs() > T::of(1e-9) {
        return Err(Error::MassMismatch { mu: 1.0, nu: nu.total_mass().as_f64() });
    }
    let unit = AxisBox::unit_cube(d);
    let full = measure.box_mass(&unit)?;
    if (full - T::one()).abs() > T::of(1e-9) {
        return Err(Error::InvalidInput(format!(
            "measure carries mass {full} on the unit cube; the dyadic bound needs a \
             probability measure supported there"
        )));
    }

    let levels = charged_cells(nu, d, truncation_level)?;
    let diam = unit_cube_diameter::<T>(norm, d);
    let diam_p = diam.powf(p);
    let two = T::of(2.0);
    let mut partial_sum = T::zero();
    for l in 0..truncation_level {
        let mut level_sum = T::zero();
        for (f_idx, &nu_f) in &levels[l as usize] {
            let father = DyadicCell { level: l, index: f_idx.clone() };
            let mu_f = measure.box_mass(&father.to_box())?;
            if !(mu_f > T::zero()) {
                return Err(Error::SupportViolation {
                    cell: format!("level {l}, index {f_idx:?}"),
                    nu_mass: nu_f.as_f64(),
                });
            }
            for child in father.children() {
                let nu_c =
                    levels[l as usize + 1].get(&child.index).copied().unwrap_or_else(T::zero);
                let mu_c = measure.box_mass(&child.to_box())?;
                if nu_c > T::zero() && !(mu_c > T::zero()) {
                    return Err(Error::SupportViolation {
                        cell: format!("level {}, index {:?}", child.level, child.index),
                        nu_mass: nu_c.as_f64(),
                    });
                }
                level_sum = level_sum + (nu_c - nu_f * mu_c / mu_f).abs();
            }
        }
        partial_sum = partial_sum + two.powf(-p * T::of(f64::from(l))) * level_sum;
    }
    partial_sum = partial_sum * diam_p / two;

    let tail_bound = diam_p * two.powf(-p * T::of(f64::from(truncation_level)))
        / (T::one() - two.powf(-p));
    let upper_bound = (partial_sum + tail_bound).powf(T::one() / p);
    Ok(DyadicBoundResult { partial_sum, tail_bound, upper_bound, levels_used: truncation_level })
}

/// Transforms a point cloud so that cell `k` holds exactly `targets[k]`
/// points, changing as few entries as possible and drawing replacements
/// from the measure conditioned on the receiving cell.
///
/// Per cell, the first `targets[k]` points already there (in index order)
/// are kept. All remaining points are surplus; their slots are refilled, in
/// ascending slot order, with fresh conditional samples for the cells still
/// short. Returns the new cloud and the number of changed entries.
pub fn resample_coupling<T: Real>(
    points: &[Point<T>],
    cells: &[AxisBox<T>],
    targets: &[usize],
    measure: &ModelMeasure<T>,
    seed: u64,
) -> Result<(Vec<Point<T>>, usize)> {
    if targets.len() != cells.len() {
        return Err(Error::Arity(format!(
            "{} cells but {} target counts",
            cells.len(),
            targets.len()
        )));
    }
    let total: usize = targets.iter().sum();
    if total != points.len() {
        return Err(Error::Arity(format!(
            "target counts sum to {total} but there are {} points",
            points.len()
        )));
    }
    check_disjoint(cells)?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
    for (i, pt) in points.iter().enumerate() {
        let k = cells
            .iter()
            .position(|c| c.contains(pt.coords()))
            .ok_or_else(|| {
                Error::InvalidInput(format!("point {:?} lies in no cell", pt.coords()))
            })?;
        members[k].push(i);
    }

    let mut surplus: Vec<usize> = Vec::new();
    for (k, idxs) in members.iter().enumerate() {
        if idxs.len() > targets[k] {
            surplus.extend_from_slice(&idxs[targets[k]..]);
        }
    }
    surplus.sort_unstable();

    let mut new_points = points.to_vec();
    let mut rng = rng::stream(seed, &[tag::COUPLING]);
    let mut next_slot = surplus.into_iter();
    let mut mismatches = 0usize;
    for (k, idxs) in members.iter().enumerate() {
        for _ in idxs.len()..targets[k] {
            let slot = next_slot.next().expect("surplus covers every deficit");
            new_points[slot] = measure.sample_conditional(&cells[k], &mut rng)?;
            mismatches += 1;
        }
    }
    debug_assert!(next_slot.next().is_none());
    Ok((new_points, mismatches))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::transport::{rho_exact, semidiscrete};
    use rand::RngExt;

    fn unit_uniform3() -> ModelMeasure<f64> {
        ModelMeasure::unit_uniform(3)
    }

    fn level1_cells(d: usize) -> Vec<AxisBox<f64>> {
        DyadicCell::new(0, vec![0; d])
            .unwrap()
            .children()
            .iter()
            .map(DyadicCell::to_box)
            .collect()
    }

    fn origin_dirac(d: usize) -> DiscreteMeasure<f64> {
        DiscreteMeasure::dirac(Point::new(vec![0.0; d]).unwrap())
    }

    #[test]
    fn cells_nest_and_tile() {
        let c = DyadicCell::new(2, vec![1, 3, 0]).unwrap();
        let b: AxisBox<f64> = c.to_box();
        assert_eq!(b.lower(), &[0.25, 0.75, 0.0]);
        assert_eq!(b.upper(), &[0.5, 1.0, 0.25]);
        assert_eq!(c.father().unwrap(), DyadicCell::new(1, vec![0, 1, 0]).unwrap());
        let kids = c.children();
        assert_eq!(kids.len(), 8);
        for kid in &kids {
            assert_eq!(kid.father().as_ref(), Some(&c));
        }
        // Children tile the parent exactly.
        let vol: f64 = kids.iter().map(|k| k.to_box::<f64>().volume()).sum();
        assert!((vol - b.volume()).abs() < 1e-15);
        assert!(DyadicCell::new(1, vec![2, 0]).is_err());
    }

    #[test]
    fn approximation_ratios_match_hand_values() {
        let m = unit_uniform3();
        let cells = level1_cells(3);
        let mass = |b: &AxisBox<f64>| m.box_mass(b);

        // The target concentrated at the origin loads only the corner cell:
        // ratio 1 / 2^{-3} = 8 there, 0 elsewhere.
        let rows = partition_approximation(mass, &origin_dirac(3), &cells).unwrap();
        assert_eq!(rows.len(), 8);
        assert!((rows[0].ratio - 8.0).abs() < 1e-12);
        assert!((rows[0].nu_mass - 1.0).abs() < 1e-15);
        for row in &rows[1..] {
            assert_eq!(row.ratio, 0.0);
            assert_eq!(row.nu_mass, 0.0);
            assert!((row.mu_mass - 0.125).abs() < 1e-12);
        }

        // A target distributed exactly like the source has every ratio 1.
        let grid = crate::transport::semidiscrete_grid(&m, &AxisBox::unit_cube(3), 1).unwrap();
        let rows = partition_approximation(mass, &grid, &cells).unwrap();
        for row in &rows {
            assert!((row.ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn support_violations_and_overlaps_are_rejected() {
        let m: ModelMeasure<f64> =
            ModelMeasure::uniform_box(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let mass = |b: &AxisBox<f64>| m.box_mass(b);
        let cells = vec![
            AxisBox::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap(),
            AxisBox::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap(),
        ];
        let bad_nu = DiscreteMeasure::dirac(Point::new(vec![0.75, 0.5]).unwrap());
        let err = partition_approximation(mass, &bad_nu, &cells).unwrap_err();
        assert!(matches!(err, Error::SupportViolation { .. }), "{err}");

        let overlapping = vec![
            AxisBox::new(vec![0.0, 0.0], vec![0.6, 1.0]).unwrap(),
            AxisBox::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap(),
        ];
        let ok_nu = DiscreteMeasure::dirac(Point::new(vec![0.25, 0.5]).unwrap());
        assert!(partition_approximation(mass, &ok_nu, &overlapping).is_err());
    }

    // For ν = δ_0 and uniform μ, the charged father at every level is the
    // corner cell with ν(F) = 1 and μ(C)/μ(F) = 2^{-d}, so
    // S_l = (1 − 2^{-d}) + (2^d − 1)·2^{-d} = 2(1 − 2^{-d}) at every level
    // and the full series is 𝔡^p (1 − 2^{-d})/(1 − 2^{-p}) = 7/4 for
    // p = 1, d = 3 under the max norm.
    #[test]
    fn origin_dirac_bound_matches_the_closed_form() {
        let r = dyadic_bound(&unit_uniform3(), &origin_dirac(3), 1.0, Norm::LInf, 20).unwrap();
        assert_eq!(r.levels_used, 20);
        assert!((r.upper_bound - 1.75).abs() < 1e-5, "upper {}", r.upper_bound);
        assert!(r.tail_bound > 0.0 && r.tail_bound < 1e-5);

        // Same instance at p = 2: series value 𝔡^2(1−2^{-3})/(1−2^{-2})
        // = 7/6, so the bound is its square root.
        let r2 = dyadic_bound(&unit_uniform3(), &origin_dirac(3), 2.0, Norm::LInf, 24).unwrap();
        assert!((r2.upper_bound - (7.0f64 / 6.0).sqrt()).abs() < 1e-5);
    }

    // A level-m grid discretization of the uniform measure agrees with it
    // on every cell of levels 0..m, so truncating there leaves only the
    // tail term.
    #[test]
    fn grid_discretization_has_zero_partial_sum_up_to_its_level() {
        let m = unit_uniform3();
        let grid = crate::transport::semidiscrete_grid(&m, &AxisBox::unit_cube(3), 2).unwrap();
        let r = dyadic_bound(&m, &grid, 1.0, Norm::LInf, 2).unwrap();
        assert_eq!(r.partial_sum, 0.0);
        assert!((r.upper_bound - r.tail_bound).abs() < 1e-15);
        // Deeper levels do see the atoms concentrate inside their cells,
        // so the partial sum turns positive but the bound stays valid.
        let deeper = dyadic_bound(&m, &grid, 1.0, Norm::LInf, 6).unwrap();
        assert!(deeper.partial_sum > 0.0);
    }

    fn dense_level_sum(
        m: &ModelMeasure<f64>,
        nu: &DiscreteMeasure<f64>,
        d: usize,
        l: u32,
    ) -> f64 {
        let side = 1u32 << l;
        let mut sum = 0.0;
        let mut idx = vec![0u32; d];
        loop {
            let father = DyadicCell::new(l, idx.clone()).unwrap();
            let fb = father.to_box::<f64>();
            let nu_f = nu.mass_in(&fb);
            let mu_f = m.box_mass(&fb).unwrap();
            for child in father.children() {
                let cb = child.to_box::<f64>();
                let nu_c = nu.mass_in(&cb);
                let mu_c = m.box_mass(&cb).unwrap();
                let pulled = if mu_f > 0.0 { nu_f * mu_c / mu_f } else { 0.0 };
                sum += (nu_c - pulled).abs();
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < side {
                    break;
                }
                idx[axis] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
        sum
    }

    #[test]
    fn sparse_traversal_matches_dense_enumeration() {
        let m = unit_uniform3();
        let mut rng = stream(99, &[tag::INSTANCE]);
        for _ in 0..5 {
            let n = rng.random_range(2..=8usize);
            let pts: Vec<Point<f64>> = (0..n)
                .map(|_| Point::new((0..3).map(|_| rng.random::<f64>()).collect()).unwrap())
                .collect();
            let nu = DiscreteMeasure::empirical(pts).unwrap();
            for p in [1.0, 2.5] {
                for big_l in [2u32, 4] {
                    let r = dyadic_bound(&m, &nu, p, Norm::LInf, big_l).unwrap();
                    let mut dense = 0.0;
                    for l in 0..big_l {
                        dense += 2f64.powf(-p * f64::from(l)) * dense_level_sum(&m, &nu, 3, l);
                    }
                    dense *= 0.5; // unit-cube diameter is 1 under the max norm
                    assert!(
                        (r.partial_sum - dense).abs() < 1e-12,
                        "sparse {} dense {dense}",
                        r.partial_sum
                    );
                }
            }
        }
    }

    #[test]
    fn truncation_is_monotone() {
        let m = unit_uniform3();
        let nu = DiscreteMeasure::empirical(m.sample(16, 5)).unwrap();
        let mut prev: Option<DyadicBoundResult<f64>> = None;
        for big_l in [2u32, 4, 6, 8, 10] {
            let r = dyadic_bound(&m, &nu, 1.0, Norm::LInf, big_l).unwrap();
            if let Some(q) = prev {
                assert!(r.partial_sum >= q.partial_sum - 1e-15);
                assert!(
                    r.partial_sum + r.tail_bound <= q.partial_sum + q.tail_bound + 1e-15
                );
            }
            prev = Some(r);
        }
    }

    #[test]
    fn bound_dominates_certified_distances() {
        let m = unit_uniform3();
        for seed in [11u64, 12, 13] {
            let nu = DiscreteMeasure::empirical(m.sample(32, seed)).unwrap();
            let bound = dyadic_bound(&m, &nu, 1.0, Norm::LInf, 10).unwrap();
            let sd = semidiscrete(&m, &nu, 1.0, Norm::LInf, 4).unwrap();
            assert!(
                bound.upper_bound >= sd.lower() - 1e-8,
                "dyadic {} vs semidiscrete lower {}",
                bound.upper_bound,
                sd.lower()
            );
        }
    }

    // The bound also dominates the exact distance to the grid measure
    // itself, which is computable with the discrete solver.
    #[test]
    fn bound_dominates_an_exact_discrete_distance() {
        let m = unit_uniform3();
        let grid = crate::transport::semidiscrete_grid(&m, &AxisBox::unit_cube(3), 1).unwrap();
        let nu = DiscreteMeasure::empirical(m.sample(24, 3)).unwrap();
        let (rho, _) = rho_exact(&grid, &nu, 1.0, Norm::LInf).unwrap();
        // ρ(μ, ν) ≥ ρ(grid, ν) − ρ(grid, μ) ≥ ρ(grid, ν) − 1/2 cell diam.
        let bound = dyadic_bound(&m, &nu, 1.0, Norm::LInf, 12).unwrap();
        assert!(bound.upper_bound >= rho - 0.5 - 1e-9);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let m = unit_uniform3();
        let outside = DiscreteMeasure::dirac(Point::new(vec![0.5, 0.5, 1.5]).unwrap());
        assert!(dyadic_bound(&m, &outside, 1.0, Norm::LInf, 4).is_err());

        let shifted: ModelMeasure<f64> =
            ModelMeasure::uniform_box(vec![0.0, 0.0, 0.0], vec![2.0, 1.0, 1.0]).unwrap();
        assert!(dyadic_bound(&shifted, &origin_dirac(3), 1.0, Norm::LInf, 4).is_err());

        let heavy = origin_dirac(3).rescaled_to(0.5);
        assert!(matches!(
            dyadic_bound(&m, &heavy, 1.0, Norm::LInf, 4),
            Err(Error::MassMismatch { .. })
        ));

        assert!(dyadic_bound(&m, &origin_dirac(3), 0.5, Norm::LInf, 4).is_err());
    }

    #[test]
    fn resampling_without_deficit_keeps_every_point() {
        let m = unit_uniform3();
        let pts = m.sample(32, 17);
        let whole = vec![AxisBox::unit_cube(3)];
        let (out, mismatches) = resample_coupling(&pts, &whole, &[32], &m, 1).unwrap();
        assert_eq!(mismatches, 0);
        assert_eq!(out, pts);

        // Exact per-cell counts also change nothing, whatever the targets say
        // about other cells.
        let cells = level1_cells(3);
        let counts: Vec<usize> = cells.iter().map(|c| pts.iter().filter(|p| c.contains(p.coords())).count()).collect();
        let (out, mismatches) = resample_coupling(&pts, &cells, &counts, &m, 2).unwrap();
        assert_eq!(mismatches, 0);
        assert_eq!(out, pts);
    }

    #[test]
    fn resampling_hits_the_requested_cell_counts() {
        let m = unit_uniform3();
        let cells = level1_cells(3);
        let pts = m.sample(64, 23);
        let targets = vec![8usize; 8];
        let (out, mismatches) = resample_coupling(&pts, &cells, &targets, &m, 3).unwrap();
        assert_eq!(out.len(), 64);
        for (cell, want) in cells.iter().zip(&targets) {
            let got = out.iter().filter(|p| cell.contains(p.coords())).count();
            assert_eq!(got, *want);
        }
        // Changed entries are exactly the surplus count.
        let changed = out.iter().zip(&pts).filter(|(a, b)| a != b).count();
        assert_eq!(changed, mismatches);

        let err = resample_coupling(&pts, &cells, &[8; 7], &m, 3).unwrap_err();
        assert!(matches!(err, Error::Arity(_)), "{err}");
        let err = resample_coupling(&pts, &cells, &[9; 8], &m, 3).unwrap_err();
        assert!(matches!(err, Error::Arity(_)), "{err}");
    }

    // Refills must be conditional draws: force every fill into one cell and
    // check its sub-octants come out uniformly occupied.
    #[test]
    fn refills_are_conditionally_distributed() {
        let m = unit_uniform3();
        let cells = level1_cells(3);
        let corner: ModelMeasure<f64> =
            ModelMeasure::uniform_box(vec![0.0; 3], vec![0.5; 3]).unwrap();
        let far = cells[7].clone(); // [1/2,1)^3
        let mut octants = [0usize; 8];
        let mut fills = 0usize;
        for seed in 0..150u64 {
            let pts = corner.sample(16, seed); // all points in cells[0]
            let targets = vec![8, 0, 0, 0, 0, 0, 0, 8];
            let (out, mismatches) = resample_coupling(&pts, &cells, &targets, &m, seed).unwrap();
            assert_eq!(mismatches, 8);
            for pt in out.iter().filter(|p| far.contains(p.coords())) {
                let idx = far.dyadic_index_of(1, pt.coords()).unwrap();
                octants[(idx[0] as usize) * 4 + (idx[1] as usize) * 2 + idx[2] as usize] += 1;
                fills += 1;
            }
        }
        assert_eq!(fills, 150 * 8);
        // 1200 draws over 8 octants: each expects 150, sd ≈ 11.5.
        for &count in &octants {
            assert!((75..=225).contains(&count), "octant count {count}");
        }
    }

    // Mean number of changed entries for proportional targets stays under
    // the √K·√N/2 coupling bound (≈ 11.31 for K = 8, N = 64).
    #[test]
    fn mean_mismatch_respects_the_coupling_bound() {
        let m = unit_uniform3();
        let cells = level1_cells(3);
        let targets = vec![8usize; 8];
        let mut total = 0usize;
        let reps = 200u64;
        for rep in 0..reps {
            let pts = m.sample(64, 1000 + rep);
            let (_, mismatches) = resample_coupling(&pts, &cells, &targets, &m, rep).unwrap();
            total += mismatches;
        }
        let mean = total as f64 / reps as f64;
        assert!(mean <= 11.3137, "mean mismatch {mean}");
    }
}
