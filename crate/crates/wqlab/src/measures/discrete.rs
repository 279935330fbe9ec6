//! Finitely supported measures with nonnegative atom weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::geom::Point;
use crate::num::Real;

/// A finite nonnegative measure `Σ w_i δ_{x_i}`.
///
/// Zero-weight atoms are dropped at construction, all atoms share one
/// dimension, and `total_mass` is the sum of the stored weights (cached so
/// callers compare masses against the same value the solvers use).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteMeasure<T: Real> {
    atoms: Vec<(Point<T>, T)>,
    total_mass: T,
}

impl<T: Real> DiscreteMeasure<T> {
    /// Builds a measure from `(location, weight)` pairs.
    ///
    /// Weights must be finite and nonnegative; zero-weight atoms are removed.
    /// At least one positive atom must remain.
    pub fn new(atoms: Vec<(Point<T>, T)>) -> Result<Self> {
        let dim = match atoms.first() {
            Some((p, _)) => p.dim(),
            None => return Err(Error::InvalidInput("discrete measure needs at least one atom".into())),
        };
        let mut kept = Vec::with_capacity(atoms.len());
        for (point, weight) in atoms {
            if point.dim() != dim {
                return Err(Error::InvalidInput(format!(
                    "atom dimension {} disagrees with {}",
                    point.dim(),
                    dim
                )));
            }
            if !weight.is_finite() || weight < T::zero() {
                return Err(Error::InvalidInput(format!("atom weight {weight} must be finite and ≥ 0")));
            }
            if weight > T::zero() {
                kept.push((point, weight));
            }
        }
        if kept.is_empty() {
            return Err(Error::InvalidInput("discrete measure has no positive-weight atom".into()));
        }
        let total_mass = kept.iter().map(|&(_, w)| w).fold(T::zero(), |s, w| s + w);
        Ok(DiscreteMeasure { atoms: kept, total_mass })
    }

    /// A single unit-mass atom.
    pub fn dirac(point: Point<T>) -> Self {
        let total_mass = T::one();
        DiscreteMeasure { atoms: vec![(point, total_mass)], total_mass }
    }

    /// The empirical measure `(1/N) Σ δ_{x_j}` of a list of points.
    pub fn empirical(points: Vec<Point<T>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidInput("empirical measure of zero points".into()));
        }
        let w = T::one() / T::of_usize(n);
        DiscreteMeasure::new(points.into_iter().map(|p| (p, w)).collect())
    }

    pub fn atoms(&self) -> &[(Point<T>, T)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].0.dim()
    }

    pub fn total_mass(&self) -> T {
        self.total_mass
    }

    /// Location of atom `i`.
    pub fn point(&self, i: usize) -> &Point<T> {
        &self.atoms[i].0
    }

    /// Weight of atom `i`.
    pub fn weight(&self, i: usize) -> T {
        self.atoms[i].1
    }

    /// Mass carried inside a box (sum of weights of contained atoms).
    pub fn mass_in(&self, b: &crate::measures::AxisBox<T>) -> T {
        self.atoms
            .iter()
            .filter(|(p, _)| b.contains(p))
            .map(|&(_, w)| w)
            .fold(T::zero(), |s, w| s + w)
    }

    /// Returns a copy rescaled to the given total mass.
    pub fn rescaled_to(&self, mass: T) -> Self {
        let f = mass / self.total_mass;
        let atoms: Vec<_> = self.atoms.iter().map(|(p, w)| (p.clone(), *w * f)).collect();
        let total_mass = atoms.iter().map(|&(_, w)| w).fold(T::zero(), |s, w| s + w);
        DiscreteMeasure { atoms, total_mass }
    }

    /// True when all atoms carry weight `1/len` within `tol`.
    pub fn is_uniformly_weighted(&self, tol: T) -> bool {
        let w = T::one() / T::of_usize(self.len());
        self.atoms.iter().all(|&(_, wi)| (wi - w).abs() <= tol)
    }
}
