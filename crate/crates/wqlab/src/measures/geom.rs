//! Points, norms and half-open axis-aligned boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// A point of `R^d`, validated to have finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<T: Real> {
    coords: Vec<T>,
}

impl<T: Real> Point<T> {
    /// Builds a point, rejecting empty or non-finite coordinate lists.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("point coordinates must be finite".into()));
        }
        Ok(Point { coords })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate slice.
    pub fn coords(&self) -> &[T] {
        &self.coords
    }
}

impl<T: Real> core::ops::Deref for Point<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.coords
    }
}

/// The three working norms on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    LInf,
}

impl Norm {
    /// `‖a − b‖` under this norm. Panics on dimension mismatch in debug
    /// builds; slices of equal length are the caller's contract.
    pub fn distance<T: Real>(self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Norm::L1 => {
                let mut acc = T::zero();
                for (&x, &y) in a.iter().zip(b) {
                    acc = acc + (x - y).abs();
                }
                acc
            }
            Norm::L2 => {
                let mut acc = T::zero();
                for (&x, &y) in a.iter().zip(b) {
                    let t = x - y;
                    acc = acc + t * t;
                }
                acc.sqrt()
            }
            Norm::LInf => {
                let mut acc = T::zero();
                for (&x, &y) in a.iter().zip(b) {
                    acc = acc.max((x - y).abs());
                }
                acc
            }
        }
    }

    /// `‖x‖` under this norm.
    pub fn magnitude<T: Real>(self, x: &[T]) -> T {
        let origin = vec![T::zero(); x.len()];
        self.distance(x, &origin)
    }

    /// Smallest `c` with `‖x‖ ≤ c·‖x‖_∞` for all `x ∈ R^d`.
    pub fn max_norm_factor<T: Real>(self, d: usize) -> T {
        match self {
            Norm::L1 => T::of_usize(d),
            Norm::L2 => T::of_usize(d).sqrt(),
            Norm::LInf => T::one(),
        }
    }
}

impl core::fmt::Display for Norm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Norm::L1 => write!(f, "l1"),
            Norm::L2 => write!(f, "l2"),
            Norm::LInf => write!(f, "linf"),
        }
    }
}

/// Diameter of the unit cube `[0,1)^d`: `sup ‖x−y‖` over the cube's closure.
pub fn unit_cube_diameter<T: Real>(norm: Norm, d: usize) -> T {
    match norm {
        Norm::L1 => T::of_usize(d),
        Norm::L2 => T::of_usize(d).sqrt(),
        Norm::LInf => T::one(),
    }
}

/// A half-open axis-aligned box `Π_i [lo_i, hi_i)` with `lo_i < hi_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox<T: Real> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> AxisBox<T> {
    /// Builds a box, validating finiteness and `lower < upper` on every axis.
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidInput(format!(
                "box corner dimensions disagree: {} vs {}",
                lower.len(),
                upper.len()
            )));
        }
        for (axis, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidInput(format!("box corner not finite on axis {axis}")));
            }
            if !(lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "box is empty on axis {axis}: [{lo}, {hi})"
                )));
            }
        }
        Ok(AxisBox { lower, upper })
    }

    /// The unit cube `[0,1)^d`.
    pub fn unit_cube(d: usize) -> Self {
        AxisBox { lower: vec![T::zero(); d], upper: vec![T::one(); d] }
    }

    /// The centered cube `[−h, h)^d`.
    pub fn centered_cube(d: usize, h: T) -> Result<Self> {
        AxisBox::new(vec![-h; d], vec![h; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    /// Side length on one axis.
    pub fn side(&self, axis: usize) -> T {
        self.upper[axis] - self.lower[axis]
    }

    /// Product of side lengths.
    pub fn volume(&self) -> T {
        let mut v = T::one();
        for axis in 0..self.dim() {
            v = v * self.side(axis);
        }
        v
    }

    /// Half-open membership test.
    pub fn contains(&self, x: &[T]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&c, (&lo, &hi))| lo <= c && c < hi)
    }

    /// `sup ‖x−y‖` over the box closure.
    pub fn diameter(&self, norm: Norm) -> T {
        match norm {
            Norm::L1 => (0..self.dim()).map(|a| self.side(a)).fold(T::zero(), |s, t| s + t),
            Norm::L2 => (0..self.dim())
                .map(|a| self.side(a))
                .fold(T::zero(), |s, t| s + t * t)
                .sqrt(),
            Norm::LInf => (0..self.dim()).map(|a| self.side(a)).fold(T::zero(), T::max),
        }
    }

    /// `max ‖y‖` over the box closure (attained at a corner; per axis the
    /// larger of `|lo|, |hi|` dominates both interior and boundary points).
    pub fn max_magnitude(&self, norm: Norm) -> T {
        let corner: Vec<T> = (0..self.dim())
            .map(|a| self.lower[a].abs().max(self.upper[a].abs()))
            .collect();
        norm.magnitude(&corner)
    }

    /// Intersection, if nonempty.
    pub fn intersect(&self, other: &AxisBox<T>) -> Option<AxisBox<T>> {
        debug_assert_eq!(self.dim(), other.dim());
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let lo = self.lower[axis].max(other.lower[axis]);
            let hi = self.upper[axis].min(other.upper[axis]);
            if !(lo < hi) {
                return None;
            }
            lower.push(lo);
            upper.push(hi);
        }
        Some(AxisBox { lower, upper })
    }

    /// Overlap volume with another box (zero when disjoint).
    pub fn overlap_volume(&self, other: &AxisBox<T>) -> T {
        match self.intersect(other) {
            Some(b) => b.volume(),
            None => T::zero(),
        }
    }

    /// The dyadic subcell of this box at `level`, indexed per axis by
    /// `index[axis] ∈ [0, 2^level)`.
    pub fn dyadic_cell(&self, level: u32, index: &[u32]) -> AxisBox<T> {
        debug_assert_eq!(index.len(), self.dim());
        let cells = T::of((1u64 << level) as f64);
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            debug_assert!((index[axis] as u64) < (1u64 << level));
            let side = self.side(axis) / cells;
            let lo = self.lower[axis] + side * T::of(index[axis] as f64);
            lower.push(lo);
            upper.push(lo + side);
        }
        AxisBox { lower, upper }
    }

    /// Per-axis dyadic index of the cell of this box containing `x`, or
    /// `None` when `x` lies outside the box.
    pub fn dyadic_index_of(&self, level: u32, x: &[T]) -> Option<Vec<u32>> {
        if !self.contains(x) {
            return None;
        }
        let cells = 1u64 << level;
        let cells_t = T::of(cells as f64);
        let mut index = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let rel = (x[axis] - self.lower[axis]) / self.side(axis);
            // rel ∈ [0,1); rounding can push the scaled value to 2^level, so clamp.
            let k = (rel * cells_t).floor().to_u64().unwrap_or(0).min(cells - 1);
            index.push(k as u32);
        }
        Some(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_values_match_hand_computation() {
        let a = [1.0, 2.0, -1.0];
        let b = [0.0, 0.0, 1.0];
        assert_eq!(Norm::L1.distance(&a, &b), 5.0);
        assert_eq!(Norm::L2.distance(&a, &b), 3.0);
        assert_eq!(Norm::LInf.distance(&a, &b), 2.0);
    }

    #[test]
    fn unit_cube_diameter_closed_forms() {
        assert_eq!(unit_cube_diameter::<f64>(Norm::LInf, 3), 1.0);
        assert_eq!(unit_cube_diameter::<f64>(Norm::L2, 4), 2.0);
        assert_eq!(unit_cube_diameter::<f64>(Norm::L1, 3), 3.0);
        assert_eq!(unit_cube_diameter::<f32>(Norm::L1, 5), 5.0f32);
    }

    #[test]
    fn box_membership_is_half_open() {
        let b = AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert!(b.contains(&[0.0, 0.0]));
        assert!(b.contains(&[0.999, 1.999]));
        assert!(!b.contains(&[1.0, 0.5]));
        assert!(!b.contains(&[0.5, 2.0]));
    }

    #[test]
    fn degenerate_boxes_are_rejected() {
        assert!(AxisBox::new(vec![0.0], vec![0.0]).is_err());
        assert!(AxisBox::new(vec![1.0], vec![0.5]).is_err());
        assert!(AxisBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(AxisBox::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn dyadic_cells_tile_and_index_back() {
        let cube = AxisBox::<f64>::unit_cube(3);
        let cell = cube.dyadic_cell(2, &[1, 0, 3]);
        assert_eq!(cell.lower(), &[0.25, 0.0, 0.75]);
        assert_eq!(cell.upper(), &[0.5, 0.25, 1.0]);
        let idx = cube.dyadic_index_of(2, &[0.3, 0.1, 0.99]).unwrap();
        assert_eq!(idx, vec![1, 0, 3]);
        assert!(cube.dyadic_index_of(2, &[1.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn diameter_and_magnitude_track_sides() {
        let b = AxisBox::new(vec![-1.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(b.diameter(Norm::LInf), 3.0);
        assert_eq!(b.diameter(Norm::L1), 4.0);
        assert_eq!(b.max_magnitude(Norm::LInf), 2.0);
        assert_eq!(b.max_magnitude(Norm::L1), 3.0);
    }
}
