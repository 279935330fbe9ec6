//! Analytically described reference measures.
//!
//! Every family supports exact i.i.d. sampling, exact half-open box masses,
//! and max-norm moments `E‖X‖_∞^q` that are either closed-form exact or (for
//! the Laplace family) adaptive quadrature with relative tolerance `1e-8`.

use rand::RngExt;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::discrete::DiscreteMeasure;
use crate::measures::geom::{AxisBox, Norm, Point};
use crate::num::Real;
use crate::rng;

/// Hard cap on materialized grid cells of a piecewise-constant density.
const PIECEWISE_CELL_CAP: u64 = 1 << 24;

/// A probability measure on `R^d` given in analytic form.
///
/// Directly constructed values should come from the checked constructors;
/// values deserialized from configuration files must pass [`validate`]
/// before use.
///
/// [`validate`]: ModelMeasure::validate
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelMeasure<T: Real> {
    /// Uniform distribution on the half-open box `Π [lower_i, lower_i + sides_i)`.
    UniformBox { lower: Vec<T>, sides: Vec<T> },
    /// Piecewise-constant density on the level-`level` dyadic grid of `[0,1)^d`.
    ///
    /// `values[k]` is the density on cell `k`, with cells linearized so axis 0
    /// is the slowest index: `k = ((i_0·2^level) + i_1)·2^level + …` for the
    /// per-axis indices `i_axis`.
    PiecewiseConstantDensity { level: u32, dim: usize, values: Vec<T> },
    /// `w·δ_a + (1−w)·δ_b`.
    TwoPoint { a: Point<T>, b: Point<T>, w: T },
    /// Convex combination `Σ weights_k · components_k`.
    Mixture { weights: Vec<T>, components: Vec<ModelMeasure<T>> },
    /// Product of `dim` centered Laplace distributions with the given scale
    /// (density `(2b)^{-d} exp(−‖x‖_1/b)`).
    ProductLaplace { scale: T, dim: usize },
}

impl<T: Real> ModelMeasure<T> {
    pub fn uniform_box(lower: Vec<T>, sides: Vec<T>) -> Result<Self> {
        let m = ModelMeasure::UniformBox { lower, sides };
        m.validate()?;
        Ok(m)
    }

    /// Uniform distribution on `[0,1)^d`.
    pub fn unit_uniform(d: usize) -> Self {
        ModelMeasure::UniformBox { lower: vec![T::zero(); d], sides: vec![T::one(); d] }
    }

    pub fn piecewise_constant(level: u32, dim: usize, values: Vec<T>) -> Result<Self> {
        let m = ModelMeasure::PiecewiseConstantDensity { level, dim, values };
        m.validate()?;
        Ok(m)
    }

    pub fn two_point(a: Point<T>, b: Point<T>, w: T) -> Result<Self> {
        let m = ModelMeasure::TwoPoint { a, b, w };
        m.validate()?;
        Ok(m)
    }

    pub fn mixture(weights: Vec<T>, components: Vec<ModelMeasure<T>>) -> Result<Self> {
        let m = ModelMeasure::Mixture { weights, components };
        m.validate()?;
        Ok(m)
    }

    pub fn product_laplace(scale: T, dim: usize) -> Result<Self> {
        let m = ModelMeasure::ProductLaplace { scale, dim };
        m.validate()?;
        Ok(m)
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            ModelMeasure::UniformBox { lower, .. } => lower.len(),
            ModelMeasure::PiecewiseConstantDensity { dim, .. } => *dim,
            ModelMeasure::TwoPoint { a, .. } => a.dim(),
            ModelMeasure::Mixture { components, .. } => {
                components.first().map_or(0, |c| c.dim())
            }
            ModelMeasure::ProductLaplace { dim, .. } => *dim,
        }
    }

    /// Checks the structural invariants of the family; recursive for mixtures.
    ///
    /// Each variant must describe a probability measure: exactly for boxes,
    /// two-point measures and mixtures, and within `1e-10` for the cell sums
    /// of a piecewise-constant density.
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelMeasure::UniformBox { lower, sides } => {
                if lower.is_empty() || lower.len() != sides.len() {
                    return Err(Error::InvalidInput(format!(
                        "uniform box: lower has {} axes, sides {}",
                        lower.len(),
                        sides.len()
                    )));
                }
                for (axis, (&lo, &s)) in lower.iter().zip(sides).enumerate() {
                    if !lo.is_finite() || !s.is_finite() || s <= T::zero() {
                        return Err(Error::InvalidInput(format!(
                            "uniform box: axis {axis} needs a finite corner and a positive side"
                        )));
                    }
                }
                Ok(())
            }
            ModelMeasure::PiecewiseConstantDensity { level, dim, values } => {
                if *dim == 0 {
                    return Err(Error::InvalidInput("piecewise density: dimension 0".into()));
                }
                let bits = (*level as u64) * (*dim as u64);
                if bits > PIECEWISE_CELL_CAP.trailing_zeros() as u64 {
                    return Err(Error::Capacity {
                        what: "piecewise density cells",
                        needed: 1u64.checked_shl((bits.min(63)) as u32).unwrap_or(u64::MAX),
                        cap: PIECEWISE_CELL_CAP,
                    });
                }
                let cells = 1usize << bits;
                if values.len() != cells {
                    return Err(Error::InvalidInput(format!(
                        "piecewise density: {} values for {} cells",
                        values.len(),
                        cells
                    )));
                }
                if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                    return Err(Error::InvalidInput(
                        "piecewise density: cell values must be finite and ≥ 0".into(),
                    ));
                }
                let cell_volume = T::of(0.5).powi((*level as i32) * (*dim as i32));
                let total = values.iter().fold(T::zero(), |s, &v| s + v) * cell_volume;
                if (total - T::one()).abs() > T::of(1e-10) {
                    return Err(Error::InvalidInput(format!(
                        "piecewise density integrates to {total}, not 1"
                    )));
                }
                Ok(())
            }
            ModelMeasure::TwoPoint { a, b, w } => {
                if a.dim() != b.dim() {
                    return Err(Error::InvalidInput(format!(
                        "two-point measure: dimensions {} vs {}",
                        a.dim(),
                        b.dim()
                    )));
                }
                if !w.is_finite() || *w < T::zero() || *w > T::one() {
                    return Err(Error::InvalidInput(format!("two-point weight {w} outside [0,1]")));
                }
                Ok(())
            }
            ModelMeasure::Mixture { weights, components } => {
                if weights.is_empty() || weights.len() != components.len() {
                    return Err(Error::InvalidInput(format!(
                        "mixture: {} weights for {} components",
                        weights.len(),
                        components.len()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
                    return Err(Error::InvalidInput("mixture weights must be finite and ≥ 0".into()));
                }
                let total = weights.iter().fold(T::zero(), |s, &w| s + w);
                if (total - T::one()).abs() > T::of(1e-10) {
                    return Err(Error::InvalidInput(format!("mixture weights sum to {total}, not 1")));
                }
                let d = components[0].dim();
                for c in components {
                    c.validate()?;
                    if c.dim() != d {
                        return Err(Error::InvalidInput(
                            "mixture components have unequal dimensions".into(),
                        ));
                    }
                }
                Ok(())
            }
            ModelMeasure::ProductLaplace { scale, dim } => {
                if !scale.is_finite() || *scale <= T::zero() {
                    return Err(Error::InvalidInput(format!("laplace scale {scale} must be > 0")));
                }
                if *dim == 0 {
                    return Err(Error::InvalidInput("laplace dimension 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Draws `n` i.i.d. samples. Deterministic given `(self, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Point<T>> {
        let mut rng = rng::from_seed_word(seed);
        self.sample_with(n, &mut rng)
    }

    /// Draws `n` i.i.d. samples from a caller-supplied stream.
    pub fn sample_with(&self, n: usize, rng: &mut ChaCha12Rng) -> Vec<Point<T>> {
        let prepared = Prepared::build(self);
        (0..n).map(|_| prepared.draw(rng)).collect()
    }

    /// Exact measure of a half-open axis-aligned box.
    ///
    /// Fails only for piecewise-constant densities when the box cannot be
    /// split exactly along the density's grid.
    pub fn box_mass(&self, query: &AxisBox<T>) -> Result<T> {
        if query.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "box dimension {} vs measure dimension {}",
                query.dim(),
                self.dim()
            )));
        }
        match self {
            ModelMeasure::UniformBox { .. } => {
                let support = self.support_box().expect("uniform box support");
                Ok(support.overlap_volume(query) / support.volume())
            }
            ModelMeasure::PiecewiseConstantDensity { level, dim, values } => {
                let clipped = match query.intersect(&AxisBox::unit_cube(*dim)) {
                    Some(b) => b,
                    None => return Ok(T::zero()),
                };
                // Exact splitting works for any box whose corners sit on a
                // (possibly much finer) dyadic grid: snap them there, then
                // accumulate density · overlap per density cell. Corners
                // off every dyadic grid cannot be split exactly.
                let mut lo = Vec::with_capacity(*dim);
                let mut hi = Vec::with_capacity(*dim);
                for axis in 0..*dim {
                    lo.push(snap_dyadic(clipped.lower()[axis], *level, axis)?);
                    hi.push(snap_dyadic(clipped.upper()[axis], *level, axis)?);
                }
                let side = 1usize << *level;
                let cell_len = T::of(0.5).powi(*level as i32);
                let range = |axis: usize| -> (usize, usize) {
                    let first = (lo[axis] / cell_len).as_f64().floor() as usize;
                    let past = (hi[axis] / cell_len).as_f64().ceil() as usize;
                    (first.min(side), past.min(side))
                };
                let mut idx: Vec<usize> = (0..*dim).map(|a| range(a).0).collect();
                if (0..*dim).any(|a| range(a).0 >= range(a).1) {
                    return Ok(T::zero());
                }
                let mut mass = T::zero();
                'cells: loop {
                    let mut lin = 0usize;
                    let mut overlap = T::one();
                    for axis in 0..*dim {
                        lin = (lin << *level) | idx[axis];
                        let cell_lo = T::of_usize(idx[axis]) * cell_len;
                        let cell_hi = cell_lo + cell_len;
                        overlap = overlap
                            * (hi[axis].min(cell_hi) - lo[axis].max(cell_lo)).max(T::zero());
                    }
                    mass = mass + values[lin] * overlap;
                    // Odometer over the index ranges, axis d−1 fastest.
                    for axis in (0..*dim).rev() {
                        idx[axis] += 1;
                        if idx[axis] < range(axis).1 {
                            continue 'cells;
                        }
                        idx[axis] = range(axis).0;
                    }
                    break;
                }
                Ok(mass)
            }
            ModelMeasure::TwoPoint { a, b, w } => {
                let mut mass = T::zero();
                if query.contains(a) {
                    mass = mass + *w;
                }
                if query.contains(b) {
                    mass = mass + (T::one() - *w);
                }
                Ok(mass)
            }
            ModelMeasure::Mixture { weights, components } => {
                let mut mass = T::zero();
                for (&alpha, c) in weights.iter().zip(components) {
                    mass = mass + alpha * c.box_mass(query)?;
                }
                Ok(mass)
            }
            ModelMeasure::ProductLaplace { scale, .. } => {
                let mut mass = T::one();
                for axis in 0..self.dim() {
                    let lo = query.lower()[axis];
                    let hi = query.upper()[axis];
                    mass = mass * (laplace_cdf(hi, *scale) - laplace_cdf(lo, *scale));
                }
                Ok(mass)
            }
        }
    }

    /// `E‖X‖_∞^q` for `q ≥ 1`.
    ///
    /// Closed-form exact for boxes, two-point measures, piecewise densities
    /// and mixtures; adaptive quadrature (relative tolerance `1e-8`) of
    /// `q·t^{q−1}·P(‖X‖_∞ > t)` for the Laplace family.
    pub fn moment_maxnorm(&self, q: T) -> Result<T> {
        if !q.is_finite() || q < T::one() {
            return Err(Error::Domain(format!("moment order q = {q} must be ≥ 1")));
        }
        match self {
            ModelMeasure::UniformBox { .. } => {
                let support = self.support_box().expect("uniform box support");
                Ok(uniform_box_maxnorm_moment(&support, q))
            }
            ModelMeasure::PiecewiseConstantDensity { level, dim, values } => {
                let unit = AxisBox::unit_cube(*dim);
                let cell_volume = T::of(0.5).powi((*level as i32) * (*dim as i32));
                let side_cells = 1u32 << *level;
                let mut idx = vec![0u32; *dim];
                let mut total = T::zero();
                for (lin, &v) in values.iter().enumerate() {
                    if v > T::zero() {
                        let mut rest = lin;
                        for axis in (0..*dim).rev() {
                            idx[axis] = (rest & (side_cells as usize - 1)) as u32;
                            rest >>= *level;
                        }
                        let cell = unit.dyadic_cell(*level, &idx);
                        total = total + v * cell_volume * uniform_box_maxnorm_moment(&cell, q);
                    }
                }
                Ok(total)
            }
            ModelMeasure::TwoPoint { a, b, w } => {
                let na = Norm::LInf.magnitude(a.coords());
                let nb = Norm::LInf.magnitude(b.coords());
                Ok(*w * na.powf(q) + (T::one() - *w) * nb.powf(q))
            }
            ModelMeasure::Mixture { weights, components } => {
                let mut total = T::zero();
                for (&alpha, c) in weights.iter().zip(components) {
                    total = total + alpha * c.moment_maxnorm(q)?;
                }
                Ok(total)
            }
            ModelMeasure::ProductLaplace { scale, dim } => {
                Ok(laplace_maxnorm_moment(*scale, *dim, q))
            }
        }
    }

    /// Smallest known half-open box carrying all the mass, or `None` for
    /// unbounded support.
    ///
    /// Point supports are padded by a relative `2^-40` per axis so the
    /// half-open box still contains its atoms.
    pub fn support_box(&self) -> Option<AxisBox<T>> {
        match self {
            ModelMeasure::UniformBox { lower, sides } => {
                let upper: Vec<T> =
                    lower.iter().zip(sides).map(|(&lo, &s)| lo + s).collect();
                Some(AxisBox::new(lower.clone(), upper).expect("validated box"))
            }
            ModelMeasure::PiecewiseConstantDensity { dim, .. } => Some(AxisBox::unit_cube(*dim)),
            ModelMeasure::TwoPoint { a, b, .. } => {
                let mut lower = Vec::with_capacity(a.dim());
                let mut upper = Vec::with_capacity(a.dim());
                for axis in 0..a.dim() {
                    let lo = a[axis].min(b[axis]);
                    let hi = a[axis].max(b[axis]);
                    let pad = (T::one() + hi.abs()) * T::of(2f64.powi(-40));
                    lower.push(lo);
                    upper.push(hi + pad);
                }
                Some(AxisBox::new(lower, upper).expect("padded box is nonempty"))
            }
            ModelMeasure::Mixture { components, .. } => {
                let mut boxes = components.iter().map(|c| c.support_box());
                let first = boxes.next()??;
                let mut lower = first.lower().to_vec();
                let mut upper = first.upper().to_vec();
                for b in boxes {
                    let b = b?;
                    for axis in 0..lower.len() {
                        lower[axis] = lower[axis].min(b.lower()[axis]);
                        upper[axis] = upper[axis].max(b.upper()[axis]);
                    }
                }
                Some(AxisBox::new(lower, upper).expect("hull of valid boxes"))
            }
            ModelMeasure::ProductLaplace { .. } => None,
        }
    }

    /// The measure as a finite atom list, when it is one.
    pub fn as_discrete(&self) -> Option<DiscreteMeasure<T>> {
        fn collect<T: Real>(
            m: &ModelMeasure<T>,
            factor: T,
            out: &mut Vec<(Point<T>, T)>,
        ) -> bool {
            match m {
                ModelMeasure::TwoPoint { a, b, w } => {
                    out.push((a.clone(), factor * *w));
                    out.push((b.clone(), factor * (T::one() - *w)));
                    true
                }
                ModelMeasure::Mixture { weights, components } => weights
                    .iter()
                    .zip(components)
                    .all(|(&alpha, c)| collect(c, factor * alpha, out)),
                _ => false,
            }
        }
        let mut atoms = Vec::new();
        if collect(self, T::one(), &mut atoms) {
            DiscreteMeasure::new(atoms).ok()
        } else {
            None
        }
    }

    /// The density as a finite list of `(box, constant value)` pieces, for
    /// families that have one. Pieces are pairwise disjoint.
    pub fn density_pieces(&self) -> Result<Vec<(AxisBox<T>, T)>> {
        match self {
            ModelMeasure::UniformBox { .. } => {
                let support = self.support_box().expect("uniform box support");
                let v = T::one() / support.volume();
                Ok(vec![(support, v)])
            }
            ModelMeasure::PiecewiseConstantDensity { level, dim, values } => {
                let unit = AxisBox::unit_cube(*dim);
                let side_cells = 1u32 << *level;
                let mut idx = vec![0u32; *dim];
                let mut pieces = Vec::new();
                for (lin, &v) in values.iter().enumerate() {
                    let mut rest = lin;
                    for axis in (0..*dim).rev() {
                        idx[axis] = (rest & (side_cells as usize - 1)) as u32;
                        rest >>= *level;
                    }
                    pieces.push((unit.dyadic_cell(*level, &idx), v));
                }
                Ok(pieces)
            }
            ModelMeasure::Mixture { weights, components } => {
                let mut pieces: Vec<(AxisBox<T>, T)> = Vec::new();
                for (&alpha, c) in weights.iter().zip(components) {
                    for (b, v) in c.density_pieces()? {
                        pieces.push((b, alpha * v));
                    }
                }
                for i in 0..pieces.len() {
                    for j in (i + 1)..pieces.len() {
                        if pieces[i].0.intersect(&pieces[j].0).is_some() {
                            return Err(Error::Unsupported(
                                "mixture components overlap; densities do not tile".into(),
                            ));
                        }
                    }
                }
                Ok(pieces)
            }
            _ => Err(Error::Unsupported(
                "measure has no piecewise-constant density representation".into(),
            )),
        }
    }

    /// One draw from the measure conditioned on a box of positive mass.
    ///
    /// Exact for uniform boxes; rejection sampling (bounded attempts) for the
    /// remaining families.
    pub fn sample_conditional(
        &self,
        cell: &AxisBox<T>,
        rng: &mut ChaCha12Rng,
    ) -> Result<Point<T>> {
        if let ModelMeasure::UniformBox { .. } = self {
            let support = self.support_box().expect("uniform box support");
            let overlap = support.intersect(cell).ok_or_else(|| {
                Error::Unsupported("conditioning on a cell with zero mass".into())
            })?;
            let coords: Vec<T> = (0..overlap.dim())
                .map(|axis| {
                    let u = T::of(rng.random::<f64>());
                    overlap.lower()[axis] + overlap.side(axis) * u
                })
                .collect();
            return Point::new(coords);
        }
        const ATTEMPTS: usize = 1_000_000;
        let prepared = Prepared::build(self);
        for _ in 0..ATTEMPTS {
            let p = prepared.draw(rng);
            if cell.contains(&p) {
                return Ok(p);
            }
        }
        Err(Error::Domain(format!(
            "rejection sampling found no point in the cell after {ATTEMPTS} attempts"
        )))
    }
}

/// Finest dyadic grid a box corner may sit on and still split a
/// piecewise-constant density exactly.
const MAX_SPLIT_LEVEL: i32 = 40;

/// Snaps a coordinate in `[0, 1]` to the level-[`MAX_SPLIT_LEVEL`] dyadic
/// grid. A corner farther from every grid line than rounding noise could
/// put it (2^-20 of a fine cell) is off every dyadic grid an exact split
/// could use, and is rejected. `level` and `axis` only label the error.
/// (In single precision the fine grid is below float resolution and the
/// check degrades to accepting everything.)
fn snap_dyadic<T: Real>(x: T, level: u32, axis: usize) -> Result<T> {
    let scale = T::of(2.0).powi(MAX_SPLIT_LEVEL);
    let scaled = x * scale;
    let snapped = scaled.round();
    if (scaled - snapped).abs() > T::of(2.0).powi(-20) {
        return Err(Error::Misaligned { level, axis, coordinate: x.as_f64() });
    }
    Ok(snapped / scale)
}

/// Laplace distribution function with scale `b`.
fn laplace_cdf<T: Real>(x: T, b: T) -> T {
    let half = T::of(0.5);
    if x < T::zero() {
        half * (x / b).exp()
    } else {
        T::one() - half * (-x / b).exp()
    }
}

/// `E max_i |X_i|^q` for independent uniform coordinates on a box: integrates
/// `q·t^{q−1}·(1 − Π_i g_i(t))` exactly, where `g_i(t) = P(|X_i| ≤ t)` is
/// piecewise linear with breakpoints at `|lo_i|` and `|hi_i|`.
fn uniform_box_maxnorm_moment<T: Real>(b: &AxisBox<T>, q: T) -> T {
    let d = b.dim();
    let mut breaks: Vec<T> = Vec::with_capacity(2 * d + 1);
    for axis in 0..d {
        breaks.push(b.lower()[axis].abs());
        breaks.push(b.upper()[axis].abs());
    }
    breaks.push(T::zero());
    breaks.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    breaks.dedup();

    // P(|X_i| ≤ t): overlap of [−t, t] with [lo, hi], normalized.
    let g = |axis: usize, t: T| -> T {
        let lo = b.lower()[axis];
        let hi = b.upper()[axis];
        let len = (hi.min(t) - lo.max(-t)).max(T::zero());
        len / (hi - lo)
    };

    let mut total = T::zero();
    for win in breaks.windows(2) {
        let (a, c) = (win[0], win[1]);
        // On [a, c] every g_i is linear; recover it from its endpoint values.
        let mut coeffs = vec![T::one()];
        for axis in 0..d {
            let ga = g(axis, a);
            let gc = g(axis, c);
            let slope = (gc - ga) / (c - a);
            let intercept = ga - slope * a;
            let mut next = vec![T::zero(); coeffs.len() + 1];
            for (k, &ck) in coeffs.iter().enumerate() {
                next[k] = next[k] + ck * intercept;
                next[k + 1] = next[k + 1] + ck * slope;
            }
            coeffs = next;
        }
        // ∫ q t^{q−1} (1 − Σ_k coeffs_k t^k) dt over [a, c].
        let mut piece = c.powf(q) - a.powf(q);
        for (k, &ck) in coeffs.iter().enumerate() {
            if ck != T::zero() {
                let e = q + T::of_usize(k);
                piece = piece - ck * q / e * (c.powf(e) - a.powf(e));
            }
        }
        total = total + piece;
    }
    total
}

/// `E‖X‖_∞^q` for the product-Laplace measure by adaptive Simpson quadrature
/// of `q·t^{q−1}·(1 − (1 − e^{−t/b})^d)`, relative tolerance `1e-8`.
fn laplace_maxnorm_moment<T: Real>(b: T, d: usize, q: T) -> T {
    let bf = b.as_f64();
    let df = d as f64;
    let qf = q.as_f64();
    let integrand = |t: f64| -> f64 {
        if t <= 0.0 {
            return if qf == 1.0 { 1.0 } else { 0.0 };
        }
        let tail = 1.0 - (1.0 - (-t / bf).exp()).powf(df);
        qf * t.powf(qf - 1.0) * tail
    };
    // Beyond T_max the integrand is below any representable contribution.
    let t_max = bf * (60.0 + 8.0 * qf);
    let value = adaptive_simpson(&integrand, 0.0, t_max, 1e-9);
    T::of(value)
}

/// Adaptive Simpson quadrature with relative-error control.
///
/// A 64-panel composite pass supplies the magnitude estimate; each panel then
/// refines adaptively with its share of the error budget, so panels where the
/// integrand is negligible terminate immediately instead of chasing rounding
/// noise.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * eps, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * eps, depth - 1)
    }
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    let values: Vec<f64> = (0..=PANELS).map(|k| f(a + k as f64 * h)).collect();
    let mut scale = 0.0f64;
    for k in 0..PANELS {
        let (s, _, _) = simpson(f, a + k as f64 * h, values[k], a + (k + 1) as f64 * h, values[k + 1]);
        scale += s.abs();
    }
    let eps_panel = rel_tol * scale.max(f64::MIN_POSITIVE) / PANELS as f64;
    let mut total = 0.0f64;
    for k in 0..PANELS {
        let (pa, pb) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let (whole, m, fm) = simpson(f, pa, values[k], pb, values[k + 1]);
        total += recurse(f, pa, values[k], pb, values[k + 1], whole, m, fm, eps_panel, 30);
    }
    total
}

/// A sampler with its lookup tables built once per batch.
enum Prepared<'m, T: Real> {
    UniformBox { lower: &'m [T], sides: &'m [T] },
    Piecewise { level: u32, dim: usize, cumulative: Vec<f64> },
    TwoPoint { a: &'m Point<T>, b: &'m Point<T>, w: f64 },
    Mixture { cumulative: Vec<f64>, parts: Vec<Prepared<'m, T>> },
    Laplace { scale: T, dim: usize },
}

impl<'m, T: Real> Prepared<'m, T> {
    fn build(m: &'m ModelMeasure<T>) -> Self {
        match m {
            ModelMeasure::UniformBox { lower, sides } => {
                Prepared::UniformBox { lower, sides }
            }
            ModelMeasure::PiecewiseConstantDensity { level, dim, values } => {
                let mut cumulative = Vec::with_capacity(values.len());
                let mut acc = 0.0f64;
                for &v in values {
                    acc += v.as_f64();
                    cumulative.push(acc);
                }
                // Normalize so the final entry is exactly 1.
                let total = acc;
                for c in &mut cumulative {
                    *c /= total;
                }
                Prepared::Piecewise { level: *level, dim: *dim, cumulative }
            }
            ModelMeasure::TwoPoint { a, b, w } => Prepared::TwoPoint { a, b, w: w.as_f64() },
            ModelMeasure::Mixture { weights, components } => {
                let mut cumulative = Vec::with_capacity(weights.len());
                let mut acc = 0.0f64;
                for &w in weights {
                    acc += w.as_f64();
                    cumulative.push(acc);
                }
                for c in &mut cumulative {
                    *c /= acc;
                }
                Prepared::Mixture {
                    cumulative,
                    parts: components.iter().map(Prepared::build).collect(),
                }
            }
            ModelMeasure::ProductLaplace { scale, dim } => {
                Prepared::Laplace { scale: *scale, dim: *dim }
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> Point<T> {
        match self {
            Prepared::UniformBox { lower, sides } => {
                let coords: Vec<T> = lower
                    .iter()
                    .zip(*sides)
                    .map(|(&lo, &s)| lo + s * T::of(rng.random::<f64>()))
                    .collect();
                Point::new(coords).expect("uniform draw is finite")
            }
            Prepared::Piecewise { level, dim, cumulative, .. } => {
                let u = rng.random::<f64>();
                let lin = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
                let side_cells = 1usize << *level;
                let mut coords = Vec::with_capacity(*dim);
                let mut rest = lin;
                let mut idx = vec![0u32; *dim];
                for axis in (0..*dim).rev() {
                    idx[axis] = (rest & (side_cells - 1)) as u32;
                    rest >>= *level;
                }
                let h = T::of(0.5).powi(*level as i32);
                for axis in 0..*dim {
                    let u = T::of(rng.random::<f64>());
                    coords.push((T::of(idx[axis] as f64) + u) * h);
                }
                Point::new(coords).expect("cell draw is finite")
            }
            Prepared::TwoPoint { a, b, w } => {
                if rng.random::<f64>() < *w {
                    (*a).clone()
                } else {
                    (*b).clone()
                }
            }
            Prepared::Mixture { cumulative, parts } => {
                let u = rng.random::<f64>();
                let k = cumulative.partition_point(|&c| c <= u).min(parts.len() - 1);
                parts[k].draw(rng)
            }
            Prepared::Laplace { scale, dim } => {
                let coords: Vec<T> = (0..*dim)
                    .map(|_| {
                        let mut u = rng.random::<f64>();
                        while u == 0.0 {
                            u = rng.random::<f64>();
                        }
                        // Inverse transform around the median, exact for the
                        // double-exponential law.
                        let v = u - 0.5;
                        let mag = -(1.0 - 2.0 * v.abs()).ln();
                        let signed = if v < 0.0 { -mag } else { mag };
                        *scale * T::of(signed)
                    })
                    .collect();
                Point::new(coords).expect("laplace draw is finite")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[f64]) -> Point<f64> {
        Point::new(coords.to_vec()).unwrap()
    }

    fn unit_cube3() -> ModelMeasure<f64> {
        ModelMeasure::unit_uniform(3)
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let m = unit_cube3();
        let a = m.sample(32, 99);
        let b = m.sample(32, 99);
        assert_eq!(a, b);
        let c = m.sample(32, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_two_point_always_draws_the_first_atom() {
        let m = ModelMeasure::two_point(pt(&[0.0, 0.0, 0.0]), pt(&[1.0, 0.0, 0.0]), 1.0).unwrap();
        for p in m.sample(3, 7) {
            assert_eq!(p.coords(), &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn uniform_sample_means_concentrate() {
        // Coordinate means of 10^4 uniform draws stay within ±3σ/√n ≈ 0.0087.
        let samples = unit_cube3().sample(10_000, 2024);
        for axis in 0..3 {
            let mean: f64 =
                samples.iter().map(|p| p[axis]).sum::<f64>() / samples.len() as f64;
            assert!((0.49..=0.51).contains(&mean), "axis {axis} mean {mean}");
        }
    }

    #[test]
    fn box_masses_match_hand_computation() {
        let half = AxisBox::new(vec![0.0; 3], vec![0.5; 3]).unwrap();
        assert_eq!(unit_cube3().box_mass(&half).unwrap(), 0.125);

        let tp = ModelMeasure::two_point(pt(&[0.0; 3]), pt(&[1.0, 0.0, 0.0]), 0.5).unwrap();
        let near_origin = AxisBox::new(vec![-0.1; 3], vec![0.1; 3]).unwrap();
        assert_eq!(tp.box_mass(&near_origin).unwrap(), 0.5);

        let lap = ModelMeasure::product_laplace(1.0, 3).unwrap();
        let sym = AxisBox::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let per_axis = 1.0 - (-1.0f64).exp(); // 0.6321205588285577
        let expect = per_axis.powi(3);
        assert!((lap.box_mass(&sym).unwrap() - expect).abs() < 1e-14);
        assert!((expect - 0.25258).abs() < 1e-5);
    }

    #[test]
    fn laplace_box_mass_integrates_the_density() {
        // Oracle: 2-d midpoint integration of (2b)^{-2} exp(−(|x|+|y|)/b).
        let b = 0.8f64;
        let lap = ModelMeasure::product_laplace(b, 2).unwrap();
        let query = AxisBox::new(vec![-0.5, 0.2], vec![1.1, 1.4]).unwrap();
        let steps = 2000;
        let (dx, dy) = ((1.1 + 0.5) / steps as f64, (1.4 - 0.2) / steps as f64);
        let mut acc = 0.0;
        for i in 0..steps {
            let x: f64 = -0.5 + (i as f64 + 0.5) * dx;
            for j in 0..steps {
                let y: f64 = 0.2 + (j as f64 + 0.5) * dy;
                acc += (-(x.abs() + y.abs()) / b).exp();
            }
        }
        acc *= dx * dy / (4.0 * b * b);
        assert!((lap.box_mass(&query).unwrap() - acc).abs() < 1e-6);
    }

    #[test]
    fn maxnorm_moments_match_closed_forms() {
        // E max_i X_i^q on [0,1)^d is d/(d+q) when coordinates are positive.
        assert!((unit_cube3().moment_maxnorm(1.0).unwrap() - 0.75).abs() < 1e-14);
        assert!((unit_cube3().moment_maxnorm(3.0).unwrap() - 0.5).abs() < 1e-14);

        let tp = ModelMeasure::two_point(pt(&[0.0; 3]), pt(&[1.0, 0.0, 0.0]), 0.5).unwrap();
        assert_eq!(tp.moment_maxnorm(2.0).unwrap(), 0.5);
    }

    #[test]
    fn offcenter_box_moment_matches_numeric_oracle() {
        let m = ModelMeasure::uniform_box(vec![-0.3, 0.1], vec![1.0, 0.8]).unwrap();
        let q = 2.3f64;
        // Oracle: Riemann sum of q t^{q−1} P(max > t) on [0, 0.9].
        let steps = 400_000;
        let dt = 0.9 / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            let t: f64 = (i as f64 + 0.5) * dt;
            let g0 = ((0.7f64.min(t) - (-0.3f64).max(-t)).max(0.0)) / 1.0;
            let g1 = ((0.9f64.min(t) - 0.1f64.max(-t)).max(0.0)) / 0.8;
            acc += q * t.powf(q - 1.0) * (1.0 - g0 * g1) * dt;
        }
        let exact = m.moment_maxnorm(q).unwrap();
        assert!((exact - acc).abs() < 1e-5, "exact {exact} vs oracle {acc}");
    }

    #[test]
    fn laplace_moment_quadrature_hits_the_series_oracle() {
        // E‖X‖_∞^q = Γ(q+1) b^q Σ_j C(d,j) (−1)^{j+1} j^{−q}, by expanding
        // P(max > t) into exponentials and integrating term by term.
        let m3: ModelMeasure<f64> = ModelMeasure::product_laplace(1.0, 3).unwrap();
        let exact3 = 575.0 / 36.0; // q = 3: 6·(3 − 3/8 + 1/27)
        assert!((m3.moment_maxnorm(3.0).unwrap() - exact3).abs() / exact3 < 1e-7);

        let m4 = ModelMeasure::product_laplace(0.7, 4).unwrap();
        let q = 2.5f64;
        let gamma_3_5 = 3.3233509704478426; // Γ(3.5) = (2.5)(1.5)(0.5)√π
        let series = 4.0 * 1.0 - 6.0 * 2f64.powf(-q) + 4.0 * 3f64.powf(-q) - 4f64.powf(-q);
        let oracle = gamma_3_5 * 0.7f64.powf(q) * series;
        let got = m4.moment_maxnorm(q).unwrap();
        assert!((got - oracle).abs() / oracle < 1e-7, "got {got} vs oracle {oracle}");
    }

    #[test]
    fn misaligned_boxes_are_rejected_for_piecewise_densities() {
        let m: ModelMeasure<f64> =
            ModelMeasure::piecewise_constant(1, 2, vec![2.0, 2.0, 0.0, 0.0]).unwrap();
        let strip = AxisBox::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        assert!((m.box_mass(&strip).unwrap() - 1.0).abs() < 1e-12);
        let quarter = AxisBox::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert!((m.box_mass(&quarter).unwrap() - 0.5).abs() < 1e-12);
        let misaligned = AxisBox::new(vec![0.0, 0.0], vec![0.3, 1.0]).unwrap();
        match m.box_mass(&misaligned) {
            Err(Error::Misaligned { axis: 0, .. }) => {}
            other => panic!("expected alignment error, got {other:?}"),
        }
    }

    #[test]
    fn piecewise_cell_order_puts_axis_zero_slowest() {
        // Density 4 on the cell with i_0 = 1, i_1 = 0 (linear index 2).
        let m = ModelMeasure::piecewise_constant(1, 2, vec![0.0, 0.0, 4.0, 0.0]).unwrap();
        let right_lower = AxisBox::new(vec![0.5, 0.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(m.box_mass(&right_lower).unwrap(), 1.0);
        for p in m.sample(64, 5) {
            assert!(right_lower.contains(&p));
        }
    }

    #[test]
    fn mixture_component_frequencies_match_weights() {
        let m = ModelMeasure::mixture(
            vec![0.3, 0.7],
            vec![
                ModelMeasure::uniform_box(vec![0.0], vec![1.0]).unwrap(),
                ModelMeasure::uniform_box(vec![2.0], vec![1.0]).unwrap(),
            ],
        )
        .unwrap();
        let n = 10_000usize;
        let hits = m.sample(n, 31).iter().filter(|p| p[0] < 1.0).count() as f64;
        let freq = hits / n as f64;
        let bound = 4.0 * (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((freq - 0.3).abs() <= bound, "freq {freq}, allowed ±{bound}");
    }

    #[test]
    fn sample_and_box_mass_agree_on_random_boxes() {
        // Empirical box frequencies vs exact masses, 4√(p(1−p)/n) tolerance,
        // one retry to absorb the expected rare boundary miss.
        let measure = ModelMeasure::mixture(
            vec![0.5, 0.5],
            vec![
                ModelMeasure::unit_uniform(2),
                ModelMeasure::uniform_box(vec![0.25, 0.25], vec![0.5, 0.5]).unwrap(),
            ],
        )
        .unwrap();
        let attempt = |salt: u64| -> bool {
            let n = 10_000usize;
            let samples = measure.sample(n, 7_000 + salt);
            let mut rng = crate::rng::stream(4242 + salt, &[crate::rng::tag::INSTANCE]);
            (0..20).all(|_| {
                let lo = [rng.random::<f64>() * 0.8, rng.random::<f64>() * 0.8];
                let side = [
                    0.1 + rng.random::<f64>() * 0.5,
                    0.1 + rng.random::<f64>() * 0.5,
                ];
                let b =
                    AxisBox::new(vec![lo[0], lo[1]], vec![lo[0] + side[0], lo[1] + side[1]])
                        .unwrap();
                let mass = measure.box_mass(&b).unwrap();
                let freq = samples.iter().filter(|p| b.contains(p)).count() as f64 / n as f64;
                let tol = 4.0 * (mass * (1.0 - mass) / n as f64).sqrt() + 1e-9;
                (freq - mass).abs() <= tol
            })
        };
        assert!(attempt(0) || attempt(1));
    }

    #[test]
    fn validation_rejects_broken_families() {
        assert!(ModelMeasure::uniform_box(vec![0.0], vec![0.0]).is_err());
        assert!(ModelMeasure::piecewise_constant(1, 2, vec![1.0; 3]).is_err());
        assert!(ModelMeasure::piecewise_constant(1, 2, vec![2.0; 4]).is_err()); // integrates to 2
        assert!(ModelMeasure::two_point(pt(&[0.0]), pt(&[1.0]), 1.5).is_err());
        assert!(ModelMeasure::mixture(vec![0.5], vec![]).is_err());
        assert!(ModelMeasure::mixture(
            vec![0.9, 0.2],
            vec![ModelMeasure::unit_uniform(1), ModelMeasure::unit_uniform(1)],
        )
        .is_err());
        assert!(ModelMeasure::product_laplace(0.0, 3).is_err());
    }

    #[test]
    fn as_discrete_flattens_two_point_mixtures() {
        let m = ModelMeasure::mixture(
            vec![0.25, 0.75],
            vec![
                ModelMeasure::two_point(pt(&[0.0]), pt(&[1.0]), 0.5).unwrap(),
                ModelMeasure::two_point(pt(&[2.0]), pt(&[3.0]), 1.0).unwrap(),
            ],
        )
        .unwrap();
        let d = m.as_discrete().unwrap();
        assert_eq!(d.len(), 3); // the w=1 component drops its zero-weight atom
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!(ModelMeasure::<f64>::unit_uniform(2).as_discrete().is_none());
    }

    #[test]
    fn support_boxes_contain_all_samples() {
        let tp = ModelMeasure::two_point(pt(&[0.0, 1.0]), pt(&[1.0, 0.0]), 0.5).unwrap();
        let b = tp.support_box().unwrap();
        for p in tp.sample(32, 3) {
            assert!(b.contains(&p));
        }
        assert!(ModelMeasure::product_laplace(1.0, 3).unwrap().support_box().is_none());
    }

    #[test]
    fn conditional_sampling_restricts_to_the_cell() {
        let cell = AxisBox::new(vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let m = ModelMeasure::unit_uniform(2);
        let mut rng = crate::rng::stream(11, &[crate::rng::tag::COUPLING]);
        for _ in 0..64 {
            assert!(cell.contains(&m.sample_conditional(&cell, &mut rng).unwrap()));
        }
        let lap = ModelMeasure::product_laplace(1.0, 2).unwrap();
        for _ in 0..16 {
            assert!(cell.contains(&lap.sample_conditional(&cell, &mut rng).unwrap()));
        }
    }

    #[test]
    fn density_pieces_tile_the_support() {
        let pieces = ModelMeasure::<f64>::unit_uniform(3).density_pieces().unwrap();
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].1, 1.0);
        let overlapping = ModelMeasure::mixture(
            vec![0.5, 0.5],
            vec![ModelMeasure::unit_uniform(1), ModelMeasure::unit_uniform(1)],
        )
        .unwrap();
        assert!(overlapping.density_pieces().is_err());
    }
}
