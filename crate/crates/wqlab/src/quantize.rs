//! Monte Carlo estimation of the random quantization error
//! `V_N = E[ρ_p^p(μ, μ̂_N)]^{1/p}`, where `μ̂_N` is the empirical measure of
//! `N` independent draws from `μ`; plus the exact two-point oracle, a
//! Lloyd-type optimal-quantizer baseline, log-log rate fitting, and the
//! rescaled trace `N^{1/d}·V̂_N` used to watch the limiting constant
//! stabilize.
//!
//! Estimator convention: replications average `ρ^p` first and take the
//! `p`-th root last, matching the defining expectation; confidence
//! intervals are propagated through the root by bootstrap resampling of the
//! per-replication `ρ^p` values.
//!
//! Determinism: every replication derives its seed from the master seed and
//! its `(N, replication)` coordinates, replications are reduced in index
//! order, and the bootstrap has its own derived stream — so results are
//! bitwise identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::dyadic_bound;
use crate::error::{Error, Result};
use crate::measures::{AxisBox, DiscreteMeasure, ModelMeasure, Norm, Point};
use crate::num::Real;
use crate::rng::{self, tag};
use crate::transport::{rho_exact, rho_exact_capped, semidiscrete, semidiscrete_grid};
use crate::transport::DEFAULT_ATOM_CAP;

/// Mass allowed outside the truncation box when an unbounded-support
/// measure is routed through the grid solver.
const TRUNCATION_MASS_TOL: f64 = 1e-6;
/// Bootstrap resamples behind every confidence interval.
const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Largest sample count the two-point oracle will enumerate.
const TWO_POINT_CAP: usize = 1_000_000;

/// How a replication's transport problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverChoice {
    /// Grid discretization at `grid_level` with a certified two-sided
    /// bracket; unbounded supports are truncated automatically.
    Semidiscrete { grid_level: u32 },
    /// Multiscale upper bound truncated at `truncation_level`; the record's
    /// value is the bound itself and the lower bracket is zero.
    Dyadic { truncation_level: u32 },
    /// Exact distance; requires a finitely supported model measure.
    Exact,
}

/// A full experiment: measure, metric, sample schedule, and solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec<T: Real> {
    pub measure: ModelMeasure<T>,
    pub p: T,
    pub norm: Norm,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub solver: SolverChoice,
}

impl<T: Real> ExperimentSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.p.is_finite() || self.p < T::one() {
            return Err(Error::Domain(format!(
                "exponent p = {} must satisfy p ≥ 1",
                self.p
            )));
        }
        if self.replications < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 replications, got {}",
                self.replications
            )));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidInput("empty sample-size schedule".into()));
        }
        if let Some(&bad) = self.n_values.iter().find(|&&n| n == 0) {
            return Err(Error::InvalidInput(format!("sample size {bad} must be ≥ 1")));
        }
        Ok(())
    }

    /// The `N^{-1/d}` rate regime needs `p < d/2`; outside it the slower
    /// discrete-case rate takes over. Deliberate (the two-point experiment
    /// lives there), so a warning rather than an error.
    pub fn regime_warning(&self) -> Option<String> {
        let d = T::of_usize(self.measure.dim());
        if self.p + self.p >= d {
            Some(format!(
                "p = {} is not below d/2 = {}; expect the slow rate, not N^(-1/d)",
                self.p,
                d / T::of(2.0)
            ))
        } else {
            None
        }
    }
}

/// One replication's outcome: the solver value on the `ρ^p` scale plus a
/// certified bracket on the `ρ` scale (equal endpoints for the exact
/// solver, zero lower bound for the dyadic one).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReplicationRecord<T> {
    pub n: usize,
    pub rep: usize,
    pub rho_p_pow_p: T,
    pub lower: T,
    pub upper: T,
    pub seed: u64,
}

/// Aggregate over the replications at one sample size.
#[derive(Debug, Clone, Serialize)]
pub struct NSummary<T> {
    pub n: usize,
    /// `(mean of ρ^p)^{1/p}`.
    pub v_hat: T,
    /// 2.5% bootstrap percentile of the estimator.
    pub ci_lo: T,
    /// 97.5% bootstrap percentile of the estimator.
    pub ci_hi: T,
    /// Bootstrap standard error of the estimator.
    pub se: T,
    pub records: Vec<ReplicationRecord<T>>,
}

/// Centered cube capturing all but `tol` of the measure's mass, found by
/// doubling then bisecting the half-side.
fn truncation_box<T: Real>(measure: &ModelMeasure<T>, tol: T) -> Result<AxisBox<T>> {
    let d = measure.dim();
    let target = T::one() - tol;
    let mut hi = T::one();
    let mut grow = 0;
    while measure.box_mass(&AxisBox::centered_cube(d, hi)?)? < target {
        hi = hi * T::of(2.0);
        grow += 1;
        if grow > 80 {
            return Err(Error::Domain(
                "no centered cube captures the required mass".into(),
            ));
        }
    }
    let mut lo = T::zero();
    for _ in 0..60 {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if measure.box_mass(&AxisBox::centered_cube(d, mid)?)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    AxisBox::centered_cube(d, hi)
}

/// Extra bracket slack from replacing `μ` by its conditional on the
/// truncation box, on the `ρ` scale.
///
/// Moving the escaped mass `ε` back into the box costs at most
/// `2^{p-1}(E[‖X‖^p; outside] + ε·R^p)` with `R` the farthest box point,
/// and Hölder with exponent `q/p`, `q = p + 2`, turns the tail moment into
/// `(c·M_q^{1/q})^p · ε^{1-p/q}` where `M_q` is the max-norm `q`-th moment
/// and `c` converts the max norm into the working one.
fn truncation_slack<T: Real>(
    measure: &ModelMeasure<T>,
    cube: &AxisBox<T>,
    p: T,
    norm: Norm,
) -> Result<T> {
    let eps = (T::one() - measure.box_mass(cube)?).max(T::zero());
    if eps == T::zero() {
        return Ok(T::zero());
    }
    let q = p + T::of(2.0);
    let m_q = measure.moment_maxnorm(q)?;
    let c = norm.max_norm_factor::<T>(measure.dim());
    let r = cube.max_magnitude(norm);
    let tail_moment = (c * m_q.powf(T::one() / q)).powf(p) * eps.powf(T::one() - p / q);
    let cost = T::of(2.0).powf(p - T::one()) * (tail_moment + eps * r.powf(p));
    Ok(cost.powf(T::one() / p))
}

fn solve_replication<T: Real>(
    spec: &ExperimentSpec<T>,
    n: usize,
    rep: usize,
) -> Result<ReplicationRecord<T>> {
    let seed = rng::mix(spec.master_seed, &[tag::SAMPLE, n as u64, rep as u64]);
    let nu = DiscreteMeasure::empirical(spec.measure.sample(n, seed))?;
    let p = spec.p;
    let (rho_p_pow_p, lower, upper) = match spec.solver {
        SolverChoice::Exact => {
            let atoms = spec.measure.as_discrete().ok_or_else(|| {
                Error::Unsupported(
                    "the exact solver needs a finitely supported measure".into(),
                )
            })?;
            let (rho, _) = rho_exact(&atoms, &nu, p, spec.norm)?;
            (rho.powf(p), rho, rho)
        }
        SolverChoice::Dyadic { truncation_level } => {
            let r = dyadic_bound(&spec.measure, &nu, p, spec.norm, truncation_level)?;
            (r.partial_sum + r.tail_bound, T::zero(), r.upper_bound)
        }
        SolverChoice::Semidiscrete { grid_level } => {
            if spec.measure.support_box().is_some() {
                let r = semidiscrete(&spec.measure, &nu, p, spec.norm, grid_level)?;
                (r.estimate.powf(p), r.lower(), r.upper())
            } else {
                let cube = truncation_box(&spec.measure, T::of(TRUNCATION_MASS_TOL))?;
                let grid = semidiscrete_grid(&spec.measure, &cube, grid_level)?;
                let (rho, _) =
                    rho_exact_capped(&grid, &nu, p, spec.norm, DEFAULT_ATOM_CAP)?;
                let slack = cube.diameter(spec.norm)
                    * T::of(2.0).powi(-(grid_level as i32))
                    + truncation_slack(&spec.measure, &cube, p, spec.norm)?;
                (rho.powf(p), (rho - slack).max(T::zero()), rho + slack)
            }
        }
    };
    Ok(ReplicationRecord { n, rep, rho_p_pow_p, lower, upper, seed })
}

fn bootstrap_summary<T: Real>(
    values: &[T],
    p: T,
    master_seed: u64,
    n: u64,
) -> (T, T, T, T) {
    let r = values.len();
    let mean = values.iter().copied().sum::<T>() / T::of_usize(r);
    let root = |m: T| m.powf(T::one() / p);
    let v_hat = root(mean);

    let mut rng = rng::stream(master_seed, &[tag::BOOTSTRAP, n]);
    let mut stats = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut acc = T::zero();
        for _ in 0..r {
            acc = acc + values[rand::RngExt::random_range(&mut rng, 0..r)];
        }
        stats.push(root(acc / T::of_usize(r)));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite bootstrap statistics"));
    let lo = stats[(BOOTSTRAP_RESAMPLES * 25) / 1000 - 1];
    let hi = stats[(BOOTSTRAP_RESAMPLES * 975) / 1000 - 1];
    let boot_mean = stats.iter().copied().sum::<T>() / T::of_usize(stats.len());
    let var = stats
        .iter()
        .map(|&s| (s - boot_mean) * (s - boot_mean))
        .sum::<T>()
        / T::of_usize(stats.len() - 1);
    (v_hat, lo, hi, var.max(T::zero()).sqrt())
}

/// Runs the experiment: for each scheduled `N`, draws `R` independent
/// samples, solves each replication with the chosen solver, and aggregates
/// `V̂_N = (mean ρ^p)^{1/p}` with a bootstrap 95% confidence interval.
///
/// Replications run in parallel but are reduced in `(N, replication)`
/// order, so the output is a pure function of the `spec` argument.
pub fn v_rand_estimate<T: Real>(spec: &ExperimentSpec<T>) -> Result<Vec<NSummary<T>>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.n_values.len());
    for &n in &spec.n_values {
        let results: Vec<Result<ReplicationRecord<T>>> = (0..spec.replications)
            .into_par_iter()
            .map(|rep| {
                solve_replication(spec, n, rep).map_err(|e| e.at_replication(n, rep))
            })
            .collect();
        let records = results.into_iter().collect::<Result<Vec<_>>>()?;
        let values: Vec<T> = records.iter().map(|rec| rec.rho_p_pow_p).collect();
        let (v_hat, ci_lo, ci_hi, se) =
            bootstrap_summary(&values, spec.p, spec.master_seed, n as u64);
        out.push(NSummary { n, v_hat, ci_lo, ci_hi, se, records });
    }
    Ok(out)
}

/// Exact random quantization error of the two-point measure with weights
/// `(w, 1-w)` and support distance `distance`:
/// `distance · (Σ_k C(N,k) w^k (1-w)^{N-k} |k/N - w|)^{1/p}`.
///
/// Binomial weights are accumulated in log space, so any `N` up to a
/// million is exact to working precision.
pub fn two_point_exact<T: Real>(n: usize, p: T, w: T, distance: T) -> Result<T> {
    if n == 0 {
        return Err(Error::InvalidInput("two-point oracle needs N ≥ 1".into()));
    }
    if n > TWO_POINT_CAP {
        return Err(Error::Capacity {
            what: "two-point enumeration",
            needed: n as u64,
            cap: TWO_POINT_CAP as u64,
        });
    }
    if !p.is_finite() || p < T::one() {
        return Err(Error::Domain(format!("exponent p = {p} must satisfy p ≥ 1")));
    }
    if !(T::zero()..=T::one()).contains(&w) {
        return Err(Error::Domain(format!("weight w = {w} must lie in [0, 1]")));
    }
    if !(distance >= T::zero()) || !distance.is_finite() {
        return Err(Error::Domain(format!("distance {distance} must be finite and ≥ 0")));
    }
    if w == T::zero() || w == T::one() {
        return Ok(T::zero()); // every sample lands on the heavy atom
    }
    let ln_w = w.ln();
    let ln_1w = (T::one() - w).ln();
    let n_t = T::of_usize(n);
    let mut ln_binom = T::zero();
    let mut sum = T::zero();
    for k in 0..=n {
        let k_t = T::of_usize(k);
        let ln_prob = ln_binom + k_t * ln_w + (n_t - k_t) * ln_1w;
        sum = sum + ln_prob.exp() * (k_t / n_t - w).abs();
        if k < n {
            ln_binom = ln_binom + (n_t - k_t).ln() - (k_t + T::one()).ln();
        }
    }
    Ok(distance * sum.powf(T::one() / p))
}

/// Log-log least-squares fit of an error-versus-size curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit<T> {
    pub slope: T,
    pub intercept: T,
    pub stderr_slope: T,
}

/// Ordinary least squares of `log V` on `log N`. Needs at least three
/// distinct sample sizes and strictly positive values.
pub fn rate_fit<T: Real>(points: &[(usize, T)]) -> Result<RateFit<T>> {
    let mut distinct: Vec<usize> = points.iter().map(|&(n, _)| n).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::IncompleteData(format!(
            "rate fit needs ≥ 3 distinct sample sizes, got {}",
            distinct.len()
        )));
    }
    if let Some(&(n, v)) = points.iter().find(|&&(_, v)| !(v > T::zero()) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "rate fit needs positive finite values; got {v} at N = {n}"
        )));
    }
    let m = T::of_usize(points.len());
    let xs: Vec<T> = points.iter().map(|&(n, _)| T::of_usize(n).ln()).collect();
    let ys: Vec<T> = points.iter().map(|&(_, v)| v.ln()).collect();
    let x_bar = xs.iter().copied().sum::<T>() / m;
    let y_bar = ys.iter().copied().sum::<T>() / m;
    let sxx = xs.iter().map(|&x| (x - x_bar) * (x - x_bar)).sum::<T>();
    let sxy = xs.iter().zip(&ys).map(|(&x, &y)| (x - x_bar) * (y - y_bar)).sum::<T>();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let ssr = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<T>();
    let dof = points.len().saturating_sub(2);
    let stderr_slope = if dof == 0 {
        T::zero()
    } else {
        (ssr / T::of_usize(dof) / sxx).max(T::zero()).sqrt()
    };
    Ok(RateFit { slope, intercept, stderr_slope })
}

/// One point of the rescaled trace `N^{1/d}·V̂_N`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KappaPoint<T> {
    pub n: usize,
    pub rescaled: T,
    pub ci_lo: T,
    pub ci_hi: T,
}

/// The rescaled trace plus its stabilization diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct KappaTrace<T> {
    pub points: Vec<KappaPoint<T>>,
    /// Largest relative step between consecutive entries of the last three
    /// schedule points; small once the limiting constant has stabilized.
    pub max_last3_rel_change: T,
}

/// Rescales an existing suite of summaries into the `N^{1/d}·V̂_N` trace.
pub fn kappa_trace_from_summaries<T: Real>(
    d: usize,
    summaries: &[NSummary<T>],
) -> Result<KappaTrace<T>> {
    if summaries.len() < 3 {
        return Err(Error::IncompleteData(format!(
            "stabilization diagnostic needs ≥ 3 sample sizes, got {}",
            summaries.len()
        )));
    }
    let inv_d = T::one() / T::of_usize(d);
    let points: Vec<KappaPoint<T>> = summaries
        .iter()
        .map(|s| {
            let scale = T::of_usize(s.n).powf(inv_d);
            KappaPoint {
                n: s.n,
                rescaled: scale * s.v_hat,
                ci_lo: scale * s.ci_lo,
                ci_hi: scale * s.ci_hi,
            }
        })
        .collect();
    let tail = &points[points.len() - 3..];
    let mut max_change = T::zero();
    for pair in tail.windows(2) {
        let prev = pair[0].rescaled;
        let step = if prev == T::zero() {
            T::infinity()
        } else {
            ((pair[1].rescaled - prev) / prev).abs()
        };
        max_change = max_change.max(step);
    }
    Ok(KappaTrace { points, max_last3_rel_change: max_change })
}

/// Runs a uniform-cube suite and returns the rescaled trace watching the
/// limiting constant of the `N^{-1/d}` rate.
pub fn kappa_unif_trace<T: Real>(
    p: T,
    d: usize,
    norm: Norm,
    n_schedule: &[usize],
    replications: usize,
    master_seed: u64,
    solver: SolverChoice,
) -> Result<KappaTrace<T>> {
    let spec = ExperimentSpec {
        measure: ModelMeasure::unit_uniform(d),
        p,
        norm,
        n_values: n_schedule.to_vec(),
        replications,
        master_seed,
        solver,
    };
    let summaries = v_rand_estimate(&spec)?;
    kappa_trace_from_summaries(d, &summaries)
}

/// A codebook of `n` points and its empirical quantization error.
#[derive(Debug, Clone, Serialize)]
pub struct QuantizerResult<T: Real> {
    pub codebook: Vec<Point<T>>,
    pub v_opt: T,
}

fn nearest_code<T: Real>(x: &[T], codebook: &[Point<T>], norm: Norm) -> (usize, T) {
    let mut best = 0usize;
    let mut best_d = T::infinity();
    for (c, code) in codebook.iter().enumerate() {
        let dist = norm.distance(x, code.coords());
        if dist < best_d {
            best_d = dist;
            best = c;
        }
    }
    (best, best_d)
}

fn coordinate_median<T: Real>(mut values: Vec<T>) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite sample coordinates"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / T::of(2.0)
    }
}

/// Minimizes the cluster's `p`-distortion along one coordinate by
/// golden-section search; the objective is convex in each coordinate for
/// every norm, so the 1-D restriction is unimodal.
fn golden_coordinate<T: Real>(
    cloud: &[Point<T>],
    members: &[usize],
    center: &mut Vec<T>,
    axis: usize,
    p: T,
    norm: Norm,
) {
    let mut lo = T::infinity();
    let mut hi = -T::infinity();
    for &i in members {
        let v = cloud[i].coords()[axis];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        center[axis] = lo;
        return;
    }
    let objective = |t: T, center: &mut Vec<T>| {
        center[axis] = t;
        members
            .iter()
            .map(|&i| norm.distance(cloud[i].coords(), center).powf(p))
            .sum::<T>()
    };
    let gr = T::of(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let mut fc = objective(c, center);
    let mut fd = objective(d, center);
    let tol = T::of(1e-10) * (T::one() + lo.abs() + hi.abs());
    for _ in 0..120 {
        if b - a <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = objective(c, center);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = objective(d, center);
        }
    }
    center[axis] = (a + b) / T::of(2.0);
}

/// Lloyd-type alternating minimization for the optimal `n`-point quantizer
/// of `measure` on a fixed sample cloud.
///
/// Assignment sends each sample to its nearest codepoint (ties to the
/// lowest index); the update step uses the closed-form centroid where one
/// exists (mean for `p = 2` under `ℓ2`, coordinatewise median for `p = 1`
/// under `ℓ1`) and coordinatewise golden-section descent otherwise. A
/// cluster left empty is reseeded at the sample farthest from the current
/// codebook. Best of `restarts` random initializations wins.
pub fn optimal_quantizer<T: Real>(
    measure: &ModelMeasure<T>,
    n: usize,
    p: T,
    norm: Norm,
    sample_size: usize,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<QuantizerResult<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("codebook needs at least one point".into()));
    }
    if sample_size < 100 * n {
        return Err(Error::InvalidInput(format!(
            "sample size {sample_size} is below 100·N = {}",
            100 * n
        )));
    }
    if restarts == 0 || iters == 0 {
        return Err(Error::InvalidInput("need ≥ 1 restart and ≥ 1 iteration".into()));
    }
    if !p.is_finite() || p < T::one() {
        return Err(Error::Domain(format!("exponent p = {p} must satisfy p ≥ 1")));
    }
    let d = measure.dim();
    let cloud = measure.sample(sample_size, rng::mix(seed, &[tag::LLOYD_CLOUD]));
    let s_t = T::of_usize(sample_size);

    let distortion = |codebook: &[Point<T>]| -> T {
        cloud
            .iter()
            .map(|x| nearest_code(x.coords(), codebook, norm).1.powf(p))
            .sum::<T>()
            / s_t
    };

    let mut best: Option<(T, Vec<Point<T>>)> = None;
    for restart in 0..restarts {
        let mut rng = rng::stream(seed, &[tag::LLOYD_INIT, restart as u64]);
        // Partial Fisher–Yates: n distinct cloud indices.
        let mut order: Vec<usize> = (0..sample_size).collect();
        let mut codebook: Vec<Point<T>> = (0..n)
            .map(|i| {
                let j = rand::RngExt::random_range(&mut rng, i..sample_size);
                order.swap(i, j);
                cloud[order[i]].clone()
            })
            .collect();

        for _ in 0..iters {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (i, x) in cloud.iter().enumerate() {
                members[nearest_code(x.coords(), &codebook, norm).0].push(i);
            }
            for c in 0..n {
                if !members[c].is_empty() {
                    continue;
                }
                // Reseed at the sample farthest from the current codebook.
                let (far, _) = cloud
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, nearest_code(x.coords(), &codebook, norm).1))
                    .fold((0usize, -T::one()), |acc, (i, dist)| {
                        if dist > acc.1 {
                            (i, dist)
                        } else {
                            acc
                        }
                    });
                codebook[c] = cloud[far].clone();
                members[c] = vec![far];
            }
            let two = T::of(2.0);
            for c in 0..n {
                let cluster = &members[c];
                let mut center: Vec<T> = codebook[c].coords().to_vec();
                if p == two && norm == Norm::L2 {
                    for axis in 0..d {
                        center[axis] = cluster
                            .iter()
                            .map(|&i| cloud[i].coords()[axis])
                            .sum::<T>()
                            / T::of_usize(cluster.len());
                    }
                } else if p == T::one() && norm == Norm::L1 {
                    for axis in 0..d {
                        center[axis] = coordinate_median(
                            cluster.iter().map(|&i| cloud[i].coords()[axis]).collect(),
                        );
                    }
                } else {
                    for axis in 0..d {
                        golden_coordinate(&cloud, cluster, &mut center, axis, p, norm);
                    }
                }
                codebook[c] = Point::new(center)?;
            }
        }
        let value = distortion(&codebook);
        let better = match &best {
            None => true,
            Some((b, _)) => value < *b,
        };
        if better {
            best = Some((value, codebook));
        }
    }
    let (dist_p, codebook) = best.expect("at least one restart ran");
    Ok(QuantizerResult { codebook, v_opt: dist_p.powf(T::one() / p) })
}

/// Per-replication CSV with schema
/// `measure_id,p,norm,N,rep,rho_p_pow_p,lower,upper,seed`.
pub fn replication_csv<T: Real>(
    measure_id: &str,
    p: T,
    norm: Norm,
    summaries: &[NSummary<T>],
) -> String {
    let mut out = String::from("measure_id,p,norm,N,rep,rho_p_pow_p,lower,upper,seed\n");
    for summary in summaries {
        for r in &summary.records {
            out.push_str(&format!(
                "{measure_id},{p},{norm},{},{},{},{},{},{}\n",
                r.n, r.rep, r.rho_p_pow_p, r.lower, r.upper, r.seed
            ));
        }
    }
    out
}

/// Summary CSV with schema
/// `measure_id,p,norm,N,V_hat,ci_lo,ci_hi,rescaled`, where `rescaled` is
/// `N^{1/d}·V̂_N`.
pub fn summary_csv<T: Real>(
    measure_id: &str,
    p: T,
    norm: Norm,
    d: usize,
    summaries: &[NSummary<T>],
) -> String {
    let mut out = String::from("measure_id,p,norm,N,V_hat,ci_lo,ci_hi,rescaled\n");
    let inv_d = T::one() / T::of_usize(d);
    for s in summaries {
        let rescaled = T::of_usize(s.n).powf(inv_d) * s.v_hat;
        out.push_str(&format!(
            "{measure_id},{p},{norm},{},{},{},{},{rescaled}\n",
            s.n, s.v_hat, s.ci_lo, s.ci_hi
        ));
    }
    out
}
