//! Randomized invariants of the public API, exercised through proptest,
//! plus an `f32` instantiation smoke test. Case counts are kept modest —
//! the deterministic unit suites carry the precision checks; these guard
//! the structural laws on inputs nobody hand-picked.

use proptest::prelude::*;

use wqlab::bounds::hr_integral;
use wqlab::dyadic::resample_coupling;
use wqlab::measures::{AxisBox, DiscreteMeasure, ModelMeasure, Norm, Point};
use wqlab::quantize::{rate_fit, two_point_exact};
use wqlab::transport::rho_exact;

fn norms() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L1), Just(Norm::L2), Just(Norm::LInf)]
}

fn coords(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0f64..8.0, d)
}

/// Equal-weight discrete measures with a handful of atoms in `[0, 1)^2`.
fn tiny_measure() -> impl Strategy<Value = DiscreteMeasure<f64>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..4).prop_map(|pts| {
        DiscreteMeasure::empirical(
            pts.into_iter()
                .map(|c| Point::new(c).expect("finite coordinates"))
                .collect(),
        )
        .expect("non-empty point set")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_axioms_hold(
        norm in norms(),
        a in coords(3),
        b in coords(3),
        c in coords(3),
        lambda in -3.0f64..3.0,
    ) {
        let d_ab = norm.distance(&a, &b);
        let d_ba = norm.distance(&b, &a);
        prop_assert!((d_ab - d_ba).abs() < 1e-12, "symmetry");
        prop_assert!(d_ab >= 0.0);
        prop_assert!(norm.distance(&a, &a) == 0.0, "identity");

        let d_ac = norm.distance(&a, &c);
        let d_bc = norm.distance(&b, &c);
        prop_assert!(d_ac <= d_ab + d_bc + 1e-12, "triangle inequality");

        // Absolute homogeneity of the induced magnitude.
        let scaled: Vec<f64> = a.iter().map(|x| lambda * x).collect();
        prop_assert!(
            (norm.magnitude(&scaled) - lambda.abs() * norm.magnitude(&a)).abs() < 1e-10
        );

        // Translation invariance.
        let shift: Vec<f64> = a.iter().zip(&c).map(|(x, s)| x + s).collect();
        let shifted_b: Vec<f64> = b.iter().zip(&c).map(|(x, s)| x + s).collect();
        prop_assert!((norm.distance(&shift, &shifted_b) - d_ab).abs() < 1e-10);
    }

    #[test]
    fn box_mass_is_additive_over_dyadic_children(
        level in 0u32..3,
        seed_values in prop::collection::vec(0.01f64..4.0, 8),
        cell_index in prop::collection::vec(0u32..8, 3),
    ) {
        // A valid level-1 density in 3d: normalize 8 random cell values.
        let cell_volume = 0.125;
        let total: f64 = seed_values.iter().sum::<f64>() * cell_volume;
        let values: Vec<f64> = seed_values.iter().map(|v| v / total).collect();
        let measure = ModelMeasure::piecewise_constant(1, 3, values).expect("valid density");

        let side = 1u32 << level;
        let index: Vec<u32> = cell_index.iter().map(|i| i % side).collect();
        let cell = AxisBox::unit_cube(3).dyadic_cell(level, &index);
        let whole = measure.box_mass(&cell).expect("mass of a dyadic cell");

        let mut children_sum = 0.0;
        for mask in 0..8u32 {
            let child_index: Vec<u32> = index
                .iter()
                .enumerate()
                .map(|(axis, &i)| (i << 1) | ((mask >> (2 - axis)) & 1))
                .collect();
            let child = AxisBox::unit_cube(3).dyadic_cell(level + 1, &child_index);
            children_sum += measure.box_mass(&child).expect("child mass");
        }
        prop_assert!((whole - children_sum).abs() < 1e-12, "{whole} vs {children_sum}");
    }

    #[test]
    fn transport_distance_is_a_symmetric_metric_monotone_in_p(
        mu in tiny_measure(),
        nu in tiny_measure(),
        norm in norms(),
        p_low in 1.0f64..2.5,
        gap in 0.1f64..1.5,
    ) {
        let (forward, _) = rho_exact(&mu, &nu, p_low, norm).expect("solvable");
        let (backward, _) = rho_exact(&nu, &mu, p_low, norm).expect("solvable");
        prop_assert!((forward - backward).abs() < 1e-9, "symmetry");
        prop_assert!(forward >= 0.0);

        let (self_dist, _) = rho_exact(&mu, &mu, p_low, norm).expect("solvable");
        prop_assert!(self_dist.abs() < 1e-9, "identity of indiscernibles (easy half)");

        // For probability measures the cost is a p-norm of the coupling:
        // nondecreasing in p.
        let (higher, _) = rho_exact(&mu, &nu, p_low + gap, norm).expect("solvable");
        prop_assert!(forward <= higher + 1e-9, "p-monotonicity: {forward} vs {higher}");
    }

    #[test]
    fn hr_integral_is_invariant_under_uniform_refinement(
        raw in prop::collection::vec(0.0f64..5.0, 4),
        p in 1.0f64..1.95,
    ) {
        // Level-1 density in 2d from 4 random values (mass-normalized;
        // degenerate all-zero draws are skipped).
        let total: f64 = raw.iter().sum::<f64>() * 0.25;
        prop_assume!(total > 1e-6);
        let values: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let coarse = ModelMeasure::piecewise_constant(1, 2, values.clone()).expect("valid");

        // The same function on the level-2 grid: axis 0 is the slow index,
        // fine index (i0, i1) inherits coarse cell (i0 >> 1, i1 >> 1).
        let mut fine_values = vec![0.0; 16];
        for i0 in 0..4usize {
            for i1 in 0..4usize {
                fine_values[i0 * 4 + i1] = values[(i0 >> 1) * 2 + (i1 >> 1)];
            }
        }
        let fine = ModelMeasure::piecewise_constant(2, 2, fine_values).expect("valid");

        let coarse_v = hr_integral(&coarse, p).expect("closed form");
        let fine_v = hr_integral(&fine, p).expect("closed form");
        prop_assert!(
            (coarse_v - fine_v).abs() < 1e-9 * (1.0 + coarse_v.abs()),
            "{coarse_v} vs {fine_v}"
        );
    }

    #[test]
    fn rate_fit_recovers_planted_power_laws(
        slope in -1.0f64..1.0,
        scale in 0.1f64..10.0,
    ) {
        let points: Vec<(usize, f64)> = (3..10)
            .map(|k| {
                let n = 1usize << k;
                (n, scale * (n as f64).powf(slope))
            })
            .collect();
        let fit = rate_fit(&points).expect("well-posed fit");
        prop_assert!((fit.slope - slope).abs() < 1e-9, "{} vs {slope}", fit.slope);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-8);
        prop_assert!(fit.stderr_slope < 1e-7);
    }

    #[test]
    fn two_point_oracle_is_linear_in_distance_and_symmetric_in_weight(
        n in 1usize..200,
        p in 1.0f64..3.0,
        w in 0.0f64..1.0,
        dist in 0.0f64..10.0,
    ) {
        let base = two_point_exact(n, p, w, 1.0).expect("in range");
        let scaled = two_point_exact(n, p, w, dist).expect("in range");
        prop_assert!((scaled - dist * base).abs() < 1e-12 * (1.0 + dist));

        let mirrored = two_point_exact(n, p, 1.0 - w, 1.0).expect("in range");
        prop_assert!((base - mirrored).abs() < 1e-10, "{base} vs {mirrored}");
    }

    #[test]
    fn resampling_to_the_observed_histogram_changes_nothing(
        raw_points in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..24),
        seed in any::<u64>(),
    ) {
        let measure: ModelMeasure<f64> = ModelMeasure::unit_uniform(2);
        let points: Vec<Point<f64>> = raw_points
            .into_iter()
            .map(|c| Point::new(c).expect("finite"))
            .collect();
        // The level-1 grid of 4 cells; targets = the observed counts.
        let unit = AxisBox::unit_cube(2);
        let cells: Vec<AxisBox<f64>> = (0..4u32)
            .map(|k| unit.dyadic_cell(1, &[k >> 1, k & 1]))
            .collect();
        let mut targets = vec![0usize; 4];
        for pt in &points {
            let idx = cells
                .iter()
                .position(|c| c.contains(pt.coords()))
                .expect("point in some cell");
            targets[idx] += 1;
        }
        let (resampled, mismatches) =
            resample_coupling(&points, &cells, &targets, &measure, seed).expect("coupled");
        prop_assert_eq!(mismatches, 0);
        prop_assert_eq!(resampled.len(), points.len());
        for (a, b) in resampled.iter().zip(&points) {
            prop_assert_eq!(a.coords(), b.coords());
        }
    }

    #[test]
    fn sampling_is_seed_deterministic(
        n in 1usize..64,
        seed in any::<u64>(),
    ) {
        let measure: ModelMeasure<f64> = ModelMeasure::unit_uniform(3);
        let first = measure.sample(n, seed);
        let second = measure.sample(n, seed);
        prop_assert_eq!(first.len(), n);
        for (a, b) in first.iter().zip(&second) {
            prop_assert_eq!(a.coords(), b.coords());
        }
    }
}

// The numeric kernels are generic over the scalar; a coarse end-to-end pass
// in single precision guards the generic bounds from regressing to
// f64-only.
#[test]
fn single_precision_instantiation_works_end_to_end() {
    let kappa = wqlab::bounds::kappa_cube::<f32>(1.0, 3, Norm::LInf).unwrap();
    assert!((kappa - 7.65685).abs() < 1e-3, "{kappa}");

    let mu: DiscreteMeasure<f32> = DiscreteMeasure::empirical(vec![
        Point::new(vec![0.0f32, 0.0]).unwrap(),
        Point::new(vec![1.0, 0.0]).unwrap(),
    ])
    .unwrap();
    let nu: DiscreteMeasure<f32> =
        DiscreteMeasure::dirac(Point::new(vec![0.5f32, 0.0]).unwrap());
    let (rho, _) = rho_exact(&mu, &nu, 1.0f32, Norm::L2).unwrap();
    assert!((rho - 0.5).abs() < 1e-6, "{rho}");

    let unif: ModelMeasure<f32> = ModelMeasure::unit_uniform(3);
    assert_eq!(hr_integral(&unif, 1.0f32).unwrap(), 1.0);
    let v = two_point_exact::<f32>(2, 1.0, 0.5, 1.0).unwrap();
    assert!((v - 0.25).abs() < 1e-6);
}
