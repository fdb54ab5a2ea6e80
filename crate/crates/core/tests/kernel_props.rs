//! Property tests for the coefficient calculus.

use std::sync::Arc;

use proptest::prelude::*;

use nhmc_core::kernel::{
    compose, dobrushin_delta, multistep_bound_excess, oscillation,
    oscillation_contraction_excess, product_inequality_excess, KernelSequence, StateGrid,
    StochasticKernel,
};

fn arb_kernel(dim: usize) -> impl Strategy<Value = StochasticKernel> {
    prop::collection::vec(0.01..1.0f64, dim * dim).prop_map(move |raw| {
        let grid = Arc::new(StateGrid::uniform(0.0, 1.0, dim).unwrap());
        let mut rows = raw;
        for r in 0..dim {
            let row = &mut rows[r * dim..(r + 1) * dim];
            let s: f64 = row.iter().sum();
            for p in row.iter_mut() {
                *p /= s;
            }
        }
        StochasticKernel::new(grid, rows).unwrap()
    })
}

fn arb_kernel_pair(dim: usize) -> impl Strategy<Value = (StochasticKernel, StochasticKernel)> {
    (
        prop::collection::vec(0.01..1.0f64, dim * dim),
        prop::collection::vec(0.01..1.0f64, dim * dim),
    )
        .prop_map(move |(a, b)| {
            let grid = Arc::new(StateGrid::uniform(0.0, 1.0, dim).unwrap());
            let norm = |raw: Vec<f64>| {
                let mut rows = raw;
                for r in 0..dim {
                    let row = &mut rows[r * dim..(r + 1) * dim];
                    let s: f64 = row.iter().sum();
                    for p in row.iter_mut() {
                        *p /= s;
                    }
                }
                rows
            };
            (
                StochasticKernel::new(Arc::clone(&grid), norm(a)).unwrap(),
                StochasticKernel::new(grid, norm(b)).unwrap(),
            )
        })
}

proptest! {
    #[test]
    fn delta_stays_in_unit_interval(k in arb_kernel(4)) {
        let d = dobrushin_delta(&k);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn product_inequality_holds(pair in arb_kernel_pair(4)) {
        let excess = product_inequality_excess(&pair.0, &pair.1).unwrap();
        prop_assert!(excess <= 1e-12, "excess {excess}");
    }

    #[test]
    fn oscillation_contracts(k in arb_kernel(5), h in prop::collection::vec(-3.0..3.0f64, 5)) {
        let excess = oscillation_contraction_excess(&k, &h);
        prop_assert!(excess <= 1e-12 * oscillation(&h).max(1.0), "excess {excess}");
    }

    #[test]
    fn multistep_bound_holds(pair in arb_kernel_pair(3), k3 in arb_kernel(3)) {
        let grid = Arc::clone(k3.grid());
        let seq = KernelSequence::new(
            grid,
            vec![Arc::new(pair.0), Arc::new(pair.1), Arc::new(k3)],
            4,
            0,
        )
        .unwrap();
        let excess = multistep_bound_excess(&seq).unwrap();
        prop_assert!(excess <= 1e-12, "excess {excess}");
    }

    #[test]
    fn compose_is_associative(pair in arb_kernel_pair(4), k3 in arb_kernel(4)) {
        let left = compose(&compose(&pair.0, &pair.1).unwrap(), &k3).unwrap();
        let right = compose(&pair.0, &compose(&pair.1, &k3).unwrap()).unwrap();
        for (a, b) in left.rows_flat().iter().zip(right.rows_flat()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn delta_zero_iff_rows_identical(k in arb_kernel(3)) {
        let d = dobrushin_delta(&k);
        let rows_identical = (0..3).all(|x| k.row(x) == k.row(0));
        if rows_identical {
            prop_assert!(d == 0.0);
        } else {
            prop_assert!(d > 0.0);
        }
    }
}

#[test]
fn delta_of_random_sequence_respects_entry_floor() {
    // Entry floor on random fixture kernels bounds delta away from 1.
    for seed in 0..10u64 {
        let bundle = nhmc_core::fixtures::random_instance(seed, 5, 4, 1, 1.0).unwrap();
        for k in bundle.law.seq().kernels() {
            let d = dobrushin_delta(k);
            assert!(d <= 1.0 - 5.0 * 0.05 + 1e-12);
        }
    }
}
