//! Exact-engine results against full path enumeration on small instances.

mod common;

use nhmc_core::decompose::{self, COND_MEAN_TOL};
use nhmc_core::fixtures;
use nhmc_core::montecarlo;

/// Every instance family the oracle sweep covers: 2..=4 states, m in
/// {0, 1}, n + m <= 6, three seeds each.
fn oracle_family() -> Vec<fixtures::InstanceBundle> {
    let mut out = Vec::new();
    for states in 2..=4usize {
        for m in 0..=1usize {
            for n in 1..=(6 - m) {
                for seed in [11u64, 23, 57] {
                    let bundle = fixtures::random_instance(
                        seed ^ ((states * 100 + m * 10 + n) as u64) << 8,
                        states,
                        n,
                        m,
                        1.5,
                    )
                    .unwrap();
                    out.push(bundle);
                }
            }
        }
    }
    out
}

#[test]
fn marginals_match_enumeration() {
    let bundle = fixtures::random_instance(5, 3, 5, 0, 1.0).unwrap();
    let marginals = bundle.law.marginals();
    for t in 1..=5 {
        let oracle = common::oracle_marginal(&bundle.law, t);
        for (a, b) in marginals[t - 1].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn moments_match_enumeration_everywhere() {
    for bundle in oracle_family() {
        let (mean, var) = decompose::moments_exact(&bundle.law, &bundle.rewards).unwrap();
        let (omean, ovar) = common::oracle_moments(&bundle.law, &bundle.rewards);
        assert!(
            (mean - omean).abs() <= 1e-12 * omean.abs().max(1.0),
            "{}: mean {mean} vs {omean}",
            bundle.provenance
        );
        assert!(
            (var - ovar).abs() <= 1e-12 * ovar.abs().max(1.0),
            "{}: var {var} vs {ovar}",
            bundle.provenance
        );
    }
}

#[test]
fn period_means_match_enumeration() {
    for seed in [2u64, 9] {
        for m in 0..=1usize {
            let bundle = fixtures::random_instance(seed, 3, 4, m, 2.0).unwrap();
            let means = decompose::period_means(&bundle.law, &bundle.rewards).unwrap();
            let oracle = common::oracle_period_means(&bundle.law, &bundle.rewards);
            for (a, b) in means.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn value_to_go_matches_suffix_enumeration() {
    for m in 0..=1usize {
        let bundle = fixtures::random_instance(77, 3, 4, m, 1.0).unwrap();
        let report = decompose::decompose(&bundle.law, &bundle.rewards).unwrap();
        let oracle = common::oracle_value_to_go(&bundle.law, &report.centered);
        let marginals = bundle.law.marginals();
        for (pos, v_oracle) in oracle.iter().enumerate() {
            let i = m.max(1) + pos;
            let engine = &report.value_to_go[i - m];
            for x in 0..bundle.law.grid().len() {
                if marginals[i - 1][x] > 0.0 {
                    assert!(
                        (engine[x] - v_oracle[x]).abs() < 1e-10,
                        "m={m} i={i} x={x}: {} vs {}",
                        engine[x],
                        v_oracle[x]
                    );
                }
            }
        }
    }
}

#[test]
fn m0_value_to_go_is_one_step_average_of_next_reward() {
    // n = 2, m = 0: V_1(x) = sum_y K(x,y) f~_2(y).
    let bundle = fixtures::random_instance(3, 2, 2, 0, 1.0).unwrap();
    let report = decompose::decompose(&bundle.law, &bundle.rewards).unwrap();
    let k = bundle.law.seq().step(1).unwrap();
    for x in 0..2 {
        let expect: f64 = (0..2).map(|y| k.entry(x, y) * report.centered.at0(2, y)).sum();
        assert!((report.value_to_go[1][x] - expect).abs() < 1e-12);
    }
}

#[test]
fn pathwise_identity_on_every_enumerated_path() {
    for bundle in oracle_family() {
        let n = bundle.law.horizon();
        let m = bundle.law.lookahead();
        let report = decompose::decompose(&bundle.law, &bundle.rewards).unwrap();
        for (path, _prob) in common::enumerate_paths(&bundle.law) {
            let s = common::path_reward(&path, &report.centered);
            let mut total = report.v_m_on_path(path[0]);
            for i in (1 + m)..=(n + m) {
                let prev = if m == 0 && i == 1 { None } else { Some(path[i - 2]) };
                total += report.mds_value(i, prev, path[i - 1]);
            }
            assert!(
                (s - total).abs() < 1e-10,
                "{}: path {:?}: {s} vs {total}",
                bundle.provenance,
                path
            );
        }
    }
}

#[test]
fn mds_second_moments_match_enumeration() {
    for m in 0..=1usize {
        let bundle = fixtures::random_instance(123, 3, 4, m, 1.0).unwrap();
        let n = bundle.law.horizon();
        let report = decompose::decompose(&bundle.law, &bundle.rewards).unwrap();
        let mut oracle = vec![0.0; n];
        for (path, prob) in common::enumerate_paths(&bundle.law) {
            for i in (1 + m)..=(n + m) {
                let prev = if m == 0 && i == 1 { None } else { Some(path[i - 2]) };
                let d = report.mds_value(i, prev, path[i - 1]);
                oracle[i - 1 - m] += prob * d * d;
            }
        }
        for (a, b) in report.d_second_moments.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "m={m}: {a} vs {b}");
        }
    }
}

#[test]
fn conditional_means_vanish_on_oracle_family() {
    for bundle in oracle_family() {
        let report = decompose::decompose(&bundle.law, &bundle.rewards).unwrap();
        assert!(report.max_conditional_mean_abs < COND_MEAN_TOL, "{}", bundle.provenance);
    }
}

#[test]
fn sampled_path_frequencies_match_enumeration() {
    // 2-state chain, n = 3: compare empirical path frequencies to exact
    // path probabilities at the 4-sigma level.
    let bundle = fixtures::random_instance(900, 2, 3, 0, 1.0).unwrap();
    let replications = 100_000usize;
    let paths = montecarlo::sample_paths(&bundle.law, 4242, replications).unwrap();
    let exact = common::enumerate_paths(&bundle.law);
    let mut counts = vec![0usize; exact.len()];
    for i in 0..replications {
        let p = paths.path(i);
        let idx = exact
            .iter()
            .position(|(states, _)| states.iter().zip(p).all(|(&a, &b)| a == b as usize))
            .expect("sampled path must be enumerated");
        counts[idx] += 1;
    }
    for ((_, prob), &count) in exact.iter().zip(&counts) {
        let expect = replications as f64 * prob;
        let sd = (replications as f64 * prob * (1.0 - prob)).sqrt();
        assert!(
            (count as f64 - expect).abs() < 4.0 * sd.max(1.0),
            "count {count} vs expect {expect}"
        );
    }
}

#[test]
fn sample_moments_match_exact_within_four_se() {
    let bundle = fixtures::random_instance(31, 3, 6, 1, 1.0).unwrap();
    let (mean, var) = decompose::moments_exact(&bundle.law, &bundle.rewards).unwrap();
    let batch =
        montecarlo::sample_totals(&bundle.law, &bundle.rewards, 777, 20_000).unwrap();
    let n = batch.replications() as f64;
    let se_mean = (var / n).sqrt();
    assert!((batch.mean() - mean).abs() <= 4.0 * se_mean);
    let se_var = var * (2.0 / (n - 1.0)).sqrt();
    assert!((batch.variance() - var).abs() <= 4.0 * se_var);
}
