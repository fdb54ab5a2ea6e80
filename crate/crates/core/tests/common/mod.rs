//! Brute-force path-enumeration oracle, independent of the library's
//! sweep-based engine. Everything here recomputes expectations by
//! enumerating full state paths with their probabilities.

use nhmc_core::{ChainLaw, RewardFunctionArray};

/// All positive-probability state paths (index tuples over times
/// 1..n+m) with their probabilities.
pub fn enumerate_paths(law: &ChainLaw) -> Vec<(Vec<usize>, f64)> {
    let g = law.grid().len();
    let len = law.horizon() + law.lookahead();
    let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut stack: Vec<(Vec<usize>, f64)> = (0..g)
        .filter(|&x| law.initial()[x] > 0.0)
        .map(|x| (vec![x], law.initial()[x]))
        .collect();
    while let Some((path, prob)) = stack.pop() {
        if path.len() == len {
            out.push((path, prob));
            continue;
        }
        let t = path.len(); // next transition is step t (1-based)
        let kernel = law.seq().step(t).unwrap();
        let x = *path.last().unwrap();
        for y in 0..g {
            let p = kernel.entry(x, y);
            if p > 0.0 {
                let mut next = path.clone();
                next.push(y);
                stack.push((next, prob * p));
            }
        }
    }
    out
}

/// Total reward of one path.
pub fn path_reward(path: &[usize], rewards: &RewardFunctionArray) -> f64 {
    let m = rewards.lookahead();
    let mut total = 0.0;
    for i in 1..=rewards.horizon() {
        let window: Vec<usize> = (0..=m).map(|d| path[i - 1 + d]).collect();
        total += rewards.eval(i, &window);
    }
    total
}

/// (E[S], Var[S]) by full enumeration.
pub fn oracle_moments(law: &ChainLaw, rewards: &RewardFunctionArray) -> (f64, f64) {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (path, prob) in enumerate_paths(law) {
        let s = path_reward(&path, rewards);
        mean += prob * s;
        second += prob * s * s;
    }
    (mean, (second - mean * mean).max(0.0))
}

/// Marginal distribution at time t (1-based) by enumeration.
pub fn oracle_marginal(law: &ChainLaw, t: usize) -> Vec<f64> {
    let g = law.grid().len();
    let mut out = vec![0.0; g];
    for (path, prob) in enumerate_paths(law) {
        out[path[t - 1]] += prob;
    }
    out
}

/// E[Z_i] per period by enumeration.
pub fn oracle_period_means(law: &ChainLaw, rewards: &RewardFunctionArray) -> Vec<f64> {
    let m = rewards.lookahead();
    let mut means = vec![0.0; rewards.horizon()];
    for (path, prob) in enumerate_paths(law) {
        for i in 1..=rewards.horizon() {
            let window: Vec<usize> = (0..=m).map(|d| path[i - 1 + d]).collect();
            means[i - 1] += prob * rewards.eval(i, &window);
        }
    }
    means
}

/// Value-to-go V_i(x) = E[sum_{j=i+1-m}^n Z_j | X_i = x] by enumerating
/// the suffix paths from (i, x). Returns entries for i = m.max(1)..=n+m.
pub fn oracle_value_to_go(law: &ChainLaw, centered: &RewardFunctionArray) -> Vec<Vec<f64>> {
    let g = law.grid().len();
    let n = law.horizon();
    let m = law.lookahead();
    let mut out = Vec::new();
    for i in m.max(1)..=(n + m) {
        let mut v_i = vec![0.0; g];
        for (x, slot) in v_i.iter_mut().enumerate() {
            *slot = suffix_expectation(law, centered, i, x);
        }
        out.push(v_i);
    }
    out
}

/// E[sum_{j=max(1, i+1-m)}^n Z_j | X_i = x] by suffix enumeration.
fn suffix_expectation(
    law: &ChainLaw,
    rewards: &RewardFunctionArray,
    i: usize,
    x: usize,
) -> f64 {
    let g = law.grid().len();
    let n = law.horizon();
    let m = law.lookahead();
    let len = n + m;
    let mut total = 0.0;
    // Suffix paths: states at times i..=len with the time-i state pinned.
    let mut stack: Vec<(Vec<usize>, f64)> = vec![(vec![x], 1.0)];
    while let Some((path, prob)) = stack.pop() {
        if i - 1 + path.len() == len {
            let j_lo = (i + 1).saturating_sub(m).max(1);
            let mut s = 0.0;
            for j in j_lo..=n {
                if j < i {
                    continue;
                }
                let window: Vec<usize> = (0..=m).map(|d| path[j + d - i]).collect();
                s += rewards.eval(j, &window);
            }
            total += prob * s;
            continue;
        }
        let t = i - 1 + path.len();
        let kernel = law.seq().step(t).unwrap();
        let cur = *path.last().unwrap();
        for y in 0..g {
            let p = kernel.entry(cur, y);
            if p > 0.0 {
                let mut next = path.clone();
                next.push(y);
                stack.push((next, prob * p));
            }
        }
    }
    total
}
