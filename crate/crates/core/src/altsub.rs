//! Online selection of an alternating subsequence from i.i.d. uniform
//! observations, reconstructed as a threshold-policy dynamic program.
//!
//! States live on [0, 1] in reflected coordinates: after accepting an
//! observation y the state becomes 1 - y, so "accept iff y >= g_k(x)"
//! covers both rising and falling phases with one threshold family. The
//! value recursion over remaining observations k is
//!
//! `u_k(x) = E[ max{u_{k-1}(x), 1(y >= x) (1 + u_{k-1}(1 - y))} ]`,
//!
//! i.e. accept a feasible observation exactly when doing so beats
//! rejecting it, and `g_k(x)` is the smallest grid point where acceptance
//! wins. Two structural gates guard the reconstruction: g_k(x) = x on
//! [1/3, 1] for every k, and g_k >= 1/6 for k >= 3; violations beyond
//! twice the grid step abort the solve.
//!
//! The grid is the uniform lattice {j / (P-1)} including both endpoints,
//! which is closed under the reflection j -> P-1-j, so 1 - y never needs
//! interpolation; integrals use the matching cell weights (half cells at
//! the endpoints).

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::chain::{ChainLaw, RewardFunctionArray};
use crate::error::{Error, Result};
use crate::fmath;
use crate::kernel::{dobrushin_delta_restricted, KernelSequence, StateGrid, StochasticKernel};
use crate::montecarlo::u64_to_unit_f64;

/// Default lattice: 401 points, step 1/400.
pub const DEFAULT_GRID_POINTS: usize = 401;

/// Optimal threshold functions and value functions on the [0, 1] lattice.
#[derive(Debug, Clone)]
pub struct AltSubSolution {
    grid: Arc<StateGrid>,
    pub step: f64,
    /// g_k on the grid for k = 1..=horizon.
    pub thresholds: Vec<Vec<f64>>,
    threshold_indices: Vec<Vec<u32>>,
    /// u_k on the grid for k = 0..=horizon (expected additional
    /// selections with k observations left).
    pub values: Vec<Vec<f64>>,
    /// Largest K such that g_k(x) = x held exactly on every grid point of
    /// [1/3, 1] for all k <= K.
    pub identity_exact_through: usize,
    /// Min over x and k >= 3 of g_k(x).
    pub min_threshold_from_k3: f64,
}

impl AltSubSolution {
    pub fn grid(&self) -> &Arc<StateGrid> {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.thresholds.len()
    }

    pub fn threshold_index(&self, k: usize, x_idx: usize) -> usize {
        self.threshold_indices[k - 1][x_idx] as usize
    }
}

/// Solves the threshold recursion for horizons 1..=n on a lattice of the
/// given size. Aborts if either structural gate fails beyond 2 * step.
pub fn solve_alt_thresholds(horizon: usize, grid_points: usize) -> Result<AltSubSolution> {
    if horizon == 0 {
        return Err(Error::InvalidModel("horizon must be at least 1"));
    }
    if grid_points < 7 {
        return Err(Error::InvalidModel("grid too coarse for the threshold recursion"));
    }
    let p = grid_points;
    let grid = Arc::new(StateGrid::uniform(0.0, 1.0, p)?);
    let step = 1.0 / (p - 1) as f64;
    // Cell weights: half cells at the endpoints.
    let weight = |l: usize| if l == 0 || l == p - 1 { 0.5 * step } else { step };
    let reflect = |l: usize| p - 1 - l;
    let j_one_third = (0..p).find(|&j| grid.point(j) >= 1.0 / 3.0).unwrap();

    let mut values: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    values.push(vec![0.0; p]);
    let mut thresholds: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut threshold_indices: Vec<Vec<u32>> = Vec::with_capacity(horizon);
    let mut identity_exact_through = 0usize;
    let mut identity_exact = true;
    let mut min_threshold_from_k3 = f64::INFINITY;

    for k in 1..=horizon {
        let u_prev = &values[k - 1];
        // Acceptance value by observation index: 1 + u_{k-1}(1 - y_l),
        // nondecreasing in l because u_{k-1} is nonincreasing.
        let accept_val: Vec<f64> = (0..p).map(|l| 1.0 + u_prev[reflect(l)]).collect();
        // Prefix weights and suffix acceptance mass.
        let mut prefix_w = vec![0.0; p + 1];
        for l in 0..p {
            prefix_w[l + 1] = prefix_w[l] + weight(l);
        }
        let mut suffix_t = vec![0.0; p + 1];
        for l in (0..p).rev() {
            suffix_t[l] = suffix_t[l + 1] + weight(l) * accept_val[l];
        }

        let mut g_idx = vec![0u32; p];
        let mut u_new = vec![0.0; p];
        // Smallest l where acceptance beats rejection; u_prev is
        // nonincreasing in j, so the pointer only moves left.
        let mut a = p;
        for j in 0..p {
            while a > 0 && accept_val[a - 1] >= u_prev[j] {
                a -= 1;
            }
            let idx = a.max(j);
            g_idx[j] = idx as u32;
            u_new[j] = u_prev[j] * prefix_w[idx] + suffix_t[idx];
        }

        // Structural gates.
        for j in j_one_third..p {
            let dev = (g_idx[j] as i64 - j as i64).unsigned_abs() as usize;
            if dev > 0 {
                identity_exact = false;
            }
            if dev > 2 {
                return Err(Error::PropertyViolation(
                    "threshold identity g_k(x) = x fails on [1/3, 1]",
                ));
            }
        }
        if identity_exact {
            identity_exact_through = k;
        }
        if k >= 3 {
            let min_g = g_idx
                .iter()
                .map(|&i| grid.point(i as usize))
                .fold(f64::INFINITY, f64::min);
            min_threshold_from_k3 = min_threshold_from_k3.min(min_g);
            if min_g < 1.0 / 6.0 - 2.0 * step {
                return Err(Error::PropertyViolation(
                    "threshold lower bound g_k >= 1/6 fails for k >= 3",
                ));
            }
        }
        // Monotonicity self-checks that the sweep relies on.
        if u_new.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(Error::PropertyViolation("value function not monotone in the state"));
        }
        if u_new.iter().zip(u_prev).any(|(nv, pv)| nv + 1e-12 < *pv) {
            return Err(Error::PropertyViolation("value function decreased in the horizon"));
        }

        thresholds.push(g_idx.iter().map(|&i| grid.point(i as usize)).collect());
        threshold_indices.push(g_idx);
        values.push(u_new);
    }

    Ok(AltSubSolution {
        grid,
        step,
        thresholds,
        threshold_indices,
        values,
        identity_exact_through,
        min_threshold_from_k3,
    })
}

/// One-step kernel induced by a threshold vector: from state x, mass
/// g(x) stays put (rejection) and the rest spreads uniformly over the
/// reflected acceptance image [0, 1 - g(x)], snapped to nearest lattice
/// cells.
pub fn kernel_from_threshold_indices(
    grid: &Arc<StateGrid>,
    indices: &[u32],
) -> Result<StochasticKernel> {
    let p = grid.len();
    if indices.len() != p {
        return Err(Error::DimensionMismatch);
    }
    let step = grid.point(1) - grid.point(0);
    let mut rows = vec![0.0; p * p];
    for x in 0..p {
        let g_val = grid.point(indices[x] as usize);
        let width = 1.0 - g_val;
        let row = &mut rows[x * p..(x + 1) * p];
        row[x] += g_val;
        if width > 0.0 {
            for (t, slot) in row.iter_mut().enumerate() {
                let cell_lo = (grid.point(t) - 0.5 * step).max(0.0);
                let cell_hi = (grid.point(t) + 0.5 * step).min(1.0);
                let overlap = (cell_hi.min(width) - cell_lo).max(0.0);
                *slot += overlap;
            }
        }
    }
    StochasticKernel::new_normalized(Arc::clone(grid), rows)
}

/// Builds the selection chain (X_1 = 0, kernels from the thresholds with
/// n - i + 1 observations remaining at step i) and the m = 1 reward
/// `1(X_{i+1} != X_i)` counting accepted observations.
pub fn build_altsub_chain(
    solution: &AltSubSolution,
    horizon: usize,
) -> Result<(ChainLaw, RewardFunctionArray)> {
    if horizon == 0 || horizon > solution.horizon() {
        return Err(Error::InvalidModel("chain horizon exceeds the solved horizon"));
    }
    let grid = Arc::clone(&solution.grid);
    let p = grid.len();
    let mut cache: BTreeMap<&[u32], Arc<StochasticKernel>> = BTreeMap::new();
    let mut kernels = Vec::with_capacity(horizon);
    for i in 1..=horizon {
        let k_remaining = horizon - i + 1;
        let indices = &solution.threshold_indices[k_remaining - 1][..];
        let kernel = match cache.get(indices) {
            Some(k) => Arc::clone(k),
            None => {
                let k = Arc::new(kernel_from_threshold_indices(&grid, indices)?);
                cache.insert(indices, Arc::clone(&k));
                k
            }
        };
        kernels.push(kernel);
    }
    let seq = KernelSequence::new(Arc::clone(&grid), kernels, horizon, 1)?;
    let law = ChainLaw::point_mass(0, seq)?;
    let mut indicator = vec![1.0; p * p];
    for x in 0..p {
        indicator[x * p + x] = 0.0;
    }
    let shared = Arc::new(indicator);
    let tensors = (0..horizon).map(|_| Arc::clone(&shared)).collect();
    let rewards = RewardFunctionArray::new(horizon, 1, p, tensors)?;
    Ok((law, rewards))
}

/// Contraction certificate: per-step delta <= 5/6 + 2 step over the first
/// n-3 steps, hence the minimal ergodic coefficient of the shortened
/// horizon stays above 1/6 - 2 step.
///
/// Deltas are measured over the states reachable at each step: the chain
/// stays below 5/6 until the last two observations, and the ambient grid
/// above that line never carries mass there.
#[derive(Debug, Clone)]
pub struct AltSubAlphaCertificate {
    pub max_delta: f64,
    pub alpha: f64,
    pub steps_checked: usize,
    pub pass: bool,
}

pub fn altsub_alpha_certificate(law: &ChainLaw) -> Result<AltSubAlphaCertificate> {
    let n = law.horizon();
    if n < 4 {
        return Err(Error::HorizonTooShort);
    }
    let step = law.grid().point(1) - law.grid().point(0);
    let marginals = law.marginals();
    let mut max_delta = 0.0_f64;
    let last = n - 3;
    for i in 1..=last {
        let k = law.seq().step(i)?;
        let allowed: Vec<bool> = marginals[i - 1]
            .iter()
            .map(|&p| p > crate::decompose::REACH_TOL)
            .collect();
        max_delta = max_delta.max(dobrushin_delta_restricted(k, &allowed));
    }
    let alpha = 1.0 - max_delta;
    let tol = 2.0 * step;
    Ok(AltSubAlphaCertificate {
        max_delta,
        alpha,
        steps_checked: last,
        pass: max_delta <= 5.0 / 6.0 + tol && alpha >= 1.0 / 6.0 - tol,
    })
}

/// Outcome of simulating the policy on continuous states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyPathOutcome {
    /// Observations accepted (threshold crossings).
    pub accepted: u32,
    /// Steps where the state changed.
    pub state_changes: u32,
}

/// Runs the threshold policy on a stream of uniforms with continuous
/// states (thresholds looked up at the nearest lattice point). Returns
/// both the accept count and the state-change count; they agree on every
/// path because an accepted observation moves the state almost surely.
pub fn simulate_policy_path(
    solution: &AltSubSolution,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PolicyPathOutcome> {
    if horizon == 0 || horizon > solution.horizon() {
        return Err(Error::InvalidModel("horizon exceeds the solved horizon"));
    }
    let p = solution.grid.len();
    let mut x = 0.0_f64;
    let mut accepted = 0u32;
    let mut state_changes = 0u32;
    for i in 1..=horizon {
        let k_remaining = horizon - i + 1;
        let idx = (fmath::round(x * (p - 1) as f64) as usize).min(p - 1);
        let g_val = solution.thresholds[k_remaining - 1][idx];
        let y = u64_to_unit_f64(rng.next_u64());
        if y >= g_val {
            accepted += 1;
            let next = 1.0 - y;
            if next != x {
                state_changes += 1;
            }
            x = next;
        }
    }
    Ok(PolicyPathOutcome { accepted, state_changes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose;
    use crate::kernel::dobrushin_delta;
    use crate::montecarlo::path_rng;

    #[test]
    fn first_threshold_accepts_everything_feasible() {
        let sol = solve_alt_thresholds(1, 101).unwrap();
        for j in 0..101 {
            assert_eq!(sol.threshold_index(1, j), j);
        }
    }

    #[test]
    fn identity_holds_exactly_for_moderate_horizons() {
        let sol = solve_alt_thresholds(60, DEFAULT_GRID_POINTS).unwrap();
        assert!(
            sol.identity_exact_through >= 50,
            "exact through {}",
            sol.identity_exact_through
        );
    }

    #[test]
    fn threshold_floor_for_k_at_least_3() {
        let sol = solve_alt_thresholds(50, DEFAULT_GRID_POINTS).unwrap();
        assert!(sol.min_threshold_from_k3 >= 1.0 / 6.0 - 2.0 * sol.step);
        // The floor is nearly tight at k = 3; for large k the threshold at
        // zero approaches 1 - sqrt(2)/2.
        assert!(sol.min_threshold_from_k3 < 1.0 / 6.0 + 0.01);
        let g0 = sol.thresholds[49][0];
        assert!((g0 - 0.29289).abs() < 0.01, "g_50(0) = {g0}");
    }

    #[test]
    fn values_increase_with_horizon() {
        let sol = solve_alt_thresholds(30, 201).unwrap();
        for k in 1..=30 {
            for j in 0..201 {
                assert!(sol.values[k][j] + 1e-12 >= sol.values[k - 1][j]);
            }
        }
    }

    #[test]
    fn kernel_rows_sum_to_one() {
        let sol = solve_alt_thresholds(10, 101).unwrap();
        let (law, _) = build_altsub_chain(&sol, 10).unwrap();
        for k in law.seq().kernels() {
            for x in 0..law.grid().len() {
                let s: f64 = k.row(x).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reachable_states_bounded_by_five_sixths() {
        let n = 20;
        let sol = solve_alt_thresholds(n, DEFAULT_GRID_POINTS).unwrap();
        let (law, _) = build_altsub_chain(&sol, n).unwrap();
        let marginals = law.marginals();
        // Paths up to time n-2 stay below 5/6 (observations with at least
        // 3 remaining are filtered by the 1/6 floor).
        for (t, mu) in marginals.iter().enumerate().take(n - 1) {
            for (idx, &pr) in mu.iter().enumerate() {
                if pr > decompose::REACH_TOL {
                    assert!(
                        law.grid().point(idx) <= 5.0 / 6.0 + sol.step,
                        "time {} state {}",
                        t + 1,
                        law.grid().point(idx)
                    );
                }
            }
        }
    }

    #[test]
    fn constant_zero_threshold_kernel_has_zero_delta() {
        let grid = Arc::new(StateGrid::uniform(0.0, 1.0, 101).unwrap());
        let k = kernel_from_threshold_indices(&grid, &vec![0u32; 101]).unwrap();
        assert_eq!(dobrushin_delta(&k), 0.0);
    }

    #[test]
    fn alpha_certificate_small_instance() {
        let n = 30;
        let sol = solve_alt_thresholds(n, 201).unwrap();
        let (law, _) = build_altsub_chain(&sol, n).unwrap();
        let cert = altsub_alpha_certificate(&law).unwrap();
        assert!(cert.pass, "{cert:?}");
        assert_eq!(cert.steps_checked, n - 3);
    }

    #[test]
    fn policy_counts_agree_pathwise() {
        let n = 200;
        let sol = solve_alt_thresholds(n, DEFAULT_GRID_POINTS).unwrap();
        for path in 0..200 {
            let mut rng = path_rng(31, path);
            let out = simulate_policy_path(&sol, n, &mut rng).unwrap();
            assert_eq!(out.accepted, out.state_changes);
        }
    }

    #[test]
    fn mean_selection_rate_near_two_minus_sqrt_two() {
        let n = 400;
        let sol = solve_alt_thresholds(n, DEFAULT_GRID_POINTS).unwrap();
        let (law, rewards) = build_altsub_chain(&sol, n).unwrap();
        let (mean, var) = decompose::moments_exact(&law, &rewards).unwrap();
        let rate = mean / n as f64;
        let target = 2.0 - fmath::sqrt(2.0);
        assert!(
            (rate - target).abs() <= 10.0 / n as f64 + 0.01,
            "rate {rate} vs {target}"
        );
        assert!(var > 0.0);
    }
}
