//! Canonical fixtures: the parity cancellation counterexample and seeded
//! random instances for property tests.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{ChainLaw, RewardFunctionArray};
use crate::error::{Error, Result};
use crate::kernel::{KernelSequence, StateGrid, StochasticKernel};
use crate::montecarlo::u64_to_unit_f64;

/// Kernel entries of random instances are floored at this value, keeping
/// the minimal ergodic coefficient bounded away from zero; degenerate
/// regimes get dedicated fixtures instead.
pub const KERNEL_ENTRY_FLOOR: f64 = 0.05;

/// A chain law plus rewards with provenance, ready for the exact engine.
#[derive(Debug, Clone)]
pub struct InstanceBundle {
    pub law: ChainLaw,
    pub rewards: RewardFunctionArray,
    pub provenance: String,
}

/// i.i.d. coordinates with m = 1 rewards `x` on even periods and `-y` on
/// odd ones. Consecutive terms cancel, so S_n is 0 for even n and a single
/// coordinate for odd n, while each summand keeps positive variance: the
/// classical witness that no variance lower bound in terms of per-period
/// variances can exist once rewards look ahead.
pub fn parity_counterexample(horizon: usize, grid: Arc<StateGrid>) -> Result<InstanceBundle> {
    let g = grid.len();
    if g < 2 {
        return Err(Error::InvalidModel("parity counterexample needs >= 2 states"));
    }
    let uniform: Vec<f64> = alloc::vec![1.0 / g as f64; g];
    let kernel = Arc::new(StochasticKernel::from_common_row(Arc::clone(&grid), &uniform)?);
    let seq = KernelSequence::homogeneous(kernel, horizon, 1)?;
    let law = ChainLaw::new(uniform, seq)?;
    let points: Vec<f64> = grid.points().to_vec();
    let rewards = RewardFunctionArray::from_fn(horizon, 1, g, |i, w| {
        if i % 2 == 0 {
            points[w[0]]
        } else {
            -points[w[1]]
        }
    })?;
    Ok(InstanceBundle { law, rewards, provenance: String::from("counterexample") })
}

/// Variance of the coordinate distribution (uniform over the grid), the
/// exact value of Var[S_n] for odd n in the parity fixture.
pub fn parity_coordinate_variance(grid: &StateGrid) -> f64 {
    let g = grid.len() as f64;
    let mean = crate::fmath::sum(grid.points().iter().copied()) / g;
    crate::fmath::sum(grid.points().iter().map(|&x| (x - mean) * (x - mean))) / g
}

fn random_probability_row(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    // Mix a floored uniform component with a random simplex point so every
    // entry stays >= KERNEL_ENTRY_FLOOR after normalization.
    let mut raw: Vec<f64> = (0..len)
        .map(|_| u64_to_unit_f64(rng.next_u64()) + 1e-3)
        .collect();
    let total = crate::fmath::sum(raw.iter().copied());
    let free = 1.0 - len as f64 * KERNEL_ENTRY_FLOOR;
    for p in raw.iter_mut() {
        *p = KERNEL_ENTRY_FLOOR + free * (*p / total);
    }
    raw
}

/// Seeded random kernel without the entry floor (entries >= 1e-3 after
/// normalization keeps rows strictly positive but lets delta approach 1).
pub fn random_kernel(seed: u64, states: usize) -> Result<StochasticKernel> {
    if states < 2 {
        return Err(Error::InvalidModel("random kernel needs >= 2 states"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Arc::new(StateGrid::uniform(0.0, 1.0, states)?);
    let mut rows = Vec::with_capacity(states * states);
    for _ in 0..states {
        let raw: Vec<f64> = (0..states)
            .map(|_| u64_to_unit_f64(rng.next_u64()) + 1e-3)
            .collect();
        let total = crate::fmath::sum(raw.iter().copied());
        rows.extend(raw.into_iter().map(|v| v / total));
    }
    StochasticKernel::new(grid, rows)
}

/// Seeded random kernel sequence (no entry floor), m = 0.
pub fn random_sequence(seed: u64, states: usize, horizon: usize) -> Result<KernelSequence> {
    if horizon < 2 {
        return Err(Error::HorizonTooShort);
    }
    let kernels: Vec<Arc<StochasticKernel>> = (0..horizon - 1)
        .map(|t| random_kernel(seed ^ ((t as u64 + 1) << 32), states).map(Arc::new))
        .collect::<Result<_>>()?;
    let grid = Arc::clone(kernels[0].grid());
    KernelSequence::new(grid, kernels, horizon, 0)
}

/// Seeded random grid function with entries in [-scale, scale].
pub fn random_grid_function(seed: u64, states: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..states)
        .map(|_| (2.0 * u64_to_unit_f64(rng.next_u64()) - 1.0) * scale)
        .collect()
}

/// Seeded random instance: kernels with entry floor 0.05, rewards uniform
/// in [-reward_scale, reward_scale], uniform-ish random initial law.
pub fn random_instance(
    seed: u64,
    states: usize,
    horizon: usize,
    lookahead: usize,
    reward_scale: f64,
) -> Result<InstanceBundle> {
    if states < 2 {
        return Err(Error::InvalidModel("random instance needs >= 2 states"));
    }
    if lookahead > 1 {
        return Err(Error::WindowBlowup { lookahead });
    }
    if states as f64 * KERNEL_ENTRY_FLOOR >= 1.0 {
        return Err(Error::InvalidModel("too many states for the entry floor"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Arc::new(StateGrid::uniform(0.0, 1.0, states)?);
    let num_steps = horizon + lookahead - 1;
    let mut kernels = Vec::with_capacity(num_steps);
    for _ in 0..num_steps {
        let mut rows = Vec::with_capacity(states * states);
        for _ in 0..states {
            rows.extend(random_probability_row(&mut rng, states));
        }
        kernels.push(Arc::new(StochasticKernel::new(Arc::clone(&grid), rows)?));
    }
    let seq = KernelSequence::new(Arc::clone(&grid), kernels, horizon, lookahead)?;
    let law = ChainLaw::new(random_probability_row(&mut rng, states), seq)?;
    let rewards = RewardFunctionArray::from_fn(horizon, lookahead, states, |_, _| {
        (2.0 * u64_to_unit_f64(rng.next_u64()) - 1.0) * reward_scale
    })?;
    Ok(InstanceBundle {
        law,
        rewards,
        provenance: alloc::format!("random(seed={seed})"),
    })
}
