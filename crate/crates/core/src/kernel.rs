//! Finite-state transition kernels and the contraction / ergodic
//! coefficient calculus.
//!
//! Continuous state spaces are discretized to a finite strictly increasing
//! grid, so the total-variation supremum over Borel sets is exactly the
//! half-L1 distance between kernel rows, and every coefficient below is
//! computed exactly (up to f64 rounding).

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;

/// Row sums may drift from 1 by at most this much; construction fails
/// loudly beyond it because decompositions amplify kernel error over n
/// steps.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Ordered list of real state values.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    points: Vec<f64>,
}

impl StateGrid {
    /// Builds a grid; points must be finite, nonempty, strictly increasing.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid);
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid);
        }
        Ok(StateGrid { points })
    }

    /// Uniform lattice with `count` points from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 1 || !(lo < hi) && count > 1 {
            return Err(Error::InvalidGrid);
        }
        if count == 1 {
            return StateGrid::new(vec![lo]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        StateGrid::new((0..count).map(|j| lo + j as f64 * step).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> f64 {
        self.points[idx]
    }

    /// Index of the grid point nearest to `x` (ties go to the lower index).
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (j, &p) in self.points.iter().enumerate() {
            let d = fmath::abs(p - x);
            if d < dist {
                dist = d;
                best = j;
            }
        }
        best
    }
}

/// One-step transition matrix on a state grid; rows are source states.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticKernel {
    grid: Arc<StateGrid>,
    rows: Vec<f64>, // row-major, len = dim * dim
    dim: usize,
}

fn same_grid(a: &Arc<StateGrid>, b: &Arc<StateGrid>) -> bool {
    Arc::ptr_eq(a, b) || a.points() == b.points()
}

impl StochasticKernel {
    /// Validates non-negativity and row sums within [`ROW_SUM_TOL`]. Rows
    /// are stored exactly as given (serialization round-trips must be
    /// bit-identical); builders normalize before construction.
    pub fn new(grid: Arc<StateGrid>, rows: Vec<f64>) -> Result<Self> {
        let dim = grid.len();
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch);
        }
        for r in 0..dim {
            let row = &rows[r * dim..(r + 1) * dim];
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(Error::NotStochastic { row: r, sum: f64::NAN });
            }
            let s = fmath::sum(row.iter().copied());
            if fmath::abs(s - 1.0) > ROW_SUM_TOL {
                return Err(Error::NotStochastic { row: r, sum: s });
            }
        }
        Ok(StochasticKernel { grid, rows, dim })
    }

    /// Divides every row by its compensated sum, then validates. The
    /// stored sums end up within one epsilon of 1.
    pub fn new_normalized(grid: Arc<StateGrid>, rows: Vec<f64>) -> Result<Self> {
        let dim = grid.len();
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch);
        }
        let mut rows = rows;
        for r in 0..dim {
            let row = &mut rows[r * dim..(r + 1) * dim];
            let s = fmath::sum(row.iter().copied());
            if s > 0.0 && s != 1.0 {
                for p in row.iter_mut() {
                    *p /= s;
                }
            }
        }
        StochasticKernel::new(grid, rows)
    }

    /// Kernel whose every row equals `row` (one-step forgetting).
    pub fn from_common_row(grid: Arc<StateGrid>, row: &[f64]) -> Result<Self> {
        let dim = grid.len();
        if row.len() != dim {
            return Err(Error::DimensionMismatch);
        }
        let mut rows = Vec::with_capacity(dim * dim);
        for _ in 0..dim {
            rows.extend_from_slice(row);
        }
        StochasticKernel::new_normalized(grid, rows)
    }

    /// Identity kernel (point mass stays put).
    pub fn identity(grid: Arc<StateGrid>) -> Self {
        let dim = grid.len();
        let mut rows = vec![0.0; dim * dim];
        for j in 0..dim {
            rows[j * dim + j] = 1.0;
        }
        StochasticKernel { grid, rows, dim }
    }

    pub fn grid(&self) -> &Arc<StateGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x * self.dim..(x + 1) * self.dim]
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.rows[x * self.dim + y]
    }

    pub fn rows_flat(&self) -> &[f64] {
        &self.rows
    }

    /// `(Kh)(x) = sum_y K(x,y) h(y)` for every grid point x.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        debug_assert_eq!(h.len(), self.dim);
        (0..self.dim)
            .map(|x| dot(self.row(x), h))
            .collect()
    }

    /// Push a distribution forward one step: `(muK)(y) = sum_x mu(x) K(x,y)`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        debug_assert_eq!(mu.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for x in 0..self.dim {
            let w = mu[x];
            if w == 0.0 {
                continue;
            }
            let row = self.row(x);
            for y in 0..self.dim {
                out[y] += w * row[y];
            }
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Dobrushin contraction coefficient: the maximum over ordered row pairs of
/// the half-L1 distance, which on a finite grid equals the total-variation
/// supremum over Borel sets. Exhaustive O(dim^3) pair scan.
pub fn dobrushin_delta(kernel: &StochasticKernel) -> f64 {
    let dim = kernel.dim();
    let mut worst = 0.0_f64;
    for a in 0..dim {
        for b in (a + 1)..dim {
            let ra = kernel.row(a);
            let rb = kernel.row(b);
            let mut l1 = 0.0;
            for y in 0..dim {
                l1 += fmath::abs(ra[y] - rb[y]);
            }
            worst = worst.max(0.5 * l1);
        }
    }
    worst
}

/// Contraction coefficient over a restricted source-state set: the chain
/// may never occupy parts of the ambient grid, and contraction bounds
/// concern the states it can actually reach.
pub fn dobrushin_delta_restricted(kernel: &StochasticKernel, allowed: &[bool]) -> f64 {
    let dim = kernel.dim();
    debug_assert_eq!(allowed.len(), dim);
    let mut worst = 0.0_f64;
    for a in 0..dim {
        if !allowed[a] {
            continue;
        }
        for b in (a + 1)..dim {
            if !allowed[b] {
                continue;
            }
            let ra = kernel.row(a);
            let rb = kernel.row(b);
            let mut l1 = 0.0;
            for y in 0..dim {
                l1 += fmath::abs(ra[y] - rb[y]);
            }
            worst = worst.max(0.5 * l1);
        }
    }
    worst
}

/// Oscillation of a grid function: max minus min.
pub fn oscillation(h: &[f64]) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    fmath::max_of(h) - fmath::min_of(h)
}

/// Two-step composition `(K1 K2)(x, .)`; product rows drifting from sum 1
/// within the construction tolerance are re-normalized, anything worse is
/// an error.
pub fn compose(k1: &StochasticKernel, k2: &StochasticKernel) -> Result<StochasticKernel> {
    if !same_grid(k1.grid(), k2.grid()) {
        return Err(Error::GridMismatch);
    }
    let dim = k1.dim();
    let mut rows = vec![0.0; dim * dim];
    for x in 0..dim {
        let rx = k1.row(x);
        for z in 0..dim {
            let w = rx[z];
            if w == 0.0 {
                continue;
            }
            let rz = k2.row(z);
            let out = &mut rows[x * dim..(x + 1) * dim];
            for y in 0..dim {
                out[y] += w * rz[y];
            }
        }
    }
    for r in 0..dim {
        let row = &mut rows[r * dim..(r + 1) * dim];
        let s = fmath::sum(row.iter().copied());
        if fmath::abs(s - 1.0) > ROW_SUM_TOL {
            return Err(Error::NotStochastic { row: r, sum: s });
        }
        if s != 1.0 {
            for p in row.iter_mut() {
                *p /= s;
            }
        }
    }
    StochasticKernel::new(Arc::clone(k1.grid()), rows)
}

/// Kernel array for a chain observed at times 1..n+m, with transitions
/// indexed 1..n+m-1. The horizon n and look-ahead m are carried here; only
/// the first n-1 transitions enter the minimal ergodic coefficient.
#[derive(Debug, Clone)]
pub struct KernelSequence {
    grid: Arc<StateGrid>,
    kernels: Vec<Arc<StochasticKernel>>,
    horizon: usize,
    lookahead: usize,
}

impl KernelSequence {
    pub fn new(
        grid: Arc<StateGrid>,
        kernels: Vec<Arc<StochasticKernel>>,
        horizon: usize,
        lookahead: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::HorizonTooShort);
        }
        let expected = (horizon + lookahead).saturating_sub(1);
        if kernels.len() != expected {
            return Err(Error::LengthMismatch { expected, got: kernels.len() });
        }
        if kernels.iter().any(|k| !same_grid(k.grid(), &grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(KernelSequence { grid, kernels, horizon, lookahead })
    }

    /// Constant sequence repeating one kernel.
    pub fn homogeneous(
        kernel: Arc<StochasticKernel>,
        horizon: usize,
        lookahead: usize,
    ) -> Result<Self> {
        let grid = Arc::clone(kernel.grid());
        let len = (horizon + lookahead).saturating_sub(1);
        let kernels = (0..len).map(|_| Arc::clone(&kernel)).collect();
        KernelSequence::new(grid, kernels, horizon, lookahead)
    }

    pub fn grid(&self) -> &Arc<StateGrid> {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn lookahead(&self) -> usize {
        self.lookahead
    }

    pub fn num_steps(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernels(&self) -> &[Arc<StochasticKernel>] {
        &self.kernels
    }

    /// Transition kernel for step i (1-based: maps time i to time i+1).
    pub fn step(&self, i: usize) -> Result<&Arc<StochasticKernel>> {
        if i == 0 || i > self.kernels.len() {
            return Err(Error::IndexOutOfRange { index: i });
        }
        Ok(&self.kernels[i - 1])
    }

    /// Multi-step kernel `K_{i,j} = K_{i,i+1} ... K_{j-1,j}` for
    /// 1 <= i < j <= n.
    pub fn multistep(&self, i: usize, j: usize) -> Result<StochasticKernel> {
        if i == 0 || i >= j || j > self.horizon {
            return Err(Error::IndexOutOfRange { index: j });
        }
        let mut acc = (**self.step(i)?).clone();
        for t in (i + 1)..j {
            acc = compose(&acc, self.step(t)?)?;
        }
        Ok(acc)
    }

    /// Per-step contraction coefficients and the minimal ergodic
    /// coefficient over steps 1..n-1 (the trailing look-ahead steps only
    /// set the final rewards and are excluded).
    ///
    /// Long sequences typically repeat a few distinct kernels, so delta is
    /// computed once per distinct allocation.
    pub fn minimal_ergodic_coefficient(&self) -> Result<CoefficientReport> {
        if self.horizon < 2 {
            return Err(Error::HorizonTooShort);
        }
        let mut memo: BTreeMap<usize, f64> = BTreeMap::new();
        let per_step_delta: Vec<f64> = self
            .kernels
            .iter()
            .map(|k| {
                *memo
                    .entry(Arc::as_ptr(k) as usize)
                    .or_insert_with(|| dobrushin_delta(k))
            })
            .collect();
        let max_delta = fmath::max_of(&per_step_delta[..self.horizon - 1]);
        Ok(CoefficientReport { per_step_delta, alpha_n: 1.0 - max_delta })
    }
}

/// Contraction diagnostics for a kernel sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientReport {
    /// delta(K_{i,i+1}) for every stored step, including the trailing
    /// look-ahead steps (diagnostic only).
    pub per_step_delta: Vec<f64>,
    /// 1 - max delta over steps 1..n-1.
    pub alpha_n: f64,
}

/// `delta(K1 K2) - delta(K1) delta(K2)`; nonpositive iff the product
/// inequality holds for this pair.
pub fn product_inequality_excess(
    k1: &StochasticKernel,
    k2: &StochasticKernel,
) -> Result<f64> {
    let prod = compose(k1, k2)?;
    Ok(dobrushin_delta(&prod) - dobrushin_delta(k1) * dobrushin_delta(k2))
}

/// Max over 1 <= i < j <= n of `delta(K_{i,j}) - (1 - alpha_n)^{j-i}`;
/// nonpositive iff the multi-step bound holds everywhere. Exhaustive, for
/// small sequences.
pub fn multistep_bound_excess(seq: &KernelSequence) -> Result<f64> {
    let report = seq.minimal_ergodic_coefficient()?;
    let base = 1.0 - report.alpha_n;
    let mut worst = f64::NEG_INFINITY;
    for i in 1..seq.horizon() {
        let mut acc = (**seq.step(i)?).clone();
        for j in (i + 1)..=seq.horizon() {
            if j > i + 1 {
                acc = compose(&acc, seq.step(j - 1)?)?;
            }
            let bound = fmath::powi(base, (j - i) as u32);
            worst = worst.max(dobrushin_delta(&acc) - bound);
        }
    }
    Ok(worst)
}

/// `Osc(K h) - delta(K) Osc(h)`; nonpositive iff the oscillation
/// inequality holds for this pair.
pub fn oscillation_contraction_excess(kernel: &StochasticKernel, h: &[f64]) -> f64 {
    oscillation(&kernel.apply(h)) - dobrushin_delta(kernel) * oscillation(h)
}
