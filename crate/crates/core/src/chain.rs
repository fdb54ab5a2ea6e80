//! Chain laws and reward functionals.
//!
//! A [`ChainLaw`] pairs an initial distribution with a kernel sequence; a
//! [`RewardFunctionArray`] holds one reward tensor per period, each a
//! function of the current state and the next `m` states.
//!
//! Periods of long chains usually repeat a handful of distinct reward
//! shapes (a dynamic program's policy levels stabilize), so tensors are
//! reference-counted and mean-centering is carried as per-period scalar
//! shifts instead of rewriting tensors.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::kernel::{KernelSequence, StateGrid};

/// Initial-distribution tolerance; matches the kernel row tolerance.
pub const INITIAL_SUM_TOL: f64 = 1e-12;

/// Law of a temporally non-homogeneous chain on a finite grid.
#[derive(Debug, Clone)]
pub struct ChainLaw {
    initial: Vec<f64>,
    seq: KernelSequence,
}

impl ChainLaw {
    pub fn new(initial: Vec<f64>, seq: KernelSequence) -> Result<Self> {
        if initial.len() != seq.grid().len() {
            return Err(Error::InvalidInitial);
        }
        if initial.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidInitial);
        }
        let s = fmath::sum(initial.iter().copied());
        if fmath::abs(s - 1.0) > INITIAL_SUM_TOL {
            return Err(Error::InvalidInitial);
        }
        let mut initial = initial;
        if s != 1.0 {
            for p in initial.iter_mut() {
                *p /= s;
            }
        }
        Ok(ChainLaw { initial, seq })
    }

    /// Point mass at one grid state.
    pub fn point_mass(state_idx: usize, seq: KernelSequence) -> Result<Self> {
        let dim = seq.grid().len();
        if state_idx >= dim {
            return Err(Error::InvalidInitial);
        }
        let mut initial = alloc::vec![0.0; dim];
        initial[state_idx] = 1.0;
        ChainLaw::new(initial, seq)
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn seq(&self) -> &KernelSequence {
        &self.seq
    }

    pub fn grid(&self) -> &Arc<StateGrid> {
        self.seq.grid()
    }

    pub fn horizon(&self) -> usize {
        self.seq.horizon()
    }

    pub fn lookahead(&self) -> usize {
        self.seq.lookahead()
    }

    /// Marginal distributions at times 1..n+m (forward push of the
    /// initial distribution through the kernels).
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.seq.num_steps() + 1);
        out.push(self.initial.clone());
        for k in self.seq.kernels() {
            let next = k.push_forward(out.last().unwrap());
            out.push(next);
        }
        out
    }
}

/// Per-period reward tensors over `1 + m` grid coordinates.
///
/// Tensors are stored flat in row-major order: with grid size g and
/// look-ahead m, period i's tensor has g^(1+m) entries and
/// `f_i(x_0, ..., x_m)` sits at index `((x_0 * g + x_1) * g + ...) + x_m`.
/// The effective reward for period i is `tensor[i] - shift[i]`.
#[derive(Debug, Clone)]
pub struct RewardFunctionArray {
    horizon: usize,
    lookahead: usize,
    grid_len: usize,
    tensors: Vec<Arc<Vec<f64>>>,
    shifts: Vec<f64>,
    bound: f64,
}

impl RewardFunctionArray {
    pub fn new(
        horizon: usize,
        lookahead: usize,
        grid_len: usize,
        tensors: Vec<Arc<Vec<f64>>>,
    ) -> Result<Self> {
        if tensors.len() != horizon {
            return Err(Error::DimensionMismatch);
        }
        let expected = grid_len
            .checked_pow(1 + lookahead as u32)
            .ok_or(Error::WindowBlowup { lookahead })?;
        for t in &tensors {
            if t.len() != expected {
                return Err(Error::DimensionMismatch);
            }
        }
        let mut arr = RewardFunctionArray {
            horizon,
            lookahead,
            grid_len,
            tensors,
            shifts: alloc::vec![0.0; horizon],
            bound: 0.0,
        };
        arr.bound = arr.compute_bound()?;
        Ok(arr)
    }

    pub fn from_dense(
        horizon: usize,
        lookahead: usize,
        grid_len: usize,
        tensors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        RewardFunctionArray::new(
            horizon,
            lookahead,
            grid_len,
            tensors.into_iter().map(Arc::new).collect(),
        )
    }

    /// Builds tensors by evaluating `f(i, window)` on every grid window;
    /// `i` is the 1-based period and `window` collects 1+m state indices.
    pub fn from_fn(
        horizon: usize,
        lookahead: usize,
        grid_len: usize,
        mut f: impl FnMut(usize, &[usize]) -> f64,
    ) -> Result<Self> {
        let rank = 1 + lookahead;
        let size = grid_len
            .checked_pow(rank as u32)
            .ok_or(Error::WindowBlowup { lookahead })?;
        let mut tensors = Vec::with_capacity(horizon);
        let mut window = alloc::vec![0usize; rank];
        for i in 1..=horizon {
            let mut t = Vec::with_capacity(size);
            for flat in 0..size {
                let mut rem = flat;
                for d in (0..rank).rev() {
                    window[d] = rem % grid_len;
                    rem /= grid_len;
                }
                t.push(f(i, &window));
            }
            tensors.push(Arc::new(t));
        }
        RewardFunctionArray::new(horizon, lookahead, grid_len, tensors)
    }

    fn compute_bound(&self) -> Result<f64> {
        // Tensors repeat across periods; scan each distinct allocation once.
        let mut seen: Vec<(usize, f64, f64)> = Vec::new();
        let mut bound = 0.0_f64;
        for (t, &shift) in self.tensors.iter().zip(&self.shifts) {
            let key = Arc::as_ptr(t) as usize;
            let (lo, hi) = match seen.iter().find(|(k, _, _)| *k == key) {
                Some(&(_, lo, hi)) => (lo, hi),
                None => {
                    if t.iter().any(|v| !v.is_finite()) {
                        return Err(Error::DimensionMismatch);
                    }
                    let lo = fmath::min_of(t);
                    let hi = fmath::max_of(t);
                    seen.push((key, lo, hi));
                    (lo, hi)
                }
            };
            bound = bound.max(fmath::abs(hi - shift)).max(fmath::abs(lo - shift));
        }
        Ok(bound)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn lookahead(&self) -> usize {
        self.lookahead
    }

    pub fn grid_len(&self) -> usize {
        self.grid_len
    }

    /// Max over periods of the max-abs effective entry (the bound C_n).
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Raw tensor storage for period i (before the shift is applied).
    pub fn tensor(&self, period: usize) -> &[f64] {
        &self.tensors[period - 1]
    }

    pub(crate) fn shift(&self, period: usize) -> f64 {
        self.shifts[period - 1]
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    /// Reward for period i when the window of states starting at time i
    /// has the given grid indices.
    pub fn eval(&self, period: usize, window: &[usize]) -> f64 {
        debug_assert_eq!(window.len(), 1 + self.lookahead);
        let mut flat = 0usize;
        for &w in window {
            flat = flat * self.grid_len + w;
        }
        self.tensors[period - 1][flat] - self.shifts[period - 1]
    }

    /// m = 0 accessor.
    pub fn at0(&self, period: usize, x: usize) -> f64 {
        self.tensors[period - 1][x] - self.shifts[period - 1]
    }

    /// m = 1 accessor.
    pub fn at1(&self, period: usize, x: usize, y: usize) -> f64 {
        self.tensors[period - 1][x * self.grid_len + y] - self.shifts[period - 1]
    }

    /// Same tensors with `extra[i-1]` added to period i's shift.
    pub(crate) fn shifted(&self, extra: &[f64]) -> RewardFunctionArray {
        debug_assert_eq!(extra.len(), self.horizon);
        let mut out = self.clone();
        for (s, &e) in out.shifts.iter_mut().zip(extra) {
            *s += e;
        }
        out.bound = out.compute_bound().expect("tensors already validated");
        out
    }
}
