//! Finite-horizon dynamic inventory management with backlogging.
//!
//! A backward recursion over a uniform state lattice solves for the
//! base-stock levels and value functions; the induced post-decision
//! inventory process is a temporally non-homogeneous chain with m = 1
//! look-ahead rewards `c (order) + L(next inventory)`. The module also
//! certifies the structural facts used by the chain analysis: the
//! base-stock quantile formulas, the single-crossing total-variation
//! identity, the closed-form lower bound on the minimal ergodic
//! coefficient, the degeneracy of the bivariate state extension, and the
//! linear variance growth of the optimal cost.
//!
//! Demand is discretized by placing each lattice cell's probability mass
//! `Psi((k+1)h) - Psi(kh)` at the cell midpoint and snapping it to the
//! state lattice, so kernels are exactly row-stochastic by construction
//! and all discretization tolerances are 2h.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::{ChainLaw, RewardFunctionArray};
use crate::decompose::{self, REACH_TOL};
use crate::error::{Error, Result};
use crate::fmath;
use crate::kernel::{KernelSequence, StateGrid, StochasticKernel};

/// Default number of demand cells: h = J / 400.
pub const DEFAULT_GRID_CELLS: usize = 400;

/// Demand density family on a bounded support [0, J].
#[derive(Debug, Clone, PartialEq)]
pub enum DemandKind {
    Uniform,
    Beta { alpha: f64, beta: f64 },
    TruncatedExponential { rate: f64 },
    /// Piecewise-constant density: weight per equal-width cell of [0, J].
    Table { weights: Vec<f64> },
}

/// Validated demand density with support [0, J].
#[derive(Debug, Clone)]
pub struct DemandDensity {
    kind: DemandKind,
    support: f64,
    /// Normalization constant: raw density integrates to this over [0, J].
    norm: f64,
    /// For kinds without closed-form CDF: cumulative raw integral on a
    /// fine lattice (Simpson per cell).
    cum: Option<Vec<f64>>,
}

const FINE_CELLS: usize = 4096;

impl DemandDensity {
    pub fn new(kind: DemandKind, support: f64) -> Result<Self> {
        if !(support > 0.0) || !support.is_finite() {
            return Err(Error::InvalidDensity("support must be positive and finite"));
        }
        match &kind {
            DemandKind::Uniform => {}
            DemandKind::Beta { alpha, beta } => {
                if !(*alpha >= 1.0) || !(*beta >= 1.0) {
                    return Err(Error::InvalidDensity("beta parameters must be >= 1"));
                }
            }
            DemandKind::TruncatedExponential { rate } => {
                if !(*rate > 0.0) {
                    return Err(Error::InvalidDensity("exponential rate must be positive"));
                }
            }
            DemandKind::Table { weights } => {
                if weights.is_empty()
                    || weights.iter().any(|&w| w < 0.0 || !w.is_finite())
                    || weights.iter().all(|&w| w == 0.0)
                {
                    return Err(Error::InvalidDensity(
                        "table weights must be nonnegative with positive total",
                    ));
                }
            }
        }
        let mut density = DemandDensity { kind, support, norm: 1.0, cum: None };
        match density.kind {
            DemandKind::Beta { .. } => {
                // Simpson per fine cell on the raw (unnormalized) density.
                let h = support / FINE_CELLS as f64;
                let mut cum = Vec::with_capacity(FINE_CELLS + 1);
                cum.push(0.0);
                let mut acc = 0.0;
                for i in 0..FINE_CELLS {
                    let a = i as f64 * h;
                    let b = a + h;
                    let mid = a + 0.5 * h;
                    acc += (h / 6.0)
                        * (density.raw_pdf(a) + 4.0 * density.raw_pdf(mid) + density.raw_pdf(b));
                    cum.push(acc);
                }
                let total = acc;
                if fmath::abs(total - 1.0) > 1e-8 {
                    return Err(Error::InvalidDensity("density does not integrate to 1"));
                }
                density.norm = total;
                density.cum = Some(cum);
            }
            DemandKind::Table { ref weights } => {
                let cell = support / weights.len() as f64;
                density.norm = fmath::sum(weights.iter().map(|&w| w * cell));
            }
            _ => {}
        }
        Ok(density)
    }

    pub fn kind(&self) -> &DemandKind {
        &self.kind
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    fn raw_pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.support {
            return 0.0;
        }
        match &self.kind {
            DemandKind::Uniform => 1.0 / self.support,
            DemandKind::Beta { alpha, beta } => {
                let u = (x / self.support).clamp(0.0, 1.0);
                let ln_b = fmath::lgamma(*alpha) + fmath::lgamma(*beta)
                    - fmath::lgamma(alpha + beta);
                if u == 0.0 {
                    return if *alpha > 1.0 { 0.0 } else { 1.0 / fmath::exp(ln_b) / self.support };
                }
                if u == 1.0 {
                    return if *beta > 1.0 { 0.0 } else { 1.0 / fmath::exp(ln_b) / self.support };
                }
                let base =
                    fmath::exp((alpha - 1.0) * fmath::ln(u) + (beta - 1.0) * fmath::ln(1.0 - u));
                base / fmath::exp(ln_b) / self.support
            }
            DemandKind::TruncatedExponential { rate } => {
                let z = 1.0 - fmath::exp(-rate * self.support);
                rate * fmath::exp(-rate * x) / z
            }
            DemandKind::Table { weights } => {
                let cell = self.support / weights.len() as f64;
                let idx = ((x / cell) as usize).min(weights.len() - 1);
                weights[idx]
            }
        }
    }

    /// Normalized density at x (zero outside the support).
    pub fn pdf(&self, x: f64) -> f64 {
        self.raw_pdf(x) / self.norm
    }

    /// Cumulative distribution function, clamped to [0, 1].
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.support {
            return 1.0;
        }
        match &self.kind {
            DemandKind::Uniform => x / self.support,
            DemandKind::TruncatedExponential { rate } => {
                let z = 1.0 - fmath::exp(-rate * self.support);
                (1.0 - fmath::exp(-rate * x)) / z
            }
            DemandKind::Table { weights } => {
                let cell = self.support / weights.len() as f64;
                let idx = ((x / cell) as usize).min(weights.len() - 1);
                let below = fmath::sum(weights[..idx].iter().map(|&w| w * cell));
                ((below + weights[idx] * (x - idx as f64 * cell)) / self.norm).clamp(0.0, 1.0)
            }
            DemandKind::Beta { .. } => {
                let cum = self.cum.as_ref().expect("beta carries a cumulative table");
                let h = self.support / FINE_CELLS as f64;
                let pos = x / h;
                let idx = (pos as usize).min(FINE_CELLS - 1);
                let frac = pos - idx as f64;
                let v = cum[idx] + frac * (cum[idx + 1] - cum[idx]);
                (v / self.norm).clamp(0.0, 1.0)
            }
        }
    }

    /// Quantile by bisection on the CDF.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let (mut lo, mut hi) = (0.0, self.support);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Cost parameters plus demand; the purchase rate must stay below the
/// penalty rate or ordering would never beat backlogging.
#[derive(Debug, Clone)]
pub struct InventoryModel {
    pub purchase_cost: f64,
    pub holding_cost: f64,
    pub penalty_cost: f64,
    pub demand: DemandDensity,
    pub grid_step: f64,
}

impl InventoryModel {
    pub fn new(
        purchase_cost: f64,
        holding_cost: f64,
        penalty_cost: f64,
        demand: DemandDensity,
        grid_step: Option<f64>,
    ) -> Result<Self> {
        if !(purchase_cost > 0.0) || !(purchase_cost < penalty_cost) {
            return Err(Error::InvalidModel("requires 0 < c < c_p"));
        }
        if !(holding_cost > 0.0) {
            return Err(Error::InvalidModel("requires c_h > 0"));
        }
        let h = grid_step.unwrap_or(demand.support() / DEFAULT_GRID_CELLS as f64);
        if !(h > 0.0) || h > demand.support() / 4.0 {
            return Err(Error::InvalidModel("grid step must be in (0, J/4]"));
        }
        Ok(InventoryModel {
            purchase_cost,
            holding_cost,
            penalty_cost,
            demand,
            grid_step: h,
        })
    }

    /// Carrying cost: holding above zero, penalty below.
    pub fn carrying_cost(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.holding_cost * x
        } else {
            -self.penalty_cost * x
        }
    }

    /// Closed-form lower bound on the minimal ergodic coefficient:
    /// `min{c_h, c_p - c} / (c_h + c_p)`.
    pub fn alpha_lower_bound(&self) -> f64 {
        let denom = self.holding_cost + self.penalty_cost;
        self.holding_cost.min(self.penalty_cost - self.purchase_cost) / denom
    }

    /// Critical ratio for the single-period level: (c_p - c)/(c_h + c_p).
    pub fn newsvendor_ratio(&self) -> f64 {
        (self.penalty_cost - self.purchase_cost) / (self.holding_cost + self.penalty_cost)
    }

    /// Critical ratio for the level upper bound: c_p/(c_h + c_p).
    pub fn upper_ratio(&self) -> f64 {
        self.penalty_cost / (self.holding_cost + self.penalty_cost)
    }
}

/// Demand mass snapped to the state lattice: (offset in cells, mass).
#[derive(Debug, Clone)]
struct DiscreteDemand {
    atoms: Vec<(usize, f64)>,
}

fn discretize_demand(model: &InventoryModel) -> DiscreteDemand {
    let h = model.grid_step;
    let j = model.demand.support();
    let cells = fmath::ceil(j / h - 1e-9) as usize;
    let mut atoms = Vec::with_capacity(cells);
    let mut total = 0.0;
    for k in 0..cells {
        let mass = model.demand.cdf((k + 1) as f64 * h) - model.demand.cdf(k as f64 * h);
        // Midpoint (k + 1/2) h snapped to the lattice; half rounds away
        // from zero, so the atom lands on (k+1) h.
        let offset = fmath::round(k as f64 + 0.5) as usize;
        atoms.push((offset, mass));
        total += mass;
    }
    for (_, m) in atoms.iter_mut() {
        *m /= total;
    }
    DiscreteDemand { atoms }
}

/// Solved base-stock policy: levels, value functions, and the grid they
/// live on.
#[derive(Debug, Clone)]
pub struct BaseStockSolution {
    grid: Arc<StateGrid>,
    demand: DiscreteDemand,
    /// Grid index of s_k for k = 1..=horizon.
    level_indices: Vec<usize>,
    /// s_k values.
    pub levels: Vec<f64>,
    /// v_k on the grid for k = 0..=horizon.
    pub value_functions: Vec<Vec<f64>>,
    /// Continuous quantile bound s_inf = Psi^{-1}(c_p/(c_h+c_p)).
    pub s_inf: f64,
    /// Continuous quantile for s_1 (the newsvendor level).
    pub s1_quantile: f64,
    pub grid_step: f64,
}

impl BaseStockSolution {
    pub fn grid(&self) -> &Arc<StateGrid> {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, k: usize) -> usize {
        self.level_indices[k - 1]
    }

    /// Order-up-to map at grid resolution: gamma(x) = max(x, s_k).
    pub fn order_up_to_index(&self, k: usize, x_idx: usize) -> usize {
        x_idx.max(self.level_indices[k - 1])
    }
}

/// Backward induction for the base-stock policy. Each v_k is the exact
/// constrained minimum over grid order levels (suffix minima of G_k); the
/// level s_k is the smallest unconstrained minimizer.
pub fn solve_base_stock(model: &InventoryModel, horizon: usize) -> Result<BaseStockSolution> {
    if horizon == 0 {
        return Err(Error::InvalidModel("horizon must be at least 1"));
    }
    let h = model.grid_step;
    let j = model.demand.support();
    let cells = fmath::ceil(j / h - 1e-9) as i64;
    let s_inf = model.demand.quantile(model.upper_ratio());
    let s1_quantile = model.demand.quantile(model.newsvendor_ratio());
    let j_max = fmath::ceil(s_inf / h) as i64 + 2;
    let j_min = -cells;
    let points: Vec<f64> = (j_min..=j_max).map(|idx| idx as f64 * h).collect();
    let grid = Arc::new(StateGrid::new(points)?);
    let g = grid.len();
    let x_min = grid.point(0);
    let demand = discretize_demand(model);

    let c = model.purchase_cost;
    let mut value_functions: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    value_functions.push(vec![0.0; g]);
    let mut level_indices: Vec<usize> = Vec::with_capacity(horizon);

    let mut objective = vec![0.0; g];
    for k in 1..=horizon {
        let prev = &value_functions[k - 1];
        // G_k(y) = c y + E[L(y - D) + v_{k-1}(y - D)]; arguments below the
        // grid use the closed-form linear extension (slope -c for k >= 2,
        // constant 0 for v_0; the carrying cost is exact everywhere).
        for (y_idx, slot) in objective.iter_mut().enumerate() {
            let y = grid.point(y_idx);
            let mut acc = 0.0;
            for &(offset, mass) in &demand.atoms {
                let val = if y_idx >= offset {
                    let dest = y_idx - offset;
                    model.carrying_cost(grid.point(dest)) + prev[dest]
                } else {
                    let x = y - offset as f64 * h;
                    let ext = if k == 1 { 0.0 } else { prev[0] + c * (x_min - x) };
                    model.carrying_cost(x) + ext
                };
                acc += mass * val;
            }
            *slot = c * y + acc;
        }
        let mut s_idx = 0;
        for idx in 1..g {
            if objective[idx] < objective[s_idx] {
                s_idx = idx;
            }
        }
        if let Some(&prev_idx) = level_indices.last() {
            if s_idx < prev_idx {
                return Err(Error::PropertyViolation("base-stock levels not monotone"));
            }
        }
        level_indices.push(s_idx);
        let mut v_k = vec![0.0; g];
        let mut suffix = f64::INFINITY;
        for idx in (0..g).rev() {
            suffix = suffix.min(objective[idx]);
            v_k[idx] = suffix - c * grid.point(idx);
        }
        value_functions.push(v_k);
    }

    let levels: Vec<f64> = level_indices.iter().map(|&i| grid.point(i)).collect();
    if fmath::abs(levels[0] - s1_quantile) > 2.0 * h {
        return Err(Error::GridTooCoarse { level: levels[0], quantile: s1_quantile });
    }
    if *levels.last().unwrap() > s_inf + 2.0 * h {
        return Err(Error::PropertyViolation("last level exceeds the quantile bound"));
    }

    Ok(BaseStockSolution {
        grid,
        demand,
        level_indices,
        levels,
        value_functions,
        s_inf,
        s1_quantile,
        grid_step: h,
    })
}

/// Builds the post-decision inventory chain and its m = 1 reward array:
/// `f_i(x, y) = c (gamma_i(x) - x) + L(y)`. Kernels and tensors repeat
/// whenever the remaining-horizon level repeats, and are shared.
pub fn build_inventory_chain(
    model: &InventoryModel,
    solution: &BaseStockSolution,
    horizon: usize,
    start_state: f64,
) -> Result<(ChainLaw, RewardFunctionArray)> {
    if horizon == 0 || horizon > solution.horizon() {
        return Err(Error::InvalidModel("chain horizon exceeds the solved horizon"));
    }
    if fmath::abs(start_state) > solution.s_inf + 1e-9 {
        return Err(Error::InvalidModel("start state outside [-s_inf, s_inf]"));
    }
    let grid = Arc::clone(&solution.grid);
    let g = grid.len();
    let c = model.purchase_cost;
    let h = solution.grid_step;

    let mut kernel_cache: BTreeMap<usize, Arc<StochasticKernel>> = BTreeMap::new();
    let mut tensor_cache: BTreeMap<usize, Arc<Vec<f64>>> = BTreeMap::new();
    let mut kernels = Vec::with_capacity(horizon);
    let mut tensors = Vec::with_capacity(horizon);

    for i in 1..=horizon {
        let k_remaining = horizon - i + 1;
        let s_idx = solution.level_indices[k_remaining - 1];
        let kernel = match kernel_cache.get(&s_idx) {
            Some(k) => Arc::clone(k),
            None => {
                let mut rows = vec![0.0; g * g];
                for x in 0..g {
                    let up_to = x.max(s_idx);
                    let row = &mut rows[x * g..(x + 1) * g];
                    for &(offset, mass) in &solution.demand.atoms {
                        debug_assert!(up_to >= offset, "order level below demand range");
                        row[up_to - offset] += mass;
                    }
                }
                let k = Arc::new(StochasticKernel::new_normalized(Arc::clone(&grid), rows)?);
                kernel_cache.insert(s_idx, Arc::clone(&k));
                k
            }
        };
        kernels.push(kernel);
        let tensor = match tensor_cache.get(&s_idx) {
            Some(t) => Arc::clone(t),
            None => {
                let mut t = vec![0.0; g * g];
                for x in 0..g {
                    let up_to = x.max(s_idx);
                    let order_cost = c * (grid.point(up_to) - grid.point(x));
                    let row = &mut t[x * g..(x + 1) * g];
                    for (y, slot) in row.iter_mut().enumerate() {
                        *slot = order_cost + model.carrying_cost(grid.point(y));
                    }
                }
                let t = Arc::new(t);
                tensor_cache.insert(s_idx, Arc::clone(&t));
                t
            }
        };
        tensors.push(tensor);
    }

    let seq = KernelSequence::new(Arc::clone(&grid), kernels, horizon, 1)?;
    let start_idx = fmath::round((start_state - grid.point(0)) / h) as usize;
    let law = ChainLaw::point_mass(start_idx.min(g - 1), seq)?;
    let rewards = RewardFunctionArray::new(horizon, 1, g, tensors)?;
    Ok((law, rewards))
}

/// Evidence that `psi(w) - psi(w + eps)` crosses sign at most once (from
/// nonpositive to nonnegative) for each probed shift.
#[derive(Debug, Clone)]
pub struct SingleCrossingCertificate {
    pub is_single_crossing: bool,
    pub probes: Vec<CrossingProbe>,
}

#[derive(Debug, Clone)]
pub struct CrossingProbe {
    pub eps: f64,
    /// First lattice point where the difference turns positive (support
    /// end when it never does).
    pub crossing: f64,
    pub single: bool,
}

/// Scans the shifted-difference sign pattern for one eps on a lattice of
/// the given step.
pub fn scan_crossing(demand: &DemandDensity, eps: f64, step: f64) -> CrossingProbe {
    let j = demand.support();
    let count = (fmath::ceil(j / step) as usize) + 1;
    let mut diffs = Vec::with_capacity(count);
    let mut scale = 0.0_f64;
    for idx in 0..count {
        let w = (idx as f64 * step).min(j);
        let d = demand.pdf(w) - demand.pdf(w + eps);
        scale = scale.max(fmath::abs(d));
        diffs.push((w, d));
    }
    let tol = 1e-9 * scale;
    let mut first_pos: Option<f64> = None;
    let mut single = true;
    for &(w, d) in &diffs {
        if d > tol {
            if first_pos.is_none() {
                first_pos = Some(w);
            }
        } else if d < -tol && first_pos.is_some() {
            single = false;
        }
    }
    CrossingProbe { eps, crossing: first_pos.unwrap_or(j), single }
}

/// Certifies the single-crossing property over a probe set of shifts.
pub fn single_crossing_check(
    demand: &DemandDensity,
    probe_eps: &[f64],
    step: f64,
) -> SingleCrossingCertificate {
    let probes: Vec<CrossingProbe> = probe_eps
        .iter()
        .map(|&eps| scan_crossing(demand, eps, step))
        .collect();
    let is_single_crossing = probes.iter().all(|p| p.single);
    SingleCrossingCertificate { is_single_crossing, probes }
}

/// Certificate tying the chain's contraction coefficients to the demand
/// distribution: row total-variation distances match
/// `P(w_hat <= D <= w_hat + eps)` within 2h, and the minimal ergodic
/// coefficient clears the closed-form bound minus 2h.
#[derive(Debug, Clone)]
pub struct InventoryAlphaCertificate {
    pub alpha_n: f64,
    pub closed_form_bound: f64,
    pub tv_probe_worst_error: f64,
    pub tv_probes: usize,
    pub pass_alpha: bool,
    pub pass_tv: bool,
    pub pass: bool,
}

pub fn inventory_alpha_certificate(
    model: &InventoryModel,
    solution: &BaseStockSolution,
    law: &ChainLaw,
) -> Result<InventoryAlphaCertificate> {
    let h = solution.grid_step;
    let span = solution.s_inf - solution.s1_quantile;
    let eps_probes = [0.0, h, 5.0 * h, 0.5 * span, span];
    let cert = single_crossing_check(&model.demand, &eps_probes, h);
    if !cert.is_single_crossing {
        return Err(Error::PropertyViolation("demand density is not single-crossing"));
    }

    let n = law.horizon();
    let g = law.grid().len();
    let num_steps = law.seq().num_steps();
    let steps = [1, (n / 2).max(1).min(num_steps), n.min(num_steps)];
    let state_picks = [0usize, g / 4, g / 2, 3 * g / 4, g - 1];
    let mut worst = 0.0_f64;
    let mut probes = 0usize;
    for &step in &steps {
        let k_remaining = n - step + 1;
        let kernel = law.seq().step(step)?;
        for (a_pos, &a) in state_picks.iter().enumerate() {
            for &b in &state_picks[a_pos..] {
                let ga = solution.order_up_to_index(k_remaining, a);
                let gb = solution.order_up_to_index(k_remaining, b);
                let eps = fmath::abs(law.grid().point(ga) - law.grid().point(gb));
                let probe = scan_crossing(&model.demand, eps, h);
                let p =
                    model.demand.cdf(probe.crossing + eps) - model.demand.cdf(probe.crossing);
                let ra = kernel.row(a);
                let rb = kernel.row(b);
                let mut l1 = 0.0;
                for y in 0..g {
                    l1 += fmath::abs(ra[y] - rb[y]);
                }
                let tv = 0.5 * l1;
                worst = worst.max(fmath::abs(tv - p));
                probes += 1;
            }
        }
    }

    let alpha_n = law.seq().minimal_ergodic_coefficient()?.alpha_n;
    let bound = model.alpha_lower_bound();
    let pass_alpha = alpha_n >= bound - 2.0 * h;
    let pass_tv = worst <= 2.0 * h;
    Ok(InventoryAlphaCertificate {
        alpha_n,
        closed_form_bound: bound,
        tv_probe_worst_error: worst,
        tv_probes: probes,
        pass_alpha,
        pass_tv,
        pass: pass_alpha && pass_tv,
    })
}

/// Degeneracy of the bivariate state extension (X_i, X_{i+1}): its
/// one-step kernel pins the first coordinate, so rows from pairs with
/// different second coordinates have disjoint supports and the contraction
/// coefficient is exactly 1 (ergodic coefficient 0). The correlation
/// witness g = X_i - E[X_i] is measurable for the extended past, so the
/// maximal correlation coefficient is exactly 1.
#[derive(Debug, Clone)]
pub struct BivariateDegeneracyReport {
    /// Step index tau used for the demonstration.
    pub step: usize,
    pub delta_hat: f64,
    pub alpha_hat: f64,
    pub rho_hat: f64,
    /// Max |E[g | pair] - g| over reachable pairs (zero up to row-sum
    /// rounding).
    pub measurability_gap: f64,
    /// Full pair-space contraction scan when the reachable pair space is
    /// small enough to materialize.
    pub dense_delta: Option<f64>,
}

/// Max reachable-pair count for the dense product-space scan.
const DENSE_PAIR_LIMIT: usize = 600;

pub fn bivariate_degeneracy_demo(law: &ChainLaw) -> Result<BivariateDegeneracyReport> {
    let g = law.grid().len();
    let marginals = law.marginals();
    let num_steps = law.seq().num_steps();
    if num_steps < 2 {
        return Err(Error::DegenerateChain);
    }
    // Earliest tau where the time tau+1 marginal spreads over >= 2 states;
    // the pair transition also needs the following kernel.
    let mut step = 0;
    for tau in 1..num_steps {
        let reachable = marginals[tau].iter().filter(|&&p| p > REACH_TOL).count();
        if reachable >= 2 {
            step = tau;
            break;
        }
    }
    if step == 0 {
        return Err(Error::DegenerateChain);
    }

    let k_tau = law.seq().step(step)?;
    let k_next = law.seq().step(step + 1)?;
    let mu_tau = &marginals[step - 1];
    let nu = &marginals[step]; // time tau+1 marginal

    // Two reachable pairs with distinct second coordinates.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    'outer: for x in 0..g {
        if mu_tau[x] <= REACH_TOL {
            continue;
        }
        for y in 0..g {
            if k_tau.entry(x, y) > 0.0 && nu[y] > REACH_TOL {
                if pairs.iter().all(|&(_, y0)| y0 != y) {
                    pairs.push((x, y));
                }
                if pairs.len() == 2 {
                    break 'outer;
                }
            }
        }
    }
    if pairs.len() < 2 {
        return Err(Error::DegenerateChain);
    }
    let (_, y1) = pairs[0];
    let (_, y2) = pairs[1];
    // Pair rows live on {(y, z)}: different first coordinates make the
    // supports disjoint, the overlap integral zero, and TV exactly 1.
    let overlap = if y1 == y2 {
        fmath::sum((0..g).map(|z| k_next.entry(y1, z).min(k_next.entry(y2, z))))
    } else {
        0.0
    };
    let delta_hat = 1.0 - overlap;

    // Correlation witness on pairs at tau+1: g = X_{tau+1} - E[X_{tau+1}].
    // Conditioning on the pair at tau fixes X_{tau+1}, so both L2 norms
    // marginalize to the same sum over the time tau+1 law.
    let grid = law.grid();
    let mean = fmath::sum((0..g).map(|y| nu[y] * grid.point(y)));
    let num = fmath::sum((0..g).map(|y| {
        let d = grid.point(y) - mean;
        nu[y] * d * d
    }));
    let den = fmath::sum((0..g).map(|y| {
        let d = grid.point(y) - mean;
        nu[y] * d * d
    }));
    if den <= 0.0 {
        return Err(Error::DegenerateChain);
    }
    let rho_hat = fmath::sqrt(num / den);

    let mut gap = 0.0_f64;
    for x in 0..g {
        if mu_tau[x] <= REACH_TOL {
            continue;
        }
        for y in 0..g {
            if k_tau.entry(x, y) > 0.0 {
                let gval = grid.point(y) - mean;
                let cond = fmath::sum((0..g).map(|z| k_next.entry(y, z) * gval));
                gap = gap.max(fmath::abs(cond - gval));
            }
        }
    }

    // Dense scan over the materialized pair space when small.
    let mut reachable_pairs: Vec<(usize, usize)> = Vec::new();
    'fill: for x in 0..g {
        if mu_tau[x] <= REACH_TOL {
            continue;
        }
        for y in 0..g {
            if k_tau.entry(x, y) > 0.0 {
                reachable_pairs.push((x, y));
                if reachable_pairs.len() > DENSE_PAIR_LIMIT {
                    break 'fill;
                }
            }
        }
    }
    let dense_delta = if reachable_pairs.len() <= DENSE_PAIR_LIMIT {
        let mut worst = 0.0_f64;
        for (a, &(_, ya)) in reachable_pairs.iter().enumerate() {
            for &(_, yb) in reachable_pairs.iter().skip(a + 1) {
                let overlap = if ya == yb {
                    1.0
                } else {
                    fmath::sum((0..g).map(|z| k_next.entry(ya, z).min(k_next.entry(yb, z))))
                };
                worst = worst.max(1.0 - overlap);
            }
        }
        Some(worst)
    } else {
        None
    };

    Ok(BivariateDegeneracyReport {
        step,
        delta_hat,
        alpha_hat: 1.0 - delta_hat,
        rho_hat,
        measurability_gap: gap,
        dense_delta,
    })
}

/// Exact Var of the optimal cost per horizon, the closed-form beta, and
/// the growth verdict.
#[derive(Debug, Clone)]
pub struct VarianceGrowthReport {
    pub horizons: Vec<usize>,
    pub variances: Vec<f64>,
    /// (s_1^2 / 9) inf over [s_1, s_inf] of the two-window CDF product.
    pub beta: f64,
    /// Least-squares slope of Var against n.
    pub slope: f64,
    /// Var[2n]/Var[n] for consecutive doubled horizons in the list.
    pub doubling_ratios: Vec<f64>,
    pub pass: bool,
}

pub fn inventory_variance_growth(
    model: &InventoryModel,
    solution: &BaseStockSolution,
    horizons: &[usize],
    start_state: f64,
) -> Result<VarianceGrowthReport> {
    let mut variances = Vec::with_capacity(horizons.len());
    for &n in horizons {
        let (law, rewards) = build_inventory_chain(model, solution, n, start_state)?;
        let (_, var) = decompose::moments_exact(&law, &rewards)?;
        variances.push(var);
    }
    let beta = closed_form_beta(model, solution);
    let len = horizons.len() as f64;
    let mean_n = fmath::sum(horizons.iter().map(|&n| n as f64)) / len;
    let mean_v = fmath::sum(variances.iter().copied()) / len;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&n, &v) in horizons.iter().zip(&variances) {
        let dx = n as f64 - mean_n;
        sxx += dx * dx;
        sxy += dx * (v - mean_v);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut doubling_ratios = Vec::new();
    for w in 0..horizons.len().saturating_sub(1) {
        if horizons[w + 1] == 2 * horizons[w] && variances[w] > 0.0 {
            doubling_ratios.push(variances[w + 1] / variances[w]);
        }
    }
    let pass = slope > 0.0
        && horizons
            .iter()
            .zip(&variances)
            .all(|(&n, &v)| v >= beta * n as f64);
    Ok(VarianceGrowthReport {
        horizons: horizons.to_vec(),
        variances,
        beta,
        slope,
        doubling_ratios,
        pass,
    })
}

/// The explicit variance-rate constant from the two-demand coupling:
/// each martingale difference has conditional second moment at least
///
/// `beta = (1/2) (c + c_h)^2 (s_1^2 / 9)
///         inf_{w in [s_1, s_inf]} {Psi(w - 2s_1/3) - Psi(w - s_1)} {Psi(w) - Psi(w - s_1/3)}`.
///
/// The infimum is evaluated on a half-step lattice with the continuous
/// CDF. The squared-cost prefactor comes from the coupling inequality
/// `E[d^2 | past] >= (1/2)(c + c_h)^2 E[(D' - D)^2 1(both order up)]`;
/// without it the constant fails numerically (the one-step variance is
/// smaller than the bare CDF-product expression).
pub fn closed_form_beta(model: &InventoryModel, solution: &BaseStockSolution) -> f64 {
    let rate = model.purchase_cost + model.holding_cost;
    0.5 * rate * rate * cdf_product_infimum(model, solution)
}

/// `(s_1^2/9) inf {Psi(w - 2s_1/3) - Psi(w - s_1)} {Psi(w) - Psi(w - s_1/3)}`.
pub fn cdf_product_infimum(model: &InventoryModel, solution: &BaseStockSolution) -> f64 {
    let s1 = solution.s1_quantile;
    let s_inf = solution.s_inf;
    let step = 0.5 * solution.grid_step;
    let mut w = s1;
    let mut inf = f64::INFINITY;
    while w <= s_inf + 1e-12 {
        let first = model.demand.cdf(w - 2.0 * s1 / 3.0) - model.demand.cdf(w - s1);
        let second = model.demand.cdf(w) - model.demand.cdf(w - s1 / 3.0);
        inf = inf.min(first * second);
        w += step;
    }
    (s1 * s1 / 9.0) * inf.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_model() -> InventoryModel {
        let demand = DemandDensity::new(DemandKind::Uniform, 1.0).unwrap();
        InventoryModel::new(0.1, 0.2, 0.9, demand, None).unwrap()
    }

    #[test]
    fn model_invariants_enforced() {
        let demand = DemandDensity::new(DemandKind::Uniform, 1.0).unwrap();
        assert!(InventoryModel::new(0.9, 0.2, 0.9, demand.clone(), None).is_err());
        assert!(InventoryModel::new(0.1, 0.0, 0.9, demand.clone(), None).is_err());
        assert!(InventoryModel::new(0.0, 0.2, 0.9, demand, None).is_err());
    }

    #[test]
    fn degenerate_zero_support_rejected() {
        assert!(DemandDensity::new(DemandKind::Uniform, 0.0).is_err());
    }

    #[test]
    fn uniform_quantiles_are_identity() {
        let demand = DemandDensity::new(DemandKind::Uniform, 1.0).unwrap();
        for q in [0.1, 0.5, 0.72727] {
            assert!((demand.quantile(q) - q).abs() < 1e-10);
        }
    }

    #[test]
    fn beta_density_integrates_to_one() {
        let demand =
            DemandDensity::new(DemandKind::Beta { alpha: 2.0, beta: 3.0 }, 2.0).unwrap();
        assert!((demand.cdf(2.0) - 1.0).abs() < 1e-12);
        let mid = demand.quantile(0.5);
        assert!((mid - 2.0 * 0.38573).abs() < 1e-3, "median = {mid}");
    }

    #[test]
    fn newsvendor_level_matches_quantile() {
        let model = uniform_model();
        let solution = solve_base_stock(&model, 1).unwrap();
        let expect = 0.8 / 1.1;
        assert!((solution.levels[0] - expect).abs() <= 2.0 * model.grid_step);
    }

    #[test]
    fn levels_monotone_and_bounded() {
        let model = uniform_model();
        let solution = solve_base_stock(&model, 40).unwrap();
        for w in solution.levels.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!((solution.s_inf - 0.9 / 1.1).abs() < 1e-9);
        assert!(*solution.levels.last().unwrap() <= solution.s_inf + 2.0 * model.grid_step);
    }

    #[test]
    fn value_functions_convex() {
        let model = uniform_model();
        let solution = solve_base_stock(&model, 10).unwrap();
        for v in &solution.value_functions {
            for w in v.windows(3) {
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
            }
        }
    }

    #[test]
    fn chain_rows_share_order_up_to_distribution() {
        let model = uniform_model();
        let solution = solve_base_stock(&model, 5).unwrap();
        let (law, _) = build_inventory_chain(&model, &solution, 5, 0.0).unwrap();
        let k = law.seq().step(1).unwrap();
        let s_idx = solution.level_index(5);
        assert!(s_idx >= 2);
        let r0 = k.row(0);
        let r1 = k.row(1);
        assert_eq!(r0, r1);
    }

    #[test]
    fn expected_cost_matches_value_function() {
        let model = uniform_model();
        let n = 5;
        let solution = solve_base_stock(&model, n).unwrap();
        let (law, rewards) = build_inventory_chain(&model, &solution, n, 0.0).unwrap();
        let (mean, _) = decompose::moments_exact(&law, &rewards).unwrap();
        let start_idx = law.grid().nearest(0.0);
        let v_n = solution.value_functions[n][start_idx];
        let tol = 2.0 * model.grid_step * n as f64;
        assert!((mean - v_n).abs() <= tol, "mean {mean} vs v_n {v_n}");
    }

    #[test]
    fn start_state_outside_band_rejected() {
        let model = uniform_model();
        let solution = solve_base_stock(&model, 3).unwrap();
        assert!(build_inventory_chain(&model, &solution, 3, 0.95).is_err());
        assert!(build_inventory_chain(&model, &solution, 3, -0.95).is_err());
    }

    #[test]
    fn uniform_demand_is_single_crossing() {
        let model = uniform_model();
        let cert = single_crossing_check(&model.demand, &[0.0, 0.05, 0.2], model.grid_step);
        assert!(cert.is_single_crossing);
        let probe = &cert.probes[2];
        assert!(probe.crossing >= 1.0 - 0.2 - 2.0 * model.grid_step);
    }

    #[test]
    fn truncated_exponential_is_single_crossing() {
        let demand =
            DemandDensity::new(DemandKind::TruncatedExponential { rate: 2.0 }, 1.0).unwrap();
        let cert = single_crossing_check(&demand, &[0.05, 0.3], 1.0 / 400.0);
        assert!(cert.is_single_crossing);
    }

    #[test]
    fn bimodal_mixture_is_not_single_crossing() {
        let mut weights = alloc::vec![0.05; 20];
        weights[2] = 5.0;
        weights[3] = 5.0;
        weights[16] = 5.0;
        weights[17] = 5.0;
        let demand = DemandDensity::new(DemandKind::Table { weights }, 1.0).unwrap();
        let cert = single_crossing_check(&demand, &[0.3], 1.0 / 400.0);
        assert!(!cert.is_single_crossing);
    }

    #[test]
    fn alpha_certificate_uniform_model() {
        let model = uniform_model();
        let n = 12;
        let solution = solve_base_stock(&model, n).unwrap();
        let (law, _) = build_inventory_chain(&model, &solution, n, 0.0).unwrap();
        let cert = inventory_alpha_certificate(&model, &solution, &law).unwrap();
        assert!(cert.pass, "{cert:?}");
        assert!((cert.closed_form_bound - 0.2 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn bivariate_demo_reports_exact_degeneracy() {
        let model = uniform_model();
        let n = 10;
        let solution = solve_base_stock(&model, n).unwrap();
        let (law, _) = build_inventory_chain(&model, &solution, n, 0.0).unwrap();
        let rep = bivariate_degeneracy_demo(&law).unwrap();
        assert_eq!(rep.delta_hat, 1.0);
        assert_eq!(rep.alpha_hat, 0.0);
        assert_eq!(rep.rho_hat, 1.0);
        assert!(rep.measurability_gap <= 1e-12);
    }

    #[test]
    fn variance_grows_linearly() {
        let model = uniform_model();
        let solution = solve_base_stock(&model, 20).unwrap();
        let rep = inventory_variance_growth(&model, &solution, &[5, 10, 20], 0.0).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.beta > 0.0);
        for r in &rep.doubling_ratios {
            assert!(*r > 1.2 && *r < 3.0, "ratio {r}");
        }
    }
}
