//! Experiment configuration: JSON in, validated config out. Validation
//! collects every violation it can find, not just the first.

use serde::{Deserialize, Serialize};

use nhmc_core::inventory::{DemandDensity, DemandKind};

pub const ALLOWED_KINDS: [&str; 6] =
    ["coeff", "decompose", "inventory", "altsub", "clt", "counterexample"];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Coeff(CoeffConfig),
    Decompose(DecomposeConfig),
    Inventory(InventoryConfig),
    Altsub(AltsubConfig),
    Clt(CltConfig),
    Counterexample(CounterexampleConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Coeff(_) => "coeff",
            ExperimentConfig::Decompose(_) => "decompose",
            ExperimentConfig::Inventory(_) => "inventory",
            ExperimentConfig::Altsub(_) => "altsub",
            ExperimentConfig::Clt(_) => "clt",
            ExperimentConfig::Counterexample(_) => "counterexample",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Coeff(c) => c.seed,
            ExperimentConfig::Decompose(c) => c.instance.seed(),
            ExperimentConfig::Inventory(c) => c.seed,
            ExperimentConfig::Altsub(c) => c.seed,
            ExperimentConfig::Clt(c) => c.seed,
            ExperimentConfig::Counterexample(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Coeff(c) => c.seed = seed,
            ExperimentConfig::Decompose(c) => c.instance.set_seed(seed),
            ExperimentConfig::Inventory(c) => c.seed = seed,
            ExperimentConfig::Altsub(c) => c.seed = seed,
            ExperimentConfig::Clt(c) => c.seed = seed,
            ExperimentConfig::Counterexample(c) => c.seed = seed,
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_pairs() -> usize {
    200
}

fn default_max_states() -> usize {
    6
}

fn default_grid_points() -> usize {
    nhmc_core::altsub::DEFAULT_GRID_POINTS
}

fn default_counterexample_grid() -> usize {
    9
}

fn default_reward_scale() -> f64 {
    1.0
}

/// Coefficient-calculus property sweep.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoeffConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of random kernel pairs / sequences.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// States are drawn from 2..=max_states.
    #[serde(default = "default_max_states")]
    pub max_states: usize,
}

/// Decomposition and inequality suite on one instance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub instance: InstanceSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Random {
        #[serde(default = "default_seed")]
        seed: u64,
        states: usize,
        n: usize,
        m: usize,
        #[serde(default = "default_reward_scale")]
        reward_scale: f64,
    },
    Counterexample {
        n: usize,
        #[serde(default = "default_counterexample_grid")]
        grid_points: usize,
    },
}

impl InstanceSpec {
    fn seed(&self) -> u64 {
        match self {
            InstanceSpec::Random { seed, .. } => *seed,
            InstanceSpec::Counterexample { .. } => 0,
        }
    }

    fn set_seed(&mut self, new: u64) {
        if let InstanceSpec::Random { seed, .. } = self {
            *seed = new;
        }
    }
}

/// Demand density spec: {kind, params, j}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSpec {
    Uniform { j: f64 },
    Beta { alpha: f64, beta: f64, j: f64 },
    TruncatedExponential { rate: f64, j: f64 },
    Table { weights: Vec<f64>, j: f64 },
}

impl DemandSpec {
    pub fn to_density(&self) -> Result<DemandDensity, nhmc_core::Error> {
        match self {
            DemandSpec::Uniform { j } => DemandDensity::new(DemandKind::Uniform, *j),
            DemandSpec::Beta { alpha, beta, j } => {
                DemandDensity::new(DemandKind::Beta { alpha: *alpha, beta: *beta }, *j)
            }
            DemandSpec::TruncatedExponential { rate, j } => {
                DemandDensity::new(DemandKind::TruncatedExponential { rate: *rate }, *j)
            }
            DemandSpec::Table { weights, j } => {
                DemandDensity::new(DemandKind::Table { weights: weights.clone() }, *j)
            }
        }
    }
}

/// Inventory structure certificates (plus optional CLT sampling).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InventoryConfig {
    pub c: f64,
    pub c_h: f64,
    pub c_p: f64,
    pub demand: DemandSpec,
    #[serde(default)]
    pub grid_step: Option<f64>,
    pub n: usize,
    /// Horizons for the variance-growth study (all <= n).
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub start_state: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// When present, sample this many paths and run the normality check.
    #[serde(default)]
    pub replications: Option<usize>,
}

/// Alternating-subsequence certificates (plus optional CLT sampling).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AltsubConfig {
    pub n: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub replications: Option<usize>,
}

/// Condition-ratio trend plus per-horizon normality reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    pub family: FamilySpec,
    pub n_list: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Inventory {
        c: f64,
        c_h: f64,
        c_p: f64,
        demand: DemandSpec,
        #[serde(default)]
        grid_step: Option<f64>,
        #[serde(default)]
        start_state: f64,
    },
    Altsub {
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
    Counterexample {
        #[serde(default = "default_counterexample_grid")]
        grid_points: usize,
    },
}

/// Parity cancellation fixture: exact variances and the degenerate flag.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub n: usize,
    #[serde(default = "default_counterexample_grid")]
    pub grid_points: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub replications: Option<usize>,
}

fn validate_demand(spec: &DemandSpec, out: &mut Vec<String>) {
    let j = match spec {
        DemandSpec::Uniform { j }
        | DemandSpec::Beta { j, .. }
        | DemandSpec::TruncatedExponential { j, .. }
        | DemandSpec::Table { j, .. } => *j,
    };
    if !(j > 0.0) || !j.is_finite() {
        out.push("demand: support j must be positive and finite".into());
    }
    match spec {
        DemandSpec::Beta { alpha, beta, .. } => {
            if !(*alpha >= 1.0) || !(*beta >= 1.0) {
                out.push("demand: beta parameters must be >= 1".into());
            }
        }
        DemandSpec::TruncatedExponential { rate, .. } => {
            if !(*rate > 0.0) {
                out.push("demand: exponential rate must be positive".into());
            }
        }
        DemandSpec::Table { weights, .. } => {
            if weights.is_empty() || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
                out.push("demand: table weights must be nonnegative".into());
            }
        }
        DemandSpec::Uniform { .. } => {}
    }
}

fn validate_inventory_costs(c: f64, c_h: f64, c_p: f64, out: &mut Vec<String>) {
    if !(c > 0.0) {
        out.push("purchase cost c must be positive".into());
    }
    if !(c < c_p) {
        out.push("requires c < c_p (ordering must beat backlogging)".into());
    }
    if !(c_h > 0.0) {
        out.push("holding cost c_h must be positive".into());
    }
}

fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    match config {
        ExperimentConfig::Coeff(c) => {
            if c.pairs == 0 {
                out.push("pairs must be positive".into());
            }
            if c.max_states < 2 || c.max_states > 12 {
                out.push("max_states must be in 2..=12".into());
            }
        }
        ExperimentConfig::Decompose(c) => match &c.instance {
            InstanceSpec::Random { states, n, m, reward_scale, .. } => {
                if *states < 2 {
                    out.push("instance: states must be >= 2".into());
                }
                if *n == 0 {
                    out.push("instance: n must be >= 1".into());
                }
                if *m > 1 {
                    out.push("instance: exact engine supports m in {0, 1}".into());
                }
                if !(*reward_scale > 0.0) {
                    out.push("instance: reward_scale must be positive".into());
                }
            }
            InstanceSpec::Counterexample { n, grid_points } => {
                if *n == 0 {
                    out.push("instance: n must be >= 1".into());
                }
                if *grid_points < 2 {
                    out.push("instance: counterexample needs >= 2 grid points".into());
                }
            }
        },
        ExperimentConfig::Inventory(c) => {
            validate_inventory_costs(c.c, c.c_h, c.c_p, &mut out);
            validate_demand(&c.demand, &mut out);
            if c.n == 0 {
                out.push("n must be >= 1".into());
            }
            if let Some(list) = &c.n_list {
                if list.iter().any(|&v| v == 0 || v > c.n) {
                    out.push("n_list entries must be in 1..=n".into());
                }
            }
            if let Some(r) = c.replications {
                if r < 100 {
                    out.push("replications must be >= 100 for the normality check".into());
                }
            }
            if let Some(h) = c.grid_step {
                if !(h > 0.0) {
                    out.push("grid_step must be positive".into());
                }
            }
        }
        ExperimentConfig::Altsub(c) => {
            if c.n == 0 {
                out.push("n must be >= 1".into());
            }
            if c.grid_points < 7 {
                out.push("grid_points must be >= 7".into());
            }
            if let Some(r) = c.replications {
                if r < 100 {
                    out.push("replications must be >= 100 for the normality check".into());
                }
            }
        }
        ExperimentConfig::Clt(c) => {
            if c.n_list.is_empty() {
                out.push("n_list must be nonempty".into());
            }
            if c.n_list.iter().any(|&v| v == 0) {
                out.push("n_list entries must be >= 1".into());
            }
            if c.replications < 100 {
                out.push("replications must be >= 100".into());
            }
            match &c.family {
                FamilySpec::Inventory { c: pc, c_h, c_p, demand, grid_step, .. } => {
                    validate_inventory_costs(*pc, *c_h, *c_p, &mut out);
                    validate_demand(demand, &mut out);
                    if let Some(h) = grid_step {
                        if !(*h > 0.0) {
                            out.push("grid_step must be positive".into());
                        }
                    }
                }
                FamilySpec::Altsub { grid_points } => {
                    if *grid_points < 7 {
                        out.push("grid_points must be >= 7".into());
                    }
                }
                FamilySpec::Counterexample { grid_points } => {
                    if *grid_points < 2 {
                        out.push("counterexample needs >= 2 grid points".into());
                    }
                }
            }
        }
        ExperimentConfig::Counterexample(c) => {
            if c.n == 0 {
                out.push("n must be >= 1".into());
            }
            if c.grid_points < 2 {
                out.push("grid_points must be >= 2".into());
            }
        }
    }
    out
}

/// Parses and validates a config document. All detectable violations are
/// collected before reporting.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_owned);
    match kind {
        None => {
            return Err(ConfigError::Invalid(vec![format!(
                "missing experiment kind; allowed kinds: {}",
                ALLOWED_KINDS.join(", ")
            )]))
        }
        Some(k) if !ALLOWED_KINDS.contains(&k.as_str()) => {
            return Err(ConfigError::Invalid(vec![format!(
                "unknown experiment kind '{k}'; allowed kinds: {}",
                ALLOWED_KINDS.join(", ")
            )]))
        }
        _ => {}
    }
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
    let violations = validate(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}
