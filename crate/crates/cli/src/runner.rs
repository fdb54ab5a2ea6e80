//! Experiment execution: dispatch a validated config to the core engines,
//! collect verdicts and metrics, and write the report plus CSV series.

use std::path::PathBuf;

use serde_json::{json, Value};

use nhmc_core::bounds;
use nhmc_core::decompose::{self, COND_MEAN_TOL};
use nhmc_core::fixtures;
use nhmc_core::inventory::{self, InventoryModel};
use nhmc_core::kernel::{
    dobrushin_delta, multistep_bound_excess, oscillation_contraction_excess,
    product_inequality_excess, StateGrid, StochasticKernel,
};
use nhmc_core::montecarlo::{self, ConditionEntry};
use nhmc_core::{altsub, ChainLaw, RewardFunctionArray};

use crate::config::{
    parse_config, CltConfig, CoeffConfig, ConfigError, CounterexampleConfig, DecomposeConfig,
    ExperimentConfig, FamilySpec, InstanceSpec, InventoryConfig,
};
use crate::report::{atomic_write, standardized_histogram_rows, ExperimentReport, Verdict};

/// Fixed acceptance threshold for normality diagnostics.
pub const KS_THRESHOLD: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numeric failure: {0}")]
    Numeric(nhmc_core::Error),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

impl From<nhmc_core::Error> for RunError {
    fn from(e: nhmc_core::Error) -> Self {
        RunError::Numeric(e)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the config's seed when set.
    pub seed: Option<u64>,
    /// Upper bound on worker threads; engines are deterministic
    /// regardless, and output never depends on it.
    pub workers: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub report_path: PathBuf,
}

struct KindOutput {
    verdicts: Vec<Verdict>,
    metrics: Value,
    files: Vec<(String, String)>,
}

/// Parses, runs, and writes one experiment. The report body is a
/// deterministic function of (config text, seed override).
pub fn run_experiment(config_text: &str, options: &RunOptions) -> Result<RunOutcome, RunError> {
    let mut config = parse_config(config_text)?;
    if let Some(seed) = options.seed {
        config.set_seed(seed);
    }
    if let Some(w) = options.workers {
        if w == 0 {
            return Err(RunError::Config(ConfigError::Invalid(vec![
                "workers must be >= 1".to_string(),
            ])));
        }
    }

    let output = match &config {
        ExperimentConfig::Coeff(c) => run_coeff(c),
        ExperimentConfig::Decompose(c) => run_decompose(c)?,
        ExperimentConfig::Inventory(c) => run_inventory(c)?,
        ExperimentConfig::Altsub(c) => run_altsub(c)?,
        ExperimentConfig::Clt(c) => run_clt(c)?,
        ExperimentConfig::Counterexample(c) => run_counterexample(c)?,
    };

    let report = ExperimentReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind().to_string(),
        seed: config.seed(),
        config: serde_json::to_value(&config).expect("config serializes"),
        config_text: config_text.to_string(),
        verdicts: output.verdicts,
        metrics: output.metrics,
    };

    std::fs::create_dir_all(&options.out_dir)?;
    for (name, contents) in &output.files {
        atomic_write(&options.out_dir.join(name), contents.as_bytes())?;
    }
    let report_path = options.out_dir.join("report.json");
    let body = serde_json::to_string_pretty(&report).expect("report serializes");
    atomic_write(&report_path, body.as_bytes())?;
    Ok(RunOutcome { report, report_path })
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------
// coeff
// ---------------------------------------------------------------------

fn run_coeff(config: &CoeffConfig) -> KindOutput {
    let pinned = StochasticKernel::new(
        std::sync::Arc::new(StateGrid::new(vec![0.0, 1.0]).unwrap()),
        vec![0.5, 0.5, 0.25, 0.75],
    )
    .unwrap();
    let pinned_delta = dobrushin_delta(&pinned);

    let mut worst_product = f64::NEG_INFINITY;
    let mut worst_multistep = f64::NEG_INFINITY;
    let mut worst_osc = f64::NEG_INFINITY;
    for t in 0..config.pairs {
        let seed = config.seed.wrapping_add(t as u64).wrapping_mul(0x9e3779b97f4a7c15);
        let states = 2 + (seed as usize >> 7) % (config.max_states - 1);
        let k1 = fixtures::random_kernel(seed, states).unwrap();
        let k2 = fixtures::random_kernel(seed ^ 0xabcd, states).unwrap();
        worst_product = worst_product.max(product_inequality_excess(&k1, &k2).unwrap());
        let seq = fixtures::random_sequence(seed ^ 0x1111, states, 4).unwrap();
        worst_multistep = worst_multistep.max(multistep_bound_excess(&seq).unwrap());
        let h = fixtures::random_grid_function(seed ^ 0x2222, states, 3.0);
        worst_osc = worst_osc.max(oscillation_contraction_excess(&k1, &h));
    }

    let verdicts = vec![
        Verdict::new(
            "pinned-delta-exact",
            pinned_delta == 0.25,
            format!("delta = {pinned_delta}"),
        ),
        Verdict::new(
            "product-inequality",
            worst_product <= 1e-12,
            format!("worst excess {worst_product:e}"),
        ),
        Verdict::new(
            "multistep-bound",
            worst_multistep <= 1e-12,
            format!("worst excess {worst_multistep:e}"),
        ),
        Verdict::new(
            "oscillation-contraction",
            worst_osc <= 1e-12,
            format!("worst excess {worst_osc:e}"),
        ),
    ];
    let metrics = json!({
        "pairs": config.pairs,
        "pinned_delta": pinned_delta,
        "worst_product_excess": worst_product,
        "worst_multistep_excess": worst_multistep,
        "worst_oscillation_excess": worst_osc,
    });
    KindOutput { verdicts, metrics, files: Vec::new() }
}

// ---------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------

fn build_instance(spec: &InstanceSpec) -> Result<fixtures::InstanceBundle, nhmc_core::Error> {
    match spec {
        InstanceSpec::Random { seed, states, n, m, reward_scale } => {
            fixtures::random_instance(*seed, *states, *n, *m, *reward_scale)
        }
        InstanceSpec::Counterexample { n, grid_points } => {
            let grid =
                std::sync::Arc::new(StateGrid::uniform(0.0, 1.0, *grid_points)?);
            fixtures::parity_counterexample(*n, grid)
        }
    }
}

fn value_linf_rows(report: &decompose::DecompositionReport) -> Vec<Vec<String>> {
    let m = report.lookahead();
    let mut rows = Vec::new();
    for i in (1 + m)..=(report.horizon() + m) {
        let v = &report.value_to_go[i - m];
        let mu = &report.marginals[i - 1];
        let mut linf = 0.0_f64;
        for (val, &p) in v.iter().zip(mu) {
            if p > decompose::REACH_TOL {
                linf = linf.max(val.abs());
            }
        }
        rows.push(vec![
            format!("{i}"),
            format!("{}", report.d_second_moments[i - 1 - m]),
            format!("{linf}"),
        ]);
    }
    rows
}

fn run_decompose(config: &DecomposeConfig) -> Result<KindOutput, RunError> {
    let bundle = build_instance(&config.instance)?;
    let report = decompose::decompose(&bundle.law, &bundle.rewards)?;
    let identity = decompose::variance_identity_check(&report);
    let delta = decompose::delta_n_l2_check(&report);

    let mut verdicts = vec![
        Verdict::new(
            "martingale-property",
            report.max_conditional_mean_abs <= COND_MEAN_TOL,
            format!("max conditional mean {:e}", report.max_conditional_mean_abs),
        ),
        Verdict::new(
            "variance-identity",
            identity.identity_ok,
            format!("relative residual {:e}", identity.identity_residual),
        ),
        Verdict::new(
            "variance-sandwich",
            identity.sandwich_ok,
            format!("sum E[d^2] = {}, Var = {}", identity.mds_total, identity.var_sn),
        ),
        Verdict::new(
            "delta-l2",
            delta.pass,
            format!("slack ratio {}", delta.slack_ratio),
        ),
    ];
    let mut suite_metrics = Value::Null;
    if bundle.law.horizon() >= 2 {
        let suite = bounds::oscillation_bound_suite_with(&bundle.law, &report)?;
        for stat in &suite.stats {
            verdicts.push(Verdict::new(
                stat.name,
                stat.pass,
                format!("checked {}, worst excess {:e}", stat.checked, stat.worst_excess),
            ));
        }
        suite_metrics = json!({
            "eta_tail_fitted_ratio": suite.eta_tail_fitted_ratio,
            "alpha_n": suite.alpha_n,
            "centered_bound": suite.bound,
        });
    }
    if bundle.law.lookahead() == 0 {
        let lb = decompose::dobrushin_lower_bound_check(&bundle.law, &bundle.rewards)?;
        verdicts.push(Verdict::new(
            "variance-lower-bound",
            lb.pass,
            format!("lhs {} vs Var {}", lb.lhs, lb.var_sn),
        ));
    }

    let metrics = json!({
        "provenance": bundle.provenance,
        "mean_sn": report.mean_sn,
        "var_sn": report.var_sn,
        "mds_second_moment_total": report.mds_second_moment_total(),
        "v_m_second_moment": report.v_m_second_moment,
        "delta_n_second_moment": report.delta_n_second_moment,
        "alpha_n": report.alpha_n,
        "centered_bound": report.centered.bound(),
        "suite": suite_metrics,
    });
    let files = vec![(
        "decomposition.csv".to_string(),
        csv_string(&["i", "d_second_moment", "value_to_go_linf"], &value_linf_rows(&report)),
    )];
    Ok(KindOutput { verdicts, metrics, files })
}

// ---------------------------------------------------------------------
// inventory
// ---------------------------------------------------------------------

fn convexity_floor(values: &[f64]) -> f64 {
    let mut worst = f64::INFINITY;
    for w in values.windows(3) {
        worst = worst.min(w[0] - 2.0 * w[1] + w[2]);
    }
    worst
}

fn run_inventory(config: &InventoryConfig) -> Result<KindOutput, RunError> {
    let demand = config.demand.to_density()?;
    let model =
        InventoryModel::new(config.c, config.c_h, config.c_p, demand, config.grid_step)?;
    let h = model.grid_step;
    let solution = inventory::solve_base_stock(&model, config.n)?;
    let (law, rewards) =
        inventory::build_inventory_chain(&model, &solution, config.n, config.start_state)?;

    let mut verdicts = Vec::new();
    verdicts.push(Verdict::new(
        "newsvendor-quantile",
        (solution.levels[0] - solution.s1_quantile).abs() <= 2.0 * h,
        format!("s_1 = {} vs quantile {}", solution.levels[0], solution.s1_quantile),
    ));
    verdicts.push(Verdict::new(
        "levels-monotone",
        solution.levels.windows(2).all(|w| w[0] <= w[1]),
        format!("s_1 = {}, s_n = {}", solution.levels[0], solution.levels.last().unwrap()),
    ));
    verdicts.push(Verdict::new(
        "level-upper-bound",
        *solution.levels.last().unwrap() <= solution.s_inf + 2.0 * h,
        format!("s_n = {} vs s_inf {}", solution.levels.last().unwrap(), solution.s_inf),
    ));
    let convexity = solution
        .value_functions
        .iter()
        .map(|v| convexity_floor(v))
        .fold(f64::INFINITY, f64::min);
    verdicts.push(Verdict::new(
        "value-convexity",
        convexity >= -1e-9,
        format!("min second difference {convexity:e}"),
    ));

    let (mean_cost, var_cost) = decompose::moments_exact(&law, &rewards)?;
    let start_idx = law.grid().nearest(config.start_state);
    let v_n = solution.value_functions[config.n][start_idx];
    verdicts.push(Verdict::new(
        "cost-identity",
        (mean_cost - v_n).abs() <= 2.0 * h * config.n as f64,
        format!("exact mean {mean_cost} vs value function {v_n}"),
    ));

    let alpha_cert = inventory::inventory_alpha_certificate(&model, &solution, &law)?;
    verdicts.push(Verdict::new(
        "alpha-certificate",
        alpha_cert.pass,
        format!(
            "alpha {} vs bound {}, worst TV probe error {:e}",
            alpha_cert.alpha_n, alpha_cert.closed_form_bound, alpha_cert.tv_probe_worst_error
        ),
    ));

    let bivariate = inventory::bivariate_degeneracy_demo(&law)?;
    verdicts.push(Verdict::new(
        "bivariate-degeneracy",
        bivariate.alpha_hat == 0.0 && bivariate.rho_hat == 1.0,
        format!(
            "alpha_hat {}, rho_hat {}, measurability gap {:e}",
            bivariate.alpha_hat, bivariate.rho_hat, bivariate.measurability_gap
        ),
    ));

    let mut growth_metrics = Value::Null;
    if let Some(n_list) = &config.n_list {
        let growth =
            inventory::inventory_variance_growth(&model, &solution, n_list, config.start_state)?;
        verdicts.push(Verdict::new(
            "variance-growth",
            growth.pass,
            format!("beta {} slope {}", growth.beta, growth.slope),
        ));
        growth_metrics = json!({
            "horizons": growth.horizons,
            "variances": growth.variances,
            "beta": growth.beta,
            "slope": growth.slope,
            "doubling_ratios": growth.doubling_ratios,
        });
    }

    let mut files = vec![(
        "base_stock_levels.csv".to_string(),
        csv_string(
            &["k", "s_k"],
            &solution
                .levels
                .iter()
                .enumerate()
                .map(|(i, s)| vec![format!("{}", i + 1), format!("{s}")])
                .collect::<Vec<_>>(),
        ),
    )];

    let mut clt_metrics = Value::Null;
    if let Some(replications) = config.replications {
        let batch = montecarlo::sample_totals(&law, &rewards, config.seed, replications)?;
        let clt = montecarlo::normality_report(&batch, Some((mean_cost, var_cost)))
            .with_condition(rewards.bound(), alpha_cert.alpha_n, var_cost);
        let ks = clt.ks_distance.unwrap_or(f64::NAN);
        verdicts.push(Verdict::new(
            "normality",
            !clt.degenerate && ks <= KS_THRESHOLD,
            format!("ks {ks} (threshold {KS_THRESHOLD})"),
        ));
        let standardized: Vec<f64> = batch
            .totals
            .iter()
            .map(|&t| (t - mean_cost) / var_cost.sqrt())
            .collect();
        files.push((
            "standardized_hist.csv".to_string(),
            csv_string(
                &["bin_center", "empirical_density", "normal_density"],
                &standardized_histogram_rows(&standardized, 40),
            ),
        ));
        files.push((
            "totals.csv".to_string(),
            csv_string(
                &["total"],
                &batch.totals.iter().map(|t| vec![format!("{t}")]).collect::<Vec<_>>(),
            ),
        ));
        clt_metrics = json!({
            "replications": replications,
            "ks_distance": clt.ks_distance,
            "condition_ratio": clt.condition_ratio,
            "sample_mean": clt.sample_mean,
            "sample_var": clt.sample_var,
        });
    }

    let metrics = json!({
        "grid_step": h,
        "grid_len": law.grid().len(),
        "s1": solution.levels[0],
        "s1_quantile": solution.s1_quantile,
        "s_n": solution.levels.last().unwrap(),
        "s_inf": solution.s_inf,
        "alpha_n": alpha_cert.alpha_n,
        "alpha_bound": alpha_cert.closed_form_bound,
        "mean_cost": mean_cost,
        "var_cost": var_cost,
        "beta": inventory::closed_form_beta(&model, &solution),
        "cdf_product_infimum": inventory::cdf_product_infimum(&model, &solution),
        "bivariate": {
            "alpha_hat": bivariate.alpha_hat,
            "rho_hat": bivariate.rho_hat,
            "dense_delta": bivariate.dense_delta,
        },
        "growth": growth_metrics,
        "clt": clt_metrics,
    });
    Ok(KindOutput { verdicts, metrics, files })
}

// ---------------------------------------------------------------------
// altsub
// ---------------------------------------------------------------------

fn run_altsub(config: &crate::config::AltsubConfig) -> Result<KindOutput, RunError> {
    let solution = altsub::solve_alt_thresholds(config.n, config.grid_points)?;
    let (law, rewards) = altsub::build_altsub_chain(&solution, config.n)?;
    let step = solution.step;

    let mut verdicts = Vec::new();
    verdicts.push(Verdict::new(
        "threshold-identity",
        solution.identity_exact_through >= config.n.min(50),
        format!("exact through k = {}", solution.identity_exact_through),
    ));
    if config.n >= 3 {
        verdicts.push(Verdict::new(
            "threshold-floor",
            solution.min_threshold_from_k3 >= 1.0 / 6.0 - 2.0 * step,
            format!("min g_k = {} for k >= 3", solution.min_threshold_from_k3),
        ));
    }
    let mut alpha = f64::NAN;
    if config.n >= 4 {
        let cert = altsub::altsub_alpha_certificate(&law)?;
        alpha = cert.alpha;
        verdicts.push(Verdict::new(
            "alpha-certificate",
            cert.pass,
            format!(
                "max delta {} over {} steps, alpha {}",
                cert.max_delta, cert.steps_checked, cert.alpha
            ),
        ));
    }

    let (mean, var) = decompose::moments_exact(&law, &rewards)?;
    let rate = mean / config.n as f64;
    let target = 2.0 - 2.0_f64.sqrt();
    verdicts.push(Verdict::new(
        "mean-rate-band",
        (rate - target).abs() <= 10.0 / config.n as f64 + 0.01,
        format!("rate {rate} vs {target}"),
    ));

    // Pathwise agreement of the two selection counters on policy paths.
    let mut counts_agree = true;
    for path in 0..200u64 {
        let mut rng = montecarlo::path_rng(config.seed, path);
        let out = altsub::simulate_policy_path(&solution, config.n, &mut rng)?;
        if out.accepted != out.state_changes {
            counts_agree = false;
        }
    }
    verdicts.push(Verdict::new(
        "selection-count-identity",
        counts_agree,
        "accept count vs state-change count on 200 policy paths".to_string(),
    ));

    let mut files = Vec::new();
    let mut threshold_rows = Vec::new();
    for k in 1..=config.n {
        for (j, g) in solution.thresholds[k - 1].iter().enumerate() {
            threshold_rows.push(vec![
                format!("{k}"),
                format!("{}", solution.grid().point(j)),
                format!("{g}"),
            ]);
        }
    }
    files.push((
        "thresholds.csv".to_string(),
        csv_string(&["k", "x", "g_k"], &threshold_rows),
    ));

    let mut clt_metrics = Value::Null;
    if let Some(replications) = config.replications {
        let batch = montecarlo::sample_totals(&law, &rewards, config.seed, replications)?;
        let clt = montecarlo::normality_report(&batch, Some((mean, var)))
            .with_condition(rewards.bound(), alpha, var);
        let ks = clt.ks_distance.unwrap_or(f64::NAN);
        verdicts.push(Verdict::new(
            "normality",
            !clt.degenerate && ks <= KS_THRESHOLD,
            format!("ks {ks} (threshold {KS_THRESHOLD})"),
        ));
        let standardized: Vec<f64> =
            batch.totals.iter().map(|&t| (t - mean) / var.sqrt()).collect();
        files.push((
            "standardized_hist.csv".to_string(),
            csv_string(
                &["bin_center", "empirical_density", "normal_density"],
                &standardized_histogram_rows(&standardized, 40),
            ),
        ));
        files.push((
            "totals.csv".to_string(),
            csv_string(
                &["total"],
                &batch.totals.iter().map(|t| vec![format!("{t}")]).collect::<Vec<_>>(),
            ),
        ));
        clt_metrics = json!({
            "replications": replications,
            "ks_distance": clt.ks_distance,
            "condition_ratio": clt.condition_ratio,
        });
    }

    let metrics = json!({
        "grid_points": config.grid_points,
        "identity_exact_through": solution.identity_exact_through,
        "min_threshold_from_k3": solution.min_threshold_from_k3,
        "alpha": if alpha.is_nan() { Value::Null } else { json!(alpha) },
        "mean_selections": mean,
        "var_selections": var,
        "selection_rate": rate,
        "clt": clt_metrics,
    });
    Ok(KindOutput { verdicts, metrics, files })
}

// ---------------------------------------------------------------------
// clt
// ---------------------------------------------------------------------

/// One family member: the chain, rewards, and the ergodic coefficient to
/// use in the condition ratio.
fn family_member(
    family: &FamilySpec,
    n: usize,
) -> Result<(ChainLaw, RewardFunctionArray, f64), RunError> {
    match family {
        FamilySpec::Inventory { c, c_h, c_p, demand, grid_step, start_state } => {
            let model = InventoryModel::new(*c, *c_h, *c_p, demand.to_density()?, *grid_step)?;
            let solution = inventory::solve_base_stock(&model, n)?;
            let (law, rewards) =
                inventory::build_inventory_chain(&model, &solution, n, *start_state)?;
            let alpha = law.seq().minimal_ergodic_coefficient()?.alpha_n;
            Ok((law, rewards, alpha))
        }
        FamilySpec::Altsub { grid_points } => {
            let solution = altsub::solve_alt_thresholds(n, *grid_points)?;
            let (law, rewards) = altsub::build_altsub_chain(&solution, n)?;
            let alpha = altsub::altsub_alpha_certificate(&law)?.alpha;
            Ok((law, rewards, alpha))
        }
        FamilySpec::Counterexample { grid_points } => {
            let grid = std::sync::Arc::new(StateGrid::uniform(0.0, 1.0, *grid_points)?);
            let bundle = fixtures::parity_counterexample(n, grid)?;
            Ok((bundle.law, bundle.rewards, 1.0))
        }
    }
}

fn run_clt(config: &CltConfig) -> Result<KindOutput, RunError> {
    let mut entries = Vec::new();
    let mut per_n = Vec::new();
    let mut files = Vec::new();
    let largest = *config.n_list.iter().max().unwrap();
    for &n in &config.n_list {
        let (law, rewards, alpha) = family_member(&config.family, n)?;
        let (mean, var) = decompose::moments_exact(&law, &rewards)?;
        let batch =
            montecarlo::sample_totals(&law, &rewards, config.seed, config.replications)?;
        let clt = montecarlo::normality_report(&batch, Some((mean, var)))
            .with_condition(rewards.bound(), alpha, var);
        entries.push(ConditionEntry { horizon: n, bound: rewards.bound(), alpha_n: alpha, var_sn: var });
        per_n.push(json!({
            "n": n,
            "mean": mean,
            "var": var,
            "alpha": alpha,
            "bound": rewards.bound(),
            "ks_distance": clt.ks_distance,
            "degenerate": clt.degenerate,
            "condition_ratio": clt.condition_ratio,
        }));
        if n == largest && var > 0.0 {
            let standardized: Vec<f64> =
                batch.totals.iter().map(|&t| (t - mean) / var.sqrt()).collect();
            files.push((
                format!("standardized_hist_n{n}.csv"),
                csv_string(
                    &["bin_center", "empirical_density", "normal_density"],
                    &standardized_histogram_rows(&standardized, 40),
                ),
            ));
            files.push((
                format!("totals_n{n}.csv"),
                csv_string(
                    &["total"],
                    &batch.totals.iter().map(|t| vec![format!("{t}")]).collect::<Vec<_>>(),
                ),
            ));
        }
    }

    let trend = montecarlo::clt_condition_report(entries);
    let condition_rows: Vec<Vec<String>> = trend
        .entries
        .iter()
        .zip(&trend.ratios)
        .map(|(e, r)| {
            vec![
                format!("{}", e.horizon),
                format!("{}", e.bound),
                format!("{}", e.alpha_n),
                format!("{}", e.var_sn),
                format!("{r}"),
            ]
        })
        .collect();
    files.push((
        "condition.csv".to_string(),
        csv_string(&["n", "bound", "alpha", "var", "ratio"], &condition_rows),
    ));

    let normality_ok = per_n.iter().all(|entry| {
        !entry["degenerate"].as_bool().unwrap_or(true)
            && entry["ks_distance"].as_f64().map(|k| k <= KS_THRESHOLD).unwrap_or(false)
    });
    let verdicts = vec![
        Verdict::new(
            "condition-ratio-decreasing",
            trend.decreasing,
            format!("ratios {:?}", trend.ratios),
        ),
        Verdict::new(
            "normality-per-horizon",
            normality_ok,
            format!("ks threshold {KS_THRESHOLD}"),
        ),
    ];
    let metrics = json!({
        "per_horizon": per_n,
        "ratios": trend.ratios,
        "decreasing": trend.decreasing,
    });
    Ok(KindOutput { verdicts, metrics, files })
}

// ---------------------------------------------------------------------
// counterexample
// ---------------------------------------------------------------------

fn run_counterexample(config: &CounterexampleConfig) -> Result<KindOutput, RunError> {
    let grid = std::sync::Arc::new(StateGrid::uniform(0.0, 1.0, config.grid_points)?);
    let bundle = fixtures::parity_counterexample(config.n, std::sync::Arc::clone(&grid))?;
    let (mean, var) = decompose::moments_exact(&bundle.law, &bundle.rewards)?;
    let coord = fixtures::parity_coordinate_variance(&grid);

    let mut verdicts = Vec::new();
    let even = config.n % 2 == 0;
    if even {
        verdicts.push(Verdict::new(
            "variance-vanishes",
            var.abs() <= 1e-12,
            format!("Var[S_n] = {var:e}"),
        ));
    } else {
        verdicts.push(Verdict::new(
            "variance-matches-coordinate",
            (var - coord).abs() <= 1e-12,
            format!("Var[S_n] = {var} vs Var[X] = {coord}"),
        ));
    }

    // Sum of per-period variances grows like n * Var[X] regardless.
    let marginals = bundle.law.marginals();
    let g = grid.len();
    let mut period_var_sum = 0.0;
    for i in 1..=config.n {
        let mu = &marginals[i - 1];
        let kernel = bundle.law.seq().step(i)?;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for x in 0..g {
            for y in 0..g {
                let p = mu[x] * kernel.entry(x, y);
                let z = bundle.rewards.at1(i, x, y);
                m1 += p * z;
                m2 += p * z * z;
            }
        }
        period_var_sum += m2 - m1 * m1;
    }
    verdicts.push(Verdict::new(
        "period-variance-sum",
        (period_var_sum - config.n as f64 * coord).abs() <= 1e-12,
        format!("sum {} vs n Var[X] {}", period_var_sum, config.n as f64 * coord),
    ));

    // The CLT gate must reject this family: the ratio never decreases.
    let sizes = [config.n, config.n + 2, config.n + 4];
    let mut entries = Vec::new();
    for &n in &sizes {
        let b = fixtures::parity_counterexample(n, std::sync::Arc::clone(&grid))?;
        let (_, v) = decompose::moments_exact(&b.law, &b.rewards)?;
        entries.push(ConditionEntry {
            horizon: n,
            bound: b.rewards.bound(),
            alpha_n: 1.0,
            var_sn: v,
        });
    }
    let trend = montecarlo::clt_condition_report(entries);
    verdicts.push(Verdict::new(
        "clt-condition-fails-as-expected",
        !trend.decreasing,
        format!("ratios {:?}", trend.ratios),
    ));

    let mut clt_metrics = Value::Null;
    if let Some(replications) = config.replications {
        let batch =
            montecarlo::sample_totals(&bundle.law, &bundle.rewards, config.seed, replications)?;
        let clt = montecarlo::normality_report(&batch, Some((mean, var)));
        clt_metrics = json!({
            "replications": replications,
            "degenerate": clt.degenerate,
            "ks_distance": clt.ks_distance,
        });
        if even {
            verdicts.push(Verdict::new(
                "degenerate-flagged",
                clt.degenerate,
                "zero-variance batch must be flagged degenerate".to_string(),
            ));
        } else {
            let ks = clt.ks_distance.unwrap_or(0.0);
            verdicts.push(Verdict::new(
                "negative-control",
                ks >= 0.04,
                format!("ks {ks} >= 0.04 flags the non-normal total"),
            ));
        }
    }

    let metrics = json!({
        "n": config.n,
        "even": even,
        "mean_sn": mean,
        "var_sn": var,
        "coordinate_variance": coord,
        "period_variance_sum": period_var_sum,
        "degenerate": var.abs() <= 1e-12,
        "condition_ratios": trend.ratios,
        "clt": clt_metrics,
    });
    Ok(KindOutput { verdicts, metrics, files: Vec::new() })
}
