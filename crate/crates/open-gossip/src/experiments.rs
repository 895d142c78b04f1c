//! Experiment configuration, named presets, and the command drivers behind
//! the command-line interface.
//!
//! A single JSON-serializable [`ExperimentConfig`] describes either a
//! fixed-size system (gossip + replacement) or an open system (gossip +
//! arrival + departure). The four commands consume it:
//!
//! * `simulate` — Monte Carlo trajectories or ensemble statistics,
//! * `analyze` — exact moment dynamics and variance envelopes,
//! * `bound`   — stationary variance bounds vs. simulation, per gossip ratio,
//! * `spectrum` — eigenvalues/eigenvectors of the fixed-size moment flow.
//!
//! Every command returns a [`ResultTable`]; serialization is deterministic
//! so repeated runs with the same seed produce byte-identical output.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{
    estimate_asymptotic_moments, estimate_asymptotic_variance, run_ensemble, run_trajectory,
    SimMode, SimSetup,
};
use crate::error::GossipError;
use crate::events::DeparturePolicy;
use crate::fixed_analytics::{
    build_fixed_size_ode, fixed_point, solve_ode, spectrum, variance_bound_adversarial,
    variance_bound_ode_random,
};
use crate::model::{RatesConfig, ValueDistribution};
use crate::open_analytics::{
    best_dual_bound, conditioned_moment_ode, default_j_max, explicit_bound,
    steady_state_recurrence_check, variance_flow_envelope, ConditionedMoments,
};
use crate::table::{fmt_num, ResultTable};

/// Whether the population is closed (gossip + replacement at fixed size)
/// or open (gossip + arrival + departure).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Open,
}

/// Departure target selection, as named in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Random,
    MinAbsValue,
}

impl PolicyChoice {
    pub fn policy(self) -> DeparturePolicy {
        match self {
            PolicyChoice::Random => DeparturePolicy::Random,
            PolicyChoice::MinAbsValue => DeparturePolicy::MinAbsValue,
        }
    }
}

/// Full description of one experiment, loadable from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Population size (fixed mode).
    pub n: Option<u32>,
    /// Initial population size (open mode).
    pub n_init: Option<u32>,
    pub lambda_g: f64,
    pub lambda_r: f64,
    pub lambda_a: f64,
    pub lambda_d: f64,
    pub sigma2: f64,
    pub distribution: ValueDistribution,
    pub departure_policy: PolicyChoice,
    pub t_end: f64,
    pub grid_step: f64,
    pub replications: u64,
    pub seed: u64,
    /// Time to discard before stationary estimates (`bound`, and the
    /// asymptotic summary of `simulate`). Zero disables them.
    pub burn_in: f64,
    /// Truncation cap for open-system analytics; derived from n₀ if absent.
    pub j_max: Option<usize>,
    /// Gossip-to-death rate ratios swept by the `bound` command.
    pub gamma_grid: Option<Vec<f64>>,
    /// Record individual events in single-trajectory output.
    pub log_events: bool,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            mode: Mode::Fixed,
            n: None,
            n_init: None,
            lambda_g: 0.0,
            lambda_r: 0.0,
            lambda_a: 0.0,
            lambda_d: 0.0,
            sigma2: 1.0,
            distribution: ValueDistribution::Normal,
            departure_policy: PolicyChoice::Random,
            t_end: 10.0,
            grid_step: 0.5,
            replications: 1,
            seed: 0,
            burn_in: 0.0,
            j_max: None,
            gamma_grid: None,
            log_events: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), GossipError> {
        self.rates().validate()?;
        match self.mode {
            Mode::Fixed => {
                let n = self.n.ok_or_else(|| {
                    GossipError::Config("fixed mode requires the field \"n\"".into())
                })?;
                if n == 0 {
                    return Err(GossipError::Config("n must be at least 1".into()));
                }
                if self.n_init.is_some() {
                    return Err(GossipError::Config(
                        "\"n_init\" only applies to open mode".into(),
                    ));
                }
                if self.lambda_a != 0.0 || self.lambda_d != 0.0 {
                    return Err(GossipError::Config(
                        "arrival/departure rates only apply to open mode".into(),
                    ));
                }
            }
            Mode::Open => {
                if self.n_init.is_none() {
                    return Err(GossipError::Config(
                        "open mode requires the field \"n_init\"".into(),
                    ));
                }
                if self.n.is_some() {
                    return Err(GossipError::Config("\"n\" only applies to fixed mode".into()));
                }
                if self.lambda_r != 0.0 {
                    return Err(GossipError::Config(
                        "the replacement rate only applies to fixed mode".into(),
                    ));
                }
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(GossipError::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= self.t_end) {
            return Err(GossipError::Config(format!(
                "grid_step must lie in (0, t_end], got {}",
                self.grid_step
            )));
        }
        if self.replications == 0 {
            return Err(GossipError::Config("replications must be at least 1".into()));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_end) {
            return Err(GossipError::Config(format!(
                "burn_in must lie in [0, t_end), got {}",
                self.burn_in
            )));
        }
        if let Some(gs) = &self.gamma_grid {
            if gs.is_empty() || gs.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(GossipError::Config(
                    "gamma_grid must be a non-empty list of ratios >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn rates(&self) -> RatesConfig {
        RatesConfig {
            lambda_g: self.lambda_g,
            lambda_r: self.lambda_r,
            lambda_a: self.lambda_a,
            lambda_d: self.lambda_d,
            sigma2: self.sigma2,
        }
    }

    pub fn sim_mode(&self) -> SimMode {
        match self.mode {
            Mode::Fixed => SimMode::FixedSize {
                n: self.n.unwrap_or(1),
            },
            Mode::Open => SimMode::Open {
                n_init: self.n_init.unwrap_or(0),
            },
        }
    }

    pub fn setup(&self) -> SimSetup {
        let mut setup = SimSetup::new(self.sim_mode(), self.rates());
        setup.policy = self.departure_policy.policy();
        setup.dist = self.distribution;
        setup.log_events = self.log_events;
        setup
    }

    /// Uniform sampling grid 0, step, 2·step, …, t_end.
    pub fn grid(&self) -> Vec<f64> {
        let count = (self.t_end / self.grid_step + 1e-9).floor() as usize;
        (0..=count)
            .map(|k| (k as f64 * self.grid_step).min(self.t_end))
            .collect()
    }

    /// Short stable fingerprint of the full configuration.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Loads and validates a configuration from a JSON file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, GossipError> {
    let text = fs::read_to_string(path)
        .map_err(|e| GossipError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| GossipError::Config(format!("invalid config {}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Built-in configurations reproducing the library's reference experiments.
pub fn preset(name: &str) -> Result<ExperimentConfig, GossipError> {
    let base = ExperimentConfig::default();
    let config = match name {
        // One annotated fixed-size trajectory with the full event log.
        "fig1" => ExperimentConfig {
            mode: Mode::Fixed,
            n: Some(4),
            lambda_g: 9.0,
            lambda_r: 1.0,
            t_end: 5.0,
            grid_step: 0.05,
            replications: 1,
            seed: 1001,
            log_events: true,
            ..base
        },
        // Ensemble moments of a moderately large fixed-size system.
        "fig3" => ExperimentConfig {
            mode: Mode::Fixed,
            n: Some(50),
            lambda_g: 19.0,
            lambda_r: 1.0,
            t_end: 5.0,
            grid_step: 0.125,
            replications: 10_000,
            seed: 1003,
            burn_in: 2.5,
            ..base
        },
        // Variance envelopes vs. worst-case departures in a small system.
        "fig4" => ExperimentConfig {
            mode: Mode::Fixed,
            n: Some(4),
            lambda_g: 9.0,
            lambda_r: 1.0,
            t_end: 3.0,
            grid_step: 0.1,
            replications: 10_000,
            seed: 1004,
            departure_policy: PolicyChoice::MinAbsValue,
            ..base
        },
        // Open system: size distribution and stationary variance bounds.
        "fig5" => ExperimentConfig {
            mode: Mode::Open,
            n_init: Some(5),
            lambda_a: 5.0,
            lambda_d: 1.0,
            t_end: 30.0,
            grid_step: 0.25,
            replications: 10_000,
            seed: 1005,
            burn_in: 10.0,
            gamma_grid: Some(vec![1.0, 2.0, 5.0, 10.0, 20.0]),
            ..base
        },
        other => {
            return Err(GossipError::Config(format!(
                "unknown preset \"{other}\" (available: fig1, fig3, fig4, fig5)"
            )))
        }
    };
    config.validate()?;
    Ok(config)
}

/// The four operations exposed by the command-line interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Analyze,
    Bound,
    Spectrum,
}

/// Runs one command against a validated configuration.
pub fn run_command(command: Command, config: &ExperimentConfig) -> Result<ResultTable, GossipError> {
    config.validate()?;
    match command {
        Command::Simulate => cmd_simulate(config),
        Command::Analyze => cmd_analyze(config),
        Command::Bound => cmd_bound(config),
        Command::Spectrum => cmd_spectrum(config),
    }
}

fn common_metadata(table: &mut ResultTable, config: &ExperimentConfig, command: &str) {
    table.meta("command", command);
    table.meta(
        "mode",
        match config.mode {
            Mode::Fixed => "fixed",
            Mode::Open => "open",
        },
    );
    match config.mode {
        Mode::Fixed => {
            table.meta("n", config.n.unwrap_or(0));
            table.meta("lambda_g", fmt_num(config.lambda_g));
            table.meta("lambda_r", fmt_num(config.lambda_r));
        }
        Mode::Open => {
            table.meta("n_init", config.n_init.unwrap_or(0));
            table.meta("lambda_g", fmt_num(config.lambda_g));
            table.meta("lambda_a", fmt_num(config.lambda_a));
            table.meta("lambda_d", fmt_num(config.lambda_d));
        }
    }
    table.meta("sigma2", fmt_num(config.sigma2));
    table.meta("config_hash", config.config_hash());
}

fn cmd_simulate(config: &ExperimentConfig) -> Result<ResultTable, GossipError> {
    let setup = config.setup();
    let grid = config.grid();
    if config.replications == 1 {
        let traj = run_trajectory(&setup, config.t_end, &grid, config.seed)?;
        let mut table = ResultTable::new(&[
            "t",
            "event",
            "agents",
            "size",
            "squared_mean",
            "mean_of_squares",
            "variance",
        ]);
        common_metadata(&mut table, config, "simulate");
        table.meta("seed", config.seed);
        table.meta("replications", 1);
        table.meta("events_applied", traj.event_count);
        if let Some(t) = traj.absorbed_at {
            table.meta("absorbed_at", fmt_num(t));
        }
        let mut e = 0;
        for k in 0..traj.times.len() {
            while e < traj.events.len() && traj.events[e].time < traj.times[k] {
                let ev = &traj.events[e];
                let agents = ev
                    .agents
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(";");
                table.push_row(vec![
                    fmt_num(ev.time),
                    ev.kind.to_string(),
                    agents,
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                e += 1;
            }
            let d = traj.descriptors[k];
            table.push_row(vec![
                fmt_num(traj.times[k]),
                String::new(),
                String::new(),
                traj.sizes[k].to_string(),
                d.map(|d| fmt_num(d.squared_mean)).unwrap_or_default(),
                d.map(|d| fmt_num(d.mean_of_squares)).unwrap_or_default(),
                d.map(|d| fmt_num(d.variance)).unwrap_or_default(),
            ]);
        }
        Ok(table)
    } else {
        let stats = run_ensemble(&setup, config.t_end, &grid, config.replications, config.seed)?;
        let mut table = ResultTable::new(&[
            "t",
            "occupied",
            "mean_size",
            "mean_squared_mean",
            "se_squared_mean",
            "mean_mean_of_squares",
            "se_mean_of_squares",
            "mean_variance",
            "se_variance",
        ]);
        common_metadata(&mut table, config, "simulate");
        table.meta("seed", config.seed);
        table.meta("replications", config.replications);
        for k in 0..stats.times.len() {
            let hist = &stats.size_histogram[k];
            let total: u64 = hist.values().sum();
            let mean_size = if total > 0 {
                hist.iter().map(|(j, c)| *j as f64 * *c as f64).sum::<f64>() / total as f64
            } else {
                f64::NAN
            };
            table.push_row(vec![
                fmt_num(stats.times[k]),
                stats.occupied[k].to_string(),
                fmt_num(mean_size),
                fmt_num(stats.mean[k].squared_mean),
                fmt_num(stats.std_error[k].squared_mean),
                fmt_num(stats.mean[k].mean_of_squares),
                fmt_num(stats.std_error[k].mean_of_squares),
                fmt_num(stats.mean[k].variance),
                fmt_num(stats.std_error[k].variance),
            ]);
        }
        if config.burn_in > 0.0 {
            let est = estimate_asymptotic_moments(
                &setup,
                config.burn_in,
                config.t_end,
                config.replications,
                config.seed,
            )?;
            table.meta("asymptotic_squared_mean", fmt_num(est.estimate.squared_mean));
            table.meta("asymptotic_mean_of_squares", fmt_num(est.estimate.mean_of_squares));
            table.meta("asymptotic_variance", fmt_num(est.estimate.variance));
            table.meta("asymptotic_se_variance", fmt_num(est.std_error.variance));
            table.meta("burn_in", fmt_num(config.burn_in));
        }
        Ok(table)
    }
}

fn cmd_analyze(config: &ExperimentConfig) -> Result<ResultTable, GossipError> {
    let grid = config.grid();
    let rates = config.rates();
    match config.mode {
        Mode::Fixed => {
            let n = config.n.unwrap();
            let sys = build_fixed_size_ode(n, &rates)?;
            let x0 = [config.sigma2 / n as f64, config.sigma2];
            let xs = solve_ode(&sys, x0, &grid);
            let v0 = (1.0 - 1.0 / n as f64) * config.sigma2;
            let random = variance_bound_ode_random(n, &rates, v0, &grid)?;
            let adversarial = variance_bound_adversarial(&rates, v0, &grid)?;
            let mut table = ResultTable::new(&[
                "t",
                "squared_mean",
                "mean_of_squares",
                "variance",
                "var_bound_random",
                "var_bound_adversarial",
            ]);
            common_metadata(&mut table, config, "analyze");
            match fixed_point(n, &rates) {
                Ok((sq, mos, var)) => {
                    table.meta("fixed_point_squared_mean", fmt_num(sq));
                    table.meta("fixed_point_mean_of_squares", fmt_num(mos));
                    table.meta("fixed_point_variance", fmt_num(var));
                }
                Err(GossipError::ClosedSystem(_)) => {
                    table.meta("fixed_point", "none (mean square is conserved)");
                }
                Err(e) => return Err(e),
            }
            let spec = spectrum(n, &rates)?;
            table.meta("rate_fast", fmt_num(spec.r1));
            table.meta("rate_slow", fmt_num(spec.r2));
            if let Some(v) = random.stationary {
                table.meta("var_bound_random_stationary", fmt_num(v));
            }
            if let Some(v) = adversarial.stationary {
                table.meta("var_bound_adversarial_stationary", fmt_num(v));
            }
            if adversarial.unbounded {
                table.meta("var_bound_adversarial_unbounded", "true");
            }
            for k in 0..grid.len() {
                table.push_row(vec![
                    fmt_num(grid[k]),
                    fmt_num(xs[k][0]),
                    fmt_num(xs[k][1]),
                    fmt_num(xs[k][1] - xs[k][0]),
                    fmt_num(random.values[k]),
                    fmt_num(adversarial.values[k]),
                ]);
            }
            Ok(table)
        }
        Mode::Open => {
            let n0 = rates.n0().ok_or_else(|| {
                GossipError::ClosedSystem("open-system analysis needs lambda_d > 0".into())
            })?;
            let jm = config.j_max.unwrap_or_else(|| default_j_max(n0));
            let n_init = config.n_init.unwrap();
            if (n_init as usize) > jm {
                return Err(GossipError::Config(format!(
                    "n_init {n_init} exceeds the truncation cap {jm}"
                )));
            }
            let init = ConditionedMoments::point_mass(jm, n_init, config.sigma2);
            let sol = conditioned_moment_ode(&rates, jm, &init, &grid)?;
            let env = variance_flow_envelope(
                &rates,
                &init.pi,
                &iid_variance_profile(jm, n_init, config.sigma2),
                &grid,
            )?;
            let mut table = ResultTable::new(&[
                "t",
                "mean_size",
                "expected_squared_mean",
                "expected_mean_of_squares",
                "expected_variance",
                "variance_envelope",
            ]);
            common_metadata(&mut table, config, "analyze");
            table.meta("j_max", jm);
            table.meta("boundary_flux", fmt_num(sol.boundary_flux));
            if sol.flux_warning {
                table.meta("boundary_flux_warning", "true");
            }
            for (k, st) in sol.states.iter().enumerate() {
                let mean_size: f64 = st.pi.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
                let ex = st.expected();
                table.push_row(vec![
                    fmt_num(st.time),
                    fmt_num(mean_size),
                    fmt_num(ex[0]),
                    fmt_num(ex[1]),
                    fmt_num(st.expected_variance()),
                    fmt_num(env.aggregate[k]),
                ]);
            }
            let last = sol.states.last().unwrap();
            let x: Vec<[f64; 2]> = (0..=jm)
                .map(|j| last.conditional(j, 1e-300).unwrap_or([0.0, 0.0]))
                .collect();
            if let Ok(res) = steady_state_recurrence_check(&rates, &x) {
                let max_res = res
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j < jm && last.pi[*j] > 1e-8)
                    .map(|(_, r)| *r)
                    .fold(0.0_f64, f64::max);
                table.meta("final_recurrence_residual", fmt_num(max_res));
            }
            Ok(table)
        }
    }
}

/// Conditional variance profile of an i.i.d. start: V_j = (1 − 1/j)σ² at
/// the initial size, zero elsewhere (only the initial entry is read).
fn iid_variance_profile(j_max: usize, n_init: u32, sigma2: f64) -> Vec<f64> {
    let mut v = vec![0.0; j_max + 1];
    if n_init >= 1 {
        v[n_init as usize] = (1.0 - 1.0 / n_init as f64) * sigma2;
    }
    v
}

fn cmd_bound(config: &ExperimentConfig) -> Result<ResultTable, GossipError> {
    if config.mode != Mode::Open {
        return Err(GossipError::Config(
            "the bound command applies to open mode only".into(),
        ));
    }
    let ld = config.lambda_d;
    let n0 = config.rates().n0().ok_or_else(|| {
        GossipError::ClosedSystem("stationary bounds need lambda_d > 0".into())
    })?;
    let jm = config.j_max.unwrap_or_else(|| default_j_max(n0));
    let gammas = match &config.gamma_grid {
        Some(gs) => gs.clone(),
        None => vec![config.lambda_g / ld],
    };
    let burn_in = if config.burn_in > 0.0 {
        config.burn_in
    } else {
        config.t_end / 2.0
    };
    let mut table = ResultTable::new(&[
        "gamma",
        "mc_variance",
        "mc_std_error",
        "bound_dual",
        "bound_explicit",
        "dual_feasible",
        "dual_min_residual",
        "explicit_cert_feasible",
        "explicit_cert_min_residual",
        "truncation_slack",
    ]);
    common_metadata(&mut table, config, "bound");
    table.meta("n0", fmt_num(n0));
    table.meta("j_max", jm);
    table.meta("burn_in", fmt_num(burn_in));
    table.meta("replications", config.replications);
    table.meta("seed", config.seed);
    table.meta(
        "note",
        "bound_dual is the optimum of the certificate system (zero duality gap, checked at runtime)",
    );
    for (row, &gamma) in gammas.iter().enumerate() {
        let mut cfg = config.clone();
        cfg.lambda_g = gamma * ld;
        cfg.gamma_grid = None;
        let rates = cfg.rates();
        let setup = cfg.setup();
        let (mc_var, mc_se) = estimate_asymptotic_variance(
            &setup,
            burn_in,
            cfg.t_end,
            cfg.replications,
            // Decorrelate the sweep rows without touching per-row streams.
            cfg.seed + row as u64,
        )?;
        let (dual, dual_cert) = best_dual_bound(&rates, jm)?;
        let explicit = explicit_bound(&rates)?;
        table.push_row(vec![
            fmt_num(gamma),
            fmt_num(mc_var),
            fmt_num(mc_se),
            fmt_num(dual),
            fmt_num(explicit.value),
            dual_cert.feasible.to_string(),
            fmt_num(dual_cert.min_residual),
            explicit.certificate.feasible.to_string(),
            fmt_num(explicit.certificate.min_residual),
            fmt_num(dual_cert.truncation_slack),
        ]);
    }
    Ok(table)
}

fn cmd_spectrum(config: &ExperimentConfig) -> Result<ResultTable, GossipError> {
    if config.mode != Mode::Fixed {
        return Err(GossipError::Config(
            "the spectrum command applies to fixed mode only".into(),
        ));
    }
    let n = config.n.unwrap();
    let spec = spectrum(n, &config.rates())?;
    let mut table = ResultTable::new(&[
        "n",
        "lambda_g",
        "lambda_r",
        "r1",
        "r2",
        "r1_asymptote",
        "r2_asymptote",
        "v1_squared_mean",
        "v1_mean_of_squares",
        "v2_squared_mean",
        "v2_mean_of_squares",
        "defective",
    ]);
    common_metadata(&mut table, config, "spectrum");
    table.push_row(vec![
        n.to_string(),
        fmt_num(config.lambda_g),
        fmt_num(config.lambda_r),
        fmt_num(spec.r1),
        fmt_num(spec.r2),
        fmt_num(spec.r1_asymptote),
        fmt_num(spec.r2_asymptote),
        fmt_num(spec.v1[0]),
        fmt_num(spec.v1[1]),
        fmt_num(spec.v2[0]),
        fmt_num(spec.v2[1]),
        spec.defective.to_string(),
    ]);
    Ok(table)
}
