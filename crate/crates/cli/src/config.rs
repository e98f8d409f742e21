//! Flat key-value run configuration with dotted section prefixes.
//!
//! A config file is line-oriented `key = value` text; `#` starts a comment
//! line and blank lines are skipped. Every key is validated against its
//! module's constraints before any simulation starts, unknown keys are
//! rejected, and the resolved configuration (defaults included) is echoed
//! into the run summary so a run can be reproduced from its summary alone.

use std::collections::BTreeMap;
use std::fmt;

use asir_core::episodes::ZoneConfig;
use asir_core::model::{FeedbackParams, ModelState, Outcome};
use asir_core::sensitivity::{ParamGrid, SeedMode};
use asir_core::stochastic::NoiseSpec;

/// Experiment selector, one per subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    SweepGrid,
    Fit,
    Predict,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Exp4 => "exp4",
            Experiment::SweepGrid => "sweep-grid",
            Experiment::Fit => "fit",
            Experiment::Predict => "predict",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Configuration failures; these map to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type ConfigResult<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> ConfigResult<T> {
    Err(ConfigError(msg.into()))
}

/// Raw parsed key-value pairs with consumption tracking.
struct RawConfig {
    values: BTreeMap<String, String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl RawConfig {
    fn parse(text: &str) -> ConfigResult<Self> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return err(format!("line {line_no}: expected `key = value`, got `{trimmed}`"));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return err(format!("line {line_no}: empty key"));
            }
            if values.insert(key.clone(), value).is_some() {
                return err(format!("line {line_no}: duplicate key `{key}`"));
            }
        }
        Ok(Self {
            values,
            consumed: Default::default(),
        })
    }

    fn get(&self, key: &str) -> Option<&str> {
        let found = self.values.get(key).map(String::as_str);
        if found.is_some() {
            self.consumed.borrow_mut().insert(key.to_string());
        }
        found
    }

    fn f64(&self, key: &str, default: f64) -> ConfigResult<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map_or_else(|| err(format!("{key}: expected a finite number, got `{raw}`")), Ok),
        }
    }

    fn u64(&self, key: &str, default: u64) -> ConfigResult<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse::<u64>()
                .map_err(|_| ConfigError(format!("{key}: expected an unsigned integer, got `{raw}`"))),
        }
    }

    fn usize(&self, key: &str, default: usize) -> ConfigResult<usize> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    fn bool(&self, key: &str, default: bool) -> ConfigResult<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(raw) => err(format!("{key}: expected `true` or `false`, got `{raw}`")),
        }
    }

    fn script(&self, key: &str, default: &str) -> ConfigResult<Vec<Outcome>> {
        parse_script(key, self.get(key).unwrap_or(default))
    }

    fn f64_list(&self, key: &str, default: &str) -> ConfigResult<Vec<f64>> {
        let raw = self.get(key).unwrap_or(default);
        raw.split(',')
            .map(|part| {
                let part = part.trim();
                part.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        ConfigError(format!("{key}: expected comma-separated numbers, got `{part}`"))
                    })
            })
            .collect()
    }

    fn seed_mode(&self, key: &str, default: SeedMode) -> ConfigResult<SeedMode> {
        match self.get(key) {
            None => Ok(default),
            Some("per_cell") => Ok(SeedMode::PerCell),
            Some("shared") => Ok(SeedMode::Shared),
            Some(raw) => err(format!("{key}: expected `per_cell` or `shared`, got `{raw}`")),
        }
    }

    /// Every provided key must have been consumed by the resolver.
    fn reject_unconsumed(&self, experiment: Experiment) -> ConfigResult<()> {
        let consumed = self.consumed.borrow();
        for key in self.values.keys() {
            if !consumed.contains(key) {
                return err(format!("unknown key `{key}` (not used by {experiment})"));
            }
        }
        Ok(())
    }
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub stream_id: u64,
    pub state: ModelState,
    pub feedback: FeedbackParams,
    pub noise: NoiseSpec,
    pub sweep_gamma_from: f64,
    pub sweep_gamma_to: f64,
    pub sweep_steps: usize,
    pub sweep_n_trials: u64,
    pub horizon: usize,
    pub success_prob: f64,
    pub update_when_not_fired: bool,
    pub script_success: Vec<Outcome>,
    pub script_failure: Vec<Outcome>,
    pub zone: Option<ZoneConfig>,
    pub pressure_state: ModelState,
    pub cohort_success_prob: f64,
    pub cohort_agents: usize,
    pub cohort_horizon: usize,
    pub cohort_split_after: usize,
    pub grid: ParamGrid,
    pub grid_seed_mode: SeedMode,
    pub grid_horizon: usize,
    pub fit_band_low: f64,
    pub fit_band_high: f64,
    /// Effective `key = value` view of everything above, echoed into the
    /// run summary.
    pub effective: BTreeMap<String, String>,
}

struct StateDefaults {
    lambda: f64,
    gamma: f64,
    psi: f64,
    theta: f64,
    phi: f64,
}

fn state_defaults(experiment: Experiment) -> StateDefaults {
    match experiment {
        Experiment::Exp1 => StateDefaults {
            lambda: 3.0,
            gamma: 0.0,
            psi: 1.0,
            theta: 5.0,
            phi: 4.0,
        },
        Experiment::Exp2 | Experiment::Exp3 => StateDefaults {
            lambda: 2.0,
            gamma: 1.0,
            psi: 2.0,
            theta: 5.0,
            phi: 5.0,
        },
        Experiment::Exp4 => StateDefaults {
            lambda: 2.0,
            gamma: 1.0,
            psi: 4.0,
            theta: 5.0,
            phi: 5.0,
        },
        // The sweep replaces gamma per grid point; cohort runs need a
        // state whose condition fires at the start so early luck exists.
        Experiment::SweepGrid | Experiment::Fit | Experiment::Predict => StateDefaults {
            lambda: 3.0,
            gamma: 2.0,
            psi: 1.0,
            theta: 5.0,
            phi: 4.0,
        },
    }
}

struct FeedbackDefaults {
    alpha: f64,
    kappa: f64,
    theta_adj: f64,
    phi_adj: f64,
}

fn feedback_defaults(experiment: Experiment) -> FeedbackDefaults {
    match experiment {
        // The pressure-accumulation scenarios hold everything but psi
        // fixed; only beta and delta act.
        Experiment::Exp2 => FeedbackDefaults {
            alpha: 0.0,
            kappa: 0.0,
            theta_adj: 0.0,
            phi_adj: 0.0,
        },
        _ => FeedbackDefaults {
            alpha: 0.3,
            kappa: 0.4,
            theta_adj: 0.2,
            phi_adj: 0.2,
        },
    }
}

const DEFAULT_SCRIPT_SUCCESS: &str = "ssssfssssfssssf";
const DEFAULT_SCRIPT_FAILURE: &str = "ffffsffffsffffs";

fn parse_script(key: &str, raw: &str) -> ConfigResult<Vec<Outcome>> {
    if raw.is_empty() {
        return err(format!("{key}: script must not be empty"));
    }
    raw.chars()
        .map(|c| match c {
            's' => Ok(Outcome::Success),
            'f' => Ok(Outcome::Failure),
            other => Err(ConfigError(format!(
                "{key}: script characters must be `s` or `f`, got `{other}`"
            ))),
        })
        .collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_script(script: &[Outcome]) -> String {
    script
        .iter()
        .map(|o| if o.is_success() { 's' } else { 'f' })
        .collect()
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parse and resolve a configuration for `experiment`. `text` may be
    /// empty (all defaults). `seed_override` is the `--seed` flag.
    pub fn resolve(
        experiment: Experiment,
        text: &str,
        seed_override: Option<u64>,
    ) -> ConfigResult<RunConfig> {
        let raw = RawConfig::parse(text)?;

        if let Some(named) = raw.get("experiment") {
            if named != experiment.name() {
                return err(format!(
                    "experiment: config says `{named}` but the subcommand is `{experiment}`"
                ));
            }
        }

        let master_seed = match seed_override {
            Some(seed) => {
                // Still consume the config key so it is not "unknown".
                raw.u64("run.master_seed", seed)?;
                seed
            }
            None => raw.u64("run.master_seed", 42)?,
        };
        let stream_id = raw.u64("run.stream_id", 0)?;

        let sd = state_defaults(experiment);
        let state = ModelState::new(
            raw.f64("state.lambda", sd.lambda)?,
            raw.f64("state.gamma", sd.gamma)?,
            raw.f64("state.psi", sd.psi)?,
            raw.f64("state.theta", sd.theta)?,
            raw.f64("state.phi", sd.phi)?,
        )
        .map_err(|e| ConfigError(format!("state.{e}")))?;

        let fd = feedback_defaults(experiment);
        let feedback = FeedbackParams::new(
            raw.f64("feedback.alpha", fd.alpha)?,
            raw.f64("feedback.beta", 0.5)?,
            raw.f64("feedback.delta", 1.0)?,
            raw.f64("feedback.kappa", fd.kappa)?,
            raw.f64("feedback.theta_adj", fd.theta_adj)?,
            raw.f64("feedback.phi_adj", fd.phi_adj)?,
        )
        .map_err(|e| ConfigError(format!("feedback.{e}")))?;

        // Sections are only read by the experiments that consume them, so
        // a provided-but-unused key is reported instead of ignored.
        let uses_noise = matches!(
            experiment,
            Experiment::Exp1 | Experiment::SweepGrid | Experiment::Fit | Experiment::Predict
        );
        let noise = if uses_noise {
            NoiseSpec::new(
                raw.f64("noise.sigma_lambda", 0.5)?,
                raw.f64("noise.sigma_gamma", 0.2)?,
                raw.f64("noise.sigma_psi", 0.3)?,
                raw.f64("noise.sigma_theta", 0.4)?,
                raw.f64("noise.sigma_phi", 0.4)?,
                raw.bool("noise.clamp_nonnegative", true)?,
            )
            .map_err(|e| ConfigError(format!("noise.{e}")))?
        } else {
            NoiseSpec::new(0.5, 0.2, 0.3, 0.4, 0.4, true).expect("static defaults are valid")
        };

        let mut effective = BTreeMap::new();
        let mut echo = |key: &str, value: String| {
            effective.insert(key.to_string(), value);
        };
        echo("experiment", experiment.name().to_string());
        echo("run.master_seed", master_seed.to_string());
        echo("run.stream_id", stream_id.to_string());
        echo("state.lambda", fmt_f64(state.lambda));
        echo("state.gamma", fmt_f64(state.gamma));
        echo("state.psi", fmt_f64(state.psi));
        echo("state.theta", fmt_f64(state.theta));
        echo("state.phi", fmt_f64(state.phi));
        echo("feedback.alpha", fmt_f64(feedback.alpha));
        echo("feedback.beta", fmt_f64(feedback.beta));
        echo("feedback.delta", fmt_f64(feedback.delta));
        echo("feedback.kappa", fmt_f64(feedback.kappa));
        echo("feedback.theta_adj", fmt_f64(feedback.theta_adj));
        echo("feedback.phi_adj", fmt_f64(feedback.phi_adj));

        if uses_noise {
            echo("noise.sigma_lambda", fmt_f64(noise.sigma_lambda));
            echo("noise.sigma_gamma", fmt_f64(noise.sigma_gamma));
            echo("noise.sigma_psi", fmt_f64(noise.sigma_psi));
            echo("noise.sigma_theta", fmt_f64(noise.sigma_theta));
            echo("noise.sigma_phi", fmt_f64(noise.sigma_phi));
            echo(
                "noise.clamp_nonnegative",
                noise.clamp_nonnegative.to_string(),
            );
        }

        // Sweep settings.
        let (sweep_gamma_from, sweep_gamma_to, sweep_steps, sweep_n_trials) = if uses_noise {
            (
                raw.f64("sweep.gamma_from", -1.0)?,
                raw.f64("sweep.gamma_to", 5.0)?,
                raw.usize("sweep.steps", 61)?,
                raw.u64("sweep.n_trials", 2000)?,
            )
        } else {
            (-1.0, 5.0, 61, 2000)
        };
        if uses_noise {
            // Values came through the finite-number parser, so the plain
            // comparison is NaN-safe here.
            if sweep_gamma_from >= sweep_gamma_to {
                return err(format!(
                    "sweep.gamma_from = {sweep_gamma_from} must be below sweep.gamma_to = {sweep_gamma_to}"
                ));
            }
            if sweep_steps < 2 {
                return err(format!("sweep.steps = {sweep_steps} violates constraint >= 2"));
            }
            if sweep_n_trials == 0 {
                return err("sweep.n_trials = 0 violates constraint >= 1".to_string());
            }
            echo("sweep.gamma_from", fmt_f64(sweep_gamma_from));
            echo("sweep.gamma_to", fmt_f64(sweep_gamma_to));
            echo("sweep.steps", sweep_steps.to_string());
            echo("sweep.n_trials", sweep_n_trials.to_string());
        }

        // Episode settings.
        let mut horizon = 15;
        let mut success_prob = 1.0;
        let mut update_when_not_fired = true;
        let mut script_success = parse_script("episodes.script_success", DEFAULT_SCRIPT_SUCCESS)?;
        let mut script_failure = parse_script("episodes.script_failure", DEFAULT_SCRIPT_FAILURE)?;
        match experiment {
            Experiment::Exp2 => {
                horizon = raw.usize("episodes.horizon", 15)?;
                success_prob = raw.f64("episodes.success_prob", 1.0)?;
                update_when_not_fired = raw.bool("episodes.update_when_not_fired", true)?;
                if horizon == 0 {
                    return err("episodes.horizon = 0 violates constraint >= 1".to_string());
                }
                if !(0.0..=1.0).contains(&success_prob) {
                    return err(format!(
                        "episodes.success_prob = {success_prob} violates constraint [0,1]"
                    ));
                }
                echo("episodes.horizon", horizon.to_string());
                echo("episodes.success_prob", fmt_f64(success_prob));
                echo(
                    "episodes.update_when_not_fired",
                    update_when_not_fired.to_string(),
                );
            }
            Experiment::Exp3 | Experiment::Exp4 => {
                horizon = raw.usize("episodes.horizon", 15)?;
                script_success = raw.script("episodes.script_success", DEFAULT_SCRIPT_SUCCESS)?;
                script_failure = raw.script("episodes.script_failure", DEFAULT_SCRIPT_FAILURE)?;
                if horizon == 0 {
                    return err("episodes.horizon = 0 violates constraint >= 1".to_string());
                }
                for (key, script) in [
                    ("episodes.script_success", &script_success),
                    ("episodes.script_failure", &script_failure),
                ] {
                    if script.len() < horizon {
                        return err(format!(
                            "{key}: script has {} outcomes but episodes.horizon is {horizon}",
                            script.len()
                        ));
                    }
                }
                echo("episodes.horizon", horizon.to_string());
                echo("episodes.script_success", fmt_script(&script_success));
                echo("episodes.script_failure", fmt_script(&script_failure));
            }
            _ => {}
        }

        // Zone settings (phase portrait only); defaults derive from the
        // run's initial state.
        let zone = if experiment == Experiment::Exp4 {
            let zone = ZoneConfig::new(
                raw.f64("zone.healthy_lambda_min", state.lambda)?,
                raw.f64("zone.healthy_psi_max", state.psi / 2.0)?,
                raw.f64("zone.trauma_lambda_max", state.lambda)?,
                raw.f64("zone.trauma_psi_min", 2.0 * state.psi)?,
            )
            .map_err(|e| ConfigError(format!("zone.{e}")))?;
            echo("zone.healthy_lambda_min", fmt_f64(zone.healthy_lambda_min));
            echo("zone.healthy_psi_max", fmt_f64(zone.healthy_psi_max));
            echo("zone.trauma_lambda_max", fmt_f64(zone.trauma_lambda_max));
            echo("zone.trauma_psi_min", fmt_f64(zone.trauma_psi_min));
            Some(zone)
        } else {
            None
        };

        // Pressure-accumulation state for the forced-transition check.
        let pressure_state = if experiment == Experiment::Predict {
            let state = ModelState::new(
                raw.f64("pressure.lambda", 2.0)?,
                raw.f64("pressure.gamma", 1.0)?,
                raw.f64("pressure.psi", 2.0)?,
                raw.f64("pressure.theta", 5.0)?,
                raw.f64("pressure.phi", 5.0)?,
            )
            .map_err(|e| ConfigError(format!("pressure.{e}")))?;
            echo("pressure.lambda", fmt_f64(state.lambda));
            echo("pressure.gamma", fmt_f64(state.gamma));
            echo("pressure.psi", fmt_f64(state.psi));
            echo("pressure.theta", fmt_f64(state.theta));
            echo("pressure.phi", fmt_f64(state.phi));
            state
        } else {
            ModelState::new(2.0, 1.0, 2.0, 5.0, 5.0).expect("static defaults are valid")
        };

        // Cohort settings. The grid reruns cohorts per cell over the grid
        // horizon, so `cohort.horizon` belongs to `predict` only.
        let uses_cohort = matches!(experiment, Experiment::SweepGrid | Experiment::Predict);
        let mut cohort_success_prob = 0.5;
        let mut cohort_agents = 2000;
        let mut cohort_horizon = 15;
        let mut cohort_split_after = 3;
        if uses_cohort {
            cohort_success_prob = raw.f64("cohort.success_prob", 0.5)?;
            cohort_agents = raw.usize("cohort.n_agents", 2000)?;
            cohort_split_after = raw.usize("cohort.split_after", 3)?;
            if !(0.0..=1.0).contains(&cohort_success_prob) {
                return err(format!(
                    "cohort.success_prob = {cohort_success_prob} violates constraint [0,1]"
                ));
            }
            if cohort_agents == 0 {
                return err("cohort.n_agents = 0 violates constraint >= 1".to_string());
            }
            echo("cohort.success_prob", fmt_f64(cohort_success_prob));
            echo("cohort.n_agents", cohort_agents.to_string());
            echo("cohort.split_after", cohort_split_after.to_string());
        }
        if experiment == Experiment::Predict {
            cohort_horizon = raw.usize("cohort.horizon", 15)?;
            if cohort_split_after == 0 || cohort_split_after > cohort_horizon {
                return err(format!(
                    "cohort.split_after = {cohort_split_after} violates constraint in 1..=cohort.horizon"
                ));
            }
            echo("cohort.horizon", cohort_horizon.to_string());
        }

        // Sensitivity grid settings.
        let mut grid = ParamGrid {
            alphas: vec![0.1, 0.3, 0.5, 0.7],
            betas: vec![0.1, 0.3, 0.5, 0.7],
            deltas: vec![0.5, 1.0, 1.5],
            kappa: 0.4,
            base_feedback: feedback,
        };
        let mut grid_seed_mode = SeedMode::PerCell;
        let mut grid_horizon = 15;
        if experiment == Experiment::SweepGrid {
            grid = ParamGrid {
                alphas: raw.f64_list("grid.alphas", "0.1,0.3,0.5,0.7")?,
                betas: raw.f64_list("grid.betas", "0.1,0.3,0.5,0.7")?,
                deltas: raw.f64_list("grid.deltas", "0.5,1.0,1.5")?,
                kappa: raw.f64("grid.kappa", 0.4)?,
                base_feedback: feedback,
            };
            grid_seed_mode = raw.seed_mode("grid.seed_mode", SeedMode::PerCell)?;
            grid_horizon = raw.usize("grid.horizon", 15)?;
            grid.cells().map_err(|e| ConfigError(format!("grid.{e}")))?;
            if grid_horizon == 0 {
                return err("grid.horizon = 0 violates constraint >= 1".to_string());
            }
            if state.psi <= 0.0 {
                return err(format!(
                    "state.psi = {} violates constraint > 0 (suppression growth check)",
                    state.psi
                ));
            }
            if cohort_split_after == 0 || cohort_split_after > grid_horizon {
                return err(format!(
                    "cohort.split_after = {cohort_split_after} violates constraint in 1..=grid.horizon"
                ));
            }
            echo("grid.alphas", fmt_list(&grid.alphas));
            echo("grid.betas", fmt_list(&grid.betas));
            echo("grid.deltas", fmt_list(&grid.deltas));
            echo("grid.kappa", fmt_f64(grid.kappa));
            echo("grid.seed_mode", grid_seed_mode.as_str().to_string());
            echo("grid.horizon", grid_horizon.to_string());
        }

        // Fit band.
        let mut fit_band_low = 0.1;
        let mut fit_band_high = 0.9;
        if matches!(experiment, Experiment::Fit | Experiment::Predict) {
            fit_band_low = raw.f64("fit.band_low", 0.1)?;
            fit_band_high = raw.f64("fit.band_high", 0.9)?;
            for (key, value) in [("fit.band_low", fit_band_low), ("fit.band_high", fit_band_high)]
            {
                if !(0.0 < value && value < 1.0) {
                    return err(format!("{key} = {value} violates constraint (0,1)"));
                }
            }
            if fit_band_low > fit_band_high {
                return err(format!(
                    "fit.band_low = {fit_band_low} must not exceed fit.band_high = {fit_band_high}"
                ));
            }
            echo("fit.band_low", fmt_f64(fit_band_low));
            echo("fit.band_high", fmt_f64(fit_band_high));
        }

        raw.reject_unconsumed(experiment)?;

        Ok(RunConfig {
            experiment,
            master_seed,
            stream_id,
            state,
            feedback,
            noise,
            sweep_gamma_from,
            sweep_gamma_to,
            sweep_steps,
            sweep_n_trials,
            horizon,
            success_prob,
            update_when_not_fired,
            script_success,
            script_failure,
            zone,
            pressure_state,
            cohort_success_prob,
            cohort_agents,
            cohort_horizon,
            cohort_split_after,
            grid,
            grid_seed_mode,
            grid_horizon,
            fit_band_low,
            fit_band_high,
            effective,
        })
    }
}
