//! Experiment orchestration: dispatch a resolved configuration to the
//! owning engine module and collect the output files.

use asir_core::calibrate::{estimate_gamma_band, fit_logistic};
use asir_core::episodes::{
    cohort_divergence, run_episodes, run_suppression, OutcomePolicy, Trajectory,
};
use asir_core::model::{classify_regime, critical_gamma, forced_transition_time, RegimeClass};
use asir_core::sensitivity::{run_grid, GridRunSpec};
use asir_core::stochastic::{gamma_sweep, SeedSpec, SweepResult};
use serde::Serialize;

use crate::config::{Experiment, RunConfig};
use crate::output;

/// Execution failure; maps to exit code 2. Configuration problems are
/// caught before execution starts.
#[derive(Debug)]
pub struct RuntimeError(pub String);

impl std::fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type RunResult<T> = Result<T, RuntimeError>;

fn run_err(e: impl std::fmt::Display) -> RuntimeError {
    RuntimeError(e.to_string())
}

/// Output files as (name, contents) pairs, produced fully in memory so a
/// failed run writes nothing.
pub type OutputFiles = Vec<(String, String)>;

/// Per-prediction substream labels, fixed for reproducibility.
const COHORT_STREAM_LABEL: u64 = 103;

pub fn execute(config: &RunConfig) -> RunResult<OutputFiles> {
    match config.experiment {
        Experiment::Exp1 => exp1(config),
        Experiment::Exp2 => exp2(config),
        Experiment::Exp3 => exp3(config),
        Experiment::Exp4 => exp4(config),
        Experiment::SweepGrid => sweep_grid(config),
        Experiment::Fit => fit(config),
        Experiment::Predict => predict(config),
    }
}

fn seed_of(config: &RunConfig) -> SeedSpec {
    SeedSpec::new(config.master_seed, config.stream_id)
}

fn run_sweep(config: &RunConfig, seed: &SeedSpec) -> RunResult<SweepResult> {
    gamma_sweep(
        &config.state,
        config.sweep_gamma_from,
        config.sweep_gamma_to,
        config.sweep_steps,
        &config.noise,
        config.sweep_n_trials,
        seed,
    )
    .map_err(run_err)
}

fn exp1(config: &RunConfig) -> RunResult<OutputFiles> {
    let sweep = run_sweep(config, &seed_of(config))?;
    Ok(vec![("sweep.csv".into(), output::sweep_csv(&sweep))])
}

fn exp2(config: &RunConfig) -> RunResult<OutputFiles> {
    let suppression =
        run_suppression(&config.state, &config.feedback, config.horizon).map_err(run_err)?;
    let natural = run_episodes(
        &config.state,
        &config.feedback,
        OutcomePolicy::ConditionDriven {
            success_prob: config.success_prob,
            update_when_not_fired: config.update_when_not_fired,
        },
        config.horizon,
        &seed_of(config),
    )
    .map_err(run_err)?;
    let csv = output::trajectory_csv(&[("suppression", &suppression), ("natural", &natural)])
        .map_err(run_err)?;
    Ok(vec![("trajectory.csv".into(), csv)])
}

fn scripted_pair(config: &RunConfig) -> RunResult<(Trajectory, Trajectory)> {
    let seed = seed_of(config);
    let success = run_episodes(
        &config.state,
        &config.feedback,
        OutcomePolicy::Scripted {
            script: config.script_success.clone(),
        },
        config.horizon,
        &seed,
    )
    .map_err(run_err)?;
    let failure = run_episodes(
        &config.state,
        &config.feedback,
        OutcomePolicy::Scripted {
            script: config.script_failure.clone(),
        },
        config.horizon,
        &seed,
    )
    .map_err(run_err)?;
    Ok((success, failure))
}

fn exp3(config: &RunConfig) -> RunResult<OutputFiles> {
    let (success, failure) = scripted_pair(config)?;
    let csv = output::trajectory_csv(&[
        ("mostly_success", &success),
        ("mostly_failure", &failure),
    ])
    .map_err(run_err)?;
    Ok(vec![("trajectory.csv".into(), csv)])
}

fn exp4(config: &RunConfig) -> RunResult<OutputFiles> {
    let (recovery, trauma) = scripted_pair(config)?;
    let zones = config
        .zone
        .expect("exp4 always resolves a zone configuration");
    let scenarios = [("recovery", &recovery), ("trauma", &trauma)];
    let trajectory = output::trajectory_csv(&scenarios).map_err(run_err)?;
    let phase = output::phase_csv(&scenarios, &zones);
    Ok(vec![
        ("trajectory.csv".into(), trajectory),
        ("phase.csv".into(), phase),
    ])
}

fn sweep_grid(config: &RunConfig) -> RunResult<OutputFiles> {
    let spec = GridRunSpec {
        noise: config.noise,
        gamma_from: config.sweep_gamma_from,
        gamma_to: config.sweep_gamma_to,
        sweep_steps: config.sweep_steps,
        n_trials: config.sweep_n_trials,
        horizon: config.grid_horizon,
        cohort_success_prob: config.cohort_success_prob,
        cohort_agents: config.cohort_agents,
        cohort_split_after: config.cohort_split_after,
        seed_mode: config.grid_seed_mode,
    };
    let results = run_grid(&config.grid, &config.state, &spec, &seed_of(config)).map_err(run_err)?;
    Ok(vec![("grid.csv".into(), output::grid_csv(&results))])
}

#[derive(Serialize)]
struct FitJson {
    midpoint: f64,
    steepness: f64,
    residual: f64,
    converged: bool,
    band_low: f64,
    band_high: f64,
    gamma_band_low: Option<f64>,
    gamma_band_high: Option<f64>,
}

fn fit(config: &RunConfig) -> RunResult<OutputFiles> {
    let sweep = run_sweep(config, &seed_of(config))?;
    let fit = fit_logistic(&sweep);
    let band = if fit.converged {
        Some(
            estimate_gamma_band(&fit, config.fit_band_low, config.fit_band_high)
                .map_err(run_err)?,
        )
    } else {
        None
    };
    let json = FitJson {
        midpoint: fit.midpoint,
        steepness: fit.steepness,
        residual: fit.residual,
        converged: fit.converged,
        band_low: config.fit_band_low,
        band_high: config.fit_band_high,
        gamma_band_low: band.map(|b| b.0),
        gamma_band_high: band.map(|b| b.1),
    };
    let fit_text = serde_json::to_string_pretty(&json).map_err(run_err)?;
    Ok(vec![
        ("sweep.csv".into(), output::sweep_csv(&sweep)),
        ("fit.json".into(), fit_text + "\n"),
    ])
}

#[derive(Serialize)]
struct Prediction1 {
    pass: bool,
    converged: bool,
    midpoint: f64,
    steepness: f64,
    critical_gamma: Option<f64>,
    midpoint_abs_error: Option<f64>,
    band_low: f64,
    band_high: f64,
    gamma_band_low: Option<f64>,
    gamma_band_high: Option<f64>,
}

#[derive(Serialize)]
struct Prediction2 {
    pass: bool,
    regime: String,
    forced_transition_time: Option<u64>,
    simulation_first_fired: Option<u64>,
}

#[derive(Serialize)]
struct Prediction3 {
    pass: bool,
    lambda_gap: Option<f64>,
    early_success: output::CohortStatsJson,
    early_failure: output::CohortStatsJson,
}

#[derive(Serialize)]
struct PredictionsJson {
    prediction_1_gamma_band: Prediction1,
    prediction_2_forced_transition: Prediction2,
    prediction_3_path_dependence: Prediction3,
}

/// Midpoint recovery tolerance against the deterministic crossing.
const MIDPOINT_TOLERANCE: f64 = 0.1;

fn predict(config: &RunConfig) -> RunResult<OutputFiles> {
    let seed = seed_of(config);

    // Prediction 1: the sweep is sigmoidal with a midpoint at the
    // deterministic crossing.
    let sweep = run_sweep(config, &seed)?;
    let fit = fit_logistic(&sweep);
    let crossing = critical_gamma(&config.state);
    let midpoint_abs_error = crossing.map(|g| (fit.midpoint - g).abs());
    let band = if fit.converged {
        estimate_gamma_band(&fit, config.fit_band_low, config.fit_band_high).ok()
    } else {
        None
    };
    let p1_pass = fit.converged
        && midpoint_abs_error.is_some_and(|e| e <= MIDPOINT_TOLERANCE)
        && band.is_some();
    let p1 = Prediction1 {
        pass: p1_pass,
        converged: fit.converged,
        midpoint: fit.midpoint,
        steepness: fit.steepness,
        critical_gamma: crossing,
        midpoint_abs_error,
        band_low: config.fit_band_low,
        band_high: config.fit_band_high,
        gamma_band_low: band.map(|b| b.0),
        gamma_band_high: band.map(|b| b.1),
    };

    // Prediction 2: in the compounding regime, pressure accumulation alone
    // forces the transition in finite time, and the trajectory engine
    // agrees on the step index.
    let regime = classify_regime(&config.feedback);
    let forced = forced_transition_time(&config.pressure_state, &config.feedback);
    let simulated = match forced {
        Some(t) => {
            let traj =
                run_suppression(&config.pressure_state, &config.feedback, t as usize + 2)
                    .map_err(run_err)?;
            traj.first_fired().map(|i| i as u64)
        }
        None => None,
    };
    let p2_pass = regime == RegimeClass::Compounding && forced.is_some() && forced == simulated;
    let p2 = Prediction2 {
        pass: p2_pass,
        regime: regime.as_str().to_string(),
        forced_transition_time: forced,
        simulation_first_fired: simulated,
    };

    // Prediction 3: early outcomes split the cohort toward distinct
    // attractors.
    let summary = cohort_divergence(
        &config.state,
        &config.feedback,
        config.cohort_success_prob,
        config.cohort_agents,
        config.cohort_horizon,
        config.cohort_split_after,
        &seed.substream(COHORT_STREAM_LABEL),
    )
    .map_err(run_err)?;
    let populated = summary.early_success.n_agents > 0 && summary.early_failure.n_agents > 0;
    let lambda_gap = populated.then(|| summary.lambda_gap());
    let p3_pass = populated
        && summary.lambda_gap() > 0.0
        && summary.early_failure.mean_final_psi > summary.early_success.mean_final_psi;
    let p3 = Prediction3 {
        pass: p3_pass,
        lambda_gap,
        early_success: (&summary.early_success).into(),
        early_failure: (&summary.early_failure).into(),
    };

    let verdict = |pass: bool| if pass { "PASS" } else { "FAIL" };
    println!(
        "prediction 1 (gamma band): {} | converged={}, midpoint={:.4}, critical gamma={}, band [{}, {}] -> gamma [{}, {}]",
        verdict(p1.pass),
        p1.converged,
        p1.midpoint,
        p1.critical_gamma.map_or("n/a".into(), |g| format!("{g:.4}")),
        p1.band_low,
        p1.band_high,
        p1.gamma_band_low.map_or("n/a".into(), |g| format!("{g:.4}")),
        p1.gamma_band_high.map_or("n/a".into(), |g| format!("{g:.4}")),
    );
    println!(
        "prediction 2 (forced transition): {} | regime={}, T={}, simulation first fired={}",
        verdict(p2.pass),
        p2.regime,
        p2.forced_transition_time
            .map_or("none".into(), |t| t.to_string()),
        p2.simulation_first_fired
            .map_or("none".into(), |t| t.to_string()),
    );
    println!(
        "prediction 3 (path dependence): {} | lambda gap={}, cohorts {}/{}",
        verdict(p3.pass),
        lambda_gap.map_or("n/a".into(), |g| format!("{g:.4}")),
        summary.early_success.n_agents,
        summary.early_failure.n_agents,
    );

    let predictions = PredictionsJson {
        prediction_1_gamma_band: p1,
        prediction_2_forced_transition: p2,
        prediction_3_path_dependence: p3,
    };
    let json = serde_json::to_string_pretty(&predictions).map_err(run_err)?;
    Ok(vec![
        ("sweep.csv".into(), output::sweep_csv(&sweep)),
        ("cohorts.csv".into(), output::cohorts_csv(&summary)),
        ("predictions.json".into(), json + "\n"),
    ])
}
