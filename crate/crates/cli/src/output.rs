//! CSV and JSON emission. Floats are written with Rust's shortest
//! round-trip formatting (`.` decimal separator), so emitted files are
//! byte-stable for identical inputs and parse back to identical values.

use asir_core::episodes::{classify_zone, CohortStats, CohortSummary, Trajectory, ZoneConfig};
use asir_core::model::{evaluate_transition, Outcome, Result};
use asir_core::sensitivity::GridCellResult;
use asir_core::stochastic::SweepResult;
use serde::Serialize;

fn outcome_str(outcome: Option<Outcome>) -> &'static str {
    match outcome {
        Some(Outcome::Success) => "success",
        Some(Outcome::Failure) => "failure",
        None => "",
    }
}

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("gamma,n_trials,n_fired,p_hat,ci_low,ci_high\n");
    for (gamma, est) in sweep.gamma_grid.iter().zip(&sweep.estimates) {
        out.push_str(&format!(
            "{gamma},{},{},{},{},{}\n",
            est.n_trials, est.n_fired, est.p_hat, est.ci_low, est.ci_high
        ));
    }
    out
}

/// One row per time index and scenario: the state at time `t`, the
/// transition report evaluated on it, and the outcome of the episode that
/// ran at `t` (empty on the final row, which has no following episode).
pub fn trajectory_csv(scenarios: &[(&str, &Trajectory)]) -> Result<String> {
    let mut out =
        String::from("t,scenario,lambda,gamma,psi,theta,phi,facilitation,inhibition,margin,fired,outcome\n");
    for (name, trajectory) in scenarios {
        for (t, state) in trajectory.states().enumerate() {
            let report = evaluate_transition(state)?;
            let outcome = trajectory.steps.get(t).and_then(|s| s.outcome);
            out.push_str(&format!(
                "{t},{name},{},{},{},{},{},{},{},{},{},{}\n",
                state.lambda,
                state.gamma,
                state.psi,
                state.theta,
                state.phi,
                report.facilitation,
                report.inhibition,
                report.margin,
                report.fired,
                outcome_str(outcome)
            ));
        }
    }
    Ok(out)
}

pub fn phase_csv(scenarios: &[(&str, &Trajectory)], zones: &ZoneConfig) -> String {
    let mut out = String::from("t,scenario,lambda,psi,zone\n");
    for (name, trajectory) in scenarios {
        for (t, state) in trajectory.states().enumerate() {
            let zone = classify_zone((state.lambda, state.psi), zones);
            out.push_str(&format!(
                "{t},{name},{},{},{}\n",
                state.lambda,
                state.psi,
                zone.as_str()
            ));
        }
    }
    out
}

/// Grid cells with their logistic fit and cohort gap. The fit runs on each
/// cell's own sweep.
pub fn grid_csv(results: &[GridCellResult]) -> String {
    let mut out = String::from(
        "alpha,beta,delta,kappa,regime,suppression_growth,fit_midpoint,fit_steepness,divergence_lambda_gap\n",
    );
    for cell in results {
        let fit = asir_core::calibrate::fit_logistic(&cell.sweep);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cell.params.alpha,
            cell.params.beta,
            cell.params.delta,
            cell.params.kappa,
            cell.regime.as_str(),
            cell.suppression_growth,
            fit.midpoint,
            fit.steepness,
            cell.divergence.lambda_gap()
        ));
    }
    out
}

pub fn cohorts_csv(summary: &CohortSummary) -> String {
    let mut out = String::from(
        "cohort,n_agents,mean_final_lambda,sd_final_lambda,mean_final_psi,sd_final_psi\n",
    );
    for (name, stats) in [
        ("early_success", &summary.early_success),
        ("early_failure", &summary.early_failure),
    ] {
        out.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            stats.n_agents,
            stats.mean_final_lambda,
            stats.sd_final_lambda,
            stats.mean_final_psi,
            stats.sd_final_psi
        ));
    }
    out
}

#[derive(Serialize)]
pub struct CohortStatsJson {
    pub n_agents: usize,
    pub mean_final_lambda: Option<f64>,
    pub sd_final_lambda: Option<f64>,
    pub mean_final_psi: Option<f64>,
    pub sd_final_psi: Option<f64>,
}

impl From<&CohortStats> for CohortStatsJson {
    fn from(stats: &CohortStats) -> Self {
        let opt = |v: f64| if v.is_finite() { Some(v) } else { None };
        Self {
            n_agents: stats.n_agents,
            mean_final_lambda: opt(stats.mean_final_lambda),
            sd_final_lambda: opt(stats.sd_final_lambda),
            mean_final_psi: opt(stats.mean_final_psi),
            sd_final_psi: opt(stats.sd_final_psi),
        }
    }
}
