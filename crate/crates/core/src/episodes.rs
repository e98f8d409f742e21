//! Multi-step trajectory engine: suppression runs, scripted and
//! condition-driven episode sequences, phase-plane projection, zone
//! classification, and cohort divergence.
//!
//! A trajectory is a strict state recursion. Episode `t` evaluates the
//! transition condition on the state at time `t`, resolves an outcome per
//! the policy, applies the feedback update, and records everything; the
//! resulting state is time `t + 1`. Distinct trajectories (cohort agents)
//! are independent and draw from per-agent substreams, so cohort results
//! do not depend on execution order.

use rayon::prelude::*;

use crate::model::{
    apply_feedback, evaluate_transition, Error, FeedbackParams, ModelState, Outcome, Result,
    TransitionReport,
};
use crate::stochastic::SeedSpec;

/// How episode outcomes are determined.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomePolicy {
    /// Outcomes follow the script unconditionally, fired or not. This is
    /// how the standard scenario runs are scripted.
    Scripted { script: Vec<Outcome> },
    /// Outcomes are driven by the transition condition: a fired episode
    /// succeeds with probability `success_prob`; a non-fired episode is
    /// treated as a failure when `update_when_not_fired` is set (staying
    /// silent compounds pressure) and leaves the state untouched
    /// otherwise.
    ConditionDriven {
        success_prob: f64,
        update_when_not_fired: bool,
    },
}

impl OutcomePolicy {
    fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            OutcomePolicy::Scripted { script } => {
                if script.len() < horizon {
                    return Err(Error::Config(format!(
                        "script has {} outcomes but horizon is {horizon}",
                        script.len()
                    )));
                }
            }
            OutcomePolicy::ConditionDriven { success_prob, .. } => {
                if !success_prob.is_finite() || !(0.0..=1.0).contains(success_prob) {
                    return Err(Error::Invalid {
                        field: "success_prob",
                        constraint: "[0,1]",
                        value: *success_prob,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One episode of a trajectory. `t` is the zero-based episode index:
/// `state_before` is the state at time `t`, `state_after` at time `t + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub t: usize,
    pub state_before: ModelState,
    /// Transition condition evaluated on `state_before`.
    pub report: TransitionReport,
    /// `None` on non-fired condition-driven episodes without updates; the
    /// state then carries over unchanged.
    pub outcome: Option<Outcome>,
    pub state_after: ModelState,
}

/// A time-indexed run of episodes from an initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: ModelState,
    pub steps: Vec<EpisodeRecord>,
    pub params: FeedbackParams,
    pub policy: OutcomePolicy,
}

impl Trajectory {
    /// Number of episodes.
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// States indexed by time, `horizon + 1` entries starting at the
    /// initial state.
    pub fn states(&self) -> impl Iterator<Item = &ModelState> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.state_after))
    }

    pub fn final_state(&self) -> ModelState {
        self.steps.last().map_or(self.initial, |s| s.state_after)
    }

    /// Time index of the first episode whose transition condition fired,
    /// if any episode fired.
    pub fn first_fired(&self) -> Option<usize> {
        self.steps.iter().position(|s| s.report.fired)
    }
}

fn run_engine(
    initial: &ModelState,
    params: &FeedbackParams,
    policy: OutcomePolicy,
    horizon: usize,
    seed: &SeedSpec,
) -> Result<Trajectory> {
    initial.validate()?;
    params.validate()?;
    policy.validate(horizon)?;
    let mut steps = Vec::with_capacity(horizon);
    let mut state = *initial;
    for t in 0..horizon {
        let report = evaluate_transition(&state)?;
        let outcome = match &policy {
            OutcomePolicy::Scripted { script } => Some(script[t]),
            OutcomePolicy::ConditionDriven {
                success_prob,
                update_when_not_fired,
            } => {
                if report.fired {
                    // Outcome luck is keyed to the episode index, not the
                    // draw history, so runs with different parameters can
                    // share a luck table under a common seed.
                    let u = seed.trial_uniform(t as u64);
                    Some(if u < *success_prob {
                        Outcome::Success
                    } else {
                        Outcome::Failure
                    })
                } else if *update_when_not_fired {
                    Some(Outcome::Failure)
                } else {
                    None
                }
            }
        };
        let state_after = match outcome {
            Some(outcome) => apply_feedback(&state, params, outcome)?,
            None => state,
        };
        steps.push(EpisodeRecord {
            t,
            state_before: state,
            report,
            outcome,
            state_after,
        });
        state = state_after;
    }
    Ok(Trajectory {
        initial: *initial,
        steps,
        params: *params,
        policy,
    })
}

/// Perpetual-suppression run: the failure branch of the pressure update is
/// applied to psi at every step (`psi <- psi * (beta + delta)`) while
/// `lambda`, `gamma`, `theta`, `phi` stay fixed. The transition condition
/// is recorded at each step but the system never transitions.
///
/// Deterministic; errors if psi overflows the representable range.
pub fn run_suppression(
    initial: &ModelState,
    params: &FeedbackParams,
    horizon: usize,
) -> Result<Trajectory> {
    // All-failure script on psi-only parameters: the recorded trajectory
    // satisfies the usual feedback chaining invariant with its own params.
    run_engine(
        initial,
        &params.psi_only(),
        OutcomePolicy::Scripted {
            script: vec![Outcome::Failure; horizon],
        },
        horizon,
        &SeedSpec::new(0, 0),
    )
}

/// Run `horizon` episodes under the given policy. Deterministic given the
/// seed; scripted runs consume no randomness.
pub fn run_episodes(
    initial: &ModelState,
    params: &FeedbackParams,
    policy: OutcomePolicy,
    horizon: usize,
    seed: &SeedSpec,
) -> Result<Trajectory> {
    run_engine(initial, params, policy, horizon, seed)
}

/// Project a trajectory onto the (lambda, psi) phase plane, one point per
/// time index (`horizon + 1` points, the initial state first).
pub fn phase_trajectory(trajectory: &Trajectory) -> Vec<(f64, f64)> {
    trajectory.states().map(|s| (s.lambda, s.psi)).collect()
}

/// Rectangular healthy/trauma regions in the (lambda, psi) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneConfig {
    pub healthy_lambda_min: f64,
    pub healthy_psi_max: f64,
    pub trauma_lambda_max: f64,
    pub trauma_psi_min: f64,
}

impl ZoneConfig {
    /// Validating constructor; the healthy and trauma regions must be
    /// disjoint.
    pub fn new(
        healthy_lambda_min: f64,
        healthy_psi_max: f64,
        trauma_lambda_max: f64,
        trauma_psi_min: f64,
    ) -> Result<Self> {
        for (field, value) in [
            ("healthy_lambda_min", healthy_lambda_min),
            ("healthy_psi_max", healthy_psi_max),
            ("trauma_lambda_max", trauma_lambda_max),
            ("trauma_psi_min", trauma_psi_min),
        ] {
            if !value.is_finite() {
                return Err(Error::NonFinite { field });
            }
        }
        if healthy_lambda_min <= trauma_lambda_max && trauma_psi_min <= healthy_psi_max {
            return Err(Error::Config(format!(
                "healthy and trauma zones overlap: lambda in \
                 [{healthy_lambda_min}, {trauma_lambda_max}], psi in \
                 [{trauma_psi_min}, {healthy_psi_max}]"
            )));
        }
        Ok(Self {
            healthy_lambda_min,
            healthy_psi_max,
            trauma_lambda_max,
            trauma_psi_min,
        })
    }

    /// Default zones relative to a run's initial state: healthy means
    /// openness at least the starting value with pressure at most half of
    /// it, trauma means openness at most the starting value with pressure
    /// at least doubled.
    pub fn relative_to(initial: &ModelState) -> Result<Self> {
        Self::new(
            initial.lambda,
            initial.psi / 2.0,
            initial.lambda,
            2.0 * initial.psi,
        )
    }
}

/// Phase-plane region labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZoneLabel {
    Healthy,
    Trauma,
    Transitional,
}

impl ZoneLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ZoneLabel::Healthy => "healthy",
            ZoneLabel::Trauma => "trauma",
            ZoneLabel::Transitional => "transitional",
        }
    }
}

/// Classify a (lambda, psi) point against the configured zones.
pub fn classify_zone(point: (f64, f64), zones: &ZoneConfig) -> ZoneLabel {
    let (lambda, psi) = point;
    if lambda >= zones.healthy_lambda_min && psi <= zones.healthy_psi_max {
        ZoneLabel::Healthy
    } else if lambda <= zones.trauma_lambda_max && psi >= zones.trauma_psi_min {
        ZoneLabel::Trauma
    } else {
        ZoneLabel::Transitional
    }
}

/// Final-state statistics for one cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortStats {
    pub n_agents: usize,
    pub mean_final_lambda: f64,
    pub sd_final_lambda: f64,
    pub mean_final_psi: f64,
    pub sd_final_psi: f64,
}

impl CohortStats {
    fn from_states(finals: &[ModelState]) -> Self {
        let n = finals.len();
        let lambdas: Vec<f64> = finals.iter().map(|s| s.lambda).collect();
        let psis: Vec<f64> = finals.iter().map(|s| s.psi).collect();
        let (mean_l, sd_l) = mean_sd(&lambdas);
        let (mean_p, sd_p) = mean_sd(&psis);
        Self {
            n_agents: n,
            mean_final_lambda: mean_l,
            sd_final_lambda: sd_l,
            mean_final_psi: mean_p,
            sd_final_psi: sd_p,
        }
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Agents split by early luck. An empty cohort is reported as such (zero
/// size, NaN statistics), never as an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortSummary {
    /// Agents whose first `split_after` episodes held a strict majority of
    /// successes.
    pub early_success: CohortStats,
    /// Everyone else.
    pub early_failure: CohortStats,
}

impl CohortSummary {
    /// Mean final openness gap, early-success minus early-failure.
    pub fn lambda_gap(&self) -> f64 {
        self.early_success.mean_final_lambda - self.early_failure.mean_final_lambda
    }
}

/// Simulate `n_agents` independent condition-driven trajectories and split
/// them by whether the first `split_after` episodes contained a majority
/// of successes. Non-fired episodes count as failures (pressure keeps
/// compounding in silence). Deterministic given the seed; agents run on
/// per-agent substreams and may execute in parallel.
pub fn cohort_divergence(
    base: &ModelState,
    params: &FeedbackParams,
    success_prob: f64,
    n_agents: usize,
    horizon: usize,
    split_after: usize,
    seed: &SeedSpec,
) -> Result<CohortSummary> {
    if n_agents == 0 {
        return Err(Error::Invalid {
            field: "n_agents",
            constraint: ">= 1",
            value: 0.0,
        });
    }
    if split_after == 0 || split_after > horizon {
        return Err(Error::Invalid {
            field: "split_after",
            constraint: "in 1..=horizon",
            value: split_after as f64,
        });
    }
    let policy = OutcomePolicy::ConditionDriven {
        success_prob,
        update_when_not_fired: true,
    };
    policy.validate(horizon)?;
    let agents: Vec<(bool, ModelState)> = (0..n_agents)
        .into_par_iter()
        .map(|agent| -> Result<(bool, ModelState)> {
            let stream = seed.substream(agent as u64);
            let trajectory = run_engine(base, params, policy.clone(), horizon, &stream)?;
            let successes = trajectory.steps[..split_after]
                .iter()
                .filter(|s| s.outcome == Some(Outcome::Success))
                .count();
            Ok((2 * successes > split_after, trajectory.final_state()))
        })
        .collect::<Result<Vec<_>>>()?;
    let success_finals: Vec<ModelState> = agents
        .iter()
        .filter(|(early, _)| *early)
        .map(|(_, s)| *s)
        .collect();
    let failure_finals: Vec<ModelState> = agents
        .iter()
        .filter(|(early, _)| !*early)
        .map(|(_, s)| *s)
        .collect();
    Ok(CohortSummary {
        early_success: CohortStats::from_states(&success_finals),
        early_failure: CohortStats::from_states(&failure_finals),
    })
}
