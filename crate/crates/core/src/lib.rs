//! Simulation engine for the ASIR courage model.
//!
//! The model describes truth-disclosure as a threshold state transition.
//! Five time-varying quantities drive it: openness (`lambda`), relational
//! gravity (`gamma`), accumulated internal pressure (`psi`), the truth
//! threshold (`theta`), and the transition cost (`phi`). The transition
//! fires when facilitation exceeds inhibition:
//!
//! ```text
//! lambda * (1 + gamma) + psi  >  theta + phi
//! ```
//!
//! Episode outcomes feed back into every variable, producing path-dependent
//! trajectories (virtuous cycles and trauma spirals). The crate provides:
//!
//! - [`model`]: state/parameter types, the transition condition, the
//!   feedback update system, and closed-form solvers (critical gamma,
//!   forced transition time, regime classification).
//! - [`stochastic`]: seeded Gaussian perturbation, Monte Carlo transition
//!   probability estimation with Wilson intervals, and the gamma sweep.
//! - [`episodes`]: multi-step trajectory engine (suppression runs, scripted
//!   and condition-driven episode sequences, phase-plane projection, zone
//!   classification, cohort divergence).
//! - [`sensitivity`]: the (alpha, beta, delta) parameter grid with regime
//!   classification and cross-cell invariance checks.
//! - [`calibrate`]: logistic fits of sweep data and gamma-band extraction.
//!
//! All randomness derives from [`stochastic::SeedSpec`] substreams, so every
//! result is reproducible bit-for-bit regardless of thread count.

pub mod calibrate;
pub mod episodes;
pub mod model;
pub mod sensitivity;
pub mod stochastic;

pub use model::{
    apply_feedback, classify_regime, critical_gamma, evaluate_transition, forced_transition_time,
    Error, FeedbackParams, ModelState, Outcome, RegimeClass, Result, TransitionReport,
};
pub use stochastic::{
    estimate_transition_probability, gamma_sweep, perturb, NoiseSpec, ProbabilityEstimate,
    SeedSpec, SweepResult,
};
