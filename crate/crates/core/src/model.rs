//! Core model types, the transition condition, and the feedback system.
//!
//! The transition condition compares facilitation against inhibition:
//!
//! ```text
//! lambda * (1 + gamma) + psi  >  theta + phi        (strict inequality)
//! ```
//!
//! After an episode with outcome `s1` (1 = success, 0 = failure) the
//! variables recalibrate:
//!
//! ```text
//! lambda' = lambda + alpha * (2*s1 - 1)
//! psi'    = psi * (beta + (1 - s1) * delta)
//! gamma'  = gamma + kappa * (s1 - 0.5)
//! theta'  = theta - theta_adj * (2*s1 - 1)
//! phi'    = phi   - phi_adj   * (2*s1 - 1)
//! ```
//!
//! `lambda`, `psi`, `theta`, `phi` live on non-negative domains and are
//! clamped to zero after each update; `gamma` is unbounded and may be
//! negative (hostile relational context).

use thiserror::Error as ThisError;

/// Errors produced by model construction and updates.
#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum Error {
    /// An input field was NaN or infinite.
    #[error("{field}: non-finite value rejected")]
    NonFinite { field: &'static str },
    /// An update produced a non-finite value (geometric psi growth can
    /// overflow; the engine fails loudly instead of saturating).
    #[error("{field}: update overflowed to a non-finite value")]
    Overflow { field: &'static str },
    /// A value violates its domain constraint.
    #[error("{field} = {value} violates constraint {constraint}")]
    Invalid {
        field: &'static str,
        constraint: &'static str,
        value: f64,
    },
    /// Inconsistent run configuration (bad script length, overlapping
    /// zones, heterogeneous grid cells, ...).
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

fn require_finite(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { field })
    }
}

fn require_non_negative(field: &'static str, value: f64) -> Result<f64> {
    let value = require_finite(field, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::Invalid {
            field,
            constraint: ">= 0",
            value,
        })
    }
}

/// The five model variables at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelState {
    /// Openness: readiness to disclose internal truth. Non-negative.
    pub lambda: f64,
    /// Relational gravity: dyadic resonance scaling effective openness
    /// through `(1 + gamma)`. May be negative; values below -1 make the
    /// openness term inhibitory.
    pub gamma: f64,
    /// Internal pressure accumulated from withheld truth. Non-negative;
    /// compounds multiplicatively under failure.
    pub psi: f64,
    /// Truth threshold: how hard this truth is to say. Non-negative.
    pub theta: f64,
    /// Transition cost: anticipated price of speaking. Non-negative.
    pub phi: f64,
}

impl ModelState {
    /// Validating constructor. `lambda`, `psi`, `theta`, `phi` must be
    /// finite and non-negative; `gamma` must be finite.
    pub fn new(lambda: f64, gamma: f64, psi: f64, theta: f64, phi: f64) -> Result<Self> {
        Ok(Self {
            lambda: require_non_negative("lambda", lambda)?,
            gamma: require_finite("gamma", gamma)?,
            psi: require_non_negative("psi", psi)?,
            theta: require_non_negative("theta", theta)?,
            phi: require_non_negative("phi", phi)?,
        })
    }

    /// Re-check the construction invariants on an existing state.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.lambda, self.gamma, self.psi, self.theta, self.phi)?;
        Ok(())
    }

    /// State with `gamma` replaced, all other fields kept.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..*self }
    }
}

/// Coefficients of the feedback update system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackParams {
    /// Openness step per outcome. Non-negative.
    pub alpha: f64,
    /// Base pressure decay rate, strictly inside (0, 1).
    pub beta: f64,
    /// Pressure accumulation coefficient, strictly positive. Failure
    /// multiplies psi by `beta + delta`.
    pub delta: f64,
    /// Relational gravity step per outcome. Non-negative.
    pub kappa: f64,
    /// Truth-threshold recalibration step. Non-negative.
    pub theta_adj: f64,
    /// Transition-cost recalibration step. Non-negative.
    pub phi_adj: f64,
}

impl FeedbackParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        delta: f64,
        kappa: f64,
        theta_adj: f64,
        phi_adj: f64,
    ) -> Result<Self> {
        let beta = require_finite("beta", beta)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Invalid {
                field: "beta",
                constraint: "(0,1)",
                value: beta,
            });
        }
        let delta = require_finite("delta", delta)?;
        if delta <= 0.0 {
            return Err(Error::Invalid {
                field: "delta",
                constraint: "> 0",
                value: delta,
            });
        }
        Ok(Self {
            alpha: require_non_negative("alpha", alpha)?,
            beta,
            delta,
            kappa: require_non_negative("kappa", kappa)?,
            theta_adj: require_non_negative("theta_adj", theta_adj)?,
            phi_adj: require_non_negative("phi_adj", phi_adj)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(
            self.alpha,
            self.beta,
            self.delta,
            self.kappa,
            self.theta_adj,
            self.phi_adj,
        )?;
        Ok(())
    }

    /// Copy with every coefficient except `beta` and `delta` zeroed, so a
    /// feedback application touches psi alone. Suppression runs use this.
    pub fn psi_only(&self) -> Self {
        Self {
            alpha: 0.0,
            kappa: 0.0,
            theta_adj: 0.0,
            phi_adj: 0.0,
            ..*self
        }
    }
}

/// Binary episode outcome driving the feedback updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Failure,
}

impl Outcome {
    /// The indicator `s1` (1 for success, 0 for failure).
    #[inline]
    pub fn s1(self) -> f64 {
        match self {
            Outcome::Success => 1.0,
            Outcome::Failure => 0.0,
        }
    }

    #[inline]
    pub fn is_success(self) -> bool {
        matches!(self, Outcome::Success)
    }
}

/// Both sides of the transition condition evaluated on one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionReport {
    /// `lambda * (1 + gamma) + psi`.
    pub facilitation: f64,
    /// `theta + phi`.
    pub inhibition: f64,
    /// `facilitation - inhibition`.
    pub margin: f64,
    /// True iff `margin > 0` (strict; the boundary does not fire).
    pub fired: bool,
}

/// Pressure-growth regime implied by `beta + delta` against 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeClass {
    /// `beta + delta > 1`: perpetual suppression grows psi without bound.
    Compounding,
    /// `beta + delta = 1`: psi is constant under perpetual suppression.
    Boundary,
    /// `beta + delta < 1`: psi decays even under perpetual suppression.
    Decaying,
}

impl RegimeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeClass::Compounding => "compounding",
            RegimeClass::Boundary => "boundary",
            RegimeClass::Decaying => "decaying",
        }
    }
}

/// Facilitation side of the transition condition. Kept as the single
/// definition so every code path (transition evaluation, forced-transition
/// search, suppression runs) compares bit-identical values.
#[inline]
pub(crate) fn facilitation(lambda: f64, gamma: f64, psi: f64) -> f64 {
    lambda * (1.0 + gamma) + psi
}

/// Evaluate the transition condition on a state.
///
/// Pure; rejects non-finite fields.
pub fn evaluate_transition(state: &ModelState) -> Result<TransitionReport> {
    for (field, value) in [
        ("lambda", state.lambda),
        ("gamma", state.gamma),
        ("psi", state.psi),
        ("theta", state.theta),
        ("phi", state.phi),
    ] {
        require_finite(field, value)?;
    }
    let facilitation = facilitation(state.lambda, state.gamma, state.psi);
    let inhibition = state.theta + state.phi;
    let margin = facilitation - inhibition;
    Ok(TransitionReport {
        facilitation,
        inhibition,
        margin,
        fired: margin > 0.0,
    })
}

/// Apply one feedback update for `outcome`, returning the new state.
///
/// `lambda`, `psi`, `theta`, `phi` are clamped to zero after the update.
/// A non-finite result (psi compounding can overflow) is an error naming
/// the field; the engine never saturates silently.
pub fn apply_feedback(
    state: &ModelState,
    params: &FeedbackParams,
    outcome: Outcome,
) -> Result<ModelState> {
    let s1 = outcome.s1();
    let swing = 2.0 * s1 - 1.0;
    let lambda = state.lambda + params.alpha * swing;
    let psi = state.psi * (params.beta + (1.0 - s1) * params.delta);
    let gamma = state.gamma + params.kappa * (s1 - 0.5);
    let theta = state.theta - params.theta_adj * swing;
    let phi = state.phi - params.phi_adj * swing;
    // Finiteness is checked before clamping: f64::max(NaN, 0) would mask a
    // NaN, and clamping must never hide an overflow.
    for (field, value) in [
        ("lambda", lambda),
        ("gamma", gamma),
        ("psi", psi),
        ("theta", theta),
        ("phi", phi),
    ] {
        if !value.is_finite() {
            return Err(Error::Overflow { field });
        }
    }
    Ok(ModelState {
        lambda: lambda.max(0.0),
        gamma,
        psi: psi.max(0.0),
        theta: theta.max(0.0),
        phi: phi.max(0.0),
    })
}

/// Deterministic crossing point of the transition condition in `gamma`:
/// the margin is zero at `gamma* = (theta + phi - psi) / lambda - 1`.
///
/// Returns `None` when `lambda = 0` (gamma then has no effect).
pub fn critical_gamma(state: &ModelState) -> Option<f64> {
    if state.lambda == 0.0 {
        None
    } else {
        Some((state.theta + state.phi - state.psi) / state.lambda - 1.0)
    }
}

/// Smallest number of consecutive failure steps after which psi
/// accumulation alone fires the transition, all other variables held fixed.
///
/// Returns `Some(0)` when the condition already fires. Returns `None` when
/// the deficit can never be exceeded: psi is zero (nothing to compound), or
/// `beta + delta <= 1` with a non-positive margin (psi bounded below the
/// deficit), or psi has reached a floating-point fixed point.
///
/// The step recursion is the same `psi * (beta + delta)` the trajectory
/// engine performs, so the returned index matches simulation exactly.
pub fn forced_transition_time(state: &ModelState, params: &FeedbackParams) -> Option<u64> {
    let inhibition = state.theta + state.phi;
    if facilitation(state.lambda, state.gamma, state.psi) - inhibition > 0.0 {
        return Some(0);
    }
    let growth = params.beta + params.delta;
    if state.psi == 0.0 || growth <= 1.0 {
        return None;
    }
    let mut psi = state.psi;
    let mut steps = 0u64;
    loop {
        let next = psi * growth;
        steps += 1;
        if facilitation(state.lambda, state.gamma, next) - inhibition > 0.0 {
            return Some(steps);
        }
        if next == psi {
            // Growth stalled below one ulp; simulation would never fire.
            return None;
        }
        psi = next;
    }
}

/// Classify the pressure regime by exact comparison of `beta + delta`
/// against 1 (no tolerance; the boundary cell is excluded from the
/// compounding count).
pub fn classify_regime(params: &FeedbackParams) -> RegimeClass {
    let sum = params.beta + params.delta;
    if sum > 1.0 {
        RegimeClass::Compounding
    } else if sum == 1.0 {
        RegimeClass::Boundary
    } else {
        RegimeClass::Decaying
    }
}
