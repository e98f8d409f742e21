//! Seeded randomness, Gaussian perturbation, and Monte Carlo estimation.
//!
//! Every random draw in the engine derives from a [`SeedSpec`] plus a trial
//! index, mixed through SplitMix64 into a per-trial ChaCha8 stream. Trials
//! therefore never share generator state: the same `(master_seed,
//! stream_id, trial_index)` always produces the same draws, no matter how
//! many worker threads run or in what order trials complete.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::model::{evaluate_transition, Error, ModelState, Result};

/// 97.5% normal quantile; Wilson intervals at 95% confidence.
const Z_95: f64 = 1.959_963_984_540_054;

/// SplitMix64 finalizer. Stable avalanche used for all substream
/// derivation; never used to generate the draws themselves.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Reproducibility contract: a master seed plus a stream label.
///
/// Identical `(master_seed, stream_id, trial_index)` yields identical
/// draws, independent of execution order or degree of parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Derive a decoupled child stream (per grid cell, per agent, ...).
    pub fn substream(&self, label: u64) -> SeedSpec {
        SeedSpec {
            master_seed: self.master_seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(label)),
        }
    }

    /// The generator for one trial of this stream.
    pub fn trial_rng(&self, trial_index: u64) -> ChaCha8Rng {
        let mixed =
            splitmix64(splitmix64(splitmix64(self.master_seed) ^ self.stream_id) ^ trial_index);
        ChaCha8Rng::seed_from_u64(mixed)
    }

    /// One uniform draw in `[0, 1)` for a trial, on a substream separate
    /// from the trial's Gaussian draws.
    pub fn trial_uniform(&self, trial_index: u64) -> f64 {
        self.substream(u64::MAX).trial_rng(trial_index).gen::<f64>()
    }
}

/// Per-variable Gaussian standard deviations and the clamping policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_lambda: f64,
    pub sigma_gamma: f64,
    pub sigma_psi: f64,
    pub sigma_theta: f64,
    pub sigma_phi: f64,
    /// When set, perturbed `lambda`, `psi`, `theta`, `phi` are clamped to
    /// zero. `gamma` is never clamped.
    pub clamp_nonnegative: bool,
}

impl NoiseSpec {
    pub fn new(
        sigma_lambda: f64,
        sigma_gamma: f64,
        sigma_psi: f64,
        sigma_theta: f64,
        sigma_phi: f64,
        clamp_nonnegative: bool,
    ) -> Result<Self> {
        let spec = Self {
            sigma_lambda,
            sigma_gamma,
            sigma_psi,
            sigma_theta,
            sigma_phi,
            clamp_nonnegative,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("sigma_lambda", self.sigma_lambda),
            ("sigma_gamma", self.sigma_gamma),
            ("sigma_psi", self.sigma_psi),
            ("sigma_theta", self.sigma_theta),
            ("sigma_phi", self.sigma_phi),
        ] {
            if !value.is_finite() {
                return Err(Error::NonFinite { field });
            }
            if value < 0.0 {
                return Err(Error::Invalid {
                    field,
                    constraint: ">= 0",
                    value,
                });
            }
        }
        Ok(())
    }

    /// Noise disabled on every variable.
    pub fn zero() -> Self {
        Self {
            sigma_lambda: 0.0,
            sigma_gamma: 0.0,
            sigma_psi: 0.0,
            sigma_theta: 0.0,
            sigma_phi: 0.0,
            clamp_nonnegative: true,
        }
    }
}

/// Binomial point estimate with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub n_trials: u64,
    pub n_fired: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `k` successes in `n` trials at quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    // Rounding must not push the bounds past the point estimate (the
    // interval always contains p_hat, exactly 0/1 at the boundaries).
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

impl ProbabilityEstimate {
    fn from_counts(n_fired: u64, n_trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(n_fired, n_trials, Z_95);
        Self {
            n_trials,
            n_fired,
            p_hat: n_fired as f64 / n_trials as f64,
            ci_low,
            ci_high,
        }
    }

    /// Half-width of the 95% interval.
    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// A gamma grid with aligned probability estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub gamma_grid: Vec<f64>,
    pub estimates: Vec<ProbabilityEstimate>,
    pub base_state: ModelState,
    pub noise: NoiseSpec,
    pub seed: SeedSpec,
}

/// Perturb each field with an independent Gaussian draw of its configured
/// sigma. Draw order is fixed (lambda, gamma, psi, theta, phi); a zero
/// sigma adds exactly zero, so a fully zeroed spec returns the input
/// unchanged. Deterministic in `(seed, trial_index)`.
pub fn perturb(
    state: &ModelState,
    noise: &NoiseSpec,
    seed: &SeedSpec,
    trial_index: u64,
) -> Result<ModelState> {
    state.validate()?;
    noise.validate()?;
    Ok(perturb_with_rng(state, noise, &mut seed.trial_rng(trial_index)))
}

/// Perturbation core shared by the Monte Carlo estimator. The caller is
/// responsible for having validated `state` and `noise`.
fn perturb_with_rng(state: &ModelState, noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> ModelState {
    let mut draw = |sigma: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        sigma * z
    };
    let lambda = state.lambda + draw(noise.sigma_lambda);
    let gamma = state.gamma + draw(noise.sigma_gamma);
    let psi = state.psi + draw(noise.sigma_psi);
    let theta = state.theta + draw(noise.sigma_theta);
    let phi = state.phi + draw(noise.sigma_phi);
    if noise.clamp_nonnegative {
        ModelState {
            lambda: lambda.max(0.0),
            gamma,
            psi: psi.max(0.0),
            theta: theta.max(0.0),
            phi: phi.max(0.0),
        }
    } else {
        ModelState {
            lambda,
            gamma,
            psi,
            theta,
            phi,
        }
    }
}

/// Monte Carlo estimate of the transition probability under perturbation.
///
/// Runs `n_trials` independent perturb-then-evaluate trials on per-trial
/// substreams. Trials run in parallel; the fired count is a plain sum, so
/// the result is bit-identical for any worker-thread count.
pub fn estimate_transition_probability(
    state: &ModelState,
    noise: &NoiseSpec,
    n_trials: u64,
    seed: &SeedSpec,
) -> Result<ProbabilityEstimate> {
    if n_trials == 0 {
        return Err(Error::Invalid {
            field: "n_trials",
            constraint: ">= 1",
            value: 0.0,
        });
    }
    state.validate()?;
    noise.validate()?;
    let n_fired = (0..n_trials)
        .into_par_iter()
        .map(|trial| -> Result<u64> {
            let perturbed = perturb_with_rng(state, noise, &mut seed.trial_rng(trial));
            let report = evaluate_transition(&perturbed)?;
            Ok(report.fired as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(ProbabilityEstimate::from_counts(n_fired, n_trials))
}

/// Evenly spaced grid of `steps` points covering `[from, to]` inclusive.
pub fn linear_grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    assert!(steps >= 2);
    (0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Sweep gamma over an inclusive grid, estimating the transition
/// probability at every point. Noise on gamma is applied around the swept
/// value. Each grid point uses its own derived substream.
pub fn gamma_sweep(
    base: &ModelState,
    gamma_from: f64,
    gamma_to: f64,
    steps: usize,
    noise: &NoiseSpec,
    n_trials: u64,
    seed: &SeedSpec,
) -> Result<SweepResult> {
    for (field, value) in [("gamma_from", gamma_from), ("gamma_to", gamma_to)] {
        if !value.is_finite() {
            return Err(Error::NonFinite { field });
        }
    }
    if gamma_from >= gamma_to {
        return Err(Error::Invalid {
            field: "gamma_from",
            constraint: "< gamma_to",
            value: gamma_from,
        });
    }
    if steps < 2 {
        return Err(Error::Invalid {
            field: "steps",
            constraint: ">= 2",
            value: steps as f64,
        });
    }
    let gamma_grid = linear_grid(gamma_from, gamma_to, steps);
    let estimates = gamma_grid
        .iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let point_state = base.with_gamma(gamma);
            let point_seed = seed.substream(i as u64);
            estimate_transition_probability(&point_state, noise, n_trials, &point_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        gamma_grid,
        estimates,
        base_state: *base,
        noise: *noise,
        seed: *seed,
    })
}
