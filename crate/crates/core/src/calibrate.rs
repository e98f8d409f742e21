//! Logistic calibration of sweep data.
//!
//! Recovers the sigmoid midpoint and steepness from a gamma sweep by
//! fitting `p(gamma) = 1 / (1 + exp(-k * (gamma - gamma0)))` with
//! trial-count-weighted least squares. The optimizer is a coarse grid over
//! `(gamma0, k)` followed by a pattern search that halves its steps until
//! parameter deltas fall below 1e-6, so refitting the same sweep is
//! bit-identical.

use crate::model::{Error, Result};
use crate::stochastic::SweepResult;

/// Search bounds for the steepness, wide enough for every regime the
/// model produces at plausible noise levels.
const STEEPNESS_RANGE: (f64, f64) = (0.1, 50.0);
const COARSE_POINTS: usize = 41;

/// Result of a logistic fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    /// Gamma at which the fitted curve crosses 0.5.
    pub midpoint: f64,
    /// Logistic slope parameter `k`, positive.
    pub steepness: f64,
    /// Trial-count-weighted mean squared error of the fit.
    pub residual: f64,
    /// False when the sweep cannot identify a sigmoid (fewer than 5
    /// points, or estimates that never span below 0.25 and above 0.75).
    /// Non-converged fits still carry the best parameters found, but they
    /// are diagnostics, not measurements.
    pub converged: bool,
}

/// Numerically stable logistic.
#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn weighted_loss(points: &[(f64, f64, f64)], midpoint: f64, ln_k: f64) -> f64 {
    let k = ln_k.exp();
    points
        .iter()
        .map(|&(gamma, p, w)| {
            let fitted = logistic(k * (gamma - midpoint));
            w * (p - fitted) * (p - fitted)
        })
        .sum()
}

/// Fit a logistic to `(gamma, p_hat)` pairs weighted by trial counts.
///
/// Deterministic: the same sweep always produces the same fit bits.
pub fn fit_logistic(sweep: &SweepResult) -> LogisticFit {
    let points: Vec<(f64, f64, f64)> = sweep
        .gamma_grid
        .iter()
        .zip(&sweep.estimates)
        .map(|(&gamma, est)| (gamma, est.p_hat, est.n_trials as f64))
        .collect();
    let total_weight: f64 = points.iter().map(|&(_, _, w)| w).sum();

    let p_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let p_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let identifiable = points.len() >= 5 && p_min < 0.25 && p_max > 0.75;

    let gamma_lo = points.first().map_or(0.0, |p| p.0);
    let gamma_hi = points.last().map_or(1.0, |p| p.0);
    let ln_k_lo = STEEPNESS_RANGE.0.ln();
    let ln_k_hi = STEEPNESS_RANGE.1.ln();

    // Coarse grid.
    let mut best = (f64::INFINITY, gamma_lo, ln_k_lo);
    for i in 0..COARSE_POINTS {
        let mid = gamma_lo + (gamma_hi - gamma_lo) * i as f64 / (COARSE_POINTS - 1) as f64;
        for j in 0..COARSE_POINTS {
            let ln_k = ln_k_lo + (ln_k_hi - ln_k_lo) * j as f64 / (COARSE_POINTS - 1) as f64;
            let loss = weighted_loss(&points, mid, ln_k);
            if loss < best.0 {
                best = (loss, mid, ln_k);
            }
        }
    }

    // Compass pattern search, halving steps on stall. The ln-space step
    // bound keeps the absolute steepness delta below 1e-6 at the cap.
    let mut mid_step = (gamma_hi - gamma_lo) / (COARSE_POINTS - 1) as f64;
    let mut ln_step = (ln_k_hi - ln_k_lo) / (COARSE_POINTS - 1) as f64;
    let (mut loss, mut mid, mut ln_k) = best;
    while mid_step > 1e-7 || ln_step > 1e-9 {
        let candidates = [
            (mid + mid_step, ln_k),
            (mid - mid_step, ln_k),
            (mid, (ln_k + ln_step).min(ln_k_hi)),
            (mid, (ln_k - ln_step).max(ln_k_lo)),
        ];
        let mut improved = false;
        for (c_mid, c_ln_k) in candidates {
            let c_loss = weighted_loss(&points, c_mid, c_ln_k);
            if c_loss < loss {
                loss = c_loss;
                mid = c_mid;
                ln_k = c_ln_k;
                improved = true;
            }
        }
        if !improved {
            mid_step /= 2.0;
            ln_step /= 2.0;
        }
    }

    LogisticFit {
        midpoint: mid,
        steepness: ln_k.exp(),
        residual: if total_weight > 0.0 {
            loss / total_weight
        } else {
            f64::NAN
        },
        converged: identifiable,
    }
}

/// Invert the fitted logistic over a probability band: returns the gamma
/// interval where the curve passes `low` and `high`.
pub fn estimate_gamma_band(fit: &LogisticFit, low: f64, high: f64) -> Result<(f64, f64)> {
    if !fit.converged {
        return Err(Error::Config(
            "gamma band requires a converged logistic fit".to_string(),
        ));
    }
    for (field, value) in [("low", low), ("high", high)] {
        if !value.is_finite() || !(0.0 < value && value < 1.0) {
            return Err(Error::Invalid {
                field,
                constraint: "(0,1)",
                value,
            });
        }
    }
    if low > high {
        return Err(Error::Invalid {
            field: "low",
            constraint: "<= high",
            value: low,
        });
    }
    let invert = |p: f64| fit.midpoint + (p / (1.0 - p)).ln() / fit.steepness;
    Ok((invert(low), invert(high)))
}
