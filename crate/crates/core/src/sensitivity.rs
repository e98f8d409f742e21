//! Parameter-grid sensitivity sweep over (alpha, beta, delta).
//!
//! Each cell reruns the gamma sweep, a cohort divergence run, and a
//! perpetual-suppression growth check under its own feedback parameters.
//! Cells are evaluated in lexicographic (alpha, beta, delta) order. Cell
//! randomness derives from the master seed either per cell (decoupled,
//! the default) or shared across cells; shared seeding makes the gamma
//! sweeps bit-identical across cells, which is the structural invariance
//! check — the sweep never consults feedback parameters.

use crate::episodes::{cohort_divergence, run_suppression, CohortSummary};
use crate::model::{classify_regime, Error, FeedbackParams, ModelState, RegimeClass, Result};
use crate::stochastic::{gamma_sweep, NoiseSpec, SeedSpec, SweepResult};

/// Stream labels inside one cell; fixed so derivations are reproducible.
const SWEEP_STREAM: u64 = 1;
const COHORT_STREAM: u64 = 2;

/// The swept coefficient lists plus the fixed remainder of the feedback
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub kappa: f64,
    /// Template supplying the unswept coefficients (theta_adj, phi_adj).
    pub base_feedback: FeedbackParams,
}

impl ParamGrid {
    /// All grid cells in lexicographic (alpha, beta, delta) order; errors
    /// when any combination violates the feedback constraints.
    pub fn cells(&self) -> Result<Vec<FeedbackParams>> {
        if self.alphas.is_empty() || self.betas.is_empty() || self.deltas.is_empty() {
            return Err(Error::Config(
                "grid lists must be non-empty".to_string(),
            ));
        }
        let mut cells = Vec::with_capacity(self.alphas.len() * self.betas.len() * self.deltas.len());
        for &alpha in &self.alphas {
            for &beta in &self.betas {
                for &delta in &self.deltas {
                    cells.push(FeedbackParams::new(
                        alpha,
                        beta,
                        delta,
                        self.kappa,
                        self.base_feedback.theta_adj,
                        self.base_feedback.phi_adj,
                    )?);
                }
            }
        }
        Ok(cells)
    }
}

/// How cell randomness derives from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedMode {
    /// Every cell gets its own substream keyed by cell index.
    PerCell,
    /// All cells share the master stream; sweeps become bit-identical.
    Shared,
}

impl SeedMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SeedMode::PerCell => "per_cell",
            SeedMode::Shared => "shared",
        }
    }
}

/// Everything a grid run needs besides the grid itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRunSpec {
    pub noise: NoiseSpec,
    pub gamma_from: f64,
    pub gamma_to: f64,
    pub sweep_steps: usize,
    pub n_trials: u64,
    /// Horizon for both the suppression growth check and cohort runs.
    pub horizon: usize,
    pub cohort_success_prob: f64,
    pub cohort_agents: usize,
    pub cohort_split_after: usize,
    pub seed_mode: SeedMode,
}

/// One grid cell: classification plus the per-cell experiment reruns.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCellResult {
    /// Lexicographic cell index.
    pub index: usize,
    pub params: FeedbackParams,
    pub regime: RegimeClass,
    pub sweep: SweepResult,
    pub divergence: CohortSummary,
    /// Whether psi ended above its starting value under perpetual failure
    /// (simulated, not inferred from the classification).
    pub suppression_growth: bool,
}

/// Run the full grid. The suppression growth check needs `base_state.psi`
/// strictly positive, otherwise growth is undetectable by construction.
pub fn run_grid(
    grid: &ParamGrid,
    base_state: &ModelState,
    spec: &GridRunSpec,
    seed: &SeedSpec,
) -> Result<Vec<GridCellResult>> {
    base_state.validate()?;
    spec.noise.validate()?;
    if base_state.psi <= 0.0 {
        return Err(Error::Invalid {
            field: "psi",
            constraint: "> 0 (suppression growth check)",
            value: base_state.psi,
        });
    }
    let cells = grid.cells()?;
    let mut results = Vec::with_capacity(cells.len());
    for (index, params) in cells.into_iter().enumerate() {
        let cell_seed = match spec.seed_mode {
            SeedMode::PerCell => seed.substream(index as u64),
            SeedMode::Shared => *seed,
        };
        let cell = run_cell(index, params, base_state, spec, &cell_seed).map_err(|e| {
            Error::Config(format!(
                "grid cell {index} (alpha={}, beta={}, delta={}): {e}",
                params.alpha, params.beta, params.delta
            ))
        })?;
        results.push(cell);
    }
    Ok(results)
}

fn run_cell(
    index: usize,
    params: FeedbackParams,
    base_state: &ModelState,
    spec: &GridRunSpec,
    cell_seed: &SeedSpec,
) -> Result<GridCellResult> {
    let sweep = gamma_sweep(
        base_state,
        spec.gamma_from,
        spec.gamma_to,
        spec.sweep_steps,
        &spec.noise,
        spec.n_trials,
        &cell_seed.substream(SWEEP_STREAM),
    )?;
    let divergence = cohort_divergence(
        base_state,
        &params,
        spec.cohort_success_prob,
        spec.cohort_agents,
        spec.horizon,
        spec.cohort_split_after,
        &cell_seed.substream(COHORT_STREAM),
    )?;
    let suppression = run_suppression(base_state, &params, spec.horizon)?;
    let suppression_growth = suppression.final_state().psi > base_state.psi;
    Ok(GridCellResult {
        index,
        params,
        regime: classify_regime(&params),
        sweep,
        divergence,
        suppression_growth,
    })
}

/// Count grid combinations in the compounding regime (`beta + delta > 1`,
/// strict; the boundary is excluded).
pub fn count_compounding(grid: &ParamGrid) -> Result<usize> {
    Ok(grid
        .cells()?
        .iter()
        .filter(|p| classify_regime(p) == RegimeClass::Compounding)
        .count())
}

/// Outcome of the cross-cell sigmoid invariance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceReport {
    pub pass: bool,
    /// Largest per-point probability difference against the first cell.
    pub max_cross_cell_deviation: f64,
    /// Largest adjacent-pair decrease of p_hat within any cell.
    pub max_monotonicity_violation: f64,
    /// True when every cell ran from the same stream; deviation must then
    /// be exactly zero.
    pub shared_seeds: bool,
}

/// Verify that the gamma sweep is invariant across grid cells (feedback
/// parameters never enter the transition condition) and that each curve
/// is non-decreasing within `tolerance`.
///
/// Cells sharing one seed must match exactly — that equality is the pass
/// condition together with monotonicity. Independently seeded cells
/// differ only by binomial sampling noise; their deviation is reported
/// for inspection, not gated. Heterogeneous cell configurations are a
/// configuration error.
pub fn check_sigmoid_invariance(
    results: &[GridCellResult],
    tolerance: f64,
) -> Result<InvarianceReport> {
    let Some(first) = results.first() else {
        return Err(Error::Config(
            "sigmoid invariance check needs at least one cell".to_string(),
        ));
    };
    let reference = &first.sweep;
    for cell in results {
        let sweep = &cell.sweep;
        if sweep.base_state != reference.base_state
            || sweep.noise != reference.noise
            || sweep.gamma_grid != reference.gamma_grid
            || sweep.estimates.len() != reference.estimates.len()
            || sweep.estimates[0].n_trials != reference.estimates[0].n_trials
        {
            return Err(Error::Config(format!(
                "cell {} sweep configuration differs from cell {}",
                cell.index, first.index
            )));
        }
    }
    let shared_seeds = results.iter().all(|c| c.sweep.seed == reference.seed);

    let mut max_deviation = 0.0f64;
    for cell in results {
        for (a, b) in cell.sweep.estimates.iter().zip(&reference.estimates) {
            max_deviation = max_deviation.max((a.p_hat - b.p_hat).abs());
        }
    }
    let deviation_ok = !shared_seeds || max_deviation == 0.0;

    let mut max_violation = 0.0f64;
    for cell in results {
        for pair in cell.sweep.estimates.windows(2) {
            max_violation = max_violation.max(pair[0].p_hat - pair[1].p_hat);
        }
    }

    Ok(InvarianceReport {
        pass: deviation_ok && max_violation <= tolerance,
        max_cross_cell_deviation: max_deviation,
        max_monotonicity_violation: max_violation,
        shared_seeds,
    })
}
