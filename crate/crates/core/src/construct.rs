//! Staged construction of the sparse potential.
//!
//! Stage `j` freezes a prefix `{1..N_j}` of the current potential, cuts it
//! off with an infinite barrier at `N_j + 1`, finds finitely many times
//! `t > j` at which the decoupled block's amplitude stays above 1/2 for
//! every `λ ∈ [−j, j]`, and then replaces the infinite barrier with a finite
//! height `K_j` large enough that the amplitudes move by at most `ε` at
//! those times. The prefix length for the next stage is chosen so that any
//! later modification past it moves the amplitudes at all earlier witness
//! times by less than `ε`.
//!
//! The λ-cover is explicit: at each left endpoint a recurrence time with
//! `|μ̂| ≥ 3/4` is found, and the `λ`-Lipschitz bound `|t|·|Δλ|` certifies
//! `|μ̂| ≥ 1/2` on an interval of radius `1/(4t)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operator::{decouple_at, FiniteOperator, Height, OperatorError, Potential};
use crate::spectral::{
    eigendecompose, fourier, lambda_lipschitz, min_prefix, tail_bound, time_lipschitz, Evaluator, SpectralConfig,
    SpectralError, SpectralMeasure,
};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_L1: usize = 2;
pub const DEFAULT_STAGES: usize = 4;
/// Amplitude required at a cover's left endpoint.
pub const RECURRENCE_THRESHOLD: f64 = 0.75;
/// Amplitude guaranteed across a cover interval for the decoupled block.
pub const COVER_FLOOR: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("epsilon must lie in (0, 1/4), got {0}")]
    BadEpsilon(f64),
    #[error("at least one stage is required")]
    ZeroStages,
    #[error("first barrier site must be at least 2, got {0}")]
    BadFirstSite(usize),
    #[error("no time in ({start}, {horizon}] reached |mu^| >= {threshold}; best {best_amplitude} at t = {best_time}")]
    HorizonExhausted { start: f64, horizon: f64, threshold: f64, best_amplitude: f64, best_time: f64 },
    #[error("barrier height reached the ceiling {ceiling} with worst deviation {worst_deviation} above {allowed}")]
    BarrierCeiling { ceiling: f64, worst_deviation: f64, allowed: f64 },
    #[error("stage {stage}, {step}: {source}")]
    Stage {
        stage: usize,
        step: StageStep,
        #[source]
        source: Box<ConstructionError>,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Sub-operation of a stage, named in error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStep {
    PrefixLength,
    Decouple,
    TimeCover,
    Calibration,
}

impl std::fmt::Display for StageStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StageStep::PrefixLength => "choose_prefix_length",
            StageStep::Decouple => "decouple_at",
            StageStep::TimeCover => "build_time_cover",
            StageStep::Calibration => "calibrate_barrier",
        })
    }
}

fn in_stage<T>(stage: usize, step: StageStep, r: Result<T, ConstructionError>) -> Result<T, ConstructionError> {
    r.map_err(|e| ConstructionError::Stage { stage, step, source: Box::new(e) })
}

/// Grid-search parameters for recurrence times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub initial_window: f64,
    pub max_window: f64,
    /// Upper cap on the grid step, used when the Lipschitz step is larger.
    pub max_step: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { initial_window: 64.0, max_window: (1u64 << 20) as f64, max_step: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionConfig {
    pub epsilon: f64,
    pub l1: usize,
    pub search: SearchConfig,
    /// First height tried by the calibration.
    pub k0: f64,
    pub k_ceiling: f64,
    /// Certification tolerance for finite-barrier amplitudes during calibration.
    pub calibration_tol: f64,
    pub spectral: SpectralConfig,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            l1: DEFAULT_L1,
            search: SearchConfig::default(),
            k0: 16.0,
            k_ceiling: (1u64 << 40) as f64,
            calibration_tol: 1e-9,
            spectral: SpectralConfig::default(),
        }
    }
}

impl ConstructionConfig {
    pub fn validate(&self) -> Result<(), ConstructionError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.25) {
            return Err(ConstructionError::BadEpsilon(self.epsilon));
        }
        if self.l1 < 2 {
            return Err(ConstructionError::BadFirstSite(self.l1));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWitness {
    pub t: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    #[serde(rename = "floor")]
    pub amplitude_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub budget: f64,
    pub deviation_budget: f64,
    pub k_start: f64,
    pub attempts: u32,
    pub audit_step: f64,
    pub worst_deviation: f64,
    pub refined_worst_deviation: f64,
    pub certification_tol: f64,
    /// Always false: the finite-barrier convergence has no rate, so the
    /// height is found empirically and re-audited.
    pub certified_rate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsUsed {
    pub lambda_half_width: f64,
    pub search_floor: f64,
    pub recurrence_threshold: f64,
    pub cover_floor: f64,
    /// Largest witness time over stages `1..=j`.
    pub t_max: f64,
    pub calibration: CalibrationRecord,
    /// `tail_bound(N_{j+1}, j, t_max)`, set together with `freeze_N_next`.
    pub freeze_tail: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub j: usize,
    #[serde(rename = "N")]
    pub prefix_len: usize,
    pub barrier_site: usize,
    #[serde(rename = "K")]
    pub height: Height,
    pub times: Vec<f64>,
    #[serde(rename = "cover")]
    pub witnesses: Vec<TimeWitness>,
    #[serde(rename = "freeze_N_next")]
    pub freeze_next: Option<usize>,
    pub bounds_used: BoundsUsed,
}

impl StageRecord {
    pub fn t_max(&self) -> f64 {
        self.times.iter().copied().fold(0.0, f64::max)
    }

    pub fn finite_height(&self) -> f64 {
        self.height.finite().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionState {
    pub format_version: u32,
    pub epsilon: f64,
    pub stages: Vec<StageRecord>,
    pub potential: Potential,
}

impl ConstructionState {
    pub fn new(epsilon: f64) -> Self {
        Self { format_version: FORMAT_VERSION, epsilon, stages: Vec::new(), potential: Potential::zero() }
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// `V^{(j)}`: the barriers placed by stages `1..=j`.
    pub fn stage_potential(&self, j: usize) -> Result<Potential, OperatorError> {
        Potential::new(self.stages.iter().take(j).map(|s| (s.barrier_site, s.height)))
    }

    /// `T_1 ∪ … ∪ T_j`, ascending and deduplicated.
    pub fn times_through(&self, j: usize) -> Vec<f64> {
        let mut all: Vec<f64> = self.stages.iter().take(j).flat_map(|s| s.times.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    pub fn t_max_through(&self, j: usize) -> f64 {
        self.stages.iter().take(j).map(StageRecord::t_max).fold(0.0, f64::max)
    }
}

/// The operators `block + λ⟨δ₁,·⟩δ₁`, `λ ∈ ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneFamily {
    base: FiniteOperator,
}

impl RankOneFamily {
    /// `base` is the member at `λ = 0`.
    pub fn new(base: FiniteOperator) -> Self {
        Self { base }
    }

    pub fn at(&self, lambda: f64) -> FiniteOperator {
        self.base.shifted(lambda)
    }

    pub fn size(&self) -> usize {
        self.base.size()
    }
}

/// First grid time `t > m` with `|μ̂(t)| ≥ η`.
///
/// Grid spacing is `(1−η)/(2L)` with `L` the time-Lipschitz constant, capped
/// at `search.max_step`. The scan covers windows `[m, m+W]` with `W`
/// doubling from `search.initial_window` up to `search.max_window`.
pub fn find_recurrence_time(
    sm: &SpectralMeasure,
    eta: f64,
    m: f64,
    search: &SearchConfig,
) -> Result<f64, ConstructionError> {
    let lip = time_lipschitz(sm);
    let step = if lip > 0.0 { ((1.0 - eta) / (2.0 * lip)).min(search.max_step) } else { search.max_step };
    let mut best = (f64::NEG_INFINITY, m);
    let mut window = search.initial_window;
    let mut k: u64 = 1;
    loop {
        let end = m + window;
        loop {
            let t = m + k as f64 * step;
            if t > end {
                break;
            }
            let amp = fourier(sm, t).norm();
            if amp >= eta {
                return Ok(t);
            }
            if amp > best.0 {
                best = (amp, t);
            }
            k += 1;
        }
        if window >= search.max_window {
            return Err(ConstructionError::HorizonExhausted {
                start: m,
                horizon: end,
                threshold: eta,
                best_amplitude: best.0,
                best_time: best.1,
            });
        }
        window = (window * 2.0).min(search.max_window);
    }
}

/// Finite list of witnesses covering `[−half_width, half_width]`, each with
/// a time above `floor_t` and guaranteed amplitude [`COVER_FLOOR`].
pub fn build_time_cover(
    family: &RankOneFamily,
    half_width: f64,
    floor_t: f64,
    search: &SearchConfig,
) -> Result<Vec<TimeWitness>, ConstructionError> {
    let mut witnesses = Vec::new();
    let mut lo = -half_width;
    loop {
        let sm = eigendecompose(&family.at(lo))?;
        let t = find_recurrence_time(&sm, RECURRENCE_THRESHOLD, floor_t, search)?;
        // lambda_lipschitz(t, r) = 3/4 − 1/2 at r = 1/(4t)
        let radius = (RECURRENCE_THRESHOLD - COVER_FLOOR) / t;
        debug_assert!((lambda_lipschitz(t, radius) - 0.25).abs() < 1e-12);
        let hi = (lo + radius).min(half_width);
        witnesses.push(TimeWitness { t, lambda_lo: lo, lambda_hi: hi, amplitude_floor: COVER_FLOOR });
        if hi >= half_width {
            return Ok(witnesses);
        }
        lo = hi;
    }
}

/// Uniform grid on `[−half_width, half_width]` with spacing at most `step`,
/// endpoints included.
pub fn lambda_grid(half_width: f64, step: f64) -> Vec<f64> {
    let span = 2.0 * half_width;
    let count = if span <= 0.0 { 0 } else { (span / step).ceil().max(1.0) as usize };
    let h = if count == 0 { 0.0 } else { span / count as f64 };
    (0..=count).map(|i| if i == count { half_width } else { -half_width + i as f64 * h }).collect()
}

/// Outcome of [`calibrate_barrier`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub height: f64,
    pub record: CalibrationRecord,
}

/// Worst `|μ̂_{V_K,λ}(t) − μ̂_{decoupled,λ}(t)| + radius` over a λ grid and
/// all `times`.
fn barrier_deviation(
    evaluator: &Evaluator,
    finite: &Potential,
    decoupled: &[(f64, Vec<Complex64>)],
    times: &[f64],
    tol: f64,
) -> Result<f64, SpectralError> {
    let per_lambda: Vec<Result<f64, SpectralError>> = decoupled
        .par_iter()
        .map(|(lambda, reference)| {
            let amps = evaluator.fourier_certified_many(finite, *lambda, times, tol)?;
            Ok(amps.iter().zip(reference).map(|(a, r)| (a.value - r).norm() + a.error_radius).fold(0.0, f64::max))
        })
        .collect();
    let mut worst = 0.0_f64;
    for r in per_lambda {
        worst = worst.max(r?);
    }
    Ok(worst)
}

fn decoupled_amplitudes(
    prefix: &Potential,
    site: usize,
    lambdas: &[f64],
    times: &[f64],
) -> Result<Vec<(f64, Vec<Complex64>)>, ConstructionError> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let sm = eigendecompose(&decouple_at(prefix, lambda, site)?)?;
            Ok((lambda, times.iter().map(|&t| fourier(&sm, t)).collect()))
        })
        .collect()
}

/// Smallest height in `k_start·2^i` replacing the infinite barrier at `site`
/// such that amplitudes at every witness time move by at most `budget/2`
/// on a λ grid of spacing `budget/(4 t_max)`. The chosen height is re-audited
/// on the grid midpoints before it is accepted.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_barrier(
    evaluator: &Evaluator,
    prefix: &Potential,
    site: usize,
    witnesses: &[TimeWitness],
    half_width: f64,
    budget: f64,
    k_start: f64,
    k_ceiling: f64,
    tol: f64,
) -> Result<Calibration, ConstructionError> {
    let mut times: Vec<f64> = witnesses.iter().map(|w| w.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let t_max = times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let step = budget / (4.0 * t_max);
    let allowed = budget / 2.0;

    let grid = lambda_grid(half_width, step);
    let midpoints: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let coarse = decoupled_amplitudes(prefix, site, &grid, &times)?;
    let mut fine: Option<Vec<(f64, Vec<Complex64>)>> = None;

    let mut height = k_start;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let finite = prefix.with_barrier(site, Height::Finite(height))?;
        let worst = barrier_deviation(evaluator, &finite, &coarse, &times, tol)?;
        if worst <= allowed {
            let mids = match &fine {
                Some(m) => m,
                None => fine.insert(decoupled_amplitudes(prefix, site, &midpoints, &times)?),
            };
            let refined = barrier_deviation(evaluator, &finite, mids, &times, tol)?;
            if refined <= allowed {
                return Ok(Calibration {
                    height,
                    record: CalibrationRecord {
                        budget,
                        deviation_budget: allowed,
                        k_start,
                        attempts,
                        audit_step: grid.get(1).map_or(0.0, |g| g - grid[0]),
                        worst_deviation: worst,
                        refined_worst_deviation: refined,
                        certification_tol: tol,
                        certified_rate: false,
                    },
                });
            }
        }
        if height >= k_ceiling {
            return Err(ConstructionError::BarrierCeiling { ceiling: k_ceiling, worst_deviation: worst, allowed });
        }
        height *= 2.0;
    }
}

/// `N_{j+1} = max(min_prefix(ε, j, T_max), N_j + j, barrier_site_j + 1)`.
pub fn choose_prefix_length(state: &ConstructionState) -> usize {
    let j = state.stage_count();
    let last = state.stages.last().expect("choose_prefix_length needs a completed stage");
    let t_max = state.t_max_through(j);
    min_prefix(state.epsilon, j as f64, t_max).max(last.prefix_len + j).max(last.barrier_site + 1)
}

/// Runs one stage and records the prefix length the next stage will freeze.
pub fn run_stage(
    state: &ConstructionState,
    config: &ConstructionConfig,
    evaluator: &Evaluator,
) -> Result<ConstructionState, ConstructionError> {
    let stage = state.stage_count() + 1;
    let (prefix_len, prev_height) = match state.stages.last() {
        None => (config.l1 - 1, 0.0),
        Some(prev) => {
            let n = match prev.freeze_next {
                Some(n) => n,
                None => choose_prefix_length(state),
            };
            (n, prev.finite_height())
        }
    };
    let site = prefix_len + 1;
    let prefix = state.potential.prefix(prefix_len);
    let half_width = stage as f64;

    let block = in_stage(stage, StageStep::Decouple, decouple_at(&prefix, 0.0, site).map_err(Into::into))?;
    let family = RankOneFamily::new(block);
    let search_floor = half_width.max(state.t_max_through(stage - 1));
    let witnesses =
        in_stage(stage, StageStep::TimeCover, build_time_cover(&family, half_width, search_floor, &config.search))?;

    let k_start = config.k0.max(prev_height + stage as f64);
    let calibration = in_stage(
        stage,
        StageStep::Calibration,
        calibrate_barrier(
            evaluator,
            &prefix,
            site,
            &witnesses,
            half_width,
            state.epsilon,
            k_start,
            config.k_ceiling,
            config.calibration_tol,
        ),
    )?;

    let mut times: Vec<f64> = witnesses.iter().map(|w| w.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut next = state.clone();
    next.potential = in_stage(
        stage,
        StageStep::Calibration,
        prefix.with_barrier(site, Height::Finite(calibration.height)).map_err(Into::into),
    )?;
    next.stages.push(StageRecord {
        j: stage,
        prefix_len,
        barrier_site: site,
        height: Height::Finite(calibration.height),
        times,
        witnesses,
        freeze_next: None,
        bounds_used: BoundsUsed {
            lambda_half_width: half_width,
            search_floor,
            recurrence_threshold: RECURRENCE_THRESHOLD,
            cover_floor: COVER_FLOOR,
            t_max: 0.0,
            calibration: calibration.record,
            freeze_tail: None,
        },
    });
    let t_max = next.t_max_through(stage);
    let n_next = choose_prefix_length(&next);
    let record = next.stages.last_mut().expect("just pushed");
    record.bounds_used.t_max = t_max;
    record.freeze_next = Some(n_next);
    record.bounds_used.freeze_tail = Some(tail_bound(n_next, stage as f64, t_max));
    Ok(next)
}

/// Runs `stages` stages from the free half-line.
pub fn run_construction(stages: usize, config: &ConstructionConfig) -> Result<ConstructionState, ConstructionError> {
    config.validate()?;
    if stages == 0 {
        return Err(ConstructionError::ZeroStages);
    }
    let evaluator = Evaluator::new(config.spectral);
    let mut state = ConstructionState::new(config.epsilon);
    for _ in 0..stages {
        state = run_stage(&state, config, &evaluator)?;
    }
    Ok(state)
}
