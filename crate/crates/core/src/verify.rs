//! Independent audits of a finished [`ConstructionState`].
//!
//! Every audit is a pure function of the state and its options. Reports
//! carry the worst observed value, the threshold it is compared against and
//! detail rows for the worst sample of each stage plus every violation.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::{lambda_grid, ConstructionState};
use crate::operator::{decouple_at, FiniteOperator, OperatorError, Potential};
use crate::rng::Sampler;
use crate::spectral::{eigendecompose, eigenvalues, fourier, tail_bound, Evaluator, SpectralError};
use crate::truncate;

/// Rounding allowance added to certified radii when comparing two
/// independently diagonalized amplitudes against an analytic bound.
pub const FLOAT_SLACK: f64 = 1e-11;
/// Agreement required between the two decoupling paths.
pub const DECOUPLING_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_SPECTRUM_BOXES: [usize; 4] = [500, 1000, 2000, 4000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Pass when `worst_case ≥ threshold`.
    AtLeast,
    /// Pass when `worst_case ≤ threshold`.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub input: String,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub name: String,
    pub samples: usize,
    pub worst_case: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub pass: bool,
    pub details: Vec<AuditRow>,
    pub notes: Vec<String>,
}

impl AuditReport {
    fn new(name: &str, direction: Direction, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            samples: 0,
            worst_case: match direction {
                Direction::AtLeast => f64::MAX,
                Direction::AtMost => 0.0,
            },
            threshold,
            direction,
            pass: true,
            details: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn row(&mut self, input: impl Into<String>, measured: f64, bound: f64) {
        self.details.push(AuditRow { input: input.into(), measured, bound });
    }

    fn fail(&mut self, input: impl Into<String>, measured: f64, bound: f64) {
        self.pass = false;
        self.row(input, measured, bound);
    }

    fn within(&self, value: f64) -> bool {
        match self.direction {
            Direction::AtLeast => value >= self.threshold,
            Direction::AtMost => value <= self.threshold,
        }
    }

    /// Folds the overall worst case and closes the report.
    fn finish(mut self) -> Self {
        if !self.within(self.worst_case) {
            self.pass = false;
        }
        if !self.pass && self.details.is_empty() {
            self.row("overall", self.worst_case, self.threshold);
        }
        self
    }

    fn observe(&mut self, value: f64) {
        self.worst_case = match self.direction {
            Direction::AtLeast => self.worst_case.min(value),
            Direction::AtMost => self.worst_case.max(value),
        };
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.direction {
            Direction::AtLeast => ">=",
            Direction::AtMost => "<=",
        };
        writeln!(
            f,
            "[{}] {}: worst {:.6e} {} {:.6e} over {} samples",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.worst_case,
            rel,
            self.threshold,
            self.samples
        )?;
        for note in &self.notes {
            writeln!(f, "    note: {note}")?;
        }
        for row in &self.details {
            writeln!(f, "    {}: measured {:.6e}, bound {:.6e}", row.input, row.measured, row.bound)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessAuditOptions {
    /// Replaces the default λ spacing `ε/(2 t_max)`.
    pub grid_step_override: Option<f64>,
    /// Certification tolerance of every amplitude.
    pub tol: f64,
    /// Extra uniformly drawn λ per stage: `(seed, count)`.
    pub spot_check: Option<(u64, usize)>,
}

impl Default for WitnessAuditOptions {
    fn default() -> Self {
        Self { grid_step_override: None, tol: 1e-6, spot_check: None }
    }
}

/// Default λ spacing for stage `j`: `ε/(2 t_max)` with `t_max` over `T_1..T_j`.
pub fn stage_grid_step(state: &ConstructionState, j: usize) -> f64 {
    state.epsilon / (2.0 * state.t_max_through(j))
}

/// Best certified lower bound on `|μ̂_{V,λ}(t)|` over `times`, and the largest radius.
fn best_witness(
    evaluator: &Evaluator,
    v: &Potential,
    lambda: f64,
    times: &[f64],
    tol: f64,
) -> Result<(f64, f64), SpectralError> {
    let amps = evaluator.fourier_certified_many(v, lambda, times, tol)?;
    let best = amps.iter().map(|a| a.modulus_floor()).fold(f64::NEG_INFINITY, f64::max);
    let radius = amps.iter().map(|a| a.error_radius).fold(0.0, f64::max);
    Ok((best, radius))
}

/// For every stage `j` and λ on a grid of `[−j, j]`, some `t ∈ T_j` must
/// have certified `|μ̂_{V,λ}(t)| ≥ 1/2 − 2ε` on the final potential.
pub fn audit_witnesses(state: &ConstructionState, options: &WitnessAuditOptions, evaluator: &Evaluator) -> AuditReport {
    let threshold = 0.5 - 2.0 * state.epsilon;
    let mut report = AuditReport::new("witnesses", Direction::AtLeast, threshold);
    report.notes.push(format!("certification tolerance {:e}", options.tol));
    let v = &state.potential;

    for stage in &state.stages {
        let j = stage.j;
        let half = j as f64;
        let step = options.grid_step_override.unwrap_or_else(|| stage_grid_step(state, j));
        let mut lambdas = if step > 2.0 * half {
            report.row(
                format!("stage {j}: degenerate grid, step {step} exceeds interval width {}", 2.0 * half),
                step,
                2.0 * half,
            );
            vec![-half, half]
        } else {
            lambda_grid(half, step)
        };
        let grid_len = lambdas.len();
        if let Some((seed, count)) = options.spot_check {
            let mut sampler = Sampler::new(seed ^ j as u64);
            lambdas.extend((0..count).map(|_| sampler.uniform(-half, half)));
        }

        let results: Vec<Result<(f64, f64), SpectralError>> =
            lambdas.par_iter().map(|&lambda| best_witness(evaluator, v, lambda, &stage.times, options.tol)).collect();

        let mut stage_worst = (f64::INFINITY, 0.0);
        for (idx, (lambda, result)) in lambdas.iter().zip(results).enumerate() {
            let label = if idx < grid_len { "grid" } else { "spot" };
            report.samples += 1;
            match result {
                Ok((best, radius)) => {
                    report.observe(best);
                    if best < stage_worst.0 {
                        stage_worst = (best, *lambda);
                    }
                    if best < threshold {
                        report.fail(format!("stage {j}, {label} lambda {lambda}"), best, threshold);
                    }
                    if radius > options.tol {
                        report.fail(
                            format!("stage {j}, {label} lambda {lambda}: certification radius"),
                            radius,
                            options.tol,
                        );
                    }
                }
                Err(e) => report.fail(format!("stage {j}, {label} lambda {lambda}: {e}"), f64::MIN, threshold),
            }
        }
        report.row(format!("stage {j}: worst grid lambda {}", stage_worst.1), stage_worst.0, threshold);
    }
    if let Some((seed, count)) = options.spot_check {
        report.notes.push(format!("spot checks: {count} per stage, splitmix64 seed {seed}"));
    }
    if report.samples == 0 {
        report.worst_case = threshold;
    }
    report.finish()
}

/// Amplitudes under `V^{(J)}` and `V^{(j)}` at all of `T_1..T_j` must differ
/// by less than `ε` and by at most `tail_bound(N_{j+1}, j, t)`.
pub fn audit_freeze(state: &ConstructionState, tol: f64, evaluator: &Evaluator) -> AuditReport {
    let eps = state.epsilon;
    let mut report = AuditReport::new("freeze", Direction::AtMost, eps);
    let total = state.stage_count();
    if total < 2 {
        report.notes.push("fewer than two stages; nothing to compare".into());
        return report.finish();
    }
    report
        .notes
        .push(format!("each row must satisfy measured < epsilon and measured <= tail bound + radii + {FLOAT_SLACK:e}"));
    let final_v = &state.potential;

    for j in 1..total {
        let stage = &state.stages[j - 1];
        let frozen = match state.stage_potential(j) {
            Ok(v) => v,
            Err(e) => {
                report.fail(format!("stage {j}: {e}"), f64::MAX, eps);
                continue;
            }
        };
        let Some(n_next) = stage.freeze_next else {
            report.fail(format!("stage {j}: missing freeze_N_next"), f64::MAX, eps);
            continue;
        };
        let times = state.times_through(j);
        let lambdas = lambda_grid(j as f64, stage_grid_step(state, j));
        let results: Vec<Result<Vec<(f64, f64)>, SpectralError>> = lambdas
            .par_iter()
            .map(|&lambda| {
                let a = evaluator.fourier_certified_many(final_v, lambda, &times, tol)?;
                let b = evaluator.fourier_certified_many(&frozen, lambda, &times, tol)?;
                Ok(a.iter()
                    .zip(&b)
                    .map(|(x, y)| ((x.value - y.value).norm(), x.error_radius + y.error_radius))
                    .collect())
            })
            .collect();

        let mut stage_worst = (0.0_f64, 0.0, 0.0);
        for (lambda, result) in lambdas.iter().zip(results) {
            let rows = match result {
                Ok(rows) => rows,
                Err(e) => {
                    report.fail(format!("stage {j}, lambda {lambda}: {e}"), f64::MAX, eps);
                    continue;
                }
            };
            for (&t, (measured, radii)) in times.iter().zip(rows) {
                report.samples += 1;
                report.observe(measured);
                let analytic = tail_bound(n_next, j as f64, t);
                if measured >= eps {
                    report.fail(format!("stage {j}, lambda {lambda}, t {t}: not below epsilon"), measured, eps);
                }
                if measured - radii - FLOAT_SLACK > analytic {
                    report.fail(format!("stage {j}, lambda {lambda}, t {t}: above tail bound"), measured, analytic);
                }
                if measured >= stage_worst.0 {
                    stage_worst = (measured, *lambda, t);
                }
            }
        }
        report.row(
            format!("stage {j}: worst at lambda {}, t {}", stage_worst.1, stage_worst.2),
            stage_worst.0,
            tail_bound(n_next, j as f64, stage_worst.2).min(eps),
        );
    }
    report.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumAuditOptions {
    pub boxes: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// Margin `δ` around `[−2, 2]`.
    pub margin: f64,
    /// Gaps are measured inside `[−inner, inner]`.
    pub inner: f64,
    pub max_gap: f64,
}

impl Default for SpectrumAuditOptions {
    fn default() -> Self {
        Self { boxes: DEFAULT_SPECTRUM_BOXES.to_vec(), lambdas: vec![0.0, 1.0], margin: 0.05, inner: 1.9, max_gap: 0.1 }
    }
}

/// Eigenvalue statistics of one box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpectrum {
    pub size: usize,
    pub lambda: f64,
    pub outside: usize,
    pub allowed_outside: usize,
    pub max_inner_gap: f64,
}

pub fn box_spectrum(
    v: &Potential,
    lambda: f64,
    size: usize,
    options: &SpectrumAuditOptions,
) -> Result<BoxSpectrum, SpectralError> {
    let values = eigenvalues(&truncate(v, lambda, size)?)?;
    let edge = 2.0 + options.margin;
    let outside = values.iter().filter(|e| e.abs() > edge).count();
    let inner: Vec<f64> = values.iter().copied().filter(|e| e.abs() <= options.inner).collect();
    let max_inner_gap =
        if inner.len() < 2 { 2.0 * options.inner } else { inner.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) };
    Ok(BoxSpectrum { size, lambda, outside, allowed_outside: v.barriers_within(size) + 1, max_inner_gap })
}

/// Finite-box proxy for `σ_ess = [−2, 2]`: few eigenvalues outside the band
/// and gaps inside it shrinking as the box grows.
pub fn audit_essential_spectrum(state: &ConstructionState, options: &SpectrumAuditOptions) -> AuditReport {
    let mut report = AuditReport::new("spectrum", Direction::AtMost, options.max_gap);
    report.notes.push("heuristic finite-box proxy for the essential spectrum, not a proof".into());
    report.notes.push(format!(
        "margin {}, inner window [-{}, {}], outside count <= barriers in box + 1",
        options.margin, options.inner, options.inner
    ));
    if options.boxes.is_empty() || options.boxes.windows(2).any(|w| w[0] >= w[1]) {
        report.fail(
            format!("box sizes must be non-empty and ascending: {:?}", options.boxes),
            f64::MAX,
            options.max_gap,
        );
        return report.finish();
    }
    let jobs: Vec<(f64, usize)> =
        options.lambdas.iter().flat_map(|&l| options.boxes.iter().map(move |&n| (l, n))).collect();
    let results: Vec<Result<BoxSpectrum, SpectralError>> =
        jobs.par_iter().map(|&(lambda, n)| box_spectrum(&state.potential, lambda, n, options)).collect();

    let mut previous_gap: Option<(f64, f64)> = None;
    for ((lambda, n), result) in jobs.iter().zip(results) {
        report.samples += 1;
        let stats = match result {
            Ok(s) => s,
            Err(e) => {
                report.fail(format!("box {n}, lambda {lambda}: {e}"), f64::MAX, options.max_gap);
                continue;
            }
        };
        let label = format!("box {n}, lambda {lambda}");
        report.row(format!("{label}: eigenvalues outside band"), stats.outside as f64, stats.allowed_outside as f64);
        report.row(format!("{label}: max inner gap"), stats.max_inner_gap, options.max_gap);
        if stats.outside > stats.allowed_outside {
            report.fail(
                format!("{label}: too many eigenvalues outside band"),
                stats.outside as f64,
                stats.allowed_outside as f64,
            );
        }
        match previous_gap {
            Some((pl, pg)) if pl == *lambda && stats.max_inner_gap > pg => {
                report.fail(format!("{label}: gap grew with box size"), stats.max_inner_gap, pg);
            }
            _ => {}
        }
        previous_gap = Some((*lambda, stats.max_inner_gap));
        if *n == *options.boxes.last().expect("non-empty") {
            report.observe(stats.max_inner_gap);
        }
    }
    report.finish()
}

/// Block `{1..site−1}` of `v` with `λ` added at site 1, built straight from
/// the barrier list rather than through [`decouple_at`].
fn direct_block(v: &Potential, lambda: f64, site: usize) -> Result<FiniteOperator, OperatorError> {
    let mut diagonal = vec![0.0; site.saturating_sub(1)];
    for b in v.barriers() {
        if b.site < site {
            diagonal[b.site - 1] =
                b.height.finite().ok_or(OperatorError::InfiniteInsideBox { site: b.site, size: site - 1 })?;
        }
    }
    if let Some(first) = diagonal.first_mut() {
        *first += lambda;
    }
    FiniteOperator::from_diagonal(diagonal)
}

/// Largest `|μ̂_A(t) − μ̂_B(t)|` between [`decouple_at`] on `prefix` and a
/// directly assembled block of `full` cut at `site`.
pub fn dual_path_gap(
    prefix: &Potential,
    full: &Potential,
    site: usize,
    samples: &[(f64, f64)],
) -> Result<f64, SpectralError> {
    let mut worst = 0.0_f64;
    let mut cached: Option<(f64, crate::SpectralMeasure, crate::SpectralMeasure)> = None;
    for &(lambda, t) in samples {
        if cached.as_ref().map(|c| c.0) != Some(lambda) {
            let a = eigendecompose(&decouple_at(prefix, lambda, site)?)?;
            let b = eigendecompose(&direct_block(full, lambda, site)?)?;
            cached = Some((lambda, a, b));
        }
        let (_, a, b) = cached.as_ref().expect("set above");
        worst = worst.max((fourier(a, t) - fourier(b, t)).norm());
    }
    Ok(worst)
}

/// Decoupled block amplitudes recomputed from the stage records and from the
/// stored potential must agree; barrier placement must match the records.
pub fn audit_decoupling(state: &ConstructionState) -> AuditReport {
    let mut report = AuditReport::new("decoupling", Direction::AtMost, DECOUPLING_TOLERANCE);
    let barriers = state.potential.barriers();
    for (idx, stage) in state.stages.iter().enumerate() {
        let j = stage.j;
        match barriers.get(idx) {
            Some(b) => {
                if b.site != stage.barrier_site {
                    report.fail(
                        format!("stage {j}: record barrier_site {} vs potential site {}", stage.barrier_site, b.site),
                        (b.site as f64 - stage.barrier_site as f64).abs(),
                        0.0,
                    );
                }
                if b.height != stage.height {
                    report.fail(
                        format!("stage {j}: record K {} vs potential height {}", stage.height, b.height),
                        1.0,
                        0.0,
                    );
                }
            }
            None => report.fail(format!("stage {j}: potential has no barrier #{}", idx + 1), 1.0, 0.0),
        }
        if stage.prefix_len + 1 != stage.barrier_site {
            report.fail(
                format!("stage {j}: N + 1 = {} differs from barrier_site {}", stage.prefix_len + 1, stage.barrier_site),
                1.0,
                0.0,
            );
        }

        let prefix = match state.stage_potential(idx) {
            Ok(p) => p,
            Err(e) => {
                report.fail(format!("stage {j}: {e}"), 1.0, 0.0);
                continue;
            }
        };
        let samples: Vec<(f64, f64)> = stage.witnesses.iter().map(|w| (w.lambda_lo, w.t)).collect();
        report.samples += samples.len();
        match dual_path_gap(&prefix, &state.potential, stage.barrier_site, &samples) {
            Ok(gap) => {
                report.observe(gap);
                report.row(format!("stage {j}: block of {} sites", stage.barrier_site - 1), gap, DECOUPLING_TOLERANCE);
                if gap > DECOUPLING_TOLERANCE {
                    report.fail(format!("stage {j}: paths disagree"), gap, DECOUPLING_TOLERANCE);
                }
            }
            Err(e) => report.fail(format!("stage {j}: {e}"), 1.0, DECOUPLING_TOLERANCE),
        }
    }
    if barriers.len() != state.stages.len() {
        report.fail(
            format!("potential has {} barriers for {} stages", barriers.len(), state.stages.len()),
            barriers.len() as f64,
            state.stages.len() as f64,
        );
    }
    report.finish()
}

/// Which audits to run; `All` runs witnesses, freeze, spectrum, decoupling in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditSelection {
    All,
    Witnesses,
    Freeze,
    Spectrum,
    Decoupling,
}

impl std::str::FromStr for AuditSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "all" => Self::All,
            "witnesses" => Self::Witnesses,
            "freeze" => Self::Freeze,
            "spectrum" => Self::Spectrum,
            "decoupling" => Self::Decoupling,
            other => return Err(format!("unknown audit {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditOptions {
    pub witness: WitnessAuditOptions,
    pub spectrum: SpectrumAuditOptions,
}

pub fn run_audits(
    state: &ConstructionState,
    which: AuditSelection,
    options: &AuditOptions,
    evaluator: &Evaluator,
) -> Vec<AuditReport> {
    use AuditSelection::*;
    let mut out = Vec::new();
    if matches!(which, All | Witnesses) {
        out.push(audit_witnesses(state, &options.witness, evaluator));
    }
    if matches!(which, All | Freeze) {
        out.push(audit_freeze(state, options.witness.tol, evaluator));
    }
    if matches!(which, All | Spectrum) {
        out.push(audit_essential_spectrum(state, &options.spectrum));
    }
    if matches!(which, All | Decoupling) {
        out.push(audit_decoupling(state));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{run_construction, ConstructionConfig};

    #[test]
    fn free_potential_spectrum_statistics() {
        let opts = SpectrumAuditOptions::default();
        for n in [50, 200] {
            let s = box_spectrum(&Potential::zero(), 0.0, n, &opts).unwrap();
            assert_eq!(s.outside, 0);
            // central spacing of 2cos(kπ/(n+1)) is about 2π/(n+1)
            let central = 2.0 * std::f64::consts::PI / (n + 1) as f64;
            assert!((s.max_inner_gap - central).abs() < 0.01 * central + 1e-3);
        }
    }

    #[test]
    fn degenerate_override_is_flagged() {
        let state = run_construction(1, &ConstructionConfig::default()).unwrap();
        let opts = WitnessAuditOptions { grid_step_override: Some(5.0), ..Default::default() };
        let report = audit_witnesses(&state, &opts, &Evaluator::default());
        assert!(report.pass);
        assert_eq!(report.samples, 2);
        assert!(report.details.iter().any(|r| r.input.contains("degenerate")));
    }

    #[test]
    fn single_stage_reports() {
        let state = run_construction(1, &ConstructionConfig::default()).unwrap();
        let ev = Evaluator::default();
        let w = audit_witnesses(&state, &WitnessAuditOptions::default(), &ev);
        assert!(w.pass, "{w}");
        assert!((w.threshold - 0.3).abs() < 1e-15);
        assert!(w.worst_case >= 0.4);
        let f = audit_freeze(&state, 1e-6, &ev);
        assert!(f.pass && f.samples == 0);
        let d = audit_decoupling(&state);
        assert!(d.pass, "{d}");
        assert_eq!(d.worst_case, 0.0);
    }

    #[test]
    fn corrupted_barrier_site_fails_decoupling() {
        let mut state = run_construction(2, &ConstructionConfig::default()).unwrap();
        state.stages[1].barrier_site += 1;
        let d = audit_decoupling(&state);
        assert!(!d.pass);
        assert!(!d.details.is_empty());
    }

    #[test]
    fn unsorted_boxes_rejected() {
        let state = run_construction(1, &ConstructionConfig::default()).unwrap();
        let opts = SpectrumAuditOptions { boxes: vec![100, 50], ..Default::default() };
        assert!(!audit_essential_spectrum(&state, &opts).pass);
    }

    #[test]
    fn selection_parsing() {
        assert_eq!("all".parse::<AuditSelection>().unwrap(), AuditSelection::All);
        assert_eq!("freeze".parse::<AuditSelection>().unwrap(), AuditSelection::Freeze);
        assert!("bogus".parse::<AuditSelection>().is_err());
    }
}
