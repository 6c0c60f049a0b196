//! Spectral measures of `δ₁` and their Fourier transforms.
//!
//! For a finite block the spectral measure of `δ₁` is atomic: one atom per
//! eigenvalue `E_j` with weight `w_j` equal to the square of the first
//! component of the normalized eigenvector. Its Fourier transform is the
//! survival amplitude `μ̂(t) = Σ_j w_j e^{−itE_j} = ⟨δ₁, e^{−itH}δ₁⟩`.
//!
//! # Certified half-line evaluation
//!
//! Expanding `e^{−itH}` in the Dyson series with the diagonal potential as
//! free part and `Δ_λ` as perturbation, the order-`m` contribution to
//! `⟨δ₁, e^{−itH}δ₁⟩` only involves matrix entries among sites `1..=m+1`:
//! each application of the tridiagonal `Δ_λ` moves one site, and the
//! diagonal propagators do not move at all. The Dirichlet box `{1..N}` and
//! the half-line share those entries for every `m ≤ N − 1`, so the two
//! amplitudes differ only through the orders `m ≥ N`, each bounded in
//! modulus by `((2+|λ|)|t|)^m / m!`. Hence
//!
//! ```text
//! |μ̂_box(t) − μ̂_half-line(t)| ≤ 2 Σ_{m≥N} ((2+|λ|)|t|)^m / m!  =  tail_bound(N, |λ|, t)
//! ```
//!
//! and [`Evaluator::fourier_certified`] picks the box large enough to make
//! this radius fall below the requested tolerance.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use thiserror::Error;

use crate::operator::{truncate, FiniteOperator, OperatorError, Potential};

/// QL sweeps allowed per eigenvalue before giving up.
pub const QL_ITERATION_BUDGET: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("tridiagonal QL failed to converge on a {size}x{size} matrix within {budget} sweeps per eigenvalue (diagonal head: {head:?})")]
    NoConvergence { size: usize, budget: usize, head: Vec<f64> },
    #[error("|lambda| = {lambda} exceeds the configured cap {cap}")]
    LambdaExceedsCap { lambda: f64, cap: f64 },
    #[error("certification needs a box of {required} sites, above the ceiling {ceiling}")]
    BoxTooLarge { required: usize, ceiling: usize },
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Atomic spectral measure of `δ₁` for a finite block.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralMeasure {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// First moment `Σ w_j E_j`, equal to the `(1,1)` entry of the source matrix.
    pub fn first_moment(&self) -> f64 {
        self.atoms().map(|(e, w)| w * e).sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.eigenvalues.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Result of a certified half-line evaluation of `μ̂_{V,λ}(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedAmplitude {
    pub value: Complex64,
    pub error_radius: f64,
    /// Size of the Dirichlet box the value was computed on.
    pub box_size: usize,
}

impl CertifiedAmplitude {
    /// Guaranteed lower bound on `|μ̂(t)|`.
    pub fn modulus_floor(&self) -> f64 {
        self.value.norm() - self.error_radius
    }
}

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix, by implicit QL with Wilkinson-type shifts.
///
/// Only row 0 of the eigenvector matrix is accumulated, so the cost is
/// `O(n²)` rather than `O(n³)`. Returns `(eigenvalues, first_components)` in
/// the order the iteration leaves them (unsorted).
fn tridiagonal_ql(
    diagonal: &[f64],
    off_diagonal: &[f64],
    track_vectors: bool,
) -> Result<(Vec<f64>, Vec<f64>), SpectralError> {
    let n = diagonal.len();
    let mut d = diagonal.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off_diagonal[..n - 1]);
    let mut z = vec![0.0; if track_vectors { n } else { 0 }];
    if track_vectors {
        z[0] = 1.0;
    }

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > QL_ITERATION_BUDGET {
                return Err(SpectralError::NoConvergence {
                    size: n,
                    budget: QL_ITERATION_BUDGET,
                    head: diagonal.iter().take(8).copied().collect(),
                });
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if track_vectors {
                    let zf = z[i + 1];
                    z[i + 1] = s * z[i] + c * zf;
                    z[i] = c * z[i] - s * zf;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

/// Full spectral decomposition of `δ₁` for a finite block.
pub fn eigendecompose(op: &FiniteOperator) -> Result<SpectralMeasure, SpectralError> {
    let (values, first) = tridiagonal_ql(op.diagonal(), &op.off_diagonal(), true)?;
    let mut atoms: Vec<(f64, f64)> = values.into_iter().zip(first).map(|(e, z)| (e, z * z)).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (eigenvalues, weights) = atoms.into_iter().unzip();
    Ok(SpectralMeasure { eigenvalues, weights })
}

/// Ascending eigenvalues only; cheaper than [`eigendecompose`] for large boxes.
pub fn eigenvalues(op: &FiniteOperator) -> Result<Vec<f64>, SpectralError> {
    let (mut values, _) = tridiagonal_ql(op.diagonal(), &op.off_diagonal(), false)?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// `μ̂(t) = Σ_j w_j e^{−itE_j}`.
pub fn fourier(sm: &SpectralMeasure, t: f64) -> Complex64 {
    sm.atoms().fold(Complex64::new(0.0, 0.0), |acc, (e, w)| {
        let (sin, cos) = (t * e).sin_cos();
        acc + Complex64::new(w * cos, -w * sin)
    })
}

/// `Σ_{m≥n} x^m / m!` for `x ≥ 0`, as a guaranteed upper bound.
///
/// Terms come from the ratio recurrence `term_{m+1} = term_m · x/(m+1)` with
/// a running rescale so neither `x^m` nor `m!` is ever formed. Once
/// `m ≥ 2x` every later ratio is at most 1/2, so the remainder from `m` on
/// is bounded by `2·term_m`; summation stops there as soon as that term is
/// negligible against the partial sum. Dropping term `n` can only lower the
/// result, so the bound is strictly decreasing in `n`.
pub fn series_tail(n: usize, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    const RESCALE: f64 = 1e150;
    let ln_rescale = RESCALE.ln();

    // term_m = rel * exp(scale_ln), likewise for acc
    let mut rel = 1.0_f64;
    let mut scale_ln = 0.0_f64;
    let mut acc = 0.0_f64;
    let mut m = 0usize;
    loop {
        if m >= n {
            if (m as f64) >= 2.0 * x && rel <= 1e-17 * acc {
                return (acc + 2.0 * rel) * scale_ln.exp();
            }
            acc += rel;
        }
        rel *= x / (m + 1) as f64;
        m += 1;
        if rel > RESCALE {
            rel /= RESCALE;
            acc /= RESCALE;
            scale_ln += ln_rescale;
        } else if rel < 1.0 / RESCALE {
            rel *= RESCALE;
            acc *= RESCALE;
            scale_ln -= ln_rescale;
        }
    }
}

/// `2 Σ_{m≥N} ((2+M)|t|)^m / m!`: the distance between two half-line
/// amplitudes whose potentials agree on `{1..N}`, for any `|λ| ≤ M`.
pub fn tail_bound(n: usize, m_cap: f64, t: f64) -> f64 {
    2.0 * series_tail(n, (2.0 + m_cap.abs()) * t.abs())
}

/// Smallest `N` with `tail_bound(N, M, T) ≤ tol`; valid for all `|t| ≤ T`.
pub fn min_prefix(tol: f64, m_cap: f64, t_max: f64) -> usize {
    assert!(tol > 0.0, "min_prefix needs a positive tolerance");
    let fits = |n: usize| tail_bound(n, m_cap, t_max) <= tol;
    if fits(0) {
        return 0;
    }
    let mut hi = 1usize;
    while !fits(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    // invariant: !fits(lo), fits(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Upper bound `|t|·dλ` on `|μ̂_λ(t) − μ̂_{λ'}(t)|` for `|λ − λ'| ≤ dλ`.
pub fn lambda_lipschitz(t: f64, d_lambda: f64) -> f64 {
    t.abs() * d_lambda.abs()
}

/// `Σ w_j |E_j|`, a Lipschitz constant of `t ↦ μ̂(t)`.
pub fn time_lipschitz(sm: &SpectralMeasure) -> f64 {
    sm.atoms().map(|(e, w)| w * e.abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Largest admissible `|λ|` for certified evaluation.
    pub m_cap: f64,
    /// Largest Dirichlet box the evaluator will diagonalize.
    pub max_box: usize,
    /// Entries kept before the cache is flushed; 0 disables caching.
    pub cache_capacity: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { m_cap: 8.0, max_box: 20_000, cache_capacity: 4096 }
    }
}

type CacheKey = (u64, u64, usize);

/// Certified evaluator with a memo of eigendecompositions keyed by
/// `(potential fingerprint, λ bits, box size)`.
#[derive(Debug)]
pub struct Evaluator {
    config: SpectralConfig,
    cache: Mutex<HashMap<CacheKey, Arc<SpectralMeasure>>>,
}

impl Default for Evaluator {
    fn default() -> Self {
        Self::new(SpectralConfig::default())
    }
}

impl Evaluator {
    pub fn new(config: SpectralConfig) -> Self {
        Self { config, cache: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    /// Spectral measure of `truncate(V, λ, size)`, memoized.
    pub fn measure(
        &self,
        potential: &Potential,
        lambda: f64,
        size: usize,
    ) -> Result<Arc<SpectralMeasure>, SpectralError> {
        if self.config.cache_capacity == 0 {
            return Ok(Arc::new(eigendecompose(&truncate(potential, lambda, size)?)?));
        }
        let key = (potential.fingerprint(), lambda.to_bits(), size);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let sm = Arc::new(eigendecompose(&truncate(potential, lambda, size)?)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= self.config.cache_capacity {
            cache.clear();
        }
        Ok(Arc::clone(cache.entry(key).or_insert(sm)))
    }

    /// Box size used to certify `μ̂_{V,λ}(t)` to `tol` for all `|t| ≤ t_abs`.
    pub fn certified_box(
        &self,
        potential: &Potential,
        lambda: f64,
        t_abs: f64,
        tol: f64,
    ) -> Result<usize, SpectralError> {
        if tol.is_nan() || tol <= 0.0 || tol.is_infinite() {
            return Err(SpectralError::BadTolerance(tol));
        }
        if lambda.abs() > self.config.m_cap {
            return Err(SpectralError::LambdaExceedsCap { lambda, cap: self.config.m_cap });
        }
        let from_tail = min_prefix(tol, lambda.abs(), t_abs);
        let from_barriers = potential.last_site().map_or(1, |s| s + 1);
        let required = from_tail.max(from_barriers).max(1);
        if required > self.config.max_box {
            return Err(SpectralError::BoxTooLarge { required, ceiling: self.config.max_box });
        }
        Ok(required)
    }

    /// Half-line `μ̂_{V,λ}(t)` with error radius `tail_bound(N_box, |λ|, t) ≤ tol`.
    pub fn fourier_certified(
        &self,
        potential: &Potential,
        lambda: f64,
        t: f64,
        tol: f64,
    ) -> Result<CertifiedAmplitude, SpectralError> {
        let size = self.certified_box(potential, lambda, t.abs(), tol)?;
        let sm = self.measure(potential, lambda, size)?;
        Ok(CertifiedAmplitude {
            value: fourier(&sm, t),
            error_radius: tail_bound(size, lambda.abs(), t),
            box_size: size,
        })
    }

    /// Certified amplitudes at several times sharing one box, sized for the
    /// largest `|t|`; each radius is the tail bound at its own `t`.
    pub fn fourier_certified_many(
        &self,
        potential: &Potential,
        lambda: f64,
        times: &[f64],
        tol: f64,
    ) -> Result<Vec<CertifiedAmplitude>, SpectralError> {
        let t_abs = times.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        let size = self.certified_box(potential, lambda, t_abs, tol)?;
        let sm = self.measure(potential, lambda, size)?;
        Ok(times
            .iter()
            .map(|&t| CertifiedAmplitude {
                value: fourier(&sm, t),
                error_radius: tail_bound(size, lambda.abs(), t),
                box_size: size,
            })
            .collect())
    }
}

/// Certified half-line amplitude with default configuration and no memo.
pub fn fourier_certified(
    potential: &Potential,
    lambda: f64,
    t: f64,
    tol: f64,
) -> Result<CertifiedAmplitude, SpectralError> {
    Evaluator::new(SpectralConfig { cache_capacity: 0, ..SpectralConfig::default() })
        .fourier_certified(potential, lambda, t, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Potential;
    use std::f64::consts::PI;

    fn free_box(n: usize, lambda: f64) -> FiniteOperator {
        truncate(&Potential::zero(), lambda, n).unwrap()
    }

    #[test]
    fn single_site() {
        let sm = eigendecompose(&free_box(1, 0.5)).unwrap();
        assert_eq!(sm.eigenvalues(), &[0.5]);
        assert_eq!(sm.weights(), &[1.0]);
        for t in [0.0, 1.0, 7.3, -2.0] {
            let z = fourier(&sm, t);
            assert!((z - Complex64::from_polar(1.0, -0.5 * t)).norm() < 1e-15);
            assert!((z.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_site_free_box() {
        // [[0,1],[1,0]] has eigenpairs ±1 with vectors (1, ±1)/√2
        let sm = eigendecompose(&free_box(2, 0.0)).unwrap();
        assert!((sm.eigenvalues()[0] + 1.0).abs() < 1e-15);
        assert!((sm.eigenvalues()[1] - 1.0).abs() < 1e-15);
        for w in sm.weights() {
            assert!((w - 0.5).abs() < 1e-15);
        }
        for t in [0.3, 1.0, 2.5, PI] {
            let z = fourier(&sm, t);
            assert!((z.re - t.cos()).abs() < 1e-14);
            assert!(z.im.abs() < 1e-14);
        }
        assert!((fourier(&sm, PI).re + 1.0).abs() < 1e-14);
        assert!((time_lipschitz(&sm) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_box_closed_form() {
        let n = 10;
        let sm = eigendecompose(&free_box(n, 0.0)).unwrap();
        let h = (n + 1) as f64;
        let mut expected: Vec<(f64, f64)> = (1..=n)
            .map(|k| {
                let theta = k as f64 * PI / h;
                (2.0 * theta.cos(), 2.0 / h * theta.sin().powi(2))
            })
            .collect();
        expected.sort_by(|a, b| a.0.total_cmp(&b.0));
        for ((e, w), (ee, ew)) in sm.atoms().zip(expected) {
            assert!((e - ee).abs() < 1e-9);
            assert!((w - ew).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_and_moment() {
        let v = Potential::from_finite(&[(3, 50.0), (7, 2.5), (12, 1000.0)]).unwrap();
        for lambda in [-3.0, -0.1, 0.0, 1.7] {
            let op = truncate(&v, lambda, 30).unwrap();
            let sm = eigendecompose(&op).unwrap();
            assert!((sm.total_weight() - 1.0).abs() <= 1e-10);
            assert!((fourier(&sm, 0.0) - Complex64::new(1.0, 0.0)).norm() <= 1e-10);
            assert!((sm.first_moment() - op.corner()).abs() <= 1e-8);
            let rho = op.gershgorin_radius();
            assert!(sm.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
            assert!(sm.eigenvalues().iter().all(|e| e.abs() <= rho + 1e-9));
            assert!(time_lipschitz(&sm) <= rho);
        }
    }

    #[test]
    fn time_lipschitz_of_zero_atom() {
        let sm = eigendecompose(&free_box(1, 0.0)).unwrap();
        assert_eq!(time_lipschitz(&sm), 0.0);
    }

    #[test]
    fn tail_bound_examples() {
        for (m, t) in [(0.0, 0.5), (1.0, 2.0), (3.0, 1.5)] {
            let x: f64 = (2.0 + m) * t;
            let full = tail_bound(0, m, t);
            assert!((full / (2.0 * x.exp()) - 1.0).abs() < 1e-12, "{full} vs {}", 2.0 * x.exp());
        }
        // independent partial-sum oracle at x = 15: 2(e^15 − Σ_{m<50} 15^m/m!)
        assert!(tail_bound(50, 1.0, 5.0) <= 1e-3);
        for n in 1..40 {
            assert_eq!(tail_bound(n, 2.0, 0.0), 0.0);
        }
        assert_eq!(tail_bound(0, 2.0, 0.0), 2.0);
    }

    #[test]
    fn tail_bound_matches_direct_sum_and_decreases() {
        // direct summation with exact recurrence far past the peak
        let direct = |n: usize, x: f64| {
            let mut term = 1.0_f64;
            let mut sum = 0.0;
            for m in 0..400 {
                if m >= n {
                    sum += term;
                }
                term *= x / (m + 1) as f64;
            }
            2.0 * sum
        };
        for x in [0.1, 1.0, 4.5, 15.0, 40.0] {
            let mut prev = f64::INFINITY;
            for n in 0..200 {
                let b = tail_bound(n, 0.0, x / 2.0);
                let d = direct(n, x);
                if d > 1e-280 {
                    assert!(b >= d * (1.0 - 1e-12), "n={n} x={x}: {b} < {d}");
                    assert!(b <= d * (1.0 + 1e-9) + 1e-300, "n={n} x={x}: {b} vs {d}");
                }
                assert!(b <= prev, "not monotone at n={n} x={x}");
                prev = b;
            }
        }
    }

    #[test]
    fn tail_bound_is_overflow_safe() {
        let b = tail_bound(0, 8.0, 100.0);
        assert!(b.is_infinite() && b > 0.0);
        let b = tail_bound(5000, 8.0, 100.0);
        assert!(b.is_finite() && b < 1e-100);
        assert!(tail_bound(20_000, 0.0, 0.01) >= 0.0);
    }

    #[test]
    fn min_prefix_examples() {
        let (m, t) = (1.0, 5.0);
        let full = 2.0 * ((2.0_f64 + m) * t).exp();
        assert!(min_prefix(full, m, t) <= 1);
        let n = min_prefix(1e-3, m, t);
        assert!(n <= 50);
        assert!(tail_bound(n, m, t) <= 1e-3);
        assert!(tail_bound(n - 1, m, t) > 1e-3);
        assert!(min_prefix(1e-4, m, t) >= n);
    }

    #[test]
    fn lambda_lipschitz_examples() {
        assert!((lambda_lipschitz(10.0, 0.01) - 0.1).abs() < 1e-15);
        assert_eq!(lambda_lipschitz(0.0, 3.0), 0.0);
        for (l1, l2, t) in [(0.3, -0.2, 4.0), (1.0, 1.1, 17.0), (-2.0, 2.0, 0.5)] {
            let a = Complex64::from_polar(1.0, -l1 * t);
            let b = Complex64::from_polar(1.0, -l2 * t);
            assert!((a - b).norm() <= lambda_lipschitz(t, (l1 - l2).abs()) + 1e-15);
        }
    }

    #[test]
    fn certified_free_line_at_zero() {
        let c = fourier_certified(&Potential::zero(), 0.0, 0.0, 1e-9).unwrap();
        assert!((c.value - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(c.error_radius <= 1e-12);
    }

    #[test]
    fn certified_high_barrier_near_one() {
        let v = Potential::from_finite(&[(2, 100.0)]).unwrap();
        let c = fourier_certified(&v, 0.0, 1.0, 1e-6).unwrap();
        assert!(c.error_radius <= 1e-6);
        assert!((c.value - Complex64::new(1.0, 0.0)).norm() < 2e-2);
        // dominant correction is the phase shift ~ t/K
        assert!((c.value - Complex64::new(1.0, 0.0)).norm() > 5e-3);
    }

    #[test]
    fn certified_refinement_agrees() {
        let v = Potential::from_finite(&[(4, 3.0), (11, 20.0)]).unwrap();
        let tol = 1e-5;
        let a = fourier_certified(&v, 0.7, 6.0, tol).unwrap();
        let b = fourier_certified(&v, 0.7, 6.0, tol / 10.0).unwrap();
        assert!(b.box_size >= a.box_size);
        assert!((a.value - b.value).norm() <= tol + tol / 10.0);
    }

    #[test]
    fn certified_errors() {
        let v = Potential::zero();
        assert!(matches!(fourier_certified(&v, 9.0, 1.0, 1e-6), Err(SpectralError::LambdaExceedsCap { .. })));
        let tight = Evaluator::new(SpectralConfig { max_box: 10, ..Default::default() });
        match tight.fourier_certified(&v, 0.0, 50.0, 1e-9) {
            Err(SpectralError::BoxTooLarge { required, ceiling: 10 }) => assert!(required > 10),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(fourier_certified(&v, 0.0, 1.0, 0.0), Err(SpectralError::BadTolerance(_))));
    }

    #[test]
    fn cache_is_transparent() {
        let v = Potential::from_finite(&[(3, 7.0), (9, 30.0)]).unwrap();
        let cached = Evaluator::default();
        let plain = Evaluator::new(SpectralConfig { cache_capacity: 0, ..Default::default() });
        for _ in 0..2 {
            for &t in &[0.5, 3.0, 9.0] {
                let a = cached.fourier_certified(&v, -1.25, t, 1e-8).unwrap();
                let b = plain.fourier_certified(&v, -1.25, t, 1e-8).unwrap();
                assert_eq!(a, b);
            }
        }
        let many = cached.fourier_certified_many(&v, -1.25, &[0.5, 9.0], 1e-8).unwrap();
        assert_eq!(many[1], plain.fourier_certified(&v, -1.25, 9.0, 1e-8).unwrap());
        assert!(many[0].error_radius <= many[1].error_radius);
    }

    #[test]
    fn eigenvalues_only_matches_full() {
        let v = Potential::from_finite(&[(2, 16.0), (20, 37.0)]).unwrap();
        let op = truncate(&v, 1.0, 60).unwrap();
        let full = eigendecompose(&op).unwrap();
        let vals = eigenvalues(&op).unwrap();
        for (a, b) in full.eigenvalues().iter().zip(&vals) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
