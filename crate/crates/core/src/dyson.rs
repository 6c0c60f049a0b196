//! Time-ordered (Duhamel/Dyson) expansion of `⟨δ₁, e^{−itH}δ₁⟩`.
//!
//! The free evolution is the diagonal `T(t) = e^{−itV}` and the
//! perturbation is `B = −iΔ_λ`. Orders follow the recursion
//! `S_{n+1}(t) = ∫₀ᵗ T(t−s) B S_n(s) ds` with `S_0 = T`. Only the column
//! `S_n(·)δ₁` is propagated. Writing `φ_n(s) = e^{isV} S_n(s)δ₁`, the
//! recursion becomes a plain cumulative integral
//! `φ_{n+1}(s) = ∫₀ˢ e^{iuV} B e^{−iuV} φ_n(u) du`, evaluated with the
//! composite trapezoid rule on a uniform grid over `[0, t]`. The run is
//! repeated with the spacing halved and the difference of the two totals is
//! reported as the quadrature tolerance.
//!
//! This engine is a cross-check for the spectral path and for the locality
//! structure behind prefix certification; it is not meant for long times.

use num_complex::Complex64;
use thiserror::Error;

use crate::operator::{truncate, OperatorError, Potential};
use crate::spectral::series_tail;

/// Largest analytic tail accepted by [`dyson_amplitude`].
pub const MAX_ANALYTIC_TAIL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DysonError {
    #[error("order_cap must be at least 1")]
    ZeroOrder,
    #[error("quad_points must be at least 2 (got {0})")]
    TooFewPoints(usize),
    #[error("analytic tail {tail:e} at order_cap {order_cap} exceeds {limit:e}; raise order_cap or shrink |t|")]
    TailTooLarge { tail: f64, order_cap: usize, limit: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DysonConfig {
    pub order_cap: usize,
    /// Grid points on `[0, t]` for the coarse pass; the fine pass uses
    /// `2·quad_points − 1`.
    pub quad_points: usize,
    pub t: f64,
    pub lambda: f64,
}

impl DysonConfig {
    pub fn new(order_cap: usize, quad_points: usize, t: f64, lambda: f64) -> Result<Self, DysonError> {
        let cfg = Self { order_cap, quad_points, t, lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), DysonError> {
        if self.order_cap < 1 {
            return Err(DysonError::ZeroOrder);
        }
        if self.quad_points < 2 {
            return Err(DysonError::TooFewPoints(self.quad_points));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DysonAmplitude {
    /// `Σ_{m=0}^{order_cap} ⟨δ₁, S_m(t)δ₁⟩` on the fine grid.
    pub value: Complex64,
    /// Per-order contributions on the fine grid.
    pub terms: Vec<Complex64>,
    /// Per-order `|fine − coarse|`.
    pub term_tolerances: Vec<f64>,
    /// `Σ_{m>order_cap} ((2+|λ|)|t|)^m / m!`.
    pub analytic_tail: f64,
    /// `|fine total − coarse total|`.
    pub quadrature_tolerance: f64,
}

/// Bound on the modulus of the omitted orders.
pub fn analytic_tail(order_cap: usize, lambda: f64, t: f64) -> f64 {
    series_tail(order_cap + 1, (2.0 + lambda.abs()) * t.abs())
}

/// Largest site whose potential can influence the order-`m` term.
pub fn dyson_term_support(m: usize) -> usize {
    m + 1
}

/// Order-by-order terms `⟨δ₁, S_m(t)δ₁⟩`, `m = 0..=order_cap`, on one grid
/// of `points` nodes over `[0, t]`.
pub fn dyson_terms(
    potential: &Potential,
    lambda: f64,
    t: f64,
    order_cap: usize,
    points: usize,
    box_size: usize,
) -> Result<Vec<Complex64>, DysonError> {
    if points < 2 {
        return Err(DysonError::TooFewPoints(points));
    }
    // potential only: λ belongs to the perturbation
    let op = truncate(potential, 0.0, box_size)?;
    let v = op.diagonal();
    let n = v.len();
    let h = t / (points - 1) as f64;
    let i = Complex64::new(0.0, 1.0);

    // phases[k][s] = e^{i u_k V_s}
    let phases: Vec<Vec<Complex64>> = (0..points)
        .map(|k| {
            let u = k as f64 * h;
            v.iter().map(|&vs| Complex64::from_polar(1.0, u * vs)).collect()
        })
        .collect();

    let mut phi: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; points];
    for row in phi.iter_mut() {
        row[0] = Complex64::new(1.0, 0.0);
    }

    let head = Complex64::from_polar(1.0, -t * v[0]);
    let mut terms = Vec::with_capacity(order_cap + 1);
    terms.push(head * phi[points - 1][0]);

    let mut integrand = vec![vec![Complex64::new(0.0, 0.0); n]; points];
    let mut moved = vec![Complex64::new(0.0, 0.0); n];
    for _order in 1..=order_cap {
        for k in 0..points {
            let ph = &phases[k];
            // moved = e^{−iuV} φ
            for s in 0..n {
                moved[s] = ph[s].conj() * phi[k][s];
            }
            let out = &mut integrand[k];
            for s in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                if s > 0 {
                    acc += moved[s - 1];
                }
                if s + 1 < n {
                    acc += moved[s + 1];
                }
                if s == 0 {
                    acc += lambda * moved[0];
                }
                out[s] = ph[s] * (-i * acc);
            }
        }
        phi[0].fill(Complex64::new(0.0, 0.0));
        for k in 1..points {
            for s in 0..n {
                let step = 0.5 * h * (integrand[k - 1][s] + integrand[k][s]);
                phi[k][s] = phi[k - 1][s] + step;
            }
        }
        terms.push(head * phi[points - 1][0]);
    }
    Ok(terms)
}

/// Dyson evaluation of `⟨δ₁, e^{−itH_{V,λ}}δ₁⟩` on the box `{1..box_size}`.
pub fn dyson_amplitude(
    potential: &Potential,
    cfg: &DysonConfig,
    box_size: usize,
) -> Result<DysonAmplitude, DysonError> {
    cfg.validate()?;
    let tail = analytic_tail(cfg.order_cap, cfg.lambda, cfg.t);
    if tail > MAX_ANALYTIC_TAIL {
        return Err(DysonError::TailTooLarge { tail, order_cap: cfg.order_cap, limit: MAX_ANALYTIC_TAIL });
    }
    let coarse = dyson_terms(potential, cfg.lambda, cfg.t, cfg.order_cap, cfg.quad_points, box_size)?;
    let fine = dyson_terms(potential, cfg.lambda, cfg.t, cfg.order_cap, 2 * cfg.quad_points - 1, box_size)?;
    let value: Complex64 = fine.iter().sum();
    let coarse_value: Complex64 = coarse.iter().sum();
    Ok(DysonAmplitude {
        value,
        term_tolerances: fine.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).collect(),
        terms: fine,
        analytic_tail: tail,
        quadrature_tolerance: (value - coarse_value).norm(),
    })
}
