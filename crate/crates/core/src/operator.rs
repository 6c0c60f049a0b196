//! Sparse half-line potentials and their finite tridiagonal restrictions.
//!
//! The half-line operator is `H = Δ + λ⟨δ₁,·⟩δ₁ + V` acting on sequences
//! indexed by sites `1, 2, 3, …` with Dirichlet boundary at the origin.
//! Off-diagonal entries are always 1. A potential is stored as a sorted list
//! of `(site, height)` barriers and is zero everywhere else.
//!
//! A height may be [`Height::Infinite`], which forces the wavefunction to
//! vanish at that site and splits the operator into two independent blocks.
//! Only the block containing site 1 matters for the spectral measure of
//! `δ₁`, so [`decouple_at`] returns exactly that block.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("barrier sites must be strictly increasing (site {prev} followed by {next})")]
    NonIncreasingSites { prev: usize, next: usize },
    #[error("barrier site {0} is invalid; site 1 carries the rank-one coupling and barriers start at 2")]
    SiteTooSmall(usize),
    #[error("barrier height {height} at site {site} must be strictly positive")]
    NonPositiveHeight { site: usize, height: f64 },
    #[error("only the last barrier may be infinite (found one at site {0})")]
    NonFinalInfinite(usize),
    #[error("infinite barrier at site {site} lies inside the box of size {size}; decouple instead")]
    InfiniteInsideBox { site: usize, size: usize },
    #[error("cannot decouple at site {0}: the block containing site 1 would be empty")]
    DecoupleAtOrigin(usize),
    #[error("box size must be at least 1")]
    EmptyBox,
    #[error("malformed height literal {0:?}")]
    BadHeight(String),
}

/// Value of the potential at a barrier site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Height {
    Finite(f64),
    Infinite,
}

impl Height {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Height::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Height::Finite(h) => Some(h),
            Height::Infinite => None,
        }
    }
}

impl fmt::Display for Height {
    /// Finite heights use the shortest representation that parses back to the
    /// same `f64`; the infinite marker is the literal `inf`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Height::Finite(h) => write!(f, "{h:?}"),
            Height::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Height {
    type Err = OperatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed == "inf" {
            return Ok(Height::Infinite);
        }
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Height::Finite(v)),
            _ => Err(OperatorError::BadHeight(s.to_string())),
        }
    }
}

impl Serialize for Height {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Height {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub site: usize,
    pub height: Height,
}

/// Sparse half-line potential. Zero at every site not listed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct Potential {
    barriers: Vec<Barrier>,
}

#[derive(Serialize, Deserialize)]
struct RawPotential {
    barriers: Vec<Barrier>,
}

impl TryFrom<RawPotential> for Potential {
    type Error = OperatorError;
    fn try_from(raw: RawPotential) -> Result<Self, Self::Error> {
        Potential::new(raw.barriers.into_iter().map(|b| (b.site, b.height)))
    }
}

impl From<Potential> for RawPotential {
    fn from(p: Potential) -> Self {
        RawPotential { barriers: p.barriers }
    }
}

impl Potential {
    /// The free half-line.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Validates and builds a potential from `(site, height)` pairs.
    pub fn new<I>(barriers: I) -> Result<Self, OperatorError>
    where
        I: IntoIterator<Item = (usize, Height)>,
    {
        let barriers: Vec<Barrier> = barriers.into_iter().map(|(site, height)| Barrier { site, height }).collect();
        for (idx, b) in barriers.iter().enumerate() {
            if b.site < 2 {
                return Err(OperatorError::SiteTooSmall(b.site));
            }
            if idx > 0 && barriers[idx - 1].site >= b.site {
                return Err(OperatorError::NonIncreasingSites { prev: barriers[idx - 1].site, next: b.site });
            }
            match b.height {
                Height::Finite(h) if h.is_nan() || h <= 0.0 || h.is_infinite() => {
                    return Err(OperatorError::NonPositiveHeight { site: b.site, height: h });
                }
                Height::Infinite if idx + 1 != barriers.len() => {
                    return Err(OperatorError::NonFinalInfinite(b.site));
                }
                _ => {}
            }
        }
        Ok(Self { barriers })
    }

    /// Convenience constructor for all-finite heights.
    pub fn from_finite(barriers: &[(usize, f64)]) -> Result<Self, OperatorError> {
        Self::new(barriers.iter().map(|&(s, h)| (s, Height::Finite(h))))
    }

    pub fn barriers(&self) -> &[Barrier] {
        &self.barriers
    }

    pub fn is_empty(&self) -> bool {
        self.barriers.is_empty()
    }

    /// Potential value at `site` (1-based); `None` when the site is infinite.
    pub fn value(&self, site: usize) -> Option<f64> {
        match self.barriers.binary_search_by_key(&site, |b| b.site) {
            Ok(i) => self.barriers[i].height.finite(),
            Err(_) => Some(0.0),
        }
    }

    pub fn infinite_site(&self) -> Option<usize> {
        self.barriers.last().filter(|b| b.height.is_infinite()).map(|b| b.site)
    }

    pub fn last_site(&self) -> Option<usize> {
        self.barriers.last().map(|b| b.site)
    }

    /// Largest finite height, or 0 for the free potential.
    pub fn max_finite(&self) -> f64 {
        self.barriers.iter().filter_map(|b| b.height.finite()).fold(0.0, f64::max)
    }

    /// Number of barriers at sites `≤ size`.
    pub fn barriers_within(&self, size: usize) -> usize {
        self.barriers.iter().take_while(|b| b.site <= size).count()
    }

    /// The potential restricted to sites `≤ last`, zero beyond.
    pub fn prefix(&self, last: usize) -> Potential {
        Potential { barriers: self.barriers.iter().copied().take_while(|b| b.site <= last).collect() }
    }

    /// Appends a barrier past the current last site.
    pub fn with_barrier(&self, site: usize, height: Height) -> Result<Potential, OperatorError> {
        let mut pairs: Vec<(usize, Height)> = self.barriers.iter().map(|b| (b.site, b.height)).collect();
        pairs.push((site, height));
        Potential::new(pairs)
    }

    /// Stable 64-bit fingerprint over sites and height bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for b in &self.barriers {
            b.site.hash(&mut hasher);
            match b.height {
                Height::Finite(h) => h.to_bits().hash(&mut hasher),
                Height::Infinite => u64::MAX.hash(&mut hasher),
            }
        }
        hasher.finish()
    }
}

/// Symmetric tridiagonal matrix with unit off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteOperator {
    diagonal: Vec<f64>,
}

impl FiniteOperator {
    pub fn from_diagonal(diagonal: Vec<f64>) -> Result<Self, OperatorError> {
        if diagonal.is_empty() {
            return Err(OperatorError::EmptyBox);
        }
        Ok(Self { diagonal })
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Off-diagonal entries, all equal to 1.
    pub fn off_diagonal(&self) -> Vec<f64> {
        vec![1.0; self.diagonal.len().saturating_sub(1)]
    }

    /// `(1,1)` entry, i.e. `V(1) + λ`.
    pub fn corner(&self) -> f64 {
        self.diagonal[0]
    }

    /// Half-width `ρ` of the Gershgorin interval `[−ρ, ρ]` containing the spectrum.
    pub fn gershgorin_radius(&self) -> f64 {
        let n = self.diagonal.len();
        self.diagonal
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let off = match n {
                    1 => 0.0,
                    _ if i == 0 || i == n - 1 => 1.0,
                    _ => 2.0,
                };
                d.abs() + off
            })
            .fold(0.0, f64::max)
    }

    /// Returns a copy with `shift` added to the `(1,1)` entry.
    pub fn shifted(&self, shift: f64) -> FiniteOperator {
        let mut diagonal = self.diagonal.clone();
        diagonal[0] += shift;
        FiniteOperator { diagonal }
    }
}

/// Dirichlet restriction of `H_{V,λ}` to sites `{1, …, size}`.
pub fn truncate(potential: &Potential, lambda: f64, size: usize) -> Result<FiniteOperator, OperatorError> {
    if size == 0 {
        return Err(OperatorError::EmptyBox);
    }
    if let Some(site) = potential.infinite_site() {
        if site <= size {
            return Err(OperatorError::InfiniteInsideBox { site, size });
        }
    }
    let mut diagonal = vec![0.0; size];
    for b in potential.barriers().iter().take_while(|b| b.site <= size) {
        // finite: the infinite case was rejected above
        diagonal[b.site - 1] = b.height.finite().unwrap_or(0.0);
    }
    diagonal[0] += lambda;
    Ok(FiniteOperator { diagonal })
}

/// The block `{1, …, n0 − 1}` that contains `δ₁` when the potential is
/// infinite at `n0`. Whatever the potential holds at or beyond `n0` is
/// ignored, since an infinite barrier there cuts it off.
pub fn decouple_at(potential: &Potential, lambda: f64, n0: usize) -> Result<FiniteOperator, OperatorError> {
    if n0 < 2 {
        return Err(OperatorError::DecoupleAtOrigin(n0));
    }
    truncate(&potential.prefix(n0 - 1), lambda, n0 - 1)
}
