//! Born-rule probabilities and finite-shot simulation of basis measurements.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::state::{DensityMatrix, OrthonormalBasis};

/// Outcome probabilities of one basis measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TomoError::InvalidArgument("empty probability vector".into()));
        }
        if let Some(bad) = values.iter().find(|&&p| !(-1e-12..=1.0 + 1e-12).contains(&p)) {
            return Err(TomoError::InvalidArgument(format!("probability {bad} outside [0, 1]")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(TomoError::InvalidArgument(format!("probabilities sum to {total}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// `p_j = ⟨b_j|ρ|b_j⟩`, with round-off negatives above `-1e-12` clamped to 0.
pub fn born_probabilities(rho: &DensityMatrix, basis: &OrthonormalBasis) -> Result<ProbabilityVector> {
    if rho.dim() != basis.dim() {
        return Err(TomoError::DimensionMismatch { expected: rho.dim(), found: basis.dim() });
    }
    let kets = basis.kets();
    let m = rho.matrix();
    let probs = (0..basis.dim())
        .map(|j| {
            let col = kets.column(j);
            let p = col.dotc(&(m * col)).re;
            if p < 0.0 && p >= -1e-12 {
                0.0
            } else {
                p
            }
        })
        .collect();
    ProbabilityVector::new(probs)
}

/// Number of shots per basis, or exact probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl Shots {
    pub fn is_exact(self) -> bool {
        matches!(self, Shots::Exact)
    }
}

impl FromStr for Shots {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") || s.eq_ignore_ascii_case("inf") {
            return Ok(Shots::Exact);
        }
        // accept scientific notation such as 1e4
        let n: f64 = s.parse().map_err(|_| TomoError::InvalidArgument(format!("bad shot count {s:?}")))?;
        if n < 1.0 || n.fract() != 0.0 || n > u64::MAX as f64 {
            return Err(TomoError::InvalidArgument(format!("shot count must be a positive integer, got {s}")));
        }
        Ok(Shots::Finite(n as u64))
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => write!(f, "exact"),
            Shots::Finite(n) => write!(f, "{n}"),
        }
    }
}

/// Statistical model for finite-shot data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Fixed number of shots per basis.
    #[default]
    Multinomial,
    /// Independent Poisson counts per outcome with mean `N·p_j`; the total
    /// count fluctuates.
    Poisson,
}

/// Data collected from one basis.
#[derive(Clone, Debug)]
pub struct MeasurementRecord {
    basis: OrthonormalBasis,
    counts: Option<Vec<u64>>,
    shots: Shots,
    frequencies: Vec<f64>,
}

impl MeasurementRecord {
    /// Record holding exact probabilities.
    pub fn exact(basis: OrthonormalBasis, probs: ProbabilityVector) -> Result<Self> {
        if probs.len() != basis.dim() {
            return Err(TomoError::DimensionMismatch { expected: basis.dim(), found: probs.len() });
        }
        Ok(Self { basis, counts: None, shots: Shots::Exact, frequencies: probs.0 })
    }

    pub fn from_counts(basis: OrthonormalBasis, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != basis.dim() {
            return Err(TomoError::DimensionMismatch { expected: basis.dim(), found: counts.len() });
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(TomoError::InvalidArgument("record has no counts".into()));
        }
        let frequencies = counts.iter().map(|&n| n as f64 / total as f64).collect();
        Ok(Self { basis, counts: Some(counts), shots: Shots::Finite(total), frequencies })
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn shots(&self) -> Shots {
        self.shots
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn is_exact(&self) -> bool {
        self.shots.is_exact()
    }

    /// Likelihood weights: raw counts, or the probabilities themselves for
    /// exact records (one unit of weight per basis).
    pub fn weights(&self) -> Vec<f64> {
        match &self.counts {
            Some(c) => c.iter().map(|&n| n as f64).collect(),
            None => self.frequencies.clone(),
        }
    }
}

/// Measures `basis` on `rho`.
pub fn sample_record<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    basis: &OrthonormalBasis,
    shots: Shots,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let probs = born_probabilities(rho, basis)?;
    match shots {
        Shots::Exact => MeasurementRecord::exact(basis.clone(), probs),
        Shots::Finite(n) => {
            let counts = match noise {
                NoiseModel::Multinomial => sample_multinomial(probs.values(), n, rng),
                NoiseModel::Poisson => loop {
                    let c = sample_poisson_counts(probs.values(), n, rng);
                    if c.iter().any(|&x| x > 0) {
                        break c;
                    }
                },
            };
            MeasurementRecord::from_counts(basis.clone(), counts)
        }
    }
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], trials: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut remaining = trials;
    let mut mass = 1.0;
    for (j, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j + 1 == probs.len() {
            counts[j] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p.max(0.0) / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(0);
        counts[j] = draw;
        remaining -= draw;
        mass -= p.max(0.0);
    }
    counts
}

fn sample_poisson_counts<R: Rng + ?Sized>(probs: &[f64], mean_total: u64, rng: &mut R) -> Vec<u64> {
    probs
        .iter()
        .map(|&p| {
            let lambda = p.max(0.0) * mean_total as f64;
            if lambda <= 0.0 {
                0
            } else {
                Poisson::new(lambda).map(|d| d.sample(rng) as u64).unwrap_or(0)
            }
        })
        .collect()
}
