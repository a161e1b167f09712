//! Basis schedules for every scheme and the reference basis counts the
//! benchmarks are compared against.

use std::fmt;
use std::str::FromStr;

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{self, PactSettings};
use crate::error::{Result, TomoError};
use crate::state::{
    pauli_product_basis, random_haar_basis, DensityMatrix, OrthonormalBasis, PauliAxis, QubitFactorization,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeKind {
    /// Adaptive: eigenbasis of the minimum-entropy estimate.
    #[serde(rename = "act")]
    Act,
    /// Adaptive: product basis nearest that eigenbasis.
    #[serde(rename = "pact")]
    PAct,
    /// Random Pauli product bases, never repeated.
    #[serde(rename = "rp")]
    RandomPauli,
    /// Fresh Haar-random bases.
    #[serde(rename = "rand-ortho")]
    RandomOrthonormal,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] =
        [SchemeKind::Act, SchemeKind::PAct, SchemeKind::RandomPauli, SchemeKind::RandomOrthonormal];

    pub fn tag(self) -> &'static str {
        match self {
            SchemeKind::Act => "act",
            SchemeKind::PAct => "pact",
            SchemeKind::RandomPauli => "rp",
            SchemeKind::RandomOrthonormal => "rand-ortho",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, SchemeKind::Act | SchemeKind::PAct)
    }

    /// Whether the scheme only measures product bases.
    pub fn requires_factorization(self) -> bool {
        matches!(self, SchemeKind::PAct | SchemeKind::RandomPauli)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SchemeKind {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "act" => Ok(SchemeKind::Act),
            "pact" => Ok(SchemeKind::PAct),
            "rp" | "random-pauli" => Ok(SchemeKind::RandomPauli),
            "rand-ortho" | "random-orthonormal" => Ok(SchemeKind::RandomOrthonormal),
            other => Err(TomoError::InvalidArgument(format!(
                "unknown scheme {other:?} (expected act, pact, rp or rand-ortho)"
            ))),
        }
    }
}

/// Per-run basis generator. Holds the random-Pauli history so that no axis
/// tuple is drawn twice.
#[derive(Clone, Debug)]
pub struct BasisSchedule {
    kind: SchemeKind,
    dim: usize,
    factorization: Option<QubitFactorization>,
    /// Unused Pauli axis tuples, base-3 encoded.
    pauli_pool: Vec<u64>,
    pact: PactSettings,
}

impl BasisSchedule {
    pub fn new(kind: SchemeKind, dim: usize, factorization: Option<QubitFactorization>) -> Result<Self> {
        if dim < 2 {
            return Err(TomoError::InvalidArgument(format!("dimension must be at least 2, got {dim}")));
        }
        let factorization = match (kind.requires_factorization(), factorization) {
            (true, None) => Some(QubitFactorization::for_dim(dim)?),
            (_, f) => f,
        };
        if let Some(f) = &factorization {
            if f.dim() != dim {
                return Err(TomoError::DimensionMismatch { expected: dim, found: f.dim() });
            }
            if kind.requires_factorization() && !f.is_qubits() {
                return Err(TomoError::InvalidArgument(format!("{kind} needs a qubit factorization, got {f}")));
            }
        }
        let pauli_pool = match (&factorization, kind) {
            (Some(f), SchemeKind::RandomPauli) => {
                let n = f.num_subsystems() as u32;
                let total = 3u64
                    .checked_pow(n)
                    .filter(|&t| t <= 1 << 24)
                    .ok_or_else(|| TomoError::InvalidArgument(format!("too many qubits ({n}) for Pauli enumeration")))?;
                (0..total).collect()
            }
            _ => Vec::new(),
        };
        Ok(Self { kind, dim, factorization, pauli_pool, pact: PactSettings::default() })
    }

    pub fn with_pact_settings(mut self, settings: PactSettings) -> Self {
        self.pact = settings;
        self
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn factorization(&self) -> Option<&QubitFactorization> {
        self.factorization.as_ref()
    }

    /// `B_1`: a Haar-random basis, or a random Pauli product basis for the
    /// product-only schemes.
    pub fn first_basis<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<OrthonormalBasis> {
        match self.kind {
            SchemeKind::Act | SchemeKind::RandomOrthonormal => random_haar_basis(self.dim, rng),
            SchemeKind::RandomPauli => self.draw_pauli(rng),
            SchemeKind::PAct => {
                let f = self.factorization.as_ref().expect("checked in new");
                let axes: Vec<PauliAxis> =
                    (0..f.num_subsystems()).map(|_| PauliAxis::ALL[rng.random_range(0..3)]).collect();
                pauli_product_basis(f, &axes)
            }
        }
    }

    /// Next basis after the bases in `measured`. The adaptive schemes need
    /// the current estimate; the others ignore it.
    pub fn next_basis<R: Rng + ?Sized>(
        &mut self,
        estimate: Option<&DensityMatrix>,
        measured: &[OrthonormalBasis],
        rng: &mut R,
    ) -> Result<OrthonormalBasis> {
        let need_estimate = || TomoError::InvalidArgument(format!("{} needs a current estimate", self.kind));
        match self.kind {
            SchemeKind::RandomOrthonormal => random_haar_basis(self.dim, rng),
            SchemeKind::RandomPauli => self.draw_pauli(rng),
            SchemeKind::Act => {
                let rho = estimate.ok_or_else(need_estimate)?;
                Ok(adaptive::act_next_basis(rho, measured, rng)?.with_label("act"))
            }
            SchemeKind::PAct => {
                let rho = estimate.ok_or_else(need_estimate)?;
                let f = self.factorization.as_ref().expect("checked in new");
                let choice = adaptive::pact_next_basis(rho, f, measured, &self.pact, rng)?;
                debug!("pact: alignment objective {:.6}", choice.objective);
                Ok(choice.basis.with_label("pact"))
            }
        }
    }

    fn draw_pauli<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<OrthonormalBasis> {
        let f = self.factorization.as_ref().expect("checked in new");
        let n = f.num_subsystems();
        if self.pauli_pool.is_empty() {
            return Err(TomoError::SchemeExhausted { available: 3usize.pow(n as u32) });
        }
        let code = self.pauli_pool.swap_remove(rng.random_range(0..self.pauli_pool.len()));
        pauli_product_basis(f, &decode_axes(code, n))
    }
}

/// Axis tuple of a base-3 code, qubit 0 as the most significant digit.
fn decode_axes(mut code: u64, n: usize) -> Vec<PauliAxis> {
    let mut axes = vec![PauliAxis::X; n];
    for slot in axes.iter_mut().rev() {
        *slot = PauliAxis::ALL[(code % 3) as usize];
        code /= 3;
    }
    axes
}

fn check_rank(d: usize, r: usize) -> Result<()> {
    if d < 2 || r < 1 || r > d {
        return Err(TomoError::InvalidArgument(format!("need d >= 2 and 1 <= r <= d, got d={d}, r={r}")));
    }
    Ok(())
}

/// Fewest bases that can pin down a rank-`r` state when its eigenbasis is
/// among them: `⌈(r² − r)/(d − 1)⌉ + 1`.
pub fn k0_lower_bound(d: usize, r: usize) -> Result<usize> {
    check_rank(d, r)?;
    Ok((r * r - r).div_ceil(d - 1) + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceCounts {
    /// Size of the explicit rank-`r` informationally complete construction,
    /// `4r + 1`.
    pub bg: usize,
    /// Typical count for random bases, `⌈4r(d − r)/(d − 1)⌉`.
    pub kech: usize,
}

pub fn reference_counts(d: usize, r: usize) -> Result<ReferenceCounts> {
    check_rank(d, r)?;
    Ok(ReferenceCounts { bg: 4 * r + 1, kech: (4 * r * (d - r)).div_ceil(d - 1) })
}
