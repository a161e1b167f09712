//! Quantum states, measurement bases, random ensembles and the scalar
//! functionals (fidelity, entropy, trace distance) used by the rest of the
//! crate.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::linalg::{self, CMat, EIGEN_CUTOFF};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;
const UNITARY_TOL: f64 = 1e-10;
const ROOT_FLOOR: f64 = 1e-14;

/// Unit-trace positive semidefinite Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    /// Validates `mat` against the density-matrix invariants without
    /// modifying it.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(TomoError::InvalidState(format!(
                "matrix must be square and non-empty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm_err = (&mat - mat.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > HERMITIAN_TOL {
            return Err(TomoError::InvalidState(format!("not Hermitian (deviation {herm_err:.3e})")));
        }
        let tr = linalg::trace_re(&mat);
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(TomoError::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = *linalg::eigvalsh(&mat).last().unwrap();
        if min_eig < PSD_TOL {
            return Err(TomoError::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self { mat })
    }

    /// Cleans up a numerically positive matrix: Hermitian part, negative
    /// eigenvalues clipped, trace renormalized.
    pub fn from_psd(mat: &CMat) -> Result<Self> {
        let cleaned = linalg::project_psd(mat);
        let tr = linalg::trace_re(&cleaned);
        if !(tr > 0.0) {
            return Err(TomoError::InvalidState("matrix has no positive part".into()));
        }
        Self::new(linalg::hermitize(&cleaned.unscale(tr)))
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(TomoError::InvalidArgument("zero state vector".into()));
        }
        let v = DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        Self::new(linalg::hermitize(&(&v * v.adjoint())))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { mat: CMat::identity(d, d).unscale(d as f64) }
    }

    /// Diagonal state with the given probabilities in the computational basis.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let d = probs.len();
        Self::new(CMat::from_fn(d, d, |i, j| if i == j { C64::new(probs[i], 0.0) } else { C64::new(0.0, 0.0) }))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    /// Eigenvalues (descending) and eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        linalg::eigh(&self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.mat)
    }

    /// Number of eigenvalues above `cutoff`.
    pub fn rank(&self, cutoff: f64) -> usize {
        self.eigenvalues().iter().filter(|&&v| v > cutoff).count()
    }

    /// `tr(ρ A)` for Hermitian `A`.
    pub fn expectation(&self, observable: &CMat) -> f64 {
        linalg::inner_re(&self.mat, observable)
    }

    /// Conjugation `U ρ U†`.
    pub fn rotated(&self, u: &CMat) -> Result<Self> {
        Self::from_psd(&(u * &self.mat * u.adjoint()))
    }
}

/// Hilbert-Schmidt state from the induced measure of rank `rank`: a `d×r`
/// complex Ginibre matrix `G` gives `GG†/tr(GG†)`.
pub fn random_rank_r_state<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    if d == 0 || rank == 0 || rank > d {
        return Err(TomoError::InvalidArgument(format!("rank {rank} outside [1, {d}]")));
    }
    let g = linalg::complex_gaussian(d, rank, rng);
    let rho = &g * g.adjoint();
    let tr = linalg::trace_re(&rho);
    DensityMatrix::new(linalg::hermitize(&rho.unscale(tr)))
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of the `R` diagonal absorbed into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = linalg::complex_gaussian(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// One orthonormal measurement basis. Column `j` of `kets` is the `j`-th
/// outcome ket; the outcome projectors are `|k_j⟩⟨k_j|`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    kets: CMat,
    label: String,
}

impl OrthonormalBasis {
    pub fn new(kets: CMat, label: impl Into<String>) -> Result<Self> {
        if kets.nrows() != kets.ncols() || kets.nrows() == 0 {
            return Err(TomoError::InvalidArgument("basis matrix must be square".into()));
        }
        let err = linalg::unitarity_error(&kets);
        if err > UNITARY_TOL {
            return Err(TomoError::InvalidState(format!("basis is not orthonormal (error {err:.3e})")));
        }
        Ok(Self { kets, label: label.into() })
    }

    pub fn computational(d: usize) -> Self {
        Self { kets: CMat::identity(d, d), label: "computational".into() }
    }

    pub fn dim(&self) -> usize {
        self.kets.nrows()
    }

    pub fn kets(&self) -> &CMat {
        &self.kets
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn ket(&self, j: usize) -> Vec<C64> {
        self.kets.column(j).iter().copied().collect()
    }

    pub fn projector(&self, j: usize) -> CMat {
        let col = self.kets.column(j);
        col * col.adjoint()
    }
}

/// Haar-random orthonormal basis.
pub fn random_haar_basis<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<OrthonormalBasis> {
    if d < 2 {
        return Err(TomoError::InvalidArgument(format!("basis dimension must be at least 2, got {d}")));
    }
    OrthonormalBasis::new(random_unitary(d, rng), "haar")
}

/// Ordered list of subsystem dimensions whose product is the total dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitFactorization {
    local_dims: Vec<usize>,
}

impl QubitFactorization {
    pub fn new(local_dims: Vec<usize>) -> Result<Self> {
        if local_dims.is_empty() || local_dims.iter().any(|&n| n < 2) {
            return Err(TomoError::InvalidArgument(format!(
                "factorization entries must all be at least 2, got {local_dims:?}"
            )));
        }
        Ok(Self { local_dims })
    }

    /// `n` qubits.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    /// Qubit factorization of a power-of-two dimension.
    pub fn for_dim(d: usize) -> Result<Self> {
        if d < 2 || !d.is_power_of_two() {
            return Err(TomoError::InvalidArgument(format!("dimension {d} is not a power of two")));
        }
        Self::qubits(d.trailing_zeros() as usize)
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn dim(&self) -> usize {
        self.local_dims.iter().product()
    }

    pub fn num_subsystems(&self) -> usize {
        self.local_dims.len()
    }

    pub fn is_qubits(&self) -> bool {
        self.local_dims.iter().all(|&n| n == 2)
    }
}

impl FromStr for QubitFactorization {
    type Err = TomoError;

    /// Parses `"2x2x2x2"`.
    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(['x', 'X', '*'])
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| TomoError::InvalidArgument(format!("bad factorization {s:?}: {e}")))?;
        Self::new(dims)
    }
}

impl fmt::Display for QubitFactorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.local_dims.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    /// Eigenbasis of the single-qubit Pauli operator, +1 eigenvector first.
    pub fn eigenbasis(self) -> CMat {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| C64::new(re, im);
        match self {
            PauliAxis::Z => CMat::identity(2, 2),
            PauliAxis::X => CMat::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]),
            PauliAxis::Y => CMat::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(0.0, h), c(0.0, -h)]),
        }
    }

    fn symbol(self) -> char {
        match self {
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Pauli eigenbases, qubit 0 leftmost.
pub fn pauli_product_basis(factorization: &QubitFactorization, axes: &[PauliAxis]) -> Result<OrthonormalBasis> {
    if !factorization.is_qubits() {
        return Err(TomoError::InvalidArgument(format!(
            "Pauli bases need a qubit factorization, got {factorization}"
        )));
    }
    if axes.len() != factorization.num_subsystems() {
        return Err(TomoError::InvalidArgument(format!(
            "{} axes given for {} qubits",
            axes.len(),
            factorization.num_subsystems()
        )));
    }
    let mut kets = CMat::identity(1, 1);
    for axis in axes {
        kets = linalg::kron(&kets, &axis.eigenbasis());
    }
    let label: String = axes.iter().map(|a| a.symbol()).collect();
    OrthonormalBasis::new(kets, format!("pauli-{label}"))
}

/// Uhlmann fidelity `(tr√(√a b √a))²`, clamped to `[0, 1]`.
///
/// Eigenvalues below `1e-14` of the largest are zeroed before taking square
/// roots; otherwise eigensolver round-off on rank-deficient arguments is
/// amplified to ~1e-8 by the root.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let (values, vectors) = a.eigen();
    let floor = ROOT_FLOOR * values[0].max(0.0);
    let roots: Vec<f64> = values.iter().map(|&v| if v > floor { v.sqrt() } else { 0.0 }).collect();
    let sa = linalg::reconstruct(&vectors, &roots);
    let inner = &sa * b.matrix() * &sa;
    let spectrum = linalg::eigvalsh(&inner);
    let floor = ROOT_FLOOR * spectrum[0].max(0.0);
    let root_trace: f64 = spectrum.iter().filter(|&&v| v > floor).map(|v| v.sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// `½‖a − b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(0.5 * linalg::trace_norm_herm(&(a.matrix() - b.matrix())))
}

/// `−tr(ρ ln ρ)`, summed over eigenvalues above [`EIGEN_CUTOFF`].
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values.iter().filter(|&&v| v > EIGEN_CUTOFF).map(|&v| -v * v.ln()).sum::<f64>().max(0.0)
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(TomoError::DimensionMismatch { expected, found });
    }
    Ok(())
}
