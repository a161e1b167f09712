//! Dense complex Hermitian kernels shared by every solver in the crate.
//!
//! Hermitian matrices are also handled as real vectors of length `d²` through
//! an isometric coordinate map ([`herm_to_vec`] / [`vec_to_herm`]): the
//! Hilbert-Schmidt inner product `tr(AB)` becomes the Euclidean dot product,
//! so affine constraints `tr(ρ Π) = p` turn into ordinary linear equations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<C64>;

/// Eigenvalues below this are treated as zero for rank and entropy purposes.
pub const EIGEN_CUTOFF: f64 = 1e-12;

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
/// Column `j` of the returned matrix is the eigenvector of eigenvalue `j`.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the eigensolver's ordering among exact ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues only, descending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(hermitize(m)).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// `V diag(f(λ)) V†` for a Hermitian `m`.
pub fn spectral_map(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = eigh(m);
    reconstruct(&vectors, &values.iter().map(|&v| f(v)).collect::<Vec<_>>())
}

/// `V diag(w) V†`, skipping zero weights.
pub fn reconstruct(vectors: &CMat, weights: &[f64]) -> CMat {
    let n = vectors.nrows();
    let mut out = CMat::zeros(n, n);
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let col = vectors.column(j);
        for c in 0..n {
            let vc = col[c].conj() * w;
            for r in 0..n {
                out[(r, c)] += col[r] * vc;
            }
        }
    }
    out
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn project_psd(m: &CMat) -> CMat {
    spectral_map(m, |v| v.max(0.0))
}

/// Principal square root of a positive semidefinite matrix.
pub fn sqrt_psd(m: &CMat) -> CMat {
    spectral_map(m, |v| v.max(0.0).sqrt())
}

/// Euclidean projection onto the probability simplex `{x ≥ 0, Σx = total}`.
pub fn project_simplex(values: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - total) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Nearest unit-trace positive semidefinite matrix in Frobenius norm.
pub fn project_state_space(m: &CMat) -> CMat {
    let (values, vectors) = eigh(m);
    let clipped = project_simplex(&values, 1.0);
    reconstruct(&vectors, &clipped)
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Real part of `tr(a b)`; exact for Hermitian arguments.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Sum of singular values of a Hermitian matrix.
pub fn trace_norm_herm(m: &CMat) -> f64 {
    eigvalsh(m).iter().map(|v| v.abs()).sum()
}

/// Isometric real coordinates of a Hermitian matrix: diagonal entries first,
/// then `√2·Re` and `√2·Im` of each strict upper-triangular entry.
pub fn herm_to_vec(m: &CMat) -> DVector<f64> {
    let d = m.nrows();
    let mut v = DVector::zeros(d * d);
    for i in 0..d {
        v[i] = m[(i, i)].re;
    }
    let mut idx = d;
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            v[idx] = s * z.re;
            v[idx + 1] = s * z.im;
            idx += 2;
        }
    }
    v
}

pub fn vec_to_herm(v: &DVector<f64>, d: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let mut idx = d;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = C64::new(v[idx] * h, v[idx + 1] * h);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            idx += 2;
        }
    }
    m
}

/// Coordinates of the rank-one projector `|ψ⟩⟨ψ|`.
pub fn projector_vec(psi: &[C64]) -> DVector<f64> {
    let d = psi.len();
    let mut v = DVector::zeros(d * d);
    for i in 0..d {
        v[i] = psi[i].norm_sqr();
    }
    let mut idx = d;
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = psi[i] * psi[j].conj();
            v[idx] = s * z.re;
            v[idx + 1] = s * z.im;
            idx += 2;
        }
    }
    v
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Hermitian matrix from the Gaussian unitary ensemble, scaled to unit
/// Frobenius norm.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = complex_gaussian(d, d, rng);
    let h = hermitize(&g);
    let norm = h.norm();
    h.unscale(norm)
}

/// `exp(i·t·H)` for Hermitian `H`.
pub fn unitary_exp(h: &CMat, t: f64) -> CMat {
    let (values, vectors) = eigh(h);
    let n = h.nrows();
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        values.iter().map(|&v| C64::from_polar(1.0, t * v)),
    ));
    &vectors * phases * vectors.adjoint()
}

/// Largest elementwise deviation of `u†u` from the identity.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.ncols();
    let gram = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}
