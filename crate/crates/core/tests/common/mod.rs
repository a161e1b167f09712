//! Brute-force oracles shared by the integration tests. They use nothing
//! from the solvers under test: qubit states are parametrized by their
//! Bloch vectors and searched on explicit grids.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64 as C64;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use act_core::icc::{probe_state, ProbeState};
use act_core::measure::{born_probabilities, MeasurementRecord};
use act_core::mle::{ml_probabilities, ConstraintSet};
use act_core::state::{random_haar_basis, random_rank_r_state, DensityMatrix, OrthonormalBasis};

pub type CMat = DMatrix<C64>;

/// Bloch vector of the pure state `ket` (length 2).
pub fn bloch_axis(ket: &[C64]) -> [f64; 3] {
    let (a, b) = (ket[0], ket[1]);
    let c = a.conj() * b;
    [2.0 * c.re, 2.0 * c.im, a.norm_sqr() - b.norm_sqr()]
}

pub fn bloch_state(r: [f64; 3]) -> DensityMatrix {
    let h = 0.5;
    let m = CMat::from_row_slice(
        2,
        2,
        &[
            C64::new(h * (1.0 + r[2]), 0.0),
            C64::new(h * r[0], -h * r[1]),
            C64::new(h * r[0], h * r[1]),
            C64::new(h * (1.0 - r[2]), 0.0),
        ],
    );
    DensityMatrix::new(m).unwrap()
}

/// `(tr Z, (tr Zσ_x, tr Zσ_y, tr Zσ_z))`, so `tr(ρZ) = (tr Z + z·r) / 2`.
pub fn operator_bloch(z: &CMat) -> (f64, [f64; 3]) {
    let t = (z[(0, 0)] + z[(1, 1)]).re;
    let v = [2.0 * z[(1, 0)].re, 2.0 * z[(1, 0)].im, (z[(0, 0)] - z[(1, 1)]).re];
    (t, v)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// One qubit record as `(axis of ket 0, n_0, n_1)`.
pub fn likelihood_terms(records: &[MeasurementRecord]) -> Vec<([f64; 3], f64, f64)> {
    records
        .iter()
        .map(|r| {
            let w = r.weights();
            (bloch_axis(&r.basis().ket(0)), w[0], w[1])
        })
        .collect()
}

fn log_likelihood_at(terms: &[([f64; 3], f64, f64)], r: [f64; 3]) -> f64 {
    let mut total = 0.0;
    for &(n, w0, w1) in terms {
        let x = dot(n, r);
        for (w, p) in [(w0, 0.5 * (1.0 + x)), (w1, 0.5 * (1.0 - x))] {
            if w > 0.0 {
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += w * p.ln();
            }
        }
    }
    total
}

fn onto_ball(r: [f64; 3]) -> [f64; 3] {
    let n = dot(r, r).sqrt();
    if n > 1.0 {
        [r[0] / n, r[1] / n, r[2] / n]
    } else {
        r
    }
}

/// Maximum of the qubit log-likelihood by grid search: a 101³ grid over
/// the cube (points outside the ball pulled onto the sphere), then nested
/// 21³ grids around the incumbent until the spacing is below 1e-11.
pub fn grid_max_log_likelihood(terms: &[([f64; 3], f64, f64)]) -> (f64, [f64; 3]) {
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    let search = |center: [f64; 3], half: f64, n: usize, best: &mut (f64, [f64; 3])| {
        let step = 2.0 * half / (n - 1) as f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let r = onto_ball([
                        center[0] - half + i as f64 * step,
                        center[1] - half + j as f64 * step,
                        center[2] - half + k as f64 * step,
                    ]);
                    let v = log_likelihood_at(terms, r);
                    if v > best.0 {
                        *best = (v, r);
                    }
                }
            }
        }
        step
    };
    let mut step = search([0.0; 3], 1.0, 101, &mut best);
    while step > 1e-11 {
        let center = best.1;
        step = search(center, 4.0 * step, 21, &mut best);
    }
    best
}

/// Qubit constraints `n·r = 2p_0 − 1`, one per record.
pub fn qubit_constraints(cs: &ConstraintSet) -> Vec<([f64; 3], f64)> {
    cs.records()
        .iter()
        .zip(cs.targets())
        .map(|(r, t)| (bloch_axis(&r.basis().ket(0)), 2.0 * t.values()[0] - 1.0))
        .collect()
}

/// `(min, max)` of `z·r` over Bloch vectors with `n_k·r = c_k`, searched on
/// a grid over the feasible disk, chord or point.
pub fn grid_extremes(constraints: &[([f64; 3], f64)], z: [f64; 3]) -> (f64, f64) {
    let rows = DMatrix::from_fn(constraints.len(), 3, |i, j| constraints[i].0[j]);
    let rhs = nalgebra::DVector::from_fn(constraints.len(), |i, _| constraints[i].1);
    let svd = rows.clone().svd(true, true);
    let r0 = svd.solve(&rhs, 1e-10).unwrap();
    let rank = svd.rank(1e-10);
    // Null space of the constraint rows from the eigenvectors of NᵀN.
    let gram: Matrix3<f64> = Matrix3::from_iterator((rows.transpose() * &rows).iter().cloned());
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let null: Vec<Vector3<f64>> = order[..3 - rank].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let center = [r0[0], r0[1], r0[2]];
    let radius = (1.0 - dot(center, center)).max(0.0).sqrt();
    let zc = dot(z, center);
    let zn: Vec<f64> = null.iter().map(|v| z[0] * v[0] + z[1] * v[1] + z[2] * v[2]).collect();

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut visit = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    match zn.len() {
        0 => visit(zc),
        1 => {
            let n = 1_000_000;
            for i in 0..=n {
                let t = -radius + 2.0 * radius * i as f64 / n as f64;
                visit(zc + zn[0] * t);
            }
        }
        2 => {
            let (nr, na) = (1000, 1000);
            for i in 0..=nr {
                let rho = radius * i as f64 / nr as f64;
                for j in 0..na {
                    let (s, c) = (std::f64::consts::TAU * j as f64 / na as f64).sin_cos();
                    visit(zc + rho * (zn[0] * c + zn[1] * s));
                }
            }
        }
        m => panic!("grid oracle expects at least one constraint, got {m} free directions"),
    }
    (lo, hi)
}

/// Largest deviation of a basis from a Kronecker product of single-qubit
/// bases, up to column order and phases. Local bases are read off the
/// reduced states of the first column.
pub fn product_structure_error(basis: &OrthonormalBasis, qubits: usize) -> f64 {
    let u = basis.kets();
    let d = u.nrows();
    assert_eq!(d, 1 << qubits);
    let w = u.column(0);
    let mut locals = Vec::with_capacity(qubits);
    for q in 0..qubits {
        let shift = qubits - 1 - q;
        let mut red = CMat::zeros(2, 2);
        for i in 0..d {
            for j in 0..d {
                if (i & !(1 << shift)) == (j & !(1 << shift)) {
                    red[((i >> shift) & 1, (j >> shift) & 1)] += w[i] * w[j].conj();
                }
            }
        }
        let eig = red.symmetric_eigen();
        let top = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
        let v = eig.eigenvectors.column(top).into_owned();
        let v = v.unscale(v.norm());
        let perp = [-v[1].conj(), v[0].conj()];
        locals.push(CMat::from_row_slice(2, 2, &[v[0], perp[0], v[1], perp[1]]));
    }
    let product = locals.iter().fold(CMat::identity(1, 1), |acc, l| acc.kronecker(l));
    let overlaps = product.adjoint() * u;
    let mut worst: f64 = 0.0;
    for c in 0..d {
        let j = (0..d).max_by(|&a, &b| overlaps[(a, c)].norm().partial_cmp(&overlaps[(b, c)].norm()).unwrap()).unwrap();
        let residual = u.column(c) - product.column(j) * overlaps[(j, c)];
        worst = worst.max(residual.norm());
    }
    worst
}

/// Random qubit data: one or two Haar bases, exact or from 200 shots each.
pub fn random_qubit_records(rng: &mut ChaCha8Rng) -> Vec<MeasurementRecord> {
    let truth = random_rank_r_state(2, rng.random_range(1..=2), rng).unwrap();
    let k = rng.random_range(1..=2);
    let noisy = rng.random_bool(0.5);
    (0..k)
        .map(|_| {
            let b = random_haar_basis(2, rng).unwrap();
            let p = born_probabilities(&truth, &b).unwrap();
            if noisy {
                let n0 = (0..200).filter(|_| rng.random::<f64>() < p.values()[0]).count() as u64;
                MeasurementRecord::from_counts(b, vec![n0, 200 - n0]).unwrap()
            } else {
                MeasurementRecord::exact(b, p).unwrap()
            }
        })
        .collect()
}

pub fn random_qubit_instance(rng: &mut ChaCha8Rng) -> (ConstraintSet, ProbeState) {
    let records = random_qubit_records(rng);
    (ml_probabilities(&records).unwrap(), probe_state(2, rng).unwrap())
}
