//! Operator-splitting solver for linear objectives over a data convex set
//!
//! ```text
//!     minimize  tr(C ρ)   subject to   ρ ⪰ 0,  tr ρ = 1,  tr(ρ Π_i) = p_i
//! ```
//!
//! The feasible set is the intersection of an affine subspace of Hermitian
//! matrices with the positive semidefinite cone. ADMM alternates an exact
//! least-squares projection onto the affine part (precomputed orthonormal
//! row or null-space basis in the isometric real coordinates of
//! [`crate::linalg`]) with eigenvalue clipping onto the cone, using
//! over-relaxation and residual-balancing penalty updates.
//!
//! Because `tr ρ = 1` is always one of the constraints, any scaled dual
//! iterate yields a rigorous lower bound on the optimum
//! (`⟨w, x_ls⟩ + λ_min(C − P_row w)`), which is reported as a duality gap.

use log::{debug, trace};
use nalgebra::{DMatrix, DVector};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, PSDTriangleConeT, SolverStatus};
use num_complex::Complex64 as C64;

use crate::error::{Result, TomoError};
use crate::linalg::{self, CMat};

/// Rows whose Gram-Schmidt residual falls below this are treated as
/// linearly dependent on earlier rows.
const DEPENDENCY_TOL: f64 = 1e-9;
/// Largest tolerated mismatch between a dependent row's target and the
/// value implied by the independent rows.
const CONSISTENCY_TOL: f64 = 1e-6;
const INTERIOR_MAX_ITERATIONS: u32 = 200;

#[derive(Clone, Debug)]
enum Basis {
    /// Orthonormal basis of the constraint row space, one row per vector.
    Rows(DMatrix<f64>),
    /// Orthonormal basis of the null space, one column per vector.
    Null(DMatrix<f64>),
}

/// Euclidean projector onto `{x : A x = b}` for a fixed set of Hermitian
/// constraint operators.
#[derive(Clone, Debug)]
pub struct AffineProjector {
    dim: usize,
    basis: Basis,
    x_ls: DVector<f64>,
    rank: usize,
}

impl AffineProjector {
    /// `rows` are coordinate vectors of the constraint operators and
    /// `targets` their prescribed values. The unit-trace constraint is added
    /// automatically.
    pub fn new(dim: usize, rows: &[DVector<f64>], targets: &[f64]) -> Result<Self> {
        let n = dim * dim;
        if rows.len() != targets.len() {
            return Err(TomoError::InvalidArgument("constraint rows and targets differ in length".into()));
        }
        let mut trace_row = DVector::zeros(n);
        for i in 0..dim {
            trace_row[i] = 1.0;
        }
        let mut q: Vec<DVector<f64>> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let all_rows = std::iter::once((&trace_row, 1.0)).chain(rows.iter().zip(targets.iter().copied()));
        for (row, target) in all_rows {
            if row.len() != n {
                return Err(TomoError::DimensionMismatch { expected: n, found: row.len() });
            }
            let mut v = row.clone();
            let mut b = target;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for (qi, &bi) in q.iter().zip(&beta) {
                    let c = qi.dot(&v);
                    v.axpy(-c, qi, 1.0);
                    b -= c * bi;
                }
            }
            let norm = v.norm();
            let scale = row.norm().max(1.0);
            if norm <= DEPENDENCY_TOL * scale {
                if b.abs() > CONSISTENCY_TOL * scale {
                    return Err(TomoError::InvalidArgument(format!(
                        "inconsistent constraint targets (mismatch {:.3e})",
                        b.abs()
                    )));
                }
                continue;
            }
            q.push(v.unscale(norm));
            beta.push(b / norm);
        }
        let rank = q.len();
        let mut x_ls = DVector::zeros(n);
        for (qi, &bi) in q.iter().zip(&beta) {
            x_ls.axpy(bi, qi, 1.0);
        }
        let basis = if 2 * rank <= n {
            Basis::Rows(DMatrix::from_fn(rank, n, |r, c| q[r][c]))
        } else {
            Basis::Null(null_space_complement(&q, n))
        };
        Ok(Self { dim, basis, x_ls, rank })
    }

    /// Matrix dimension `d` of the states.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of independent affine constraints, including the trace.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dimension of the affine subspace.
    pub fn free_dimensions(&self) -> usize {
        self.dim * self.dim - self.rank
    }

    /// Minimum-norm point of the affine subspace.
    pub fn least_squares_point(&self) -> &DVector<f64> {
        &self.x_ls
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = self.project_null(v);
        out += &self.x_ls;
        out
    }

    /// Orthogonal projection onto the null space of the constraint map.
    pub fn project_null(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Basis::Rows(q) => {
                let coeffs = q * v;
                v - q.tr_mul(&coeffs)
            }
            Basis::Null(nb) => {
                let coeffs = nb.tr_mul(v);
                nb * coeffs
            }
        }
    }

    /// Orthonormal basis of the null space, one column per vector.
    pub fn null_basis(&self) -> DMatrix<f64> {
        match &self.basis {
            Basis::Null(nb) => nb.clone(),
            Basis::Rows(q) => {
                let rows: Vec<DVector<f64>> = q.row_iter().map(|r| r.transpose()).collect();
                null_space_complement(&rows, self.dim * self.dim)
            }
        }
    }

    /// Distance from `v` to the affine subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }
}

fn null_space_complement(q: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut all: Vec<DVector<f64>> = q.to_vec();
    let mut null: Vec<DVector<f64>> = Vec::with_capacity(n - q.len());
    for i in 0..n {
        if all.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            for b in &all {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            let v = v.unscale(norm);
            all.push(v.clone());
            null.push(v);
        }
    }
    DMatrix::from_fn(n, null.len(), |r, c| null[c][r])
}

#[derive(Clone, Debug)]
pub struct AdmmSettings {
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Stop once both primal and dual residuals fall below this.
    pub tolerance: f64,
    /// Additionally require the normalized duality gap below this, when set.
    pub gap_tolerance: Option<f64>,
    pub max_iterations: usize,
    pub initial_penalty: f64,
    /// Residual-balancing period; 0 disables penalty adaptation.
    pub adapt_every: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            relaxation: 1.6,
            tolerance: 1e-8,
            gap_tolerance: Some(1e-8),
            max_iterations: 200_000,
            initial_penalty: 1.0,
            adapt_every: 50,
        }
    }
}

/// Iterate carried between related solves over the same feasible set.
#[derive(Clone, Debug)]
pub struct WarmStart {
    z: DVector<f64>,
    u: DVector<f64>,
    penalty: f64,
}

#[derive(Clone, Debug)]
pub struct LinearSolution {
    /// Positive semidefinite iterate (not renormalized).
    pub point: CMat,
    /// `tr(C ρ)` at `point`, in the caller's objective scale.
    pub value: f64,
    /// Lower bound on the optimal value certified by the dual iterate.
    pub lower_bound: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Distance from `point` to the affine constraint set.
    pub affine_residual: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the stopping rule held.
    pub converged: bool,
    pub warm: WarmStart,
}

impl LinearSolution {
    pub fn gap(&self) -> f64 {
        (self.value - self.lower_bound).max(0.0)
    }
}

/// Minimizes `tr(objective · ρ)` over the feasible set of `projector`.
pub fn minimize_linear(
    projector: &AffineProjector,
    objective: &CMat,
    settings: &AdmmSettings,
    warm: Option<&WarmStart>,
) -> Result<LinearSolution> {
    let d = projector.dim();
    if objective.nrows() != d {
        return Err(TomoError::DimensionMismatch { expected: d, found: objective.nrows() });
    }
    let c_raw = linalg::herm_to_vec(objective);
    let scale = c_raw.norm();
    let c = if scale > 0.0 { c_raw.unscale(scale) } else { c_raw.clone() };

    // A zero-dimensional affine set is feasible only at its single point,
    // which typically sits on the cone boundary where ADMM crawls.
    if projector.free_dimensions() == 0 {
        let x = projector.least_squares_point().clone();
        let z = project_psd_vec(&x, d);
        let primal = (&x - &z).norm();
        if primal > CONSISTENCY_TOL {
            return Err(TomoError::InvalidArgument(format!(
                "constraints fix a single non-positive matrix ({primal:.3e} from the PSD cone)"
            )));
        }
        let value = c_raw.dot(&x);
        return Ok(LinearSolution {
            point: linalg::vec_to_herm(&z, d),
            value: c_raw.dot(&z),
            lower_bound: value.min(c_raw.dot(&z)),
            primal_residual: primal,
            dual_residual: 0.0,
            affine_residual: primal,
            iterations: 0,
            converged: true,
            warm: WarmStart { z, u: DVector::zeros(c.len()), penalty: settings.initial_penalty },
        });
    }

    let (mut z, mut u, mut rho) = match warm {
        Some(w) if w.z.len() == c.len() => (w.z.clone(), w.u.clone(), w.penalty),
        _ => {
            let z0 = project_psd_vec(projector.least_squares_point(), d);
            (z0, DVector::zeros(c.len()), settings.initial_penalty)
        }
    };

    let alpha = settings.relaxation;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let check_gap_every = 10;
    while iterations < settings.max_iterations {
        iterations += 1;
        let v = &z - &u - c.unscale(rho);
        let x = projector.project(&v);
        let x_hat = x.scale(alpha) + z.scale(1.0 - alpha);
        let z_new = project_psd_vec(&(&x_hat + &u), d);
        u += &x_hat - &z_new;
        primal = (&x - &z_new).norm();
        dual = rho * (&z_new - &z).norm();
        z = z_new;

        if primal < settings.tolerance && dual < settings.tolerance {
            match settings.gap_tolerance {
                None => {
                    converged = true;
                    break;
                }
                Some(gap_tol) if iterations % check_gap_every == 0 || iterations < check_gap_every => {
                    let lb = lower_bound(projector, &c, &u, rho);
                    if c.dot(&z) - lb < gap_tol {
                        converged = true;
                        break;
                    }
                }
                Some(_) => {}
            }
        }

        if settings.adapt_every > 0 && iterations % settings.adapt_every == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u.unscale_mut(2.0);
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u.scale_mut(2.0);
            }
        }
    }
    trace!("admm: {iterations} iterations, primal {primal:.2e}, dual {dual:.2e}, penalty {rho:.2e}");
    if !converged {
        debug!("admm hit the iteration cap: primal {primal:.2e}, dual {dual:.2e}");
    }
    let lb = lower_bound(projector, &c, &u, rho);
    let affine_residual = projector.residual(&z);
    Ok(LinearSolution {
        point: linalg::vec_to_herm(&z, d),
        value: c_raw.dot(&z),
        lower_bound: lb * scale,
        primal_residual: primal,
        dual_residual: dual,
        affine_residual,
        iterations,
        converged,
        warm: WarmStart { z, u, penalty: rho },
    })
}

/// Dual lower bound on `min ⟨c, x⟩` built from the scaled ADMM dual `u`.
fn lower_bound(projector: &AffineProjector, c: &DVector<f64>, u: &DVector<f64>, rho: f64) -> f64 {
    bound_from_multiplier(projector, c, &(c + u.scale(rho)))
}

/// `⟨P_row w, x_ls⟩ + λ_min(c − P_row w)`: a valid lower bound on
/// `min ⟨c, x⟩` over the feasible set for any `w`, because every feasible
/// `x` is positive semidefinite with unit trace.
fn bound_from_multiplier(projector: &AffineProjector, c: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let slack = c - w + projector.project_null(w);
    let min_eig = *linalg::eigvalsh(&linalg::vec_to_herm(&slack, projector.dim())).last().unwrap();
    w.dot(projector.least_squares_point()) + min_eig
}

/// Interior-point solve of the same problem as [`minimize_linear`], used
/// when ADMM stalls on badly conditioned or interior-free sets.
///
/// The affine set is parametrized as `x = x_ls + N t` over an orthonormal
/// null-space basis `N`, and `ρ ⪰ 0` is imposed on the real symmetric
/// embedding `[[Re ρ, −Im ρ], [Im ρ, Re ρ]]`.
pub fn minimize_interior(projector: &AffineProjector, objective: &CMat) -> Result<LinearSolution> {
    let d = projector.dim();
    if objective.nrows() != d {
        return Err(TomoError::DimensionMismatch { expected: d, found: objective.nrows() });
    }
    let c_raw = linalg::herm_to_vec(objective);
    let scale = c_raw.norm().max(f64::MIN_POSITIVE);
    let c = c_raw.unscale(scale);
    let null = projector.null_basis();
    let x_ls = projector.least_squares_point();
    let free = null.ncols();
    let e = 2 * d;
    let tri = e * (e + 1) / 2;

    let svec = |x: &DVector<f64>| -> Vec<f64> {
        let h = linalg::vec_to_herm(x, d);
        let entry = |i: usize, j: usize| -> f64 {
            match (i < d, j < d) {
                (true, true) => h[(i, j)].re,
                (true, false) => -h[(i, j - d)].im,
                (false, true) => h[(i - d, j)].im,
                (false, false) => h[(i - d, j - d)].re,
            }
        };
        let mut out = Vec::with_capacity(tri);
        for j in 0..e {
            for i in 0..=j {
                out.push(if i == j { entry(i, j) } else { std::f64::consts::SQRT_2 * entry(i, j) });
            }
        }
        out
    };

    let b = svec(x_ls);
    let mut colptr = vec![0];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    let mut q = Vec::with_capacity(free);
    for j in 0..free {
        let col = null.column(j).into_owned();
        for (i, v) in svec(&col).into_iter().enumerate() {
            if v != 0.0 {
                rowval.push(i);
                nzval.push(-v);
            }
        }
        colptr.push(rowval.len());
        q.push(c.dot(&col));
    }
    let a = CscMatrix::new(tri, free, colptr, rowval, nzval);
    let p = CscMatrix::<f64>::zeros((free, free));
    let settings = DefaultSettingsBuilder::default()
        .max_iter(INTERIOR_MAX_ITERATIONS)
        .verbose(false)
        .equilibrate_enable(false)
        .chordal_decomposition_enable(false)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .build()
        .map_err(|e| TomoError::InvalidArgument(format!("interior-point settings: {e:?}")))?;
    let cones = [PSDTriangleConeT(e)];
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| TomoError::InvalidArgument(format!("interior-point setup: {e:?}")))?;
    solver.solve();
    let status = solver.solution.status;
    let iterations = solver.solution.iterations as usize;
    trace!("interior point: {status:?} after {iterations} iterations");
    let converged = matches!(status, SolverStatus::Solved | SolverStatus::AlmostSolved);
    if !converged && !matches!(status, SolverStatus::MaxIterations | SolverStatus::InsufficientProgress) {
        return Err(TomoError::NotConverged { solver: "interior point", iterations, primal: f64::NAN, dual: f64::NAN });
    }

    let t = DVector::from_column_slice(&solver.solution.x);
    let x = x_ls + &null * t;
    let z = project_psd_vec(&x, d);
    // dual slack: ⟨E(N_j), S⟩ = q_j, and ⟨E(X), E(H)⟩ = 2⟨X, H⟩
    let sz = &solver.solution.z;
    let mut s_emb = DMatrix::<f64>::zeros(e, e);
    let mut idx = 0;
    for j in 0..e {
        for i in 0..=j {
            let v = if i == j { sz[idx] } else { sz[idx] * std::f64::consts::FRAC_1_SQRT_2 };
            s_emb[(i, j)] = v;
            s_emb[(j, i)] = v;
            idx += 1;
        }
    }
    let slack = CMat::from_fn(d, d, |i, j| {
        C64::new(s_emb[(i, j)] + s_emb[(i + d, j + d)], s_emb[(i + d, j)] - s_emb[(i, j + d)])
    });
    let w = &c - linalg::herm_to_vec(&slack);
    let lb = bound_from_multiplier(projector, &c, &w);
    let primal = (&x - &z).norm();
    Ok(LinearSolution {
        point: linalg::vec_to_herm(&z, d),
        value: c_raw.dot(&z),
        lower_bound: lb * scale,
        primal_residual: primal,
        dual_residual: 0.0,
        affine_residual: projector.residual(&z),
        iterations,
        converged,
        warm: WarmStart { z, u: DVector::zeros(d * d), penalty: AdmmSettings::default().initial_penalty },
    })
}

fn project_psd_vec(v: &DVector<f64>, d: usize) -> DVector<f64> {
    linalg::herm_to_vec(&linalg::project_psd(&linalg::vec_to_herm(v, d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::projector_vec;
    use num_complex::Complex64 as C64;

    fn diag(values: &[f64]) -> CMat {
        let d = values.len();
        CMat::from_fn(d, d, |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    #[test]
    fn trace_only_minimum_is_smallest_eigenvalue() {
        let p = AffineProjector::new(3, &[], &[]).unwrap();
        assert_eq!(p.rank(), 1);
        let sol = minimize_linear(&p, &diag(&[0.5, 0.2, 0.3]), &AdmmSettings::default(), None).unwrap();
        assert!((sol.value - 0.2).abs() < 1e-7, "{}", sol.value);
        assert!(sol.gap() < 1e-7);
    }

    #[test]
    fn dependent_rows_are_dropped() {
        let e = |i: usize| {
            let mut psi = vec![C64::new(0.0, 0.0); 2];
            psi[i] = C64::new(1.0, 0.0);
            projector_vec(&psi)
        };
        let p = AffineProjector::new(2, &[e(0), e(1)], &[0.7, 0.3]).unwrap();
        assert_eq!(p.rank(), 2);
        assert!(AffineProjector::new(2, &[e(0), e(1)], &[0.7, 0.7]).is_err());
    }

    #[test]
    fn projection_is_idempotent() {
        let e0 = projector_vec(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let p = AffineProjector::new(3, &[e0.clone()], &[0.4]).unwrap();
        let v = DVector::from_fn(9, |i, _| (i as f64).sin());
        let once = p.project(&v);
        assert!((p.project(&once) - &once).norm() < 1e-14);
        assert!((once.dot(&e0) - 0.4).abs() < 1e-14);
    }

    #[test]
    fn interior_point_agrees_with_admm() {
        use crate::state::{random_haar_basis, random_rank_r_state};
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3, 4] {
            let rho = random_rank_r_state(d, d, &mut rng).unwrap();
            let basis = random_haar_basis(d, &mut rng).unwrap();
            let rows: Vec<_> = (0..d).map(|j| projector_vec(&basis.ket(j))).collect();
            let targets: Vec<f64> = rows.iter().map(|r| r.dot(&linalg::herm_to_vec(rho.matrix()))).collect();
            let p = AffineProjector::new(d, &rows, &targets).unwrap();
            let c = linalg::random_hermitian(d, &mut rng);
            let admm = minimize_linear(&p, &c, &AdmmSettings::default(), None).unwrap();
            let ip = minimize_interior(&p, &c).unwrap();
            assert!(ip.converged);
            assert!((admm.value - ip.value).abs() < 1e-6, "d={d}: {} vs {}", admm.value, ip.value);
            assert!(ip.gap() < 1e-6 && ip.affine_residual < 1e-8);
        }
    }

    #[test]
    fn fully_determined_state_is_returned_directly() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let kets = [
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(h, 0.0), C64::new(h, 0.0)],
            [C64::new(h, 0.0), C64::new(0.0, h)],
        ];
        // Bloch vector (0.3, -0.2, 0.5)
        let targets = [0.75, 0.65, 0.4];
        let rows: Vec<_> = kets.iter().map(|k| projector_vec(k)).collect();
        let p = AffineProjector::new(2, &rows, &targets).unwrap();
        assert_eq!(p.free_dimensions(), 0);
        let sol = minimize_linear(&p, &diag(&[1.0, -1.0]), &AdmmSettings::default(), None).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!((sol.value - 0.5).abs() < 1e-12 && sol.gap() < 1e-12);
        // a Bloch vector outside the ball has no PSD solution
        let p = AffineProjector::new(2, &rows, &[1.0, 0.9, 0.9]).unwrap();
        assert!(minimize_linear(&p, &diag(&[1.0, -1.0]), &AdmmSettings::default(), None).is_err());
    }
}
