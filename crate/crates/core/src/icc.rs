//! Informational-completeness certification.
//!
//! A random full-rank probe `Z` defines the linear functional
//! `f_Z(ρ) = tr(ρ Z)`. Its maximum and minimum over the data convex set
//! coincide exactly when the set is a single point, so the normalized width
//!
//! ```text
//!     s_k = (f_max,k − f_min,k) / (f_max,1 − f_min,1)
//! ```
//!
//! is a size monotone for the set: it starts at one, shrinks as bases are
//! added, and falls below a threshold `ε` once the data pin down a unique
//! state.

use log::{debug, trace, warn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Result, TomoError};
use crate::linalg::{self, CMat};
use crate::mle::ConstraintSet;
use crate::sdp::{self, AdmmSettings, AffineProjector, LinearSolution, WarmStart};
use crate::state::{random_rank_r_state, trace_distance, DensityMatrix};

/// Largest tolerated constraint violation of an extremal state.
pub const CONSTRAINT_TOL: f64 = 1e-7;
/// Largest tolerated duality gap of an extremal value.
pub const GAP_TOL: f64 = 1e-6;
/// Default certification threshold.
pub const DEFAULT_EPSILON: f64 = 1e-4;
/// A first-step width at or below this marks the probe as degenerate.
pub const DEGENERATE_WIDTH: f64 = 1e-9;
/// Probe redraws attempted on a degenerate first step.
pub const PROBE_RETRIES: usize = 5;

/// Eigenvalues of the normalized likelihood multiplier above this are
/// treated as non-zero.
const MULTIPLIER_TOL: f64 = 1e-6;

/// Eigenvalues of the maximum-likelihood state above this span its range.
const WITNESS_RANK_TOL: f64 = 1e-12;

/// Largest distance of the maximum-likelihood range from the multiplier
/// kernel for which the two are taken to agree.
const KERNEL_ALIGNMENT_TOL: f64 = 1e-4;

/// Points farther than this from the constraints are not polished.
const POLISH_MAX_VIOLATION: f64 = 1e-4;
/// Relative eigenvalue cutoffs tried as the rank of a polished factor.
const POLISH_RANK_CUTOFFS: [f64; 3] = [1e-6, 1e-9, 1e-3];
/// Constraint residual at which polishing stops.
const POLISH_TOL: f64 = 1e-13;
/// Largest residual of an accepted polished factor.
const POLISH_ACCEPT: f64 = 1e-8;
const POLISH_ITERATIONS: usize = 100;

const PROBE_MIN_EIGENVALUE: f64 = 1e-6;
const PROBE_MIN_DISTANCE: f64 = 1e-3;

/// Full-rank state `Z ≠ I/d` defining the probe functional.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeState(DensityMatrix);

impl ProbeState {
    pub fn new(z: DensityMatrix) -> Result<Self> {
        let d = z.dim();
        let min_eig = *z.eigenvalues().last().unwrap();
        if min_eig <= PROBE_MIN_EIGENVALUE {
            return Err(TomoError::InvalidArgument(format!("probe is not full rank (λ_min = {min_eig:.3e})")));
        }
        let offset = (z.matrix() - CMat::identity(d, d).unscale(d as f64)).norm();
        if offset <= PROBE_MIN_DISTANCE {
            return Err(TomoError::InvalidArgument("probe is too close to the maximally mixed state".into()));
        }
        Ok(Self(z))
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `λ_max(Z) − λ_min(Z)`: the width of `f_Z` over the whole state space.
    pub fn spread(&self) -> f64 {
        let values = self.0.eigenvalues();
        values[0] - values[values.len() - 1]
    }
}

/// Hilbert-Schmidt random full-rank probe, redrawn until the probe
/// invariants hold.
pub fn probe_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<ProbeState> {
    if d < 2 {
        return Err(TomoError::InvalidArgument(format!("probe needs d >= 2, got {d}")));
    }
    loop {
        if let Ok(p) = ProbeState::new(random_rank_r_state(d, d, rng)?) {
            return Ok(p);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Clone, Debug)]
pub struct ExtremalSolution {
    /// `tr(ρ Z)` at the returned state.
    pub value: f64,
    pub state: DensityMatrix,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// Largest `|tr(ρ Π) − p|` over the constraints.
    pub violation: f64,
    pub iterations: usize,
}

/// Face of the state space the data convex set lies in: states `V σ V†`
/// with `σ` on the `m`-dimensional support.
#[derive(Clone, Debug)]
struct Face {
    /// Isometry `V` (d × m); `None` for the whole space.
    support: Option<CMat>,
    /// Constraint operators compressed to the support.
    operators: Vec<CMat>,
    targets: Vec<f64>,
    projector: AffineProjector,
}

impl Face {
    fn new(m: usize, support: Option<CMat>, operators: Vec<CMat>, targets: Vec<f64>) -> Result<Self> {
        let rows: Vec<_> = operators.iter().map(linalg::herm_to_vec).collect();
        let projector = AffineProjector::new(m, &rows, &targets)?;
        Ok(Self { support, operators, targets, projector })
    }

    fn dim(&self) -> usize {
        self.projector.dim()
    }

    /// Sub-face spanned by the columns of `w` (m × k, orthonormal).
    fn restrict(&self, w: &CMat) -> Result<Self> {
        let operators = self.operators.iter().map(|o| w.adjoint() * o * w).collect();
        let support = match &self.support {
            Some(v) => v * w,
            None => w.clone(),
        };
        Self::new(w.ncols(), Some(support), operators, self.targets.clone())
    }

    fn compress(&self, m: &CMat) -> CMat {
        match &self.support {
            Some(v) => v.adjoint() * m * v,
            None => m.clone(),
        }
    }

    fn lift(&self, m: &CMat) -> CMat {
        match &self.support {
            Some(v) => v * m * v.adjoint(),
            None => m.clone(),
        }
    }

    /// Repairs a nearly feasible point: solves `A(G G†) = b` for a factor
    /// `G` of the point's numerical rank with Levenberg-Marquardt, which
    /// converges quadratically from close starts and keeps the result
    /// positive semidefinite. Returns the polished state in the full space.
    fn polish(&self, point: &CMat) -> Option<CMat> {
        let (values, vectors) = linalg::eigh(&self.compress(point));
        let top = values[0].max(f64::MIN_POSITIVE);
        let mut ranks: Vec<usize> = POLISH_RANK_CUTOFFS
            .iter()
            .map(|&c| values.iter().filter(|&&v| v > c * top).count().max(1))
            .collect();
        ranks.dedup();
        for k in ranks {
            let scales: Vec<f64> = values[..k].iter().map(|v| v.max(0.0).sqrt()).collect();
            let g0 = CMat::from_fn(self.dim(), k, |i, j| vectors[(i, j)] * scales[j]);
            if let Some(g) = self.solve_factor(g0) {
                return Some(self.lift(&(&g * g.adjoint())));
            }
        }
        None
    }

    fn solve_factor(&self, mut g: CMat) -> Option<CMat> {
        let (m, k) = g.shape();
        let n = 2 * m * k;
        let residuals = |g: &CMat| -> DVector<f64> {
            let mut r = DVector::zeros(self.operators.len() + 1);
            r[0] = g.norm_squared() - 1.0;
            for (i, (a, &b)) in self.operators.iter().zip(&self.targets).enumerate() {
                r[i + 1] = (g.adjoint() * a * g).trace().re - b;
            }
            r
        };
        let to_real = |x: &CMat| DVector::from_iterator(n, x.iter().map(|c| c.re).chain(x.iter().map(|c| c.im)));
        let mut r = residuals(&g);
        let mut damping = 1e-6;
        for _ in 0..POLISH_ITERATIONS {
            if r.amax() <= POLISH_TOL {
                break;
            }
            let mut jac = DMatrix::zeros(r.len(), n);
            jac.row_mut(0).copy_from(&to_real(&g).scale(2.0).transpose());
            for (i, a) in self.operators.iter().enumerate() {
                jac.row_mut(i + 1).copy_from(&to_real(&(a * &g)).scale(2.0).transpose());
            }
            let jtj = jac.transpose() * &jac;
            let rhs = -(jac.transpose() * &r);
            let mut improved = false;
            while damping < 1e12 {
                let mut lhs = jtj.clone();
                for i in 0..n {
                    lhs[(i, i)] += damping * (1.0 + jtj[(i, i)]);
                }
                if let Some(step) = lhs.cholesky().map(|c| c.solve(&rhs)) {
                    let trial = &g + CMat::from_fn(m, k, |i, j| C64::new(step[i + j * m], step[m * k + i + j * m]));
                    let r_trial = residuals(&trial);
                    if r_trial.norm() < r.norm() {
                        g = trial;
                        r = r_trial;
                        damping = (damping / 10.0).max(1e-15);
                        improved = true;
                        break;
                    }
                }
                damping *= 10.0;
            }
            if !improved {
                break;
            }
        }
        trace!("polish: rank {k}, residual {:.2e}", r.amax());
        (r.amax() <= POLISH_ACCEPT).then_some(g)
    }

    fn interior(&self, objective: &CMat) -> Result<LinearSolution> {
        let mut sol = sdp::minimize_interior(&self.projector, &self.compress(objective))?;
        sol.point = self.lift(&sol.point);
        Ok(sol)
    }

    fn minimize(&self, objective: &CMat, settings: &AdmmSettings, warm: Option<&WarmStart>) -> Result<LinearSolution> {
        let mut sol = sdp::minimize_linear(&self.projector, &self.compress(objective), settings, warm)?;
        sol.point = self.lift(&sol.point);
        Ok(sol)
    }
}

/// Subspace of the face holding every state that meets maximum-likelihood
/// targets, when that is a proper subspace.
///
/// Every state meeting the targets has `tr(Sρ) = N − Σ n_j = 0` for the
/// multiplier `S = N·I − Σ (n_j/p_j) Π_j`, so when `S ⪰ 0` it satisfies
/// `Sρ = 0`. `S` is non-zero exactly when the likelihood maximum sits on
/// the boundary; the data set then has no interior and lies in the kernel
/// of `S`. The numerical kernel is tilted by roundoff over the spectral
/// gap, so it is rotated to contain the range of the maximum-likelihood
/// state exactly, which keeps the restricted constraints consistent.
fn likelihood_face(constraints: &ConstraintSet, face: &Face) -> Option<CMat> {
    let witness = constraints.witness()?;
    let d = constraints.dim();
    let mut total = 0.0;
    let mut gradient = CMat::zeros(d, d);
    for (r, t) in constraints.records().iter().zip(constraints.targets()) {
        for (j, (w, &p)) in r.weights().into_iter().zip(t.values()).enumerate() {
            if w > 0.0 {
                if p <= DataConvexSet::ZERO_PROBABILITY {
                    return None;
                }
                total += w;
                gradient += r.basis().projector(j).scale(w / p);
            }
        }
    }
    let multiplier = face.compress(&(CMat::identity(d, d).scale(total) - gradient)).unscale(total);
    let (values, vectors) = linalg::eigh(&multiplier);
    let m = values.len();
    if values[m - 1] < -MULTIPLIER_TOL {
        trace!("likelihood multiplier not positive semidefinite ({:.2e})", values[m - 1]);
        return None;
    }
    let keep: Vec<usize> = (0..m).filter(|&i| values[i] <= MULTIPLIER_TOL).collect();
    if keep.len() == m || keep.is_empty() {
        return None;
    }
    let kernel = CMat::from_fn(m, keep.len(), |r, c| vectors[(r, keep[c])]);

    let (weights, states) = linalg::eigh(&face.compress(witness.matrix()));
    let rank = weights.iter().filter(|&&w| w > WITNESS_RANK_TOL).count();
    if rank == 0 || rank > keep.len() {
        return None;
    }
    let range = states.columns(0, rank).into_owned();
    let outside = (&range - &kernel * (kernel.adjoint() * &range)).norm();
    if outside > KERNEL_ALIGNMENT_TOL {
        trace!("maximum-likelihood state leaves the multiplier kernel by {outside:.2e}");
        return None;
    }
    let rest = &kernel - &range * (range.adjoint() * &kernel);
    let (_, extra) = linalg::eigh(&(&rest * rest.adjoint()));
    let extra = extra.columns(0, keep.len() - rank);
    let mut support = CMat::zeros(m, keep.len());
    support.columns_mut(0, rank).copy_from(&range);
    support.columns_mut(rank, keep.len() - rank).copy_from(&extra);
    Some(support)
}

/// Data convex set with its affine projector precomputed, so repeated
/// linear solves over the same constraints share the factorization.
///
/// Outcomes with zero target probability force `ρ|k⟩ = 0`, so the set lives
/// on the orthogonal complement of those kets. The solver works in that
/// reduced space (a face of the cone), which restores strict feasibility in
/// the common case of a measured eigenbasis and keeps ADMM well conditioned.
///
/// Sets that are thin or touch the cone only on a lower-rank face without a
/// zero outcome (typically near informational completeness) can still stall
/// ADMM; those solves fall back to an interior-point method.
#[derive(Clone, Debug)]
pub struct DataConvexSet {
    constraints: ConstraintSet,
    face: Face,
}

impl DataConvexSet {
    /// Targets at or below this are treated as exact zeros.
    pub const ZERO_PROBABILITY: f64 = 1e-15;

    pub fn new(constraints: ConstraintSet) -> Result<Self> {
        let d = constraints.dim();
        let mut excluded = CMat::zeros(d, d);
        let mut any_zero = false;
        for (r, t) in constraints.records().iter().zip(constraints.targets()) {
            for (j, &p) in t.values().iter().enumerate() {
                if p <= Self::ZERO_PROBABILITY {
                    excluded += r.basis().projector(j);
                    any_zero = true;
                }
            }
        }
        let mut operators = Vec::new();
        let mut targets = Vec::new();
        for (r, t) in constraints.records().iter().zip(constraints.targets()) {
            for (j, &p) in t.values().iter().enumerate() {
                if !any_zero || p > Self::ZERO_PROBABILITY {
                    operators.push(r.basis().projector(j));
                    targets.push(p);
                }
            }
        }
        let face = if any_zero {
            let (values, vectors) = linalg::eigh(&excluded);
            let keep: Vec<usize> = (0..d).filter(|&i| values[i] <= 1e-10).collect();
            if keep.is_empty() {
                return Err(TomoError::InvalidArgument("zero-probability outcomes exclude every state".into()));
            }
            debug!("facial reduction: support dimension {} of {d}", keep.len());
            let v = CMat::from_fn(d, keep.len(), |r, c| vectors[(r, keep[c])]);
            Face::new(d, None, operators, targets)?.restrict(&v)?
        } else {
            Face::new(d, None, operators, targets)?
        };
        let face = match likelihood_face(&constraints, &face) {
            Some(w) => {
                debug!("likelihood facial reduction: support dimension {} of {}", w.ncols(), face.dim());
                face.restrict(&w)?
            }
            None => face,
        };
        Ok(Self { constraints, face })
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn dim(&self) -> usize {
        self.constraints.dim()
    }

    /// Dimension of the subspace every member of the set is supported on.
    pub fn support_dim(&self) -> usize {
        self.face.dim()
    }

    /// Dimension of the affine hull of the constraints within the support.
    pub fn free_dimensions(&self) -> usize {
        self.face.projector.free_dimensions()
    }

    /// ADMM solve of `min tr(objective · ρ)` with caller-chosen settings,
    /// falling back to the interior-point solver when ADMM hits its
    /// iteration cap. The returned point is expressed in the full space.
    pub fn minimize_linear(
        &self,
        objective: &CMat,
        settings: &AdmmSettings,
        warm: Option<&WarmStart>,
    ) -> Result<LinearSolution> {
        let sol = self.face.minimize(objective, settings, warm)?;
        if sol.converged {
            return Ok(sol);
        }
        match self.face.interior(objective) {
            Ok(ip) if ip.converged => Ok(ip),
            Ok(_) => {
                debug!("interior-point fallback did not converge");
                Ok(sol)
            }
            Err(e) => {
                debug!("interior-point fallback failed: {e}");
                Ok(sol)
            }
        }
    }

    /// `min tr(objective · ρ)` solved to certification accuracy: the state
    /// meets every constraint within [`CONSTRAINT_TOL`] and the duality gap
    /// is below [`GAP_TOL`]. ADMM tolerances are tightened with a warm
    /// restart until both hold; if ADMM stalls first, the interior-point
    /// solution is checked against the same criteria.
    pub fn minimize_certified(&self, objective: &CMat) -> Result<(LinearSolution, DensityMatrix, f64)> {
        let mut settings = AdmmSettings::default();
        let mut warm: Option<WarmStart> = None;
        let mut total_iterations = 0;
        // Accepts the solve as is, or with its point polished to
        // feasibility when the dual bound already certifies the value.
        let check = |sol: &mut LinearSolution| -> Result<(DensityMatrix, f64, bool)> {
            let state = DensityMatrix::from_psd(&sol.point)?;
            let violation = self.constraints.max_violation(&state)?;
            if violation <= CONSTRAINT_TOL && sol.gap() <= GAP_TOL {
                return Ok((state, violation, true));
            }
            if violation <= POLISH_MAX_VIOLATION {
                if let Some(point) = self.face.polish(&sol.point) {
                    let polished = DensityMatrix::from_psd(&point)?;
                    let polished_violation = self.constraints.max_violation(&polished)?;
                    let value = linalg::inner_re(objective, polished.matrix());
                    if polished_violation <= CONSTRAINT_TOL && value - sol.lower_bound <= GAP_TOL {
                        debug!("polished point: violation {violation:.2e} -> {polished_violation:.2e}");
                        sol.point = point;
                        sol.value = value;
                        return Ok((polished, polished_violation, true));
                    }
                }
            }
            Ok((state, violation, false))
        };
        loop {
            let mut sol = self.face.minimize(objective, &settings, warm.as_ref())?;
            total_iterations += sol.iterations;
            let (state, violation, ok) = check(&mut sol)?;
            if ok {
                sol.iterations = total_iterations;
                return Ok((sol, state, violation));
            }
            if !sol.converged || settings.tolerance < 1e-12 {
                debug!("ADMM could not certify (violation {violation:.2e}, gap {:.2e})", sol.gap());
                break;
            }
            debug!("tightening ADMM tolerance: violation {violation:.2e}, gap {:.2e}", sol.gap());
            settings.tolerance /= 10.0;
            settings.gap_tolerance = settings.gap_tolerance.map(|g| g / 10.0);
            warm = Some(sol.warm);
        }
        let mut sol = self.face.interior(objective)?;
        total_iterations += sol.iterations;
        let (state, violation, ok) = check(&mut sol)?;
        if ok {
            sol.iterations = total_iterations;
            return Ok((sol, state, violation));
        }
        debug!(
            "extremal solve failed: support {}, free dimensions {}, affine residual {:.2e}",
            self.support_dim(),
            self.free_dimensions(),
            sol.affine_residual,
        );
        Err(TomoError::NotConverged { solver: "extremal SDP", iterations: total_iterations, primal: violation, dual: sol.gap() })
    }

    pub fn solve_extremal(&self, probe: &ProbeState, sense: Sense) -> Result<ExtremalSolution> {
        let z = probe.state().matrix();
        let objective = match sense {
            Sense::Max => -z.clone(),
            Sense::Min => z.clone(),
        };
        let (sol, state, violation) = self.minimize_certified(&objective)?;
        Ok(ExtremalSolution {
            value: state.expectation(z),
            state,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            gap: sol.gap(),
            violation,
            iterations: sol.iterations,
        })
    }
}

/// Extremizes `tr(ρ Z)` over the data convex set of `cs`.
pub fn solve_extremal(cs: &ConstraintSet, probe: &ProbeState, sense: Sense) -> Result<ExtremalSolution> {
    DataConvexSet::new(cs.clone())?.solve_extremal(probe, sense)
}

#[derive(Clone, Debug)]
pub struct CertificationResult {
    pub f_max: f64,
    pub f_min: f64,
    pub rho_max: DensityMatrix,
    pub rho_min: DensityMatrix,
    pub s_cvx: f64,
    /// Width used to normalize `s_cvx`.
    pub baseline: f64,
    pub is_ic: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

impl CertificationResult {
    pub fn width(&self) -> f64 {
        (self.f_max - self.f_min).max(0.0)
    }

    /// The estimator reported on certification.
    pub fn estimator(&self) -> &DensityMatrix {
        &self.rho_max
    }

    /// Trace distance between the two extremal states.
    pub fn extremal_distance(&self) -> f64 {
        trace_distance(&self.rho_max, &self.rho_min).unwrap_or(f64::NAN)
    }
}

fn extremize(set: &DataConvexSet, probe: &ProbeState) -> Result<(ExtremalSolution, ExtremalSolution)> {
    let max = set.solve_extremal(probe, Sense::Max)?;
    let min = set.solve_extremal(probe, Sense::Min)?;
    Ok((max, min))
}

fn assemble(max: ExtremalSolution, min: ExtremalSolution, s_cvx: f64, baseline: f64, epsilon: f64) -> CertificationResult {
    CertificationResult {
        f_max: max.value,
        f_min: min.value,
        s_cvx,
        baseline,
        is_ic: s_cvx < epsilon,
        primal_residual: max.primal_residual.max(min.primal_residual),
        dual_residual: max.dual_residual.max(min.dual_residual),
        gap: max.gap.max(min.gap),
        iterations: max.iterations + min.iterations,
        rho_max: max.state,
        rho_min: min.state,
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TomoError::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// One certification step against a known first-step width `baseline`.
pub fn certify_set(set: &DataConvexSet, probe: &ProbeState, baseline: f64, epsilon: f64) -> Result<CertificationResult> {
    check_epsilon(epsilon)?;
    if !(baseline > 0.0) {
        return Err(TomoError::InvalidArgument(format!("baseline width must be positive, got {baseline}")));
    }
    let (max, min) = extremize(set, probe)?;
    let s_cvx = (max.value - min.value).max(0.0) / baseline;
    Ok(assemble(max, min, s_cvx, baseline, epsilon))
}

pub fn certify(cs: &ConstraintSet, probe: &ProbeState, baseline: f64, epsilon: f64) -> Result<CertificationResult> {
    certify_set(&DataConvexSet::new(cs.clone())?, probe, baseline, epsilon)
}

/// Stateful certifier for one tomography run: holds the probe for the
/// whole run and fixes the normalizing width at the first step.
///
/// When the first data set is already a single point (for instance the
/// eigenbasis of a pure state), every probe gives zero width. The probe is
/// redrawn up to [`PROBE_RETRIES`] times; if the width stays degenerate the
/// spread of `Z` over the whole state space is used as the normalization,
/// which certifies the point immediately.
#[derive(Clone, Debug)]
pub struct Certifier {
    probe: ProbeState,
    epsilon: f64,
    baseline: Option<f64>,
    degenerate: bool,
}

impl Certifier {
    pub fn new(probe: ProbeState, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { probe, epsilon, baseline: None, degenerate: false })
    }

    pub fn probe(&self) -> &ProbeState {
        &self.probe
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    /// Whether the first step fell back to the probe-spread normalization.
    pub fn degenerate_baseline(&self) -> bool {
        self.degenerate
    }

    pub fn certify<R: Rng + ?Sized>(&mut self, set: &DataConvexSet, rng: &mut R) -> Result<CertificationResult> {
        if let Some(baseline) = self.baseline {
            return certify_set(set, &self.probe, baseline, self.epsilon);
        }
        let mut attempt = 0;
        loop {
            let (max, min) = extremize(set, &self.probe)?;
            let width = max.value - min.value;
            if width > DEGENERATE_WIDTH {
                self.baseline = Some(width);
                return Ok(assemble(max, min, 1.0, width, self.epsilon));
            }
            if attempt == PROBE_RETRIES {
                let spread = self.probe.spread();
                warn!("first-step width {width:.2e} stays degenerate; normalizing by probe spread {spread:.3e}");
                self.baseline = Some(spread);
                self.degenerate = true;
                let s_cvx = width.max(0.0) / spread;
                return Ok(assemble(max, min, s_cvx, spread, self.epsilon));
            }
            attempt += 1;
            debug!("degenerate first-step width {width:.2e}; redrawing probe ({attempt}/{PROBE_RETRIES})");
            self.probe = probe_state(self.probe.dim(), rng)?;
        }
    }
}
