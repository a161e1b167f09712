//! Adaptive choice of the next measurement basis.
//!
//! ACT measures the eigenbasis of a minimum-entropy member `ρ̂` of the
//! current data convex set; pACT measures the product basis closest to that
//! eigenbasis. Both refuse to repeat a basis that was already measured.
//!
//! Entropy is concave, so it is minimized by majorization-minimization:
//! each step minimizes the linearization `tr(ρ ∇S_μ(ρ_t))` over the set,
//! which never increases the smoothed entropy
//! `S_μ(ρ) = −tr ρ log(ρ + μ)`. The smoothing `μ` is lowered in stages so
//! early steps can still move between faces of the set.

use log::{debug, trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, TomoError};
use crate::icc::{DataConvexSet, CONSTRAINT_TOL};
use crate::linalg::{self, CMat};
use crate::sdp::{AdmmSettings, WarmStart};
use crate::state::{von_neumann_entropy, DensityMatrix, OrthonormalBasis, QubitFactorization};

/// Two kets count as the same outcome when `|⟨a|b⟩|²` reaches `1 − ALIGN_TOL`.
pub const ALIGN_TOL: f64 = 1e-8;
/// Size of the random unitary kick applied to a basis that repeats a
/// measured one.
pub const PERTURBATION: f64 = 1e-2;
/// Eigenvalues above this count towards the reported numerical rank.
pub const RANK_CUTOFF: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EntropySettings {
    /// Smoothing parameters, applied in order.
    pub mu_schedule: Vec<f64>,
    /// Majorization steps allowed per smoothing stage.
    pub steps_per_stage: usize,
    /// A stage ends once consecutive iterates move less than this
    /// (Frobenius norm).
    pub step_tolerance: f64,
    /// Extra starting points drawn as extreme points of random linear
    /// functionals.
    pub random_starts: usize,
    pub admm: AdmmSettings,
}

impl Default for EntropySettings {
    fn default() -> Self {
        Self {
            mu_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12],
            steps_per_stage: 25,
            step_tolerance: 1e-7,
            random_starts: 2,
            admm: AdmmSettings { gap_tolerance: None, ..AdmmSettings::default() },
        }
    }
}

#[derive(Clone, Debug)]
pub struct EntropyEstimate {
    pub state: DensityMatrix,
    pub entropy: f64,
    /// Eigenvalues above [`RANK_CUTOFF`].
    pub rank: usize,
    /// Linear solves spent across all starts.
    pub solves: usize,
}

/// `S_μ(ρ) = −Σ λ ln(λ + μ)`.
pub fn smoothed_entropy(values: &[f64], mu: f64) -> f64 {
    values.iter().map(|&v| v.max(0.0)).map(|v| -v * (v + mu).ln()).sum()
}

/// Gradient of [`smoothed_entropy`] as a Hermitian matrix.
pub fn smoothed_entropy_gradient(rho: &CMat, mu: f64) -> CMat {
    linalg::spectral_map(rho, |v| {
        let v = v.max(0.0);
        -((v + mu).ln() + v / (v + mu))
    })
}

struct Descent {
    point: CMat,
    solves: usize,
}

fn majorize_minimize(
    set: &DataConvexSet,
    start: &CMat,
    settings: &EntropySettings,
    warm: &mut Option<WarmStart>,
) -> Result<Descent> {
    let mut x = start.clone();
    let mut solves = 0;
    for &mu in &settings.mu_schedule {
        let mut value = smoothed_entropy(&linalg::eigvalsh(&x), mu);
        for _ in 0..settings.steps_per_stage {
            let g = smoothed_entropy_gradient(&x, mu);
            let sol = set.minimize_linear(&g, &settings.admm, warm.as_ref())?;
            solves += 1;
            *warm = Some(sol.warm);
            let next_value = smoothed_entropy(&linalg::eigvalsh(&sol.point), mu);
            let moved = (&sol.point - &x).norm();
            trace!("mm: mu {mu:.0e} S_mu {value:.6e} -> {next_value:.6e}, moved {moved:.2e}");
            if next_value > value + 1e-12 {
                // inexact solve landed above the current iterate
                break;
            }
            x = sol.point;
            value = next_value;
            if moved < settings.step_tolerance {
                break;
            }
        }
    }
    Ok(Descent { point: x, solves })
}

/// Low-entropy member of the data convex set.
///
/// Majorization-minimization is run from every state in `starts` and from
/// `settings.random_starts` extreme points of random linear functionals;
/// the lowest-entropy result is returned. Starting points must be feasible
/// and should not be derived from the certification probe.
pub fn min_entropy_estimator<R: Rng + ?Sized>(
    set: &DataConvexSet,
    starts: &[DensityMatrix],
    settings: &EntropySettings,
    rng: &mut R,
) -> Result<EntropyEstimate> {
    let d = set.dim();
    let mut initial: Vec<CMat> = starts.iter().map(|s| s.matrix().clone()).collect();
    let mut solves = 0;
    let random = if initial.is_empty() { settings.random_starts.max(1) } else { settings.random_starts };
    for _ in 0..random {
        let objective = linalg::random_hermitian(d, rng);
        let sol = set.minimize_linear(&objective, &settings.admm, None)?;
        solves += 1;
        initial.push(sol.point);
    }

    let mut best: Option<(f64, DensityMatrix)> = None;
    let mut warm = None;
    for start in &initial {
        let descent = majorize_minimize(set, start, settings, &mut warm)?;
        solves += descent.solves;
        let state = DensityMatrix::from_psd(&descent.point)?;
        let entropy = von_neumann_entropy(&state);
        debug!("entropy descent: S = {entropy:.6e} after {} solves", descent.solves);
        if best.as_ref().is_none_or(|(s, _)| entropy < *s) {
            best = Some((entropy, state));
        }
        if entropy < 1e-10 {
            break;
        }
    }
    let (entropy, state) = best.expect("at least one start");
    let violation = set.constraints().max_violation(&state)?;
    if violation > CONSTRAINT_TOL {
        return Err(TomoError::NotConverged {
            solver: "entropy minimization",
            iterations: solves,
            primal: violation,
            dual: 0.0,
        });
    }
    let rank = state.rank(RANK_CUTOFF);
    Ok(EntropyEstimate { state, entropy, rank, solves })
}

/// Whether every ket of `a` is aligned with some ket of `b`.
pub fn bases_coincide(a: &OrthonormalBasis, b: &OrthonormalBasis) -> bool {
    if a.dim() != b.dim() {
        return false;
    }
    let overlaps = a.kets().adjoint() * b.kets();
    (0..a.dim()).all(|i| (0..b.dim()).any(|j| overlaps[(i, j)].norm_sqr() >= 1.0 - ALIGN_TOL))
}

fn is_fresh(basis: &OrthonormalBasis, measured: &[OrthonormalBasis]) -> bool {
    measured.iter().all(|m| !bases_coincide(basis, m))
}

/// Eigenbasis of `rho`, columns ordered by descending eigenvalue.
pub fn eigenbasis(rho: &DensityMatrix) -> Result<OrthonormalBasis> {
    let (_, vectors) = rho.eigen();
    OrthonormalBasis::new(vectors, "eigen")
}

/// True when the eigenbasis of `rho` differs from every measured basis.
pub fn eigenbasis_distinctness(rho: &DensityMatrix, measured: &[OrthonormalBasis]) -> Result<bool> {
    Ok(is_fresh(&eigenbasis(rho)?, measured))
}

/// Next ACT basis: the eigenbasis of `rho`, kicked by `exp(iεH)` for a
/// random Hermitian `H` while it repeats a measured basis.
pub fn act_next_basis<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    measured: &[OrthonormalBasis],
    rng: &mut R,
) -> Result<OrthonormalBasis> {
    let mut basis = eigenbasis(rho)?;
    while !is_fresh(&basis, measured) {
        debug!("eigenbasis repeats a measured basis; perturbing");
        let h = linalg::random_hermitian(rho.dim(), rng);
        let kicked = linalg::unitary_exp(&h, PERTURBATION) * basis.kets();
        basis = OrthonormalBasis::new(kicked, "eigen-perturbed")?;
    }
    Ok(basis)
}

#[derive(Clone, Debug)]
pub struct PactSettings {
    pub restarts: usize,
    /// Grid points of the coarse scan along each angle.
    pub scan_points: usize,
    pub golden_iterations: usize,
    pub max_sweeps: usize,
    /// A sweep improving the objective by less than this ends the descent.
    pub sweep_tolerance: f64,
}

impl Default for PactSettings {
    fn default() -> Self {
        Self { restarts: 20, scan_points: 12, golden_iterations: 40, max_sweeps: 60, sweep_tolerance: 1e-12 }
    }
}

/// Product basis chosen by pACT together with its local factors.
#[derive(Clone, Debug)]
pub struct ProductChoice {
    pub basis: OrthonormalBasis,
    /// One unitary per subsystem; `basis` is their Kronecker product,
    /// subsystem 0 leftmost.
    pub locals: Vec<CMat>,
    /// Eigenvalue-weighted alignment with the eigenbasis of `ρ̂`.
    pub objective: f64,
}

/// Single-qubit unitary `U(θ, φ, λ)` (global phase dropped).
pub fn local_unitary(theta: f64, phi: f64, lambda: f64) -> CMat {
    let (s, c) = (0.5 * theta).sin_cos();
    let e = |a: f64| num_complex::Complex64::from_polar(1.0, a);
    CMat::from_row_slice(
        2,
        2,
        &[e(0.0) * c, -e(lambda) * s, e(phi) * s, e(phi + lambda) * c],
    )
}

pub fn kron_all(locals: &[CMat]) -> CMat {
    locals.iter().fold(CMat::identity(1, 1), |acc, u| linalg::kron(&acc, u))
}

/// `Σ_j λ_j |⟨v_j|w_σ(j)⟩|²`, where eigenvectors are matched to columns of
/// `w` greedily in order of decreasing eigenvalue.
pub fn alignment_objective(values: &[f64], vectors: &CMat, w: &CMat) -> f64 {
    let overlaps = vectors.adjoint() * w;
    let d = w.ncols();
    let mut used = vec![false; d];
    let mut total = 0.0;
    for (j, &lambda) in values.iter().enumerate() {
        if lambda <= 0.0 {
            break;
        }
        let (best, o) = (0..d)
            .filter(|&c| !used[c])
            .map(|c| (c, overlaps[(j, c)].norm_sqr()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        used[best] = true;
        total += lambda * o;
    }
    total
}

struct Target {
    values: Vec<f64>,
    vectors: CMat,
}

impl Target {
    fn objective(&self, angles: &[f64]) -> f64 {
        let locals: Vec<CMat> = angles.chunks(3).map(|a| local_unitary(a[0], a[1], a[2])).collect();
        alignment_objective(&self.values, &self.vectors, &kron_all(&locals))
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Coordinate ascent: coarse scan of one angle, then golden-section search
/// around the best grid point.
fn coordinate_ascent(target: &Target, mut angles: Vec<f64>, settings: &PactSettings) -> (Vec<f64>, f64) {
    let tau = std::f64::consts::TAU;
    let h = tau / settings.scan_points as f64;
    let mut best = target.objective(&angles);
    for _ in 0..settings.max_sweeps {
        let before = best;
        for i in 0..angles.len() {
            let eval = |a: f64| {
                let mut trial = angles.clone();
                trial[i] = a;
                target.objective(&trial)
            };
            let mut center = angles[i];
            let mut center_value = best;
            for s in 1..settings.scan_points {
                let a = angles[i] + h * s as f64;
                let v = eval(a);
                if v > center_value {
                    center = a;
                    center_value = v;
                }
            }
            let (mut lo, mut hi) = (center - h, center + h);
            let mut x1 = hi - GOLDEN * (hi - lo);
            let mut x2 = lo + GOLDEN * (hi - lo);
            let mut f1 = eval(x1);
            let mut f2 = eval(x2);
            for _ in 0..settings.golden_iterations {
                if f1 >= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - GOLDEN * (hi - lo);
                    f1 = eval(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + GOLDEN * (hi - lo);
                    f2 = eval(x2);
                }
            }
            let (x, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
            if f > center_value {
                center = x;
                center_value = f;
            }
            if center_value > best {
                angles[i] = center.rem_euclid(tau);
                best = center_value;
            }
        }
        if best - before < settings.sweep_tolerance {
            break;
        }
    }
    (angles, best)
}

/// Product basis maximizing [`alignment_objective`] against the eigenbasis
/// of `rho`, best of `settings.restarts` random restarts.
pub fn nearest_product_basis<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    factorization: &QubitFactorization,
    settings: &PactSettings,
    rng: &mut R,
) -> Result<ProductChoice> {
    if !factorization.is_qubits() {
        return Err(TomoError::InvalidArgument(format!(
            "product-basis search supports qubit factorizations only, got {factorization}"
        )));
    }
    if factorization.dim() != rho.dim() {
        return Err(TomoError::DimensionMismatch { expected: rho.dim(), found: factorization.dim() });
    }
    let (values, vectors) = rho.eigen();
    let target = Target { values, vectors };
    let n = factorization.num_subsystems();
    let seeds: Vec<u64> = (0..settings.restarts.max(1)).map(|_| rng.random()).collect();
    let runs: Vec<(Vec<f64>, f64)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut local_rng = ChaCha8Rng::seed_from_u64(seed);
            let start: Vec<f64> = (0..3 * n).map(|_| local_rng.random::<f64>() * std::f64::consts::TAU).collect();
            coordinate_ascent(&target, start, settings)
        })
        .collect();
    let (angles, objective) = runs
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("at least one restart");
    let locals: Vec<CMat> = angles.chunks(3).map(|a| local_unitary(a[0], a[1], a[2])).collect();
    let basis = OrthonormalBasis::new(kron_all(&locals), "product")?;
    Ok(ProductChoice { basis, locals, objective })
}

/// Next pACT basis. A choice that repeats a measured basis is kicked by
/// independent local unitaries `exp(iεH_i)`, which keeps it a product
/// basis.
pub fn pact_next_basis<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    factorization: &QubitFactorization,
    measured: &[OrthonormalBasis],
    settings: &PactSettings,
    rng: &mut R,
) -> Result<ProductChoice> {
    let mut choice = nearest_product_basis(rho, factorization, settings, rng)?;
    while !is_fresh(&choice.basis, measured) {
        debug!("product basis repeats a measured basis; perturbing");
        for u in choice.locals.iter_mut() {
            let h = linalg::random_hermitian(2, rng);
            *u = linalg::unitary_exp(&h, PERTURBATION) * &*u;
        }
        choice.basis = OrthonormalBasis::new(kron_all(&choice.locals), "product-perturbed")?;
        let (values, vectors) = rho.eigen();
        choice.objective = alignment_objective(&values, &vectors, choice.basis.kets());
    }
    Ok(choice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{born_probabilities, MeasurementRecord};
    use crate::mle::ConstraintSet;
    use crate::state::{random_haar_basis, random_rank_r_state, random_unitary};
    use num_complex::Complex64 as C64;

    fn exact_set(rho: &DensityMatrix, bases: &[OrthonormalBasis]) -> DataConvexSet {
        let recs =
            bases.iter().map(|b| MeasurementRecord::exact(b.clone(), born_probabilities(rho, b).unwrap()).unwrap()).collect();
        DataConvexSet::new(ConstraintSet::exact(recs).unwrap()).unwrap()
    }

    #[test]
    fn smoothed_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_rank_r_state(3, 3, &mut rng).unwrap();
        let dir = linalg::random_hermitian(3, &mut rng);
        let mu = 1e-3;
        let f = |m: &CMat| smoothed_entropy(&linalg::eigvalsh(m), mu);
        let t = 1e-6;
        let fd = (f(&(rho.matrix() + dir.scale(t))) - f(&(rho.matrix() - dir.scale(t)))) / (2.0 * t);
        let analytic = linalg::inner_re(&smoothed_entropy_gradient(rho.matrix(), mu), &dir);
        assert!((fd - analytic).abs() < 1e-6, "{fd} vs {analytic}");
    }

    #[test]
    fn pure_eigenbasis_gives_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_rank_r_state(4, 1, &mut rng).unwrap();
        let set = exact_set(&rho, &[eigenbasis(&rho).unwrap()]);
        let est = min_entropy_estimator(&set, &[], &EntropySettings::default(), &mut rng).unwrap();
        assert!(est.entropy.abs() < 1e-8);
        assert!(crate::state::trace_distance(&est.state, &rho).unwrap() < 1e-6);
    }

    #[test]
    fn balanced_qubit_record_gives_pure_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = MeasurementRecord::exact(
            OrthonormalBasis::computational(2),
            crate::measure::ProbabilityVector::new(vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let set = DataConvexSet::new(ConstraintSet::exact(vec![rec]).unwrap()).unwrap();
        let start = DensityMatrix::maximally_mixed(2);
        let est = min_entropy_estimator(&set, &[start], &EntropySettings::default(), &mut rng).unwrap();
        assert!(est.entropy < 1e-6, "{}", est.entropy);
        assert_eq!(est.rank, 1);
        let m = est.state.matrix();
        assert!((m[(0, 0)].re - 0.5).abs() < 1e-7 && (m[(0, 1)].norm() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn single_record_estimate_beats_diagonal_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_rank_r_state(4, 2, &mut rng).unwrap();
        let b = random_haar_basis(4, &mut rng).unwrap();
        let set = exact_set(&rho, std::slice::from_ref(&b));
        let p = born_probabilities(&rho, &b).unwrap();
        let diag = DensityMatrix::diagonal(p.values()).unwrap().rotated(b.kets()).unwrap();
        let est = min_entropy_estimator(&set, &[diag.clone()], &EntropySettings::default(), &mut rng).unwrap();
        assert!(est.entropy <= von_neumann_entropy(&diag) + 1e-9);
    }

    #[test]
    fn eigenbasis_of_diagonal_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = DensityMatrix::diagonal(&[0.1, 0.6, 0.3]).unwrap();
        let b = act_next_basis(&rho, &[], &mut rng).unwrap();
        let order = [1, 2, 0];
        for (col, &e) in order.iter().enumerate() {
            assert!((b.kets()[(e, col)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_estimate_leads_with_its_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_unitary(4, &mut rng);
        let psi: Vec<C64> = u.column(0).iter().copied().collect();
        let rho = DensityMatrix::pure(&psi).unwrap();
        let b = act_next_basis(&rho, &[], &mut rng).unwrap();
        let overlap = b.kets().column(0).dotc(&u.column(0)).norm_sqr();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measured_eigenbasis_is_perturbed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mixed = DensityMatrix::maximally_mixed(3);
        let first = act_next_basis(&mixed, &[], &mut rng).unwrap();
        assert!(!eigenbasis_distinctness(&mixed, std::slice::from_ref(&first)).unwrap());
        let second = act_next_basis(&mixed, std::slice::from_ref(&first), &mut rng).unwrap();
        assert!(!bases_coincide(&second, &first));
        assert!(linalg::unitarity_error(second.kets()) < 1e-10);
    }

    #[test]
    fn diagonal_state_of_measured_basis_coincides() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = random_haar_basis(4, &mut rng).unwrap();
        let diag = DensityMatrix::diagonal(&[0.4, 0.3, 0.2, 0.1]).unwrap().rotated(b.kets()).unwrap();
        assert!(!eigenbasis_distinctness(&diag, std::slice::from_ref(&b)).unwrap());
        let generic = random_rank_r_state(4, 2, &mut rng).unwrap();
        assert!(eigenbasis_distinctness(&generic, std::slice::from_ref(&b)).unwrap());
    }

    #[test]
    fn product_eigenbasis_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = QubitFactorization::qubits(2).unwrap();
        let rho = DensityMatrix::diagonal(&[0.5, 0.3, 0.15, 0.05]).unwrap();
        let choice = nearest_product_basis(&rho, &f, &PactSettings::default(), &mut rng).unwrap();
        assert!((choice.objective - 1.0).abs() < 1e-6, "{}", choice.objective);
        assert!((kron_all(&choice.locals) - choice.basis.kets()).norm() < 1e-10);
    }

    #[test]
    fn bell_state_overlap_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        let bell = DensityMatrix::pure(&[C64::new(h, 0.0), z, z, C64::new(h, 0.0)]).unwrap();
        let f = QubitFactorization::qubits(2).unwrap();
        let choice = nearest_product_basis(&bell, &f, &PactSettings::default(), &mut rng).unwrap();
        assert!((choice.objective - 0.5).abs() < 1e-6, "{}", choice.objective);
    }

    #[test]
    fn pact_rejects_non_qubit_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = DensityMatrix::maximally_mixed(6);
        let f = QubitFactorization::new(vec![2, 3]).unwrap();
        assert!(nearest_product_basis(&rho, &f, &PactSettings::default(), &mut rng).is_err());
        let f4 = QubitFactorization::qubits(2).unwrap();
        assert!(nearest_product_basis(&rho, &f4, &PactSettings::default(), &mut rng).is_err());
    }

    #[test]
    fn repeated_product_basis_stays_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = QubitFactorization::qubits(2).unwrap();
        let rho = DensityMatrix::diagonal(&[0.5, 0.3, 0.15, 0.05]).unwrap();
        let measured = [OrthonormalBasis::computational(4)];
        let choice = pact_next_basis(&rho, &f, &measured, &PactSettings::default(), &mut rng).unwrap();
        assert!(!bases_coincide(&choice.basis, &measured[0]));
        assert!((kron_all(&choice.locals) - choice.basis.kets()).norm() < 1e-10);
    }
}
