//! Maximum-likelihood projection of measured frequencies onto physical
//! probabilities.
//!
//! The multinomial log-likelihood `Σ n_jk ln tr(ρ Π_jk)` is maximized over
//! the state space by accelerated projected gradient ascent. The projection
//! is the Frobenius-nearest density matrix (eigenvalues projected onto the
//! simplex). Step sizes come from backtracking on the quadratic upper
//! bound; momentum is reset whenever it points against the last step.
//!
//! The Born probabilities of the resulting state define the targets of the
//! data convex set used for certification.

use log::debug;
use num_complex::Complex64 as C64;

use crate::error::{Result, TomoError};
use crate::linalg::{self, CMat};
use crate::measure::{born_probabilities, MeasurementRecord, ProbabilityVector};
use crate::state::{DensityMatrix, OrthonormalBasis};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct MlSettings {
    pub max_iterations: usize,
    /// Stationarity residual `‖ρ − P(ρ + ∇ℓ)‖_F` (normalized weights) at
    /// which the ascent stops.
    pub tolerance: f64,
}

impl Default for MlSettings {
    fn default() -> Self {
        Self { max_iterations: 100_000, tolerance: 1e-9 }
    }
}

#[derive(Clone, Debug)]
pub struct MlEstimate {
    pub state: DensityMatrix,
    /// `Σ n ln p` in the records' own weight scale.
    pub log_likelihood: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Data convex set: every state reproducing `targets` on the recorded bases.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    dim: usize,
    records: Vec<MeasurementRecord>,
    targets: Vec<ProbabilityVector>,
    tolerance: f64,
    witness: Option<DensityMatrix>,
}

impl ConstraintSet {
    /// Default equality slack.
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(records: Vec<MeasurementRecord>, targets: Vec<ProbabilityVector>) -> Result<Self> {
        let dim = records.first().map(|r| r.basis().dim()).ok_or_else(|| {
            TomoError::InvalidArgument("constraint set needs at least one record; use unconstrained()".into())
        })?;
        if records.len() != targets.len() {
            return Err(TomoError::InvalidArgument("one target vector per record is required".into()));
        }
        for (r, t) in records.iter().zip(&targets) {
            if r.basis().dim() != dim {
                return Err(TomoError::DimensionMismatch { expected: dim, found: r.basis().dim() });
            }
            if t.len() != dim {
                return Err(TomoError::DimensionMismatch { expected: dim, found: t.len() });
            }
        }
        Ok(Self { dim, records, targets, tolerance: Self::TOLERANCE, witness: None })
    }

    /// Exact-probability constraints, bypassing the likelihood fit.
    pub fn exact(records: Vec<MeasurementRecord>) -> Result<Self> {
        let targets =
            records.iter().map(|r| ProbabilityVector::new(r.frequencies().to_vec())).collect::<Result<Vec<_>>>()?;
        Self::new(records, targets)
    }

    /// Only positivity and unit trace.
    pub fn unconstrained(dim: usize) -> Self {
        Self { dim, records: Vec::new(), targets: Vec::new(), tolerance: Self::TOLERANCE, witness: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of measured bases `k`.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn targets(&self) -> &[ProbabilityVector] {
        &self.targets
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// A state reproducing the targets exactly, when one is known.
    pub fn witness(&self) -> Option<&DensityMatrix> {
        self.witness.as_ref()
    }

    pub fn bases(&self) -> impl Iterator<Item = &OrthonormalBasis> {
        self.records.iter().map(|r| r.basis())
    }

    /// Largest `|tr(ρ Π_jk) − p_jk|` over all constraints.
    pub fn max_violation(&self, rho: &DensityMatrix) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (r, t) in self.records.iter().zip(&self.targets) {
            let p = born_probabilities(rho, r.basis())?;
            worst = worst.max(p.values().iter().zip(t.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        Ok(worst)
    }
}

/// `Σ_k Σ_j n_jk ln max(p_jk, floor)`, skipping zero-weight outcomes.
pub fn log_likelihood(rho: &DensityMatrix, records: &[MeasurementRecord]) -> Result<f64> {
    let mut total = 0.0;
    for r in records {
        let p = born_probabilities(rho, r.basis())?;
        for (w, &pj) in r.weights().iter().zip(p.values()) {
            if *w > 0.0 {
                total += w * pj.max(PROB_FLOOR).ln();
            }
        }
    }
    Ok(total)
}

pub fn ml_state(records: &[MeasurementRecord]) -> Result<MlEstimate> {
    ml_state_with(records, &MlSettings::default())
}

/// Outcomes with non-zero weight, stacked for fast probability evaluation.
struct Outcomes {
    kets: CMat,
    /// Normalized to unit sum.
    weights: Vec<f64>,
}

impl Outcomes {
    fn new(records: &[MeasurementRecord]) -> Result<Self> {
        let dim = records[0].basis().dim();
        let mut columns: Vec<Vec<C64>> = Vec::new();
        let mut weights = Vec::new();
        for r in records {
            if r.basis().dim() != dim {
                return Err(TomoError::DimensionMismatch { expected: dim, found: r.basis().dim() });
            }
            for (j, w) in r.weights().into_iter().enumerate() {
                if w > 0.0 {
                    columns.push(r.basis().ket(j));
                    weights.push(w);
                }
            }
        }
        let total_weight: f64 = weights.iter().sum();
        if !(total_weight > 0.0) {
            return Err(TomoError::InvalidArgument("records carry no data".into()));
        }
        let weights = weights.iter().map(|w| w / total_weight).collect();
        let kets = CMat::from_fn(dim, columns.len(), |r, c| columns[c][r]);
        Ok(Self { kets, weights })
    }

    fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        let rk = rho * &self.kets;
        (0..self.kets.ncols()).map(|j| self.kets.column(j).dotc(&rk.column(j)).re).collect()
    }

    /// Negative normalized log-likelihood; `None` outside the domain.
    fn objective(&self, probs: &[f64]) -> Option<f64> {
        let mut f = 0.0;
        for (&w, &p) in self.weights.iter().zip(probs) {
            if !(p > 0.0) {
                return None;
            }
            f -= w * p.max(PROB_FLOOR).ln();
        }
        Some(f)
    }

    /// `f(from + step) − f(from)` evaluated as `−Σ w ln(1 + Δp/p)` with the
    /// probability changes `Δp` taken from the step itself, so the result
    /// stays accurate far below the rounding level of `f`.
    fn objective_change(&self, from: &[f64], delta: &[f64]) -> Option<f64> {
        let mut df = 0.0;
        for ((&w, &p0), &dp) in self.weights.iter().zip(from).zip(delta) {
            if !(p0 + dp > 0.0) {
                return None;
            }
            df -= w * (dp / p0.max(PROB_FLOOR)).ln_1p();
        }
        Some(df)
    }

    fn gradient(&self, probs: &[f64]) -> CMat {
        let d = self.kets.nrows();
        let scaled = CMat::from_fn(d, self.kets.ncols(), |r, c| {
            self.kets[(r, c)] * (-self.weights[c] / probs[c].max(PROB_FLOOR))
        });
        linalg::hermitize(&(scaled * self.kets.adjoint()))
    }

    fn stationarity(&self, rho: &CMat, probs: &[f64]) -> f64 {
        let g = self.gradient(probs);
        (rho - linalg::project_state_space(&(rho - g))).norm()
    }
}

pub fn ml_state_with(records: &[MeasurementRecord], settings: &MlSettings) -> Result<MlEstimate> {
    if records.is_empty() {
        return Err(TomoError::InvalidArgument("maximum likelihood needs at least one record".into()));
    }
    let dim = records[0].basis().dim();
    let outcomes = Outcomes::new(records)?;

    let mut x = CMat::identity(dim, dim).unscale(dim as f64);
    let mut px = outcomes.probabilities(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut lipschitz = 1.0f64;
    let mut residual = outcomes.stationarity(&x, &px);
    let mut iterations = 0;

    while residual >= settings.tolerance && iterations < settings.max_iterations {
        iterations += 1;
        let mut py = outcomes.probabilities(&y);
        if outcomes.objective(&py).is_none() {
            // extrapolation left the domain; restart momentum
            y = x.clone();
            py = px.clone();
            t = 1.0;
        }
        let g = outcomes.gradient(&py);
        let (x_new, p_new) = loop {
            let candidate = linalg::project_state_space(&(&y - g.unscale(lipschitz)));
            let step = &candidate - &y;
            let dp = outcomes.probabilities(&step);
            if let Some(df) = outcomes.objective_change(&py, &dp) {
                let model = linalg::inner_re(&g, &step) + 0.5 * lipschitz * step.norm_squared();
                if df <= model {
                    let pc = outcomes.probabilities(&candidate);
                    break (candidate, pc);
                }
            }
            lipschitz *= 2.0;
            if lipschitz > 1e20 {
                return Err(TomoError::NotConverged {
                    solver: "maximum-likelihood line search",
                    iterations,
                    primal: residual,
                    dual: 0.0,
                });
            }
        };
        lipschitz = (lipschitz / 1.5).max(1e-3);

        // gradient-based restart: momentum pointing uphill
        let restart = linalg::inner_re(&(&y - &x_new), &(&x_new - &x)) > 0.0;
        if restart {
            t = 1.0;
            y = x_new.clone();
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_new + (&x_new - &x).scale((t - 1.0) / t_new);
            t = t_new;
        }
        x = x_new;
        px = p_new;
        residual = outcomes.stationarity(&x, &px);
    }
    if residual >= settings.tolerance {
        return Err(TomoError::NotConverged { solver: "maximum likelihood", iterations, primal: residual, dual: 0.0 });
    }
    debug!("ml: {iterations} iterations, stationarity residual {residual:.2e}");
    let state = DensityMatrix::from_psd(&x)?;
    let log_likelihood = log_likelihood(&state, records)?;
    Ok(MlEstimate { state, log_likelihood, residual, iterations })
}

/// Physical target probabilities for the accumulated records.
///
/// Exact records and single-basis data are already physical and are used
/// as they are; otherwise the targets are the Born probabilities of the
/// maximum-likelihood state.
pub fn ml_probabilities(records: &[MeasurementRecord]) -> Result<ConstraintSet> {
    ml_probabilities_with(records, &MlSettings::default())
}

pub fn ml_probabilities_with(records: &[MeasurementRecord], settings: &MlSettings) -> Result<ConstraintSet> {
    if records.is_empty() {
        return Err(TomoError::InvalidArgument("maximum likelihood needs at least one record".into()));
    }
    if records.len() == 1 || records.iter().all(|r| r.is_exact()) {
        return ConstraintSet::exact(records.to_vec());
    }
    let estimate = ml_state_with(records, settings)?;
    let targets = records.iter().map(|r| born_probabilities(&estimate.state, r.basis())).collect::<Result<Vec<_>>>()?;
    let mut set = ConstraintSet::new(records.to_vec(), targets)?;
    set.witness = Some(estimate.state);
    Ok(set)
}
