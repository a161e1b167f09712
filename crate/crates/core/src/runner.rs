//! The tomography loop and benchmark sweeps.
//!
//! Each step measures one basis, projects the accumulated frequencies onto
//! maximum-likelihood probabilities, certifies the resulting data convex
//! set and, unless it is already a single point, picks the next basis.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{self, EntropySettings};
use crate::error::{Result, TomoError};
use crate::icc::{probe_state, Certifier, DataConvexSet, ProbeState, DEFAULT_EPSILON};
use crate::measure::{sample_record, MeasurementRecord, NoiseModel, Shots};
use crate::mle::ml_probabilities;
use crate::schemes::{k0_lower_bound, reference_counts, BasisSchedule, SchemeKind};
use crate::state::{fidelity, random_rank_r_state, von_neumann_entropy, DensityMatrix, OrthonormalBasis, QubitFactorization};

/// Shots per basis when none are given.
pub const DEFAULT_SHOTS: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: usize,
    /// Rank of the simulated true state.
    pub rank: usize,
    pub scheme: SchemeKind,
    pub shots: Shots,
    #[serde(default)]
    pub noise: NoiseModel,
    pub epsilon: f64,
    /// Basis budget; `d + 1` when unset.
    pub max_bases: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub factorization: Option<QubitFactorization>,
}

impl RunConfig {
    pub fn new(dim: usize, rank: usize, scheme: SchemeKind) -> Self {
        Self {
            dim,
            rank,
            scheme,
            shots: Shots::Finite(DEFAULT_SHOTS),
            noise: NoiseModel::Multinomial,
            epsilon: DEFAULT_EPSILON,
            max_bases: None,
            trials: 1,
            seed: 0,
            factorization: None,
        }
    }

    pub fn max_bases(&self) -> usize {
        self.max_bases.unwrap_or(self.dim + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(TomoError::InvalidArgument(format!("dimension must be at least 2, got {}", self.dim)));
        }
        if self.rank < 1 || self.rank > self.dim {
            return Err(TomoError::InvalidArgument(format!("rank {} outside [1, {}]", self.rank, self.dim)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(TomoError::InvalidArgument(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.max_bases() < 1 {
            return Err(TomoError::InvalidArgument("max_bases must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(TomoError::InvalidArgument("trials must be at least 1".into()));
        }
        if let Shots::Finite(0) = self.shots {
            return Err(TomoError::InvalidArgument("shots must be positive".into()));
        }
        BasisSchedule::new(self.scheme, self.dim, self.factorization.clone()).map(|_| ())
    }
}

/// One step of a trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub basis_label: String,
    pub s_cvx: f64,
    pub f_max: f64,
    pub f_min: f64,
    /// Fidelity of the step's estimate with the true state.
    pub fidelity: f64,
    /// Entropy of the step's estimate.
    pub entropy: f64,
    pub is_ic: bool,
    /// Wall-clock seconds spent on the step.
    pub elapsed: f64,
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub steps: Vec<StepRecord>,
    /// `ρ_max` of the last certification.
    pub estimator: DensityMatrix,
    /// Number of bases at certification, `None` if the budget ran out.
    pub k_ic: Option<usize>,
    pub records: Vec<MeasurementRecord>,
    /// Final data convex set, for re-certification.
    pub data: DataConvexSet,
    /// Probe used for every certification of the trial.
    pub probe: ProbeState,
    pub degenerate_baseline: bool,
}

impl TrialOutcome {
    pub fn final_fidelity(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.fidelity)
    }

    pub fn bases(&self) -> Vec<OrthonormalBasis> {
        self.records.iter().map(|r| r.basis().clone()).collect()
    }
}

/// Per-run tuning that is not part of the published configuration.
#[derive(Clone, Debug, Default)]
pub struct TrialOptions {
    /// Overrides the scheme's first basis.
    pub first_basis: Option<OrthonormalBasis>,
    pub entropy: EntropySettings,
}

/// Runs the adaptive or non-adaptive loop against `truth` until the data
/// are certified complete or the basis budget is spent.
///
/// The step estimate is the minimum-entropy state for the adaptive schemes
/// and `ρ_max` otherwise; at the last step it is always `ρ_max`.
pub fn run_trial(
    cfg: &RunConfig,
    truth: &DensityMatrix,
    options: &TrialOptions,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    cfg.validate()?;
    if truth.dim() != cfg.dim {
        return Err(TomoError::DimensionMismatch { expected: cfg.dim, found: truth.dim() });
    }
    let mut schedule = BasisSchedule::new(cfg.scheme, cfg.dim, cfg.factorization.clone())?;
    let mut certifier = Certifier::new(probe_state(cfg.dim, rng)?, cfg.epsilon)?;
    let mut basis = match &options.first_basis {
        Some(b) => b.clone(),
        None => schedule.first_basis(rng)?,
    };
    let mut records: Vec<MeasurementRecord> = Vec::new();
    let mut steps = Vec::new();

    for k in 1..=cfg.max_bases() {
        let started = Instant::now();
        let label = basis.label().to_string();
        records.push(sample_record(truth, &basis, cfg.shots, cfg.noise, rng)?);
        let data = DataConvexSet::new(ml_probabilities(&records)?)?;
        let cert = certifier.certify(&data, rng)?;
        debug!("k={k}: s_cvx {:.3e}, width {:.3e}, support {}", cert.s_cvx, cert.width(), data.support_dim());

        let last = cert.is_ic || k == cfg.max_bases();
        let estimate = if last || !cfg.scheme.is_adaptive() {
            cert.rho_max.clone()
        } else {
            // Starting points must not depend on the probe: a basis built
            // from the probe's extremal states can hide the remaining
            // freedom from the probe and certify too early.
            let est = adaptive::min_entropy_estimator(&data, &[], &options.entropy, rng)?;
            debug!("k={k}: estimate entropy {:.3e}, rank {}", est.entropy, est.rank);
            est.state
        };
        if !last {
            let measured: Vec<OrthonormalBasis> = records.iter().map(|r| r.basis().clone()).collect();
            if cfg.scheme.is_adaptive() {
                let distinct = adaptive::eigenbasis_distinctness(&estimate, &measured)?;
                debug!("k={k}: estimate eigenbasis distinct from measured bases: {distinct}");
            }
            basis = schedule.next_basis(Some(&estimate), &measured, rng)?;
        }
        steps.push(StepRecord {
            k,
            basis_label: label,
            s_cvx: cert.s_cvx,
            f_max: cert.f_max,
            f_min: cert.f_min,
            fidelity: fidelity(&estimate, truth)?,
            entropy: von_neumann_entropy(&estimate),
            is_ic: cert.is_ic,
            elapsed: started.elapsed().as_secs_f64(),
        });
        if last {
            return Ok(TrialOutcome {
                steps,
                estimator: cert.rho_max,
                k_ic: cert.is_ic.then_some(k),
                records,
                data,
                probe: certifier.probe().clone(),
                degenerate_baseline: certifier.degenerate_baseline(),
            });
        }
    }
    unreachable!("max_bases >= 1 is validated")
}

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| mix(acc ^ mix(p)))
}

/// Seed of the true state of `(rank, trial)`; shared by all schemes so they
/// are compared on the same states.
pub fn truth_seed(seed: u64, rank: usize, trial: usize) -> u64 {
    derive_seed(&[seed, 1, rank as u64, trial as u64])
}

pub fn run_seed(seed: u64, rank: usize, scheme: SchemeKind, trial: usize) -> u64 {
    derive_seed(&[seed, 2, rank as u64, scheme as u64, trial as u64])
}

/// Ranks × schemes sweep; every other field of `base` is shared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub ranks: Vec<usize>,
    pub schemes: Vec<SchemeKind>,
}

impl SweepConfig {
    pub fn single(cfg: RunConfig) -> Self {
        Self { ranks: vec![cfg.rank], schemes: vec![cfg.scheme], base: cfg }
    }

    pub fn configs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &rank in &self.ranks {
            for &scheme in &self.schemes {
                out.push(RunConfig { rank, scheme, ..self.base.clone() });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks.is_empty() || self.schemes.is_empty() {
            return Err(TomoError::InvalidArgument("sweep needs at least one rank and one scheme".into()));
        }
        self.configs().iter().try_for_each(RunConfig::validate)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialSummary {
    pub scheme: SchemeKind,
    pub r: usize,
    pub trial: usize,
    pub k_ic: Option<usize>,
    pub final_s_cvx: f64,
    pub final_fidelity: f64,
    pub degenerate_baseline: bool,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialFailure {
    pub scheme: SchemeKind,
    pub r: usize,
    pub trial: usize,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Aggregate {
    pub scheme: SchemeKind,
    pub r: usize,
    pub trials: usize,
    pub certified: usize,
    pub failed: usize,
    /// Over certified trials; `None` if there are none.
    pub mean_k_ic: Option<f64>,
    pub std_k_ic: Option<f64>,
    /// Over all completed trials.
    pub mean_fidelity: Option<f64>,
    pub std_fidelity: Option<f64>,
    pub bg: usize,
    pub kech: usize,
    pub k0: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkResult {
    pub version: String,
    pub config: SweepConfig,
    pub trials: Vec<TrialSummary>,
    pub failures: Vec<TrialFailure>,
    pub aggregates: Vec<Aggregate>,
}

impl BenchmarkResult {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn aggregate(&self, scheme: SchemeKind, r: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.scheme == scheme && a.r == r)
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (Some(mean), Some(var.sqrt()))
}

/// Runs every `(rank, scheme, trial)` of the sweep in parallel. Trial
/// errors are recorded rather than propagated.
pub fn run_benchmark(sweep: &SweepConfig, options: &TrialOptions) -> Result<BenchmarkResult> {
    sweep.validate()?;
    let seed = sweep.base.seed;
    let tasks: Vec<(RunConfig, usize)> =
        sweep.configs().into_iter().flat_map(|c| (0..c.trials).map(move |t| (c.clone(), t))).collect();
    let results: Vec<std::result::Result<TrialSummary, TrialFailure>> = tasks
        .par_iter()
        .map(|(cfg, trial)| {
            let fail = |e: TomoError| {
                warn!("{} r={} trial {trial} failed: {e}", cfg.scheme, cfg.rank);
                TrialFailure { scheme: cfg.scheme, r: cfg.rank, trial: *trial, error: e.to_string() }
            };
            let mut truth_rng = ChaCha8Rng::seed_from_u64(truth_seed(seed, cfg.rank, *trial));
            let truth = random_rank_r_state(cfg.dim, cfg.rank, &mut truth_rng).map_err(fail)?;
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, cfg.rank, cfg.scheme, *trial));
            let outcome = run_trial(cfg, &truth, options, &mut rng).map_err(fail)?;
            info!("{} r={} trial {trial}: k_IC {:?}, fidelity {:.6}", cfg.scheme, cfg.rank, outcome.k_ic, outcome.final_fidelity());
            Ok(TrialSummary {
                scheme: cfg.scheme,
                r: cfg.rank,
                trial: *trial,
                k_ic: outcome.k_ic,
                final_s_cvx: outcome.steps.last().map_or(f64::NAN, |s| s.s_cvx),
                final_fidelity: outcome.final_fidelity(),
                degenerate_baseline: outcome.degenerate_baseline,
                steps: outcome.steps,
            })
        })
        .collect();
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => trials.push(s),
            Err(f) => failures.push(f),
        }
    }

    let mut aggregates = Vec::new();
    for cfg in sweep.configs() {
        let mine: Vec<&TrialSummary> = trials.iter().filter(|t| t.scheme == cfg.scheme && t.r == cfg.rank).collect();
        let ks: Vec<f64> = mine.iter().filter_map(|t| t.k_ic).map(|k| k as f64).collect();
        let fids: Vec<f64> = mine.iter().map(|t| t.final_fidelity).collect();
        let (mean_k_ic, std_k_ic) = mean_std(&ks);
        let (mean_fidelity, std_fidelity) = mean_std(&fids);
        let refs = reference_counts(cfg.dim, cfg.rank)?;
        aggregates.push(Aggregate {
            scheme: cfg.scheme,
            r: cfg.rank,
            trials: cfg.trials,
            certified: ks.len(),
            failed: failures.iter().filter(|f| f.scheme == cfg.scheme && f.r == cfg.rank).count(),
            mean_k_ic,
            std_k_ic,
            mean_fidelity,
            std_fidelity,
            bg: refs.bg,
            kech: refs.kech,
            k0: k0_lower_bound(cfg.dim, cfg.rank)?,
        });
    }
    Ok(BenchmarkResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: sweep.clone(),
        trials,
        failures,
        aggregates,
    })
}

/// Column order of the step table.
pub const CSV_HEADER: [&str; 11] =
    ["scheme", "d", "r", "trial", "k", "s_cvx", "f_max", "f_min", "fidelity", "entropy", "elapsed"];

pub fn write_csv<W: std::io::Write>(result: &BenchmarkResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let d = result.config.base.dim.to_string();
    for t in &result.trials {
        for s in &t.steps {
            w.write_record([
                t.scheme.tag().to_string(),
                d.clone(),
                t.r.to_string(),
                t.trial.to_string(),
                s.k.to_string(),
                s.s_cvx.to_string(),
                s.f_max.to_string(),
                s.f_min.to_string(),
                s.fidelity.to_string(),
                s.entropy.to_string(),
                s.elapsed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `<stem>.csv` and `<stem>.json` next to `out`; an explicit `.csv` or
/// `.json` extension on `out` is replaced.
pub fn output_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = match out.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("json") => out.with_extension(""),
        _ => out.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("csv"), with("json"))
}

pub fn write_outputs(result: &BenchmarkResult, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let (csv_path, json_path) = output_paths(out);
    write_csv(result, std::fs::File::create(&csv_path)?)?;
    let json = serde_json::to_string_pretty(result)?;
    std::fs::write(&json_path, json + "\n")?;
    Ok((csv_path, json_path))
}
