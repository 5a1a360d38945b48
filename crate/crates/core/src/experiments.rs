//! Synthetic inversion experiments: noisy data generation, random-start recovery,
//! noise studies and sweeps of the reduced functional.
//!
//! Every trial draws from its own ChaCha20 stream of the study seed. Stream numbers are
//! `tag << 48 | row << 32 | trial`, with tag 1 for observation noise and tag 2 for
//! starting points, so a single trial can be reproduced from `(seed, row, trial)` alone.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::adjoint::AdjointScheme;
use crate::error::{Error, Result};
use crate::forward::{default_initial_condition, ForwardModel, NewtonOptions, TimeGrid};
use crate::fem::Mesh1D;
use crate::model::{Bounds, NondimParams};
use crate::objective::{objective, MisfitProblem, NoiseInfo, ObservationSet};
use crate::optimizer::{fit, FitResult, OptimOptions};

/// True parameters of the random-start recovery table.
pub const RECOVERY_TARGETS: [f64; 4] = [0.5, 4.0, 12.5, 16.0];

pub const DEFAULT_SIGMAS: [f64; 6] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3];

const NOISE_TAG: u64 = 1;
const START_TAG: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartPolicy {
    Fixed(f64),
    /// Uniform on the admissible interval.
    UniformRandom,
}

impl std::fmt::Display for StartPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StartPolicy::Fixed(v) => write!(f, "{v}"),
            StartPolicy::UniformRandom => f.write_str("random"),
        }
    }
}

impl std::str::FromStr for StartPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random" | "uniform" => Ok(StartPolicy::UniformRandom),
            v => v
                .parse()
                .map(StartPolicy::Fixed)
                .map_err(|_| Error::Parse(format!("starting value {v:?} is neither a number nor \"random\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rho2: f64,
    pub d2: f64,
    pub delta3: f64,
    pub delta1_hat: f64,
    pub nod: usize,
    pub tau: f64,
    pub t_final: f64,
    pub front_width: f64,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub start: StartPolicy,
    pub seed: u64,
    pub bounds: Bounds,
    pub scheme: AdjointScheme,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = NondimParams::experiment(4.0);
        Self {
            rho2: p.rho2,
            d2: p.d2,
            delta3: p.delta3,
            delta1_hat: p.delta1,
            nod: 201,
            tau: 0.5,
            t_final: 20.0,
            front_width: 0.1,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            trials: 30,
            start: StartPolicy::Fixed(8.0),
            seed: 20_160_301,
            bounds: Bounds::default(),
            scheme: AdjointScheme::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params(self.delta1_hat).validate_in(self.bounds)?;
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::invalid(format!("noise level {s} must be nonnegative")));
        }
        if let StartPolicy::Fixed(v) = self.start {
            if !self.bounds.contains(v) {
                return Err(Error::invalid(format!(
                    "starting value {v} outside [{}, {}]",
                    self.bounds.lo, self.bounds.hi
                )));
            }
        }
        Ok(())
    }

    pub fn params(&self, delta1: f64) -> NondimParams {
        NondimParams {
            delta1,
            rho2: self.rho2,
            d2: self.d2,
            delta3: self.delta3,
        }
    }

    pub fn model(&self, delta1: f64) -> Result<ForwardModel> {
        let mesh = Mesh1D::uniform(self.nod)?;
        let params = self.params(delta1);
        params.validate()?;
        Ok(ForwardModel {
            params,
            time: TimeGrid::new(self.tau, self.t_final)?,
            initial: default_initial_condition(&mesh, self.front_width)?,
            mesh,
            newton: NewtonOptions::default(),
        })
    }

    pub fn optim_options(&self) -> OptimOptions {
        OptimOptions {
            bounds: self.bounds,
            ..OptimOptions::default()
        }
    }

    /// One-line `# key=value ...` summary of the run.
    pub fn metadata_line(&self) -> String {
        format!(
            "# seed={} nod={} tau={} t_final={} rho2={} d2={} delta3={} delta1_hat={} trials={} \
             delta1_init={} bounds={},{} front_width={} scheme={}",
            self.seed,
            self.nod,
            self.tau,
            self.t_final,
            self.rho2,
            self.d2,
            self.delta3,
            self.delta1_hat,
            self.trials,
            self.start,
            self.bounds.lo,
            self.bounds.hi,
            self.front_width,
            self.scheme
        )
    }
}

pub fn trial_stream(tag: u64, row: usize, trial: usize) -> u64 {
    (tag << 48) | ((row as u64) << 32) | trial as u64
}

pub fn trial_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two independent standard normal samples by the Box–Muller transform.
pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // 1 - U lies in (0, 1], keeping the logarithm finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Adds `N(0, sigma²)` noise to every stored value except the Dirichlet node.
pub fn add_noise(clean: &ObservationSet, sigma: f64, seed: u64, stream: u64) -> Result<ObservationSet> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("noise level {sigma} must be nonnegative")));
    }
    let mut obs = clean.clone();
    if sigma == 0.0 {
        return Ok(obs);
    }
    let mut rng = trial_rng(seed, stream);
    let d = obs.nod() - 1;
    let mut spare = None;
    for level in obs.levels_mut() {
        for v in level[..d].iter_mut() {
            let z = match spare.take() {
                Some(z) => z,
                None => {
                    let (a, b) = standard_normal_pair(&mut rng);
                    spare = Some(b);
                    a
                }
            };
            *v += sigma * z;
        }
    }
    obs.noise = Some(NoiseInfo { sigma, seed, stream });
    Ok(obs)
}

/// Forward solve at `delta1_hat`, then noise on stream `stream` (ignored for `sigma = 0`).
pub fn generate_synthetic(config: &ExperimentConfig, sigma: f64, stream: u64) -> Result<ObservationSet> {
    let model = config.model(config.delta1_hat)?;
    let clean = ObservationSet::from_trajectory(&model.solve_at(config.delta1_hat)?);
    add_noise(&clean, sigma, config.seed, stream)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub start: f64,
    pub fit: std::result::Result<FitResult, String>,
    pub elapsed: Duration,
}

impl TrialOutcome {
    pub fn estimate(&self) -> Option<f64> {
        match &self.fit {
            Ok(r) if r.converged => Some(r.delta1_star),
            _ => None,
        }
    }
}

/// Aggregate of one table row.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub sigma: f64,
    pub delta1_hat: f64,
    pub mean: f64,
    /// Sample standard deviation with the `n - 1` normalization.
    pub std: f64,
    pub rel_error: f64,
    pub failures: usize,
    pub outcomes: Vec<TrialOutcome>,
}

impl StudyRow {
    fn aggregate(sigma: f64, delta1_hat: f64, outcomes: Vec<TrialOutcome>) -> Self {
        let values: Vec<f64> = outcomes.iter().filter_map(TrialOutcome::estimate).collect();
        let failures = outcomes.len() - values.len();
        let (mean, std) = mean_and_std(&values);
        Self {
            sigma,
            delta1_hat,
            mean,
            std,
            rel_error: (delta1_hat - mean).abs() / delta1_hat,
            failures,
            outcomes,
        }
    }

    pub fn trials(&self) -> usize {
        self.outcomes.len()
    }

    /// More than a tenth of the trials failed.
    pub fn flagged(&self) -> bool {
        10 * self.failures > self.trials()
    }
}

/// Mean and `n - 1` sample standard deviation; the deviation of a single value is zero.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn starting_value(config: &ExperimentConfig, row: usize, trial: usize) -> f64 {
    match config.start {
        StartPolicy::Fixed(v) => v,
        StartPolicy::UniformRandom => {
            let mut rng = trial_rng(config.seed, trial_stream(START_TAG, row, trial));
            rng.random_range(config.bounds.lo..=config.bounds.hi)
        }
    }
}

fn run_trials(
    config: &ExperimentConfig,
    model: &ForwardModel,
    clean: &ObservationSet,
    row: usize,
    sigma: f64,
) -> Result<Vec<TrialOutcome>> {
    let opts = config.optim_options();
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let obs = add_noise(clean, sigma, config.seed, trial_stream(NOISE_TAG, row, trial))?;
            let problem = MisfitProblem::new(model.clone(), obs)?.with_scheme(config.scheme);
            let start = starting_value(config, row, trial);
            let clock = Instant::now();
            let fit = fit(&problem, start, &opts).map_err(|e| e.to_string());
            Ok(TrialOutcome {
                trial,
                start,
                fit,
                elapsed: clock.elapsed(),
            })
        })
        .collect()
}

/// One row per noise level in `config.sigmas`, each from `config.trials` noisy datasets.
pub fn run_noise_study(config: &ExperimentConfig) -> Result<Vec<StudyRow>> {
    config.validate()?;
    let model = config.model(config.delta1_hat)?;
    let clean = ObservationSet::from_trajectory(&model.solve_at(config.delta1_hat)?);
    config
        .sigmas
        .iter()
        .enumerate()
        .map(|(row, &sigma)| {
            let outcomes = run_trials(config, &model, &clean, row, sigma)?;
            Ok(StudyRow::aggregate(sigma, config.delta1_hat, outcomes))
        })
        .collect()
}

/// Noiseless fits from `config.start` for each true value in `targets`.
pub fn run_recovery_study(config: &ExperimentConfig, targets: &[f64]) -> Result<Vec<StudyRow>> {
    targets
        .iter()
        .enumerate()
        .map(|(row, &delta1_hat)| {
            let cfg = ExperimentConfig {
                delta1_hat,
                ..config.clone()
            };
            cfg.validate()?;
            let model = cfg.model(delta1_hat)?;
            let clean = ObservationSet::from_trajectory(&model.solve_at(delta1_hat)?);
            let outcomes = run_trials(&cfg, &model, &clean, row, 0.0)?;
            Ok(StudyRow::aggregate(0.0, delta1_hat, outcomes))
        })
        .collect()
}

/// `J̃` on `samples` equispaced points of `[lo, hi]`, in order.
pub fn run_functional_sweep(
    config: &ExperimentConfig,
    obs: &ObservationSet,
    lo: f64,
    hi: f64,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    if samples < 2 || !(lo < hi) || !config.bounds.contains(lo) || !config.bounds.contains(hi) {
        return Err(Error::invalid(format!(
            "sweep needs at least 2 samples on a range inside [{}, {}]",
            config.bounds.lo, config.bounds.hi
        )));
    }
    let model = config.model(config.delta1_hat)?;
    obs.check_grid(&model.mesh, &model.time)?;
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let d = if k + 1 == samples {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (samples - 1) as f64
            };
            let traj = model.solve_at(d)?;
            Ok((d, objective(&traj, obs, &model.mesh, &model.time)?))
        })
        .collect()
}

/// Metadata comment, then `sigma,mean,std,rel_error,failures,flagged`.
pub fn write_study_csv<W: Write>(mut out: W, config: &ExperimentConfig, rows: &[StudyRow]) -> Result<()> {
    writeln!(out, "{}", config.metadata_line())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sigma", "mean", "std", "rel_error", "failures", "flagged"])?;
    for r in rows {
        w.write_record([
            r.sigma.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.rel_error.to_string(),
            r.failures.to_string(),
            r.flagged().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata comment, then `delta1_hat,mean,std,rel_error,failures`.
pub fn write_recovery_csv<W: Write>(mut out: W, config: &ExperimentConfig, rows: &[StudyRow]) -> Result<()> {
    writeln!(out, "{}", config.metadata_line())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta1_hat", "mean", "std", "rel_error", "failures"])?;
    for r in rows {
        w.write_record([
            r.delta1_hat.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.rel_error.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: W, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta1", "J"])?;
    for (d, j) in curve {
        w.write_record([d.to_string(), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
