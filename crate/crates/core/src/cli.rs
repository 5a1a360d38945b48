//! Command-line front end.
//!
//! Every flag may also be given in a flat `key = value` file passed with `--config`, keyed
//! by the long flag name (`t-final = 20`). Flags win over the file.
//! Repeatable flags (`sigma`, `delta1-hat`) accept comma-separated lists in the file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::adjoint::solve_adjoint_with;
use crate::error::{Error, Result};
use crate::estimator::estimate_aposteriori;
use crate::experiments::{
    generate_synthetic, run_functional_sweep, run_noise_study, run_recovery_study, trial_stream,
    write_recovery_csv, write_study_csv, write_sweep_csv, ExperimentConfig, StartPolicy,
    RECOVERY_TARGETS,
};
use crate::model::Bounds;
use crate::objective::{gradient_fd, MisfitProblem, ObservationSet, ReducedFunctional};
use crate::optimizer::fit;

#[derive(Debug, Parser)]
#[command(name = "acidfit", version, about = "Estimate delta1 of the acid-mediated invasion model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the forward problem and write the trajectory (t,x,u1,u2,u3).
    Forward,
    /// Solve the adjoint problem against observations and write lambda.
    Adjoint,
    /// Compare the adjoint gradient with a central finite difference.
    Gradcheck,
    /// Fit delta1 to observations and write the iteration trace.
    Fit,
    /// Sample the reduced functional over the admissible interval.
    Sweep,
    /// Repeated fits on noisy synthetic data, one row per noise level.
    NoiseStudy,
    /// Noiseless fits from random starts, one row per true delta1.
    RecoveryStudy,
    /// A posteriori error indicators of a forward run.
    ErrorEstimate,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    #[arg(long, global = true)]
    pub nod: Option<usize>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long = "t-final", global = true)]
    pub t_final: Option<f64>,
    /// Parameter value for solves, gradients and estimates.
    #[arg(long, global = true)]
    pub delta1: Option<f64>,
    #[arg(long, global = true)]
    pub rho2: Option<f64>,
    #[arg(long, global = true)]
    pub d2: Option<f64>,
    #[arg(long, global = true)]
    pub delta3: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// True parameter of synthetic data; repeatable for recovery-study.
    #[arg(long = "delta1-hat", global = true)]
    pub delta1_hat: Vec<f64>,
    /// Noise level; repeatable.
    #[arg(long, global = true)]
    pub sigma: Vec<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Starting value of fits, a number or `random`.
    #[arg(long = "delta1-init", global = true)]
    pub delta1_init: Option<String>,
    /// Admissible interval as `lo,hi`.
    #[arg(long, global = true)]
    pub bounds: Option<String>,
    /// Observation file (x,t,u3hat); synthetic data from --delta1-hat otherwise.
    #[arg(long, global = true)]
    pub obs: Option<PathBuf>,
    #[arg(long = "front-width", global = true)]
    pub front_width: Option<f64>,
    /// Adjoint time-level convention: continuous, lagged or discrete.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Sweep sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Gradient-check refinement levels, each halving h and tau.
    #[arg(long, global = true)]
    pub levels: Option<usize>,
}

const KEYS: [&str; 20] = [
    "nod", "tau", "t-final", "delta1", "rho2", "d2", "delta3", "seed", "out", "config",
    "delta1-hat", "sigma", "trials", "delta1-init", "bounds", "obs", "front-width", "scheme",
    "samples", "levels",
];

/// Parses flat `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", i + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&k.as_str()) || k == "config" {
            return Err(Error::Parse(format!("config line {}: unknown key `{k}`", i + 1)));
        }
        let v = v.trim().to_string();
        // Repeated list keys accumulate.
        match map.get_mut(&k) {
            Some(prev) if k == "sigma" || k == "delta1-hat" => {
                prev.push(',');
                prev.push_str(&v);
            }
            _ => {
                map.insert(k, v);
            }
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("`{key}`: cannot parse {v:?}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

pub fn parse_bounds(v: &str) -> Result<Bounds> {
    let parts = parse_list("bounds", v)?;
    match parts[..] {
        [lo, hi] => Bounds::new(lo, hi),
        _ => Err(Error::Parse(format!("`bounds`: expected lo,hi, got {v:?}"))),
    }
}

impl Options {
    /// Fills unset fields from a config map.
    pub fn merge_config(mut self, file: &BTreeMap<String, String>) -> Result<Self> {
        macro_rules! fill {
            ($field:ident, $key:literal) => {
                if self.$field.is_none() {
                    if let Some(v) = file.get($key) {
                        self.$field = Some(parse_num($key, v)?);
                    }
                }
            };
        }
        fill!(nod, "nod");
        fill!(tau, "tau");
        fill!(t_final, "t-final");
        fill!(delta1, "delta1");
        fill!(rho2, "rho2");
        fill!(d2, "d2");
        fill!(delta3, "delta3");
        fill!(seed, "seed");
        fill!(trials, "trials");
        fill!(front_width, "front-width");
        fill!(samples, "samples");
        fill!(levels, "levels");
        for (key, slot) in [
            ("delta1-init", &mut self.delta1_init),
            ("bounds", &mut self.bounds),
            ("scheme", &mut self.scheme),
        ] {
            if slot.is_none() {
                *slot = file.get(key).cloned();
            }
        }
        for (key, slot) in [("out", &mut self.out), ("obs", &mut self.obs)] {
            if slot.is_none() {
                *slot = file.get(key).map(PathBuf::from);
            }
        }
        if self.sigma.is_empty() {
            if let Some(v) = file.get("sigma") {
                self.sigma = parse_list("sigma", v)?;
            }
        }
        if self.delta1_hat.is_empty() {
            if let Some(v) = file.get("delta1-hat") {
                self.delta1_hat = parse_list("delta1-hat", v)?;
            }
        }
        Ok(self)
    }

    pub fn load(self) -> Result<Self> {
        match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let map = parse_config(&text)?;
                self.clone().merge_config(&map)
            }
            None => Ok(self),
        }
    }

    /// Experiment settings with defaults where a value is unset.
    pub fn experiment(&self, command: Command) -> Result<ExperimentConfig> {
        let base = ExperimentConfig::default();
        let start = match &self.delta1_init {
            Some(s) => s.parse()?,
            None if command == Command::RecoveryStudy => StartPolicy::UniformRandom,
            None => base.start,
        };
        let cfg = ExperimentConfig {
            rho2: self.rho2.unwrap_or(base.rho2),
            d2: self.d2.unwrap_or(base.d2),
            delta3: self.delta3.unwrap_or(base.delta3),
            delta1_hat: self.delta1_hat.first().copied().unwrap_or(base.delta1_hat),
            nod: self.nod.unwrap_or(base.nod),
            tau: self.tau.unwrap_or(base.tau),
            t_final: self.t_final.unwrap_or(base.t_final),
            front_width: self.front_width.unwrap_or(base.front_width),
            sigmas: if self.sigma.is_empty() { base.sigmas } else { self.sigma.clone() },
            trials: self.trials.unwrap_or(base.trials),
            start,
            seed: self.seed.unwrap_or(base.seed),
            bounds: match &self.bounds {
                Some(b) => parse_bounds(b)?,
                None => base.bounds,
            },
            scheme: match &self.scheme {
                Some(s) => s.parse()?,
                None => base.scheme,
            },
        };
        Ok(cfg)
    }

    pub fn delta1(&self) -> f64 {
        self.delta1.unwrap_or(8.0)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Observations from `--obs`, or noiseless/noisy synthetic data at `delta1_hat`.
fn observations(opts: &Options, cfg: &ExperimentConfig) -> Result<ObservationSet> {
    match &opts.obs {
        Some(path) => ObservationSet::read_csv(File::open(path)?),
        None => {
            let sigma = opts.sigma.first().copied().unwrap_or(0.0);
            generate_synthetic(cfg, sigma, trial_stream(1, 0, 0))
        }
    }
}

pub fn run(command: Command, opts: &Options) -> Result<()> {
    let cfg = opts.experiment(command)?;
    let delta1 = opts.delta1();
    let out_path = opts.out.as_deref();
    match command {
        Command::Forward => {
            let model = cfg.model(delta1)?;
            let traj = model.solve_at(delta1)?;
            traj.write_csv(&model.mesh, output(out_path)?)
        }
        Command::Adjoint => {
            let model = cfg.model(delta1)?;
            let obs = observations(opts, &cfg)?;
            let traj = model.solve_at(delta1)?;
            let adj = solve_adjoint_with(&model.params, &traj, &obs, &model.mesh, &model.time, cfg.scheme)?;
            adj.write_csv(&model.mesh, output(out_path)?)
        }
        Command::Gradcheck => {
            let levels = opts.levels.unwrap_or(1).max(1);
            if opts.obs.is_some() && levels > 1 {
                return Err(Error::invalid("refinement levels need synthetic data, not --obs"));
            }
            let mut w = csv::Writer::from_writer(output(out_path)?);
            w.write_record(["scheme", "nod", "tau", "delta1", "adjoint", "fd", "rel_error"])?;
            for k in 0..levels {
                let lvl = ExperimentConfig {
                    nod: (cfg.nod - 1) * (1 << k) + 1,
                    tau: cfg.tau / (1 << k) as f64,
                    ..cfg.clone()
                };
                let problem = MisfitProblem::new(lvl.model(delta1)?, observations(opts, &lvl)?)?.with_scheme(cfg.scheme);
                let (_, g) = problem.value_and_gradient(delta1)?;
                let fd = gradient_fd(&problem, delta1)?;
                w.write_record([
                    cfg.scheme.to_string(),
                    lvl.nod.to_string(),
                    lvl.tau.to_string(),
                    delta1.to_string(),
                    g.to_string(),
                    fd.to_string(),
                    ((g - fd).abs() / fd.abs()).to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Fit => {
            let model = cfg.model(cfg.delta1_hat)?;
            let problem = MisfitProblem::new(model, observations(opts, &cfg)?)?.with_scheme(cfg.scheme);
            let start = match cfg.start {
                StartPolicy::Fixed(v) => v,
                StartPolicy::UniformRandom => {
                    return Err(Error::invalid("fit needs a numeric --delta1-init"));
                }
            };
            let result = fit(&problem, start, &cfg.optim_options())?;
            eprintln!(
                "delta1* = {} J* = {:e} grad* = {:e} iterations = {} converged = {} ({:?})",
                result.delta1_star, result.j_star, result.grad_star, result.iterations, result.converged, result.termination
            );
            result.write_trace_csv(output(out_path)?)
        }
        Command::Sweep => {
            let obs = observations(opts, &cfg)?;
            let samples = opts.samples.unwrap_or(41);
            let curve = run_functional_sweep(&cfg, &obs, cfg.bounds.lo, cfg.bounds.hi, samples)?;
            write_sweep_csv(output(out_path)?, &curve)
        }
        Command::NoiseStudy => {
            let rows = run_noise_study(&cfg)?;
            write_study_csv(output(out_path)?, &cfg, &rows)
        }
        Command::RecoveryStudy => {
            let targets = if opts.delta1_hat.is_empty() {
                RECOVERY_TARGETS.to_vec()
            } else {
                opts.delta1_hat.clone()
            };
            let rows = run_recovery_study(&cfg, &targets)?;
            write_recovery_csv(output(out_path)?, &cfg, &rows)
        }
        Command::ErrorEstimate => {
            let model = cfg.model(delta1)?;
            let traj = model.solve_at(delta1)?;
            let est = estimate_aposteriori(&traj, &model.params, &model.mesh, &model.time)?;
            eprintln!("eta = ({:e}, {:e}, {:e})", est.eta[0], est.eta[1], est.eta[2]);
            est.write_csv(output(out_path)?)
        }
    }
}

/// Entry point of the `acidfit` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.opts.load().and_then(|opts| run(cli.command, &opts)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
