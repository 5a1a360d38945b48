//! Bound-constrained scalar minimization: projected secant-Newton steps with Armijo
//! backtracking.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::Bounds;
use crate::objective::ReducedFunctional;

/// Gradient tolerance, either fixed or relative to the starting gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradTol {
    Absolute(f64),
    /// `factor * |J'(δ⁰)|`.
    Relative(f64),
}

impl GradTol {
    fn resolve(self, g0: f64) -> f64 {
        match self {
            GradTol::Absolute(t) => t,
            GradTol::Relative(f) => f * g0.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub bounds: Bounds,
    pub grad_tol: GradTol,
    pub step_tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant `c1` of the Armijo rule.
    pub armijo: f64,
    /// Step contraction factor per rejected trial.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            grad_tol: GradTol::Relative(1e-8),
            step_tol: 1e-10,
            max_iter: 100,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let tol_ok = match self.grad_tol {
            GradTol::Absolute(t) | GradTol::Relative(t) => t > 0.0,
        };
        if !(self.bounds.lo < self.bounds.hi) {
            return Err(Error::invalid("bounds require lo < hi"));
        }
        if !tol_ok || !(self.step_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::invalid(format!("Armijo constant {} not in (0, 1)", self.armijo)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid(format!("backtrack factor {} not in (0, 1)", self.backtrack)));
        }
        Ok(())
    }
}

pub fn project(delta1: f64, bounds: Bounds) -> f64 {
    delta1.max(bounds.lo).min(bounds.hi)
}

/// Gradient with components pushing out of an active bound removed.
fn projected_gradient(x: f64, g: f64, bounds: Bounds) -> f64 {
    if (x <= bounds.lo && g > 0.0) || (x >= bounds.hi && g < 0.0) {
        0.0
    } else {
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub delta1: f64,
    pub j: f64,
    pub grad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    /// Backtracking ran out without an acceptable step.
    LineSearchExhausted,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub delta1_star: f64,
    pub j_star: f64,
    pub grad_star: f64,
    pub iterations: usize,
    /// Starting point, iteration 0.
    pub start: TraceEntry,
    /// One entry per iteration, holding the accepted iterate.
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub termination: Termination,
}

impl FitResult {
    /// CSV with header `iter,delta1,J,grad`; row 0 is the starting point.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "delta1", "J", "grad"])?;
        for e in std::iter::once(&self.start).chain(&self.trace) {
            w.write_record([
                e.iter.to_string(),
                e.delta1.to_string(),
                e.j.to_string(),
                e.grad.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Minimizes `f` over `opts.bounds` starting at `delta1_0`.
///
/// Each iteration takes a secant-Newton step `-g / B`, where `B` approximates the second
/// derivative from successive gradients. A nonpositive curvature estimate falls back to a
/// steepest-descent step of a tenth of the interval. Each accepted iterate costs one
/// gradient evaluation; line-search trials cost one value evaluation each.
pub fn fit<F: ReducedFunctional + ?Sized>(f: &F, delta1_0: f64, opts: &OptimOptions) -> Result<FitResult> {
    opts.validate()?;
    let bounds = opts.bounds;
    if !bounds.contains(delta1_0) {
        return Err(Error::invalid(format!(
            "starting value {delta1_0} outside [{}, {}]",
            bounds.lo, bounds.hi
        )));
    }
    let mut x = delta1_0;
    let (mut j, mut g) = f.value_and_gradient(x)?;
    let gtol = opts.grad_tol.resolve(g);
    let start = TraceEntry {
        iter: 0,
        delta1: x,
        j,
        grad: g,
    };
    let mut trace = Vec::new();
    let done = |x: f64, j: f64, g: f64, trace: Vec<TraceEntry>, termination: Termination| FitResult {
        delta1_star: x,
        j_star: j,
        grad_star: g,
        iterations: trace.len(),
        start,
        trace,
        converged: matches!(
            termination,
            Termination::GradientTolerance | Termination::StepTolerance
        ),
        termination,
    };
    if projected_gradient(x, g, bounds).abs() <= gtol {
        return Ok(done(x, j, g, trace, Termination::GradientTolerance));
    }

    let fallback_step = 0.1 * bounds.width();
    let mut curvature = {
        let probe_dist = 1e-2 * bounds.width();
        let probe = if x + probe_dist <= bounds.hi {
            x + probe_dist
        } else {
            x - probe_dist
        };
        match f.value_and_gradient(probe) {
            Ok((_, gp)) => (gp - g) / (probe - x),
            Err(_) => f64::NAN,
        }
    };

    for k in 1..=opts.max_iter {
        let mut dir = if curvature > 0.0 && curvature.is_finite() {
            -g / curvature
        } else {
            -g.signum() * fallback_step
        };
        dir = dir.clamp(-bounds.width(), bounds.width());

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut last_err = None;
        let mut tiny_step = false;
        for _ in 0..=opts.max_backtracks {
            let xt = project(x + alpha * dir, bounds);
            let s = xt - x;
            if s.abs() < opts.step_tol {
                tiny_step = true;
                break;
            }
            match f.value(xt) {
                Ok(jt) if jt.is_finite() && jt <= j + opts.armijo * g * s => {
                    match f.value_and_gradient(xt) {
                        Ok((jt, gt)) => {
                            accepted = Some((xt, jt, gt));
                            break;
                        }
                        Err(e) => last_err = Some(e),
                    }
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
            alpha *= opts.backtrack;
        }

        let Some((xn, jn, gn)) = accepted else {
            if tiny_step {
                return Ok(done(x, j, g, trace, Termination::StepTolerance));
            }
            if let Some(e) = last_err {
                return Err(Error::FitFailed {
                    message: e.to_string(),
                    trace,
                });
            }
            return Ok(done(x, j, g, trace, Termination::LineSearchExhausted));
        };

        let s = xn - x;
        let secant = (gn - g) / s;
        if secant > 0.0 && secant.is_finite() {
            curvature = secant;
        }
        x = xn;
        j = jn;
        g = gn;
        trace.push(TraceEntry {
            iter: k,
            delta1: x,
            j,
            grad: g,
        });
        if projected_gradient(x, g, bounds).abs() <= gtol {
            return Ok(done(x, j, g, trace, Termination::GradientTolerance));
        }
        if s.abs() < opts.step_tol {
            return Ok(done(x, j, g, trace, Termination::StepTolerance));
        }
    }
    Ok(done(x, j, g, trace, Termination::MaxIterations))
}
