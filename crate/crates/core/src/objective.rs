//! Misfit functional, its adjoint gradient and a finite-difference cross-check.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::adjoint::{solve_adjoint_with, AdjointScheme, AdjointTrajectory};
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, shape, GridFunction, Mesh1D, GAUSS3};
use crate::forward::{ForwardModel, StateTrajectory, TimeGrid};

/// Provenance of synthetic noise added to an observation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseInfo {
    pub sigma: f64,
    pub seed: u64,
    pub stream: u64,
}

/// Measured acid concentration `û3` on the solver's space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    nod: usize,
    tau: f64,
    nt: usize,
    uhat3: Vec<GridFunction>,
    pub noise: Option<NoiseInfo>,
}

impl ObservationSet {
    pub fn new(mesh: &Mesh1D, time: &TimeGrid, uhat3: Vec<GridFunction>) -> Result<Self> {
        if uhat3.len() != time.nt() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} observation levels for {} time levels",
                uhat3.len(),
                time.nt() + 1
            )));
        }
        for (n, g) in uhat3.iter().enumerate() {
            mesh.check(g)?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("observation at level {n} is not finite")));
            }
        }
        Ok(Self {
            nod: mesh.nod(),
            tau: time.tau(),
            nt: time.nt(),
            uhat3,
            noise: None,
        })
    }

    /// Noiseless observations: the acid field of `traj`.
    pub fn from_trajectory(traj: &StateTrajectory) -> Self {
        Self {
            nod: traj.nod(),
            tau: traj.time().tau(),
            nt: traj.time().nt(),
            uhat3: traj.levels().iter().map(|l| l[2].clone()).collect(),
            noise: None,
        }
    }

    pub fn nod(&self) -> usize {
        self.nod
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn level(&self, n: usize) -> &GridFunction {
        &self.uhat3[n]
    }

    pub fn levels(&self) -> &[GridFunction] {
        &self.uhat3
    }

    pub(crate) fn levels_mut(&mut self) -> &mut [GridFunction] {
        &mut self.uhat3
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.tau, self.tau * self.nt as f64)
    }

    pub fn check_grid(&self, mesh: &Mesh1D, time: &TimeGrid) -> Result<()> {
        if self.nod != mesh.nod() || self.nt != time.nt() || (self.tau - time.tau()).abs() > 1e-12 {
            return Err(Error::DimensionMismatch(format!(
                "observations on (nod = {}, nt = {}, tau = {}), solver on (nod = {}, nt = {}, tau = {})",
                self.nod,
                self.nt,
                self.tau,
                mesh.nod(),
                time.nt(),
                time.tau()
            )));
        }
        Ok(())
    }

    /// CSV with header `x,t,u3hat`, one row per node and level.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mesh = Mesh1D::uniform(self.nod)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "t", "u3hat"])?;
        for (n, g) in self.uhat3.iter().enumerate() {
            let t = n as f64 * self.tau;
            for (j, v) in g.iter().enumerate() {
                w.write_record([mesh.x(j).to_string(), t.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `x,t,u3hat` format. The grid is inferred from the distinct coordinates,
    /// which must form a uniform mesh of `[0, 1]` and a uniform time grid from 0.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
        };
        let (cx, ct, cu) = (col("x")?, col("t")?, col("u3hat")?);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec.get(c)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {:?}: {e}", rec.position().map(|p| p.line()))))
            };
            rows.push((num(cx)?, num(ct)?, num(cu)?));
        }
        if rows.is_empty() {
            return Err(Error::Parse("observation file has no rows".into()));
        }
        let t_max = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
        let distinct = |key: fn(&(f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = rows.iter().map(key).collect();
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
            v.len()
        };
        let nod = distinct(|r| r.0);
        let levels = distinct(|r| r.1);
        if levels < 2 {
            return Err(Error::Parse("observations need at least two time levels".into()));
        }
        let nt = levels - 1;
        let mesh = Mesh1D::uniform(nod)?;
        let time = TimeGrid::new(t_max / nt as f64, t_max)?;
        let mut grid: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(x, t, u) in &rows {
            let j = (x / mesh.h()).round();
            let n = (t / time.tau()).round();
            if (j * mesh.h() - x).abs() > 1e-9 || (n * time.tau() - t).abs() > 1e-9 {
                return Err(Error::Parse(format!("point (x = {x}, t = {t}) is off the uniform grid")));
            }
            if grid.insert((n as usize, j as usize), u).is_some() {
                return Err(Error::Parse(format!("duplicate point (x = {x}, t = {t})")));
            }
        }
        if grid.len() != nod * levels {
            return Err(Error::Parse(format!(
                "expected {} grid points, found {}",
                nod * levels,
                grid.len()
            )));
        }
        let uhat3 = (0..levels)
            .map(|n| GridFunction((0..nod).map(|j| grid[&(n, j)]).collect()))
            .collect();
        Self::new(&mesh, &time, uhat3)
    }
}

/// `J = ½ Σ_n w_n (u3^n − û3^n)ᵀ M (u3^n − û3^n)` with trapezoid weights `w_n`.
pub fn objective(
    traj: &StateTrajectory,
    obs: &ObservationSet,
    mesh: &Mesh1D,
    time: &TimeGrid,
) -> Result<f64> {
    traj.check_grid(mesh, time)?;
    obs.check_grid(mesh, time)?;
    let m = assemble_mass(mesh);
    let mut j = 0.0;
    for n in 0..=time.nt() {
        let e: Vec<f64> = traj
            .field(2, n)
            .iter()
            .zip(obs.level(n).iter())
            .map(|(u, o)| u - o)
            .collect();
        j += time.weight(n) * m.bilinear(&e, &e);
    }
    Ok(0.5 * j)
}

/// `∫ u1 u3 λ1 dx` at one level pair by 3-point Gauss on each element.
fn triple_integral(u1: &GridFunction, u3: &GridFunction, l1: &GridFunction, mesh: &Mesh1D) -> f64 {
    let h = mesh.h();
    let mut s = 0.0;
    for e in 0..mesh.elements() {
        for &(xi, w) in &GAUSS3 {
            let phi = shape(xi);
            let at = |g: &GridFunction| g[e] * phi[0] + g[e + 1] * phi[1];
            s += w * h * at(u1) * at(u3) * at(l1);
        }
    }
    s
}

/// `dJ/dδ1 = ∫∫ u1 u3 λ1 dx dt`, with the time pairing dictated by the adjoint scheme.
pub fn gradient_adjoint(
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
    mesh: &Mesh1D,
    time: &TimeGrid,
) -> Result<f64> {
    traj.check_grid(mesh, time)?;
    if adj.nod() != mesh.nod() || adj.time().nt() != time.nt() || adj.time().tau() != time.tau() {
        return Err(Error::DimensionMismatch(
            "adjoint trajectory does not match the solver grid".into(),
        ));
    }
    let g = match adj.scheme() {
        AdjointScheme::Lagged => (0..=time.nt())
            .map(|n| {
                time.weight(n)
                    * triple_integral(traj.field(0, n), traj.field(2, n), adj.field(0, n), mesh)
            })
            .sum(),
        AdjointScheme::Continuous | AdjointScheme::Discrete => (1..=time.nt())
            .map(|n| {
                time.tau()
                    * triple_integral(traj.field(0, n), traj.field(2, n), adj.field(0, n - 1), mesh)
            })
            .sum(),
    };
    Ok(g)
}

/// The reduced functional `J̃(δ1)` of a parameter-to-state map.
pub trait ReducedFunctional {
    fn value(&self, delta1: f64) -> Result<f64>;

    fn value_and_gradient(&self, delta1: f64) -> Result<(f64, f64)>;
}

/// Central difference `(J(δ + s) − J(δ − s)) / 2s` with `s = 1e-4 max(1, δ)`.
pub fn gradient_fd<F: ReducedFunctional + ?Sized>(f: &F, delta1: f64) -> Result<f64> {
    gradient_fd_step(f, delta1, 1e-4 * delta1.abs().max(1.0))
}

pub fn gradient_fd_step<F: ReducedFunctional + ?Sized>(f: &F, delta1: f64, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let jp = f.value(delta1 + step)?;
    let jm = f.value(delta1 - step)?;
    Ok((jp - jm) / (2.0 * step))
}

/// Forward model plus observations: evaluates `J̃` and its adjoint gradient.
#[derive(Debug, Clone)]
pub struct MisfitProblem {
    pub model: ForwardModel,
    pub obs: ObservationSet,
    pub scheme: AdjointScheme,
}

impl MisfitProblem {
    pub fn new(model: ForwardModel, obs: ObservationSet) -> Result<Self> {
        obs.check_grid(&model.mesh, &model.time)?;
        Ok(Self {
            model,
            obs,
            scheme: AdjointScheme::Continuous,
        })
    }

    pub fn with_scheme(self, scheme: AdjointScheme) -> Self {
        Self { scheme, ..self }
    }

    pub fn adjoint_at(&self, delta1: f64) -> Result<(StateTrajectory, AdjointTrajectory)> {
        let traj = self.model.solve_at(delta1)?;
        let p = self.model.params.with_delta1(delta1);
        let adj = solve_adjoint_with(&p, &traj, &self.obs, &self.model.mesh, &self.model.time, self.scheme)
            .map_err(|e| e.at_parameter(delta1))?;
        Ok((traj, adj))
    }
}

impl ReducedFunctional for MisfitProblem {
    fn value(&self, delta1: f64) -> Result<f64> {
        let traj = self.model.solve_at(delta1)?;
        objective(&traj, &self.obs, &self.model.mesh, &self.model.time)
    }

    fn value_and_gradient(&self, delta1: f64) -> Result<(f64, f64)> {
        let (traj, adj) = self.adjoint_at(delta1)?;
        let j = objective(&traj, &self.obs, &self.model.mesh, &self.model.time)?;
        let g = gradient_adjoint(&traj, &adj, &self.model.mesh, &self.model.time)?;
        Ok((j, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::InitialCondition;

    struct Quadratic;

    impl ReducedFunctional for Quadratic {
        fn value(&self, x: f64) -> Result<f64> {
            Ok(3.0 * (x - 2.0).powi(2) + 0.5 * x)
        }
        fn value_and_gradient(&self, x: f64) -> Result<(f64, f64)> {
            Ok((self.value(x)?, 6.0 * (x - 2.0) + 0.5))
        }
    }

    fn small() -> (ForwardModel, StateTrajectory) {
        let model = ForwardModel::experiment(8.0, 41, 0.5, 5.0).unwrap();
        let traj = model.solve().unwrap();
        (model, traj)
    }

    #[test]
    fn self_observation_gives_zero_misfit() {
        let (model, traj) = small();
        let obs = ObservationSet::from_trajectory(&traj);
        assert_eq!(objective(&traj, &obs, &model.mesh, &model.time).unwrap(), 0.0);
    }

    #[test]
    fn unit_misfit_integrates_to_half_the_horizon() {
        let mut model = ForwardModel::experiment(8.0, 21, 0.5, 20.0).unwrap();
        model.initial = InitialCondition::constant(&model.mesh, [1.0, 0.0, 0.0]).unwrap();
        let traj = model.solve().unwrap();
        let shifted = ObservationSet::new(
            &model.mesh,
            &model.time,
            traj.levels()
                .iter()
                .map(|l| GridFunction(l[2].iter().map(|v| v - 1.0).collect()))
                .collect(),
        )
        .unwrap();
        let j = objective(&traj, &shifted, &model.mesh, &model.time).unwrap();
        assert!((j - 10.0).abs() < 1e-12, "{j}");
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let (_, traj) = small();
        let obs = ObservationSet::from_trajectory(&traj);
        let other = ForwardModel::experiment(8.0, 21, 0.5, 5.0).unwrap();
        assert!(matches!(
            objective(&traj, &obs, &other.mesh, &other.time),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_adjoint_gives_zero_gradient() {
        let (model, traj) = small();
        let problem = MisfitProblem::new(model.clone(), ObservationSet::from_trajectory(&traj)).unwrap();
        let (j, g) = problem.value_and_gradient(8.0).unwrap();
        assert_eq!(j, 0.0);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn fd_is_exact_for_quadratics() {
        for x in [-1.0, 0.3, 2.0, 11.0] {
            let g = gradient_fd(&Quadratic, x).unwrap();
            let exact = 6.0 * (x - 2.0) + 0.5;
            assert!((g - exact).abs() < 1e-8, "{g} vs {exact}");
        }
    }

    #[test]
    fn discrete_adjoint_gradient_matches_fd_tightly() {
        let model = ForwardModel::experiment(8.0, 41, 0.5, 10.0).unwrap();
        let data = model.with_delta1(12.5).solve().unwrap();
        let problem = MisfitProblem::new(model, ObservationSet::from_trajectory(&data))
            .unwrap()
            .with_scheme(AdjointScheme::Discrete);
        let (_, g) = problem.value_and_gradient(8.0).unwrap();
        let fd = gradient_fd(&problem, 8.0).unwrap();
        assert!(((g - fd) / fd).abs() < 1e-5, "adjoint {g:e} vs fd {fd:e}");
    }

    #[test]
    fn observation_csv_round_trip() {
        let (_, traj) = small();
        let obs = ObservationSet::from_trajectory(&traj);
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,t,u3hat\n"));
        let back = ObservationSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, obs);
    }

    #[test]
    fn malformed_observation_files_are_rejected() {
        assert!(ObservationSet::read_csv("x,t\n0,0\n".as_bytes()).is_err());
        assert!(ObservationSet::read_csv("x,t,u3hat\n".as_bytes()).is_err());
        let missing = "x,t,u3hat\n0,0,1\n0.5,0,1\n1,0,0\n0,1,1\n1,1,0\n";
        assert!(ObservationSet::read_csv(missing.as_bytes()).is_err());
    }
}
