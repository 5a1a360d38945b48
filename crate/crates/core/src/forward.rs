//! Implicit Euler in time, linear finite elements in space, Newton per step.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{shape, BlockTridiagonal, GridFunction, Mesh1D, GAUSS3};
use crate::model::{reaction, reaction_jacobian, NondimParams};

/// The three fields at one time level: healthy tissue, tumor tissue, excess acid.
pub type Fields = [GridFunction; 3];

/// Dirichlet values at x = 1.
pub const DIRICHLET_VALUES: [f64; 3] = [1.0, 0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    t_final: f64,
    nt: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, t_final: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0 && t_final.is_finite() && t_final > 0.0) {
            return Err(Error::invalid(format!(
                "time grid needs tau > 0 and T > 0, got tau = {tau}, T = {t_final}"
            )));
        }
        let nt = (t_final / tau).round() as usize;
        if nt == 0 || (nt as f64 * tau - t_final).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "T = {t_final} is not an integer multiple of tau = {tau}"
            )));
        }
        Ok(Self { tau, t_final, nt })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// Trapezoid weight of level `n`.
    pub fn weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.nt {
            0.5 * self.tau
        } else {
            self.tau
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    fields: Fields,
}

impl InitialCondition {
    /// Requires the Dirichlet node to carry `(1, 0, 0)` exactly.
    pub fn new(mesh: &Mesh1D, fields: Fields) -> Result<Self> {
        for f in &fields {
            mesh.check(f)?;
        }
        let d = mesh.dirichlet();
        for (i, f) in fields.iter().enumerate() {
            if f[d] != DIRICHLET_VALUES[i] {
                return Err(Error::invalid(format!(
                    "initial u{} at x = 1 is {}, boundary requires {}",
                    i + 1,
                    f[d],
                    DIRICHLET_VALUES[i]
                )));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("initial u{} is not finite", i + 1)));
            }
        }
        Ok(Self { fields })
    }

    #[cfg(test)]
    pub(crate) fn unchecked(fields: Fields) -> Self {
        Self { fields }
    }

    pub fn constant(mesh: &Mesh1D, values: [f64; 3]) -> Result<Self> {
        let n = mesh.nod();
        Self::new(mesh, values.map(|v| GridFunction::constant(n, v)))
    }

    pub fn fields(&self) -> &Fields {
        &self.fields
    }
}

/// Gaussian tumor and acid profiles centred at x = 0 with width `front_width`.
pub fn default_initial_condition(mesh: &Mesh1D, front_width: f64) -> Result<InitialCondition> {
    if !(front_width > 0.0 && front_width < 1.0) {
        return Err(Error::invalid(format!(
            "front width must lie in (0, 1), got {front_width}"
        )));
    }
    let bump = |x: f64| (-(x / front_width).powi(2)).exp();
    let mut fields: Fields = [
        GridFunction::from_fn(mesh, |x| 1.0 - bump(x)),
        GridFunction::from_fn(mesh, bump),
        GridFunction::from_fn(mesh, bump),
    ];
    let d = mesh.dirichlet();
    for (f, v) in fields.iter_mut().zip(DIRICHLET_VALUES) {
        f[d] = v;
    }
    InitialCondition::new(mesh, fields)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Absolute tolerance on the max-norm of the step residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
        }
    }
}

/// Which operator terms are assembled. Everything but [`Terms::FULL`] exists for test
/// harnesses that compare against reduced models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Terms {
    pub diffusion: bool,
    pub dirichlet: bool,
}

impl Terms {
    pub const FULL: Terms = Terms {
        diffusion: true,
        dirichlet: true,
    };
}

/// Residual and Jacobian of one implicit Euler step, node-major (`3 * node + field`).
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub residual: Vec<f64>,
    pub jacobian: BlockTridiagonal,
}

/// Residual `M (U^n - U^{n-1}) - tau G(U^n)` of the weak form and its Jacobian.
///
/// Reaction integrals use 3-point Gauss quadrature of the interpolated fields; diffusion
/// uses element-constant gradients with the element-midpoint weight. Dirichlet rows are
/// replaced by identity rows with zero residual.
pub fn step_residual(
    current: &Fields,
    previous: &Fields,
    p: &NondimParams,
    mesh: &Mesh1D,
    tau: f64,
) -> StepSystem {
    assemble_step(current, previous, p, mesh, 1.0, tau, Terms::FULL)
}

/// Linearization `A(u)` of the spatial operator `-G`, so that a step Jacobian is
/// `M ⊗ I + tau A(u)`. No boundary rows are modified.
pub fn spatial_jacobian(u: &Fields, p: &NondimParams, mesh: &Mesh1D) -> BlockTridiagonal {
    assemble_step(
        u,
        u,
        p,
        mesh,
        0.0,
        1.0,
        Terms {
            diffusion: true,
            dirichlet: false,
        },
    )
    .jacobian
}

pub(crate) fn assemble_step(
    current: &Fields,
    previous: &Fields,
    p: &NondimParams,
    mesh: &Mesh1D,
    mass_coeff: f64,
    tau: f64,
    terms: Terms,
) -> StepSystem {
    let nod = mesh.nod();
    let h = mesh.h();
    let mut residual = vec![0.0; 3 * nod];
    let mut jac = BlockTridiagonal::zeros(nod);
    let [u1, u2, u3] = current;
    let dphi = [-1.0 / h, 1.0 / h];

    for e in 0..mesh.elements() {
        let nodes = [e, e + 1];
        for &(xi, wq) in &GAUSS3 {
            let w = wq * h;
            let phi = shape(xi);
            let u = [u1.at(e, xi), u2.at(e, xi), u3.at(e, xi)];
            let du = [0, 1, 2].map(|i| current[i].at(e, xi) - previous[i].at(e, xi));
            let f = reaction(u[0], u[1], u[2], p).as_array();
            let jf = reaction_jacobian(u[0], u[1], u[2], p).entries;
            for a in 0..2 {
                let row = nodes[a];
                for i in 0..3 {
                    residual[3 * row + i] += w * phi[a] * (mass_coeff * du[i] - tau * f[i]);
                }
                for b in 0..2 {
                    let blk = jac.block_mut(row, nodes[b]);
                    let pp = w * phi[a] * phi[b];
                    for i in 0..3 {
                        blk[i][i] += mass_coeff * pp;
                        for k in 0..3 {
                            blk[i][k] -= tau * pp * jf[i][k];
                        }
                    }
                }
            }
        }

        if terms.diffusion {
            let w_mid = 1.0 - 0.5 * (u1[e] + u1[e + 1]);
            let g2 = u2.slope(e, h);
            let g3 = u3.slope(e, h);
            for a in 0..2 {
                let row = nodes[a];
                residual[3 * row + 1] += tau * p.d2 * w_mid * g2 * dphi[a] * h;
                residual[3 * row + 2] += tau * g3 * dphi[a] * h;
                for b in 0..2 {
                    let blk = jac.block_mut(row, nodes[b]);
                    let kk = dphi[a] * dphi[b] * h;
                    blk[1][1] += tau * p.d2 * w_mid * kk;
                    // d(1 - u1)/du1_b integrated against the constant gradient product.
                    blk[1][0] -= tau * p.d2 * 0.5 * g2 * dphi[a] * h;
                    blk[2][2] += tau * kk;
                }
            }
        }
    }

    if terms.dirichlet {
        let d = mesh.dirichlet();
        residual[3 * d..3 * d + 3].fill(0.0);
        jac.set_identity_rows(d);
    }
    StepSystem {
        residual,
        jacobian: jac,
    }
}

/// Forward solution on the full space-time grid; `levels[n]` holds time `n * tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    time: TimeGrid,
    levels: Vec<Fields>,
}

impl StateTrajectory {
    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn nod(&self) -> usize {
        self.levels[0][0].len()
    }

    pub fn levels(&self) -> &[Fields] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &Fields {
        &self.levels[n]
    }

    /// Field `i ∈ {0, 1, 2}` (u1, u2, u3) at level `n`.
    pub fn field(&self, i: usize, n: usize) -> &GridFunction {
        &self.levels[n][i]
    }

    pub fn final_level(&self) -> &Fields {
        self.levels.last().expect("trajectory has at least one level")
    }

    pub fn check_grid(&self, mesh: &Mesh1D, time: &TimeGrid) -> Result<()> {
        if self.nod() != mesh.nod() || self.time.nt() != time.nt() || self.time.tau() != time.tau()
        {
            return Err(Error::DimensionMismatch(format!(
                "trajectory grid (nod = {}, nt = {}, tau = {}) vs (nod = {}, nt = {}, tau = {})",
                self.nod(),
                self.time.nt(),
                self.time.tau(),
                mesh.nod(),
                time.nt(),
                time.tau()
            )));
        }
        Ok(())
    }

    /// CSV with header `t,x,u1,u2,u3`, one row per node per level.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh1D, out: W) -> Result<()> {
        write_fields_csv(out, mesh, &self.time, &self.levels, ["u1", "u2", "u3"])
    }
}

pub(crate) fn write_fields_csv<W: Write>(
    out: W,
    mesh: &Mesh1D,
    time: &TimeGrid,
    levels: &[Fields],
    names: [&str; 3],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", names[0], names[1], names[2]])?;
    for (n, lvl) in levels.iter().enumerate() {
        let t = time.t(n);
        for j in 0..mesh.nod() {
            w.write_record([
                t.to_string(),
                mesh.x(j).to_string(),
                lvl[0][j].to_string(),
                lvl[1][j].to_string(),
                lvl[2][j].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Newton residual history of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    /// Max-norm residual before each Newton update; the last entry is the accepted one.
    pub residuals: Vec<f64>,
}

impl StepReport {
    pub fn iterations(&self) -> usize {
        self.residuals.len() - 1
    }
}

pub fn solve_forward(
    p: &NondimParams,
    ic: &InitialCondition,
    mesh: &Mesh1D,
    time: &TimeGrid,
    newton: &NewtonOptions,
) -> Result<StateTrajectory> {
    solve_forward_with_report(p, ic, mesh, time, newton).map(|(t, _)| t)
}

pub fn solve_forward_with_report(
    p: &NondimParams,
    ic: &InitialCondition,
    mesh: &Mesh1D,
    time: &TimeGrid,
    newton: &NewtonOptions,
) -> Result<(StateTrajectory, Vec<StepReport>)> {
    p.validate()?;
    solve_forward_terms(p, ic, mesh, time, newton, Terms::FULL)
}

pub(crate) fn solve_forward_terms(
    p: &NondimParams,
    ic: &InitialCondition,
    mesh: &Mesh1D,
    time: &TimeGrid,
    newton: &NewtonOptions,
    terms: Terms,
) -> Result<(StateTrajectory, Vec<StepReport>)> {
    for f in ic.fields() {
        mesh.check(f)?;
    }
    let tau = time.tau();
    let mut levels: Vec<Fields> = Vec::with_capacity(time.nt() + 1);
    levels.push(ic.fields().clone());
    let mut reports = Vec::with_capacity(time.nt());
    let skip = if terms.dirichlet {
        Some(mesh.dirichlet())
    } else {
        None
    };

    for n in 1..=time.nt() {
        let previous = &levels[n - 1];
        let mut u = previous.clone();
        let mut residuals = Vec::new();
        loop {
            let sys = assemble_step(&u, previous, p, mesh, 1.0, tau, terms);
            let r = sys.residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            residuals.push(r);
            if r < newton.tol {
                break;
            }
            let iterations = residuals.len() - 1;
            if iterations >= newton.max_iter || !r.is_finite() {
                return Err(Error::NewtonFailed {
                    step: n,
                    iterations,
                    residual: r,
                });
            }
            let delta = sys.jacobian.solve(&sys.residual)?;
            for j in 0..mesh.nod() {
                if Some(j) == skip {
                    continue;
                }
                for (i, f) in u.iter_mut().enumerate() {
                    f[j] -= delta[3 * j + i];
                }
            }
        }
        reports.push(StepReport { step: n, residuals });
        levels.push(u);
    }
    Ok((
        StateTrajectory {
            time: *time,
            levels,
        },
        reports,
    ))
}

/// A complete forward problem up to the choice of `delta1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    pub params: NondimParams,
    pub mesh: Mesh1D,
    pub time: TimeGrid,
    pub initial: InitialCondition,
    pub newton: NewtonOptions,
}

impl ForwardModel {
    /// Experiment defaults: `rho2 = 1`, `D2 = 4e-5`, `delta3 = 1`, Gaussian fronts of width
    /// 0.1, on the given grid.
    pub fn experiment(delta1: f64, nod: usize, tau: f64, t_final: f64) -> Result<Self> {
        let mesh = Mesh1D::uniform(nod)?;
        let initial = default_initial_condition(&mesh, 0.1)?;
        Ok(Self {
            params: NondimParams::experiment(delta1),
            time: TimeGrid::new(tau, t_final)?,
            mesh,
            initial,
            newton: NewtonOptions::default(),
        })
    }

    /// The benchmark grid: 201 nodes, `tau = 0.5`, `T = 20`.
    pub fn baseline(delta1: f64) -> Self {
        Self::experiment(delta1, 201, 0.5, 20.0).expect("baseline grid is valid")
    }

    pub fn with_delta1(&self, delta1: f64) -> Self {
        Self {
            params: self.params.with_delta1(delta1),
            ..self.clone()
        }
    }

    pub fn solve(&self) -> Result<StateTrajectory> {
        solve_forward(
            &self.params,
            &self.initial,
            &self.mesh,
            &self.time,
            &self.newton,
        )
    }

    pub fn solve_at(&self, delta1: f64) -> Result<StateTrajectory> {
        let p = self.params.with_delta1(delta1);
        solve_forward(&p, &self.initial, &self.mesh, &self.time, &self.newton)
            .map_err(|e| e.at_parameter(delta1))
    }
}

/// Node ranges where both tissue densities drop below `threshold` (the hypocellular gap).
pub fn hypocellular_gap(mesh: &Mesh1D, fields: &Fields, threshold: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = None;
    for j in 0..mesh.nod() {
        let low = fields[0][j] < threshold && fields[1][j] < threshold;
        match (low, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                out.push((mesh.x(s), mesh.x(j - 1)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((mesh.x(s), 1.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fields(mesh: &Mesh1D, rng: &mut ChaCha8Rng) -> Fields {
        let n = mesh.nod();
        let mut f: Fields = [0, 1, 2].map(|_| {
            GridFunction((0..n).map(|_| rng.random_range(0.0..1.2)).collect())
        });
        for (g, v) in f.iter_mut().zip(DIRICHLET_VALUES) {
            g[n - 1] = v;
        }
        f
    }

    #[test]
    fn time_grid_validation() {
        let g = TimeGrid::new(0.5, 20.0).unwrap();
        assert_eq!(g.nt(), 40);
        assert!(TimeGrid::new(0.3, 1.0).is_err());
        assert!(TimeGrid::new(0.0, 1.0).is_err());
        assert!(TimeGrid::new(0.125, 20.0).is_ok());
    }

    #[test]
    fn default_ic_values() {
        let mesh = Mesh1D::uniform(11).unwrap();
        let ic = default_initial_condition(&mesh, 0.1).unwrap();
        let f = ic.fields();
        assert_eq!([f[0][0], f[1][0], f[2][0]], [0.0, 1.0, 1.0]);
        assert_eq!([f[0][10], f[1][10], f[2][10]], [1.0, 0.0, 0.0]);
        assert!((f[1][1] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((f[1][1] - 0.3679).abs() < 1e-4);
        assert!(default_initial_condition(&mesh, 0.0).is_err());
        assert!(default_initial_condition(&mesh, 1.0).is_err());
    }

    #[test]
    fn ic_must_match_boundary() {
        let mesh = Mesh1D::uniform(5).unwrap();
        assert!(InitialCondition::constant(&mesh, [1.0, 0.0, 0.0]).is_ok());
        assert!(InitialCondition::constant(&mesh, [0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn equilibrium_residual_vanishes() {
        let mesh = Mesh1D::uniform(9).unwrap();
        let ic = InitialCondition::constant(&mesh, [1.0, 0.0, 0.0]).unwrap();
        let sys = step_residual(ic.fields(), ic.fields(), &NondimParams::experiment(3.0), &mesh, 0.5);
        assert!(sys.residual.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn zero_tau_residual_is_mass_times_increment() {
        let mesh = Mesh1D::uniform(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_fields(&mesh, &mut rng);
        let b = random_fields(&mesh, &mut rng);
        let p = NondimParams::experiment(4.0);
        let sys = assemble_step(&a, &b, &p, &mesh, 1.0, 0.0, Terms {
            diffusion: true,
            dirichlet: false,
        });
        let m = crate::fem::assemble_mass(&mesh);
        for i in 0..3 {
            let diff: Vec<f64> = (0..7).map(|j| a[i][j] - b[i][j]).collect();
            let md = m.mul_vec(&diff);
            for j in 0..7 {
                assert!((sys.residual[3 * j + i] - md[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mesh = Mesh1D::uniform(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = NondimParams {
            delta1: 7.0,
            rho2: 1.3,
            d2: 0.2,
            delta3: 2.0,
        };
        let cur = random_fields(&mesh, &mut rng);
        let prev = random_fields(&mesh, &mut rng);
        let tau = 0.5;
        let sys = step_residual(&cur, &prev, &p, &mesh, tau);
        let step = 1e-6;
        let mut max_err = 0.0f64;
        let scale = sys.jacobian.norm_inf();
        for j in 0..mesh.nod() - 1 {
            for k in 0..3 {
                let mut up = cur.clone();
                let mut dn = cur.clone();
                up[k][j] += step;
                dn[k][j] -= step;
                let rp = step_residual(&up, &prev, &p, &mesh, tau).residual;
                let rm = step_residual(&dn, &prev, &p, &mesh, tau).residual;
                let mut e = vec![0.0; 3 * mesh.nod()];
                e[3 * j + k] = 1.0;
                let col = sys.jacobian.mul_vec(&e);
                for r in 0..col.len() {
                    let fd = (rp[r] - rm[r]) / (2.0 * step);
                    max_err = max_err.max((fd - col[r]).abs());
                }
            }
        }
        assert!(max_err < 1e-5 * scale, "max error {max_err:e} vs scale {scale:e}");
    }

    #[test]
    fn equilibrium_trajectory_is_constant() {
        let model = ForwardModel::baseline(12.5);
        let ic = InitialCondition::constant(&model.mesh, [1.0, 0.0, 0.0]).unwrap();
        let traj = solve_forward(&model.params, &ic, &model.mesh, &model.time, &model.newton).unwrap();
        for lvl in traj.levels() {
            assert!(lvl[0].iter().all(|&v| v == 1.0));
            assert!(lvl[1].iter().all(|&v| v == 0.0));
            assert!(lvl[2].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dirichlet_values_are_exact() {
        let model = ForwardModel::experiment(4.0, 51, 0.5, 5.0).unwrap();
        let traj = model.solve().unwrap();
        let d = model.mesh.dirichlet();
        for lvl in traj.levels() {
            assert_eq!([lvl[0][d], lvl[1][d], lvl[2][d]], DIRICHLET_VALUES);
        }
        assert_eq!(traj.level(0), model.initial.fields());
    }

    #[test]
    fn newton_converges_superlinearly_on_baseline() {
        let model = ForwardModel::baseline(12.5);
        let (_, reports) = solve_forward_with_report(
            &model.params,
            &model.initial,
            &model.mesh,
            &model.time,
            &model.newton,
        )
        .unwrap();
        let mut checked = 0;
        for rep in &reports {
            let r = &rep.residuals;
            assert!(*r.last().unwrap() < 1e-10);
            for w in r.windows(2) {
                if w[0] < 1e-3 && w[1] > 0.0 {
                    // Quadratic with a constant near 1e2, so r^1.5 dominates once r < 1e-4.
                    assert!(w[1] <= 1e3 * w[0] * w[0], "step {}: {:?}", rep.step, r);
                    if w[0] < 1e-4 {
                        assert!(w[1] < w[0].powf(1.5), "step {}: {:?}", rep.step, r);
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    fn implicit_euler_ode(u: [f64; 3], p: &NondimParams, tau: f64) -> [f64; 3] {
        let mut v = u;
        for _ in 0..50 {
            let f = reaction(v[0], v[1], v[2], p).as_array();
            let jf = reaction_jacobian(v[0], v[1], v[2], p).entries;
            let g: Vec<f64> = (0..3).map(|i| v[i] - u[i] - tau * f[i]).collect();
            // Triangular structure: solve u2 first, then u3, then u1.
            let a11 = 1.0 - tau * jf[1][1];
            let d2 = g[1] / a11;
            let a22 = 1.0 - tau * jf[2][2];
            let d3 = (g[2] + tau * jf[2][1] * d2) / a22;
            let a00 = 1.0 - tau * jf[0][0];
            let d1 = (g[0] + tau * jf[0][2] * d3) / a00;
            v = [v[0] - d1, v[1] - d2, v[2] - d3];
        }
        v
    }

    #[test]
    fn spatially_constant_mode_matches_scalar_ode() {
        let mesh = Mesh1D::uniform(11).unwrap();
        let p = NondimParams::experiment(6.0);
        let time = TimeGrid::new(0.5, 10.0).unwrap();
        let start = [0.8, 0.3, 0.2];
        let ic = InitialCondition::unchecked(start.map(|v| GridFunction::constant(11, v)));
        let (traj, _) = solve_forward_terms(&p, &ic, &mesh, &time, &NewtonOptions::default(), Terms {
            diffusion: false,
            dirichlet: false,
        })
        .unwrap();
        let mut u = start;
        for n in 1..=time.nt() {
            u = implicit_euler_ode(u, &p, time.tau());
            for i in 0..3 {
                for &v in traj.field(i, n).iter() {
                    assert!((v - u[i]).abs() < 1e-8, "step {n} field {i}: {v} vs {}", u[i]);
                }
            }
        }
    }

    #[test]
    fn refinement_is_first_order_in_time() {
        let grids = [(101, 0.5), (201, 0.25), (401, 0.125), (801, 0.0625)];
        let finals: Vec<Vec<f64>> = grids
            .iter()
            .map(|&(nod, tau)| {
                let m = ForwardModel::experiment(4.0, nod, tau, 10.0).unwrap();
                let u3 = m.solve().unwrap().final_level()[2].clone();
                let stride = (nod - 1) / 100;
                (0..=100).map(|j| u3[j * stride]).collect()
            })
            .collect();
        let diffs: Vec<f64> = finals
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
            .collect();
        for w in diffs.windows(2) {
            assert!(w[1] < w[0], "differences {diffs:?}");
            assert!((w[0] / w[1]).log2() >= 1.0, "observed order below one: {diffs:?}");
        }
    }

    #[test]
    fn gap_detection() {
        let mesh = Mesh1D::uniform(5).unwrap();
        let fields: Fields = [
            GridFunction(vec![0.0, 0.05, 0.05, 0.5, 1.0]),
            GridFunction(vec![1.0, 0.05, 0.02, 0.0, 0.0]),
            GridFunction::zeros(5),
        ];
        assert_eq!(hypocellular_gap(&mesh, &fields, 0.1), vec![(0.25, 0.5)]);
    }
}
