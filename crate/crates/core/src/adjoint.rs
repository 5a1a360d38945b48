//! Backward-in-time adjoint solve.
//!
//! The adjoint weak form, posed for `λ ∈ H¹_D` with `λ(·, T) = 0`, is discretized with
//! implicit Euler running backwards:
//!
//! ```text
//! M (λ^{n-1} - λ^n) + tau A*(u) λ^{n-1} + tau ∫ (u3 - û3) φ = 0
//! ```
//!
//! where `A*` collects the reaction, diffusion and coupling terms. The time levels at
//! which the state coefficients and the data source are sampled are set by
//! [`AdjointScheme`].

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, shape, BlockTridiagonal, GridFunction, Mesh1D, Tridiagonal, GAUSS3};
use crate::forward::{spatial_jacobian, write_fields_csv, Fields, StateTrajectory, TimeGrid};
use crate::model::NondimParams;
use crate::objective::ObservationSet;

/// Time-level convention of the backward sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointScheme {
    /// Discretized continuous adjoint. The step producing `λ^{n-1}` uses state
    /// coefficients at level `n` and the data source at level `n - 1`; the gradient
    /// pairs `λ^{n-1}` with `u^n` over each interval.
    #[default]
    Continuous,
    /// Discretized continuous adjoint with coefficients and source both at the unknown's
    /// level `n - 1` and the gradient by trapezoid quadrature over all levels.
    Lagged,
    /// Exact adjoint of the implicit Euler forward scheme and trapezoid misfit:
    /// coefficients and source at level `n`, gradient paired with the step residuals.
    Discrete,
}

impl AdjointScheme {
    pub const ALL: [AdjointScheme; 3] = [AdjointScheme::Continuous, AdjointScheme::Lagged, AdjointScheme::Discrete];

    /// Maps step `n` (solving for `λ^{n-1}`) to `(coefficient level, source level, source weight)`.
    fn levels(self, n: usize, time: &TimeGrid) -> (usize, usize, f64) {
        match self {
            AdjointScheme::Continuous => (n, n - 1, time.tau()),
            AdjointScheme::Lagged => (n - 1, n - 1, time.tau()),
            AdjointScheme::Discrete => (n, n, time.weight(n)),
        }
    }
}

impl std::fmt::Display for AdjointScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdjointScheme::Continuous => "continuous",
            AdjointScheme::Lagged => "lagged",
            AdjointScheme::Discrete => "discrete",
        })
    }
}

impl std::str::FromStr for AdjointScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(AdjointScheme::Continuous),
            "lagged" => Ok(AdjointScheme::Lagged),
            "discrete" => Ok(AdjointScheme::Discrete),
            other => Err(Error::invalid(format!("unknown adjoint scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    time: TimeGrid,
    scheme: AdjointScheme,
    levels: Vec<Fields>,
}

impl AdjointTrajectory {
    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn scheme(&self) -> AdjointScheme {
        self.scheme
    }

    pub fn levels(&self) -> &[Fields] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &Fields {
        &self.levels[n]
    }

    pub fn field(&self, i: usize, n: usize) -> &GridFunction {
        &self.levels[n][i]
    }

    /// Multiplier of the initial condition, `γ = λ(·, 0)`.
    pub fn gamma(&self) -> &Fields {
        &self.levels[0]
    }

    pub fn nod(&self) -> usize {
        self.levels[0][0].len()
    }

    /// CSV with header `t,x,lambda1,lambda2,lambda3`.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh1D, out: W) -> Result<()> {
        write_fields_csv(out, mesh, &self.time, &self.levels, ["lambda1", "lambda2", "lambda3"])
    }
}

/// Adjoint operator `A*(u)` acting on `λ`; rows are test directions `η`.
pub fn adjoint_operator(u: &Fields, p: &NondimParams, mesh: &Mesh1D) -> BlockTridiagonal {
    assemble_adjoint(u, p, mesh, 0.0, 1.0)
}

fn assemble_adjoint(
    u: &Fields,
    p: &NondimParams,
    mesh: &Mesh1D,
    mass_coeff: f64,
    tau: f64,
) -> BlockTridiagonal {
    let nod = mesh.nod();
    let h = mesh.h();
    let dphi = [-1.0 / h, 1.0 / h];
    let [u1, u2, u3] = u;
    let mut a = BlockTridiagonal::zeros(nod);
    for e in 0..mesh.elements() {
        let nodes = [e, e + 1];
        for &(xi, wq) in &GAUSS3 {
            let w = wq * h;
            let phi = shape(xi);
            let (v1, v2, v3) = (u1.at(e, xi), u2.at(e, xi), u3.at(e, xi));
            // c[test][lambda]
            let mut c = [[0.0; 3]; 3];
            c[0][0] = -(1.0 - 2.0 * v1) + p.delta1 * v3;
            c[1][1] = -p.rho2 * (1.0 - 2.0 * v2);
            c[1][2] = -p.delta3;
            c[2][2] = p.delta3;
            c[2][0] = p.delta1 * v1;
            for a_ in 0..2 {
                for b in 0..2 {
                    let pp = w * phi[a_] * phi[b];
                    let blk = a.block_mut(nodes[a_], nodes[b]);
                    for i in 0..3 {
                        blk[i][i] += mass_coeff * pp;
                        for k in 0..3 {
                            blk[i][k] += tau * pp * c[i][k];
                        }
                    }
                }
            }
        }
        let w_mid = 1.0 - 0.5 * (u1[e] + u1[e + 1]);
        let g2 = u2.slope(e, h);
        for a_ in 0..2 {
            for b in 0..2 {
                let kk = dphi[a_] * dphi[b] * h;
                let blk = a.block_mut(nodes[a_], nodes[b]);
                blk[1][1] += tau * p.d2 * w_mid * kk;
                blk[2][2] += tau * kk;
                // -D2 η1 u2_x λ2_x, with ∫ φ_a over the element equal to h / 2.
                blk[0][1] -= tau * p.d2 * g2 * dphi[b] * 0.5 * h;
            }
        }
    }
    a
}

fn mass_apply(m: &Tridiagonal, f: &Fields) -> Fields {
    [0, 1, 2].map(|i| GridFunction(m.mul_vec(&f[i])))
}

fn interleave(f: &Fields) -> Vec<f64> {
    let n = f[0].len();
    let mut v = vec![0.0; 3 * n];
    for j in 0..n {
        for i in 0..3 {
            v[3 * j + i] = f[i][j];
        }
    }
    v
}

fn split(v: &[f64]) -> Fields {
    let n = v.len() / 3;
    [0, 1, 2].map(|i| GridFunction((0..n).map(|j| v[3 * j + i]).collect()))
}

pub fn solve_adjoint(
    p: &NondimParams,
    traj: &StateTrajectory,
    obs: &ObservationSet,
    mesh: &Mesh1D,
    time: &TimeGrid,
) -> Result<AdjointTrajectory> {
    solve_adjoint_with(p, traj, obs, mesh, time, AdjointScheme::Continuous)
}

pub fn solve_adjoint_with(
    p: &NondimParams,
    traj: &StateTrajectory,
    obs: &ObservationSet,
    mesh: &Mesh1D,
    time: &TimeGrid,
    scheme: AdjointScheme,
) -> Result<AdjointTrajectory> {
    traj.check_grid(mesh, time)?;
    obs.check_grid(mesh, time)?;
    let nod = mesh.nod();
    let nt = time.nt();
    let tau = time.tau();
    let d = mesh.dirichlet();
    let m = assemble_mass(mesh);

    let zero: Fields = [0, 1, 2].map(|_| GridFunction::zeros(nod));
    let mut levels = vec![zero.clone(); nt + 1];
    for n in (1..=nt).rev() {
        let (coef, src_level, src_weight) = scheme.levels(n, time);
        let mut a = assemble_adjoint(traj.level(coef), p, mesh, 1.0, tau);
        a.set_identity_rows(d);

        let mut rhs = interleave(&mass_apply(&m, &levels[n]));
        let misfit: Vec<f64> = traj
            .field(2, src_level)
            .iter()
            .zip(obs.level(src_level).iter())
            .map(|(u, o)| u - o)
            .collect();
        for (j, s) in m.mul_vec(&misfit).into_iter().enumerate() {
            rhs[3 * j + 2] -= src_weight * s;
        }
        rhs[3 * d..3 * d + 3].fill(0.0);

        let sol = a.solve(&rhs).map_err(|e| match e {
            Error::SingularSystem { pivot } => Error::AdjointSingular { step: n, pivot },
            e => e,
        })?;
        let mut lam = split(&sol);
        for f in lam.iter_mut() {
            f[d] = 0.0;
        }
        levels[n - 1] = lam;
    }
    Ok(AdjointTrajectory {
        time: *time,
        scheme,
        levels,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fields_dot(a: &Fields, b: &Fields) -> f64 {
    (0..3).map(|i| dot(&a[i], &b[i])).sum()
}

/// `⟨(∂E/∂u) η, ζ⟩` for the linearized time-discrete constraint whose adjoint is the
/// backward sweep of `scheme`.
///
/// For [`AdjointScheme::Continuous`] and [`AdjointScheme::Discrete`] this is the implicit
/// Euler linearization
///
/// ```text
/// Σ_{n=1}^{nt} λ^{n−1}·[M(η^n − η^{n−1}) + tau A(u^n) η^n] + γ·M η^0
/// ```
///
/// and for [`AdjointScheme::Lagged`]
///
/// ```text
/// Σ_{n=1}^{nt} λ^n·M(η^n − η^{n−1}) + tau Σ_{m=0}^{nt−1} λ^m·A(u^m) η^m + γ·M η^0
/// ```
///
/// with `A(u)` the linearized forward spatial operator.
pub fn linearized_constraint_form(
    scheme: AdjointScheme,
    p: &NondimParams,
    traj: &StateTrajectory,
    mesh: &Mesh1D,
    eta: &[Fields],
    lambda: &[Fields],
    gamma: &Fields,
) -> f64 {
    let nt = traj.time().nt();
    let tau = traj.time().tau();
    let m = assemble_mass(mesh);
    let mut s = fields_dot(gamma, &mass_apply(&m, &eta[0]));
    for n in 1..=nt {
        let diff: Fields = [0, 1, 2].map(|i| {
            GridFunction(eta[n][i].iter().zip(eta[n - 1][i].iter()).map(|(a, b)| a - b).collect())
        });
        let (mult, coef) = match scheme {
            AdjointScheme::Lagged => (n, n - 1),
            _ => (n - 1, n),
        };
        s += fields_dot(&lambda[mult], &mass_apply(&m, &diff));
        let a = spatial_jacobian(traj.level(coef), p, mesh);
        s += tau * dot(&interleave(&lambda[n - 1]), &a.mul_vec(&interleave(&eta[coef])));
    }
    s
}

/// `⟨η, (∂E/∂u)* ζ⟩` built from the adjoint operator assembly.
pub fn adjoint_form(
    scheme: AdjointScheme,
    p: &NondimParams,
    traj: &StateTrajectory,
    mesh: &Mesh1D,
    eta: &[Fields],
    lambda: &[Fields],
    gamma: &Fields,
) -> f64 {
    let nt = traj.time().nt();
    let tau = traj.time().tau();
    let m = assemble_mass(mesh);
    let combine = |a: &Fields, b: &Fields, c: &Fields| -> Fields {
        [0, 1, 2].map(|i| GridFunction((0..a[i].len()).map(|j| a[i][j] - b[i][j] + tau * c[i][j]).collect()))
    };
    let zero: Fields = [0, 1, 2].map(|_| GridFunction::zeros(mesh.nod()));
    let mut s = 0.0;
    for k in 0..=nt {
        // Coefficient of η^k.
        let r = match scheme {
            AdjointScheme::Lagged => {
                let head = if k == 0 { gamma } else { &lambda[k] };
                if k < nt {
                    let al = split(&adjoint_operator(traj.level(k), p, mesh).mul_vec(&interleave(&lambda[k])));
                    combine(&mass_apply(&m, head), &mass_apply(&m, &lambda[k + 1]), &al)
                } else {
                    mass_apply(&m, head)
                }
            }
            _ => {
                if k == 0 {
                    combine(&mass_apply(&m, gamma), &mass_apply(&m, &lambda[0]), &zero)
                } else {
                    let al = split(&adjoint_operator(traj.level(k), p, mesh).mul_vec(&interleave(&lambda[k - 1])));
                    let next = if k < nt { mass_apply(&m, &lambda[k]) } else { zero.clone() };
                    combine(&mass_apply(&m, &lambda[k - 1]), &next, &al)
                }
            }
        };
        s += fields_dot(&eta[k], &r);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ForwardModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ForwardModel, StateTrajectory) {
        let model = ForwardModel::experiment(8.0, 41, 0.5, 5.0).unwrap();
        let traj = model.solve().unwrap();
        (model, traj)
    }

    #[test]
    fn exact_data_gives_zero_adjoint() {
        let (model, traj) = setup();
        let obs = ObservationSet::from_trajectory(&traj);
        for scheme in AdjointScheme::ALL {
            let adj = solve_adjoint_with(&model.params, &traj, &obs, &model.mesh, &model.time, scheme)
                .unwrap();
            assert!(adj.levels().iter().flatten().all(|f| f.iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn final_and_boundary_conditions_hold() {
        let (model, traj) = setup();
        let other = model.with_delta1(3.0).solve().unwrap();
        let obs = ObservationSet::from_trajectory(&other);
        let adj = solve_adjoint(&model.params, &traj, &obs, &model.mesh, &model.time).unwrap();
        let nt = model.time.nt();
        assert!(adj.level(nt).iter().all(|f| f.iter().all(|&v| v == 0.0)));
        let d = model.mesh.dirichlet();
        for lvl in adj.levels() {
            assert_eq!([lvl[0][d], lvl[1][d], lvl[2][d]], [0.0; 3]);
        }
        assert!(adj.level(0)[2].iter().any(|&v| v != 0.0));
        assert_eq!(adj.gamma(), adj.level(0));
    }

    #[test]
    fn adjoint_is_linear_in_the_source() {
        let (model, traj) = setup();
        let other = model.with_delta1(3.0).solve().unwrap();
        let obs = ObservationSet::from_trajectory(&other);
        // Doubling u3 - û3: û3' = 2 û3 - u3.
        let doubled = ObservationSet::new(
            &model.mesh,
            &model.time,
            (0..=model.time.nt())
                .map(|n| {
                    GridFunction(
                        obs.level(n)
                            .iter()
                            .zip(traj.field(2, n).iter())
                            .map(|(o, u)| 2.0 * o - u)
                            .collect(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let a1 = solve_adjoint(&model.params, &traj, &obs, &model.mesh, &model.time).unwrap();
        let a2 = solve_adjoint(&model.params, &traj, &doubled, &model.mesh, &model.time).unwrap();
        let mut max = 0.0f64;
        let mut scale = 0.0f64;
        for (l1, l2) in a1.levels().iter().zip(a2.levels()) {
            for i in 0..3 {
                for (x, y) in l1[i].iter().zip(l2[i].iter()) {
                    max = max.max((2.0 * x - y).abs());
                    scale = scale.max(x.abs());
                }
            }
        }
        assert!(max <= 1e-12 * scale, "{max:e} vs {scale:e}");
    }

    fn random_space_time(nt: usize, nod: usize, rng: &mut ChaCha8Rng) -> Vec<Fields> {
        (0..=nt)
            .map(|_| {
                [0, 1, 2].map(|_| {
                    let mut v: Vec<f64> = (0..nod).map(|_| rng.random_range(-1.0..1.0)).collect();
                    v[nod - 1] = 0.0;
                    GridFunction(v)
                })
            })
            .collect()
    }

    #[test]
    fn operator_is_transpose_of_forward_linearization() {
        let (model, traj) = setup();
        for n in [0, 3, 10] {
            let a = spatial_jacobian(traj.level(n), &model.params, &model.mesh);
            let b = adjoint_operator(traj.level(n), &model.params, &model.mesh);
            for j in 0..model.mesh.nod() {
                for r in 0..3 {
                    for c in 0..3 {
                        assert!((a.diag[j][r][c] - b.diag[j][c][r]).abs() < 1e-13);
                        if j > 0 {
                            assert!((a.lower[j][r][c] - b.upper[j - 1][c][r]).abs() < 1e-13);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn duality_on_small_grid() {
        let model = ForwardModel::experiment(8.0, 11, 0.5, 2.0).unwrap();
        let traj = model.solve().unwrap();
        let norm = |f: &[Fields]| f.iter().flatten().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for scheme in AdjointScheme::ALL {
            for _ in 0..5 {
                let eta = random_space_time(4, 11, &mut rng);
                let mut lambda = random_space_time(4, 11, &mut rng);
                lambda[4] = [0, 1, 2].map(|_| GridFunction::zeros(11));
                let gamma = random_space_time(0, 11, &mut rng).remove(0);
                let lhs = linearized_constraint_form(scheme, &model.params, &traj, &model.mesh, &eta, &lambda, &gamma);
                let rhs = adjoint_form(scheme, &model.params, &traj, &model.mesh, &eta, &lambda, &gamma);
                let bound = 1e-8 * norm(&eta) * (norm(&lambda).powi(2) + norm(std::slice::from_ref(&gamma)).powi(2)).sqrt();
                assert!((lhs - rhs).abs() <= bound, "{scheme}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for scheme in AdjointScheme::ALL {
            assert_eq!(scheme.to_string().parse::<AdjointScheme>().unwrap(), scheme);
        }
        assert!("implicit".parse::<AdjointScheme>().is_err());
    }
}
