// The adjoint identity <A eta, zeta> = <eta, A* zeta> on a small space-time grid.

use acidfit::adjoint::{adjoint_form, linearized_constraint_form, AdjointScheme};
use acidfit::fem::GridFunction;
use acidfit::forward::{Fields, ForwardModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_fields(levels: usize, nod: usize, rng: &mut ChaCha20Rng) -> Vec<Fields> {
    (0..levels)
        .map(|_| {
            [0, 1, 2].map(|_| {
                let mut v: Vec<f64> = (0..nod).map(|_| rng.random_range(-1.0..1.0)).collect();
                v[nod - 1] = 0.0;
                GridFunction(v)
            })
        })
        .collect()
}

pub fn run_example() -> acidfit::Result<()> {
    let model = ForwardModel::experiment(8.0, 11, 0.5, 2.0)?;
    let traj = model.solve()?;
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for scheme in AdjointScheme::ALL {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let eta = random_fields(5, 11, &mut rng);
            let lambda = random_fields(5, 11, &mut rng);
            let gamma = random_fields(1, 11, &mut rng).remove(0);
            let a = linearized_constraint_form(scheme, &model.params, &traj, &model.mesh, &eta, &lambda, &gamma);
            let b = adjoint_form(scheme, &model.params, &traj, &model.mesh, &eta, &lambda, &gamma);
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
        println!("{scheme:>10}: worst relative mismatch {worst:.2e}");
    }
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
