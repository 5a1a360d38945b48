// Residual indicators per field, and their decay when the mesh is refined.

use acidfit::estimator::estimate_aposteriori;
use acidfit::forward::ForwardModel;

pub fn run_example() -> acidfit::Result<()> {
    for delta1 in [0.5, 4.0, 12.5, 16.0] {
        let mut previous: Option<[f64; 3]> = None;
        for nod in [201, 401] {
            let model = ForwardModel::experiment(delta1, nod, 0.5, 20.0)?;
            let traj = model.solve()?;
            let est = estimate_aposteriori(&traj, &model.params, &model.mesh, &model.time)?;
            let [e1, e2, e3] = est.eta;
            print!("delta1 = {delta1:>4} nod = {nod}: eta = ({e1:.3e}, {e2:.3e}, {e3:.3e})");
            if let Some(p) = previous {
                print!("  ratios ({:.2}, {:.2}, {:.2})", p[0] / e1, p[1] / e2, p[2] / e3);
            }
            println!();
            previous = Some(est.eta);
        }
    }
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
