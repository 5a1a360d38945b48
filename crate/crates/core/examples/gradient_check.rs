// Adjoint gradients of the three time-level conventions against central differences,
// under simultaneous refinement of h and tau.

use acidfit::adjoint::AdjointScheme;
use acidfit::forward::ForwardModel;
use acidfit::objective::{gradient_fd, MisfitProblem, ObservationSet, ReducedFunctional};

pub fn run_example() -> acidfit::Result<()> {
    let (delta1_hat, delta1) = (12.5, 8.0);
    println!("{:>11} {:>4} {:>6} {:>14} {:>14} {:>10}", "scheme", "nod", "tau", "adjoint", "fd", "rel");
    for (nod, tau) in [(201, 0.5), (401, 0.25), (801, 0.125)] {
        let truth = ForwardModel::experiment(delta1_hat, nod, tau, 20.0)?;
        let obs = ObservationSet::from_trajectory(&truth.solve()?);
        let base = MisfitProblem::new(truth, obs)?;
        let fd = gradient_fd(&base, delta1)?;
        for scheme in AdjointScheme::ALL {
            let problem = base.clone().with_scheme(scheme);
            let (_, g) = problem.value_and_gradient(delta1)?;
            println!(
                "{:>11} {nod:>4} {tau:>6} {g:>14.6e} {fd:>14.6e} {:>10.3e}",
                scheme.to_string(),
                (g - fd).abs() / fd.abs()
            );
        }
    }
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
