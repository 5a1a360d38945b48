// Recovers delta1 from noiseless synthetic acid data and prints the iteration trace.

use acidfit::forward::ForwardModel;
use acidfit::objective::{MisfitProblem, ObservationSet};
use acidfit::optimizer::{fit, OptimOptions};

pub fn run_example() -> acidfit::Result<()> {
    let truth = ForwardModel::baseline(12.5);
    let obs = ObservationSet::from_trajectory(&truth.solve()?);
    let problem = MisfitProblem::new(truth, obs)?;
    let result = fit(&problem, 8.0, &OptimOptions::default())?;
    result.write_trace_csv(std::io::stdout().lock())?;
    println!(
        "delta1* = {:.8} after {} iterations ({:?})",
        result.delta1_star, result.iterations, result.termination
    );
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
