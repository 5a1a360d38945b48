// The reduced functional over the admissible interval for data generated at 12.5.

use acidfit::experiments::{generate_synthetic, run_functional_sweep, ExperimentConfig};

pub fn run_example() -> acidfit::Result<()> {
    let cfg = ExperimentConfig {
        delta1_hat: 12.5,
        ..ExperimentConfig::default()
    };
    let obs = generate_synthetic(&cfg, 0.0, 0)?;
    let curve = run_functional_sweep(&cfg, &obs, 0.0, 20.0, 41)?;
    let peak = curve.iter().map(|c| c.1).fold(0.0, f64::max);
    for (d, j) in &curve {
        let bar = (40.0 * j / peak).round() as usize;
        println!("{d:>5.1} {j:>12.5e} {}", "#".repeat(bar));
    }
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
