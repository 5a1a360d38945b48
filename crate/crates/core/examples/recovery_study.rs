// Noiseless recovery of each reference delta1 from uniformly random starts.

use acidfit::experiments::{run_recovery_study, ExperimentConfig, StartPolicy, RECOVERY_TARGETS};

pub fn run_example() -> acidfit::Result<()> {
    let cfg = ExperimentConfig {
        trials: 5,
        start: StartPolicy::UniformRandom,
        ..ExperimentConfig::default()
    };
    for row in run_recovery_study(&cfg, &RECOVERY_TARGETS)? {
        let starts: Vec<String> = row.outcomes.iter().map(|o| format!("{:.2}", o.start)).collect();
        println!(
            "delta1_hat = {:>4}: mean {:.7} std {:.2e} failures {} (starts {})",
            row.delta1_hat,
            row.mean,
            row.std,
            row.failures,
            starts.join(" ")
        );
    }
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
