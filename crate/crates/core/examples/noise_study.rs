// Fits on noisy synthetic data at two noise levels, written as the study CSV.

use acidfit::experiments::{run_noise_study, write_study_csv, ExperimentConfig};

pub fn run_example() -> acidfit::Result<()> {
    let cfg = ExperimentConfig {
        sigmas: vec![0.05, 0.1],
        trials: 10,
        ..ExperimentConfig::default()
    };
    let rows = run_noise_study(&cfg)?;
    write_study_csv(std::io::stdout().lock(), &cfg, &rows)?;
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
