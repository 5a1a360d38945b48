// Final-time profiles for a mild and an aggressive tumor, with the hypocellular gap.
//
// `cargo run --release --example forward_profiles -- out.csv` also writes the aggressive
// trajectory as CSV.

use std::fs::File;

use acidfit::forward::{hypocellular_gap, ForwardModel};

pub fn run_example() -> acidfit::Result<()> {
    for delta1 in [0.5, 12.5] {
        let model = ForwardModel::baseline(delta1);
        let traj = model.solve()?;
        let last = traj.final_level();
        println!("delta1 = {delta1}");
        println!("{:>6} {:>9} {:>9} {:>9}", "x", "u1", "u2", "u3");
        for j in (0..model.mesh.nod()).step_by(20) {
            println!(
                "{:>6.2} {:>9.5} {:>9.5} {:>9.5}",
                model.mesh.x(j),
                last[0][j],
                last[1][j],
                last[2][j]
            );
        }
        let gap = hypocellular_gap(&model.mesh, last, 0.1);
        println!("gap (u1 < 0.1 and u2 < 0.1): {gap:?}\n");
        if let (Some(path), 12.5) = (std::env::args().nth(1), delta1) {
            traj.write_csv(&model.mesh, File::create(path)?)?;
        }
    }
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
