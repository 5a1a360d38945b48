// Literature rate constants mapped to the four dimensionless groups.

use acidfit::model::{nondimensionalize, DimensionalParams};

pub fn run_example() -> acidfit::Result<()> {
    let dims = DimensionalParams::literature(0.05);
    let s = nondimensionalize(&dims)?;
    println!("delta1 = {}", s.params.delta1);
    println!("rho2   = {}", s.params.rho2);
    println!("D2     = {:e}", s.params.d2);
    println!("delta3 = {}", s.params.delta3);
    println!("L0     = {:e} M", s.acid_scale);
    println!("length scale = {:e} cm", dims.length_scale());
    Ok(())
}

fn main() -> acidfit::Result<()> {
    run_example()
}
