//! Critical points of the leading part on the sphere and the Adams-Simon condition.
use thomlab::potential::Potential;
use thomlab::sphere::{adams_simon, ansatz_solution, critical_points, AdamsSimonMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Potential::bubble_sheet();
    let gp = g.leading_part()?;
    for cp in critical_points(&gp, 200, 1e-12, 0)? {
        println!("w = {:>8.4?}  g_p(w) = {:+.6}  residual {:.1e}", cp.direction, cp.value, cp.residual);
    }
    println!("parabolic: {:?}", adams_simon(&gp, AdamsSimonMode::Parabolic)?);
    println!("elliptic m=-1: {:?}", adams_simon(&gp, AdamsSimonMode::Elliptic { m: -1.0 })?);

    let w = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0];
    println!("ansatz at t=100: {:?}", ansatz_solution(&gp, &w, 100.0)?);
    Ok(())
}
