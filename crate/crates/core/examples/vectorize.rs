//! Diagonalises the linearised heavy-ball system and projects a state onto its basis.
use nalgebra::DMatrix;
use thomlab::flow::{project_coefficients, vectorize};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let sys = vectorize(&a, -1.0)?;
    println!("lambda = {:?}", sys.lambda);
    println!("classes = {:?}", sys.class);
    println!("identity check max error = {:.2e}", sys.verify().max_error());

    let c = project_coefficients(&sys, &[0.1, -0.2, 0.05], &[0.0, 0.01, 0.0])?;
    println!("sum of squared coefficients = {:.6e}", c.sum_of_squares());
    Ok(())
}
