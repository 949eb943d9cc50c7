//! Builds polynomial potentials and inspects their homogeneous structure.
use thomlab::potential::Potential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Potential::bubble_sheet();
    println!("{}: dim {}, order p = {}", g.label(), g.dim(), g.order_p()?);
    let y = [0.1, 0.2, -0.05];
    println!("g(y) = {:.6e}", g.eval(&y)?);
    println!("grad g(y) = {:?}", g.grad(&y)?);
    println!("spherical gradient = {:?}", g.spherical_gradient(&y)?);

    let mixed = Potential::new(2, [(vec![2, 0], 0.5), (vec![0, 4], -0.25), (vec![1, 3], 0.1)])?;
    for (d, part) in mixed.homogeneous_components() {
        println!("degree {d}: {} term(s)", part.terms().len());
    }
    println!("{}", mixed.to_json_string());
    Ok(())
}
