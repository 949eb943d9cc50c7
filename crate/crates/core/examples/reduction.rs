//! Reduces the PDE to its two-dimensional kernel and fits the reduced potential.
use thomlab::pde::Model;
use thomlab::reduction::{adams_simon_from_reduction, FitOptions, ReducedModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = ReducedModel::new(Model::Cubic);
    let s = model.sample(&[0.05, 0.02])?;
    println!("f(v) = {:.6e}, grad f = {:.6?}, residual {:.1e}", s.value, s.gradient, s.residual);

    let (verdict, fit) = adams_simon_from_reduction(&model, &FitOptions::default())?;
    println!("order p = {:?}, condition {:.1e}", fit.p, fit.condition);
    for (alpha, c) in fit.coefficients.iter().filter(|(_, c)| c.abs() > 1e-8) {
        println!("  x^{alpha:?}: {c:+.6}");
    }
    println!("3/(16 pi) = {:.6}", 3.0 / (16.0 * std::f64::consts::PI));
    println!("verdict: {verdict:?}");
    Ok(())
}
