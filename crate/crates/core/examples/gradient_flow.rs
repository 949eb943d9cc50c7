//! Integrates a gradient flow, with and without an injected error term.
use thomlab::flow::{integrate_gradient, ErrorModel, Tolerances};
use thomlab::potential::{norm, Potential};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Potential::bubble_sheet();
    let ctrl = Tolerances::default();
    let y0 = [0.0357, 0.035, 0.0];

    let clean = integrate_gradient(&g, &y0, 1.0, 1e5, &ctrl, &ErrorModel::None)?;
    let last = clean.last();
    println!("clean: {} samples, |y({:.0e})| = {:.4e}", clean.len(), last.t, norm(&last.y));

    let quartic = Potential::radial(2, 4, 0.25)?;
    let err = ErrorModel::SyntheticA2 { rho: 0.5, n_pow: 4, b_n: 1.0, theta: 1.0, seed: 7 };
    let noisy = integrate_gradient(&quartic, &[0.05, 0.02], 1.0, 1e5, &ctrl, &err)?;
    println!("perturbed quartic: |y| = {:.4e}, max error/bound = {:?}", norm(&noisy.last().y), noisy.meta.err_bound_ratio);

    let mut out = Vec::new();
    clean.write_csv(&mut out)?;
    println!("{}", String::from_utf8(out)?.lines().next().unwrap_or(""));
    Ok(())
}
