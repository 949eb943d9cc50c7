//! Decay rate, limiting direction, decay class and G* monitor of one trajectory.
use thomlab::asymptotics::{classify_decay, fit_rate, monitor_gstar, secant_analysis};
use thomlab::flow::{integrate_gradient, ErrorModel, Tolerances};
use thomlab::potential::Potential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Potential::bubble_sheet();
    let traj = integrate_gradient(&g, &[0.0357, 0.035, 0.0], 1.0, 1e6, &Tolerances::default(), &ErrorModel::None)?;

    let fit = fit_rate(&traj, None)?;
    println!("ell* = {} (raw {:.4}), alpha0 = {:.6}, residual {:.1e}", fit.ell_star, fit.ell_raw, fit.alpha0, fit.residual);

    let sec = secant_analysis(&traj, Some(&g.leading_part()?), 1e-4)?;
    println!("theta* = {:.6?}, tail arclength {:.1e}", sec.theta_star, sec.tail_arclength_total);
    println!("criticality residual {:?}", sec.criticality_residual);

    println!("class: {}", classify_decay(&traj, None).name());

    let gs = monitor_gstar(&traj, fit.ell_star, 0.2, Some(fit.alpha0), None);
    println!("G* monotone violations after t={:.1e}: {}", gs.burn_in_until, gs.monotone_violations);
    Ok(())
}
