//! Overdamped heavy ball: the decay constant scales like 1/(4|m|).
use thomlab::asymptotics::fit_rate;
use thomlab::flow::{integrate_heavy_ball, Tolerances};
use thomlab::potential::Potential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = Potential::radial(1, 4, -0.25)?;
    for m in [-1.0, -2.0, -4.0] {
        let traj = integrate_heavy_ball(&f, m, &[0.05], &[0.0], 1.0, 1e6, &Tolerances::default())?;
        let fit = fit_rate(&traj, None)?;
        println!("m = {m:+}: ell* = {}, alpha0 = {:.5} (1/(4|m|) = {:.5})", fit.ell_star, fit.alpha0, 0.25 / m.abs());
    }
    Ok(())
}
