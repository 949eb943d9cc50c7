//! Samples the characteristic exponents of a potential near the origin.
use thomlab::asymptotics::{characteristic_exponents, region_membership, ExponentSampling, RegionParams};
use thomlab::potential::Potential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Potential::bubble_sheet();
    let sampling = ExponentSampling { n_samples: 5000, ..Default::default() };
    for e in characteristic_exponents(&g, &sampling)? {
        println!("q = {} (raw {:.4}), support {:.3}, {} samples", e.q, e.q_raw, e.support_fraction, e.count);
    }
    let params = RegionParams { epsilon: 1.0, r: 0.01, omega: 0.1, q: 3.0 };
    let m = region_membership(&g, &[0.003, 0.003, 0.0], &params)?;
    println!("in W: {}", m.in_w);
    Ok(())
}
