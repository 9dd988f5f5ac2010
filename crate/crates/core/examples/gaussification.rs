//! Iterated Gaussification: two copies meet on 50:50 splitters at each site and
//! the step succeeds when both auxiliary ports show no photons. A pure
//! Schmidt-diagonal input flows towards a two-mode squeezed state; a mixed one
//! towards the Gaussian state fixed by its low-order elements.

use std::error::Error;

use entsim::distill::{gaussify_limit, gaussify_pure_step, mixed_example, run_protocol, ProtocolConfig, PureSchmidtCoeffs};
use entsim::gaussian::{log_negativity_gaussian, GaussianState};

fn main() -> Result<(), Box<dyn Error>> {
    let mut alpha = PureSchmidtCoeffs::from_real(&[1.0, 0.5])?;
    println!("pure input (|00> + 0.5|11>)");
    for step in 1..=5 {
        let (next, p) = gaussify_pure_step(&alpha)?;
        let ratio = next.as_slice()[1] / next.as_slice()[0];
        let width = next.as_slice()[next.len() - 1] / next.as_slice()[0];
        println!("  step {step}: P = {p:.5}, a1/a0 = {:.6}, a_max/a0 = {:.2e}, terms {}", ratio.re, width.norm(), next.len());
        alpha = next;
    }

    let rho = mixed_example(0.5, 0.5, 1)?;
    let limit = gaussify_limit(&rho)?;
    let target = GaussianState::centered(limit.covariance.clone())?;
    println!("\nmixed input, limit covariance:{}", limit.covariance);
    println!("  limit is physical: {}, E_N = {:.5}", limit.converges, log_negativity_gaussian(&target, &[1])?);
    let config = ProtocolConfig { iterations: 4, cutoff: 6, max_cutoff: 12, track_limit: true, ..ProtocolConfig::default() };
    let trace = run_protocol(&rho, &config)?;
    println!("{:>4} {:>9} {:>9} {:>9} {:>11} {:>6}", "it", "E_N", "S_vN", "P", "distance", "cutoff");
    for rec in &trace.records {
        println!(
            "{:>4} {:>9.5} {:>9.5} {:>9.5} {:>11.3e} {:>6}",
            rec.iteration,
            rec.log_negativity,
            rec.entropy,
            rec.probability,
            rec.distance_to_limit.unwrap_or(f64::NAN),
            rec.cutoff
        );
    }
    Ok(())
}
