//! Moving between covariance matrices and number-basis density matrices, and
//! looking at a single mode through its Wigner function.

use std::error::Error;

use entsim::bridge::{gaussian_to_fock, moment_matched_gaussian, non_gaussianity, wigner, WignerGrid};
use entsim::distill::{procrustean_mixed_state, ProcrusteanConfig};
use entsim::gaussian::{absorb, make_tmss};

fn main() -> Result<(), Box<dyn Error>> {
    let state = absorb(&make_tmss(0.4, 0.0), 0.7, &[0, 1])?;
    for cutoff in [4, 8, 12] {
        let rho = gaussian_to_fock(&state, cutoff)?;
        println!("lossy TMSS at cutoff {cutoff:>2}: trace {:.9}, E_N {:.6}", rho.trace(), rho.normalized()?.log_negativity()?);
    }

    let grid = WignerGrid { half_width: 4.0, points: 41 };
    let config = ProcrusteanConfig { r: 0.3, transmission: 0.3, tau: 1.0, photons: 1 };
    let (filtered, _) = procrustean_mixed_state(&config, 8)?;
    let single = filtered.partial_trace(1)?;
    let field = wigner(&single, &grid)?;
    println!("\nfiltered state, mode A");
    println!("  W(0,0) = {:.5}, integral {:.6}", field.values[(20, 20)], field.integral());
    println!("  moment-matched covariance:{}", moment_matched_gaussian(&single)?.covariance());
    println!("  L2 distance to that Gaussian: {:.5}", non_gaussianity(&single, &grid)?);

    println!("\nW along P = 0");
    for i in (0..41).step_by(5) {
        println!("  X = {:>5.2}  W = {:>9.5}", field.xs[i], field.values[(i, 20)]);
    }
    Ok(())
}
