//! The one-photon Procrustean filter: a weakly squeezed beam is split on an
//! unbalanced beam splitter and a photon count on the reflected port heralds a
//! state with more entanglement than the source.

use std::error::Error;

use entsim::distill::{procrustean_lambda, procrustean_mixed_state, procrustean_pure, ProcrusteanConfig};
use entsim::gaussian::{log_negativity_gaussian, make_tmss};

fn main() -> Result<(), Box<dyn Error>> {
    let r = 0.1;
    println!("source E_N = {:.5}", log_negativity_gaussian(&make_tmss(r, 0.0), &[1])?);
    println!("{:>6} {:>10} {:>10} {:>10}", "T", "E_N", "P", "lambda");
    for transmission in [0.05, 0.1, 0.2, 0.4, 0.6] {
        let (psi, p) = procrustean_pure(r, transmission, 1, 6)?;
        let e_n = psi.to_density()?.log_negativity()?;
        let lambda = procrustean_lambda(r, 1.0, transmission)?;
        println!("{transmission:>6.2} {e_n:>10.5} {p:>10.2e} {lambda:>10.4}");
    }

    println!("\nwith loss on both arms, T = 0.1");
    println!("{:>6} {:>10} {:>10} {:>10}", "tau", "E_N", "S_vN", "P");
    for tau in [1.0, 0.9, 0.7, 0.5] {
        let config = ProcrusteanConfig { r, transmission: 0.1, tau, photons: 1 };
        let (rho, p) = procrustean_mixed_state(&config, 4)?;
        println!("{tau:>6.2} {:>10.5} {:>10.5} {p:>10.2e}", rho.log_negativity()?, rho.vn_entropy()?);
    }
    Ok(())
}
