//! Linear optics on truncated number states: two-photon interference,
//! the two-mode squeezed vacuum and inefficient photodetection.

use std::error::Error;

use entsim::fock::{beam_splitter_fock, tmss_fock, BeamSplitter, BeamSplitterConvention, FockPureVector};

fn main() -> Result<(), Box<dyn Error>> {
    let bs = BeamSplitter::balanced(BeamSplitterConvention::SymmetricI);
    let out = beam_splitter_fock(&FockPureVector::basis(&[1, 1], 2)?, &bs, (0, 1))?;
    println!("|1,1> through a 50:50 splitter");
    for occ in [[2, 0], [1, 1], [0, 2]] {
        println!("  |{},{}>  probability {:.3}", occ[0], occ[1], out.amplitude(&occ).norm_sqr());
    }

    let (r, cutoff) = (0.5, 12);
    let psi = tmss_fock(r, 0.0, cutoff);
    let rho = psi.to_density()?;
    println!("\ntwo-mode squeezed vacuum, r = {r}, cutoff {cutoff}");
    println!("  weight beyond cutoff {:.2e}", psi.truncated_weight());
    println!("  E_N = {:.6}", rho.normalized()?.log_negativity()?);
    let reduced = rho.partial_trace(1)?;
    println!("  reduced photon distribution:");
    for n in 0..5 {
        println!("    p({n}) = {:.6}", reduced.matrix()[(n, n)].re);
    }

    println!("\nheralding on mode B with an inefficient detector");
    println!("{:>6} {:>12} {:>12}", "eta", "P(no click)", "P(1 count)");
    for eta in [1.0, 0.8, 0.5] {
        let (_, p0) = rho.project_vacuum(1, eta)?;
        let (_, p1) = rho.project_photons(1, 1, eta)?;
        println!("{eta:>6.2} {p0:>12.6} {p1:>12.6}");
    }
    Ok(())
}
