//! Two-mode squeezed light in the covariance-matrix picture: entanglement
//! under loss, and entanglement produced by mixing squeezed beams.

use std::error::Error;
use std::f64::consts::FRAC_1_SQRT_2;

use entsim::gaussian::{
    absorb, log_negativity_gaussian, lossy_tmss_log_negativity, make_tmss, symplectic_eigenvalues, vn_entropy_gaussian,
    GaussianState, SymplecticOp,
};

fn main() -> Result<(), Box<dyn Error>> {
    let r = 0.8;
    let tmss = make_tmss(r, 0.0);
    println!("two-mode squeezed vacuum, r = {r}");
    println!("  covariance:{}", tmss.covariance());
    println!("  E_N = {:.6} (2r log2 e = {:.6})", log_negativity_gaussian(&tmss, &[1])?, 2.0 * r / std::f64::consts::LN_2);

    println!("\nloss on both arms");
    println!("{:>6} {:>10} {:>10} {:>10}", "tau", "E_N", "closed", "S(A)");
    for tau in [1.0, 0.8, 0.6, 0.4, 0.2] {
        let lossy = absorb(&tmss, tau, &[0, 1])?;
        let reduced = lossy.covariance().view((0, 0), (2, 2)).into_owned();
        println!(
            "{tau:>6.2} {:>10.6} {:>10.6} {:>10.6}",
            log_negativity_gaussian(&lossy, &[1])?,
            lossy_tmss_log_negativity(r, tau),
            vn_entropy_gaussian(&reduced)?
        );
    }

    // A balanced beam splitter turns two orthogonally squeezed beams into a TMSS.
    let squeezers = SymplecticOp::squeezer(r).direct_sum(&SymplecticOp::squeezer(-r));
    let mixer = SymplecticOp::beam_splitter(FRAC_1_SQRT_2, FRAC_1_SQRT_2)?;
    let mixed = mixer.after(&squeezers).apply(&GaussianState::vacuum(2))?;
    println!("\nsqueezed beams on a 50:50 splitter");
    println!("  symplectic eigenvalues {:?}", symplectic_eigenvalues(mixed.covariance())?);
    println!("  E_N = {:.6}", log_negativity_gaussian(&mixed, &[1])?);
    Ok(())
}
