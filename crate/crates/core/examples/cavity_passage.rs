//! An excited atom crosses two resonant cavities and is found in its lower
//! level, leaving one photon shared between them. Unequal interaction times,
//! here caused by a tilted atomic path, lower the fidelity of that state.

use std::error::Error;

use entsim::cavity::{
    epsilon_estimate, fidelity_asymmetric, fidelity_ideal, passage_along_path, success_probability, AtomPath, CavityGeometry,
};

fn main() -> Result<(), Box<dyn Error>> {
    println!("{:>6} {:>8} {:>8}", "gtau", "F", "P");
    for k in 0..=8 {
        let gtau = k as f64 * 0.2;
        println!("{gtau:>6.2} {:>8.4} {:>8.4}", fidelity_ideal(gtau), success_probability(gtau));
    }

    println!("\nfidelity at gtau = 0.8 against the time mismatch epsilon");
    for eps in [-0.2, -0.1, 0.0, 0.1, 0.2] {
        println!("  eps = {eps:>5.2}: F = {:.4}", fidelity_asymmetric(0.8, eps));
    }

    let geometry = CavityGeometry::from_waist(5.97e-3, 5.87e-3, 0.05, 0.05)?;
    let g = 3.78e4;
    println!("\natom paths tilted towards the cavity axis (v = 500 m/s)");
    println!("{:>10} {:>10} {:>10} {:>8} {:>8}", "theta", "epsilon", "estimate", "F", "P");
    for theta in [0.0, 1e-3, 2e-3, 3e-3, 4e-3] {
        let path = AtomPath { theta, ..AtomPath::on_axis(500.0) };
        let passage = passage_along_path(g, &geometry, &path)?;
        println!(
            "{theta:>10.1e} {:>10.4} {:>10.4} {:>8.4} {:>8.4}",
            passage.epsilon,
            epsilon_estimate(&geometry, &path),
            passage.result.fidelity_on_success,
            passage.result.p_success
        );
    }
    Ok(())
}
