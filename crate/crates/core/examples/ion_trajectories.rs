//! Two ions in separate cavities are weakly driven; the leaking photons meet on
//! a beam splitter and the first detector click heralds an entangled ion pair.
//! Trajectories are unravelled with quantum jumps.

use std::error::Error;

use entsim::jumpmc::{run_trajectories, Estimate, IonCavityParams, JumpConfig, Model};

fn main() -> Result<(), Box<dyn Error>> {
    let params = IonCavityParams { g: 1.0, omega: 2.0, delta: 20.0, kappa: 10.0, gamma_a: 0.0, gamma_b: 0.0 };
    println!("weak-driving ratio |x| = {:.4}, mean waiting time {:.1}", params.weak_driving_ratio().norm(), params.mean_first_click_time());
    let t_wait = 5.0 * params.mean_first_click_time();

    println!("{:>9} {:>9} {:>16} {:>16} {:>8}", "model", "gamma", "P(click)", "fidelity", "lost");
    for (model, gamma) in [(Model::Adiabatic, 0.0), (Model::Full, 0.0), (Model::Full, 0.05), (Model::Full, 0.2)] {
        let params = IonCavityParams { gamma_a: gamma, gamma_b: gamma, ..params };
        let config = JumpConfig { model, ..JumpConfig::new(params, t_wait, 2000, 11) };
        let (_, stats) = run_trajectories(&config)?;
        let fidelity = stats.mean_fidelity.unwrap_or(Estimate { value: f64::NAN, stderr: f64::NAN });
        println!(
            "{:>9} {gamma:>9.2} {:>8.4} ± {:.4} {:>8.4} ± {:.4} {:>8.4}",
            format!("{model:?}"),
            stats.p_success.value,
            stats.p_success.stderr,
            fidelity.value,
            fidelity.stderr,
            stats.lost_fraction.value
        );
    }

    let config = JumpConfig { dt: Some(0.1), ..JumpConfig::new(params, t_wait, 5, 3) };
    let (records, _) = run_trajectories(&config)?;
    println!("\nfirst trajectories:");
    for r in &records {
        println!("  {}", r.to_json_line());
    }
    Ok(())
}
