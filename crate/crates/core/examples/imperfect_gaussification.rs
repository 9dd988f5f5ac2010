//! Gaussification with inefficient vacuum detectors and with noise acting on
//! the stored copy between iterations.

use std::error::Error;

use entsim::distill::{model_mixed_input, model_pure_input, run_protocol, ChannelSpec, ProtocolConfig};

fn final_row(label: &str, rho: &entsim::fock::FockDensityMatrix, config: &ProtocolConfig) -> Result<(), Box<dyn Error>> {
    let trace = run_protocol(rho, config)?;
    let last = trace.records.last().expect("at least one record");
    let total_p: f64 = trace.records.iter().map(|r| r.probability).product();
    println!("{label:>24} {:>9.5} {:>9.5} {:>10.3e}", last.log_negativity, last.entropy, total_p);
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    let base = ProtocolConfig { iterations: 3, cutoff: 6, max_cutoff: 12, ..ProtocolConfig::default() };
    for (name, rho) in [("pure", model_pure_input(6)?), ("mixed", model_mixed_input(6)?)] {
        println!("{name} model input: E_N = {:.5}, S_vN = {:.5}", rho.log_negativity()?, rho.vn_entropy()?);
        println!("{:>24} {:>9} {:>9} {:>10}", "after 3 steps", "E_N", "S_vN", "P_total");
        for eta in [1.0, 0.9, 0.7, 0.5] {
            final_row(&format!("eta = {eta}"), &rho, &ProtocolConfig { eta, ..base.clone() })?;
        }
        let channels = [
            ("absorb theta = 0.9", ChannelSpec::Absorb { theta: 0.9 }),
            ("dephase kappa = 0.9", ChannelSpec::Dephase { kappa: 0.9 }),
            ("phase diffusion 0.2", ChannelSpec::PhaseDiffuse { upsilon: 0.2 }),
        ];
        for (label, channel) in channels {
            final_row(label, &rho, &ProtocolConfig { channel, ..base.clone() })?;
        }
        println!();
    }
    Ok(())
}
