//! Simulation toolkit for entanglement generation and distillation with
//! continuous-variable states.
//!
//! * [`gaussian`]: covariance-matrix states, symplectic operations and Gaussian measures.
//! * [`fock`]: truncated number-basis states, beam splitters and detection.
//! * [`bridge`]: conversions between the two representations and Wigner functions.
//! * [`distill`]: the Procrustean step, iterated Gaussification and noise channels.
//! * [`cavity`]: atom-through-cavity entanglement and path-geometry noise.
//! * [`jumpmc`]: quantum-jump trajectories for two cavity-coupled ions.
//! * [`cli`]: configuration-driven commands behind the `entsim` binary.

pub mod bridge;
pub mod cavity;
pub mod cli;
pub mod distill;
pub mod fock;
pub mod gaussian;
pub mod io;
pub mod jumpmc;
pub mod math;
