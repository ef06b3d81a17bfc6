//! Simulation of SᶻSᶻ entanglement between two Bose–Einstein-condensate
//! qubits coupled through optical cavities and a fiber, with the decoherence
//! channels that limit it: spontaneous emission, cavity photon loss and
//! collective dephasing.
//!
//! The crate is organised bottom-up:
//!
//! - [`fockspace`]: conserved-number Fock bases, spin coherent states, sparse
//!   bilinear operators.
//! - [`hamiltonians`]: cavity, fiber, pump and effective Hamiltonians.
//! - [`lindblad`]: master-equation and unitary evolution, jump channels, the
//!   closed-form z-dephasing propagator.
//! - [`moments`]: mean-field moment equations for large condensates.
//! - [`protocols`]: gate cancellation, echo experiments, closed-form target
//!   states.
//! - [`analysis`]: decay-envelope fits, scaling fits, rate predictions.
//! - [`estimates`]: laboratory-unit parameter table.
//! - [`cli`]: the `becnet` command-line driver.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example spin_states
//! cargo run --release --example gate_protocol
//! cargo run --release --example spontaneous_emission
//! cargo run --release --example cavity_echo
//! cargo run --release --example dephasing
//! cargo run --release --example adiabatic_elimination
//! cargo run --release --example lab_estimates
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod estimates;
pub mod fockspace;
pub mod hamiltonians;
pub mod integrate;
pub mod lindblad;
pub mod moments;
pub mod protocols;

pub use error::{Error, Result};
pub use fockspace::{
    bilinear_operator, collective_spin_operator, enumerate_basis, expectation, spin_coherent_state, Axis, BasisIndex,
    DensityMatrix, Expectation, Level, Mode, ModeSpec, Operator, Sector, StateVector, C64,
};
pub use hamiltonians::PhysicalParams;
pub use lindblad::{evolve_master, evolve_unitary, EvolveOptions, JumpChannel, LindbladModel, Trajectory};
