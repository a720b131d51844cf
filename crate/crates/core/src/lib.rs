//! Simulation of post-selected linear-optics circuits on polarization qubits.

pub mod circuit;
pub mod detect;
pub mod distinguishability;
pub mod elements;
pub mod experiments;
pub mod fock;
pub mod real;
pub mod sources;

pub use real::Real;

pub type StateVector = fock::StateVector<f64>;
pub type ModeTransform = elements::ModeTransform<f64>;
pub type Ensemble = detect::Ensemble<f64>;
pub type Complex64 = num_complex::Complex<f64>;
