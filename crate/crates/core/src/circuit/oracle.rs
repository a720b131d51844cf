//! Closed-form behaviour of one post-selected XOR gate, and the same gate
//! simulated element by element for comparison.

use num_complex::Complex;
use thiserror::Error;

use crate::detect::{measure_branches, postselect, DetectionPattern, DetectorSpec, Outcome};
use crate::elements::{analyzer_project, apply_transform, pbs, ProjectiveFilter};
use crate::fock::{create_photon, ModeLabel, Polarization, Port, StateVector};

type C64 = Complex<f64>;

const VANISHING_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("conditional output vanishes (norm² {0:e})")]
    VanishingOutput(f64),
}

/// Linear polarization preparation at `angle_deg` from |0⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitPrep {
    pub angle_deg: f64,
}

impl QubitPrep {
    pub fn new(angle_deg: f64) -> Self {
        QubitPrep { angle_deg }
    }

    pub fn basis(bit: bool) -> Self {
        QubitPrep::new(if bit { 90.0 } else { 0.0 })
    }

    pub fn amplitudes(&self) -> [f64; 2] {
        let t = self.angle_deg.to_radians();
        [t.cos(), t.sin()]
    }

    pub fn state(&self) -> QubitState {
        let [c, s] = self.amplitudes();
        QubitState::new(C64::new(c, 0.0), C64::new(s, 0.0))
    }
}

/// Normalized single-qubit state `amps[0]|0⟩ + amps[1]|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub amps: [C64; 2],
}

impl QubitState {
    pub fn new(zero: C64, one: C64) -> Self {
        let n = (zero.norm_sqr() + one.norm_sqr()).sqrt();
        QubitState {
            amps: [zero / n, one / n],
        }
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &QubitState) -> f64 {
        (self.amps[0].conj() * other.amps[0] + self.amps[1].conj() * other.amps[1]).norm_sqr()
    }
}

/// Normalized (α+δ)|0⟩ + (β+γ)|1⟩.
pub fn xor_conditional_output(a: C64, b: C64, g: C64, d: C64) -> Result<QubitState, OracleError> {
    let zero = a + d;
    let one = b + g;
    let n2 = zero.norm_sqr() + one.norm_sqr();
    if n2 < VANISHING_FLOOR {
        return Err(OracleError::VanishingOutput(n2));
    }
    Ok(QubitState::new(zero, one))
}

/// ¼(|α+δ|² + |β+γ|²).
pub fn xor_success_probability(a: C64, b: C64, g: C64, d: C64) -> f64 {
    0.25 * ((a + d).norm_sqr() + (b + g).norm_sqr())
}

#[derive(Debug, Clone, PartialEq)]
pub struct XorSimulation {
    pub success_probability: f64,
    /// `None` when the heralding pattern cannot occur.
    pub output: Option<QubitState>,
}

/// Runs α|00⟩+β|01⟩+γ|10⟩+δ|11⟩ through a PBS, a 0° analyzer on the second
/// port and a number-resolving detector that must see exactly one photon.
pub fn simulate_xor_gate(a: C64, b: C64, g: C64, d: C64) -> XorSimulation {
    let (pa, pb) = (Port::new("a"), Port::new("b"));
    let pol = |bit: usize| Polarization::from_index(bit).expect("bit is 0 or 1");
    let mut input = StateVector::<f64>::zero();
    for (i, amp) in [a, b, g, d].into_iter().enumerate() {
        let (q1, q2) = (i >> 1, i & 1);
        let term = create_photon(
            &create_photon(&StateVector::vacuum(), &ModeLabel::new(pa.clone(), pol(q1), 0)),
            &ModeLabel::new(pb.clone(), pol(q2), 0),
        );
        input = input.added(&term.scaled(amp));
    }
    let mixed = apply_transform(&input, &pbs(&pa, &pb).expect("distinct ports")).expect("ports covered");
    let filtered = analyzer_project(&mixed, &ProjectiveFilter::new(pb.clone(), 0.0));
    let detector = DetectorSpec::number_resolving("D", pb);
    let herald = DetectionPattern::new(vec![("D".to_string(), Outcome::Count(1))]);
    let probability: f64 = measure_branches(&filtered, std::slice::from_ref(&detector))
        .iter()
        .filter(|b| b.pattern == herald)
        .fold(0.0, |acc, b| acc + b.probability);
    let output = postselect(&filtered, &[detector], &herald).ok().map(|(residual, _)| {
        let state = residual.as_pure().expect("exact herald leaves a pure state");
        let zero = state.amplitude(&single(&pa, Polarization::H));
        let one = state.amplitude(&single(&pa, Polarization::V));
        QubitState::new(zero, one)
    });
    XorSimulation {
        success_probability: probability,
        output,
    }
}

fn single(port: &Port, pol: Polarization) -> crate::fock::OccupationPattern {
    crate::fock::OccupationPattern::from_counts([(ModeLabel::new(port.clone(), pol, 0), 1)])
}
