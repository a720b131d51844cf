//! Optical elements acting on creation operators.
//!
//! A [`ModeTransform`] maps each input channel (port and polarization) to a
//! linear combination of output channels, `a†ᵢ → Σⱼ U[j][i] a†ⱼ`. Temporal
//! mode indices pass through every element untouched.

use std::collections::BTreeMap;

use num_complex::Complex;
use thiserror::Error;

use crate::fock::{ModeLabel, OccupationPattern, Polarization, Port, StateVector};
use crate::real::{deg_to_rad, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("occupied mode {0} is not an input of the element")]
    UnknownMode(String),
    #[error("matrix shape {rows}x{cols} does not match {outputs} outputs and {inputs} inputs")]
    Shape {
        rows: usize,
        cols: usize,
        outputs: usize,
        inputs: usize,
    },
    #[error("transform flagged unitary deviates from U†U = I by {0:e}")]
    NotUnitary(f64),
    #[error("ports of a two-port element must differ, got {0} twice")]
    SamePort(String),
}

pub type Channel = (Port, Polarization);

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform<T: Real> {
    inputs: Vec<Channel>,
    outputs: Vec<Channel>,
    /// `matrix[j][i]` is the weight of output `j` in the image of input `i`.
    matrix: Vec<Vec<Complex<T>>>,
    unitary: bool,
}

impl<T: Real> ModeTransform<T> {
    pub fn new(
        inputs: Vec<Channel>,
        outputs: Vec<Channel>,
        matrix: Vec<Vec<Complex<T>>>,
        unitary: bool,
    ) -> Result<Self, ElementError> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(inputs.len(), Vec::len);
        if rows != outputs.len() || cols != inputs.len() || matrix.iter().any(|r| r.len() != cols)
        {
            return Err(ElementError::Shape {
                rows,
                cols,
                outputs: outputs.len(),
                inputs: inputs.len(),
            });
        }
        let t = ModeTransform {
            inputs,
            outputs,
            matrix,
            unitary,
        };
        if unitary {
            let defect = t.unitarity_defect();
            if defect > unitary_tolerance::<T>() {
                return Err(ElementError::NotUnitary(defect));
            }
        }
        Ok(t)
    }

    pub fn inputs(&self) -> &[Channel] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Channel] {
        &self.outputs
    }

    pub fn matrix(&self) -> &[Vec<Complex<T>>] {
        &self.matrix
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Largest entry of |U†U − I|.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.inputs.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                let dot: Complex<T> = self
                    .matrix
                    .iter()
                    .fold(Complex::new(T::zero(), T::zero()), |acc, row| {
                        acc + row[i].conj() * row[k]
                    });
                let target = if i == k { T::one() } else { T::zero() };
                let err = (dot - Complex::new(target, T::zero())).norm().as_f64();
                worst = worst.max(err);
            }
        }
        worst
    }

    fn covers(&self, port: &Port) -> bool {
        self.inputs.iter().any(|(p, _)| p == port)
    }

    fn image(&self, mode: &ModeLabel) -> Result<Vec<(ModeLabel, Complex<T>)>, ElementError> {
        if !self.covers(&mode.port) {
            return Ok(vec![(mode.clone(), Complex::new(T::one(), T::zero()))]);
        }
        let i = self
            .inputs
            .iter()
            .position(|(p, pol)| *p == mode.port && *pol == mode.polarization)
            .ok_or_else(|| ElementError::UnknownMode(mode.to_string()))?;
        Ok(self
            .outputs
            .iter()
            .zip(&self.matrix)
            .filter(|(_, row)| row[i] != Complex::new(T::zero(), T::zero()))
            .map(|((port, pol), row)| (ModeLabel::new(port.clone(), *pol, mode.temporal), row[i]))
            .collect())
    }
}

fn unitary_tolerance<T: Real>() -> f64 {
    (1e3 * T::epsilon().as_f64()).max(1e-12)
}

fn re<T: Real>(x: f64) -> Complex<T> {
    Complex::new(T::lit(x), T::zero())
}

fn channels(port: &Port) -> Vec<Channel> {
    Polarization::BOTH.iter().map(|p| (port.clone(), *p)).collect()
}

/// Expands the product of transformed creation operators for every term.
pub fn apply_transform<T: Real>(
    state: &StateVector<T>,
    t: &ModeTransform<T>,
) -> Result<StateVector<T>, ElementError> {
    let mut out: Vec<(OccupationPattern, Complex<T>)> = Vec::new();
    for (pattern, amp) in state.terms() {
        let norm = T::lit(pattern.factorial_product().sqrt().recip());
        let mut partial: BTreeMap<Vec<ModeLabel>, Complex<T>> = BTreeMap::new();
        partial.insert(Vec::new(), amp * norm);
        for (mode, n) in pattern.iter() {
            let image = t.image(mode)?;
            for _ in 0..*n {
                let mut next: BTreeMap<Vec<ModeLabel>, Complex<T>> = BTreeMap::new();
                for (modes, coeff) in &partial {
                    for (target, weight) in &image {
                        let mut grown = modes.clone();
                        let at = grown.partition_point(|m| m <= target);
                        grown.insert(at, target.clone());
                        let slot = next
                            .entry(grown)
                            .or_insert_with(|| Complex::new(T::zero(), T::zero()));
                        *slot = *slot + coeff * weight;
                    }
                }
                partial = next;
            }
        }
        for (modes, coeff) in partial {
            let pattern = OccupationPattern::from_modes(&modes);
            let factor = T::lit(pattern.factorial_product().sqrt());
            out.push((pattern, coeff * factor));
        }
    }
    Ok(StateVector::from_terms_with_epsilon(out, state.prune_epsilon()))
}

/// Polarizing beam splitter: the |+⟩ component keeps its port, the |−⟩
/// component swaps to the other port, with |±⟩ = (|0⟩ ± |1⟩)/√2.
pub fn pbs<T: Real>(port_a: &Port, port_b: &Port) -> Result<ModeTransform<T>, ElementError> {
    if port_a == port_b {
        return Err(ElementError::SamePort(port_a.to_string()));
    }
    let mut io = channels(port_a);
    io.extend(channels(port_b));
    let h = 0.5;
    #[rustfmt::skip]
    let m = [
        [ h,  h,  h, -h],
        [ h,  h, -h,  h],
        [ h, -h,  h,  h],
        [-h,  h,  h,  h],
    ];
    let matrix = m.iter().map(|row| row.iter().map(|&x| re(x)).collect()).collect();
    ModeTransform::new(io.clone(), io, matrix, true)
}

/// Polarization-independent 50/50 coupler: a → (a+b)/√2, b → (a−b)/√2.
pub fn beam_splitter<T: Real>(
    port_a: &Port,
    port_b: &Port,
) -> Result<ModeTransform<T>, ElementError> {
    if port_a == port_b {
        return Err(ElementError::SamePort(port_a.to_string()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut io = channels(port_a);
    io.extend(channels(port_b));
    #[rustfmt::skip]
    let m = [
        [s, 0.0,  s,  0.0],
        [0.0, s,  0.0,  s],
        [s, 0.0, -s,  0.0],
        [0.0, s,  0.0, -s],
    ];
    let matrix = m.iter().map(|row| row.iter().map(|&x| re(x)).collect()).collect();
    ModeTransform::new(io.clone(), io, matrix, true)
}

fn polarization_matrix<T: Real>(port: &Port, m: [[T; 2]; 2]) -> ModeTransform<T> {
    let io = channels(port);
    let matrix = m
        .iter()
        .map(|row| row.iter().map(|&x| Complex::new(x, T::zero())).collect())
        .collect();
    ModeTransform::new(io.clone(), io, matrix, true).expect("2x2 orthogonal matrix")
}

/// Half-wave plate with its fast axis at `plate_angle` degrees from |0⟩:
/// `[[cos 2φ, sin 2φ], [sin 2φ, −cos 2φ]]`.
pub fn half_wave_plate<T: Real>(port: &Port, plate_angle: f64) -> ModeTransform<T> {
    let two_phi: T = deg_to_rad(2.0 * plate_angle);
    let (s, c) = two_phi.sin_cos();
    polarization_matrix(port, [[c, s], [s, -c]])
}

/// Rotation of the polarization by `angle` degrees: `[[cos φ, −sin φ], [sin φ, cos φ]]`.
pub fn polarization_rotation<T: Real>(port: &Port, angle: f64) -> ModeTransform<T> {
    let phi: T = deg_to_rad(angle);
    let (s, c) = phi.sin_cos();
    polarization_matrix(port, [[c, -s], [s, c]])
}

/// Linear polarizer in front of a port, passing (cos θ, sin θ).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveFilter {
    pub port: Port,
    pub angle_deg: f64,
}

impl ProjectiveFilter {
    pub fn new(port: impl Into<Port>, angle_deg: f64) -> Self {
        ProjectiveFilter {
            port: port.into(),
            angle_deg,
        }
    }

    pub fn pass_axis<T: Real>(&self) -> [T; 2] {
        let theta: T = deg_to_rad(self.angle_deg);
        let (s, c) = theta.sin_cos();
        [c, s]
    }

    /// Rank-one projector onto the pass axis; absorbed amplitude is discarded.
    pub fn projector<T: Real>(&self) -> ModeTransform<T> {
        let [c, s] = self.pass_axis::<T>();
        let io = channels(&self.port);
        let matrix = vec![
            vec![Complex::new(c * c, T::zero()), Complex::new(c * s, T::zero())],
            vec![Complex::new(s * c, T::zero()), Complex::new(s * s, T::zero())],
        ];
        ModeTransform::new(io.clone(), io, matrix, false).expect("2x2 projector")
    }

    /// Isometry that routes the blocked polarization into `loss_port` (H channel)
    /// instead of discarding it.
    pub fn with_loss_port<T: Real>(&self, loss_port: &Port) -> ModeTransform<T> {
        let [c, s] = self.pass_axis::<T>();
        let inputs = channels(&self.port);
        let mut outputs = inputs.clone();
        outputs.push((loss_port.clone(), Polarization::H));
        let z = T::zero();
        let matrix = vec![
            vec![Complex::new(c * c, z), Complex::new(c * s, z)],
            vec![Complex::new(s * c, z), Complex::new(s * s, z)],
            vec![Complex::new(-s, z), Complex::new(c, z)],
        ];
        ModeTransform::new(inputs, outputs, matrix, true).expect("analyzer isometry")
    }
}

/// Projects photons on the filter's port onto its pass axis. The result is
/// unnormalized; its squared norm is the probability that nothing was absorbed.
pub fn analyzer_project<T: Real>(state: &StateVector<T>, f: &ProjectiveFilter) -> StateVector<T> {
    apply_transform(state, &f.projector()).expect("projector covers both polarizations")
}
