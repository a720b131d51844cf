//! Graphs for the two-gate parity circuit and its XOR1-only reconfiguration.

use crate::detect::{CoincidenceSpec, DetectorSpec};
use crate::distinguishability::{FamilyOverlaps, PhotonWavepacket};
use crate::fock::Port;
use crate::sources::SourceSpec;

use super::graph::{CircuitGraph, Stage};
use super::oracle::QubitPrep;

pub const SIGNAL: &str = "signal";
pub const IDLER: &str = "idler";
pub const PUMP: &str = "pump";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceModel {
    /// Exactly one photon per input on every pulse.
    Ideal,
    /// Photons 1 and 2 from a down-conversion pair, photon 3 from a weak
    /// coherent pulse.
    Realistic { pair_prob: f64, mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    /// Overlap between photons 1 and 2 (same pair).
    pub v12: f64,
    /// Overlap between a pair photon and the pump-derived photon.
    pub kappa: f64,
    /// Wavepacket width shared by all photons.
    pub sigma: f64,
    pub sources: SourceModel,
    /// Polarization rotation of the fiber between the two gates.
    pub birefringence_deg: f64,
    pub efficiency: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics::ideal()
    }
}

impl Physics {
    pub fn ideal() -> Self {
        Physics {
            v12: 1.0,
            kappa: 1.0,
            sigma: 1.0,
            sources: SourceModel::Ideal,
            birefringence_deg: 0.0,
            efficiency: 1.0,
        }
    }

    fn overlaps(&self) -> FamilyOverlaps {
        let mut f = FamilyOverlaps::new();
        // Values are range-checked by FamilyOverlaps; defaults are valid.
        for (a, b, v) in [(SIGNAL, IDLER, self.v12), (SIGNAL, PUMP, self.kappa), (IDLER, PUMP, self.kappa)] {
            if v != 1.0 {
                f.set(a, b, v).expect("overlap within [0, 1]");
            }
        }
        f
    }

    fn wavepacket(&self, family: &str) -> PhotonWavepacket {
        PhotonWavepacket::new(0.0, self.sigma, family).expect("positive width")
    }

    fn detector(&self, name: &str, port: &Port) -> DetectorSpec {
        DetectorSpec::threshold(name, port.clone())
            .with_efficiency(self.efficiency)
            .expect("efficiency within [0, 1]")
    }

    fn sources(&self, q: &[Port; 3], with_third: bool) -> Vec<Stage> {
        let mut out = Vec::new();
        match self.sources {
            SourceModel::Ideal => {
                for (port, family) in q[..2].iter().zip([SIGNAL, IDLER]) {
                    out.push(Stage::Source(SourceSpec::Ideal {
                        port: port.clone(),
                        angle_deg: 0.0,
                        wavepacket: self.wavepacket(family),
                    }));
                }
                out.push(if with_third {
                    Stage::Source(SourceSpec::Ideal {
                        port: q[2].clone(),
                        angle_deg: 0.0,
                        wavepacket: self.wavepacket(PUMP),
                    })
                } else {
                    Stage::Port(q[2].clone())
                });
            }
            SourceModel::Realistic { pair_prob, mu } => {
                out.push(Stage::Source(SourceSpec::SpdcPair {
                    ports: [q[0].clone(), q[1].clone()],
                    pair_prob,
                    angle_deg: 0.0,
                    wavepackets: [self.wavepacket(SIGNAL), self.wavepacket(IDLER)],
                }));
                out.push(if with_third {
                    Stage::Source(SourceSpec::Coherent {
                        port: q[2].clone(),
                        mean_photons: mu,
                        angle_deg: 0.0,
                        wavepacket: self.wavepacket(PUMP),
                    })
                } else {
                    Stage::Port(q[2].clone())
                });
            }
        }
        out
    }
}

/// Output analyzer angle and per-input delays for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub theta3_deg: f64,
    pub delay1: f64,
    pub delay3: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            theta3_deg: 0.0,
            delay1: 0.0,
            delay3: 0.0,
        }
    }
}

pub fn input_ports() -> [Port; 3] {
    [Port::new("q1"), Port::new("q2"), Port::new("q3")]
}

/// Two cascaded XOR gates: PBS1 mixes q1 and q2 (D1 heralds on q2), the
/// fiber carries q1 to PBS2 where it meets q3 (D2 heralds on q3), and q1 ends
/// at the output analyzer θ₃ and D3.
pub fn build_parity_circuit(preps: [QubitPrep; 3], physics: &Physics, settings: &ScanSettings) -> CircuitGraph {
    let q = input_ports();
    let mut stages = physics.sources(&q, true);
    for (port, prep) in q.iter().zip(preps) {
        stages.push(Stage::HalfWavePlate {
            port: port.clone(),
            angle_deg: prep.angle_deg / 2.0,
        });
    }
    stages.extend([
        Stage::Delay { port: q[0].clone(), time: settings.delay1 },
        Stage::Delay { port: q[2].clone(), time: settings.delay3 },
        Stage::Pbs { a: q[0].clone(), b: q[1].clone() },
        Stage::Analyzer { port: q[1].clone(), angle_deg: 0.0 },
        Stage::Detector(physics.detector("D1", &q[1])),
        Stage::Rotate { port: q[0].clone(), angle_deg: physics.birefringence_deg },
        Stage::Pbs { a: q[0].clone(), b: q[2].clone() },
        Stage::Analyzer { port: q[2].clone(), angle_deg: 0.0 },
        Stage::Detector(physics.detector("D2", &q[2])),
        Stage::Analyzer { port: q[0].clone(), angle_deg: settings.theta3_deg },
        Stage::Detector(physics.detector("D3", &q[0])),
    ]);
    CircuitGraph {
        stages,
        overlaps: physics.overlaps(),
        coincidence: Some(CoincidenceSpec::new(&["D1", "D2", "D3"])),
        scan: None,
    }
}

/// XOR1 on its own: photon 3 blocked, the θ₂ and θ₃ analyzers removed and a
/// 45° rotation before PBS2, so that PBS2 sorts XOR1's output onto D3
/// (logical 0) or D2 (logical 1). Photons 1 and 2 are prepared in |0⟩.
pub fn build_xor1_hom_circuit(physics: &Physics, delay1: f64) -> CircuitGraph {
    let q = input_ports();
    let mut stages = physics.sources(&q, false);
    stages.extend([
        Stage::Delay { port: q[0].clone(), time: delay1 },
        Stage::Pbs { a: q[0].clone(), b: q[1].clone() },
        Stage::Analyzer { port: q[1].clone(), angle_deg: 0.0 },
        Stage::Detector(physics.detector("D1", &q[1])),
        Stage::Rotate { port: q[0].clone(), angle_deg: 45.0 + physics.birefringence_deg },
        Stage::Pbs { a: q[0].clone(), b: q[2].clone() },
        Stage::Detector(physics.detector("D2", &q[2])),
        Stage::Detector(physics.detector("D3", &q[0])),
    ]);
    CircuitGraph {
        stages,
        overlaps: physics.overlaps(),
        coincidence: Some(CoincidenceSpec::new(&["D1"])),
        scan: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_graph_is_valid_for_any_preps() {
        for preps in [[0.0, 0.0, 0.0], [15.0, 0.0, 90.0], [33.0, 120.0, 7.0]] {
            let g = build_parity_circuit(preps.map(QubitPrep::new), &Physics::ideal(), &ScanSettings::default());
            g.validate().unwrap();
        }
        let realistic = Physics {
            sources: SourceModel::Realistic { pair_prob: 0.01, mu: 0.02 },
            ..Physics::ideal()
        };
        build_parity_circuit([QubitPrep::new(0.0); 3], &realistic, &ScanSettings::default())
            .validate()
            .unwrap();
        build_xor1_hom_circuit(&realistic, 0.0).validate().unwrap();
        build_xor1_hom_circuit(&Physics::ideal(), 0.0).validate().unwrap();
    }

    #[test]
    fn first_wave_plate_is_half_the_prep_angle() {
        let g = build_parity_circuit(
            [15.0, 0.0, 90.0].map(QubitPrep::new),
            &Physics::ideal(),
            &ScanSettings::default(),
        );
        let first_hwp = g.stages.iter().find_map(|s| match s {
            Stage::HalfWavePlate { angle_deg, .. } => Some(*angle_deg),
            _ => None,
        });
        assert_eq!(first_hwp, Some(7.5));
    }
}
