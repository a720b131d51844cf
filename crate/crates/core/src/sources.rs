//! Photon sources as classical distributions over emitted photons per pulse.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use crate::distinguishability::PhotonWavepacket;
use crate::fock::Port;

/// Joint events below this probability are dropped.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
pub const MAX_PAIR_PROB: f64 = 0.1;
pub const MAX_MEAN_PHOTONS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("invalid source: {0}")]
    InvalidSpec(String),
    #[error("port `{0}` is fed by more than one source")]
    PortCollision(String),
}

/// One source. Emitted photons start horizontally polarized and are then
/// rotated to `angle_deg` (the preparation angle from |0⟩).
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Ideal {
        port: Port,
        angle_deg: f64,
        wavepacket: PhotonWavepacket,
    },
    SpdcPair {
        ports: [Port; 2],
        pair_prob: f64,
        angle_deg: f64,
        wavepackets: [PhotonWavepacket; 2],
    },
    Coherent {
        port: Port,
        mean_photons: f64,
        angle_deg: f64,
        wavepacket: PhotonWavepacket,
    },
}

impl SourceSpec {
    pub fn ports(&self) -> Vec<Port> {
        match self {
            SourceSpec::Ideal { port, .. } | SourceSpec::Coherent { port, .. } => vec![port.clone()],
            SourceSpec::SpdcPair { ports, .. } => ports.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        match self {
            SourceSpec::SpdcPair { ports, pair_prob, .. } => {
                if ports[0] == ports[1] {
                    return Err(SourceError::InvalidSpec(format!(
                        "pair source needs two distinct ports, got `{}` twice",
                        ports[0]
                    )));
                }
                if !(0.0..=MAX_PAIR_PROB).contains(pair_prob) {
                    return Err(SourceError::InvalidSpec(format!(
                        "pair probability {pair_prob} outside [0, {MAX_PAIR_PROB}]"
                    )));
                }
            }
            SourceSpec::Coherent { mean_photons, .. } => {
                if !(0.0..=MAX_MEAN_PHOTONS).contains(mean_photons) {
                    return Err(SourceError::InvalidSpec(format!(
                        "mean photon number {mean_photons} outside [0, {MAX_MEAN_PHOTONS}]"
                    )));
                }
            }
            SourceSpec::Ideal { .. } => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedPhoton {
    /// Index of the emitting source within the joint source list.
    pub source: usize,
    pub port: Port,
    pub angle_deg: f64,
    pub wavepacket: PhotonWavepacket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionEvent {
    pub photons: Vec<EmittedPhoton>,
    pub probability: f64,
    /// Photons emitted by each contributing source, in source order.
    pub source_counts: Vec<u32>,
}

fn repeated(port: &Port, angle_deg: f64, wavepacket: &PhotonWavepacket, n: u32) -> Vec<EmittedPhoton> {
    (0..n)
        .map(|_| EmittedPhoton {
            source: 0,
            port: port.clone(),
            angle_deg,
            wavepacket: wavepacket.clone(),
        })
        .collect()
}

/// Per-pulse emission statistics, truncated at two pairs or two photons and
/// renormalized.
pub fn emission_distribution(s: &SourceSpec) -> Result<Vec<EmissionEvent>, SourceError> {
    s.validate()?;
    let events = match s {
        SourceSpec::Ideal {
            port,
            angle_deg,
            wavepacket,
        } => vec![EmissionEvent {
            photons: repeated(port, *angle_deg, wavepacket, 1),
            probability: 1.0,
            source_counts: vec![1],
        }],
        SourceSpec::SpdcPair {
            ports,
            pair_prob: p,
            angle_deg,
            wavepackets,
        } => {
            let weights = [1.0 - p - p * p, *p, p * p];
            let z: f64 = weights.iter().sum();
            (0u32..3)
                .map(|pairs| {
                    let mut photons = repeated(&ports[0], *angle_deg, &wavepackets[0], pairs);
                    photons.extend(repeated(&ports[1], *angle_deg, &wavepackets[1], pairs));
                    EmissionEvent {
                        photons,
                        probability: weights[pairs as usize] / z,
                        source_counts: vec![2 * pairs],
                    }
                })
                .collect()
        }
        SourceSpec::Coherent {
            port,
            mean_photons: mu,
            angle_deg,
            wavepacket,
        } => {
            let weights = [1.0, *mu, mu * mu / 2.0].map(|w| w * (-mu).exp());
            let z: f64 = weights.iter().sum();
            (0u32..3)
                .map(|n| EmissionEvent {
                    photons: repeated(port, *angle_deg, wavepacket, n),
                    probability: weights[n as usize] / z,
                    source_counts: vec![n],
                })
                .collect()
        }
    };
    Ok(events.into_iter().filter(|e| e.probability > 0.0).collect())
}

/// Independent product of several sources.
pub fn joint_emission(sources: &[SourceSpec]) -> Result<Vec<EmissionEvent>, SourceError> {
    let mut seen: Vec<Port> = Vec::new();
    for s in sources {
        for p in s.ports() {
            if seen.contains(&p) {
                return Err(SourceError::PortCollision(p.to_string()));
            }
            seen.push(p);
        }
    }
    let mut joint = vec![EmissionEvent {
        photons: Vec::new(),
        probability: 1.0,
        source_counts: Vec::new(),
    }];
    for (index, s) in sources.iter().enumerate() {
        let marginal = emission_distribution(s)?;
        let mut next = Vec::with_capacity(joint.len() * marginal.len());
        for a in &joint {
            for b in &marginal {
                let probability = a.probability * b.probability;
                if probability < PROBABILITY_FLOOR {
                    continue;
                }
                let mut photons = a.photons.clone();
                photons.extend(b.photons.iter().map(|ph| EmittedPhoton {
                    source: index,
                    ..ph.clone()
                }));
                let mut source_counts = a.source_counts.clone();
                source_counts.extend(&b.source_counts);
                next.push(EmissionEvent {
                    photons,
                    probability,
                    source_counts,
                });
            }
        }
        joint = next;
    }
    Ok(joint)
}

/// Draws an event index according to the event probabilities.
pub fn sample_event<R: Rng + ?Sized>(events: &[EmissionEvent], rng: &mut R) -> usize {
    let dist = WeightedIndex::new(events.iter().map(|e| e.probability))
        .expect("emission events carry positive total probability");
    dist.sample(rng)
}

/// Probability mass of the dominant noise class over the valid class.
///
/// `events` come from a pair source (index `pair_source`) and a coherent
/// source (index `coherent_source`). Valid: exactly one pair and one coherent
/// photon. Error: at least one pair photon on a port that reaches the first
/// gate detector while the coherent pulse holds two photons.
pub fn classify_error_ratio<F>(
    events: &[EmissionEvent],
    pair_source: usize,
    coherent_source: usize,
    reaches_gate_detector: F,
) -> f64
where
    F: Fn(&Port) -> bool,
{
    let mut valid = 0.0;
    let mut error = 0.0;
    for e in events {
        let pair_photons = e.source_counts[pair_source];
        let coherent = e.source_counts[coherent_source];
        let triggering = e
            .photons
            .iter()
            .filter(|ph| ph.source == pair_source && reaches_gate_detector(&ph.port))
            .count();
        if pair_photons == 2 && coherent == 1 {
            valid += e.probability;
        } else if triggering >= 1 && coherent == 2 {
            error += e.probability;
        }
    }
    if valid == 0.0 {
        return if error == 0.0 { 0.0 } else { f64::INFINITY };
    }
    error / valid
}

/// Error-to-valid ratio of the parity circuit fed by a pair source with pair
/// probability `p` and a coherent pulse with mean photon number `mu`.
pub fn error_to_valid_ratio(p: f64, mu: f64) -> Result<f64, SourceError> {
    use crate::circuit::builder::{build_parity_circuit, Physics, ScanSettings, SourceModel};
    use crate::circuit::oracle::QubitPrep;

    let physics = Physics {
        sources: SourceModel::Realistic { pair_prob: p, mu },
        ..Physics::ideal()
    };
    let g = build_parity_circuit([QubitPrep::new(0.0); 3], &physics, &ScanSettings::default());
    let sources = g.sources();
    let pair = sources
        .iter()
        .position(|s| matches!(s, SourceSpec::SpdcPair { .. }))
        .expect("realistic circuit has a pair source");
    let coherent = sources
        .iter()
        .position(|s| matches!(s, SourceSpec::Coherent { .. }))
        .expect("realistic circuit has a coherent source");
    let events = joint_emission(&sources)?;
    Ok(classify_error_ratio(&events, pair, coherent, |port| {
        g.reachable_detectors(port).contains("D1")
    }))
}

/// Mean photon number giving `target` error-to-valid ratio at pair
/// probability `p`, by bisection over [0, MAX_MEAN_PHOTONS].
pub fn mu_for_error_ratio(p: f64, target: f64) -> Result<f64, SourceError> {
    let (mut lo, mut hi) = (0.0, MAX_MEAN_PHOTONS);
    if !(target > 0.0 && target < error_to_valid_ratio(p, hi)?) {
        return Err(SourceError::InvalidSpec(format!(
            "error ratio {target} not reachable with mean photon number in [0, {MAX_MEAN_PHOTONS}]"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if error_to_valid_ratio(p, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
