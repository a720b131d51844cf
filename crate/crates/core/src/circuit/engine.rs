//! Exact and Monte Carlo execution of a circuit graph.
//!
//! Each classical emission event is propagated as a pure state. Analyzers
//! route the blocked polarization into private loss ports, which are traced
//! out after the detectors are read, so a photon absorbed by an analyzer does
//! not silence the other photons of the same pulse.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::detect::{measure_branches, CoincidenceSpec, DetectionPattern, DetectorSpec, Ensemble, PatternKey, WeightedStates};
use crate::distinguishability::{build_temporal_basis, DistinguishabilityError, OverlapMatrix, PhotonWavepacket};
use crate::elements::{apply_transform, beam_splitter, half_wave_plate, pbs, polarization_rotation, ElementError, ProjectiveFilter};
use crate::fock::{create_photon, normalize, FockError, ModeLabel, Polarization, Port, StateVector};
use crate::real::{deg_to_rad, Real};
use crate::sources::{joint_emission, EmissionEvent, SourceError};

use super::graph::{CircuitGraph, EngineKind, Stage};

const LOSS_PREFIX: &str = "~loss";
/// Unaccounted probability above this is reported as a `lost` row.
const LOST_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Distinguishability(#[from] DistinguishabilityError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("Monte Carlo run needs at least one trial")]
    NoTrials,
    #[error("Monte Carlo run needs at least one worker")]
    NoWorkers,
    #[error("circuit emits nothing")]
    NoEvents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow<T: Real> {
    pub pattern: PatternKey,
    pub probability: T,
    /// Whether the pattern satisfies the circuit's coincidence requirement.
    pub coincidence: bool,
    /// State left on undetected ports, conditioned on the pattern.
    pub output: Ensemble<T>,
}

/// Exact outcome distribution, one row per pattern in pattern order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable<T: Real> {
    pub rows: Vec<ResultRow<T>>,
}

impl<T: Real> ResultTable<T> {
    pub fn total_probability(&self) -> T {
        self.rows.iter().map(|r| r.probability).sum()
    }

    pub fn probability_where(&self, pred: impl Fn(&DetectionPattern) -> bool) -> T {
        self.rows
            .iter()
            .filter(|r| matches!(&r.pattern, PatternKey::Detected(p) if pred(p)))
            .map(|r| r.probability)
            .sum()
    }

    pub fn coincidence_probability(&self) -> T {
        self.rows.iter().filter(|r| r.coincidence).map(|r| r.probability).sum()
    }

    pub fn row(&self, pattern: &PatternKey) -> Option<&ResultRow<T>> {
        self.rows.iter().find(|r| &r.pattern == pattern)
    }

    /// Output state averaged over every coincidence-passing pattern.
    pub fn conditional_output(&self) -> Ensemble<T> {
        let comps = self
            .rows
            .iter()
            .filter(|r| r.coincidence)
            .flat_map(|r| r.output.components().iter().map(move |(w, s)| (*w * r.probability, s.clone())))
            .collect();
        Ensemble::from_weighted(comps)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pattern", "probability", "output_state"])?;
        for r in &self.rows {
            w.write_record([r.pattern.to_string(), format!("{:e}", r.probability.as_f64()), r.output.to_text()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRow {
    pub pattern: PatternKey,
    pub count: u64,
    pub coincidence: bool,
}

/// Tallies from a Monte Carlo run, one row per observed pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub trials: u64,
    pub rows: Vec<CountRow>,
    /// Conditional output states (from the exact calculation) by pattern.
    pub outputs: BTreeMap<PatternKey, String>,
}

impl CountTable {
    pub fn count(&self, pattern: &PatternKey) -> u64 {
        self.rows.iter().find(|r| &r.pattern == pattern).map_or(0, |r| r.count)
    }

    pub fn count_where(&self, pred: impl Fn(&DetectionPattern) -> bool) -> u64 {
        self.rows
            .iter()
            .filter(|r| matches!(&r.pattern, PatternKey::Detected(p) if pred(p)))
            .map(|r| r.count)
            .sum()
    }

    pub fn coincidences(&self) -> u64 {
        self.rows.iter().filter(|r| r.coincidence).map(|r| r.count).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pattern", "probability", "counts", "output_state"])?;
        for r in &self.rows {
            let freq = r.count as f64 / self.trials as f64;
            let state = self.outputs.get(&r.pattern).cloned().unwrap_or_default();
            w.write_record([r.pattern.to_string(), format!("{freq:e}"), r.count.to_string(), state])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One emission event after propagation: its probability and the measured
/// branches `(pattern, conditional probability, residual)`.
struct PropagatedEvent<T: Real> {
    probability: f64,
    branches: Vec<(DetectionPattern, T, StateVector<T>)>,
}

fn total_delay(g: &CircuitGraph, port: &Port) -> f64 {
    g.stages
        .iter()
        .filter_map(|s| match s {
            Stage::Delay { port: p, time } if p == port => Some(*time),
            _ => None,
        })
        .sum()
}

/// Creates one photon in the superposition Σ amp·a†(mode).
fn create_superposed<T: Real>(state: &StateVector<T>, modes: &[(ModeLabel, Complex<T>)]) -> StateVector<T> {
    modes
        .iter()
        .fold(StateVector::zero(), |acc, (m, amp)| acc.added(&create_photon(state, m).scaled(*amp)))
}

fn initial_state<T: Real>(g: &CircuitGraph, event: &EmissionEvent) -> Result<StateVector<T>, EngineError> {
    if event.photons.is_empty() {
        return Ok(StateVector::vacuum());
    }
    let packets: Vec<PhotonWavepacket> = event
        .photons
        .iter()
        .map(|ph| ph.wavepacket.delayed(total_delay(g, &ph.port)))
        .collect();
    let gram = OverlapMatrix::<T>::from_wavepackets(&packets, &g.overlaps);
    let basis = build_temporal_basis(&gram)?;
    let mut state = StateVector::vacuum();
    for (i, ph) in event.photons.iter().enumerate() {
        let theta: T = deg_to_rad(ph.angle_deg);
        let pol = [theta.cos(), theta.sin()];
        let mut modes = Vec::new();
        for (k, amp) in basis.photon_amplitudes(i) {
            for p in Polarization::BOTH {
                modes.push((ModeLabel::new(ph.port.clone(), p, k), amp * pol[p.index()]));
            }
        }
        state = create_superposed(&state, &modes);
    }
    Ok(normalize(&state)?.0)
}

fn propagate<T: Real>(g: &CircuitGraph, event: &EmissionEvent) -> Result<PropagatedEvent<T>, EngineError> {
    let mut state = initial_state::<T>(g, event)?;
    let mut loss_detectors = Vec::new();
    for stage in &g.stages {
        let t = match stage {
            Stage::HalfWavePlate { port, angle_deg } => half_wave_plate(port, *angle_deg),
            Stage::Rotate { port, angle_deg } => polarization_rotation(port, *angle_deg),
            Stage::Pbs { a, b } => pbs(a, b)?,
            Stage::BeamSplitter { a, b } => beam_splitter(a, b)?,
            Stage::Analyzer { port, angle_deg } => {
                let loss = Port::new(&format!("{LOSS_PREFIX}{}", loss_detectors.len()));
                loss_detectors.push(DetectorSpec::number_resolving(loss.name(), loss.clone()));
                ProjectiveFilter::new(port.clone(), *angle_deg).with_loss_port(&loss)
            }
            Stage::Port(_) | Stage::Source(_) | Stage::Delay { .. } | Stage::Detector(_) | Stage::Output(_) => continue,
        };
        state = apply_transform(&state, &t)?;
    }
    let detectors = g.detectors();
    let names: Vec<String> = detectors.iter().map(|d| d.name.clone()).collect();
    let mut all = detectors;
    all.extend(loss_detectors);
    let branches = measure_branches(&state, &all)
        .into_iter()
        .map(|b| (b.pattern.reordered(&names), b.probability, b.residual))
        .collect();
    Ok(PropagatedEvent {
        probability: event.probability,
        branches,
    })
}

fn propagate_all<T: Real>(g: &CircuitGraph) -> Result<Vec<PropagatedEvent<T>>, EngineError> {
    let events = joint_emission(&g.sources())?;
    if events.is_empty() {
        return Err(EngineError::NoEvents);
    }
    events.iter().map(|e| propagate(g, e)).collect()
}

fn coincidence_of(g: &CircuitGraph) -> CoincidenceSpec {
    g.coincidence.clone().unwrap_or_default()
}

fn aggregate<T: Real>(g: &CircuitGraph, events: &[PropagatedEvent<T>]) -> ResultTable<T> {
    let mut merged: BTreeMap<DetectionPattern, (T, WeightedStates<T>)> = BTreeMap::new();
    for e in events {
        let pe = T::lit(e.probability);
        for (pattern, p, residual) in &e.branches {
            let w = pe * *p;
            let slot = merged.entry(pattern.clone()).or_insert_with(|| (T::zero(), Vec::new()));
            slot.0 = slot.0 + w;
            slot.1.push((w, residual.clone()));
        }
    }
    let coincidence = coincidence_of(g);
    let mut rows: Vec<ResultRow<T>> = merged
        .into_iter()
        .map(|(pattern, (probability, comps))| ResultRow {
            coincidence: coincidence.passes(&pattern),
            pattern: PatternKey::Detected(pattern),
            probability,
            output: Ensemble::from_weighted(comps),
        })
        .collect();
    let total: T = rows.iter().map(|r| r.probability).sum();
    let lost = T::one() - total;
    if lost.as_f64() > LOST_FLOOR {
        rows.push(ResultRow {
            pattern: PatternKey::Lost,
            probability: lost,
            coincidence: false,
            output: Ensemble::default(),
        });
    }
    ResultTable { rows }
}

/// Exact outcome distribution in double precision.
pub fn run_exact(g: &CircuitGraph) -> Result<ResultTable<f64>, EngineError> {
    run_exact_generic(g)
}

/// Exact outcome distribution at scalar precision `T`.
pub fn run_exact_generic<T: Real>(g: &CircuitGraph) -> Result<ResultTable<T>, EngineError> {
    let events = propagate_all::<T>(g)?;
    Ok(aggregate(g, &events))
}

/// Monte Carlo counting on a single worker.
pub fn run_monte_carlo(g: &CircuitGraph, trials: u64, seed: u64) -> Result<CountTable, EngineError> {
    run_monte_carlo_parallel(g, trials, seed, 1)
}

/// Monte Carlo counting split over `workers` threads. Worker `w` draws from
/// stream `w` of a ChaCha8 generator seeded with `seed`, so results are
/// reproducible for a fixed `(seed, workers)`.
pub fn run_monte_carlo_parallel(g: &CircuitGraph, trials: u64, seed: u64, workers: usize) -> Result<CountTable, EngineError> {
    if trials == 0 {
        return Err(EngineError::NoTrials);
    }
    if workers == 0 {
        return Err(EngineError::NoWorkers);
    }
    let events = propagate_all::<f64>(g)?;
    let exact = aggregate(g, &events);

    // Per-event pattern distributions, with any missing mass as `lost`.
    let per_event: Vec<(Vec<PatternKey>, WeightedIndex<f64>)> = events
        .iter()
        .map(|e| {
            let mut merged: BTreeMap<PatternKey, f64> = BTreeMap::new();
            for (p, q, _) in &e.branches {
                *merged.entry(PatternKey::Detected(p.clone())).or_default() += q;
            }
            let lost = 1.0 - merged.values().sum::<f64>();
            if lost > LOST_FLOOR {
                merged.insert(PatternKey::Lost, lost);
            }
            let (keys, weights): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
            let dist = WeightedIndex::new(weights).expect("event carries probability");
            (keys, dist)
        })
        .collect();
    let event_dist =
        WeightedIndex::new(events.iter().map(|e| e.probability)).expect("emission events carry probability");

    let share = |w: usize| trials / workers as u64 + u64::from((w as u64) < trials % workers as u64);
    let tally = |w: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(w as u64);
        let mut counts: BTreeMap<PatternKey, u64> = BTreeMap::new();
        for _ in 0..share(w) {
            let (keys, dist) = &per_event[event_dist.sample(&mut rng)];
            *counts.entry(keys[dist.sample(&mut rng)].clone()).or_default() += 1;
        }
        counts
    };
    let partials: Vec<BTreeMap<PatternKey, u64>> = if workers == 1 {
        vec![tally(0)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers).map(|w| s.spawn(move || tally(w))).collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut counts: BTreeMap<PatternKey, u64> = BTreeMap::new();
    for part in partials {
        for (k, v) in part {
            *counts.entry(k).or_default() += v;
        }
    }

    let coincidence = coincidence_of(g);
    let rows = counts
        .into_iter()
        .map(|(pattern, count)| CountRow {
            coincidence: matches!(&pattern, PatternKey::Detected(p) if coincidence.passes(p)),
            pattern,
            count,
        })
        .collect();
    let outputs = exact.rows.iter().map(|r| (r.pattern.clone(), r.output.to_text())).collect();
    Ok(CountTable { trials, rows, outputs })
}

/// Copies of the graph at every point of its scan, or the graph itself.
pub fn scan_points(g: &CircuitGraph) -> Vec<(Option<f64>, CircuitGraph)> {
    match &g.scan {
        None => vec![(None, g.clone())],
        Some(scan) => scan
            .values()
            .into_iter()
            .map(|v| {
                let mut point = g.clone();
                point.set_parameter(scan.kind, &scan.port, v);
                (Some(v), point)
            })
            .collect(),
    }
}

/// Engine requested by the graph's scan statement, exact when absent.
pub fn requested_engine(g: &CircuitGraph) -> EngineKind {
    g.scan.as_ref().map_or(EngineKind::Exact, |s| s.engine)
}
