use std::collections::{BTreeMap, BTreeSet};

use crate::detect::{CoincidenceSpec, DetectorSpec};
use crate::distinguishability::FamilyOverlaps;
use crate::fock::Port;
use crate::sources::SourceSpec;

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// Declares an input port that receives no photons.
    Port(Port),
    Source(SourceSpec),
    HalfWavePlate { port: Port, angle_deg: f64 },
    Rotate { port: Port, angle_deg: f64 },
    Pbs { a: Port, b: Port },
    BeamSplitter { a: Port, b: Port },
    Analyzer { port: Port, angle_deg: f64 },
    Delay { port: Port, time: f64 },
    Detector(DetectorSpec),
    Output(Port),
}

impl Stage {
    /// Ports declared by this stage.
    fn declares(&self) -> Vec<Port> {
        match self {
            Stage::Port(p) => vec![p.clone()],
            Stage::Source(s) => s.ports(),
            _ => Vec::new(),
        }
    }

    /// Ports this stage acts on.
    pub fn uses(&self) -> Vec<Port> {
        match self {
            Stage::Port(_) | Stage::Source(_) => Vec::new(),
            Stage::HalfWavePlate { port, .. }
            | Stage::Rotate { port, .. }
            | Stage::Analyzer { port, .. }
            | Stage::Delay { port, .. }
            | Stage::Output(port) => vec![port.clone()],
            Stage::Pbs { a, b } | Stage::BeamSplitter { a, b } => vec![a.clone(), b.clone()],
            Stage::Detector(d) => vec![d.port.clone()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanKind {
    Delay,
    Analyzer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EngineKind {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

/// Parameter sweep attached to a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub kind: ScanKind,
    pub port: Port,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub engine: EngineKind,
}

impl ScanSpec {
    pub fn values(&self) -> Vec<f64> {
        grid(self.from, self.to, self.steps)
    }
}

/// `steps` evenly spaced points from `from` to `to` inclusive.
pub fn grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n)
            .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// A validated circuit: stages applied in order, left to right.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CircuitGraph {
    pub stages: Vec<Stage>,
    pub overlaps: FamilyOverlaps,
    pub coincidence: Option<CoincidenceSpec>,
    pub scan: Option<ScanSpec>,
}

impl CircuitGraph {
    pub fn sources(&self) -> Vec<SourceSpec> {
        self.stages
            .iter()
            .filter_map(|s| match s {
                Stage::Source(spec) => Some(spec.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn detectors(&self) -> Vec<DetectorSpec> {
        self.stages
            .iter()
            .filter_map(|s| match s {
                Stage::Detector(d) => Some(d.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn count(&self, pred: impl Fn(&Stage) -> bool) -> usize {
        self.stages.iter().filter(|s| pred(s)).count()
    }

    /// Detectors each port's photons can reach, following the stage order.
    pub fn reachable_detectors(&self, start: &Port) -> BTreeSet<String> {
        let mut live: BTreeSet<Port> = BTreeSet::from([start.clone()]);
        let mut hit = BTreeSet::new();
        for stage in &self.stages {
            match stage {
                Stage::Pbs { a, b } | Stage::BeamSplitter { a, b } => {
                    if live.contains(a) || live.contains(b) {
                        live.insert(a.clone());
                        live.insert(b.clone());
                    }
                }
                Stage::Detector(d) if live.contains(&d.port) => {
                    hit.insert(d.name.clone());
                }
                _ => {}
            }
        }
        hit
    }

    /// Checks structural invariants. `lines[i]` is the source line of stage `i`;
    /// `tail_line` is used for errors tied to the postselect and scan statements.
    pub fn validate_with_lines(&self, lines: &[usize], tail_lines: (usize, usize)) -> Result<(), ParseError> {
        let line_of = |i: usize| lines.get(i).copied().unwrap_or(i + 1);
        let mut declared: BTreeMap<Port, usize> = BTreeMap::new();
        let mut terminated: BTreeSet<Port> = BTreeSet::new();
        let mut mixed: BTreeSet<Port> = BTreeSet::new();
        let mut carrying: BTreeSet<Port> = BTreeSet::new();
        let mut detector_names: BTreeSet<String> = BTreeSet::new();
        let mut outputs: BTreeSet<Port> = BTreeSet::new();

        for (i, stage) in self.stages.iter().enumerate() {
            let line = line_of(i);
            for p in stage.declares() {
                if declared.contains_key(&p) {
                    return Err(ParseError::DuplicatePort { name: p.to_string(), line });
                }
                declared.insert(p.clone(), line);
                if matches!(stage, Stage::Source(_)) {
                    carrying.insert(p);
                }
            }
            for p in stage.uses() {
                if !declared.contains_key(&p) {
                    return Err(ParseError::UnknownPort { name: p.to_string(), line });
                }
                if terminated.contains(&p) {
                    return Err(ParseError::PortTerminated { name: p.to_string(), line });
                }
            }
            match stage {
                Stage::Pbs { a, b } | Stage::BeamSplitter { a, b } => {
                    if a == b {
                        return Err(ParseError::InvalidValue {
                            line,
                            column: 0,
                            message: format!("element needs two distinct ports, got `{a}` twice"),
                        });
                    }
                    mixed.insert(a.clone());
                    mixed.insert(b.clone());
                    if carrying.contains(a) || carrying.contains(b) {
                        carrying.insert(a.clone());
                        carrying.insert(b.clone());
                    }
                }
                Stage::Delay { port, .. } if mixed.contains(port) => {
                    return Err(ParseError::MisplacedDelay { port: port.to_string(), line });
                }
                Stage::Detector(d) => {
                    if !detector_names.insert(d.name.clone()) {
                        return Err(ParseError::DuplicateDetector { name: d.name.clone(), line });
                    }
                    terminated.insert(d.port.clone());
                }
                Stage::Output(p) => {
                    outputs.insert(p.clone());
                }
                _ => {}
            }
        }

        if let Some(c) = &self.coincidence {
            for name in &c.required {
                if !detector_names.contains(name) {
                    return Err(ParseError::UnknownDetector { name: name.clone(), line: tail_lines.0 });
                }
            }
        }
        if let Some(scan) = &self.scan {
            let line = tail_lines.1;
            if !declared.contains_key(&scan.port) {
                return Err(ParseError::UnknownPort { name: scan.port.to_string(), line });
            }
            let present = self.stages.iter().any(|s| match (scan.kind, s) {
                (ScanKind::Delay, Stage::Delay { port, .. }) => *port == scan.port,
                (ScanKind::Analyzer, Stage::Analyzer { port, .. }) => *port == scan.port,
                _ => false,
            });
            if !present {
                return Err(ParseError::UnknownScanTarget { port: scan.port.to_string(), line });
            }
        }
        let mut by_line: Vec<(usize, Port)> = declared.into_iter().map(|(p, l)| (l, p)).collect();
        by_line.sort();
        for (line, port) in by_line {
            if carrying.contains(&port) && !terminated.contains(&port) && !outputs.contains(&port) {
                return Err(ParseError::DanglingPort { name: port.to_string(), line });
            }
        }
        Ok(())
    }

    /// Validation for graphs built in code; stage `i` is reported as line `i + 1`.
    pub fn validate(&self) -> Result<(), ParseError> {
        let n = self.stages.len();
        self.validate_with_lines(&[], (n + 1, n + 2))
    }

    /// Sets the value of the last delay or analyzer stage on `port`.
    pub fn set_parameter(&mut self, kind: ScanKind, port: &Port, value: f64) -> bool {
        for stage in self.stages.iter_mut().rev() {
            match (kind, stage) {
                (ScanKind::Delay, Stage::Delay { port: p, time }) if p == port => {
                    *time = value;
                    return true;
                }
                (ScanKind::Analyzer, Stage::Analyzer { port: p, angle_deg }) if p == port => {
                    *angle_deg = value;
                    return true;
                }
                _ => {}
            }
        }
        false
    }
}
