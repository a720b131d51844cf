use std::fmt::Write;

use crate::detect::DetectorMode;
use crate::sources::SourceSpec;

use super::graph::{CircuitGraph, EngineKind, ScanKind, Stage};

/// Canonical text for a graph: family overlaps first, then one statement per
/// stage in order, then postselect and scan. Every option is written out.
///
/// Pair sources are written with the first photon's delay and width; the
/// language has no way to give the two photons different values.
pub fn serialize_circuit(g: &CircuitGraph) -> String {
    let mut out = String::new();
    for (a, b, v) in g.overlaps.entries() {
        writeln!(out, "overlap {a} {b} {v}").unwrap();
    }
    for stage in &g.stages {
        let line = match stage {
            Stage::Port(p) => format!("port {p}"),
            Stage::Source(SourceSpec::Ideal { port, angle_deg, wavepacket }) => format!(
                "source {port} ideal angle={angle_deg} t={} sigma={} family={}",
                wavepacket.center_time, wavepacket.width_sigma, wavepacket.family
            ),
            Stage::Source(SourceSpec::SpdcPair { ports, pair_prob, angle_deg, wavepackets }) => format!(
                "source {} {} spdc p={pair_prob} angle={angle_deg} t={} sigma={} family1={} family2={}",
                ports[0],
                ports[1],
                wavepackets[0].center_time,
                wavepackets[0].width_sigma,
                wavepackets[0].family,
                wavepackets[1].family
            ),
            Stage::Source(SourceSpec::Coherent { port, mean_photons, angle_deg, wavepacket }) => format!(
                "source {port} coherent mu={mean_photons} angle={angle_deg} t={} sigma={} family={}",
                wavepacket.center_time, wavepacket.width_sigma, wavepacket.family
            ),
            Stage::HalfWavePlate { port, angle_deg } => format!("hwp {port} {angle_deg}"),
            Stage::Rotate { port, angle_deg } => format!("rotate {port} {angle_deg}"),
            Stage::Pbs { a, b } => format!("pbs {a} {b}"),
            Stage::BeamSplitter { a, b } => format!("bs {a} {b}"),
            Stage::Analyzer { port, angle_deg } => format!("analyzer {port} {angle_deg}"),
            Stage::Delay { port, time } => format!("delay {port} {time}"),
            Stage::Detector(d) => {
                let mode = match d.mode {
                    DetectorMode::Threshold => "threshold",
                    DetectorMode::NumberResolving => "resolving",
                };
                format!("detector {} {} {mode} eff={}", d.name, d.port, d.efficiency)
            }
            Stage::Output(p) => format!("output {p}"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    if let Some(c) = &g.coincidence {
        writeln!(out, "postselect {}", c.required.join(" ")).unwrap();
    }
    if let Some(s) = &g.scan {
        let kind = match s.kind {
            ScanKind::Delay => "delay",
            ScanKind::Analyzer => "analyzer",
        };
        let engine = match s.engine {
            EngineKind::Exact => "engine=exact".to_string(),
            EngineKind::MonteCarlo { trials, seed } => format!("engine=mc trials={trials} seed={seed}"),
        };
        writeln!(out, "scan {kind} {} {} {} {} {engine}", s.port, s.from, s.to, s.steps).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;

    #[test]
    fn empty_graph_is_empty_document() {
        assert_eq!(serialize_circuit(&CircuitGraph::default()), "");
    }

    #[test]
    fn one_statement_per_stage() {
        let text = "\
overlap signal pump 0.5
source a b spdc p=0.01
source c coherent mu=0.02
port e
hwp a 7.5
rotate a 3
delay c 0.5
bs a e
pbs a b
analyzer b 0
detector D1 b resolving eff=0.9
pbs a c
detector D2 c
detector D3 e
output a
postselect D1 D2
scan delay c -4 4 41 engine=mc trials=1000 seed=7
";
        let g = parse_circuit(text).unwrap();
        let doc = serialize_circuit(&g);
        let statements = doc.lines().count();
        assert_eq!(statements, 1 + g.stages.len() + 2);
        assert_eq!(parse_circuit(&doc).unwrap(), g);
    }
}
