//! Line-oriented circuit description language.
//!
//! ```text
//! file        = { line }
//! line        = [ statement ] [ "#" comment ]
//! statement   = port | source | overlap | element | detector | output
//!             | postselect | scan
//! port        = "port" IDENT
//! source      = "source" IDENT "ideal"    { option }
//!             | "source" IDENT IDENT "spdc" "p=" NUM { option }
//!             | "source" IDENT "coherent" "mu=" NUM { option }
//! option      = KEY "=" VALUE        (angle, t, sigma, family, family1, family2)
//! overlap     = "overlap" IDENT IDENT NUM
//! element     = ("hwp" | "rotate" | "analyzer" | "delay") IDENT NUM
//!             | ("pbs" | "bs") IDENT IDENT
//! detector    = "detector" IDENT IDENT [ "threshold" | "resolving" ] [ "eff=" NUM ]
//! output      = "output" IDENT
//! postselect  = "postselect" IDENT { IDENT }
//! scan        = "scan" ("delay" | "analyzer") IDENT NUM NUM INT
//!               [ "engine=" ("exact" | "mc") ] [ "trials=" INT ] [ "seed=" INT ]
//! ```
//!
//! Keywords are case-insensitive; port, detector and family names are not.
//! Ports must be declared (by `port` or `source`) before they are used.

use std::collections::BTreeSet;

use crate::detect::{CoincidenceSpec, DetectorMode, DetectorSpec};
use crate::distinguishability::{FamilyOverlaps, PhotonWavepacket};
use crate::fock::Port;
use crate::sources::SourceSpec;

use super::graph::{CircuitGraph, EngineKind, ScanKind, ScanSpec, Stage};
use super::ParseError;

pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in code.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &code[s..i],
                    column: code[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &code[s..],
            column: code[..s].chars().count() + 1,
        });
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Cursor<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'a> Cursor<'a> {
    fn syntax(&self, column: usize, expected: &str) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column,
            expected: expected.to_string(),
        }
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end_column, |t| t.column)
    }

    fn next(&mut self, expected: &str) -> Result<Token<'a>, ParseError> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.syntax(self.end_column, expected))?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.pos)
    }

    fn ident(&mut self, what: &str) -> Result<(&'a str, usize), ParseError> {
        let tok = self.next(what)?;
        if is_ident(tok.text) {
            Ok((tok.text, tok.column))
        } else {
            Err(self.syntax(tok.column, what))
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, ParseError> {
        let tok = self.next(what)?;
        parse_number(tok.text).ok_or_else(|| self.syntax(tok.column, what))
    }

    fn integer(&mut self, what: &str) -> Result<u64, ParseError> {
        let tok = self.next(what)?;
        tok.text.parse::<u64>().map_err(|_| self.syntax(tok.column, what))
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) => Err(self.syntax(t.column, "end of statement")),
            None => Ok(()),
        }
    }

    /// Remaining `key=value` options, keys lowercased.
    fn options(&mut self, allowed: &[&str]) -> Result<Vec<(String, &'a str, usize)>, ParseError> {
        let mut out: Vec<(String, &'a str, usize)> = Vec::new();
        while let Some(tok) = self.peek().cloned() {
            let expected = format!("option ({})", allowed.iter().map(|k| format!("{k}=")).collect::<Vec<_>>().join(", "));
            let Some((key, value)) = tok.text.split_once('=') else {
                return Err(self.syntax(tok.column, &expected));
            };
            let key = key.to_ascii_lowercase();
            if !allowed.contains(&key.as_str()) || value.is_empty() {
                return Err(self.syntax(tok.column, &expected));
            }
            if out.iter().any(|(k, _, _)| *k == key) {
                return Err(self.syntax(tok.column, &format!("a single `{key}=` option")));
            }
            let value_column = tok.column + key.len() + 1;
            out.push((key, value, value_column));
            self.pos += 1;
        }
        Ok(out)
    }
}

fn parse_number(text: &str) -> Option<f64> {
    let first = text.chars().next()?;
    if !(first.is_ascii_digit() || matches!(first, '-' | '+' | '.')) {
        return None;
    }
    text.parse::<f64>().ok().filter(|x| x.is_finite())
}

struct SourceOptions {
    angle: f64,
    t: f64,
    sigma: f64,
    families: [String; 2],
}

fn read_source_options(
    cur: &Cursor<'_>,
    opts: &[(String, &str, usize)],
    default_families: [&str; 2],
) -> Result<SourceOptions, ParseError> {
    let mut s = SourceOptions {
        angle: 0.0,
        t: 0.0,
        sigma: DEFAULT_SIGMA,
        families: default_families.map(String::from),
    };
    for (key, value, column) in opts {
        let num = || parse_number(value).ok_or_else(|| cur.syntax(*column, "number"));
        match key.as_str() {
            "angle" => s.angle = num()?,
            "t" => s.t = num()?,
            "sigma" => {
                s.sigma = num()?;
                if s.sigma <= 0.0 {
                    return Err(ParseError::InvalidValue {
                        line: cur.line,
                        column: *column,
                        message: "sigma must be positive".into(),
                    });
                }
            }
            "family" | "family1" | "family2" => {
                if !is_ident(value) {
                    return Err(cur.syntax(*column, "family name"));
                }
                let slot = usize::from(key == "family2");
                s.families[slot] = value.to_string();
            }
            _ => {}
        }
    }
    Ok(s)
}

fn wavepacket(opts: &SourceOptions, family: &str) -> PhotonWavepacket {
    PhotonWavepacket::new(opts.t, opts.sigma, family).expect("sigma validated positive")
}

fn invalid(line: usize, column: usize, e: impl std::fmt::Display) -> ParseError {
    ParseError::InvalidValue {
        line,
        column,
        message: e.to_string(),
    }
}

/// Parses and validates a circuit description.
pub fn parse_circuit(text: &str) -> Result<CircuitGraph, ParseError> {
    let mut graph = CircuitGraph::default();
    let mut lines: Vec<usize> = Vec::new();
    let mut declared: BTreeSet<String> = BTreeSet::new();
    let mut detectors: BTreeSet<String> = BTreeSet::new();
    let mut overlaps = FamilyOverlaps::new();
    let mut tail_lines = (0, 0);

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            continue;
        }
        let end_column = raw.split('#').next().unwrap_or("").trim_end().chars().count() + 1;
        let mut cur = Cursor {
            tokens,
            pos: 0,
            line,
            end_column,
        };
        let kw_tok = cur.next("statement")?;
        let keyword = kw_tok.text.to_ascii_lowercase();

        // Ports referenced by the statement must already exist.
        let use_port = |cur: &mut Cursor<'_>, declared: &BTreeSet<String>| -> Result<Port, ParseError> {
            let (name, _) = cur.ident("port name")?;
            if !declared.contains(name) {
                return Err(ParseError::UnknownPort { name: name.to_string(), line });
            }
            Ok(Port::new(name))
        };

        let stage = match keyword.as_str() {
            "port" => {
                let (name, _) = cur.ident("port name")?;
                cur.finish()?;
                Some(Stage::Port(Port::new(name)))
            }
            "source" => {
                let (first, _) = cur.ident("port name")?;
                let kind_col = cur.here();
                let (second, _) = cur.ident("source kind (ideal, spdc, coherent) or second port")?;
                let spec = match second.to_ascii_lowercase().as_str() {
                    "ideal" => {
                        let opts = cur.options(&["angle", "t", "sigma", "family"])?;
                        let o = read_source_options(&cur, &opts, ["photon", "photon"])?;
                        SourceSpec::Ideal {
                            port: Port::new(first),
                            angle_deg: o.angle,
                            wavepacket: wavepacket(&o, &o.families[0]),
                        }
                    }
                    "coherent" => {
                        let opts = cur.options(&["mu", "angle", "t", "sigma", "family"])?;
                        let (_, mu_text, mu_col) = opts
                            .iter()
                            .find(|(k, _, _)| k == "mu")
                            .cloned()
                            .ok_or_else(|| cur.syntax(cur.end_column, "mu="))?;
                        let mu = parse_number(mu_text).ok_or_else(|| cur.syntax(mu_col, "number"))?;
                        let o = read_source_options(&cur, &opts, ["pump", "pump"])?;
                        let spec = SourceSpec::Coherent {
                            port: Port::new(first),
                            mean_photons: mu,
                            angle_deg: o.angle,
                            wavepacket: wavepacket(&o, &o.families[0]),
                        };
                        spec.validate().map_err(|e| invalid(line, mu_col, e))?;
                        spec
                    }
                    _ => {
                        if !is_ident(second) {
                            return Err(cur.syntax(kind_col, "source kind"));
                        }
                        let kind_col = cur.here();
                        let kind = cur.next("source kind `spdc`")?;
                        if !kind.text.eq_ignore_ascii_case("spdc") {
                            return Err(cur.syntax(kind_col, "source kind `spdc`"));
                        }
                        let opts = cur.options(&["p", "angle", "t", "sigma", "family1", "family2"])?;
                        let (_, p_text, p_col) = opts
                            .iter()
                            .find(|(k, _, _)| k == "p")
                            .cloned()
                            .ok_or_else(|| cur.syntax(cur.end_column, "p="))?;
                        let p = parse_number(p_text).ok_or_else(|| cur.syntax(p_col, "number"))?;
                        let o = read_source_options(&cur, &opts, ["signal", "idler"])?;
                        let spec = SourceSpec::SpdcPair {
                            ports: [Port::new(first), Port::new(second)],
                            pair_prob: p,
                            angle_deg: o.angle,
                            wavepackets: [wavepacket(&o, &o.families[0]), wavepacket(&o, &o.families[1])],
                        };
                        spec.validate().map_err(|e| invalid(line, p_col, e))?;
                        spec
                    }
                };
                Some(Stage::Source(spec))
            }
            "overlap" => {
                let (a, _) = cur.ident("family name")?;
                let (b, _) = cur.ident("family name")?;
                let col = cur.here();
                let v = cur.number("overlap value")?;
                cur.finish()?;
                overlaps.set(a, b, v).map_err(|e| invalid(line, col, e))?;
                None
            }
            "hwp" | "rotate" | "analyzer" | "delay" => {
                let port = use_port(&mut cur, &declared)?;
                let value = cur.number(if keyword == "delay" { "delay time" } else { "angle in degrees" })?;
                cur.finish()?;
                Some(match keyword.as_str() {
                    "hwp" => Stage::HalfWavePlate { port, angle_deg: value },
                    "rotate" => Stage::Rotate { port, angle_deg: value },
                    "analyzer" => Stage::Analyzer { port, angle_deg: value },
                    _ => Stage::Delay { port, time: value },
                })
            }
            "pbs" | "bs" => {
                let a = use_port(&mut cur, &declared)?;
                let b = use_port(&mut cur, &declared)?;
                cur.finish()?;
                Some(if keyword == "pbs" {
                    Stage::Pbs { a, b }
                } else {
                    Stage::BeamSplitter { a, b }
                })
            }
            "detector" => {
                let (name, _) = cur.ident("detector name")?;
                let port = use_port(&mut cur, &declared)?;
                let mut mode = DetectorMode::Threshold;
                if let Some(t) = cur.peek() {
                    if !t.text.contains('=') {
                        let t = cur.next("detector mode")?;
                        mode = match t.text.to_ascii_lowercase().as_str() {
                            "threshold" => DetectorMode::Threshold,
                            "resolving" => DetectorMode::NumberResolving,
                            _ => return Err(cur.syntax(t.column, "detector mode (threshold, resolving)")),
                        };
                    }
                }
                let opts = cur.options(&["eff"])?;
                let mut spec = DetectorSpec {
                    name: name.to_string(),
                    port,
                    mode,
                    efficiency: 1.0,
                };
                if let Some((_, v, col)) = opts.first() {
                    let eff = parse_number(v).ok_or_else(|| cur.syntax(*col, "number"))?;
                    spec = spec.with_efficiency(eff).map_err(|e| invalid(line, *col, e))?;
                }
                if !detectors.insert(name.to_string()) {
                    return Err(ParseError::DuplicateDetector { name: name.to_string(), line });
                }
                Some(Stage::Detector(spec))
            }
            "output" => {
                let port = use_port(&mut cur, &declared)?;
                cur.finish()?;
                Some(Stage::Output(port))
            }
            "postselect" => {
                if graph.coincidence.is_some() {
                    return Err(cur.syntax(kw_tok.column, "a single postselect statement"));
                }
                let mut required = Vec::new();
                let (first, _) = cur.ident("detector name")?;
                required.push(first.to_string());
                while cur.peek().is_some() {
                    let (n, _) = cur.ident("detector name")?;
                    required.push(n.to_string());
                }
                for name in &required {
                    if !detectors.contains(name) {
                        return Err(ParseError::UnknownDetector { name: name.clone(), line });
                    }
                }
                graph.coincidence = Some(CoincidenceSpec { required });
                tail_lines.0 = line;
                None
            }
            "scan" => {
                if graph.scan.is_some() {
                    return Err(cur.syntax(kw_tok.column, "a single scan statement"));
                }
                let kind_tok = cur.next("scan kind (delay, analyzer)")?;
                let kind = match kind_tok.text.to_ascii_lowercase().as_str() {
                    "delay" => ScanKind::Delay,
                    "analyzer" => ScanKind::Analyzer,
                    _ => return Err(cur.syntax(kind_tok.column, "scan kind (delay, analyzer)")),
                };
                let port = use_port(&mut cur, &declared)?;
                let from = cur.number("scan start")?;
                let to = cur.number("scan end")?;
                let steps_col = cur.here();
                let steps = cur.integer("number of steps")?;
                if steps == 0 {
                    return Err(invalid(line, steps_col, "scan needs at least one step"));
                }
                let opts = cur.options(&["engine", "trials", "seed"])?;
                let mut engine = "exact".to_string();
                let (mut trials, mut seed) = (100_000u64, 0u64);
                for (key, value, col) in &opts {
                    match key.as_str() {
                        "engine" => {
                            engine = value.to_ascii_lowercase();
                            if engine != "exact" && engine != "mc" {
                                return Err(cur.syntax(*col, "engine (exact, mc)"));
                            }
                        }
                        "trials" => {
                            trials = value.parse().map_err(|_| cur.syntax(*col, "integer"))?;
                            if trials == 0 {
                                return Err(invalid(line, *col, "trials must be at least 1"));
                            }
                        }
                        _ => seed = value.parse().map_err(|_| cur.syntax(*col, "integer"))?,
                    }
                }
                graph.scan = Some(ScanSpec {
                    kind,
                    port,
                    from,
                    to,
                    steps: steps as usize,
                    engine: if engine == "mc" {
                        EngineKind::MonteCarlo { trials, seed }
                    } else {
                        EngineKind::Exact
                    },
                });
                tail_lines.1 = line;
                None
            }
            _ => {
                return Err(cur.syntax(
                    kw_tok.column,
                    "statement keyword (port, source, overlap, hwp, rotate, pbs, bs, analyzer, delay, detector, output, postselect, scan)",
                ))
            }
        };

        if let Some(stage) = stage {
            if let Stage::Port(p) | Stage::Source(SourceSpec::Ideal { port: p, .. }) | Stage::Source(SourceSpec::Coherent { port: p, .. }) = &stage {
                if !declared.insert(p.to_string()) {
                    return Err(ParseError::DuplicatePort { name: p.to_string(), line });
                }
            }
            if let Stage::Source(SourceSpec::SpdcPair { ports, .. }) = &stage {
                for p in ports {
                    if !declared.insert(p.to_string()) {
                        return Err(ParseError::DuplicatePort { name: p.to_string(), line });
                    }
                }
            }
            graph.stages.push(stage);
            lines.push(line);
        }
    }
    graph.overlaps = overlaps;
    graph.validate_with_lines(&lines, tail_lines)?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_carry_columns() {
        let t = tokenize("  pbs  a b # note");
        let cols: Vec<_> = t.iter().map(|t| (t.text, t.column)).collect();
        assert_eq!(cols, vec![("pbs", 3), ("a", 8), ("b", 10)]);
    }

    #[test]
    fn minimal_file() {
        let g = parse_circuit("source a ideal\ndetector D a\n").unwrap();
        assert_eq!(g.stages.len(), 2);
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let g = parse_circuit("SOURCE a IDEAL Angle=30\nHwp a 10\nDetector D a Resolving EFF=0.5\nPostSelect D").unwrap();
        assert_eq!(g.stages.len(), 3);
        assert_eq!(g.detectors()[0].mode, DetectorMode::NumberResolving);
        assert_eq!(g.detectors()[0].efficiency, 0.5);
    }

    #[test]
    fn undeclared_port_reports_line() {
        let err = parse_circuit("# header\nsource a ideal\n\npbs a b\n").unwrap_err();
        assert_eq!(err, ParseError::UnknownPort { name: "b".into(), line: 4 });
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_circuit("source a ideal\nhwp a ten\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::Syntax { line: 2, column: 7, expected: "angle in degrees".into() }
        );
        let err = parse_circuit("source a ideal\nhwp a\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, column: 6, .. }));
    }

    #[test]
    fn empty_document() {
        assert_eq!(parse_circuit("").unwrap(), CircuitGraph::default());
        assert_eq!(parse_circuit("# nothing\n\n   \n").unwrap(), CircuitGraph::default());
    }

    #[test]
    fn spdc_and_coherent_sources() {
        let g = parse_circuit(
            "source q1 q2 spdc p=0.01 sigma=2\nsource q3 coherent mu=0.1 family=laser\n\
             detector A q1\ndetector B q2\ndetector C q3\n",
        )
        .unwrap();
        match &g.stages[0] {
            Stage::Source(SourceSpec::SpdcPair { pair_prob, wavepackets, .. }) => {
                assert_eq!(*pair_prob, 0.01);
                assert_eq!(wavepackets[1].family, "idler");
                assert_eq!(wavepackets[0].width_sigma, 2.0);
            }
            other => panic!("{other:?}"),
        }
        let err = parse_circuit("source q3 coherent mu=0.9\n").unwrap_err();
        assert!(matches!(err, ParseError::InvalidValue { line: 1, .. }));
    }
}
