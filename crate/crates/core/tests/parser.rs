use std::path::PathBuf;

use proptest::prelude::*;

use loqc::circuit::builder::{build_parity_circuit, Physics, ScanSettings};
use loqc::circuit::engine::run_exact;
use loqc::circuit::oracle::QubitPrep;
use loqc::circuit::{parse_circuit, serialize_circuit, ParseError};
use loqc::detect::{DetectionPattern, Outcome, PatternKey};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

#[test]
fn malformed_corpus_reports_kind_and_line() {
    let mut paths: Vec<_> = std::fs::read_dir(data("tests/data/malformed"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    assert!(paths.len() >= 10);
    for path in paths {
        let text = std::fs::read_to_string(&path).unwrap();
        let expect = text.lines().next().unwrap().strip_prefix("# expect: ").unwrap();
        let (kind, line) = expect.split_once(' ').unwrap();
        let err = parse_circuit(&text).expect_err(&path.display().to_string());
        assert_eq!((err.kind(), err.line()), (kind, line.parse().unwrap()), "{}: {err}", path.display());
        assert!(err.to_string().contains(&format!("line {line}")), "{err}");
    }
}

#[test]
fn shipped_parity_file_matches_builder() {
    let text = std::fs::read_to_string(data("circuits/parity.qc")).unwrap();
    let built = build_parity_circuit(
        [0.0, 0.0, 0.0].map(QubitPrep::new),
        &Physics::ideal(),
        &ScanSettings::default(),
    );
    assert_eq!(parse_circuit(&text).unwrap(), built);
}

#[test]
fn shipped_files_parse_and_round_trip() {
    for name in ["parity.qc", "xor_single.qc", "xor1_hom.qc"] {
        let g = parse_circuit(&std::fs::read_to_string(data(&format!("circuits/{name}"))).unwrap()).unwrap();
        assert_eq!(parse_circuit(&serialize_circuit(&g)).unwrap(), g, "{name}");
    }
}

#[test]
fn syntax_errors_carry_columns() {
    let err = parse_circuit("source a ideal\nhwp a fast\n").unwrap_err();
    match err {
        ParseError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 7)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn keywords_are_case_insensitive_and_comments_ignored() {
    let a = parse_circuit("SOURCE a IDEAL angle=30 # note\nDetector D a\n").unwrap();
    let b = parse_circuit("source a ideal angle=30\ndetector D a\n").unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_gate_output_text_is_stable() {
    let g = parse_circuit(&std::fs::read_to_string(data("circuits/xor_single.qc")).unwrap()).unwrap();
    let t = run_exact(&g).unwrap();
    let herald = PatternKey::Detected(DetectionPattern::new(vec![("D".into(), Outcome::Count(1))]));
    let row = t.row(&herald).unwrap();
    assert!((row.probability - 0.25).abs() < 1e-14);
    assert_eq!(
        row.output.to_text(),
        "(0.965925826289,0.000000000000) |1@a.H.0⟩ + (0.258819045103,0.000000000000) |1@a.V.0⟩"
    );
}

#[derive(Debug, Clone)]
enum Op {
    Hwp(usize, f64),
    Rotate(usize, f64),
    Analyzer(usize, f64),
    Pbs(usize, usize),
    Bs(usize, usize),
}

fn op(ports: usize) -> impl Strategy<Value = Op> {
    let angle = -180.0f64..180.0;
    prop_oneof![
        (0..ports, angle.clone()).prop_map(|(p, a)| Op::Hwp(p, a)),
        (0..ports, angle.clone()).prop_map(|(p, a)| Op::Rotate(p, a)),
        (0..ports, angle).prop_map(|(p, a)| Op::Analyzer(p, a)),
        (0..ports, 1..ports).prop_map(move |(a, k)| Op::Pbs(a, (a + k) % ports)),
        (0..ports, 1..ports).prop_map(move |(a, k)| Op::Bs(a, (a + k) % ports)),
    ]
}

fn source(i: usize, kind: u8, angle: f64, x: f64) -> String {
    match kind {
        0 => format!("source p{i} ideal angle={angle}"),
        1 => format!("source p{i} h{i} spdc p={} angle={angle}\ndetector H{i} h{i}", x * 0.1),
        _ => format!("source p{i} coherent mu={} angle={angle}", x * 0.2),
    }
}

fn circuit() -> impl Strategy<Value = String> {
    (2usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..3, 0.0f64..180.0, 0.01f64..1.0), n),
            prop::collection::vec(prop::option::of(-3.0f64..3.0), n),
            prop::collection::vec(op(n), 0..8),
            prop::collection::vec(0.0f64..1.0, n),
            0.0f64..=1.0,
        )
            .prop_map(move |(sources, delays, ops, effs, overlap)| {
                let mut lines = vec![format!("overlap photon other {overlap}")];
                lines.extend(sources.iter().enumerate().map(|(i, (k, a, x))| source(i, *k, *a, *x)));
                lines.extend(delays.iter().enumerate().filter_map(|(i, d)| d.map(|d| format!("delay p{i} {d}"))));
                lines.extend(ops.iter().map(|o| match o {
                    Op::Hwp(p, a) => format!("hwp p{p} {a}"),
                    Op::Rotate(p, a) => format!("rotate p{p} {a}"),
                    Op::Analyzer(p, a) => format!("analyzer p{p} {a}"),
                    Op::Pbs(a, b) => format!("pbs p{a} p{b}"),
                    Op::Bs(a, b) => format!("bs p{a} p{b}"),
                }));
                lines.extend(effs.iter().enumerate().map(|(i, e)| {
                    let mode = if i % 2 == 0 { "threshold" } else { "resolving" };
                    format!("detector D{i} p{i} {mode} eff={e}")
                }));
                let mut names: Vec<String> = (0..n).map(|i| format!("D{i}")).collect();
                names.extend(sources.iter().enumerate().filter(|(_, s)| s.0 == 1).map(|(i, _)| format!("H{i}")));
                lines.push(format!("postselect {}", names.join(" ")));
                lines.join("\n")
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialization_round_trips(text in circuit()) {
        let g = parse_circuit(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        let again = parse_circuit(&serialize_circuit(&g)).unwrap();
        prop_assert_eq!(&again, &g);
        prop_assert_eq!(serialize_circuit(&again), serialize_circuit(&g));
    }

    #[test]
    fn parser_never_panics(text in "[a-z0-9 =.#\n-]{0,200}") {
        let _ = parse_circuit(&text);
    }
}
