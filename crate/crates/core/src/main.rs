use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use loqc::circuit::engine::{requested_engine, run_exact, run_monte_carlo_parallel, scan_points};
use loqc::circuit::{parse_circuit, EngineKind, Physics, QubitPrep, SourceModel};
use loqc::experiments::{
    calibrate_overlap, default_angle_grid, default_delay_grid, hom_scan_full, hom_scan_xor1, malus_scan,
    truth_table_experiment, OverlapParam, NOMINAL_COUNTS_PER_UNIT_PROBABILITY,
};

#[derive(Parser)]
#[command(name = "loqc", version, about = "Post-selected linear-optics circuit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a circuit description file.
    Run {
        file: PathBuf,
        /// Overrides the engine named by the file's scan statement.
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Parity truth table for all eight basis inputs.
    TruthTable {
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Coincidence rates versus input delay.
    ScanDelay {
        #[arg(value_enum)]
        which: DelayScanKind,
        /// Defaults to -4σ.
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        /// Defaults to +4σ.
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long, default_value_t = 41)]
        steps: usize,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Three-fold coincidences versus output analyzer angle.
    ScanAnalyzer {
        /// Preparation angles of the three inputs in degrees.
        #[arg(long, default_value = "15,0,90")]
        input: String,
        #[arg(long, default_value_t = 15.0)]
        step: f64,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Find the overlap giving a target fitted visibility.
    Calibrate {
        #[arg(long)]
        target: f64,
        #[arg(long, value_enum)]
        param: ParamArg,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum DelayScanKind {
    Xor1,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    V12,
    Kappa,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "exact")]
    engine: EngineArg,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EngineArgs {
    fn kind(&self) -> EngineKind {
        match self.engine {
            EngineArg::Exact => EngineKind::Exact,
            EngineArg::Mc => EngineKind::MonteCarlo {
                trials: self.trials,
                seed: self.seed,
            },
        }
    }
}

#[derive(Args)]
struct PhysicsArgs {
    #[arg(long, default_value_t = 1.0)]
    v12: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Mean photon number of the coherent pulse; selects realistic sources.
    #[arg(long)]
    mu: Option<f64>,
    /// Pair probability per pulse; selects realistic sources.
    #[arg(long)]
    pair_prob: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    birefringence: f64,
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
}

impl PhysicsArgs {
    fn physics(&self) -> Result<Physics, Failure> {
        for (name, v) in [("v12", self.v12), ("kappa", self.kappa), ("efficiency", self.efficiency)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Failure::Usage(format!("--{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Failure::Usage(format!("--sigma must be positive, got {}", self.sigma)));
        }
        let sources = match (self.pair_prob, self.mu) {
            (None, None) => SourceModel::Ideal,
            (p, mu) => SourceModel::Realistic {
                pair_prob: p.unwrap_or(0.01),
                mu: mu.unwrap_or(0.02),
            },
        };
        Ok(Physics {
            v12: self.v12,
            kappa: self.kappa,
            sigma: self.sigma,
            sources,
            birefringence_deg: self.birefringence,
            efficiency: self.efficiency,
        })
    }
}

#[derive(Args)]
struct OutputArgs {
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON summary to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl OutputArgs {
    fn csv_sink(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(p) => Box::new(File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?),
            None => Box::new(io::stdout()),
        })
    }

    fn summary(&self, value: serde_json::Value) -> Result<(), Failure> {
        if let Some(p) = &self.json {
            let text = serde_json::to_string_pretty(&value).expect("summary serializes");
            std::fs::write(p, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

enum Failure {
    Parse(String),
    Numeric(String),
    Usage(String),
    Io(String),
}

impl Failure {
    fn numeric(e: impl std::fmt::Display) -> Self {
        Failure::Numeric(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn csv_writer(out: Box<dyn Write>) -> csv::Writer<Box<dyn Write>> {
    csv::Writer::from_writer(out)
}

fn run_file(file: &PathBuf, engine: Option<EngineArg>, mc: &McArgs, output: &OutputArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| Failure::Io(format!("{}: {e}", file.display())))?;
    let g = parse_circuit(&text).map_err(|e| Failure::Parse(format!("{}: {e}", file.display())))?;
    let kind = match engine {
        Some(EngineArg::Exact) => EngineKind::Exact,
        Some(EngineArg::Mc) => EngineKind::MonteCarlo {
            trials: mc.trials,
            seed: mc.seed,
        },
        None => requested_engine(&g),
    };
    let scanned = g.scan.is_some();
    let mut w = csv_writer(output.csv_sink()?);
    let mut header = vec!["pattern", "probability"];
    if matches!(kind, EngineKind::MonteCarlo { .. }) {
        header.push("counts");
    }
    header.push("output_state");
    if scanned {
        header.insert(0, "scan_value");
    }
    w.write_record(&header)?;
    let mut points = Vec::new();
    for (value, point) in scan_points(&g) {
        let prefix: Vec<String> = value.map(|v| v.to_string()).into_iter().collect();
        let coincidence = match kind {
            EngineKind::Exact => {
                let t = run_exact(&point).map_err(Failure::numeric)?;
                for r in &t.rows {
                    let mut rec = prefix.clone();
                    rec.extend([r.pattern.to_string(), format!("{:e}", r.probability), r.output.to_text()]);
                    w.write_record(&rec)?;
                }
                t.coincidence_probability()
            }
            EngineKind::MonteCarlo { trials, seed } => {
                let t = run_monte_carlo_parallel(&point, trials, seed, mc.workers).map_err(Failure::numeric)?;
                for r in &t.rows {
                    let mut rec = prefix.clone();
                    rec.extend([
                        r.pattern.to_string(),
                        format!("{:e}", r.count as f64 / trials as f64),
                        r.count.to_string(),
                        t.outputs.get(&r.pattern).cloned().unwrap_or_default(),
                    ]);
                    w.write_record(&rec)?;
                }
                t.coincidences() as f64 / trials as f64
            }
        };
        points.push(json!({ "scan_value": value, "coincidence_probability": coincidence }));
    }
    w.flush().map_err(|e| Failure::Io(e.to_string()))?;
    output.summary(json!({ "file": file.display().to_string(), "points": points }))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { file, engine, mc, output } => run_file(&file, engine, &mc, &output),
        Command::TruthTable { physics, engine, output } => {
            let report = truth_table_experiment(&physics.physics()?, engine.kind()).map_err(Failure::numeric)?;
            let mut w = csv_writer(output.csv_sink()?);
            w.write_record(["input", "expected", "p_out0", "p_out1", "counts_out0", "counts_out1", "error"])?;
            for r in &report.rows {
                w.write_record([
                    format!("{}{}{}", r.input[0], r.input[1], r.input[2]),
                    r.expected.to_string(),
                    format!("{:e}", r.p_out0),
                    format!("{:e}", r.p_out1),
                    format!("{:.1}", r.p_out0 * NOMINAL_COUNTS_PER_UNIT_PROBABILITY),
                    format!("{:.1}", r.p_out1 * NOMINAL_COUNTS_PER_UNIT_PROBABILITY),
                    format!("{:.6}", r.error),
                ])?;
            }
            w.flush().map_err(|e| Failure::Io(e.to_string()))?;
            output.summary(serde_json::to_value(&report).expect("report serializes"))
        }
        Command::ScanDelay { which, from, to, steps, physics, engine, output } => {
            let physics = physics.physics()?;
            let delays = match (from, to) {
                (None, None) if steps == 41 => default_delay_grid(physics.sigma),
                _ => loqc::circuit::graph::grid(
                    from.unwrap_or(-4.0 * physics.sigma),
                    to.unwrap_or(4.0 * physics.sigma),
                    steps,
                ),
            };
            let scan = match which {
                DelayScanKind::Xor1 => hom_scan_xor1(&delays, &physics, engine.kind()),
                DelayScanKind::Full => hom_scan_full(&delays, &physics, engine.kind()),
            }
            .map_err(Failure::numeric)?;
            let mut w = csv_writer(output.csv_sink()?);
            w.write_record(["delay", "correct", "wrong", "wrong_fraction", "counts_correct", "counts_wrong"])?;
            for p in &scan.points {
                w.write_record([
                    p.delay.to_string(),
                    format!("{:e}", p.correct),
                    format!("{:e}", p.wrong),
                    format!("{:.6}", p.wrong_fraction()),
                    format!("{:.1}", p.correct * NOMINAL_COUNTS_PER_UNIT_PROBABILITY),
                    format!("{:.1}", p.wrong * NOMINAL_COUNTS_PER_UNIT_PROBABILITY),
                ])?;
            }
            w.flush().map_err(|e| Failure::Io(e.to_string()))?;
            output.summary(serde_json::to_value(scan.estimate).expect("estimate serializes"))
        }
        Command::ScanAnalyzer { input, step, physics, engine, output } => {
            let angles: Vec<f64> = input
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::Usage(format!("--input: {e}")))?;
            let [a, b, c] = angles[..] else {
                return Err(Failure::Usage(format!("--input needs three angles, got {}", angles.len())));
            };
            if step.is_nan() || step <= 0.0 {
                return Err(Failure::Usage("--step must be positive".into()));
            }
            let scan = malus_scan(
                [a, b, c].map(QubitPrep::new),
                &default_angle_grid(step),
                &physics.physics()?,
                engine.kind(),
            )
            .map_err(Failure::numeric)?;
            let mut w = csv_writer(output.csv_sink()?);
            w.write_record(["theta3", "coincidence", "counts"])?;
            for (t, p) in &scan.points {
                w.write_record([t.to_string(), format!("{p:e}"), format!("{:.1}", p * NOMINAL_COUNTS_PER_UNIT_PROBABILITY)])?;
            }
            w.flush().map_err(|e| Failure::Io(e.to_string()))?;
            output.summary(json!({
                "peak_deg": scan.peak_deg,
                "amplitude": scan.amplitude,
                "offset": scan.offset,
                "max_residual": scan.max_residual,
            }))
        }
        Command::Calibrate { target, param, physics, output } => {
            let physics = physics.physics()?;
            let param = match param {
                ParamArg::V12 => OverlapParam::V12,
                ParamArg::Kappa => OverlapParam::Kappa,
            };
            let c = calibrate_overlap(target, param, &physics, &default_delay_grid(physics.sigma), EngineKind::Exact)
                .map_err(Failure::numeric)?;
            let mut w = csv_writer(output.csv_sink()?);
            w.write_record(["param", "value", "visibility", "iterations"])?;
            let name = match param {
                OverlapParam::V12 => "v12",
                OverlapParam::Kappa => "kappa",
            };
            w.write_record([name.to_string(), c.value.to_string(), c.visibility.to_string(), c.iterations.to_string()])?;
            w.flush().map_err(|e| Failure::Io(e.to_string()))?;
            output.summary(serde_json::to_value(c).expect("calibration serializes"))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Parse(msg)) => {
            eprintln!("parse error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(1)
        }
    }
}
