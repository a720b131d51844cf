//! Scenario runners for the truth table, delay scans, analyzer scans and
//! overlap calibration.

pub mod fit;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::builder::{build_parity_circuit, build_xor1_hom_circuit, Physics, ScanSettings};
use crate::circuit::engine::{run_exact, run_monte_carlo, EngineError};
use crate::circuit::graph::{grid, CircuitGraph, EngineKind};
use crate::circuit::oracle::QubitPrep;
use crate::detect::DetectionPattern;

pub use fit::{fit_cos_squared, fit_gaussian_dip, CosSquaredFit, FitError, GaussianFit};

/// Cosmetic scale turning probabilities into "counts per run" columns.
pub const NOMINAL_COUNTS_PER_UNIT_PROBABILITY: f64 = 1.0e4;
pub const MAX_CALIBRATION_ITERATIONS: usize = 40;
pub const CALIBRATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("target visibility {target} not reachable: parameter range gives [{low}, {high}]")]
    NotBracketed { target: f64, low: f64, high: f64 },
    #[error("invalid target visibility {0}; expected a value in (0, 1]")]
    InvalidTarget(f64),
    #[error("calibration did not reach the target within {0} iterations")]
    NoConvergence(usize),
}

pub fn default_delay_grid(sigma: f64) -> Vec<f64> {
    grid(-4.0 * sigma, 4.0 * sigma, 41)
}

/// θ₃ from 0° up to (not including) 180°.
pub fn default_angle_grid(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).ceil() as usize;
    (0..n).map(|i| i as f64 * step_deg).filter(|t| *t < 180.0).collect()
}

/// Probability of patterns satisfying `pred`, from the exact engine or as a
/// Monte Carlo frequency. `point` offsets the seed so scan points are
/// statistically independent.
fn rate(g: &CircuitGraph, engine: EngineKind, point: u64, pred: impl Fn(&DetectionPattern) -> bool) -> Result<f64, EngineError> {
    match engine {
        EngineKind::Exact => Ok(run_exact(g)?.probability_where(pred)),
        EngineKind::MonteCarlo { trials, seed } => {
            let t = run_monte_carlo(g, trials, seed.wrapping_add(point))?;
            Ok(t.count_where(pred) as f64 / trials as f64)
        }
    }
}

fn all_fired(p: &DetectionPattern) -> bool {
    ["D1", "D2", "D3"].iter().all(|d| p.clicked(d))
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthRow {
    pub input: [u8; 3],
    pub expected: u8,
    /// Three-fold coincidence probability with θ₃ passing |0⟩ and |1⟩.
    pub p_out0: f64,
    pub p_out1: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthTableReport {
    pub rows: Vec<TruthRow>,
    /// Wrong-output coincidences over all coincidences, summed over rows.
    pub aggregate_error: f64,
}

pub fn truth_table_experiment(physics: &Physics, engine: EngineKind) -> Result<TruthTableReport, ExperimentError> {
    let mut rows = Vec::with_capacity(8);
    for (index, bits) in (0u8..8).map(|i| (i, [i >> 2 & 1, i >> 1 & 1, i & 1])) {
        let preps = bits.map(|b| QubitPrep::basis(b == 1));
        let mut p = [0.0; 2];
        for (out, theta) in [0.0, 90.0].into_iter().enumerate() {
            let settings = ScanSettings {
                theta3_deg: theta,
                ..ScanSettings::default()
            };
            let g = build_parity_circuit(preps, physics, &settings);
            p[out] = rate(&g, engine, 2 * index as u64 + out as u64, all_fired)?;
        }
        let expected = bits[0] ^ bits[1] ^ bits[2];
        let total = p[0] + p[1];
        let wrong = p[1 - expected as usize];
        rows.push(TruthRow {
            input: bits,
            expected,
            p_out0: p[0],
            p_out1: p[1],
            error: if total > 0.0 { wrong / total } else { f64::NAN },
        });
    }
    let wrong: f64 = rows.iter().map(|r| if r.expected == 0 { r.p_out1 } else { r.p_out0 }).sum();
    let total: f64 = rows.iter().map(|r| r.p_out0 + r.p_out1).sum();
    Ok(TruthTableReport {
        rows,
        aggregate_error: wrong / total,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VisibilityEstimate {
    pub visibility: f64,
    pub baseline: f64,
    pub depth: f64,
    pub width: f64,
    pub center: f64,
    pub residual_norm: f64,
}

impl From<GaussianFit> for VisibilityEstimate {
    fn from(f: GaussianFit) -> Self {
        VisibilityEstimate {
            visibility: f.visibility(),
            baseline: f.baseline,
            depth: f.depth,
            width: f.width,
            center: f.center,
            residual_norm: f.residual_norm,
        }
    }
}

/// One delay setting with the suppressed and enhanced channel rates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DelayPoint {
    pub delay: f64,
    /// Correct-output coincidence rate (enhanced at zero delay).
    pub correct: f64,
    /// Wrong-output coincidence rate (suppressed at zero delay).
    pub wrong: f64,
}

impl DelayPoint {
    pub fn wrong_fraction(&self) -> f64 {
        self.wrong / (self.correct + self.wrong)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DelayScan {
    pub points: Vec<DelayPoint>,
    /// Fit of the suppressed channel.
    pub estimate: VisibilityEstimate,
}

fn fit_scan(points: Vec<DelayPoint>) -> Result<DelayScan, ExperimentError> {
    let xs: Vec<f64> = points.iter().map(|p| p.delay).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.wrong).collect();
    let estimate = fit_gaussian_dip(&xs, &ys)?.into();
    Ok(DelayScan { points, estimate })
}

/// Two-photon scan of photon 1's delay through XOR1 alone, input |0,0⟩.
/// D1&D3 reads logical 0 (correct), D1&D2 logical 1 (wrong).
pub fn hom_scan_xor1(delays: &[f64], physics: &Physics, engine: EngineKind) -> Result<DelayScan, ExperimentError> {
    let points = delays
        .iter()
        .enumerate()
        .map(|(i, &delay)| {
            let g = build_xor1_hom_circuit(physics, delay);
            let (i0, i1) = (2 * i as u64, 2 * i as u64 + 1);
            let correct = rate(&g, engine, i0, |p| p.clicked("D1") && p.clicked("D3") && !p.clicked("D2"))?;
            let wrong = rate(&g, engine, i1, |p| p.clicked("D1") && p.clicked("D2") && !p.clicked("D3"))?;
            Ok(DelayPoint { delay, correct, wrong })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    fit_scan(points)
}

/// Three-photon scan of photon 3's delay through the full circuit, input
/// |0,0,1⟩, with θ₃ passing the correct |1⟩ and the wrong |0⟩.
pub fn hom_scan_full(delays: &[f64], physics: &Physics, engine: EngineKind) -> Result<DelayScan, ExperimentError> {
    let preps = [0.0, 0.0, 90.0].map(QubitPrep::new);
    let points = delays
        .iter()
        .enumerate()
        .map(|(i, &delay)| {
            let mut p = [0.0; 2];
            for (k, theta) in [90.0, 0.0].into_iter().enumerate() {
                let settings = ScanSettings {
                    theta3_deg: theta,
                    delay3: delay,
                    ..ScanSettings::default()
                };
                p[k] = rate(&build_parity_circuit(preps, physics, &settings), engine, 2 * i as u64 + k as u64, all_fired)?;
            }
            Ok(DelayPoint {
                delay,
                correct: p[0],
                wrong: p[1],
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    fit_scan(points)
}

#[derive(Debug, Clone, Serialize)]
pub struct MalusScan {
    /// (θ₃, three-fold coincidence rate)
    pub points: Vec<(f64, f64)>,
    pub peak_deg: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub max_residual: f64,
}

pub fn malus_scan(preps: [QubitPrep; 3], angles_deg: &[f64], physics: &Physics, engine: EngineKind) -> Result<MalusScan, ExperimentError> {
    let points = angles_deg
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let settings = ScanSettings {
                theta3_deg: theta,
                ..ScanSettings::default()
            };
            let g = build_parity_circuit(preps, physics, &settings);
            Ok((theta, rate(&g, engine, i as u64, all_fired)?))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let (ts, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let fit = fit_cos_squared(&ts, &ys)?;
    Ok(MalusScan {
        points,
        peak_deg: fit.peak_deg,
        amplitude: fit.amplitude,
        offset: fit.offset,
        max_residual: fit.max_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OverlapParam {
    /// Pair-photon overlap, calibrated on the XOR1 scan.
    V12,
    /// Pair-to-pump overlap, calibrated on the three-photon scan.
    Kappa,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Calibration {
    pub param: OverlapParam,
    pub value: f64,
    pub visibility: f64,
    pub iterations: usize,
}

/// Largest κ for which the three-photon overlap matrix stays positive
/// semidefinite given v₁₂.
pub fn kappa_upper_bound(v12: f64) -> f64 {
    ((1.0 + v12) / 2.0).sqrt().min(1.0)
}

/// Fitted visibility with `param` set to `value`.
pub fn visibility_at(param: OverlapParam, value: f64, physics: &Physics, delays: &[f64], engine: EngineKind) -> Result<f64, ExperimentError> {
    let scan = match param {
        OverlapParam::V12 => hom_scan_xor1(delays, &Physics { v12: value, ..*physics }, engine)?,
        OverlapParam::Kappa => hom_scan_full(delays, &Physics { kappa: value, ..*physics }, engine)?,
    };
    Ok(scan.estimate.visibility)
}

/// Bisection on `param` until the fitted visibility is within
/// [`CALIBRATION_TOLERANCE`] of `target`. Relies on visibility growing with
/// the overlap.
pub fn calibrate_overlap(
    target: f64,
    param: OverlapParam,
    physics: &Physics,
    delays: &[f64],
    engine: EngineKind,
) -> Result<Calibration, ExperimentError> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(ExperimentError::InvalidTarget(target));
    }
    let (mut lo, mut hi) = match param {
        OverlapParam::V12 => (0.0, 1.0),
        OverlapParam::Kappa => (0.0, kappa_upper_bound(physics.v12)),
    };
    let v_lo = visibility_at(param, lo, physics, delays, engine)?;
    let v_hi = visibility_at(param, hi, physics, delays, engine)?;
    let done = |value: f64, visibility: f64, iterations: usize| Calibration {
        param,
        value,
        visibility,
        iterations,
    };
    if (v_hi - target).abs() <= CALIBRATION_TOLERANCE {
        return Ok(done(hi, v_hi, 0));
    }
    if (v_lo - target).abs() <= CALIBRATION_TOLERANCE {
        return Ok(done(lo, v_lo, 0));
    }
    if !(v_lo < target && target < v_hi) {
        return Err(ExperimentError::NotBracketed {
            target,
            low: v_lo,
            high: v_hi,
        });
    }
    for iteration in 1..=MAX_CALIBRATION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let v = visibility_at(param, mid, physics, delays, engine)?;
        if (v - target).abs() <= CALIBRATION_TOLERANCE {
            return Ok(done(mid, v, iteration));
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(ExperimentError::NoConvergence(MAX_CALIBRATION_ITERATIONS))
}
