//! Least-squares fits for dip envelopes and Malus-law scans.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("fit did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("singular normal equations")]
    Singular,
}

/// y = baseline − depth·exp(−(x−center)²/(2·width²)). A negative depth is a peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub baseline: f64,
    pub depth: f64,
    pub width: f64,
    pub center: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        self.baseline - self.depth * (-0.5 * u * u).exp()
    }

    /// Depth relative to the far-delay baseline.
    pub fn visibility(&self) -> f64 {
        self.depth / self.baseline
    }
}

const MAX_LM_ITERATIONS: usize = 500;
const PARAM_TOLERANCE: f64 = 1e-9;

fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..N {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = ((row + 1)..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn gaussian_sse(xs: &[f64], ys: &[f64], p: &[f64; 4]) -> f64 {
    let fit = GaussianFit {
        baseline: p[0],
        depth: p[1],
        center: p[2],
        width: p[3],
        residual_norm: 0.0,
        iterations: 0,
    };
    xs.iter().zip(ys).map(|(x, y)| (y - fit.eval(*x)).powi(2)).sum()
}

/// Levenberg–Marquardt fit of a Gaussian dip (or peak). Initial guesses:
/// baseline from the two edge points, center at the extremum, width from the
/// half-depth crossing.
pub fn fit_gaussian_dip(xs: &[f64], ys: &[f64]) -> Result<GaussianFit, FitError> {
    let n = xs.len().min(ys.len());
    if n < 5 {
        return Err(FitError::TooFewPoints { needed: 5, got: n });
    }
    let (xs, ys) = (&xs[..n], &ys[..n]);
    let baseline = 0.5 * (ys[0] + ys[n - 1]);
    let extremum = (0..n)
        .max_by(|&i, &j| (ys[i] - baseline).abs().total_cmp(&(ys[j] - baseline).abs()))
        .expect("nonempty");
    let depth = baseline - ys[extremum];
    let center = xs[extremum];
    let half = (0..n)
        .filter(|&i| (baseline - ys[i]).abs() >= 0.5 * depth.abs())
        .map(|i| (xs[i] - center).abs())
        .fold(0.0, f64::max);
    let span = (xs[n - 1] - xs[0]).abs();
    let width = if half > 0.0 { half / (2.0 * 2f64.ln()).sqrt() } else { span / 10.0 }.max(span / 1e3);

    let finish = |p: [f64; 4], iterations: usize| GaussianFit {
        baseline: p[0],
        depth: p[1],
        center: p[2],
        width: p[3],
        residual_norm: gaussian_sse(xs, ys, &p).sqrt(),
        iterations,
    };
    if depth.abs() <= 1e-12 * baseline.abs().max(f64::MIN_POSITIVE) {
        let mean = ys.iter().sum::<f64>() / n as f64;
        return Ok(finish([mean, 0.0, center, width], 0));
    }

    let mut p = [baseline, depth, center, width];
    let mut sse = gaussian_sse(xs, ys, &p);
    let mut lambda = 1e-3;
    for iter in 1..=MAX_LM_ITERATIONS {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (x, y) in xs.iter().zip(ys) {
            let u = (x - p[2]) / p[3];
            let e = (-0.5 * u * u).exp();
            let f = p[0] - p[1] * e;
            let grad = [1.0, -e, -p[1] * e * u / p[3], -p[1] * e * u * u / p[3]];
            let r = y - f;
            for i in 0..4 {
                jtr[i] += grad[i] * r;
                for j in 0..4 {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        loop {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-300);
            }
            let step = solve(a, jtr).ok_or(FitError::Singular)?;
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], (p[3] + step[3]).abs()];
            let trial_sse = gaussian_sse(xs, ys, &trial);
            if trial_sse <= sse {
                // Offsets are measured against the baseline, positions against the width.
                let scale = [p[0].abs(), p[0].abs(), p[3], p[3]];
                let converged = (0..4).all(|i| step[i].abs() <= PARAM_TOLERANCE * scale[i]);
                p = trial;
                sse = trial_sse;
                lambda = (lambda * 0.3).max(1e-15);
                if converged || sse == 0.0 {
                    return Ok(finish(p, iter));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                // No downhill step exists: already at the minimum.
                return Ok(finish(p, iter));
            }
        }
    }
    Err(FitError::NoConvergence(MAX_LM_ITERATIONS))
}

/// y = amplitude·cos²(θ − peak) + offset, θ in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosSquaredFit {
    pub amplitude: f64,
    pub offset: f64,
    /// Angle of maximum transmission in [0°, 180°).
    pub peak_deg: f64,
    pub max_residual: f64,
}

impl CosSquaredFit {
    pub fn eval(&self, theta_deg: f64) -> f64 {
        self.amplitude * (theta_deg - self.peak_deg).to_radians().cos().powi(2) + self.offset
    }
}

/// Linear least squares in the basis {1, cos 2θ, sin 2θ}.
pub fn fit_cos_squared(thetas_deg: &[f64], ys: &[f64]) -> Result<CosSquaredFit, FitError> {
    let n = thetas_deg.len().min(ys.len());
    if n < 3 {
        return Err(FitError::TooFewPoints { needed: 3, got: n });
    }
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (t, y) in thetas_deg.iter().zip(ys) {
        let t2 = 2.0 * t.to_radians();
        let row = [1.0, t2.cos(), t2.sin()];
        for i in 0..3 {
            aty[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let [c0, c1, c2] = solve(ata, aty).ok_or(FitError::Singular)?;
    let amplitude = 2.0 * c1.hypot(c2);
    let peak_deg = (c2.atan2(c1).to_degrees() / 2.0).rem_euclid(180.0);
    let mut fit = CosSquaredFit {
        amplitude,
        offset: c0 - amplitude / 2.0,
        peak_deg,
        max_residual: 0.0,
    };
    fit.max_residual = thetas_deg
        .iter()
        .zip(ys)
        .map(|(t, y)| (y - fit.eval(*t)).abs())
        .fold(0.0, f64::max);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn recovers_exact_dip() {
        let truth = GaussianFit {
            baseline: 0.125,
            depth: 0.12,
            width: 1.4,
            center: 0.3,
            residual_norm: 0.0,
            iterations: 0,
        };
        let xs = grid(-4.0, 4.0, 41);
        let ys: Vec<f64> = xs.iter().map(|x| truth.eval(*x)).collect();
        let fit = fit_gaussian_dip(&xs, &ys).unwrap();
        assert!((fit.visibility() - 0.96).abs() < 1e-8, "{fit:?}");
        assert!((fit.center - 0.3).abs() < 1e-7);
        assert!((fit.width - 1.4).abs() < 1e-7);
    }

    #[test]
    fn recovers_peak() {
        let xs = grid(-4.0, 4.0, 41);
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 0.5 * (-x * x / 4.0).exp()).collect();
        let fit = fit_gaussian_dip(&xs, &ys).unwrap();
        assert!((fit.depth + 0.5).abs() < 1e-8);
        assert!((fit.width - 2f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn cos_squared_fit_is_exact_on_model_data() {
        let ts: Vec<f64> = (0..12).map(|i| 15.0 * i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 0.06 * (t - 75.0_f64).to_radians().cos().powi(2) + 0.001).collect();
        let fit = fit_cos_squared(&ts, &ys).unwrap();
        assert!((fit.peak_deg - 75.0).abs() < 1e-10);
        assert!((fit.amplitude - 0.06).abs() < 1e-14);
        assert!(fit.max_residual < 1e-15);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(fit_gaussian_dip(&[0.0], &[1.0]), Err(FitError::TooFewPoints { .. })));
        assert!(matches!(fit_cos_squared(&[0.0], &[1.0]), Err(FitError::TooFewPoints { .. })));
    }

    proptest! {
        #[test]
        fn dip_visibility_recovered(v in 0.05f64..1.0, w in 0.8f64..2.0, c in -0.5f64..0.5) {
            let xs = grid(-4.0, 4.0, 41);
            let ys: Vec<f64> = xs.iter().map(|x| 0.1 * (1.0 - v * (-(x - c).powi(2) / (2.0 * w * w)).exp())).collect();
            let fit = fit_gaussian_dip(&xs, &ys).unwrap();
            prop_assert!((fit.visibility() - v).abs() < 1e-6);
        }

        #[test]
        fn malus_peak_recovered(peak in 0.0f64..180.0, a in 0.01f64..1.0, b in 0.0f64..0.5) {
            let ts: Vec<f64> = (0..12).map(|i| 15.0 * i as f64).collect();
            let ys: Vec<f64> = ts.iter().map(|t| a * (t - peak).to_radians().cos().powi(2) + b).collect();
            let fit = fit_cos_squared(&ts, &ys).unwrap();
            let d = (fit.peak_deg - peak).rem_euclid(180.0);
            prop_assert!(d.min(180.0 - d) < 1e-8);
        }
    }
}
