//! Partial distinguishability through temporal modes.
//!
//! Every photon carries a Gaussian wavepacket. The pairwise overlaps form a
//! Gram matrix `G`, which is factored as `G = L·L†` with `L` lower
//! triangular. Row `i` of `L` expands photon `i` over orthonormal temporal
//! modes `0..=i`, so photons that share a row-space interfere and photons in
//! orthogonal temporal modes do not.

use std::collections::BTreeMap;

use num_complex::Complex;
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistinguishabilityError {
    #[error("overlap matrix is not positive semidefinite (pivot {pivot:e} at photon {index})")]
    NotPsd { index: usize, pivot: f64 },
    #[error("wavepacket width must be positive and finite, got {0}")]
    InvalidWidth(f64),
    #[error("intrinsic overlap between `{0}` and `{1}` must lie in [0, 1], got {2}")]
    InvalidOverlap(String, String, f64),
}

/// Temporal envelope of one photon.
///
/// `width_sigma` is the standard deviation of the arrival-time distribution
/// `|ψ(t)|²`; the amplitude envelope is `exp(−(t − t₀)²/(4σ²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonWavepacket {
    pub center_time: f64,
    pub width_sigma: f64,
    pub family: String,
}

impl PhotonWavepacket {
    pub fn new(center_time: f64, width_sigma: f64, family: &str) -> Result<Self, DistinguishabilityError> {
        if !(width_sigma > 0.0 && width_sigma.is_finite()) {
            return Err(DistinguishabilityError::InvalidWidth(width_sigma));
        }
        Ok(PhotonWavepacket {
            center_time,
            width_sigma,
            family: family.to_string(),
        })
    }

    pub fn delayed(&self, delay: f64) -> Self {
        PhotonWavepacket {
            center_time: self.center_time + delay,
            ..self.clone()
        }
    }
}

/// Intrinsic (zero-delay, spectral) overlap between photon families.
/// Photons of the same family overlap perfectly; unlisted pairs default to 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FamilyOverlaps {
    table: BTreeMap<(String, String), f64>,
}

impl FamilyOverlaps {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn set(&mut self, a: &str, b: &str, value: f64) -> Result<(), DistinguishabilityError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(DistinguishabilityError::InvalidOverlap(a.into(), b.into(), value));
        }
        if a != b {
            self.table.insert(Self::key(a, b), value);
        }
        Ok(())
    }

    pub fn with(mut self, a: &str, b: &str, value: f64) -> Result<Self, DistinguishabilityError> {
        self.set(a, b, value)?;
        Ok(self)
    }

    pub fn get(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        self.table.get(&Self::key(a, b)).copied().unwrap_or(1.0)
    }

    /// Explicitly listed pairs in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.table.iter().map(|((a, b), v)| (a.as_str(), b.as_str(), *v))
    }
}

/// ⟨ψ₁|ψ₂⟩ = κ·√(2σ₁σ₂/(σ₁²+σ₂²))·exp(−Δt²/(4(σ₁²+σ₂²))).
pub fn gaussian_overlap<T: Real>(
    w1: &PhotonWavepacket,
    w2: &PhotonWavepacket,
    families: &FamilyOverlaps,
) -> Complex<T> {
    let kappa = families.get(&w1.family, &w2.family);
    let (s1, s2) = (w1.width_sigma, w2.width_sigma);
    let sum_sq = s1 * s1 + s2 * s2;
    let dt = w2.center_time - w1.center_time;
    let value = kappa * (2.0 * s1 * s2 / sum_sq).sqrt() * (-dt * dt / (4.0 * sum_sq)).exp();
    Complex::new(T::lit(value), T::zero())
}

/// Hermitian Gram matrix of photon overlaps, `entries[i][j] = ⟨ψᵢ|ψⱼ⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix<T: Real> {
    entries: Vec<Vec<Complex<T>>>,
}

impl<T: Real> OverlapMatrix<T> {
    pub fn from_wavepackets(photons: &[PhotonWavepacket], families: &FamilyOverlaps) -> Self {
        let entries = photons
            .iter()
            .map(|a| photons.iter().map(|b| gaussian_overlap(a, b, families)).collect())
            .collect();
        OverlapMatrix { entries }
    }

    /// Takes a matrix as given; Hermiticity is the caller's responsibility.
    pub fn from_entries(entries: Vec<Vec<Complex<T>>>) -> Self {
        OverlapMatrix { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.entries[i][j]
    }

    pub fn entries(&self) -> &[Vec<Complex<T>>] {
        &self.entries
    }
}

/// Lower-triangular factor `L` with `L·L† = G`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalBasis<T: Real> {
    factor: Vec<Vec<Complex<T>>>,
}

const NEGATIVE_PIVOT: f64 = -1e-9;
const ZERO_PIVOT: f64 = 1e-12;
const RESIDUAL_COLUMN: f64 = 1e-6;

/// Semidefinite Cholesky factorization. Dependent photons get a zero pivot
/// and reuse earlier temporal modes.
pub fn build_temporal_basis<T: Real>(
    g: &OverlapMatrix<T>,
) -> Result<TemporalBasis<T>, DistinguishabilityError> {
    let n = g.len();
    let zero = Complex::new(T::zero(), T::zero());
    let mut l = vec![vec![zero; n]; n];
    for j in 0..n {
        let partial: T = l[j][..j].iter().map(|x| x.norm_sqr()).sum();
        let pivot = g.get(j, j).re - partial;
        let pivot_f = pivot.as_f64();
        if pivot_f < NEGATIVE_PIVOT {
            return Err(DistinguishabilityError::NotPsd { index: j, pivot: pivot_f });
        }
        let diag = if pivot_f <= ZERO_PIVOT { T::zero() } else { pivot.sqrt() };
        l[j][j] = Complex::new(diag, T::zero());
        for i in (j + 1)..n {
            let mut num = g.get(i, j);
            for (lik, ljk) in l[i][..j].iter().zip(&l[j][..j]) {
                num = num - *lik * ljk.conj();
            }
            if diag == T::zero() {
                if num.norm().as_f64() > RESIDUAL_COLUMN {
                    return Err(DistinguishabilityError::NotPsd { index: j, pivot: pivot_f });
                }
            } else {
                l[i][j] = num / diag;
            }
        }
    }
    Ok(TemporalBasis { factor: l })
}

impl<T: Real> TemporalBasis<T> {
    pub fn len(&self) -> usize {
        self.factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.is_empty()
    }

    pub fn factor(&self) -> &[Vec<Complex<T>>] {
        &self.factor
    }

    /// Amplitudes of photon `i` over temporal modes, chosen so that
    /// ⟨ψᵢ|ψⱼ⟩ = G[i][j].
    pub fn photon_amplitudes(&self, i: usize) -> Vec<(u16, Complex<T>)> {
        self.factor[i]
            .iter()
            .enumerate()
            .filter(|(_, x)| x.norm().as_f64() > 0.0)
            .map(|(k, x)| (k as u16, x.conj()))
            .collect()
    }

    /// `L·L†`.
    pub fn reconstruct(&self) -> OverlapMatrix<T> {
        let n = self.factor.len();
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        self.factor[i]
                            .iter()
                            .zip(&self.factor[j])
                            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b.conj())
                    })
                    .collect()
            })
            .collect();
        OverlapMatrix { entries }
    }
}
