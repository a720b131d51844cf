//! Sparse multimode bosonic Fock states.
//!
//! A [`StateVector`] maps canonical [`OccupationPattern`]s to complex
//! amplitudes. Every mode is a spatial port, a polarization (`H` carries
//! logical 0, `V` logical 1) and an index into an orthonormal temporal-mode
//! basis. Operations never mutate their inputs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("state has zero norm")]
    ZeroNorm,
}

/// Name of a spatial mode (a fiber or free-space path).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Port(Arc<str>);

impl Port {
    pub fn new(name: &str) -> Self {
        Port(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Port({})", self.0)
    }
}

impl From<&str> for Port {
    fn from(s: &str) -> Self {
        Port::new(s)
    }
}

/// Computational polarization basis: horizontal is |0⟩, vertical is |1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Polarization::H),
            1 => Some(Polarization::V),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub port: Port,
    pub polarization: Polarization,
    pub temporal: u16,
}

impl ModeLabel {
    pub fn new(port: impl Into<Port>, polarization: Polarization, temporal: u16) -> Self {
        ModeLabel {
            port: port.into(),
            polarization,
            temporal,
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pol = match self.polarization {
            Polarization::H => 'H',
            Polarization::V => 'V',
        };
        write!(f, "{}.{}.{}", self.port, pol, self.temporal)
    }
}

/// Canonically sorted list of occupied modes; zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationPattern(Vec<(ModeLabel, u32)>);

impl OccupationPattern {
    pub fn vacuum() -> Self {
        OccupationPattern(Vec::new())
    }

    /// Builds a pattern from arbitrary (mode, count) pairs, merging repeats.
    pub fn from_counts<I>(counts: I) -> Self
    where
        I: IntoIterator<Item = (ModeLabel, u32)>,
    {
        let mut merged: BTreeMap<ModeLabel, u32> = BTreeMap::new();
        for (mode, n) in counts {
            *merged.entry(mode).or_insert(0) += n;
        }
        OccupationPattern(merged.into_iter().filter(|(_, n)| *n > 0).collect())
    }

    /// Pattern from a list of modes, one photon per entry.
    pub fn from_modes<'a, I>(modes: I) -> Self
    where
        I: IntoIterator<Item = &'a ModeLabel>,
    {
        Self::from_counts(modes.into_iter().map(|m| (m.clone(), 1)))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(ModeLabel, u32)> {
        self.0.iter()
    }

    pub fn is_vacuum(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_photons(&self) -> u32 {
        self.0.iter().map(|(_, n)| n).sum()
    }

    pub fn count(&self, mode: &ModeLabel) -> u32 {
        match self.0.binary_search_by(|(m, _)| m.cmp(mode)) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    pub fn photons_on(&self, port: &Port) -> u32 {
        self.0
            .iter()
            .filter(|(m, _)| &m.port == port)
            .map(|(_, n)| n)
            .sum()
    }

    /// Adds one photon to `mode`, returning the new pattern and the prior count.
    pub fn with_added(&self, mode: &ModeLabel) -> (Self, u32) {
        let mut entries = self.0.clone();
        match entries.binary_search_by(|(m, _)| m.cmp(mode)) {
            Ok(i) => {
                let prior = entries[i].1;
                entries[i].1 += 1;
                (OccupationPattern(entries), prior)
            }
            Err(i) => {
                entries.insert(i, (mode.clone(), 1));
                (OccupationPattern(entries), 0)
            }
        }
    }

    /// Splits into (entries on `ports`, everything else).
    pub fn partition_ports(&self, ports: &[Port]) -> (Self, Self) {
        let (inside, outside): (Vec<_>, Vec<_>) =
            self.0.iter().cloned().partition(|(m, _)| ports.contains(&m.port));
        (OccupationPattern(inside), OccupationPattern(outside))
    }

    /// Product of the factorials of all counts.
    pub fn factorial_product(&self) -> f64 {
        self.0
            .iter()
            .map(|(_, n)| (1..=*n).map(f64::from).product::<f64>())
            .product()
    }

    /// Merges two patterns by adding counts mode by mode.
    pub fn merged(&self, other: &Self) -> Self {
        Self::from_counts(self.0.iter().chain(other.0.iter()).cloned())
    }
}

impl fmt::Display for OccupationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        for (i, (mode, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}@{mode}")?;
        }
        f.write_str("⟩")
    }
}

/// Sparse pure state over occupation patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    terms: BTreeMap<OccupationPattern, Complex<T>>,
    prune_epsilon: f64,
}

impl<T: Real> Default for StateVector<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> StateVector<T> {
    /// The zero vector (no terms at all).
    pub fn zero() -> Self {
        StateVector {
            terms: BTreeMap::new(),
            prune_epsilon: T::PRUNE_EPSILON,
        }
    }

    pub fn vacuum() -> Self {
        Self::from_terms([(OccupationPattern::vacuum(), Complex::new(T::one(), T::zero()))])
    }

    /// One photon in `mode`.
    pub fn single(mode: ModeLabel) -> Self {
        Self::from_terms([(
            OccupationPattern::from_counts([(mode, 1)]),
            Complex::new(T::one(), T::zero()),
        )])
    }

    /// Sums amplitudes of repeated patterns and prunes the result.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (OccupationPattern, Complex<T>)>,
    {
        Self::from_terms_with_epsilon(terms, T::PRUNE_EPSILON)
    }

    pub fn from_terms_with_epsilon<I>(terms: I, prune_epsilon: f64) -> Self
    where
        I: IntoIterator<Item = (OccupationPattern, Complex<T>)>,
    {
        let mut map: BTreeMap<OccupationPattern, Complex<T>> = BTreeMap::new();
        for (pattern, amp) in terms {
            assert!(
                amp.re.is_finite() && amp.im.is_finite(),
                "non-finite amplitude for {pattern}"
            );
            let slot = map.entry(pattern).or_insert_with(|| Complex::new(T::zero(), T::zero()));
            *slot = *slot + amp;
        }
        let eps = T::lit(prune_epsilon);
        map.retain(|_, a| a.norm() >= eps);
        StateVector {
            terms: map,
            prune_epsilon,
        }
    }

    pub fn with_prune_epsilon(&self, prune_epsilon: f64) -> Self {
        Self::from_terms_with_epsilon(self.terms.clone(), prune_epsilon)
    }

    pub fn prune_epsilon(&self) -> f64 {
        self.prune_epsilon
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OccupationPattern, &Complex<T>)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, pattern: &OccupationPattern) -> Complex<T> {
        self.terms
            .get(pattern)
            .copied()
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn norm_sqr(&self) -> T {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        self.map_terms(|p, a| Some((p.clone(), a * factor)))
    }

    pub fn added(&self, other: &Self) -> Self {
        Self::from_terms_with_epsilon(
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(p, a)| (p.clone(), *a)),
            self.prune_epsilon,
        )
    }

    /// Rebuilds the state from a per-term mapping, keeping the prune setting.
    pub fn map_terms<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&OccupationPattern, Complex<T>) -> Option<(OccupationPattern, Complex<T>)>,
    {
        Self::from_terms_with_epsilon(
            self.terms.iter().filter_map(|(p, a)| f(p, *a)),
            self.prune_epsilon,
        )
    }

    pub fn total_photon_numbers(&self) -> Vec<u32> {
        let mut ns: Vec<u32> = self.terms.keys().map(|p| p.total_photons()).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    /// Debug text: one `(re,im) |n@mode, ...⟩` line per term in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (pattern, amp) in &self.terms {
            let re = clean_zero(amp.re.as_f64());
            let im = clean_zero(amp.im.as_f64());
            out.push_str(&format!("({re:.12},{im:.12}) {pattern}\n"));
        }
        out
    }
}

fn clean_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Applies the creation operator of `mode`.
pub fn create_photon<T: Real>(state: &StateVector<T>, mode: &ModeLabel) -> StateVector<T> {
    state.map_terms(|pattern, amp| {
        let (next, prior) = pattern.with_added(mode);
        let factor = T::lit(f64::from(prior + 1).sqrt());
        Some((next, amp * factor))
    })
}

/// ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner_product<T: Real>(a: &StateVector<T>, b: &StateVector<T>) -> Complex<T> {
    let (small, large, conj_small) = if a.len() <= b.len() {
        (a, b, true)
    } else {
        (b, a, false)
    };
    small
        .terms
        .iter()
        .filter_map(|(p, x)| large.terms.get(p).map(|y| (x, y)))
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            if conj_small {
                acc + x.conj() * y
            } else {
                acc + y.conj() * x
            }
        })
}

/// Returns the unit-norm state together with the original norm.
pub fn normalize<T: Real>(state: &StateVector<T>) -> Result<(StateVector<T>, T), FockError> {
    let norm = state.norm_sqr().sqrt();
    if norm.is_nan() || norm <= T::lit(T::ZERO_FLOOR) {
        return Err(FockError::ZeroNorm);
    }
    let inv = Complex::new(norm.recip(), T::zero());
    Ok((state.scaled(inv), norm))
}

/// Product of independent states. Patterns sharing a mode merge by adding counts.
pub fn tensor<T: Real>(a: &StateVector<T>, b: &StateVector<T>) -> StateVector<T> {
    let mut terms = Vec::with_capacity(a.len() * b.len());
    for (pa, xa) in &a.terms {
        for (pb, xb) in &b.terms {
            terms.push((pa.merged(pb), xa * xb));
        }
    }
    StateVector::from_terms_with_epsilon(terms, a.prune_epsilon.min(b.prune_epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn m(port: &str, pol: Polarization) -> ModeLabel {
        ModeLabel::new(port, pol, 0)
    }

    fn c(re: f64, im: f64) -> C {
        Complex::new(re, im)
    }

    #[test]
    fn create_on_vacuum_and_bosonic_factor() {
        let a = m("a", Polarization::H);
        let one = create_photon(&StateVector::<f64>::vacuum(), &a);
        assert_eq!(one, StateVector::single(a.clone()));
        let two = create_photon(&one, &a);
        let expected = OccupationPattern::from_counts([(a.clone(), 2)]);
        assert!((two.amplitude(&expected) - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn create_on_superposition() {
        let a = m("a", Polarization::H);
        let b = m("b", Polarization::H);
        let s = 1.0 / 2f64.sqrt();
        let psi = StateVector::single(a.clone())
            .added(&StateVector::single(b.clone()))
            .scaled(c(s, 0.0));
        let out = create_photon(&psi, &a);
        let two_a = OccupationPattern::from_counts([(a.clone(), 2)]);
        let ab = OccupationPattern::from_counts([(a.clone(), 1), (b.clone(), 1)]);
        assert!((out.amplitude(&two_a).re - 2f64.sqrt() * s).abs() < 1e-15);
        assert!((out.amplitude(&ab).re - s).abs() < 1e-15);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn inner_products() {
        let x = StateVector::<f64>::single(m("x", Polarization::H));
        let y = StateVector::<f64>::single(m("y", Polarization::H));
        let s = c(1.0 / 2f64.sqrt(), 0.0);
        let plus = x.added(&y).scaled(s);
        let minus = x.added(&y.scaled(c(-1.0, 0.0))).scaled(s);
        assert!((inner_product(&plus, &plus) - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(inner_product(&x, &y), c(0.0, 0.0));
        assert!(inner_product(&plus, &minus).norm() < 1e-15);
        let z = x.scaled(c(0.0, 1.0));
        assert_eq!(inner_product(&z, &x), c(0.0, -1.0));
        assert_eq!(inner_product(&x, &z), c(0.0, 1.0));
    }

    #[test]
    fn normalize_cases() {
        let x = StateVector::<f64>::single(m("x", Polarization::V));
        let (n, norm) = normalize(&x.scaled(c(2.0, 0.0))).unwrap();
        assert_eq!(n, x);
        assert_eq!(norm, 2.0);
        let (n, norm) = normalize(&x).unwrap();
        assert_eq!((n, norm), (x, 1.0));
        assert_eq!(normalize(&StateVector::<f64>::zero()), Err(FockError::ZeroNorm));
    }

    #[test]
    fn tensor_cases() {
        let a = StateVector::<f64>::single(m("a", Polarization::H));
        let b = StateVector::<f64>::single(m("b", Polarization::H));
        let ab = tensor(&a, &b);
        let expected = OccupationPattern::from_counts([
            (m("a", Polarization::H), 1),
            (m("b", Polarization::H), 1),
        ]);
        assert_eq!(ab.amplitude(&expected), c(1.0, 0.0));
        assert_eq!(tensor(&a, &StateVector::vacuum()), a);

        // (α|0⟩+β|1⟩) ⊗ (γ|0⟩+δ|1⟩) carries α·γ, α·δ, β·γ, β·δ.
        let q = |port: &str, x: f64, y: f64| {
            StateVector::<f64>::single(m(port, Polarization::H))
                .scaled(c(x, 0.0))
                .added(&StateVector::single(m(port, Polarization::V)).scaled(c(y, 0.0)))
        };
        let prod = tensor(&q("1", 0.6, 0.8), &q("2", 0.28, 0.96));
        assert_eq!(prod.len(), 4);
        let key = |p1, p2| {
            OccupationPattern::from_counts([(m("1", p1), 1), (m("2", p2), 1)])
        };
        use Polarization::{H, V};
        assert!((prod.amplitude(&key(H, H)).re - 0.6 * 0.28).abs() < 1e-15);
        assert!((prod.amplitude(&key(H, V)).re - 0.6 * 0.96).abs() < 1e-15);
        assert!((prod.amplitude(&key(V, H)).re - 0.8 * 0.28).abs() < 1e-15);
        assert!((prod.amplitude(&key(V, V)).re - 0.8 * 0.96).abs() < 1e-15);
    }

    #[test]
    fn golden_text() {
        let a = m("a", Polarization::H);
        let b = ModeLabel::new("b", Polarization::V, 1);
        let s = StateVector::<f64>::from_terms([
            (OccupationPattern::from_counts([(b.clone(), 1), (a.clone(), 2)]), c(0.5, -0.25)),
            (OccupationPattern::vacuum(), c(-0.0, 0.0)),
            (OccupationPattern::from_counts([(a, 1)]), c(1.0, 0.0)),
        ]);
        assert_eq!(
            s.to_text(),
            "(1.000000000000,0.000000000000) |1@a.H.0⟩\n\
             (0.500000000000,-0.250000000000) |2@a.H.0, 1@b.V.1⟩\n"
        );
    }

    #[test]
    fn pruning_drops_tiny_amplitudes() {
        let s = StateVector::<f64>::from_terms([
            (OccupationPattern::vacuum(), c(1e-15, 0.0)),
            (OccupationPattern::from_counts([(m("a", Polarization::H), 1)]), c(1.0, 0.0)),
        ]);
        assert_eq!(s.len(), 1);
        let kept = StateVector::<f64>::from_terms_with_epsilon(
            [(OccupationPattern::vacuum(), c(1e-15, 0.0))],
            1e-16,
        );
        assert_eq!(kept.len(), 1);
    }

    fn arb_state() -> impl Strategy<Value = StateVector<f64>> {
        let mode = (0usize..3, 0usize..2, 0u16..2).prop_map(|(p, pol, t)| {
            ModeLabel::new(["a", "b", "c"][p], Polarization::from_index(pol).unwrap(), t)
        });
        let pattern = prop::collection::vec((mode, 1u32..3), 0..3)
            .prop_map(OccupationPattern::from_counts);
        prop::collection::vec((pattern, -1.0f64..1.0, -1.0f64..1.0), 1..4).prop_map(|terms| {
            StateVector::from_terms(terms.into_iter().map(|(p, re, im)| (p, Complex::new(re, im))))
        })
    }

    proptest! {
        #[test]
        fn creation_norm_matches_number_operator(psi in arb_state(), pol in 0usize..2) {
            let mode = ModeLabel::new("a", Polarization::from_index(pol).unwrap(), 0);
            let created = create_photon(&psi, &mode);
            let lhs = inner_product(&created, &created).re;
            let rhs: f64 = psi
                .terms()
                .map(|(p, a)| a.norm_sqr() * f64::from(p.count(&mode) + 1))
                .sum();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn tensor_is_associative(a in arb_state(), b in arb_state(), c in arb_state()) {
            let left = tensor(&tensor(&a, &b), &c);
            let right = tensor(&a, &tensor(&b, &c));
            for (p, x) in left.terms() {
                prop_assert!((right.amplitude(p) - x).norm() < 1e-12);
            }
            for (p, x) in right.terms() {
                prop_assert!((left.amplitude(p) - x).norm() < 1e-12);
            }
        }

        #[test]
        fn normalize_is_idempotent(psi in arb_state()) {
            if let Ok((once, _)) = normalize(&psi) {
                let (twice, norm) = normalize(&once).unwrap();
                prop_assert!((norm - 1.0).abs() < 1e-12);
                for (p, x) in once.terms() {
                    prop_assert!((twice.amplitude(p) - x).norm() < 1e-12);
                }
                prop_assert!((once.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn pruning_loses_negligible_mass(psi in arb_state()) {
            // Re-add each term with a pruned-size companion and check the lost mass.
            let noisy = psi.added(&psi.map_terms(|p, _| {
                let (q, _) = p.with_added(&ModeLabel::new("z", Polarization::H, 0));
                Some((q, Complex::new(5e-15, 0.0)))
            }).with_prune_epsilon(0.0));
            let lost = (psi.norm_sqr() - noisy.norm_sqr()).abs();
            prop_assert!(lost <= 1e-10 * psi.norm_sqr().max(1e-300));
        }
    }
}
