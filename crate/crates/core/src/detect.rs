//! Detectors, Born-rule outcome distributions and post-selection.
//!
//! Detectors are buckets: they see every polarization and temporal mode of
//! their port. Measuring a port therefore collapses all of its modes, and the
//! state left on the other ports is in general a classical mixture of pure
//! states, kept here as an [`Ensemble`].

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use crate::fock::{inner_product, normalize, OccupationPattern, Port, StateVector};
use crate::real::Real;

/// Patterns below this probability are treated as impossible.
pub const IMPOSSIBLE_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("detection pattern {0} has vanishing probability")]
    ImpossiblePattern(String),
    #[error("detector `{0}` efficiency {1} outside [0, 1]")]
    InvalidEfficiency(String, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorMode {
    Threshold,
    NumberResolving,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub name: String,
    pub port: Port,
    pub mode: DetectorMode,
    pub efficiency: f64,
}

impl DetectorSpec {
    pub fn threshold(name: &str, port: impl Into<Port>) -> Self {
        DetectorSpec {
            name: name.to_string(),
            port: port.into(),
            mode: DetectorMode::Threshold,
            efficiency: 1.0,
        }
    }

    pub fn number_resolving(name: &str, port: impl Into<Port>) -> Self {
        DetectorSpec {
            mode: DetectorMode::NumberResolving,
            ..Self::threshold(name, port)
        }
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Result<Self, DetectError> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(DetectError::InvalidEfficiency(self.name, efficiency));
        }
        self.efficiency = efficiency;
        Ok(self)
    }

    /// Outcome distribution given `n` photons arrive, with binomial thinning.
    fn outcomes(&self, n: u32) -> Vec<(Outcome, f64)> {
        let eta = self.efficiency;
        let binom = |k: u32| {
            let choose: f64 = (0..k).map(|i| f64::from(n - i) / f64::from(i + 1)).product();
            choose * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32)
        };
        match self.mode {
            DetectorMode::NumberResolving => (0..=n)
                .map(|k| (Outcome::Count(k), binom(k)))
                .filter(|(_, p)| *p > 0.0)
                .collect(),
            DetectorMode::Threshold => {
                let none = binom(0);
                let mut out = Vec::with_capacity(2);
                if none > 0.0 {
                    out.push((Outcome::Fired(false), none));
                }
                if none < 1.0 {
                    out.push((Outcome::Fired(true), 1.0 - none));
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Fired(bool),
    Count(u32),
}

impl Outcome {
    pub fn clicked(self) -> bool {
        match self {
            Outcome::Fired(f) => f,
            Outcome::Count(n) => n > 0,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Fired(true) => f.write_str("1"),
            Outcome::Fired(false) => f.write_str("0"),
            Outcome::Count(n) => write!(f, "{n}"),
        }
    }
}

/// Outcome of every declared detector, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DetectionPattern(Vec<(String, Outcome)>);

impl DetectionPattern {
    pub fn new(entries: Vec<(String, Outcome)>) -> Self {
        DetectionPattern(entries)
    }

    pub fn entries(&self) -> &[(String, Outcome)] {
        &self.0
    }

    pub fn outcome(&self, detector: &str) -> Option<Outcome> {
        self.0.iter().find(|(n, _)| n == detector).map(|(_, o)| *o)
    }

    pub fn clicked(&self, detector: &str) -> bool {
        self.outcome(detector).is_some_and(Outcome::clicked)
    }

    pub fn extended(&self, name: &str, outcome: Outcome) -> Self {
        let mut entries = self.0.clone();
        entries.push((name.to_string(), outcome));
        DetectionPattern(entries)
    }

    /// Same outcomes listed in the order of `names`.
    pub fn reordered(&self, names: &[String]) -> Self {
        DetectionPattern(
            names
                .iter()
                .filter_map(|n| self.outcome(n).map(|o| (n.clone(), o)))
                .collect(),
        )
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, o)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{name}={o}")?;
        }
        Ok(())
    }
}

/// A detection pattern or the reserved pseudo-pattern for absorbed amplitude.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternKey {
    Detected(DetectionPattern),
    Lost,
}

impl fmt::Display for PatternKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternKey::Detected(p) => p.fmt(f),
            PatternKey::Lost => f.write_str("lost"),
        }
    }
}

/// Required detectors that must all click within one pulse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoincidenceSpec {
    pub required: Vec<String>,
}

impl CoincidenceSpec {
    pub fn new(required: &[&str]) -> Self {
        CoincidenceSpec {
            required: required.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn passes(&self, pattern: &DetectionPattern) -> bool {
        self.required.iter().all(|d| pattern.clicked(d))
    }
}

/// Classical mixture of normalized pure states with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T: Real> {
    components: Vec<(T, StateVector<T>)>,
}

impl<T: Real> Default for Ensemble<T> {
    fn default() -> Self {
        Ensemble {
            components: Vec::new(),
        }
    }
}

impl<T: Real> Ensemble<T> {
    pub fn pure(state: StateVector<T>) -> Self {
        Ensemble {
            components: vec![(T::one(), state)],
        }
    }

    /// Builds an ensemble from unnormalized weights over normalized states.
    /// States equal up to a global phase merge.
    pub fn from_weighted(components: Vec<(T, StateVector<T>)>) -> Self {
        let total: T = components.iter().map(|(w, _)| *w).sum();
        let same = T::lit(1.0 - T::ZERO_FLOOR.max(1e-12));
        let mut merged: Vec<(T, StateVector<T>)> = Vec::new();
        for (w, s) in components {
            let found = merged.iter_mut().find(|(_, x)| {
                x.len() == s.len() && x.terms().zip(s.terms()).all(|(a, b)| a.0 == b.0) && inner_product(x, &s).norm_sqr() >= same
            });
            if let Some(slot) = found {
                slot.0 = slot.0 + w;
            } else {
                merged.push((w, s));
            }
        }
        if total > T::zero() {
            for c in &mut merged {
                c.0 = c.0 / total;
            }
        }
        Ensemble { components: merged }
    }

    pub fn components(&self) -> &[(T, StateVector<T>)] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn as_pure(&self) -> Option<&StateVector<T>> {
        match self.components.as_slice() {
            [(_, s)] => Some(s),
            _ => None,
        }
    }

    /// ⟨φ|ρ|φ⟩ for a normalized target `φ`.
    pub fn fidelity(&self, target: &StateVector<T>) -> T {
        self.components
            .iter()
            .map(|(w, s)| *w * inner_product(target, s).norm_sqr())
            .sum()
    }

    /// Tr ρ².
    pub fn purity(&self) -> T {
        let mut acc = T::zero();
        for (wi, si) in &self.components {
            for (wj, sj) in &self.components {
                acc = acc + *wi * *wj * inner_product(si, sj).norm_sqr();
            }
        }
        acc
    }

    pub fn to_text(&self) -> String {
        match self.components.as_slice() {
            [] => String::new(),
            [(_, s)] => one_line(s),
            many => many
                .iter()
                .map(|(w, s)| format!("{:.6}*[{}]", w.as_f64(), one_line(s)))
                .collect::<Vec<_>>()
                .join(" + "),
        }
    }
}

fn one_line(s: &StateVector<impl Real>) -> String {
    let text = s.to_text();
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() == 1 && lines[0].ends_with("|⟩") {
        "vacuum".to_string()
    } else {
        lines.join(" + ")
    }
}

/// One fine-grained measurement branch: the detected ports were found in a
/// definite occupation, leaving a pure residual.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBranch<T: Real> {
    pub pattern: DetectionPattern,
    pub probability: T,
    pub residual: StateVector<T>,
}

/// Measures `detectors` on a (possibly subnormalized) state, returning pure
/// branches. Probabilities are |amplitude|², so the branch total is ‖ψ‖².
pub fn measure_branches<T: Real>(
    state: &StateVector<T>,
    detectors: &[DetectorSpec],
) -> Vec<MeasurementBranch<T>> {
    let ports: Vec<Port> = detectors.iter().map(|d| d.port.clone()).collect();
    let mut groups: BTreeMap<OccupationPattern, Vec<(OccupationPattern, Complex<T>)>> = BTreeMap::new();
    for (pattern, amp) in state.terms() {
        let (seen, rest) = pattern.partition_ports(&ports);
        groups.entry(seen).or_default().push((rest, *amp));
    }
    let mut out = Vec::new();
    for (seen, rest) in groups {
        let residual = StateVector::from_terms_with_epsilon(rest, state.prune_epsilon());
        let Ok((residual, norm)) = normalize(&residual) else {
            continue;
        };
        let weight = norm * norm;
        let mut partial: Vec<(DetectionPattern, f64)> = vec![(DetectionPattern::default(), 1.0)];
        for d in detectors {
            let n = seen.photons_on(&d.port);
            let options = d.outcomes(n);
            partial = partial
                .iter()
                .flat_map(|(p, w)| options.iter().map(move |(o, q)| (p.extended(&d.name, *o), w * q)))
                .collect();
        }
        for (pattern, q) in partial {
            out.push(MeasurementBranch {
                pattern,
                probability: weight * T::lit(q),
                residual: residual.clone(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredOutcome<T: Real> {
    pub pattern: PatternKey,
    pub probability: T,
    pub residual: Ensemble<T>,
}

/// Born-rule distribution over detection patterns. Missing norm (from
/// analyzer absorption) is reported under [`PatternKey::Lost`].
/// Pure states with their weights, before merging into an [`Ensemble`].
pub type WeightedStates<T> = Vec<(T, StateVector<T>)>;

pub fn outcome_distribution<T: Real>(
    state: &StateVector<T>,
    detectors: &[DetectorSpec],
) -> Vec<MeasuredOutcome<T>> {
    let mut merged: BTreeMap<DetectionPattern, (T, WeightedStates<T>)> = BTreeMap::new();
    for b in measure_branches(state, detectors) {
        let slot = merged.entry(b.pattern).or_insert_with(|| (T::zero(), Vec::new()));
        slot.0 = slot.0 + b.probability;
        slot.1.push((b.probability, b.residual));
    }
    let mut out: Vec<MeasuredOutcome<T>> = merged
        .into_iter()
        .map(|(pattern, (probability, comps))| MeasuredOutcome {
            pattern: PatternKey::Detected(pattern),
            probability,
            residual: Ensemble::from_weighted(comps),
        })
        .collect();
    let lost = T::one() - state.norm_sqr();
    if lost.as_f64() > 1e-12 {
        out.push(MeasuredOutcome {
            pattern: PatternKey::Lost,
            probability: lost,
            residual: Ensemble::default(),
        });
    }
    out
}

/// Conditional residual and probability of one detection pattern.
pub fn postselect<T: Real>(
    state: &StateVector<T>,
    detectors: &[DetectorSpec],
    pattern: &DetectionPattern,
) -> Result<(Ensemble<T>, T), DetectError> {
    let (comps, prob) = measure_branches(state, detectors)
        .into_iter()
        .filter(|b| &b.pattern == pattern)
        .fold((Vec::new(), T::zero()), |(mut comps, p), b| {
            let p = p + b.probability;
            comps.push((b.probability, b.residual));
            (comps, p)
        });
    if prob.as_f64() < IMPOSSIBLE_FLOOR {
        return Err(DetectError::ImpossiblePattern(pattern.to_string()));
    }
    Ok((Ensemble::from_weighted(comps), prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::{analyzer_project, ProjectiveFilter};
    use crate::fock::{ModeLabel, Polarization};
    use Polarization::{H, V};

    fn single(port: &str, pol: Polarization) -> StateVector<f64> {
        StateVector::single(ModeLabel::new(port, pol, 0))
    }

    fn pat(entries: &[(&str, Outcome)]) -> DetectionPattern {
        DetectionPattern::new(entries.iter().map(|(n, o)| (n.to_string(), *o)).collect())
    }

    #[test]
    fn single_photon_fires() {
        let d = [DetectorSpec::threshold("D", "d")];
        let dist = outcome_distribution(&single("d", V), &d);
        assert_eq!(dist.len(), 1);
        assert_eq!(dist[0].pattern, PatternKey::Detected(pat(&[("D", Outcome::Fired(true))])));
        assert_eq!(dist[0].probability, 1.0);
    }

    #[test]
    fn threshold_cannot_resolve_two_photons() {
        let two = crate::fock::create_photon(&single("d", H), &ModeLabel::new("d", H, 0));
        let (two, _) = normalize(&two).unwrap();
        let dist = outcome_distribution(&two, &[DetectorSpec::threshold("D", "d")]);
        assert_eq!(dist.len(), 1);
        assert!((dist[0].probability - 1.0).abs() < 1e-15);
        let dist = outcome_distribution(&two, &[DetectorSpec::number_resolving("D", "d")]);
        assert_eq!(dist[0].pattern, PatternKey::Detected(pat(&[("D", Outcome::Count(2))])));
    }

    #[test]
    fn born_rule_split() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = single("d", H)
            .added(&single("out", H))
            .scaled(Complex::new(s, 0.0));
        let d = [DetectorSpec::threshold("D", "d")];
        let (res, p) = postselect(&psi, &d, &pat(&[("D", Outcome::Fired(true))])).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert_eq!(res.as_pure().unwrap(), &StateVector::vacuum());
        let (res, p) = postselect(&psi, &d, &pat(&[("D", Outcome::Fired(false))])).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert_eq!(res.as_pure().unwrap(), &single("out", H));
    }

    #[test]
    fn impossible_pattern() {
        let d = [DetectorSpec::number_resolving("D", "d")];
        let err = postselect(&single("x", H), &d, &pat(&[("D", Outcome::Count(1))]));
        assert!(matches!(err, Err(DetectError::ImpossiblePattern(_))));
    }

    #[test]
    fn lost_mass_closes_the_budget() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = crate::fock::tensor(
            &single("d", H).added(&single("d", V)).scaled(Complex::new(s, 0.0)),
            &single("o", H),
        );
        let projected = analyzer_project(&psi, &ProjectiveFilter::new("d", 0.0));
        let dist = outcome_distribution(
            &projected,
            &[DetectorSpec::threshold("D", "d"), DetectorSpec::threshold("O", "o")],
        );
        let total: f64 = dist.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let lost = dist.iter().find(|o| o.pattern == PatternKey::Lost).unwrap();
        assert!((lost.probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn which_mode_information_leaves_a_mixture() {
        // Detector photon in temporal mode 0 or 1, each correlated with a
        // different output polarization.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = crate::fock::tensor(
            &StateVector::single(ModeLabel::new("d", H, 0)),
            &single("o", H),
        );
        let b = crate::fock::tensor(
            &StateVector::single(ModeLabel::new("d", H, 1)),
            &single("o", V),
        );
        let psi = a.added(&b).scaled(Complex::new(s, 0.0));
        let (res, p) = postselect(
            &psi,
            &[DetectorSpec::threshold("D", "d")],
            &pat(&[("D", Outcome::Fired(true))]),
        )
        .unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((res.purity() - 0.5).abs() < 1e-12);
        assert!((res.fidelity(&single("o", H)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn efficiency_thins_binomially() {
        let d = DetectorSpec::number_resolving("D", "d").with_efficiency(0.25).unwrap();
        let two = normalize(&crate::fock::create_photon(&single("d", H), &ModeLabel::new("d", H, 0)))
            .unwrap()
            .0;
        let dist = outcome_distribution(&two, &[d]);
        let probs: Vec<f64> = dist.iter().map(|o| o.probability).collect();
        let expected = [0.5625, 0.375, 0.0625];
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!(DetectorSpec::threshold("D", "d").with_efficiency(1.5).is_err());
    }

    #[test]
    fn postselect_agrees_with_distribution() {
        let psi = normalize(
            &crate::fock::tensor(&single("a", H).added(&single("b", V)), &single("c", H)),
        )
        .unwrap()
        .0;
        let dets = [DetectorSpec::threshold("A", "a"), DetectorSpec::number_resolving("B", "b")];
        for o in outcome_distribution(&psi, &dets) {
            if let PatternKey::Detected(p) = &o.pattern {
                let (_, q) = postselect(&psi, &dets, p).unwrap();
                assert_eq!(q, o.probability);
            }
        }
    }
}
