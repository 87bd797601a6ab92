//! Photon-number-resolving, tag-blind detection and the correction tables.
//!
//! Detection happens on four groups, one per detected beam `1`–`4`, each
//! with an H and a V detector. A success pattern has exactly one photon in
//! each group; it is written as four polarization letters in group order,
//! e.g. `HVHH` for D1H, D2V, D3H, D4H.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::OutputDensityMatrix;
use crate::error::{Error, Result};
use crate::optics::{apply_pauli, Pauli};
use crate::photonic::{OccupationConfig, PhotonicState, Polarization, SpatialMode};

/// Which of the eight detectors: group 1–4 and polarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectorId {
    pub group: u8,
    pub pol: Polarization,
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}{}", self.group, self.pol.as_char())
    }
}

/// Photon counts per detector. Detectors that saw nothing are not stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectorPattern {
    pub fired: BTreeMap<DetectorId, u32>,
}

impl DetectorPattern {
    pub fn count(&self, group: u8, pol: Polarization) -> u32 {
        self.fired.get(&DetectorId { group, pol }).copied().unwrap_or(0)
    }

    pub fn group_total(&self, group: u8) -> u32 {
        self.count(group, Polarization::H) + self.count(group, Polarization::V)
    }

    /// Exactly one photon in exactly one detector of each listed group and
    /// nothing anywhere else.
    pub fn is_success(&self, groups: &[u8]) -> bool {
        groups.iter().all(|g| self.group_total(*g) == 1) && self.fired.keys().all(|d| groups.contains(&d.group))
    }

    pub fn success_id(&self) -> Option<PatternId> {
        if !self.is_success(&[1, 2, 3, 4]) {
            return None;
        }
        let mut pols = [Polarization::H; 4];
        for (g, p) in pols.iter_mut().enumerate() {
            if self.count(g as u8 + 1, Polarization::V) == 1 {
                *p = Polarization::V;
            }
        }
        Some(PatternId(pols))
    }

    /// Per-group photon numbers, e.g. `1021`.
    pub fn multiplicity_key(&self, groups: &[u8]) -> String {
        groups.iter().map(|g| self.group_total(*g).to_string()).collect()
    }
}

impl fmt::Display for DetectorPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .fired
            .iter()
            .map(|(d, n)| if *n == 1 { d.to_string() } else { format!("{d}x{n}") })
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A success pattern: which polarization fired in each of groups 1–4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternId(pub [Polarization; 4]);

impl PatternId {
    /// All sixteen patterns in canonical order (`HHHH` first, H before V).
    pub fn all() -> Vec<PatternId> {
        (0u8..16)
            .map(|bits| {
                let mut p = [Polarization::H; 4];
                for (i, pol) in p.iter_mut().enumerate() {
                    *pol = Polarization::from_bit((bits >> (3 - i)) & 1);
                }
                PatternId(p)
            })
            .collect()
    }

    /// v_i: 1 when group i fired V.
    pub fn bit(&self, group: usize) -> u8 {
        self.0[group - 1].bit()
    }

    pub fn to_pattern(&self) -> DetectorPattern {
        let mut fired = BTreeMap::new();
        for (i, p) in self.0.iter().enumerate() {
            fired.insert(DetectorId { group: i as u8 + 1, pol: *p }, 1);
        }
        DetectorPattern { fired }
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PatternId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 4 {
            return Err(Error::InvalidPatternId(s.to_string()));
        }
        let mut p = [Polarization::H; 4];
        for (i, c) in chars.iter().enumerate() {
            p[i] = match c {
                'H' => Polarization::H,
                'V' => Polarization::V,
                _ => return Err(Error::InvalidPatternId(s.to_string())),
            };
        }
        Ok(PatternId(p))
    }
}

impl Serialize for PatternId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PatternId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlipClass {
    None,
    Phase,
    Bit,
    Both,
}

impl FlipClass {
    pub fn from_flags(phase: bool, bit: bool) -> Self {
        match (phase, bit) {
            (false, false) => FlipClass::None,
            (true, false) => FlipClass::Phase,
            (false, true) => FlipClass::Bit,
            (true, true) => FlipClass::Both,
        }
    }

    pub fn phase(self) -> bool {
        matches!(self, FlipClass::Phase | FlipClass::Both)
    }

    pub fn bit(self) -> bool {
        matches!(self, FlipClass::Bit | FlipClass::Both)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub const ALL: [FlipClass; 4] = [FlipClass::None, FlipClass::Phase, FlipClass::Bit, FlipClass::Both];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateMode {
    Identity,
    Z90,
}

/// Pauli corrections on the output modes, applied left to right.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionOp {
    pub ops: Vec<(SpatialMode, Pauli)>,
}

impl CorrectionOp {
    /// Phase flip: σz on both outputs. Bit flip: σx on the second output.
    /// Both: σx on the second output, then σz on both.
    pub fn for_class(class: FlipClass, first: SpatialMode, second: SpatialMode) -> Self {
        let mut ops = Vec::new();
        if class.bit() {
            ops.push((second, Pauli::X));
        }
        if class.phase() {
            ops.push((first, Pauli::Z));
            ops.push((second, Pauli::Z));
        }
        CorrectionOp { ops }
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn apply(&self, s: &PhotonicState) -> PhotonicState {
        self.ops.iter().fold(s.clone(), |acc, (m, p)| apply_pauli(&acc, *m, *p))
    }

    pub fn apply_to_density(&self, rho: &OutputDensityMatrix, first: SpatialMode, second: SpatialMode) -> OutputDensityMatrix {
        self.ops.iter().fold(rho.clone(), |acc, (m, p)| {
            debug_assert!(*m == first || *m == second);
            acc.conjugate_by_pauli(*m == second, *p)
        })
    }
}

/// Detected beams with their group numbers, and the two output beams.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionLayout {
    pub groups: Vec<(u8, SpatialMode)>,
    pub outputs: [SpatialMode; 2],
}

impl Default for DetectionLayout {
    fn default() -> Self {
        DetectionLayout {
            groups: ["1", "2", "3", "4"].iter().enumerate().map(|(i, l)| (i as u8 + 1, SpatialMode::named(l))).collect(),
            outputs: [SpatialMode::named("a"), SpatialMode::named("d")],
        }
    }
}

impl DetectionLayout {
    /// Only beam `4`, reported as group 4.
    pub fn type1() -> Self {
        DetectionLayout { groups: vec![(4, SpatialMode::named("4"))], ..Default::default() }
    }

    pub fn group_ids(&self) -> Vec<u8> {
        self.groups.iter().map(|(g, _)| *g).collect()
    }

    pub fn detected_modes(&self) -> BTreeSet<SpatialMode> {
        self.groups.iter().map(|(_, m)| *m).collect()
    }

    /// What the detectors report for the detected part of a configuration.
    pub fn pattern_of(&self, cfg: &OccupationConfig) -> DetectorPattern {
        let mut fired = BTreeMap::new();
        for (group, mode) in &self.groups {
            for pol in [Polarization::H, Polarization::V] {
                let n = cfg.photons_at(*mode, pol);
                if n > 0 {
                    fired.insert(DetectorId { group: *group, pol }, n);
                }
            }
        }
        DetectorPattern { fired }
    }
}

/// One term of the tag-labelled ensemble left after a detection event:
/// the detected configuration (with tags) and the unnormalized state of
/// the undetected modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub detected: OccupationConfig,
    pub state: PhotonicState,
}

impl Branch {
    pub fn weight(&self) -> f64 {
        self.state.norm_sqr()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub probability: f64,
    pub branches: Vec<Branch>,
}

/// Groups every term of `s` by the detector pattern its detected part
/// produces, keeping one branch per tag assignment of the detected photons.
pub fn partition_by_detection(s: &PhotonicState, layout: &DetectionLayout) -> BTreeMap<DetectorPattern, Projection> {
    let detected = layout.detected_modes();
    let mut grouped: BTreeMap<DetectorPattern, BTreeMap<OccupationConfig, PhotonicState>> = BTreeMap::new();
    for (cfg, a) in s.terms() {
        let (inside, outside) = cfg.split(&detected);
        let pattern = layout.pattern_of(&inside);
        grouped
            .entry(pattern)
            .or_default()
            .entry(inside)
            .or_insert_with(|| PhotonicState::zero().with_prune_threshold(s.prune_threshold()))
            .add_amplitude(outside, *a);
    }
    grouped
        .into_iter()
        .map(|(p, branches)| {
            let branches: Vec<Branch> =
                branches.into_iter().map(|(detected, state)| Branch { detected, state }).collect();
            let probability = branches.iter().map(Branch::weight).sum();
            (p, Projection { probability, branches })
        })
        .collect()
}

/// Projects `s` onto one detector pattern over the layout's groups.
pub fn project_pattern(s: &PhotonicState, pattern: &DetectorPattern, layout: &DetectionLayout) -> Projection {
    partition_by_detection(s, layout)
        .remove(pattern)
        .unwrap_or(Projection { probability: 0.0, branches: Vec::new() })
}

/// Closed-form rule for the plain re-encoder: a bit flip is owed iff
/// v1 ⊕ v4 = 1 and a phase flip iff v2 ⊕ v3 = 1.
pub fn identity_flip_class(p: PatternId) -> FlipClass {
    FlipClass::from_flags(p.bit(2) ^ p.bit(3) == 1, p.bit(1) ^ p.bit(4) == 1)
}

/// Explicit table for the Z₉₀ variant, one row per detector combination.
const Z90_TABLE: [(&str, FlipClass); 16] = [
    ("HHHH", FlipClass::None),
    ("HVVH", FlipClass::None),
    ("VVHV", FlipClass::None),
    ("VHVV", FlipClass::None),
    ("VHHV", FlipClass::Phase),
    ("VVVV", FlipClass::Phase),
    ("HVHH", FlipClass::Phase),
    ("HHVH", FlipClass::Phase),
    ("HHHV", FlipClass::Bit),
    ("HVVV", FlipClass::Bit),
    ("VVHH", FlipClass::Bit),
    ("VHVH", FlipClass::Bit),
    ("VHHH", FlipClass::Both),
    ("VVVH", FlipClass::Both),
    ("HVHV", FlipClass::Both),
    ("HHVV", FlipClass::Both),
];

pub fn z90_flip_class(p: PatternId) -> FlipClass {
    let id = p.to_string();
    Z90_TABLE
        .iter()
        .find(|(k, _)| *k == id)
        .map(|(_, c)| *c)
        .expect("table covers all sixteen patterns")
}

pub fn flip_class(p: PatternId, mode: GateMode) -> FlipClass {
    match mode {
        GateMode::Identity => identity_flip_class(p),
        GateMode::Z90 => z90_flip_class(p),
    }
}

pub fn correction_for(p: &DetectorPattern, mode: GateMode, layout: &DetectionLayout) -> Result<CorrectionOp> {
    let id = p.success_id().ok_or_else(|| Error::NotSuccessPattern(p.to_string()))?;
    Ok(CorrectionOp::for_class(flip_class(id, mode), layout.outputs[0], layout.outputs[1]))
}

#[derive(Clone, Debug)]
pub struct ConditionalOutcome {
    pub pattern: PatternId,
    pub probability: f64,
    pub branches: Vec<Branch>,
    /// Unnormalized output matrix before correction; trace = probability.
    pub raw: OutputDensityMatrix,
    /// Unnormalized output matrix after the correction.
    pub corrected: OutputDensityMatrix,
    pub correction: CorrectionOp,
    pub flip_class: FlipClass,
}

impl ConditionalOutcome {
    /// Corrected pure output when the event left a single branch.
    pub fn corrected_state(&self) -> Option<PhotonicState> {
        match self.branches.as_slice() {
            [only] => Some(self.correction.apply(&only.state)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub total: f64,
    /// Keyed by per-group photon numbers, e.g. `"1201"`.
    pub by_multiplicity: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct DetectionReport {
    pub outcomes: Vec<ConditionalOutcome>,
    pub failures: FailureSummary,
}

impl DetectionReport {
    pub fn success_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }
}

/// All sixteen one-photon-per-group outcomes with conditional outputs and
/// corrections, plus an independent tally of every other event.
pub fn enumerate_success_patterns(s: &PhotonicState, layout: &DetectionLayout, mode: GateMode) -> Result<DetectionReport> {
    let mut parts = partition_by_detection(s, layout);
    let [first, second] = layout.outputs;
    let mut outcomes = Vec::with_capacity(16);
    for id in PatternId::all() {
        let proj = parts.remove(&id.to_pattern()).unwrap_or(Projection { probability: 0.0, branches: Vec::new() });
        let class = flip_class(id, mode);
        let correction = CorrectionOp::for_class(class, first, second);
        let mut raw = OutputDensityMatrix::zero();
        for b in &proj.branches {
            raw.add(&OutputDensityMatrix::from_state(&b.state, first, second)?);
        }
        let corrected = correction.apply_to_density(&raw, first, second);
        outcomes.push(ConditionalOutcome {
            pattern: id,
            probability: proj.probability,
            branches: proj.branches,
            raw,
            corrected,
            correction,
            flip_class: class,
        });
    }
    let mut failures = FailureSummary::default();
    let groups = layout.group_ids();
    for (pattern, proj) in parts {
        failures.total += proj.probability;
        *failures.by_multiplicity.entry(pattern.multiplicity_key(&groups)).or_default() += proj.probability;
    }
    Ok(DetectionReport { outcomes, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_ids_round_trip_and_order() {
        let all = PatternId::all();
        assert_eq!(all.len(), 16);
        assert_eq!(all[0].to_string(), "HHHH");
        assert_eq!(all[15].to_string(), "VVVV");
        assert_eq!(all[1].to_string(), "HHHV");
        for p in &all {
            assert_eq!(p.to_string().parse::<PatternId>().unwrap(), *p);
            assert_eq!(p.to_pattern().success_id(), Some(*p));
        }
        assert!("HHH".parse::<PatternId>().is_err());
        assert!("HHXH".parse::<PatternId>().is_err());
    }

    #[test]
    fn identity_rule_examples() {
        assert_eq!(identity_flip_class("HHHH".parse().unwrap()), FlipClass::None);
        assert_eq!(identity_flip_class("HVHH".parse().unwrap()), FlipClass::Phase);
        assert_eq!(identity_flip_class("VHHH".parse().unwrap()), FlipClass::Bit);
        assert_eq!(identity_flip_class("VVHH".parse().unwrap()), FlipClass::Both);
    }

    #[test]
    fn z90_table_examples() {
        assert_eq!(z90_flip_class("VHHH".parse().unwrap()), FlipClass::Both);
        assert_eq!(z90_flip_class("HHHH".parse().unwrap()), FlipClass::None);
        let mut per_class = [0; 4];
        for p in PatternId::all() {
            per_class[z90_flip_class(p).index()] += 1;
        }
        assert_eq!(per_class, [4, 4, 4, 4]);
    }

    #[test]
    fn correction_requires_success_pattern() {
        let layout = DetectionLayout::default();
        let mut p = DetectorPattern::default();
        p.fired.insert(DetectorId { group: 4, pol: Polarization::H }, 2);
        assert!(matches!(correction_for(&p, GateMode::Identity, &layout), Err(Error::NotSuccessPattern(_))));
        let ok = "HHHH".parse::<PatternId>().unwrap().to_pattern();
        assert!(correction_for(&ok, GateMode::Identity, &layout).unwrap().is_identity());
        let both = correction_for(&"VVHH".parse::<PatternId>().unwrap().to_pattern(), GateMode::Identity, &layout).unwrap();
        assert_eq!(both.ops.len(), 3);
        assert_eq!(both.ops[0].1, Pauli::X);
    }

    #[test]
    fn multiplicity_keys() {
        let mut p = DetectorPattern::default();
        p.fired.insert(DetectorId { group: 2, pol: Polarization::H }, 2);
        p.fired.insert(DetectorId { group: 4, pol: Polarization::V }, 1);
        assert_eq!(p.multiplicity_key(&[1, 2, 3, 4]), "0201");
        assert!(!p.is_success(&[1, 2, 3, 4]));
        assert_eq!(p.to_string(), "{D2Hx2,D4V}");
    }
}
