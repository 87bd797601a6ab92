//! The full re-encoder: two Bell pairs and a two-photon input encoding sent
//! through a type-I fusion at PBS1 and a type-II fusion at PBS2.
//!
//! Beams: Bell pairs on (a, b) and (c, d), input encoding on (e, 1). PBS1
//! takes c and b to 4 and 2'; PBS2 takes 2' and e to 2 and 3. Beams 1–4 are
//! detected and the re-encoded state leaves in a and d.

use nalgebra::Vector4;
use num_complex::Complex64;
use serde::Serialize;

use crate::density::{encoded_vector, DensityReport, OutputDensityMatrix};
use crate::detection::{
    enumerate_success_patterns, partition_by_detection, ConditionalOutcome, DetectionLayout, DetectorPattern,
    FailureSummary, FlipClass, GateMode, PatternId,
};
use crate::error::Result;
use crate::mismatch::MismatchParams;
use crate::optics::{apply_element_with, Conventions, ElementSpec};
use crate::parity::{bell_phi_plus, parity_state, LogicalQubit};
use crate::photonic::{tensor_all, DistTag, ModeKey, PhotonicState, SpatialMode};

pub fn beam(label: &str) -> SpatialMode {
    SpatialMode::named(label)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitConfig {
    pub gate_mode: GateMode,
    pub input: LogicalQubit,
    pub mismatch: Option<MismatchParams>,
    pub apply_corrections: bool,
    pub conventions: Conventions,
}

impl CircuitConfig {
    pub fn new(input: LogicalQubit, gate_mode: GateMode) -> Self {
        CircuitConfig { gate_mode, input, mismatch: None, apply_corrections: true, conventions: Conventions::default() }
    }

    pub fn with_mismatch(mut self, mm: MismatchParams) -> Self {
        self.mismatch = Some(mm);
        self
    }
}

pub fn tag_photons_in(s: &PhotonicState, mode: SpatialMode, tag: DistTag) -> PhotonicState {
    s.map_keys(|k| if k.mode == mode { ModeKey::tagged(k.mode, k.pol, tag) } else { k })
}

/// √η |ψ⟩ + √(1−η) |ψ with `mode` carrying `tag`⟩, dropping a zero-weight part.
pub fn partially_tagged(s: &PhotonicState, mode: SpatialMode, tag: DistTag, eta: f64) -> PhotonicState {
    let mut parts = Vec::new();
    if eta > 0.0 {
        parts.push((Complex64::new(eta.sqrt(), 0.0), s.clone()));
    }
    if eta < 1.0 {
        parts.push((Complex64::new((1.0 - eta).sqrt(), 0.0), tag_photons_in(s, mode, tag)));
    }
    PhotonicState::linear_combination(parts.iter().map(|(c, s)| (*c, s)))
}

/// Bell pairs on (a, b) and (c, d).
pub fn bell_pairs() -> PhotonicState {
    let ab = bell_phi_plus(beam("a"), beam("b")).expect("distinct beams");
    let cd = bell_phi_plus(beam("c"), beam("d")).expect("distinct beams");
    tensor_all([&ab, &cd]).expect("disjoint beams")
}

/// Input of the circuit. Under mismatch the b photon may be in the primed
/// mode and the e photon in the double-primed one, giving four branches.
pub fn build_input_state(cfg: &CircuitConfig) -> Result<PhotonicState> {
    let ab = bell_phi_plus(beam("a"), beam("b"))?;
    let cd = bell_phi_plus(beam("c"), beam("d"))?;
    let e1 = parity_state(&cfg.input, 2, &[beam("e"), beam("1")])?;
    let Some(mm) = cfg.mismatch else {
        return tensor_all([&ab, &cd, &e1]);
    };
    let (n1, n2) = (mm.eta1(), mm.eta2());
    let branches = [
        (DistTag::Matched, DistTag::Matched, (n1 * n2).sqrt()),
        (DistTag::Prime, DistTag::DoublePrime, ((1.0 - n1) * (1.0 - n2)).sqrt()),
        (DistTag::Matched, DistTag::DoublePrime, (n1 * (1.0 - n2)).sqrt()),
        (DistTag::Prime, DistTag::Matched, ((1.0 - n1) * n2).sqrt()),
    ];
    let mut parts = Vec::new();
    for (tb, te, w) in branches {
        if w == 0.0 {
            continue;
        }
        let ab_t = tag_photons_in(&ab, beam("b"), tb);
        let e1_t = tag_photons_in(&e1, beam("e"), te);
        parts.push((Complex64::new(w, 0.0), tensor_all([&ab_t, &cd, &e1_t])?));
    }
    Ok(PhotonicState::linear_combination(parts.iter().map(|(c, s)| (*c, s))))
}

/// Elements from the Bell pairs to the state in front of PBS2.
pub fn type1_elements() -> Vec<ElementSpec> {
    vec![
        ElementSpec::Hwp22_5(beam("b")),
        ElementSpec::Hwp22_5(beam("c")),
        ElementSpec::pbs("c", "b", "4", "2'"),
        ElementSpec::Hwp22_5(beam("4")),
        ElementSpec::Hwp22_5(beam("2'")),
    ]
}

/// Elements from PBS2's input ports to the detectors.
pub fn type2_elements(mode: GateMode) -> Vec<ElementSpec> {
    let mut out = Vec::new();
    if mode == GateMode::Z90 {
        out.push(ElementSpec::Qwp0(beam("e")));
    }
    out.extend([ElementSpec::pbs("2'", "e", "2", "3"), ElementSpec::Hwp22_5(beam("2")), ElementSpec::Hwp22_5(beam("3"))]);
    out
}

pub fn circuit_elements(mode: GateMode) -> Vec<ElementSpec> {
    let mut out = type1_elements();
    out.extend(type2_elements(mode));
    out
}

pub fn apply_elements(s: &PhotonicState, elements: &[ElementSpec], conv: &Conventions) -> Result<PhotonicState> {
    elements.iter().try_fold(s.clone(), |acc, e| apply_element_with(&acc, e, conv))
}

/// The Bell pairs just before PBS2 (beams a, d, 2', 4).
pub fn pre_pbs2_state(conv: &Conventions) -> Result<PhotonicState> {
    apply_elements(&bell_pairs(), &type1_elements(), conv)
}

/// The complete state at the detectors.
pub fn pre_detection_state(cfg: &CircuitConfig) -> Result<PhotonicState> {
    apply_elements(&build_input_state(cfg)?, &circuit_elements(cfg.gate_mode), &cfg.conventions)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Type1Branch {
    pub pattern: DetectorPattern,
    pub probability: f64,
    /// Normalized state on a, d, 2'.
    pub state: PhotonicState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Type1Outcome {
    pub branches: Vec<Type1Branch>,
    pub failure_probability: f64,
}

/// Detects beam 4 on the output of the type-I stage. Only single-photon
/// outcomes are kept as branches; everything else is failure.
pub fn type1_fusion_stage(s: &PhotonicState) -> Result<Type1Outcome> {
    let layout = DetectionLayout::type1();
    let total = s.norm_sqr();
    let mut branches = Vec::new();
    let mut failure_probability = 0.0;
    for (pattern, proj) in partition_by_detection(s, &layout) {
        let p = proj.probability / total;
        if !pattern.is_success(&[4]) {
            failure_probability += p;
            continue;
        }
        let merged = PhotonicState::linear_combination(proj.branches.iter().map(|b| (Complex64::new(1.0, 0.0), &b.state)));
        let state = merged.scaled(Complex64::new(1.0 / merged.norm(), 0.0));
        branches.push(Type1Branch { pattern, probability: p, state });
    }
    Ok(Type1Outcome { branches, failure_probability })
}

/// Z₉₀ = e^{−iπσz/4} up to global phase: (α, β) → (α, iβ).
pub fn logical_z90_reference(q: &LogicalQubit) -> LogicalQubit {
    LogicalQubit { alpha: q.alpha, beta: q.beta * Complex64::new(0.0, 1.0) }
}

/// The logical state the corrected output should carry.
pub fn target_qubit(q: &LogicalQubit, mode: GateMode) -> LogicalQubit {
    match mode {
        GateMode::Identity => *q,
        GateMode::Z90 => logical_z90_reference(q),
    }
}

/// Two-photon encoding of the target on (a, d).
pub fn canonical_target(q: &LogicalQubit, mode: GateMode) -> Vector4<Complex64> {
    encoded_vector(&target_qubit(q, mode))
}

#[derive(Clone, Debug)]
pub struct ReencoderResult {
    pub gate_mode: GateMode,
    pub input: LogicalQubit,
    pub outcomes: Vec<ConditionalOutcome>,
    pub per_class_probability: [f64; 4],
    pub total_success_probability: f64,
    /// Sum of the corrected (or raw, if corrections are off) unnormalized
    /// outputs over all sixteen patterns.
    pub corrected_output: OutputDensityMatrix,
    pub failures: FailureSummary,
}

impl ReencoderResult {
    pub fn outcome(&self, p: PatternId) -> &ConditionalOutcome {
        self.outcomes.iter().find(|o| o.pattern == p).expect("all sixteen patterns present")
    }

    /// Fidelity of one pattern's corrected output with the canonical target.
    pub fn fidelity(&self, p: PatternId) -> Result<f64> {
        self.outcome(p).corrected.fidelity(&canonical_target(&self.input, self.gate_mode))
    }

    pub fn report(&self) -> ReencoderReport {
        let target = canonical_target(&self.input, self.gate_mode);
        ReencoderReport {
            gate_mode: self.gate_mode,
            alpha: [self.input.alpha.re, self.input.alpha.im],
            beta: [self.input.beta.re, self.input.beta.im],
            patterns: self
                .outcomes
                .iter()
                .map(|o| PatternRow {
                    pattern: o.pattern,
                    probability: o.probability,
                    flip_class: o.flip_class,
                    fidelity: o.corrected.fidelity(&target).ok(),
                })
                .collect(),
            class_probability: FlipClass::ALL.iter().map(|c| (*c, self.per_class_probability[c.index()])).collect(),
            total_success_probability: self.total_success_probability,
            failure_probability: self.failures.total,
            corrected_output: DensityReport::from(&self.corrected_output),
        }
    }
}

pub fn run(cfg: &CircuitConfig) -> Result<ReencoderResult> {
    let s = pre_detection_state(cfg)?;
    let report = enumerate_success_patterns(&s, &DetectionLayout::default(), cfg.gate_mode)?;
    let mut per_class_probability = [0.0; 4];
    let mut corrected_output = OutputDensityMatrix::zero();
    for o in &report.outcomes {
        per_class_probability[o.flip_class.index()] += o.probability;
        corrected_output.add(if cfg.apply_corrections { &o.corrected } else { &o.raw });
    }
    Ok(ReencoderResult {
        gate_mode: cfg.gate_mode,
        input: cfg.input,
        total_success_probability: report.success_probability(),
        outcomes: report.outcomes,
        per_class_probability,
        corrected_output,
        failures: report.failures,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PatternRow {
    pub pattern: PatternId,
    pub probability: f64,
    pub flip_class: FlipClass,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReencoderReport {
    pub gate_mode: GateMode,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub patterns: Vec<PatternRow>,
    pub class_probability: Vec<(FlipClass, f64)>,
    pub total_success_probability: f64,
    pub failure_probability: f64,
    pub corrected_output: DensityReport,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parity::parity_basis;
    use crate::photonic::{equal_up_to_phase, Polarization};

    #[test]
    fn type1_stage_heralds_three_photon_parity_states() {
        let out = type1_fusion_stage(&pre_pbs2_state(&Conventions::default()).unwrap()).unwrap();
        assert_eq!(out.branches.len(), 2);
        let modes = [beam("a"), beam("d"), beam("2'")];
        for b in &out.branches {
            assert!((b.probability - 0.25).abs() < 1e-12);
            let odd = b.pattern.count(4, Polarization::V) == 1;
            let expect = parity_basis(odd, &modes).unwrap();
            assert!(equal_up_to_phase(&b.state, &expect, 1e-12));
        }
        assert!((out.failure_probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ideal_run_totals() {
        let r = run(&CircuitConfig::new(LogicalQubit::plus(), GateMode::Identity)).unwrap();
        assert!((r.total_success_probability - 0.25).abs() < 1e-12);
        for p in r.per_class_probability {
            assert!((p - 1.0 / 16.0).abs() < 1e-12);
        }
        assert!((r.total_success_probability + r.failures.total - 1.0).abs() < 1e-10);
        assert!((r.corrected_output.trace() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn z90_reference_has_order_four() {
        let q = LogicalQubit::plus();
        let mut r = q;
        for _ in 0..4 {
            r = logical_z90_reference(&r);
        }
        assert!((r.overlap(&q) - 1.0).abs() < 1e-14);
        let once = logical_z90_reference(&q);
        assert!((once.beta - Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn unit_mismatch_equals_ideal() {
        let q = LogicalQubit::normalized(Complex64::new(0.6, 0.1), Complex64::new(0.2, -0.7)).unwrap();
        let ideal = CircuitConfig::new(q, GateMode::Identity);
        let unit = ideal.clone().with_mismatch(MismatchParams::new(1.0, 1.0).unwrap());
        assert_eq!(build_input_state(&ideal).unwrap(), build_input_state(&unit).unwrap());
    }
}
