//! Truncated down-conversion sources feeding the re-encoder.
//!
//! Each of the three sources emits Σ_k χ^k |k pairs⟩, where |k pairs⟩ is the
//! normalized k-fold pair emission. The two Bell sources use the pair
//! creator (a_H†b_H† + a_V†b_V†)/√2. The input source uses A a_H†b_H† +
//! B a_V†b_V† followed by a Hadamard on both beams, which turns its single
//! pair into the two-photon encoding.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::OutputDensityMatrix;
use crate::detection::{correction_for, DetectionLayout, DetectorPattern};
use crate::error::{Error, Result};
use crate::optics::apply_hwp22_5;
use crate::parity::LogicalQubit;
use crate::photonic::{normalize, tensor_all, ModeKey, OccupationConfig, PhotonicState, Polarization, SpatialMode};
use crate::reencoder::{apply_elements, beam, canonical_target, circuit_elements, CircuitConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorModel {
    NumberResolving,
    /// Any count ≥ 1 is a click.
    Threshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdcParams {
    pub chi: f64,
    pub truncation_order: u32,
    pub detector_model: DetectorModel,
}

impl PdcParams {
    pub const MAX_PAIR_PROBABILITY: f64 = 1e-2;

    pub fn new(chi: f64, truncation_order: u32, detector_model: DetectorModel) -> Result<Self> {
        if !chi.is_finite() || chi * chi > Self::MAX_PAIR_PROBABILITY {
            return Err(Error::InvalidPdc(format!("|chi|^2 = {} exceeds {}", chi * chi, Self::MAX_PAIR_PROBABILITY)));
        }
        if !(3..=4).contains(&truncation_order) {
            return Err(Error::InvalidPdc(format!("truncation order {truncation_order} is not 3 or 4")));
        }
        Ok(PdcParams { chi, truncation_order, detector_model })
    }
}

/// Normalized (c_H a_H†b_H† + c_V a_V†b_V†)^k |0⟩.
fn k_pair_term(k: u32, m1: SpatialMode, m2: SpatialMode, c_h: Complex64, c_v: Complex64) -> Result<PhotonicState> {
    let mut s = PhotonicState::vacuum();
    for _ in 0..k {
        let hh = s.create(ModeKey::new(m1, Polarization::H)).create(ModeKey::new(m2, Polarization::H));
        let vv = s.create(ModeKey::new(m1, Polarization::V)).create(ModeKey::new(m2, Polarization::V));
        s = PhotonicState::linear_combination([(c_h, &hh), (c_v, &vv)]);
    }
    normalize(&s)
}

fn bell_term(k: u32, m1: SpatialMode, m2: SpatialMode) -> Result<PhotonicState> {
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    k_pair_term(k, m1, m2, r, r)
}

fn parity_term(k: u32, q: &LogicalQubit, m1: SpatialMode, m2: SpatialMode) -> Result<PhotonicState> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let s = k_pair_term(k, m1, m2, (q.alpha + q.beta) * r, (q.alpha - q.beta) * r)?;
    Ok(apply_hwp22_5(&apply_hwp22_5(&s, m1), m2))
}

/// Normalized Σ_{k ≤ order} χ^k |k pairs⟩ of a Φ⁺ source.
pub fn pdc_state(chi: f64, modes: (SpatialMode, SpatialMode), order: u32) -> Result<PhotonicState> {
    if modes.0 == modes.1 {
        return Err(Error::OverlappingModes(modes.0.to_string()));
    }
    let terms: Vec<PhotonicState> = (0..=order).map(|k| bell_term(k, modes.0, modes.1)).collect::<Result<_>>()?;
    let parts = terms.iter().enumerate().map(|(k, t)| (Complex64::new(chi.powi(k as i32), 0.0), t));
    normalize(&PhotonicState::linear_combination(parts))
}

/// Pairs emitted by the (a, b), (c, d) and (e, 1) sources.
pub type Emission = [u32; 3];

pub const CORRECT_EMISSION: Emission = [1, 1, 1];

/// All emissions with at most `order` pairs in total, with their normalized
/// probabilities.
pub fn emission_probabilities(chi: f64, order: u32) -> Vec<(Emission, f64)> {
    let mut out = Vec::new();
    for n in 0..=order {
        for k1 in 0..=n {
            for k2 in 0..=n - k1 {
                out.push(([k1, k2, n - k1 - k2], (chi * chi).powi(n as i32)));
            }
        }
    }
    let z: f64 = out.iter().map(|(_, w)| w).sum();
    out.into_iter().map(|(e, w)| (e, w / z)).collect()
}

/// Probability of exactly `n` pairs in total.
pub fn pair_number_probability(chi: f64, order: u32, n: u32) -> f64 {
    emission_probabilities(chi, order).iter().filter(|(e, _)| e.iter().sum::<u32>() == n).map(|(_, p)| p).sum()
}

/// The unnormalized state of one emission, scaled by its amplitude.
fn emission_state(e: Emission, chi: f64, q: &LogicalQubit) -> Result<PhotonicState> {
    let s = tensor_all([
        &bell_term(e[0], beam("a"), beam("b"))?,
        &bell_term(e[1], beam("c"), beam("d"))?,
        &parity_term(e[2], q, beam("e"), beam("1"))?,
    ])?;
    Ok(s.scaled(Complex64::new(chi.powi(e.iter().sum::<u32>() as i32), 0.0)))
}

/// Joint normalized state of the three sources.
pub fn three_source_state(chi: f64, order: u32, q: &LogicalQubit) -> Result<PhotonicState> {
    let parts: Vec<PhotonicState> =
        emission_probabilities(chi, order).iter().map(|(e, _)| emission_state(*e, chi, q)).collect::<Result<_>>()?;
    normalize(&PhotonicState::linear_combination(parts.iter().map(|s| (Complex64::new(1.0, 0.0), s))))
}

fn clicked(n: u32, model: DetectorModel) -> bool {
    match model {
        DetectorModel::NumberResolving => n == 1,
        DetectorModel::Threshold => n >= 1,
    }
}

/// One photon in one detector of each group, as the detector model sees it.
pub fn fourfold_accepts(p: &DetectorPattern, model: DetectorModel) -> bool {
    (1..=4u8).all(|g| {
        let h = p.count(g, Polarization::H);
        let v = p.count(g, Polarization::V);
        match model {
            DetectorModel::NumberResolving => h + v == 1,
            DetectorModel::Threshold => (h >= 1) != (v >= 1),
        }
    }) && p.fired.keys().all(|d| (1..=4).contains(&d.group))
}

/// Fourfold coincidence plus a photon in each output beam.
pub fn sixfold_accepts(p: &DetectorPattern, outputs: (u32, u32), model: DetectorModel) -> bool {
    fourfold_accepts(p, model) && clicked(outputs.0, model) && clicked(outputs.1, model)
}

/// How the detectors see a full configuration.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AcceptedEvent {
    pub pattern: DetectorPattern,
    pub outputs: (u32, u32),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub chi: f64,
    pub truncation_order: u32,
    pub detector_model: Option<DetectorModel>,
    pub p_correct_sixfold: f64,
    pub p_contaminated_sixfold: f64,
    pub p_correct_fourfold: f64,
    pub p_contaminated_fourfold: f64,
    /// Probability of everything sixfold post-selection discards.
    pub rejected_by_postselection: f64,
    pub six_photon_probability: f64,
    pub eight_photon_probability: f64,
    pub eight_to_six_ratio: f64,
    /// eight_to_six_ratio / |χ|².
    pub ratio_prefactor: f64,
    /// Lowest corrected-output fidelity over sixfold-accepted events.
    pub min_sixfold_fidelity: Option<f64>,
    pub sixfold_events: usize,
    /// Parity source higher orders modelled like the Bell sources'.
    pub symmetric_parity_source: bool,
}

impl ContaminationReport {
    pub fn contaminated_fourfold_fraction(&self) -> f64 {
        let t = self.p_correct_fourfold + self.p_contaminated_fourfold;
        if t == 0.0 {
            0.0
        } else {
            self.p_contaminated_fourfold / t
        }
    }
}

struct ConfigAmplitudes {
    total: Complex64,
    /// Σ |amplitude| contributed by emissions other than one pair per source.
    other: f64,
}

/// Runs every emission through the circuit and adds up amplitudes per
/// final configuration, remembering which part came from the one-pair-per-
/// source emission.
fn propagate(p: &PdcParams, cfg: &CircuitConfig) -> Result<BTreeMap<OccupationConfig, ConfigAmplitudes>> {
    let emissions = emission_probabilities(p.chi, p.truncation_order);
    let elements = circuit_elements(cfg.gate_mode);
    let outs: Vec<(Emission, PhotonicState)> = emissions
        .par_iter()
        .map(|(e, _)| {
            let s = emission_state(*e, p.chi, &cfg.input)?;
            Ok((*e, apply_elements(&s, &elements, &cfg.conventions)?))
        })
        .collect::<Result<_>>()?;
    let z: f64 = emissions.iter().map(|(e, _)| p.chi.powi(2 * e.iter().sum::<u32>() as i32)).sum();
    let scale = 1.0 / z.sqrt();
    let mut map: BTreeMap<OccupationConfig, ConfigAmplitudes> = BTreeMap::new();
    for (e, s) in &outs {
        for (c, a) in s.terms() {
            let a = a * scale;
            let entry = map
                .entry(c.clone())
                .or_insert(ConfigAmplitudes { total: Complex64::default(), other: 0.0 });
            entry.total += a;
            if *e != CORRECT_EMISSION {
                entry.other += a.norm();
            }
        }
    }
    Ok(map)
}

pub fn contamination_analysis(p: &PdcParams, cfg: &CircuitConfig) -> Result<ContaminationReport> {
    if p.truncation_order < 3 {
        return Err(Error::InvalidPdc("contamination analysis needs truncation order 3 or more".into()));
    }
    if cfg.mismatch.is_some() {
        return Err(Error::InvalidPdc("mode mismatch is not modelled together with multi-pair emission".into()));
    }
    let layout = DetectionLayout::default();
    let [a, d] = layout.outputs;
    let amps = propagate(p, cfg)?;
    let mut report = ContaminationReport {
        chi: p.chi,
        truncation_order: p.truncation_order,
        detector_model: Some(p.detector_model),
        symmetric_parity_source: true,
        ..Default::default()
    };
    let mut sixfold_states: BTreeMap<DetectorPattern, PhotonicState> = BTreeMap::new();
    let tiny = 1e-300;
    for (c, amp) in &amps {
        let prob = amp.total.norm_sqr();
        let pattern = layout.pattern_of(c);
        let outputs = (c.photons_in(a), c.photons_in(d));
        let contaminated = amp.other > tiny;
        if fourfold_accepts(&pattern, p.detector_model) {
            if contaminated {
                report.p_contaminated_fourfold += prob;
            } else {
                report.p_correct_fourfold += prob;
            }
        }
        if sixfold_accepts(&pattern, outputs, p.detector_model) {
            if contaminated {
                report.p_contaminated_sixfold += prob;
            } else {
                report.p_correct_sixfold += prob;
            }
            let (_, rest) = c.split(&layout.detected_modes());
            sixfold_states
                .entry(pattern)
                .or_insert_with(PhotonicState::zero)
                .add_amplitude(rest, amp.total);
        } else {
            report.rejected_by_postselection += prob;
        }
    }
    let target = canonical_target(&cfg.input, cfg.gate_mode);
    let mut min_f: Option<f64> = None;
    for (pattern, s) in &sixfold_states {
        let rho = match correction_for(pattern, cfg.gate_mode, &layout) {
            Ok(corr) => OutputDensityMatrix::from_state(&corr.apply(s), a, d)?,
            Err(_) => OutputDensityMatrix::from_state(s, a, d)?,
        };
        let f = rho.fidelity(&target)?;
        min_f = Some(min_f.map_or(f, |m: f64| m.min(f)));
    }
    report.min_sixfold_fidelity = min_f;
    report.sixfold_events = sixfold_states.len();
    report.six_photon_probability = pair_number_probability(p.chi, 4, 3);
    report.eight_photon_probability = pair_number_probability(p.chi, 4, 4);
    report.eight_to_six_ratio = report.eight_photon_probability / report.six_photon_probability;
    report.ratio_prefactor = report.eight_to_six_ratio / (p.chi * p.chi);
    Ok(report)
}

/// Detector-visible events accepted by sixfold post-selection.
pub fn sixfold_accepted_events(p: &PdcParams, cfg: &CircuitConfig) -> Result<Vec<AcceptedEvent>> {
    let layout = DetectionLayout::default();
    let [a, d] = layout.outputs;
    let amps = propagate(p, cfg)?;
    let mut out: Vec<AcceptedEvent> = amps
        .iter()
        .filter(|(_, amp)| amp.total.norm_sqr() > 0.0)
        .map(|(c, _)| AcceptedEvent { pattern: layout.pattern_of(c), outputs: (c.photons_in(a), c.photons_in(d)) })
        .filter(|e| sixfold_accepts(&e.pattern, e.outputs, p.detector_model))
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// Probability that some detector receives two or more photons among the
/// configurations that reach every group and both outputs.
pub fn multiply_occupied_sixfold_probability(p: &PdcParams, cfg: &CircuitConfig) -> Result<f64> {
    let layout = DetectionLayout::default();
    let [a, d] = layout.outputs;
    let amps = propagate(p, cfg)?;
    Ok(amps
        .iter()
        .filter(|(c, _)| {
            let pat = layout.pattern_of(c);
            sixfold_accepts(&pat, (c.photons_in(a), c.photons_in(d)), DetectorModel::Threshold)
                && (pat.fired.values().any(|n| *n > 1) || c.photons_in(a) > 1 || c.photons_in(d) > 1)
        })
        .map(|(_, amp)| amp.total.norm_sqr())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::GateMode;
    use crate::photonic::equal_up_to_phase;

    #[test]
    fn params_validated() {
        assert!(PdcParams::new(0.2, 3, DetectorModel::Threshold).is_err());
        assert!(PdcParams::new(0.01, 2, DetectorModel::Threshold).is_err());
        assert!(PdcParams::new(0.01, 4, DetectorModel::NumberResolving).is_ok());
    }

    #[test]
    fn low_orders() {
        let (m1, m2) = (beam("a"), beam("b"));
        assert_eq!(pdc_state(0.1, (m1, m2), 0).unwrap(), PhotonicState::vacuum());
        let s = pdc_state(0.1, (m1, m2), 1).unwrap();
        let hh = OccupationConfig::from_keys([ModeKey::new(m1, Polarization::H), ModeKey::new(m2, Polarization::H)]);
        let vv = OccupationConfig::from_keys([ModeKey::new(m1, Polarization::V), ModeKey::new(m2, Polarization::V)]);
        assert!((s.amplitude(&hh) - s.amplitude(&vv)).norm() < 1e-15);
        let ratio = s.amplitude(&hh).re / s.amplitude(&OccupationConfig::vacuum()).re;
        assert!((ratio - 0.1 / 2f64.sqrt()).abs() < 1e-14);
        let s2 = pdc_state(0.1, (m1, m2), 2).unwrap();
        let mut hh2 = OccupationConfig::vacuum();
        hh2.add(ModeKey::new(m1, Polarization::H), 2);
        hh2.add(ModeKey::new(m2, Polarization::H), 2);
        assert!(s2.amplitude(&hh2).norm() > 0.0);
        assert!((s2.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_pair_parity_term_is_the_encoding() {
        let q = LogicalQubit::normalized(Complex64::new(0.6, 0.2), Complex64::new(-0.3, 0.7)).unwrap();
        let t = parity_term(1, &q, beam("e"), beam("1")).unwrap();
        let expect = crate::parity::parity_state(&q, 2, &[beam("e"), beam("1")]).unwrap();
        assert!(equal_up_to_phase(&t, &expect, 1e-12));
    }

    #[test]
    fn emission_scaling_and_ratio() {
        for chi in [1e-2, 3e-2] {
            let e = emission_probabilities(chi, 4);
            let p = |x: Emission| e.iter().find(|(k, _)| *k == x).unwrap().1;
            let vac = p([0, 0, 0]);
            for n in 1..=4u32 {
                assert!((p([n, 0, 0]) / vac - (chi * chi).powi(n as i32)).abs() < 1e-12 * (chi * chi).powi(n as i32));
            }
            assert!((p([2, 0, 0]) - p([1, 1, 0])).abs() < 1e-20);
            let r = pair_number_probability(chi, 4, 4) / pair_number_probability(chi, 4, 3);
            assert!((r - 1.5 * chi * chi).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_emission_reproduces_circuit() {
        let cfg = CircuitConfig::new(LogicalQubit::plus(), GateMode::Identity);
        let s = emission_state(CORRECT_EMISSION, 1.0, &cfg.input).unwrap();
        assert!(equal_up_to_phase(&s, &crate::reencoder::build_input_state(&cfg).unwrap(), 1e-12));
    }
}
