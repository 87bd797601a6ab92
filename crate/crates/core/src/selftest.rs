//! Regression checks against the reference expansions, plus the oracle
//! suite the CLI's `selftest` command runs.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detection::{identity_flip_class, z90_flip_class, FlipClass, GateMode, PatternId};
use crate::error::Result;
use crate::mismatch::{average_fidelity, average_fidelity_variant, grid_values, oracle_deviation, MismatchParams, QuadratureSpec, SignVariant};
use crate::optics::{apply_qwp0_with, Conventions};
use crate::parity::{parity_state, LogicalQubit};
use crate::photonic::{ModeKey, OccupationConfig, PhotonicState, Polarization, SpatialMode};
use crate::reencoder::{beam, pre_detection_state, pre_pbs2_state, run, type1_fusion_stage, CircuitConfig};

fn pols(s: &str) -> Vec<Polarization> {
    s.chars().map(|c| if c == 'H' { Polarization::H } else { Polarization::V }).collect()
}

fn config(modes: &[&str], letters: &str) -> OccupationConfig {
    OccupationConfig::from_keys(modes.iter().zip(pols(letters)).map(|(m, p)| ModeKey::new(beam(m), p)))
}

/// Heralded part of the state in front of PBS2: beam 4 first, then a, d, 2'.
const TYPE1_REFERENCE: [&str; 8] = ["HHHH", "HHVV", "HVVH", "HVHV", "VVHH", "VHVH", "VHHV", "VVVV"];

pub fn type1_reference() -> PhotonicState {
    PhotonicState::from_terms(TYPE1_REFERENCE.iter().map(|t| (config(&["4", "a", "d", "2'"], t), Complex64::new(0.25, 0.0))))
}

/// Reference grouping of the sixteen patterns for the plain circuit: each
/// row lists four patterns with their signs, and the attached (a, d) state
/// as (α-term odd?, β sign).
const SUCCESS_REFERENCE: [([(&str, f64); 4], bool, f64); 4] = [
    ([("HHHH", 1.0), ("HVVH", 1.0), ("VHHV", 1.0), ("VVVV", 1.0)], false, 1.0),
    ([("HVHH", 1.0), ("HHVH", 1.0), ("VVHV", -1.0), ("VHVV", -1.0)], false, -1.0),
    ([("VHHH", 1.0), ("VVVH", 1.0), ("HHHV", 1.0), ("HVVV", 1.0)], true, 1.0),
    ([("HVHV", 1.0), ("HHVV", 1.0), ("VVHH", -1.0), ("VHVH", -1.0)], true, -1.0),
];

/// The 64 success amplitudes of the plain circuit for input `q`.
pub fn success_reference(q: &LogicalQubit) -> PhotonicState {
    let c = 1.0 / (8.0 * 2f64.sqrt());
    let even = ["HH", "VV"];
    let odd = ["HV", "VH"];
    let mut terms = Vec::new();
    for (row, alpha_odd, beta_sign) in SUCCESS_REFERENCE {
        let (a_terms, b_terms) = if alpha_odd { (odd, even) } else { (even, odd) };
        for (pattern, sign) in row {
            for (ad, coeff) in a_terms.iter().map(|t| (t, q.alpha)).chain(b_terms.iter().map(|t| (t, q.beta * beta_sign))) {
                let letters = format!("{pattern}{ad}");
                terms.push((config(&["1", "2", "3", "4", "a", "d"], &letters), coeff * sign * c));
            }
        }
    }
    PhotonicState::from_terms(terms)
}

/// Class of each pattern in the reference grouping.
pub fn reference_class(p: PatternId) -> FlipClass {
    let id = p.to_string();
    for (i, (row, _, _)) in SUCCESS_REFERENCE.iter().enumerate() {
        if row.iter().any(|(k, _)| *k == id) {
            return FlipClass::ALL[i];
        }
    }
    unreachable!("reference covers all sixteen patterns")
}

fn max_deviation(sim: &PhotonicState, reference: &PhotonicState) -> f64 {
    let mut d: f64 = 0.0;
    for (c, a) in sim.terms() {
        d = d.max((a - reference.amplitude(c)).norm());
    }
    for (c, a) in reference.terms() {
        d = d.max((a - sim.amplitude(c)).norm());
    }
    d
}

fn single_per_mode(c: &OccupationConfig, modes: &[SpatialMode]) -> bool {
    modes.iter().all(|m| c.photons_in(*m) == 1)
}

/// Largest amplitude difference between the heralded part (one photon in
/// beam 4) of the simulated state in front of PBS2 and the reference.
pub fn type1_deviation(conv: &Conventions) -> Result<f64> {
    let s = pre_pbs2_state(conv)?;
    let heralded = s.filter(|c| c.photons_in(beam("4")) == 1);
    Ok(max_deviation(&heralded, &type1_reference()))
}

/// Same for the full one-photon-per-group part at the detectors.
pub fn success_deviation(q: &LogicalQubit, conv: &Conventions) -> Result<f64> {
    let mut cfg = CircuitConfig::new(*q, GateMode::Identity);
    cfg.conventions = *conv;
    let s = pre_detection_state(&cfg)?;
    let groups: Vec<SpatialMode> = ["1", "2", "3", "4", "a", "d"].iter().map(|m| beam(m)).collect();
    let heralded = s.filter(|c| single_per_mode(c, &groups));
    Ok(max_deviation(&heralded, &success_reference(q)))
}

/// The input encoding after the quarter-wave plate on e compared with
/// (1/√2)[α(HH + iVV) + β(HV + iVH)] on (e, 1).
pub fn qwp_deviation(q: &LogicalQubit, conv: &Conventions) -> Result<f64> {
    let s = parity_state(q, 2, &[beam("e"), beam("1")])?;
    let after = apply_qwp0_with(&s, beam("e"), conv);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::new(0.0, 1.0);
    let m = ["e", "1"];
    let reference = PhotonicState::from_terms([
        (config(&m, "HH"), q.alpha * r),
        (config(&m, "VV"), q.alpha * i * r),
        (config(&m, "HV"), q.beta * r),
        (config(&m, "VH"), q.beta * i * r),
    ]);
    Ok(max_deviation(&after, &reference))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let t = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check { name: name.into(), passed, detail, seconds: t.elapsed().as_secs_f64() }
}

pub fn random_inputs(seed: u64, n: usize) -> Vec<LogicalQubit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| LogicalQubit::random(&mut rng)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelftestOptions {
    pub conventions: Conventions,
    pub correction_inputs: usize,
    pub oracle_inputs: usize,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { conventions: Conventions::default(), correction_inputs: 20, oracle_inputs: 10, seed: 2024 }
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> Vec<Check> {
    let conv = opts.conventions;
    let probe = LogicalQubit::normalized(Complex64::new(0.6, 0.1), Complex64::new(-0.35, 0.7)).expect("nonzero");
    let mut checks = vec![
        check("type-I heralded expansion", || {
            let d = type1_deviation(&conv)?;
            let stage = type1_fusion_stage(&pre_pbs2_state(&conv)?)?;
            let probs: Vec<f64> = stage.branches.iter().map(|b| b.probability).collect();
            let ok = d <= 1e-12 && probs.len() == 2 && probs.iter().all(|p| (p - 0.25).abs() <= 1e-12);
            Ok((ok, format!("max amplitude deviation {d:.3e}, branch probabilities {probs:?}")))
        }),
        check("full success expansion", || {
            let d = success_deviation(&probe, &conv)?;
            Ok((d <= 1e-12, format!("max amplitude deviation {d:.3e}")))
        }),
        check("quarter-wave plate on e", || {
            let d = qwp_deviation(&probe, &conv)?;
            Ok((d <= 1e-12, format!("max amplitude deviation {d:.3e}")))
        }),
        check("parity rule matches reference grouping", || {
            let bad: Vec<String> =
                PatternId::all().into_iter().filter(|p| identity_flip_class(*p) != reference_class(*p)).map(|p| p.to_string()).collect();
            Ok((bad.is_empty(), format!("{} disagreements {bad:?}", bad.len())))
        }),
    ];
    checks.push(check("probabilities and corrections", || {
        let mut worst_f: f64 = 1.0;
        let mut worst_book: f64 = 0.0;
        let mut worst_pattern: f64 = 0.0;
        let mut classes_ok = true;
        for q in random_inputs(opts.seed, opts.correction_inputs) {
            for mode in [GateMode::Identity, GateMode::Z90] {
                let mut cfg = CircuitConfig::new(q, mode);
                cfg.conventions = conv;
                let r = run(&cfg)?;
                worst_book = worst_book.max((r.total_success_probability + r.failures.total - 1.0).abs());
                for o in &r.outcomes {
                    worst_pattern = worst_pattern.max((o.probability - 1.0 / 64.0).abs());
                    worst_f = worst_f.min(r.fidelity(o.pattern)?);
                    let expect = match mode {
                        GateMode::Identity => identity_flip_class(o.pattern),
                        GateMode::Z90 => z90_flip_class(o.pattern),
                    };
                    classes_ok &= o.flip_class == expect;
                }
            }
        }
        let ok = worst_f >= 1.0 - 1e-12 && worst_book <= 1e-10 && worst_pattern <= 1e-12 && classes_ok;
        Ok((ok, format!("min fidelity {worst_f:.15}, bookkeeping {worst_book:.3e}, per-pattern {worst_pattern:.3e}")))
    }));
    checks.push(check("mismatch closed form vs simulation", || {
        let g = grid_values(5);
        let mut jobs = Vec::new();
        for q in random_inputs(opts.seed + 1, opts.oracle_inputs) {
            for e1 in &g {
                for e2 in &g {
                    for mode in [GateMode::Identity, GateMode::Z90] {
                        jobs.push((q, MismatchParams::new(*e1, *e2)?, mode));
                    }
                }
            }
        }
        let worst = jobs
            .par_iter()
            .map(|(q, mm, mode)| oracle_deviation(q, mm, *mode))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(crate::mismatch::OracleDeviation::default(), |a, b| a.merge(b));
        let ok = worst.max_entry <= 1e-10 && worst.max_trace <= 1e-12;
        Ok((ok, format!("entry {:.3e}, trace {:.3e}", worst.max_entry, worst.max_trace)))
    }));
    checks.push(check("average fidelity", || {
        let quad = QuadratureSpec::default();
        let f = |a: f64, b: f64, m: GateMode| -> Result<f64> { Ok(average_fidelity(&MismatchParams::new(a, b)?, m, &quad)) };
        let pins = [(1.0, 1.0, 1.0), (0.0, 0.0, 0.5), (1.0, 0.0, 2.0 / 3.0)];
        let mut worst: f64 = 0.0;
        for (a, b, v) in pins {
            worst = worst.max((f(a, b, GateMode::Identity)? - v).abs());
        }
        let mut sym: f64 = 0.0;
        for a in grid_values(5) {
            for b in grid_values(5) {
                let mm = MismatchParams::new(a, b)?;
                let plus = average_fidelity_variant(&mm, GateMode::Identity, SignVariant::Plus, &quad);
                let minus = average_fidelity_variant(&mm, GateMode::Identity, SignVariant::Minus, &quad);
                let z = average_fidelity(&mm, GateMode::Z90, &quad);
                sym = sym.max((plus - minus).abs()).max((plus - z).abs());
            }
        }
        let diag: Vec<f64> = grid_values(21).iter().map(|e| f(*e, *e, GateMode::Identity)).collect::<Result<_>>()?;
        let monotone = diag.windows(2).all(|w| w[1] >= w[0]);
        let ok = worst <= 1e-9 && sym <= 1e-9 && monotone;
        Ok((ok, format!("pins {worst:.3e}, variant/mode spread {sym:.3e}, diagonal monotone {monotone}")))
    }));
    checks
}
