//! Teleportation through the re-encoder as a two-party protocol.
//!
//! Alice holds the input encoding on (e, 1) and the Bell-pair halves b, c;
//! Bob holds a and d. Alice fuses the Bell pairs at PBS1 and detects beam 4
//! (type-I); on failure she retries with fresh pairs. After a type-I success
//! she fuses 2' with e at PBS2 and detects 2 and 3 (type-II). On success she
//! measures beam 1 and sends all results; Bob corrects from the messages
//! alone. On a type-II failure beam 1 still carries the logical qubit and
//! can be re-encoded for another round.
//!
//! Outcomes are sampled from the simulated conditional distributions. The
//! state after PBS2 is linear in (α, β), so each stage is precomputed for the
//! logical basis states and composed per trial. Tag-labelled mixtures are
//! unravelled by sampling one branch.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{encoded_vector, OutputDensityMatrix};
use crate::detection::{correction_for, partition_by_detection, CorrectionOp, DetectionLayout, DetectorPattern, GateMode};
use crate::error::{Error, Result};
use crate::mismatch::MismatchParams;
use crate::optics::Conventions;
use crate::parity::{bell_phi_plus, parity_state, LogicalQubit};
use crate::photonic::{inner_product, tensor, DistTag, OccupationConfig, PhotonicState, Polarization, SpatialMode};
use crate::reencoder::{apply_elements, beam, partially_tagged, type1_elements, type2_elements};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Type-I attempts allowed before each type-II attempt.
    pub max_type1_attempts: u32,
    /// Type-II attempts allowed in total.
    pub max_type2_attempts: u32,
    /// Re-encode from beam 1 after a type-II failure.
    pub recovery: bool,
}

impl RetryPolicy {
    pub fn new(max_type1_attempts: u32, max_type2_attempts: u32, recovery: bool) -> Result<Self> {
        if max_type1_attempts == 0 || max_type2_attempts == 0 {
            return Err(Error::InvalidPolicy);
        }
        Ok(RetryPolicy { max_type1_attempts, max_type2_attempts, recovery })
    }

    pub fn single_shot() -> Self {
        RetryPolicy { max_type1_attempts: 1, max_type2_attempts: 1, recovery: false }
    }

    pub fn type1_retry_only() -> Self {
        RetryPolicy { max_type1_attempts: u32::MAX, max_type2_attempts: 1, recovery: false }
    }

    pub fn unlimited() -> Self {
        RetryPolicy { max_type1_attempts: u32::MAX, max_type2_attempts: u32::MAX, recovery: true }
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.max_type1_attempts, self.max_type2_attempts, self.recovery).map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    AwaitType1,
    AwaitType2,
    Recovering,
    Done,
    Aborted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Type1,
    Type2,
    Beam1,
}

/// Detector results sent from Alice to Bob after one measurement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub stage: Stage,
    pub pattern_fragment: DetectorPattern,
    pub success: bool,
}

/// Beams touched by one step of Alice's or Bob's operations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeAccess {
    pub stage: Stage,
    pub modes: Vec<SpatialMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolState {
    pub phase: Phase,
    pub attempts_type1: u32,
    pub attempts_type2: u32,
    pub bell_pairs_consumed: u32,
    pub recoveries: u32,
    pub pending_correction: Option<CorrectionOp>,
    pub messages: Vec<ClassicalMessage>,
    pub access_log: Vec<ModeAccess>,
}

impl ProtocolState {
    fn new() -> Self {
        ProtocolState {
            phase: Phase::AwaitType1,
            attempts_type1: 0,
            attempts_type2: 0,
            bell_pairs_consumed: 0,
            recoveries: 0,
            pending_correction: None,
            messages: Vec::new(),
            access_log: Vec::new(),
        }
    }

    /// True when the first type-I and the first type-II attempt both worked.
    pub fn single_shot(&self) -> bool {
        self.phase == Phase::Done && self.attempts_type1 == 1 && self.attempts_type2 == 1
    }
}

/// Bob's correction, computed from the messages alone: the last successful
/// type-I result and the type-II and beam-1 results that followed it.
pub fn bob_correction(messages: &[ClassicalMessage]) -> Result<CorrectionOp> {
    let mut fired = BTreeMap::new();
    let mut seen = [false; 3];
    for m in messages.iter().rev() {
        let slot = match m.stage {
            Stage::Type1 => 0,
            Stage::Type2 => 1,
            Stage::Beam1 => 2,
        };
        if !m.success || seen[slot] {
            continue;
        }
        seen[slot] = true;
        fired.extend(m.pattern_fragment.fired.iter().map(|(k, v)| (*k, *v)));
        if slot == 0 {
            break;
        }
    }
    correction_for(&DetectorPattern { fired }, GateMode::Identity, &DetectionLayout::default())
}

/// Alice's local fix of the surviving qubit after a type-II failure: a bit
/// flip when both photons reached beam 2.
pub fn recovery_bit_flip(type2_fragment: &DetectorPattern) -> bool {
    type2_fragment.group_total(2) == 2
}

#[derive(Clone, Debug)]
struct Type2Pattern {
    pattern: DetectorPattern,
    success: bool,
    /// Σ ⟨s_i|s_j⟩ over branches; the pattern probability is v†Gv.
    gram: Matrix2<Complex64>,
    /// Per tag branch, the unnormalized remainder on (a, d, 1) for logical
    /// inputs |0⟩ and |1⟩.
    branches: Vec<[PhotonicState; 2]>,
}

#[derive(Clone, Debug)]
struct Type1Choice {
    pattern: DetectorPattern,
    probability: f64,
    type2: Vec<Type2Pattern>,
}

/// Precomputed stage responses for one mismatch setting.
#[derive(Clone, Debug)]
pub struct ProtocolModel {
    mismatch: Option<MismatchParams>,
    type1: Vec<Type1Choice>,
    type1_failure: f64,
    type1_modes: Vec<SpatialMode>,
    type2_modes: Vec<SpatialMode>,
}

fn compose(q: &LogicalQubit, pair: &[PhotonicState; 2]) -> PhotonicState {
    PhotonicState::linear_combination([(q.alpha, &pair[0]), (q.beta, &pair[1])])
}

fn quadratic(g: &Matrix2<Complex64>, q: &LogicalQubit) -> f64 {
    let v = [q.alpha, q.beta];
    let mut acc = Complex64::default();
    for i in 0..2 {
        for j in 0..2 {
            acc += v[i].conj() * g[(i, j)] * v[j];
        }
    }
    acc.re
}

fn element_modes(elements: &[crate::optics::ElementSpec]) -> Vec<SpatialMode> {
    let mut m: Vec<SpatialMode> = elements.iter().flat_map(|e| e.modes()).collect();
    m.sort();
    m.dedup();
    m
}

impl ProtocolModel {
    pub fn new(mismatch: Option<MismatchParams>) -> Result<Self> {
        let conv = Conventions::default();
        let (eta1, eta2) = mismatch.map(|m| (m.eta1(), m.eta2())).unwrap_or((1.0, 1.0));
        let ab = partially_tagged(&bell_phi_plus(beam("a"), beam("b"))?, beam("b"), DistTag::Prime, eta1);
        let pairs = tensor(&ab, &bell_phi_plus(beam("c"), beam("d"))?)?;
        let t1 = type1_elements();
        let t2 = type2_elements(GateMode::Identity);
        let after1 = apply_elements(&pairs, &t1, &conv)?;
        let inputs = [LogicalQubit::zero(), LogicalQubit::one()]
            .map(|q| parity_state(&q, 2, &[beam("e"), beam("1")]).map(|s| partially_tagged(&s, beam("e"), DistTag::DoublePrime, eta2)));
        let inputs = [inputs[0].clone()?, inputs[1].clone()?];
        let layout23 = DetectionLayout { groups: vec![(2, beam("2")), (3, beam("3"))], ..Default::default() };

        let mut type1 = Vec::new();
        let mut type1_failure = 0.0;
        for (pattern, proj) in partition_by_detection(&after1, &DetectionLayout::type1()) {
            if !pattern.is_success(&[4]) {
                type1_failure += proj.probability;
                continue;
            }
            for branch in proj.branches {
                let probability = branch.weight();
                let state = branch.state.scaled(Complex64::new(1.0 / probability.sqrt(), 0.0));
                let outs = [0, 1].map(|i| tensor(&state, &inputs[i]).and_then(|s| apply_elements(&s, &t2, &conv)));
                let outs = [outs[0].clone()?, outs[1].clone()?];
                let parts = outs.map(|s| partition_by_detection(&s, &layout23));
                let mut merged: BTreeMap<DetectorPattern, BTreeMap<OccupationConfig, [PhotonicState; 2]>> = BTreeMap::new();
                for (i, part) in parts.into_iter().enumerate() {
                    for (p, pr) in part {
                        for b in pr.branches {
                            merged.entry(p.clone()).or_default().entry(b.detected).or_insert_with(|| [PhotonicState::zero(), PhotonicState::zero()])[i] = b.state;
                        }
                    }
                }
                let type2 = merged
                    .into_iter()
                    .map(|(p, bs)| {
                        let branches: Vec<[PhotonicState; 2]> = bs.into_values().collect();
                        let mut gram = Matrix2::zeros();
                        for b in &branches {
                            for i in 0..2 {
                                for j in 0..2 {
                                    gram[(i, j)] += inner_product(&b[i], &b[j]);
                                }
                            }
                        }
                        Type2Pattern { success: p.is_success(&[2, 3]), pattern: p, gram, branches }
                    })
                    .collect();
                type1.push(Type1Choice { pattern: pattern.clone(), probability, type2 });
            }
        }
        Ok(ProtocolModel {
            mismatch,
            type1,
            type1_failure,
            type1_modes: element_modes(&t1),
            type2_modes: element_modes(&t2),
        })
    }

    pub fn ideal() -> &'static ProtocolModel {
        static MODEL: OnceLock<ProtocolModel> = OnceLock::new();
        MODEL.get_or_init(|| ProtocolModel::new(None).expect("ideal circuit builds"))
    }

    pub fn mismatch(&self) -> Option<MismatchParams> {
        self.mismatch
    }

    pub fn type1_success_probability(&self) -> f64 {
        self.type1.iter().map(|c| c.probability).sum()
    }

    pub fn type1_failure_probability(&self) -> f64 {
        self.type1_failure
    }

    /// Probability that PBS2 succeeds for input `q`, averaged over type-I
    /// successes.
    pub fn type2_success_probability(&self, q: &LogicalQubit) -> f64 {
        let total = self.type1_success_probability();
        self.type1
            .iter()
            .map(|c| c.probability * c.type2.iter().filter(|p| p.success).map(|p| quadratic(&p.gram, q)).sum::<f64>())
            .sum::<f64>()
            / total
    }

    /// Every type-II failure for input `q` after each type-I success: the
    /// type-I and type-II results, the probability given the type-I result,
    /// and the beam-1 density matrix after Alice's bit-flip rule.
    pub fn type2_failures(&self, q: &LogicalQubit) -> Vec<(DetectorPattern, DetectorPattern, f64, Matrix2<Complex64>)> {
        let mut out = Vec::new();
        for c in &self.type1 {
            for p in c.type2.iter().filter(|p| !p.success) {
                let prob = quadratic(&p.gram, q);
                if prob <= 0.0 {
                    continue;
                }
                let mut rho = Matrix2::zeros();
                for b in &p.branches {
                    rho += beam1_density(&compose(q, b));
                }
                let rho = apply_flip(rho / Complex64::new(prob, 0.0), recovery_bit_flip(&p.pattern));
                out.push((c.pattern.clone(), p.pattern.clone(), prob, rho));
            }
        }
        out
    }

    fn sample_type1<R: Rng>(&self, rng: &mut R) -> Option<&Type1Choice> {
        let mut u = rng.gen::<f64>() * (self.type1_success_probability() + self.type1_failure);
        for c in &self.type1 {
            if u < c.probability {
                return Some(c);
            }
            u -= c.probability;
        }
        None
    }

    pub fn run_trial(&self, q: &LogicalQubit, policy: &RetryPolicy, seed: u64) -> Result<TrialOutcome> {
        policy.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = ProtocolState::new();
        let target = encoded_vector(q);
        let mut current = *q;
        loop {
            st.phase = Phase::AwaitType1;
            let mut tries = 0;
            let choice = loop {
                if tries == policy.max_type1_attempts {
                    st.phase = Phase::Aborted;
                    return Ok(TrialOutcome { state: st, fidelity: None });
                }
                tries += 1;
                st.attempts_type1 += 1;
                st.bell_pairs_consumed += 2;
                st.access_log.push(ModeAccess { stage: Stage::Type1, modes: self.type1_modes.clone() });
                let c = self.sample_type1(&mut rng);
                let fragment = c.map(|c| c.pattern.clone()).unwrap_or_default();
                st.messages.push(ClassicalMessage { stage: Stage::Type1, pattern_fragment: fragment, success: c.is_some() });
                if let Some(c) = c {
                    break c;
                }
            };

            st.phase = Phase::AwaitType2;
            st.attempts_type2 += 1;
            st.access_log.push(ModeAccess { stage: Stage::Type2, modes: self.type2_modes.clone() });
            let probs: Vec<f64> = choice.type2.iter().map(|p| quadratic(&p.gram, &current).max(0.0)).collect();
            let p2 = &choice.type2[sample_index(&mut rng, &probs)];
            let branch_states: Vec<PhotonicState> = p2.branches.iter().map(|b| compose(&current, b)).collect();
            let weights: Vec<f64> = branch_states.iter().map(PhotonicState::norm_sqr).collect();
            let state = &branch_states[sample_index(&mut rng, &weights)];
            st.messages.push(ClassicalMessage { stage: Stage::Type2, pattern_fragment: p2.pattern.clone(), success: p2.success });

            if p2.success {
                st.access_log.push(ModeAccess { stage: Stage::Beam1, modes: vec![beam("1")] });
                let parts = partition_by_detection(state, &DetectionLayout { groups: vec![(1, beam("1"))], ..Default::default() });
                let keys: Vec<&DetectorPattern> = parts.keys().collect();
                let probs: Vec<f64> = parts.values().map(|p| p.probability).collect();
                let k = sample_index(&mut rng, &probs);
                let proj = &parts[keys[k]];
                st.messages.push(ClassicalMessage { stage: Stage::Beam1, pattern_fragment: keys[k].clone(), success: true });
                let correction = bob_correction(&st.messages)?;
                st.pending_correction = Some(correction.clone());
                let [a, d] = DetectionLayout::default().outputs;
                let mut rho = OutputDensityMatrix::zero();
                for b in &proj.branches {
                    rho.add(&OutputDensityMatrix::from_state(&correction.apply(&b.state), a, d)?);
                }
                st.pending_correction = None;
                st.phase = Phase::Done;
                return Ok(TrialOutcome { fidelity: Some(rho.fidelity(&target)?), state: st });
            }

            if !policy.recovery || st.attempts_type2 >= policy.max_type2_attempts {
                st.phase = Phase::Aborted;
                return Ok(TrialOutcome { state: st, fidelity: None });
            }
            st.phase = Phase::Recovering;
            st.recoveries += 1;
            let rho = beam1_density(state);
            let rho = apply_flip(rho / Complex64::new(rho.trace().re, 0.0), recovery_bit_flip(&p2.pattern));
            current = unravel(&rho, &mut rng)?;
        }
    }
}

/// Reduced polarization state of beam 1, unnormalized.
pub(crate) fn beam1_density(s: &PhotonicState) -> Matrix2<Complex64> {
    let one = beam("1");
    let mut groups: BTreeMap<OccupationConfig, [Complex64; 2]> = BTreeMap::new();
    for (cfg, a) in s.terms() {
        let pol = if cfg.photons_at(one, Polarization::V) == 1 { 1 } else { 0 };
        let (_, rest) = cfg.split(&[one].into_iter().collect());
        groups.entry(rest).or_default()[pol] += a;
    }
    let mut rho = Matrix2::zeros();
    for v in groups.values() {
        for i in 0..2 {
            for j in 0..2 {
                rho[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    rho
}

fn apply_flip(rho: Matrix2<Complex64>, flip: bool) -> Matrix2<Complex64> {
    if !flip {
        return rho;
    }
    let o = Complex64::default();
    let l = Complex64::new(1.0, 0.0);
    let x = Matrix2::new(o, l, l, o);
    x * rho * x
}

/// Samples a pure state from the eigen-decomposition of a 2×2 density matrix.
fn unravel<R: Rng>(rho: &Matrix2<Complex64>, rng: &mut R) -> Result<LogicalQubit> {
    let eig = rho.symmetric_eigen();
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let k = sample_index(rng, &weights);
    let v = eig.eigenvectors.column(k);
    LogicalQubit::normalized(v[0], v[1])
}

fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub state: ProtocolState,
    /// Fidelity of Bob's corrected output with the input encoding.
    pub fidelity: Option<f64>,
}

/// One trial on the ideal circuit.
pub fn run_protocol_trial(q: &LogicalQubit, policy: &RetryPolicy, seed: u64) -> Result<TrialOutcome> {
    ProtocolModel::ideal().run_trial(q, policy, seed)
}

/// Trials `seed, seed+1, …` in parallel; results are in trial order.
pub fn run_trials(model: &ProtocolModel, q: &LogicalQubit, policy: &RetryPolicy, seed: u64, trials: usize) -> Result<Vec<TrialOutcome>> {
    (0..trials as u64).into_par_iter().map(|i| model.run_trial(q, policy, seed.wrapping_add(i))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub successes: u64,
    pub ci95: [f64; 2],
}

impl RateEstimate {
    /// Wilson score interval at 95%.
    pub fn new(successes: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let z = 1.959963984540054;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        RateEstimate { rate: p, successes, ci95: [(centre - half).max(0.0), (centre + half).min(1.0)] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    pub trials: u64,
    pub eventual_success_rate: f64,
    pub single_shot_success_rate: f64,
    pub mean_bell_pairs: f64,
    pub eventual: RateEstimate,
    pub single_shot: RateEstimate,
    pub recovered_successes: u64,
    /// Among trials that entered recovery, the fraction that finished.
    pub recovery_success_rate: Option<f64>,
    pub mean_fidelity: Option<f64>,
    pub min_fidelity: Option<f64>,
}

pub fn aggregate(trials: &[TrialOutcome]) -> Result<RunStats> {
    if trials.is_empty() {
        return Err(Error::EmptyTrials);
    }
    let n = trials.len() as u64;
    let done: Vec<&TrialOutcome> = trials.iter().filter(|t| t.state.phase == Phase::Done).collect();
    let single = trials.iter().filter(|t| t.state.single_shot()).count() as u64;
    let fids: Vec<f64> = done.iter().filter_map(|t| t.fidelity).collect();
    let eventual = RateEstimate::new(done.len() as u64, n);
    let single_shot = RateEstimate::new(single, n);
    Ok(RunStats {
        trials: n,
        eventual_success_rate: eventual.rate,
        single_shot_success_rate: single_shot.rate,
        mean_bell_pairs: trials.iter().map(|t| t.state.bell_pairs_consumed as f64).sum::<f64>() / n as f64,
        eventual,
        single_shot,
        recovered_successes: done.iter().filter(|t| t.state.recoveries > 0).count() as u64,
        recovery_success_rate: {
            let entered = trials.iter().filter(|t| t.state.recoveries > 0).count();
            let finished = done.iter().filter(|t| t.state.recoveries > 0).count();
            (entered > 0).then(|| finished as f64 / entered as f64)
        },
        mean_fidelity: (!fids.is_empty()).then(|| fids.iter().sum::<f64>() / fids.len() as f64),
        min_fidelity: fids.iter().copied().reduce(f64::min),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TeleportReport {
    pub policy: RetryPolicy,
    pub mismatch: Option<MismatchParams>,
    pub seed: u64,
    pub stats: RunStats,
    /// Recovery re-encodes beam 1 by an idealized preparation.
    pub idealized_recovery: bool,
}

impl TeleportReport {
    pub fn new(policy: RetryPolicy, mismatch: Option<MismatchParams>, seed: u64, stats: RunStats) -> Self {
        TeleportReport { idealized_recovery: policy.recovery, policy, mismatch, seed, stats }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_probabilities() {
        let m = ProtocolModel::ideal();
        assert!((m.type1_success_probability() - 0.5).abs() < 1e-12);
        assert!((m.type1_failure_probability() - 0.5).abs() < 1e-12);
        let q = LogicalQubit::normalized(Complex64::new(0.3, -0.4), Complex64::new(0.8, 0.2)).unwrap();
        assert!((m.type2_success_probability(&q) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn failure_leaves_input_in_beam_one() {
        let q = LogicalQubit::normalized(Complex64::new(0.3, -0.4), Complex64::new(0.8, 0.2)).unwrap();
        let fails = ProtocolModel::ideal().type2_failures(&q);
        assert!(!fails.is_empty());
        for (_, _, _, rho) in fails {
            let fid = (q.alpha.conj() * (rho[(0, 0)] * q.alpha + rho[(0, 1)] * q.beta)
                + q.beta.conj() * (rho[(1, 0)] * q.alpha + rho[(1, 1)] * q.beta))
                .re;
            assert!((fid - 1.0).abs() < 1e-12, "{fid}");
        }
    }

    #[test]
    fn policy_bounds_checked() {
        assert_eq!(RetryPolicy::new(0, 1, false), Err(Error::InvalidPolicy));
        let bad = RetryPolicy { max_type1_attempts: 1, max_type2_attempts: 0, recovery: false };
        assert_eq!(run_protocol_trial(&LogicalQubit::plus(), &bad, 0).unwrap_err(), Error::InvalidPolicy);
    }

    #[test]
    fn aggregate_edges() {
        assert_eq!(aggregate(&[]).unwrap_err(), Error::EmptyTrials);
        let q = LogicalQubit::plus();
        let outs = run_trials(ProtocolModel::ideal(), &q, &RetryPolicy::unlimited(), 7, 50).unwrap();
        let s = aggregate(&outs).unwrap();
        assert_eq!(s.eventual_success_rate, 1.0);
        let aborted: Vec<TrialOutcome> = outs
            .iter()
            .cloned()
            .map(|mut t| {
                t.state.phase = Phase::Aborted;
                t.fidelity = None;
                t
            })
            .collect();
        assert_eq!(aggregate(&aborted).unwrap().eventual_success_rate, 0.0);
    }

    #[test]
    fn trials_are_reproducible() {
        let q = LogicalQubit::plus();
        let a = run_trials(ProtocolModel::ideal(), &q, &RetryPolicy::unlimited(), 99, 20).unwrap();
        let b = run_trials(ProtocolModel::ideal(), &q, &RetryPolicy::unlimited(), 99, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bob_uses_latest_successful_round() {
        let frag = |g: u8, pol: Polarization| {
            let mut p = DetectorPattern::default();
            p.fired.insert(crate::detection::DetectorId { group: g, pol }, 1);
            p
        };
        let mut p23 = frag(2, Polarization::V);
        p23.fired.extend(frag(3, Polarization::H).fired);
        let msgs = vec![
            ClassicalMessage { stage: Stage::Type1, pattern_fragment: DetectorPattern::default(), success: false },
            ClassicalMessage { stage: Stage::Type1, pattern_fragment: frag(4, Polarization::H), success: true },
            ClassicalMessage { stage: Stage::Type2, pattern_fragment: p23, success: true },
            ClassicalMessage { stage: Stage::Beam1, pattern_fragment: frag(1, Polarization::H), success: true },
        ];
        let c = bob_correction(&msgs).unwrap();
        let expect = correction_for(&"HVHH".parse::<crate::detection::PatternId>().unwrap().to_pattern(), GateMode::Identity, &DetectionLayout::default()).unwrap();
        assert_eq!(c, expect);
    }
}
