//! Parity-encoded logical qubits.
//!
//! A logical state α|0⟩+β|1⟩ spread over n photons is α|0⟩⁽ⁿ⁾+β|1⟩⁽ⁿ⁾,
//! where |0⟩⁽ⁿ⁾ (|1⟩⁽ⁿ⁾) is the equal superposition of all n-bit strings of
//! even (odd) weight, with H ≡ 0 and V ≡ 1.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{apply_hwp22_5, apply_pauli, apply_polarization_unitary, Pauli};
use crate::photonic::{normalize, inner_product, ModeKey, OccupationConfig, PhotonicState, Polarization, SpatialMode};

const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalQubit {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl LogicalQubit {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::UnnormalizedQubit(n));
        }
        Ok(LogicalQubit { alpha, beta })
    }

    /// Rescales to unit norm.
    pub fn normalized(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroState);
        }
        Ok(LogicalQubit { alpha: alpha / n, beta: beta / n })
    }

    pub fn real(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Complex64::new(alpha, 0.0), Complex64::new(beta, 0.0))
    }

    pub fn zero() -> Self {
        LogicalQubit { alpha: Complex64::new(1.0, 0.0), beta: Complex64::default() }
    }

    pub fn one() -> Self {
        LogicalQubit { alpha: Complex64::default(), beta: Complex64::new(1.0, 0.0) }
    }

    pub fn plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        LogicalQubit { alpha: Complex64::new(r, 0.0), beta: Complex64::new(r, 0.0) }
    }

    /// Haar-random pure state.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let theta = (1.0 - 2.0 * rng.gen::<f64>()).acos();
        let phi = rng.gen::<f64>() * std::f64::consts::TAU;
        BlochAngles { theta, phi }.to_qubit()
    }

    pub fn bit_flipped(&self) -> Self {
        LogicalQubit { alpha: self.beta, beta: self.alpha }
    }

    /// α β*, the coherence entering the mismatch formulas.
    pub fn coherence(&self) -> Complex64 {
        self.alpha * self.beta.conj()
    }

    /// |⟨self|other⟩|².
    pub fn overlap(&self, other: &LogicalQubit) -> f64 {
        (self.alpha.conj() * other.alpha + self.beta.conj() * other.beta).norm_sqr()
    }

    pub fn bloch(&self) -> BlochAngles {
        BlochAngles::from_qubit(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    /// α = cos(θ/2), β = e^{iφ} sin(θ/2).
    pub fn to_qubit(self) -> LogicalQubit {
        LogicalQubit {
            alpha: Complex64::new((self.theta / 2.0).cos(), 0.0),
            beta: Complex64::from_polar((self.theta / 2.0).sin(), self.phi),
        }
    }

    /// Inverse of [`to_qubit`](Self::to_qubit) after removing the phase of α.
    pub fn from_qubit(q: &LogicalQubit) -> Self {
        let theta = 2.0 * q.beta.norm().atan2(q.alpha.norm());
        let phi = if q.beta.norm() < 1e-15 {
            0.0
        } else {
            let rel = q.beta * q.alpha.conj();
            let raw = if q.alpha.norm() < 1e-15 { q.beta.arg() } else { rel.arg() };
            raw.rem_euclid(std::f64::consts::TAU)
        };
        BlochAngles { theta, phi }
    }
}

/// |0⟩⁽ⁿ⁾ or |1⟩⁽ⁿ⁾ on the given modes.
pub fn parity_basis(odd: bool, modes: &[SpatialMode]) -> Result<PhotonicState> {
    let n = modes.len();
    if n == 0 {
        return Err(Error::InvalidEncodingSize);
    }
    let amp = Complex64::new(2f64.powf(-((n - 1) as f64) / 2.0), 0.0);
    let mut terms = Vec::with_capacity(1 << (n - 1));
    for bits in 0u32..(1 << n) {
        if (bits.count_ones() % 2 == 1) != odd {
            continue;
        }
        let cfg = OccupationConfig::from_keys(
            modes
                .iter()
                .enumerate()
                .map(|(i, m)| ModeKey::new(*m, Polarization::from_bit(((bits >> i) & 1) as u8))),
        );
        terms.push((cfg, amp));
    }
    Ok(PhotonicState::from_terms(terms))
}

/// α|0⟩⁽ⁿ⁾ + β|1⟩⁽ⁿ⁾ with component qubit i on `modes[i]`.
pub fn parity_state(q: &LogicalQubit, n: usize, modes: &[SpatialMode]) -> Result<PhotonicState> {
    if n < 1 || modes.len() != n {
        return Err(Error::InvalidEncodingSize);
    }
    let mut distinct = modes.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != n {
        return Err(Error::OverlappingModes(format!("{modes:?}")));
    }
    let zero = parity_basis(false, modes)?;
    let one = parity_basis(true, modes)?;
    Ok(PhotonicState::linear_combination([(q.alpha, &zero), (q.beta, &one)]))
}

/// (|HH⟩ + |VV⟩)/√2 on (m1, m2).
pub fn bell_phi_plus(m1: SpatialMode, m2: SpatialMode) -> Result<PhotonicState> {
    if m1 == m2 {
        return Err(Error::OverlappingModes(m1.to_string()));
    }
    parity_state(&LogicalQubit::zero(), 2, &[m1, m2])
}

/// Builds A|HH⟩ + B|VV⟩ with A = (α+β)/√2, B = (α−β)/√2 and rotates both
/// photons by a Hadamard, which yields the two-photon parity encoding.
pub fn prepare_via_nonmaximal(q: &LogicalQubit, m1: SpatialMode, m2: SpatialMode) -> Result<PhotonicState> {
    if m1 == m2 {
        return Err(Error::OverlappingModes(m1.to_string()));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let a = (q.alpha + q.beta) * r;
    let b = (q.alpha - q.beta) * r;
    let hh = OccupationConfig::from_keys([ModeKey::new(m1, Polarization::H), ModeKey::new(m2, Polarization::H)]);
    let vv = OccupationConfig::from_keys([ModeKey::new(m1, Polarization::V), ModeKey::new(m2, Polarization::V)]);
    let s = PhotonicState::from_terms([(hh, a), (vv, b)]);
    Ok(apply_hwp22_5(&apply_hwp22_5(&s, m1), m2))
}

/// Logical amplitudes (⟨0⁽ⁿ⁾|s⟩, ⟨1⁽ⁿ⁾|s⟩) of a state on `modes`, erroring
/// when `s` has weight outside the code space.
pub fn decode(s: &PhotonicState, modes: &[SpatialMode]) -> Result<LogicalQubit> {
    let zero = parity_basis(false, modes)?;
    let one = parity_basis(true, modes)?;
    let alpha = inner_product(&zero, s);
    let beta = inner_product(&one, s);
    let inside = alpha.norm_sqr() + beta.norm_sqr();
    let total = s.norm_sqr();
    if total == 0.0 {
        return Err(Error::ZeroState);
    }
    if (inside / total - 1.0).abs() > 1e-9 {
        return Err(Error::NotParityEncoded(inside / total));
    }
    LogicalQubit::normalized(alpha, beta)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Collapse {
    pub probability: f64,
    /// Normalized post-measurement state on the remaining modes, uncorrected.
    pub state: PhotonicState,
    /// True when the outcome was V and a bit flip on one remaining qubit is owed.
    pub bit_flip_owed: bool,
}

/// Measures component qubit `k` in the H/V basis and returns the raw
/// post-measurement state of the other n−1 component qubits.
pub fn collapse_component(
    s: &PhotonicState,
    modes: &[SpatialMode],
    k: usize,
    outcome: Polarization,
) -> Result<Collapse> {
    if modes.len() < 2 || k >= modes.len() {
        return Err(Error::InvalidEncodingSize);
    }
    decode(s, modes)?;
    let target = ModeKey::new(modes[k], outcome);
    let kept = s.filter(|cfg| cfg.count(&target) == 1);
    let probability = kept.norm_sqr() / s.norm_sqr();
    let mut reduced = PhotonicState::zero();
    for (cfg, a) in kept.terms() {
        let mut c = cfg.clone();
        c.remove_one(&target);
        reduced.add_amplitude(c, *a);
    }
    Ok(Collapse { probability, state: normalize(&reduced)?, bit_flip_owed: outcome == Polarization::V })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LogicalGate {
    /// cos(θ/2) I − i sin(θ/2) σx on one component qubit.
    XTheta(f64),
    /// σz on every component qubit.
    Z,
}

pub fn logical_gate(s: &PhotonicState, modes: &[SpatialMode], gate: LogicalGate) -> Result<PhotonicState> {
    if modes.is_empty() {
        return Err(Error::InvalidEncodingSize);
    }
    Ok(match gate {
        LogicalGate::XTheta(theta) => {
            let c = Complex64::new((theta / 2.0).cos(), 0.0);
            let ms = Complex64::new(0.0, -(theta / 2.0).sin());
            apply_polarization_unitary(s, modes[0], &[[c, ms], [ms, c]])
        }
        LogicalGate::Z => modes.iter().fold(s.clone(), |acc, m| apply_pauli(&acc, *m, Pauli::Z)),
    })
}

/// The same gate on bare logical amplitudes.
pub fn logical_gate_on_qubit(q: &LogicalQubit, gate: LogicalGate) -> LogicalQubit {
    match gate {
        LogicalGate::XTheta(theta) => {
            let c = Complex64::new((theta / 2.0).cos(), 0.0);
            let ms = Complex64::new(0.0, -(theta / 2.0).sin());
            LogicalQubit { alpha: c * q.alpha + ms * q.beta, beta: ms * q.alpha + c * q.beta }
        }
        LogicalGate::Z => LogicalQubit { alpha: q.alpha, beta: -q.beta },
    }
}
