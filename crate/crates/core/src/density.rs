//! Two-photon polarization density matrices on the output modes.

use std::collections::BTreeMap;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::Pauli;
use crate::parity::{parity_basis, parity_state, LogicalQubit};
use crate::photonic::{DistTag, PhotonicState, Polarization, SpatialMode};

/// Unnormalized 4×4 matrix on {HH, HV, VH, VV} of an ordered mode pair.
/// The trace is the probability of the event that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputDensityMatrix {
    pub entries: Matrix4<Complex64>,
}

impl Default for OutputDensityMatrix {
    fn default() -> Self {
        Self::zero()
    }
}

fn index(p1: Polarization, p2: Polarization) -> usize {
    (p1.bit() as usize) * 2 + p2.bit() as usize
}

impl OutputDensityMatrix {
    pub fn zero() -> Self {
        OutputDensityMatrix { entries: Matrix4::zeros() }
    }

    /// |v⟩⟨v| without normalizing `v`.
    pub fn from_vector(v: &Vector4<Complex64>) -> Self {
        OutputDensityMatrix { entries: v * v.adjoint() }
    }

    /// Amplitude vector of a state that holds exactly one photon in each of
    /// `first`, `second` and nothing else, grouped by the photons' tags.
    /// Each group is a separate (orthogonal) pure component.
    pub fn components(
        s: &PhotonicState,
        first: SpatialMode,
        second: SpatialMode,
    ) -> Result<Vec<Vector4<Complex64>>> {
        let mut groups: BTreeMap<(DistTag, DistTag), Vector4<Complex64>> = BTreeMap::new();
        for (cfg, a) in s.terms() {
            if cfg.total_photons() != 2 || cfg.photons_in(first) != 1 || cfg.photons_in(second) != 1 {
                return Err(Error::Precondition(format!(
                    "state term {cfg} is outside the one-photon-per-output subspace"
                )));
            }
            let k1 = cfg.entries().find(|(k, _)| k.mode == first).unwrap().0;
            let k2 = cfg.entries().find(|(k, _)| k.mode == second).unwrap().0;
            groups.entry((k1.tag, k2.tag)).or_insert_with(Vector4::zeros)[index(k1.pol, k2.pol)] += a;
        }
        Ok(groups.into_values().collect())
    }

    /// Incoherent sum over tag groups of a (possibly unnormalized) state.
    pub fn from_state(s: &PhotonicState, first: SpatialMode, second: SpatialMode) -> Result<Self> {
        let mut out = Self::zero();
        for v in Self::components(s, first, second)? {
            out.entries += v * v.adjoint();
        }
        Ok(out)
    }

    pub fn pure_vector(s: &PhotonicState, first: SpatialMode, second: SpatialMode) -> Result<Vector4<Complex64>> {
        let comps = Self::components(s, first, second)?;
        match comps.len() {
            1 => Ok(comps[0]),
            0 => Ok(Vector4::zeros()),
            n => Err(Error::Precondition(format!("state has {n} distinguishable components"))),
        }
    }

    pub fn add(&mut self, other: &OutputDensityMatrix) {
        self.entries += other.entries;
    }

    pub fn scaled(&self, c: f64) -> Self {
        OutputDensityMatrix { entries: self.entries.map(|x| x * c) }
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn expectation(&self, psi: &Vector4<Complex64>) -> f64 {
        (psi.adjoint() * self.entries * psi)[(0, 0)].re
    }

    /// ⟨ψ|ρ|ψ⟩ / tr ρ for a unit vector ψ.
    pub fn fidelity(&self, psi: &Vector4<Complex64>) -> Result<f64> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(self.expectation(psi) / tr)
    }

    pub fn max_abs_diff(&self, other: &OutputDensityMatrix) -> f64 {
        (self.entries - other.entries).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.entries - self.entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.entries + self.entries.adjoint()).map(|z| z * 0.5);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// U ρ U† with U a Pauli on the first or second photon.
    pub fn conjugate_by_pauli(&self, on_second: bool, which: Pauli) -> Self {
        let u = pauli_on(on_second, which);
        OutputDensityMatrix { entries: u * self.entries * u.adjoint() }
    }

    /// Rows of `[re, im]` pairs, for reports.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..4)
            .map(|r| (0..4).map(|c| [self.entries[(r, c)].re, self.entries[(r, c)].im]).collect())
            .collect()
    }
}

fn pauli_on(on_second: bool, which: Pauli) -> Matrix4<Complex64> {
    let mut m = Matrix4::zeros();
    for col in 0..4 {
        let (b1, b2) = (col / 2, col % 2);
        let bit = if on_second { b2 } else { b1 };
        let (row, sign) = match which {
            Pauli::X => {
                let flipped = if on_second { col ^ 1 } else { col ^ 2 };
                (flipped, 1.0)
            }
            Pauli::Z => (col, if bit == 1 { -1.0 } else { 1.0 }),
        };
        m[(row, col)] = Complex64::new(sign, 0.0);
    }
    m
}

/// Amplitudes of the two-photon parity encoding of `q` on the pair basis.
pub fn encoded_vector(q: &LogicalQubit) -> Vector4<Complex64> {
    let first = SpatialMode::named("a");
    let second = SpatialMode::named("d");
    let s = parity_state(q, 2, &[first, second]).expect("two distinct modes");
    OutputDensityMatrix::pure_vector(&s, first, second).expect("pure two-photon state")
}

/// |0⟩⁽²⁾ (`odd = false`) or |1⟩⁽²⁾ on the pair basis.
pub fn parity_vector(odd: bool) -> Vector4<Complex64> {
    let first = SpatialMode::named("a");
    let second = SpatialMode::named("d");
    let s = parity_basis(odd, &[first, second]).expect("two modes");
    OutputDensityMatrix::pure_vector(&s, first, second).expect("pure two-photon state")
}

/// |±⟩|±⟩ on the pair basis.
pub fn diagonal_product_vector(minus: bool) -> Vector4<Complex64> {
    let s = if minus { -0.5 } else { 0.5 };
    Vector4::new(
        Complex64::new(0.5, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(0.5, 0.0),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityReport {
    pub basis: [String; 4],
    pub trace: f64,
    pub rows: Vec<Vec<[f64; 2]>>,
}

impl From<&OutputDensityMatrix> for DensityReport {
    fn from(rho: &OutputDensityMatrix) -> Self {
        DensityReport {
            basis: ["HH".into(), "HV".into(), "VH".into(), "VV".into()],
            trace: rho.trace(),
            rows: rho.to_rows(),
        }
    }
}
