//! Passive linear-optical elements acting on [`PhotonicState`]s.
//!
//! Every element is a substitution on creation operators: each photon in an
//! affected mode is replaced by a superposition of output photons, with the
//! distinguishability tag carried along unchanged.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::photonic::{ModeKey, PhotonicState, Polarization, SpatialMode};

/// 2×2 matrix acting on (H, V) amplitudes; column j is the image of basis j.
pub type PolarizationMatrix = [[Complex64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Z,
}

/// Phase conventions of the elements. The defaults are the ones the circuit
/// is built on; the alternatives exist so regression checks can show they
/// are load-bearing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conventions {
    /// Factor picked up by a vertically polarized photon on reflection.
    pub pbs_reflection_phase: Complex64,
    /// Factor on V of the quarter-wave plate at 0°.
    pub qwp_v_phase: Complex64,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            pbs_reflection_phase: Complex64::new(1.0, 0.0),
            qwp_v_phase: Complex64::new(0.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementSpec {
    /// H at `in1` → `out1`, H at `in2` → `out2`, V at `in1` → `out2`, V at `in2` → `out1`.
    Pbs { in1: SpatialMode, in2: SpatialMode, out1: SpatialMode, out2: SpatialMode },
    /// Half-wave plate at 22.5°, i.e. a Hadamard on polarization.
    Hwp22_5(SpatialMode),
    /// Quarter-wave plate at 0°, the component-qubit Z₉₀.
    Qwp0(SpatialMode),
    PauliX(SpatialMode),
    PauliZ(SpatialMode),
}

impl ElementSpec {
    pub fn pbs(in1: &str, in2: &str, out1: &str, out2: &str) -> Self {
        ElementSpec::Pbs {
            in1: SpatialMode::named(in1),
            in2: SpatialMode::named(in2),
            out1: SpatialMode::named(out1),
            out2: SpatialMode::named(out2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ElementSpec::Pbs { in1, in2, out1, out2 } = self {
            if in1 == in2 {
                return Err(Error::Precondition(format!("PBS input modes coincide ({in1})")));
            }
            if out1 == out2 {
                return Err(Error::Precondition(format!("PBS output modes coincide ({out1})")));
            }
        }
        Ok(())
    }

    /// Spatial modes the element reads from or writes to.
    pub fn modes(&self) -> BTreeSet<SpatialMode> {
        match *self {
            ElementSpec::Pbs { in1, in2, out1, out2 } => [in1, in2, out1, out2].into_iter().collect(),
            ElementSpec::Hwp22_5(m) | ElementSpec::Qwp0(m) | ElementSpec::PauliX(m) | ElementSpec::PauliZ(m) => {
                [m].into_iter().collect()
            }
        }
    }
}

pub fn hadamard_matrix() -> PolarizationMatrix {
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[r, r], [r, -r]]
}

fn pauli_matrix(which: Pauli) -> PolarizationMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    match which {
        Pauli::X => [[o, l], [l, o]],
        Pauli::Z => [[l, o], [o, -l]],
    }
}

/// Applies a polarization unitary to every photon in mode `m`.
pub fn apply_polarization_unitary(s: &PhotonicState, m: SpatialMode, u: &PolarizationMatrix) -> PhotonicState {
    s.substitute(|k| {
        if k.mode != m {
            return None;
        }
        let col = k.pol.bit() as usize;
        let mut img: SmallVec<[(ModeKey, Complex64); 2]> = SmallVec::new();
        for row in 0..2 {
            let c = u[row][col];
            if c != Complex64::default() {
                img.push((ModeKey::tagged(m, Polarization::from_bit(row as u8), k.tag), c));
            }
        }
        Some(img)
    })
}

pub fn apply_pbs(
    s: &PhotonicState,
    in1: SpatialMode,
    in2: SpatialMode,
    out1: SpatialMode,
    out2: SpatialMode,
) -> Result<PhotonicState> {
    apply_pbs_with(s, in1, in2, out1, out2, &Conventions::default())
}

pub fn apply_pbs_with(
    s: &PhotonicState,
    in1: SpatialMode,
    in2: SpatialMode,
    out1: SpatialMode,
    out2: SpatialMode,
    conv: &Conventions,
) -> Result<PhotonicState> {
    ElementSpec::Pbs { in1, in2, out1, out2 }.validate()?;
    let inputs = [in1, in2];
    for out in [out1, out2] {
        if !inputs.contains(&out) && s.modes().contains(&out) {
            return Err(Error::Precondition(format!("PBS output mode {out} is already occupied")));
        }
    }
    let one = Complex64::new(1.0, 0.0);
    let refl = conv.pbs_reflection_phase;
    Ok(s.substitute(|k| {
        let (mode, c) = match (k.pol, k.mode) {
            (Polarization::H, m) if m == in1 => (out1, one),
            (Polarization::H, m) if m == in2 => (out2, one),
            (Polarization::V, m) if m == in1 => (out2, refl),
            (Polarization::V, m) if m == in2 => (out1, refl),
            _ => return None,
        };
        Some(smallvec![(ModeKey::tagged(mode, k.pol, k.tag), c)])
    }))
}

/// H → (H+V)/√2, V → (H−V)/√2.
pub fn apply_hwp22_5(s: &PhotonicState, m: SpatialMode) -> PhotonicState {
    apply_polarization_unitary(s, m, &hadamard_matrix())
}

/// H → H, V → i·V.
pub fn apply_qwp0(s: &PhotonicState, m: SpatialMode) -> PhotonicState {
    apply_qwp0_with(s, m, &Conventions::default())
}

pub fn apply_qwp0_with(s: &PhotonicState, m: SpatialMode, conv: &Conventions) -> PhotonicState {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    apply_polarization_unitary(s, m, &[[l, o], [o, conv.qwp_v_phase]])
}

pub fn apply_pauli(s: &PhotonicState, m: SpatialMode, which: Pauli) -> PhotonicState {
    apply_polarization_unitary(s, m, &pauli_matrix(which))
}

pub fn apply_element(s: &PhotonicState, e: &ElementSpec) -> Result<PhotonicState> {
    apply_element_with(s, e, &Conventions::default())
}

pub fn apply_element_with(s: &PhotonicState, e: &ElementSpec, conv: &Conventions) -> Result<PhotonicState> {
    Ok(match *e {
        ElementSpec::Pbs { in1, in2, out1, out2 } => apply_pbs_with(s, in1, in2, out1, out2, conv)?,
        ElementSpec::Hwp22_5(m) => apply_hwp22_5(s, m),
        ElementSpec::Qwp0(m) => apply_qwp0_with(s, m, conv),
        ElementSpec::PauliX(m) => apply_pauli(s, m, Pauli::X),
        ElementSpec::PauliZ(m) => apply_pauli(s, m, Pauli::Z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonic::{inner_product, tensor, DistTag, OccupationConfig};
    use proptest::prelude::*;

    fn m(l: &str) -> SpatialMode {
        SpatialMode::named(l)
    }

    fn one(l: &str, p: Polarization) -> PhotonicState {
        PhotonicState::photon(m(l), p)
    }

    fn approx_eq(a: &PhotonicState, b: &PhotonicState, tol: f64) -> bool {
        let diff = a.plus(&b.scaled(Complex64::new(-1.0, 0.0)));
        diff.norm() < tol
    }

    #[test]
    fn pbs_transmits_h_and_reflects_v() {
        let h = apply_pbs(&one("b", Polarization::H), m("b"), m("c"), m("4"), m("2'")).unwrap();
        assert_eq!(h, one("4", Polarization::H));
        let v = apply_pbs(&one("b", Polarization::V), m("b"), m("c"), m("4"), m("2'")).unwrap();
        assert_eq!(v, one("2'", Polarization::V));
    }

    #[test]
    fn pbs_rejects_occupied_output() {
        let s = tensor(&one("b", Polarization::H), &one("4", Polarization::H)).unwrap();
        assert!(apply_pbs(&s, m("b"), m("c"), m("4"), m("2'")).is_err());
        assert!(apply_pbs(&s, m("b"), m("b"), m("4"), m("2'")).is_err());
    }

    #[test]
    fn hadamard_images() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let h = apply_hwp22_5(&one("m", Polarization::H), m("m"));
        let v = apply_hwp22_5(&one("m", Polarization::V), m("m"));
        let ch = OccupationConfig::from_keys([ModeKey::new(m("m"), Polarization::H)]);
        let cv = OccupationConfig::from_keys([ModeKey::new(m("m"), Polarization::V)]);
        assert!((h.amplitude(&ch).re - r).abs() < 1e-15 && (h.amplitude(&cv).re - r).abs() < 1e-15);
        assert!((v.amplitude(&ch).re - r).abs() < 1e-15 && (v.amplitude(&cv).re + r).abs() < 1e-15);
    }

    #[test]
    fn qwp_and_pauli_images() {
        assert_eq!(apply_qwp0(&one("e", Polarization::H), m("e")), one("e", Polarization::H));
        assert_eq!(
            apply_qwp0(&one("e", Polarization::V), m("e")),
            one("e", Polarization::V).scaled(Complex64::new(0.0, 1.0))
        );
        assert_eq!(apply_pauli(&one("a", Polarization::H), m("a"), Pauli::X), one("a", Polarization::V));
        assert_eq!(
            apply_pauli(&one("a", Polarization::V), m("a"), Pauli::Z),
            one("a", Polarization::V).scaled(Complex64::new(-1.0, 0.0))
        );
    }

    #[test]
    fn two_photons_through_hadamard_bunch() {
        // |H,V⟩ in one mode → (|2H⟩ − |2V⟩)/√2 under a Hadamard
        let s = tensor(&one("x", Polarization::H), &one("x", Polarization::V));
        assert!(s.is_err());
        let mut cfg = OccupationConfig::vacuum();
        cfg.add(ModeKey::new(m("x"), Polarization::H), 1);
        cfg.add(ModeKey::new(m("x"), Polarization::V), 1);
        let out = apply_hwp22_5(&PhotonicState::basis(cfg.clone()), m("x"));
        assert_eq!(out.amplitude(&cfg), Complex64::default());
        assert_eq!(out.len(), 2);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
    }

    fn arb_state() -> impl Strategy<Value = PhotonicState> {
        let keys = [
            ModeKey::new(m("a"), Polarization::H),
            ModeKey::new(m("a"), Polarization::V),
            ModeKey::new(m("b"), Polarization::H),
            ModeKey::tagged(m("b"), Polarization::V, DistTag::Prime),
            ModeKey::tagged(m("c"), Polarization::H, DistTag::DoublePrime),
            ModeKey::new(m("c"), Polarization::V),
        ];
        prop::collection::vec((prop::collection::vec(0usize..6, 1..4), -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(
            move |terms| {
                let s = PhotonicState::from_terms(terms.into_iter().map(|(idx, re, im)| {
                    (OccupationConfig::from_keys(idx.into_iter().map(|i| keys[i])), Complex64::new(re, im))
                }));
                let n = s.norm();
                if n == 0.0 {
                    PhotonicState::photon(m("a"), Polarization::H)
                } else {
                    s.scaled(Complex64::new(1.0 / n, 0.0))
                }
            },
        )
    }

    fn swap_tags(s: &PhotonicState) -> PhotonicState {
        s.map_keys(|k| ModeKey {
            tag: match k.tag {
                DistTag::Matched => DistTag::Prime,
                DistTag::Prime => DistTag::DoublePrime,
                DistTag::DoublePrime => DistTag::Matched,
            },
            ..k
        })
    }

    proptest! {
        #[test]
        fn elements_preserve_norm(s in arb_state()) {
            let elements = [
                ElementSpec::pbs("a", "b", "x", "y"),
                ElementSpec::Hwp22_5(m("a")),
                ElementSpec::Qwp0(m("b")),
                ElementSpec::PauliX(m("c")),
                ElementSpec::PauliZ(m("a")),
            ];
            for e in &elements {
                let out = apply_element(&s, e).unwrap();
                prop_assert!((out.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
            }
        }

        #[test]
        fn elements_commute_with_tag_relabeling(s in arb_state()) {
            for e in [ElementSpec::pbs("a", "c", "x", "y"), ElementSpec::Hwp22_5(m("b")), ElementSpec::Qwp0(m("a"))] {
                let lhs = swap_tags(&apply_element(&s, &e).unwrap());
                let rhs = apply_element(&swap_tags(&s), &e).unwrap();
                prop_assert!(approx_eq(&lhs, &rhs, 1e-13));
            }
        }

        #[test]
        fn pbs_conserves_photons_per_tag(s in arb_state()) {
            let out = apply_pbs(&s, m("a"), m("b"), m("x"), m("y")).unwrap();
            let per_tag = |st: &PhotonicState| {
                let mut w = [0.0f64; 3];
                for (cfg, a) in st.terms() {
                    for (k, n) in cfg.entries() {
                        w[k.tag as usize] += a.norm_sqr() * n as f64;
                    }
                }
                w
            };
            let (a, b) = (per_tag(&s), per_tag(&out));
            for i in 0..3 {
                prop_assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn involutions(s in arb_state()) {
            for e in [ElementSpec::Hwp22_5(m("a")), ElementSpec::PauliX(m("b")), ElementSpec::PauliZ(m("c"))] {
                let twice = apply_element(&apply_element(&s, &e).unwrap(), &e).unwrap();
                prop_assert!(approx_eq(&twice, &s, 1e-14));
                prop_assert!((inner_product(&twice, &s).re - s.norm_sqr()).abs() < 1e-13);
            }
        }
    }
}
