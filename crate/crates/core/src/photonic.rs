//! Sparse bosonic representation of multi-photon polarization states.
//!
//! A [`PhotonicState`] is a map from occupation configurations to complex
//! amplitudes. Every configuration is a normalized Fock basis vector, so two
//! distinct configurations are orthogonal and the squared norm of a state is
//! the plain sum of squared amplitude magnitudes.
//!
//! Photons carry three labels: the spatial beam they travel in, their
//! polarization, and a distinguishability tag. Photons with different tags
//! never interfere; the tags model mode-mismatch in a single extra degree of
//! freedom.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Amplitudes with magnitude below this are dropped after every operation.
pub const DEFAULT_PRUNE: f64 = 1e-14;

const MODE_LABEL_CAPACITY: usize = 8;

/// A labelled beam such as `a`, `2'` or a generated label.
///
/// Labels are short ASCII strings stored inline so the type is `Copy`; the
/// derived ordering is the lexicographic ordering of the label.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpatialMode([u8; MODE_LABEL_CAPACITY]);

impl SpatialMode {
    pub fn new(label: &str) -> Result<Self> {
        let bytes = label.as_bytes();
        if bytes.is_empty()
            || bytes.len() > MODE_LABEL_CAPACITY
            || !label.is_ascii()
            || bytes.iter().any(|b| b.is_ascii_whitespace() || *b == 0)
        {
            return Err(Error::InvalidModeLabel(label.to_string()));
        }
        let mut buf = [0u8; MODE_LABEL_CAPACITY];
        buf[..bytes.len()].copy_from_slice(bytes);
        Ok(SpatialMode(buf))
    }

    /// Panics on an invalid label; intended for the fixed labels of a circuit.
    pub fn named(label: &str) -> Self {
        Self::new(label).expect("invalid spatial mode label")
    }

    pub fn label(&self) -> &str {
        let len = self.0.iter().position(|b| *b == 0).unwrap_or(MODE_LABEL_CAPACITY);
        // constructed from ASCII only
        std::str::from_utf8(&self.0[..len]).unwrap()
    }
}

impl fmt::Debug for SpatialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpatialMode({})", self.label())
    }
}

impl fmt::Display for SpatialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for SpatialMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for SpatialMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SpatialMode::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Computational basis of a polarization qubit: `H` is |0⟩, `V` is |1⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
        }
    }
}

/// Distinguishability label. Photons with different tags have zero overlap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DistTag {
    #[default]
    Matched,
    Prime,
    DoublePrime,
}

impl DistTag {
    fn suffix(self) -> &'static str {
        match self {
            DistTag::Matched => "",
            DistTag::Prime => "'",
            DistTag::DoublePrime => "''",
        }
    }
}

/// One bosonic single-photon mode: beam × polarization × tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeKey {
    pub mode: SpatialMode,
    pub pol: Polarization,
    pub tag: DistTag,
}

impl ModeKey {
    pub fn new(mode: SpatialMode, pol: Polarization) -> Self {
        ModeKey { mode, pol, tag: DistTag::Matched }
    }

    pub fn tagged(mode: SpatialMode, pol: Polarization, tag: DistTag) -> Self {
        ModeKey { mode, pol, tag }
    }
}

impl fmt::Display for ModeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}{}", self.pol.as_char(), self.mode, self.tag.suffix())
    }
}

/// Occupation numbers of the bosonic modes, sorted by [`ModeKey`], with no
/// zero entries. Equal configurations compare equal.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationConfig {
    counts: SmallVec<[(ModeKey, u8); 8]>,
}

impl OccupationConfig {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn from_keys<I: IntoIterator<Item = ModeKey>>(keys: I) -> Self {
        let mut cfg = Self::vacuum();
        for k in keys {
            cfg.add(k, 1);
        }
        cfg
    }

    pub fn add(&mut self, key: ModeKey, n: u8) {
        if n == 0 {
            return;
        }
        match self.counts.binary_search_by(|(k, _)| k.cmp(&key)) {
            Ok(i) => self.counts[i].1 += n,
            Err(i) => self.counts.insert(i, (key, n)),
        }
    }

    /// Removes one photon from `key`; returns the previous count.
    pub fn remove_one(&mut self, key: &ModeKey) -> u8 {
        match self.counts.binary_search_by(|(k, _)| k.cmp(key)) {
            Ok(i) => {
                let n = self.counts[i].1;
                if n == 1 {
                    self.counts.remove(i);
                } else {
                    self.counts[i].1 -= 1;
                }
                n
            }
            Err(_) => 0,
        }
    }

    pub fn count(&self, key: &ModeKey) -> u8 {
        self.counts
            .binary_search_by(|(k, _)| k.cmp(key))
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (ModeKey, u8)> + '_ {
        self.counts.iter().copied()
    }

    pub fn total_photons(&self) -> u32 {
        self.counts.iter().map(|(_, n)| *n as u32).sum()
    }

    /// Photons in a spatial mode, summed over polarization and tag.
    pub fn photons_in(&self, mode: SpatialMode) -> u32 {
        self.counts
            .iter()
            .filter(|(k, _)| k.mode == mode)
            .map(|(_, n)| *n as u32)
            .sum()
    }

    /// Photons in a spatial mode with a given polarization, summed over tags.
    pub fn photons_at(&self, mode: SpatialMode, pol: Polarization) -> u32 {
        self.counts
            .iter()
            .filter(|(k, _)| k.mode == mode && k.pol == pol)
            .map(|(_, n)| *n as u32)
            .sum()
    }

    pub fn modes(&self) -> BTreeSet<SpatialMode> {
        self.counts.iter().map(|(k, _)| k.mode).collect()
    }

    /// Splits into the part living in `modes` and the rest.
    pub fn split(&self, modes: &BTreeSet<SpatialMode>) -> (OccupationConfig, OccupationConfig) {
        let mut inside = OccupationConfig::vacuum();
        let mut outside = OccupationConfig::vacuum();
        for (k, n) in self.entries() {
            if modes.contains(&k.mode) {
                inside.counts.push((k, n));
            } else {
                outside.counts.push((k, n));
            }
        }
        (inside, outside)
    }

    pub fn merged(&self, other: &OccupationConfig) -> OccupationConfig {
        let mut out = self.clone();
        for (k, n) in other.entries() {
            out.add(k, n);
        }
        out
    }

    /// Applies `f` to every key, merging keys that collide.
    pub fn map_keys(&self, mut f: impl FnMut(ModeKey) -> ModeKey) -> OccupationConfig {
        let mut out = OccupationConfig::vacuum();
        for (k, n) in self.entries() {
            out.add(f(k), n);
        }
        out
    }

    /// Π n! over all occupied modes.
    pub(crate) fn factorial_product(&self) -> f64 {
        self.counts
            .iter()
            .map(|(_, n)| (1..=*n as u32).map(f64::from).product::<f64>())
            .product()
    }
}

impl fmt::Display for OccupationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        for (i, (k, n)) in self.entries().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}")?;
            if n > 1 {
                write!(f, "^{n}")?;
            }
        }
        f.write_str("⟩")
    }
}

/// Sparse superposition of Fock configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonicState {
    terms: BTreeMap<OccupationConfig, Complex64>,
    prune: f64,
}

impl Default for PhotonicState {
    fn default() -> Self {
        Self::zero()
    }
}

impl PhotonicState {
    /// The zero vector (no terms at all).
    pub fn zero() -> Self {
        PhotonicState { terms: BTreeMap::new(), prune: DEFAULT_PRUNE }
    }

    /// Vacuum on no modes; the identity for [`tensor`].
    pub fn vacuum() -> Self {
        Self::basis(OccupationConfig::vacuum())
    }

    pub fn basis(cfg: OccupationConfig) -> Self {
        let mut s = Self::zero();
        s.terms.insert(cfg, Complex64::new(1.0, 0.0));
        s
    }

    /// A single photon, matched tag.
    pub fn photon(mode: SpatialMode, pol: Polarization) -> Self {
        Self::basis(OccupationConfig::from_keys([ModeKey::new(mode, pol)]))
    }

    pub fn from_terms<I: IntoIterator<Item = (OccupationConfig, Complex64)>>(terms: I) -> Self {
        let mut s = Self::zero();
        for (cfg, amp) in terms {
            s.add_amplitude(cfg, amp);
        }
        s.pruned()
    }

    pub fn with_prune_threshold(mut self, prune: f64) -> Self {
        self.prune = prune;
        self
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OccupationConfig, &Complex64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, cfg: &OccupationConfig) -> Complex64 {
        self.terms.get(cfg).copied().unwrap_or_default()
    }

    pub(crate) fn add_amplitude(&mut self, cfg: OccupationConfig, amp: Complex64) {
        *self.terms.entry(cfg).or_default() += amp;
    }

    pub(crate) fn pruned(mut self) -> Self {
        let eps = self.prune;
        self.terms.retain(|_, a| a.norm() >= eps && *a != Complex64::default());
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Every spatial mode holding at least one photon in some term.
    pub fn modes(&self) -> BTreeSet<SpatialMode> {
        self.terms.keys().flat_map(|c| c.modes()).collect()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        PhotonicState {
            terms: self.terms.iter().map(|(k, a)| (k.clone(), a * c)).collect(),
            prune: self.prune,
        }
        .pruned()
    }

    pub fn plus(&self, other: &PhotonicState) -> Self {
        let mut out = self.clone();
        out.prune = self.prune.min(other.prune);
        for (k, a) in other.terms() {
            out.add_amplitude(k.clone(), *a);
        }
        out.pruned()
    }

    /// Sum of `c_i · s_i`.
    pub fn linear_combination<'a, I>(parts: I) -> Self
    where
        I: IntoIterator<Item = (Complex64, &'a PhotonicState)>,
    {
        let mut out = Self::zero();
        let mut prune = DEFAULT_PRUNE;
        for (c, s) in parts {
            prune = prune.min(s.prune);
            for (k, a) in s.terms() {
                out.add_amplitude(k.clone(), a * c);
            }
        }
        out.prune = prune;
        out.pruned()
    }

    /// Relabels every photon key; keys that collide are merged with the
    /// proper bosonic factors.
    pub fn map_keys(&self, mut f: impl FnMut(ModeKey) -> ModeKey) -> Self {
        let mut out = Self::zero();
        out.prune = self.prune;
        for (cfg, a) in self.terms() {
            let mapped = cfg.map_keys(&mut f);
            let factor = (mapped.factorial_product() / cfg.factorial_product()).sqrt();
            out.add_amplitude(mapped, a * factor);
        }
        out.pruned()
    }

    /// Applies a creation operator a†_key: |n⟩ → √(n+1)|n+1⟩.
    pub fn create(&self, key: ModeKey) -> Self {
        let mut out = Self::zero();
        out.prune = self.prune;
        for (cfg, a) in self.terms() {
            let n = cfg.count(&key);
            let mut next = cfg.clone();
            next.add(key, 1);
            out.add_amplitude(next, a * ((n + 1) as f64).sqrt());
        }
        out.pruned()
    }

    /// Applies an annihilation operator a_key: |n⟩ → √n|n−1⟩.
    pub fn annihilate(&self, key: ModeKey) -> Self {
        let mut out = Self::zero();
        out.prune = self.prune;
        for (cfg, a) in self.terms() {
            let mut next = cfg.clone();
            let n = next.remove_one(&key);
            if n > 0 {
                out.add_amplitude(next, a * (n as f64).sqrt());
            }
        }
        out.pruned()
    }

    /// Rewrites every photon whose key is in the domain of `image` by the
    /// given superposition of keys (a creation-operator substitution).
    /// Photons outside the domain are left alone.
    pub(crate) fn substitute<F>(&self, image: F) -> Self
    where
        F: Fn(&ModeKey) -> Option<SmallVec<[(ModeKey, Complex64); 2]>>,
    {
        let mut out = Self::zero();
        out.prune = self.prune;
        for (cfg, amp) in self.terms() {
            let mut untouched = OccupationConfig::vacuum();
            let mut images: SmallVec<[SmallVec<[(ModeKey, Complex64); 2]>; 8]> = SmallVec::new();
            for (k, n) in cfg.entries() {
                match image(&k) {
                    Some(img) => {
                        for _ in 0..n {
                            images.push(img.clone());
                        }
                    }
                    None => untouched.add(k, n),
                }
            }
            if images.is_empty() {
                out.add_amplitude(cfg.clone(), *amp);
                continue;
            }
            // expand the product of creation-operator sums monomial by monomial
            let mut monomials: BTreeMap<OccupationConfig, Complex64> = BTreeMap::new();
            monomials.insert(untouched, Complex64::new(1.0, 0.0));
            for img in &images {
                let mut next: BTreeMap<OccupationConfig, Complex64> = BTreeMap::new();
                for (m, c) in &monomials {
                    for (k, u) in img {
                        let mut m2 = m.clone();
                        m2.add(*k, 1);
                        *next.entry(m2).or_default() += c * u;
                    }
                }
                monomials = next;
            }
            let in_fact = cfg.factorial_product();
            for (m, c) in monomials {
                if c == Complex64::default() {
                    continue;
                }
                let factor = (m.factorial_product() / in_fact).sqrt();
                out.add_amplitude(m, amp * c * factor);
            }
        }
        out.pruned()
    }

    /// Keeps only the terms accepted by `keep` (an unnormalized projection).
    pub fn filter(&self, mut keep: impl FnMut(&OccupationConfig) -> bool) -> Self {
        PhotonicState {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, a)| (k.clone(), *a))
                .collect(),
            prune: self.prune,
        }
    }

    /// One `amplitude × ket` line per term in canonical order.
    pub fn debug_lines(&self) -> Vec<String> {
        self.terms
            .iter()
            .map(|(cfg, a)| {
                let sign = if a.im < 0.0 || (a.im == 0.0 && a.im.is_sign_negative()) { '-' } else { '+' };
                format!("{}{}{}i {}", a.re, sign, a.im.abs(), cfg)
            })
            .collect()
    }
}

impl fmt::Display for PhotonicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.debug_lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// ⟨s1|s2⟩, conjugate-linear in the first argument.
pub fn inner_product(s1: &PhotonicState, s2: &PhotonicState) -> Complex64 {
    let (small, large, conj_small) = if s1.len() <= s2.len() { (s1, s2, true) } else { (s2, s1, false) };
    let mut acc = Complex64::default();
    for (k, a) in small.terms() {
        if let Some(b) = large.terms.get(k) {
            acc += if conj_small { a.conj() * b } else { b.conj() * a };
        }
    }
    acc
}

/// Tensor product of states on disjoint sets of spatial modes.
pub fn tensor(s1: &PhotonicState, s2: &PhotonicState) -> Result<PhotonicState> {
    let m1 = s1.modes();
    let overlap: Vec<String> = s2.modes().intersection(&m1).map(|m| m.to_string()).collect();
    if !overlap.is_empty() {
        return Err(Error::OverlappingModes(overlap.join(",")));
    }
    let mut out = PhotonicState::zero();
    out.prune = s1.prune.min(s2.prune);
    for (c1, a1) in s1.terms() {
        for (c2, a2) in s2.terms() {
            out.add_amplitude(c1.merged(c2), a1 * a2);
        }
    }
    Ok(out.pruned())
}

/// Tensor product of several states on pairwise disjoint modes.
pub fn tensor_all<'a, I: IntoIterator<Item = &'a PhotonicState>>(parts: I) -> Result<PhotonicState> {
    parts.into_iter().try_fold(PhotonicState::vacuum(), |acc, s| tensor(&acc, s))
}

pub fn normalize(s: &PhotonicState) -> Result<PhotonicState> {
    let n = s.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroState);
    }
    Ok(s.scaled(Complex64::new(1.0 / n, 0.0)))
}

/// |⟨s1|s2⟩|² / (‖s1‖²‖s2‖²); phase-insensitive overlap of two states.
pub fn fidelity(s1: &PhotonicState, s2: &PhotonicState) -> f64 {
    let d = s1.norm_sqr() * s2.norm_sqr();
    if d == 0.0 {
        return 0.0;
    }
    inner_product(s1, s2).norm_sqr() / d
}

/// Global-phase-insensitive equality: |⟨s1|s2⟩| ≥ 1 − tol for unit states.
pub fn equal_up_to_phase(s1: &PhotonicState, s2: &PhotonicState, tol: f64) -> bool {
    fidelity(s1, s2).sqrt() >= 1.0 - tol
}
