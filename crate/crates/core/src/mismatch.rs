//! Partial distinguishability at the two beam splitters.
//!
//! `eta1` is the mode overlap at PBS1 and `eta2` at PBS2. The closed forms
//! here are checked against [`simulate_rho`], which pushes the tagged input
//! through the circuit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{diagonal_product_vector, parity_vector, OutputDensityMatrix};
use crate::detection::{FlipClass, GateMode, PatternId};
use crate::error::{Error, Result};
use crate::parity::{BlochAngles, LogicalQubit};
use crate::quadrature::gauss_legendre;
use crate::reencoder::{canonical_target, run, CircuitConfig, ReencoderResult};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MismatchParams {
    eta1: f64,
    eta2: f64,
}

impl MismatchParams {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        for (name, value) in [("eta1", eta1), ("eta2", eta2)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::EtaOutOfRange { name, value });
            }
        }
        Ok(MismatchParams { eta1, eta2 })
    }

    pub fn ideal() -> Self {
        MismatchParams { eta1: 1.0, eta2: 1.0 }
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }
}

impl<'de> Deserialize<'de> for MismatchParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            eta1: f64,
            eta2: f64,
        }
        let raw = Raw::deserialize(d)?;
        MismatchParams::new(raw.eta1, raw.eta2).map_err(serde::de::Error::custom)
    }
}

/// Plus: outputs needing no correction or only a bit flip. Minus: outputs
/// that needed the phase-flip correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignVariant {
    Plus,
    Minus,
}

impl SignVariant {
    pub fn of_class(class: FlipClass) -> Self {
        if class.phase() {
            SignVariant::Minus
        } else {
            SignVariant::Plus
        }
    }

    /// +1 for Plus, −1 for Minus; the upper/lower sign of the formulas.
    pub fn sign(self) -> f64 {
        match self {
            SignVariant::Plus => 1.0,
            SignVariant::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignVariant::Plus => "plus",
            SignVariant::Minus => "minus",
        }
    }
}

/// Re(αβ*) in identity mode, Im(αβ*) for the Z₉₀ variant.
pub fn coherence_term(q: &LogicalQubit, mode: GateMode) -> f64 {
    let c = q.coherence();
    match mode {
        GateMode::Identity => c.re,
        GateMode::Z90 => c.im,
    }
}

pub fn closed_form_rho(q: &LogicalQubit, mm: &MismatchParams, variant: SignVariant, mode: GateMode) -> OutputDensityMatrix {
    let (n1, n2) = (mm.eta1, mm.eta2);
    let s = variant.sign();
    let r = coherence_term(q, mode);
    let minus = variant == SignVariant::Minus;
    let same = OutputDensityMatrix::from_vector(&diagonal_product_vector(minus));
    let other = OutputDensityMatrix::from_vector(&diagonal_product_vector(!minus));
    let zero = OutputDensityMatrix::from_vector(&parity_vector(false));
    let one = OutputDensityMatrix::from_vector(&parity_vector(true));
    let mut rho = OutputDensityMatrix::from_vector(&canonical_target(q, mode)).scaled(n1 * n2 / 64.0);
    rho.add(&same.scaled((1.0 - n1) / 128.0));
    rho.add(&other.scaled((1.0 - n1) / 128.0 * (1.0 - s * 2.0 * r * n2)));
    rho.add(&zero.scaled(n1 * (1.0 - n2) / 64.0 * q.alpha.norm_sqr()));
    rho.add(&one.scaled(n1 * (1.0 - n2) / 64.0 * q.beta.norm_sqr()));
    rho
}

pub fn closed_form_probability(q: &LogicalQubit, mm: &MismatchParams, variant: SignVariant, mode: GateMode) -> f64 {
    let r = coherence_term(q, mode);
    (1.0 - variant.sign() * (1.0 - mm.eta1) * mm.eta2 * r) / 64.0
}

fn fidelity_numerator(q: &LogicalQubit, mm: &MismatchParams, variant: SignVariant, mode: GateMode) -> f64 {
    let (n1, n2) = (mm.eta1, mm.eta2);
    let s = variant.sign();
    let r = coherence_term(q, mode);
    let ab2 = (q.alpha * q.beta).norm_sqr();
    (1.0 + n1 - 4.0 * n1 * (1.0 - n2) * ab2 - s * (1.0 - n1) * n2 * r * (1.0 - s * 2.0 * r)) / 128.0
}

pub fn closed_form_fidelity(q: &LogicalQubit, mm: &MismatchParams, variant: SignVariant, mode: GateMode) -> f64 {
    let p = closed_form_probability(q, mm, variant, mode);
    assert!(p > 0.0, "success probability vanishes only outside the valid eta range");
    fidelity_numerator(q, mm, variant, mode) / p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes in cos θ.
    pub n_theta: usize,
    /// Uniform nodes in φ.
    pub n_phi: usize,
}

impl QuadratureSpec {
    pub const MIN_THETA: usize = 16;
    pub const MIN_PHI: usize = 16;

    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < Self::MIN_THETA {
            return Err(Error::QuadratureTooCoarse { axis: "theta", min: Self::MIN_THETA });
        }
        if n_phi < Self::MIN_PHI {
            return Err(Error::QuadratureTooCoarse { axis: "phi", min: Self::MIN_PHI });
        }
        Ok(QuadratureSpec { n_theta, n_phi })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { n_theta: 64, n_phi: 128 }
    }
}

/// Average of `f` over the Bloch sphere with the uniform measure.
pub fn bloch_average(quad: &QuadratureSpec, f: impl Fn(&LogicalQubit) -> f64 + Sync) -> f64 {
    let nodes = gauss_legendre(quad.n_theta);
    let per_theta: Vec<f64> = nodes
        .par_iter()
        .map(|(x, w)| {
            let theta = x.clamp(-1.0, 1.0).acos();
            let ring: f64 = (0..quad.n_phi)
                .map(|j| {
                    let phi = 2.0 * std::f64::consts::PI * j as f64 / quad.n_phi as f64;
                    f(&BlochAngles { theta, phi }.to_qubit())
                })
                .sum();
            w * ring / quad.n_phi as f64
        })
        .collect();
    per_theta.iter().sum::<f64>() / 2.0
}

pub fn average_fidelity_variant(mm: &MismatchParams, mode: GateMode, variant: SignVariant, quad: &QuadratureSpec) -> f64 {
    bloch_average(quad, |q| closed_form_fidelity(q, mm, variant, mode))
}

/// Bloch-sphere average of F; the Plus and Minus variants agree, so this
/// uses Plus.
pub fn average_fidelity(mm: &MismatchParams, mode: GateMode, quad: &QuadratureSpec) -> f64 {
    average_fidelity_variant(mm, mode, SignVariant::Plus, quad)
}

pub fn mean_probability(mm: &MismatchParams, mode: GateMode, variant: SignVariant, quad: &QuadratureSpec) -> f64 {
    bloch_average(quad, |q| closed_form_probability(q, mm, variant, mode))
}

/// Runs the tagged input through the circuit and returns every pattern's
/// corrected output.
pub fn simulate(q: &LogicalQubit, mm: &MismatchParams, mode: GateMode) -> Result<ReencoderResult> {
    run(&CircuitConfig::new(*q, mode).with_mismatch(*mm))
}

/// Corrected, unnormalized output for one success pattern, which must belong
/// to `variant`.
pub fn simulate_rho(
    q: &LogicalQubit,
    mm: &MismatchParams,
    variant: SignVariant,
    mode: GateMode,
    pattern: PatternId,
) -> Result<OutputDensityMatrix> {
    let actual = SignVariant::of_class(crate::detection::flip_class(pattern, mode));
    if actual != variant {
        return Err(Error::VariantMismatch {
            pattern: pattern.to_string(),
            actual: actual.name().into(),
            requested: variant.name().into(),
        });
    }
    Ok(simulate(q, mm, mode)?.outcome(pattern).corrected.clone())
}

/// Worst entrywise and trace deviations of the sixteen simulated outputs
/// from the closed forms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OracleDeviation {
    pub max_entry: f64,
    pub max_trace: f64,
}

impl OracleDeviation {
    pub fn merge(self, other: OracleDeviation) -> Self {
        OracleDeviation { max_entry: self.max_entry.max(other.max_entry), max_trace: self.max_trace.max(other.max_trace) }
    }
}

pub fn oracle_deviation(q: &LogicalQubit, mm: &MismatchParams, mode: GateMode) -> Result<OracleDeviation> {
    let sim = simulate(q, mm, mode)?;
    let mut dev = OracleDeviation::default();
    for o in &sim.outcomes {
        let variant = SignVariant::of_class(o.flip_class);
        let closed = closed_form_rho(q, mm, variant, mode);
        dev.max_entry = dev.max_entry.max(o.corrected.max_abs_diff(&closed));
        dev.max_trace = dev.max_trace.max((o.corrected.trace() - closed_form_probability(q, mm, variant, mode)).abs());
    }
    Ok(dev)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta1: f64,
    pub eta2: f64,
    pub f_ave: f64,
    pub p_plus_mean: f64,
    pub p_minus_mean: f64,
}

pub fn sweep_point(eta1: f64, eta2: f64, mode: GateMode, quad: &QuadratureSpec) -> Result<SweepRow> {
    let mm = MismatchParams::new(eta1, eta2)?;
    Ok(SweepRow {
        eta1,
        eta2,
        f_ave: average_fidelity(&mm, mode, quad),
        p_plus_mean: mean_probability(&mm, mode, SignVariant::Plus, quad),
        p_minus_mean: mean_probability(&mm, mode, SignVariant::Minus, quad),
    })
}

/// `n` evenly spaced values from 0 to 1 inclusive.
pub fn grid_values(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::GridTooSmall(n));
    }
    Ok(())
}

/// Full n×n grid, rows ordered by eta1 then eta2.
pub fn sweep_grid(n: usize, mode: GateMode, quad: &QuadratureSpec) -> Result<Vec<SweepRow>> {
    check_grid(n)?;
    let g = grid_values(n);
    let points: Vec<(f64, f64)> = g.iter().flat_map(|a| g.iter().map(move |b| (*a, *b))).collect();
    points.par_iter().map(|(a, b)| sweep_point(*a, *b, mode, quad)).collect()
}

/// The eta1 = eta2 cut.
pub fn sweep_diagonal(n: usize, mode: GateMode, quad: &QuadratureSpec) -> Result<Vec<SweepRow>> {
    check_grid(n)?;
    grid_values(n).par_iter().map(|e| sweep_point(*e, *e, mode, quad)).collect()
}

pub const CSV_HEADER: &str = "eta1,eta2,f_ave,p_plus_mean,p_minus_mean";

pub fn format_number(x: f64) -> String {
    format!("{x:.12}")
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cells = [r.eta1, r.eta2, r.f_ave, r.p_plus_mean, r.p_minus_mean].map(format_number);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mm(a: f64, b: f64) -> MismatchParams {
        MismatchParams::new(a, b).unwrap()
    }

    #[test]
    fn eta_range_enforced() {
        assert!(matches!(MismatchParams::new(1.1, 0.5), Err(Error::EtaOutOfRange { name: "eta1", .. })));
        assert!(matches!(MismatchParams::new(0.5, -0.1), Err(Error::EtaOutOfRange { name: "eta2", .. })));
        assert!(MismatchParams::new(f64::NAN, 0.5).is_err());
        let parsed: std::result::Result<MismatchParams, _> = serde_json::from_str(r#"{"eta1":2.0,"eta2":0.0}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn closed_form_limits() {
        let q = LogicalQubit::plus();
        let ideal = closed_form_rho(&q, &mm(1.0, 1.0), SignVariant::Plus, GateMode::Identity);
        assert!((ideal.trace() - 1.0 / 64.0).abs() < 1e-15);
        let z = LogicalQubit::zero();
        let r = closed_form_rho(&z, &mm(1.0, 0.0), SignVariant::Plus, GateMode::Identity);
        let pure = OutputDensityMatrix::from_vector(&parity_vector(false)).scaled(1.0 / 64.0);
        assert!(r.max_abs_diff(&pure) < 1e-16);
        let p = closed_form_probability(&q, &mm(0.0, 1.0), SignVariant::Plus, GateMode::Identity);
        assert!((p - 1.0 / 128.0).abs() < 1e-16);
    }

    #[test]
    fn fidelity_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let q = LogicalQubit::random(&mut rng);
            for v in [SignVariant::Plus, SignVariant::Minus] {
                for mode in [GateMode::Identity, GateMode::Z90] {
                    assert!((closed_form_fidelity(&q, &mm(1.0, 1.0), v, mode) - 1.0).abs() < 1e-14);
                    assert!((closed_form_fidelity(&q, &mm(0.0, 0.0), v, mode) - 0.5).abs() < 1e-14);
                    let ab2 = (q.alpha * q.beta).norm_sqr();
                    assert!((closed_form_fidelity(&q, &mm(1.0, 0.0), v, mode) - (1.0 - 2.0 * ab2)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn printed_numerator_is_the_expectation_of_printed_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let q = LogicalQubit::random(&mut rng);
            let m = mm(0.3, 0.8);
            for v in [SignVariant::Plus, SignVariant::Minus] {
                for mode in [GateMode::Identity, GateMode::Z90] {
                    let rho = closed_form_rho(&q, &m, v, mode);
                    let via_rho = rho.fidelity(&canonical_target(&q, mode)).unwrap();
                    assert!((via_rho - closed_form_fidelity(&q, &m, v, mode)).abs() < 1e-13);
                    assert!((rho.trace() - closed_form_probability(&q, &m, v, mode)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn variant_mismatch_is_rejected() {
        let q = LogicalQubit::plus();
        let e = simulate_rho(&q, &mm(0.5, 0.5), SignVariant::Minus, GateMode::Identity, "HHHH".parse().unwrap());
        assert!(matches!(e, Err(Error::VariantMismatch { .. })));
    }

    #[test]
    fn simulation_matches_closed_form_off_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = LogicalQubit::random(&mut rng);
        for mode in [GateMode::Identity, GateMode::Z90] {
            let d = oracle_deviation(&q, &mm(0.37, 0.81), mode).unwrap();
            assert!(d.max_entry < 1e-12 && d.max_trace < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn csv_layout() {
        let rows = [SweepRow { eta1: 1.0, eta2: 0.5, f_ave: 2.0 / 3.0, p_plus_mean: 0.015625, p_minus_mean: 0.015625 }];
        let csv = to_csv(&rows);
        assert_eq!(
            csv,
            "eta1,eta2,f_ave,p_plus_mean,p_minus_mean\n1.000000000000,0.500000000000,0.666666666667,0.015625000000,0.015625000000\n"
        );
        assert_eq!(grid_values(5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn sweeps_need_two_points() {
        let quad = QuadratureSpec::default();
        assert_eq!(sweep_grid(1, GateMode::Identity, &quad), Err(Error::GridTooSmall(1)));
        assert_eq!(sweep_diagonal(0, GateMode::Identity, &quad), Err(Error::GridTooSmall(0)));
        let rows = sweep_diagonal(3, GateMode::Identity, &quad).unwrap();
        assert_eq!(rows.iter().map(|r| r.eta1).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn average_fidelity_pins() {
        let quad = QuadratureSpec::default();
        assert!((average_fidelity(&mm(1.0, 1.0), GateMode::Identity, &quad) - 1.0).abs() < 1e-12);
        assert!((average_fidelity(&mm(0.0, 0.0), GateMode::Identity, &quad) - 0.5).abs() < 1e-12);
        assert!((average_fidelity(&mm(1.0, 0.0), GateMode::Identity, &quad) - 2.0 / 3.0).abs() < 1e-12);
        assert!(QuadratureSpec::new(4, 128).is_err());
    }
}
