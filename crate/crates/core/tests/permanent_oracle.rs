//! Independent check of the Fock simulation: the whole circuit as a
//! single-photon transfer matrix, with multiphoton amplitudes from permanents.

use num_complex::Complex64;

use parity_reencoder::detection::GateMode;
use parity_reencoder::parity::LogicalQubit;
use parity_reencoder::optics::Conventions;
use parity_reencoder::photonic::{OccupationConfig, PhotonicState, Polarization};
use parity_reencoder::reencoder::{pre_detection_state, pre_pbs2_state, CircuitConfig};
use parity_reencoder::selftest::random_inputs;

const BEAMS: [&str; 10] = ["a", "b", "c", "d", "e", "1", "4", "2'", "2", "3"];
const N: usize = 2 * BEAMS.len();

type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn idx(beam: &str, v: usize) -> usize {
    2 * BEAMS.iter().position(|b| *b == beam).unwrap() + v
}

fn identity() -> Matrix {
    (0..N).map(|i| (0..N).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    (0..N).map(|i| (0..N).map(|j| (0..N).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn hwp(beam: &str) -> Matrix {
    let mut u = identity();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (h, v) = (idx(beam, 0), idx(beam, 1));
    u[h][h] = c(r, 0.0);
    u[v][h] = c(r, 0.0);
    u[h][v] = c(r, 0.0);
    u[v][v] = c(-r, 0.0);
    u
}

fn qwp(beam: &str) -> Matrix {
    let mut u = identity();
    let v = idx(beam, 1);
    u[v][v] = c(0.0, 1.0);
    u
}

/// Transmits H straight through and reflects V; written as a permutation so
/// the empty output ports swap back into the inputs.
fn pbs(in1: &str, in2: &str, out1: &str, out2: &str) -> Matrix {
    let mut u = identity();
    let pairs = [
        (idx(in1, 0), idx(out1, 0)),
        (idx(in2, 0), idx(out2, 0)),
        (idx(in1, 1), idx(out2, 1)),
        (idx(in2, 1), idx(out1, 1)),
    ];
    for (i, o) in pairs {
        u[i][i] = c(0.0, 0.0);
        u[o][o] = c(0.0, 0.0);
        u[o][i] = c(1.0, 0.0);
        u[i][o] = c(1.0, 0.0);
    }
    u
}

fn circuit(z90: bool, full: bool) -> Matrix {
    let mut steps = vec![hwp("b"), hwp("c"), pbs("c", "b", "4", "2'"), hwp("4"), hwp("2'")];
    if full {
        if z90 {
            steps.push(qwp("e"));
        }
        steps.extend([pbs("2'", "e", "2", "3"), hwp("2"), hwp("3")]);
    }
    steps.into_iter().fold(identity(), |acc, s| mul(&s, &acc))
}

fn permanent(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    let mut total = c(0.0, 0.0);
    for subset in 1u32..(1 << n) {
        let mut prod = c(1.0, 0.0);
        for row in m {
            prod *= (0..n).filter(|j| subset >> j & 1 == 1).map(|j| row[j]).sum::<Complex64>();
        }
        let sign = if (n - subset.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

/// Input terms as lists of occupied single-photon modes, one photon each.
/// Without a logical qubit only the two Bell pairs are present.
fn input_terms(q: Option<&LogicalQubit>) -> Vec<(Vec<usize>, Complex64)> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for ab in 0..2 {
        for cd in 0..2 {
            let pairs = vec![idx("a", ab), idx("b", ab), idx("c", cd), idx("d", cd)];
            let Some(q) = q else {
                out.push((pairs, c(0.5, 0.0)));
                continue;
            };
            for (e, one) in [(0, 0), (1, 1), (0, 1), (1, 0)] {
                let amp = if e == one { q.alpha } else { q.beta };
                let mut modes = pairs.clone();
                modes.extend([idx("e", e), idx("1", one)]);
                out.push((modes, amp * r * r * r));
            }
        }
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn oracle_amplitude(u: &Matrix, inputs: &[(Vec<usize>, Complex64)], out_modes: &[usize], norm: f64) -> Complex64 {
    inputs
        .iter()
        .map(|(ins, amp)| {
            let sub: Matrix = out_modes.iter().map(|o| ins.iter().map(|i| u[*o][*i]).collect()).collect();
            amp * permanent(&sub) / norm
        })
        .sum()
}

fn photon_list(cfg: &OccupationConfig) -> (Vec<usize>, f64) {
    let mut modes = Vec::new();
    let mut norm = 1.0;
    for (k, n) in cfg.entries() {
        let v = if k.pol == Polarization::V { 1 } else { 0 };
        for _ in 0..n {
            modes.push(idx(k.mode.label(), v));
        }
        norm *= factorial(n as u32);
    }
    (modes, norm.sqrt())
}

fn compare(u: &Matrix, q: Option<&LogicalQubit>, sim: &PhotonicState) -> (f64, f64) {
    let inputs = input_terms(q);
    let mut worst: f64 = 0.0;
    let mut covered = 0.0;
    for (cfg, a) in sim.terms() {
        let (modes, norm) = photon_list(cfg);
        let o = oracle_amplitude(u, &inputs, &modes, norm);
        worst = worst.max((o - a).norm());
        covered += o.norm_sqr();
    }
    (worst, covered)
}

#[test]
fn type1_stage_matches_permanents() {
    let sim = pre_pbs2_state(&Conventions::default()).unwrap();
    let (worst, covered) = compare(&circuit(false, false), None, &sim);
    assert!(worst < 1e-12, "amplitude deviation {worst}");
    assert!((covered - 1.0).abs() < 1e-12, "oracle weight outside simulated support {covered}");
}

#[test]
fn full_circuit_matches_permanents() {
    for z90 in [false, true] {
        let u = circuit(z90, true);
        let mode = if z90 { GateMode::Z90 } else { GateMode::Identity };
        for q in random_inputs(31, 4) {
            let sim = pre_detection_state(&CircuitConfig::new(q, mode)).unwrap();
            let (worst, covered) = compare(&u, Some(&q), &sim);
            assert!(worst < 1e-12, "amplitude deviation {worst} ({mode:?})");
            assert!((covered - 1.0).abs() < 1e-12, "oracle weight outside simulated support {covered}");
        }
    }
}

#[test]
fn permanent_of_small_matrices() {
    let m = vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(3.0, 0.0), c(4.0, 0.0)]];
    assert!((permanent(&m) - c(10.0, 0.0)).norm() < 1e-12);
    let ones = vec![vec![c(1.0, 0.0); 3]; 3];
    assert!((permanent(&ones) - c(6.0, 0.0)).norm() < 1e-12);
}

#[test]
fn transfer_matrix_is_unitary() {
    let u = circuit(true, true);
    for i in 0..N {
        for j in 0..N {
            let dot: Complex64 = (0..N).map(|k| u[k][i].conj() * u[k][j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((dot - c(expect, 0.0)).norm() < 1e-12);
        }
    }
}
