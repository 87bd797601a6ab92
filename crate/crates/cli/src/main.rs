//! `reencoder`: runs the re-encoder experiments and writes JSON or CSV.

mod manifest;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use parity_reencoder::detection::GateMode;
use parity_reencoder::mismatch::{format_number, sweep_diagonal, sweep_grid, to_csv, MismatchParams, QuadratureSpec};
use parity_reencoder::optics::Conventions;
use parity_reencoder::parity::{BlochAngles, LogicalQubit};
use parity_reencoder::pdc::{contamination_analysis, DetectorModel, PdcParams};
use parity_reencoder::reencoder::{run, CircuitConfig, ReencoderReport};
use parity_reencoder::selftest::{run_selftest, SelftestOptions};
use parity_reencoder::teleport::{aggregate, run_trials, ProtocolModel, RetryPolicy, TeleportReport};

use manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "reencoder", version, about = "Two-photon parity-state re-encoder simulator")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Sixteen-pattern table for the plain re-encoder.
    Reencode,
    /// Same with the quarter-wave plate on e (logical Z90).
    Z90,
    /// Monte Carlo runs of the teleportation protocol.
    Teleport,
    /// Bloch-averaged fidelity over a mode-matching grid.
    MismatchSweep,
    /// Multi-pair contamination of three down-conversion sources.
    Pdc,
    /// Oracle-equivalence checks; exit code 2 on failure.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Cut {
    Grid,
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Detector {
    NumberResolving,
    Threshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Policy {
    SingleShot,
    Type1Only,
    Unlimited,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fault {
    /// Reflected V photons pick up a factor i.
    PbsPhase,
    /// Quarter-wave plate with diag(1, -i).
    QwpPhase,
}

#[derive(clap::Args, Debug, Default)]
struct Opts {
    /// Flat key = value file; command-line flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Bloch polar angle of the input: alpha = cos(theta/2).
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha_theta: Option<f64>,
    /// Bloch azimuth of the input: beta = e^{i phi} sin(theta/2).
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha_phi: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    eta1: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    eta2: Option<f64>,
    /// Shorthand for --eta1 E1 --eta2 E2.
    #[arg(long, global = true, num_args = 2, value_names = ["E1", "E2"], conflicts_with_all = ["eta1", "eta2"], allow_negative_numbers = true)]
    mismatch: Option<Vec<f64>>,
    /// Points per axis of the sweep.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,
    #[arg(long, global = true, value_enum)]
    cut: Option<Cut>,
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "T")]
    trials: Option<usize>,
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    chi: Option<f64>,
    #[arg(long, global = true, value_name = "K")]
    order: Option<u32>,
    #[arg(long, global = true, value_enum)]
    detector: Option<Detector>,
    #[arg(long, global = true, value_enum)]
    policy: Option<Policy>,
    /// Quadrature nodes in theta for Bloch averages.
    #[arg(long, global = true)]
    n_theta: Option<usize>,
    #[arg(long, global = true)]
    n_phi: Option<usize>,
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    #[arg(long, global = true)]
    csv: bool,
    /// Deliberately wrong optics convention for the selftest.
    #[arg(long, global = true, value_enum)]
    fault: Vec<Fault>,
}

/// Everything a run needs, after merging flags, manifest and defaults.
#[derive(Debug)]
struct Settings {
    command: Command,
    input: LogicalQubit,
    mismatch: Option<MismatchParams>,
    grid: Option<usize>,
    cut: Cut,
    seed: u64,
    trials: usize,
    chi: f64,
    order: u32,
    detector: Detector,
    policy: Policy,
    quad: QuadratureSpec,
    format: Option<Format>,
    out: Option<PathBuf>,
    faults: Vec<Fault>,
}

fn pick<T: std::str::FromStr>(flag: Option<T>, m: &Manifest, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => Some(v),
        None => m.get(key)?,
    })
}

fn pick_enum<T: ValueEnum>(flag: Option<T>, m: &Manifest, key: &str) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    m.raw(key)
        .map(|v| T::from_str(v, true).map_err(|e| anyhow::anyhow!("manifest key '{key}': {e}")))
        .transpose()
}

fn resolve(cli: Cli) -> Result<Settings> {
    let o = cli.opts;
    let m = match &o.manifest {
        Some(p) => Manifest::load(p)?,
        None => Manifest::default(),
    };
    let Some(command) = pick_enum(cli.command, &m, "command")? else {
        bail!("no command given (use a subcommand or 'command' in the manifest)");
    };
    let theta = pick(o.alpha_theta, &m, "alpha_theta")?.unwrap_or(std::f64::consts::FRAC_PI_2);
    let phi = pick(o.alpha_phi, &m, "alpha_phi")?.unwrap_or(0.0);
    if !theta.is_finite() || !phi.is_finite() {
        bail!("input angles must be finite");
    }
    let (flag_e1, flag_e2) = match o.mismatch.as_deref() {
        Some([a, b]) => (Some(*a), Some(*b)),
        _ => (o.eta1, o.eta2),
    };
    let e1 = pick(flag_e1, &m, "eta1")?;
    let e2 = pick(flag_e2, &m, "eta2")?;
    let mismatch = match (e1, e2) {
        (None, None) => None,
        (a, b) => Some(MismatchParams::new(a.unwrap_or(1.0), b.unwrap_or(1.0))?),
    };
    let format = if o.json {
        Some(Format::Json)
    } else if o.csv {
        Some(Format::Csv)
    } else {
        pick_enum(None, &m, "format")?
    };
    let n_theta = pick(o.n_theta, &m, "n_theta")?.unwrap_or(QuadratureSpec::default().n_theta);
    let n_phi = pick(o.n_phi, &m, "n_phi")?.unwrap_or(QuadratureSpec::default().n_phi);
    Ok(Settings {
        command,
        input: BlochAngles { theta, phi }.to_qubit(),
        mismatch,
        grid: pick(o.grid, &m, "grid")?,
        cut: pick_enum(o.cut, &m, "cut")?.unwrap_or(Cut::Grid),
        seed: pick(o.seed, &m, "seed")?.unwrap_or(2024),
        trials: pick(o.trials, &m, "trials")?.unwrap_or(100_000),
        chi: pick(o.chi, &m, "chi")?.unwrap_or(0.01),
        order: pick(o.order, &m, "order")?.unwrap_or(3),
        detector: pick_enum(o.detector, &m, "detector")?.unwrap_or(Detector::NumberResolving),
        policy: pick_enum(o.policy, &m, "policy")?.unwrap_or(Policy::All),
        quad: QuadratureSpec::new(n_theta, n_phi)?,
        format,
        out: o.out.or_else(|| m.raw("out").map(PathBuf::from)),
        faults: o.fault,
    })
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn opt_number(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

fn reencode_csv(r: &ReencoderReport) -> String {
    let mut s = String::from("pattern,probability,flip_class,fidelity\n");
    for row in &r.patterns {
        let _ = writeln!(s, "{},{},{:?},{}", row.pattern, format_number(row.probability), row.flip_class, opt_number(row.fidelity));
    }
    s
}

fn cmd_reencode(st: &Settings, mode: GateMode) -> Result<String> {
    let mut cfg = CircuitConfig::new(st.input, mode);
    if let Some(mm) = st.mismatch {
        cfg = cfg.with_mismatch(mm);
    }
    let report = run(&cfg)?.report();
    match st.format.unwrap_or(Format::Json) {
        Format::Json => json(&report),
        Format::Csv => Ok(reencode_csv(&report)),
    }
}

fn cmd_teleport(st: &Settings) -> Result<String> {
    if st.trials == 0 {
        bail!("--trials must be positive");
    }
    let model = ProtocolModel::new(st.mismatch)?;
    let policies: Vec<(&str, RetryPolicy)> = [
        (Policy::SingleShot, "single-shot", RetryPolicy::single_shot()),
        (Policy::Type1Only, "type1-only", RetryPolicy::type1_retry_only()),
        (Policy::Unlimited, "unlimited", RetryPolicy::unlimited()),
    ]
    .into_iter()
    .filter(|(p, _, _)| st.policy == Policy::All || st.policy == *p)
    .map(|(_, name, p)| (name, p))
    .collect();
    let mut reports = Vec::new();
    for (name, policy) in &policies {
        let stats = aggregate(&run_trials(&model, &st.input, policy, st.seed, st.trials)?)?;
        reports.push((*name, TeleportReport::new(*policy, st.mismatch, st.seed, stats)));
    }
    match st.format.unwrap_or(Format::Json) {
        Format::Json => json(&reports.iter().map(|(n, r)| serde_json::json!({ "policy_name": n, "report": r })).collect::<Vec<_>>()),
        Format::Csv => {
            let mut s = String::from("policy,trials,eventual_success_rate,single_shot_success_rate,mean_bell_pairs,mean_fidelity,min_fidelity\n");
            for (name, r) in &reports {
                let t = &r.stats;
                let _ = writeln!(
                    s,
                    "{name},{},{},{},{},{},{}",
                    t.trials,
                    format_number(t.eventual_success_rate),
                    format_number(t.single_shot_success_rate),
                    format_number(t.mean_bell_pairs),
                    opt_number(t.mean_fidelity),
                    opt_number(t.min_fidelity)
                );
            }
            Ok(s)
        }
    }
}

fn cmd_sweep(st: &Settings) -> Result<String> {
    let rows = match st.cut {
        Cut::Grid => sweep_grid(st.grid.unwrap_or(5), GateMode::Identity, &st.quad)?,
        Cut::Diagonal => sweep_diagonal(st.grid.unwrap_or(21), GateMode::Identity, &st.quad)?,
    };
    match st.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(to_csv(&rows)),
        Format::Json => json(&rows),
    }
}

fn cmd_pdc(st: &Settings) -> Result<String> {
    let model = match st.detector {
        Detector::NumberResolving => DetectorModel::NumberResolving,
        Detector::Threshold => DetectorModel::Threshold,
    };
    let params = PdcParams::new(st.chi, st.order, model)?;
    let mut cfg = CircuitConfig::new(st.input, GateMode::Identity);
    cfg.mismatch = st.mismatch;
    let report = contamination_analysis(&params, &cfg)?;
    match st.format.unwrap_or(Format::Json) {
        Format::Json => json(&report),
        Format::Csv => bail!("pdc output is JSON only"),
    }
}

fn cmd_selftest(st: &Settings) -> Result<(String, bool)> {
    let mut conventions = Conventions::default();
    for f in &st.faults {
        match f {
            Fault::PbsPhase => conventions.pbs_reflection_phase = Complex64::new(0.0, 1.0),
            Fault::QwpPhase => conventions.qwp_v_phase = Complex64::new(0.0, -1.0),
        }
    }
    let checks = run_selftest(&SelftestOptions { conventions, seed: st.seed, ..SelftestOptions::default() });
    let ok = checks.iter().all(|c| c.passed);
    let text = match st.format {
        Some(Format::Json) => json(&checks)?,
        Some(Format::Csv) => bail!("selftest output is text or JSON"),
        None => {
            let mut s = String::new();
            for c in &checks {
                let _ = writeln!(s, "{} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            let _ = writeln!(s, "{} of {} checks passed", checks.len() - failed, checks.len());
            s
        }
    };
    Ok((text, ok))
}

fn emit(st: &Settings, text: &str) -> Result<()> {
    match &st.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let st = resolve(cli)?;
    if !st.faults.is_empty() && st.command != Command::Selftest {
        bail!("--fault only applies to selftest");
    }
    let text = match st.command {
        Command::Reencode => cmd_reencode(&st, GateMode::Identity)?,
        Command::Z90 => cmd_reencode(&st, GateMode::Z90)?,
        Command::Teleport => cmd_teleport(&st)?,
        Command::MismatchSweep => cmd_sweep(&st)?,
        Command::Pdc => cmd_pdc(&st)?,
        Command::Selftest => {
            let (text, ok) = cmd_selftest(&st)?;
            emit(&st, &text)?;
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) });
        }
    };
    emit(&st, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
