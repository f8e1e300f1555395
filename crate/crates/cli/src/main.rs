//! `sim`: run ZZ-crosstalk experiments from JSON configurations.

mod output;
mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use zzsim::config::{
    ghz_to_rad_per_ns, khz_to_rad_per_ns, load_experiment, read_json, CancellationJson, SweepAxis,
    SweepJson,
};
use zzsim::dd::{crosstalk_cycle_error, SequenceKind};
use zzsim::experiment::{extract_crosstalk, run_state_protection, Engine, FitFrame, FitResult};
use zzsim::lindblad::FidelitySeries;
use zzsim::magnus::{cancellation_table, first_order_integral, is_fine_tuned, Classification, CouplingTerm};
use zzsim::operator::{Pauli, QubitState};

use output::{num, write_new};

#[derive(Parser)]
#[command(name = "sim", version, about = "ZZ crosstalk and dynamical decoupling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fidelity curves for each spectator state, with fits and a plot.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// lindblad, redfield or closed; overrides the config.
        #[arg(long)]
        engine: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_svg: bool,
    },
    /// First-order cancellation classes of all fifteen two-qubit couplings.
    Cancellation {
        #[arg(short, long)]
        config: PathBuf,
        /// Writes `cancellation.csv` here instead of printing to stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Overrides the sequence named in the config.
        #[arg(long)]
        sequence: Option<String>,
        /// Only the couplings that survive at a fine-tuned interval.
        #[arg(long)]
        fine_tuned: bool,
    },
    /// Evaluate a residual along a one-dimensional parameter ladder.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Fit crosstalk frequencies to a CSV written by `simulate`.
    ExtractJ {
        results: PathBuf,
        #[arg(long, default_value = "plus")]
        frame: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Sim(zzsim::Error),
    Input(String),
    Output(String),
}

impl From<zzsim::Error> for CliError {
    fn from(e: zzsim::Error) -> Self {
        CliError::Sim(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Sim(e) if e.is_config() => 2,
            CliError::Input(_) => 2,
            CliError::Sim(_) | CliError::Output(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Input(m) | CliError::Output(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            engine,
            seed,
            no_svg,
        } => cmd_simulate(&config, &out, engine.as_deref(), seed, !no_svg),
        Command::Cancellation {
            config,
            out,
            sequence,
            fine_tuned,
        } => cmd_cancellation(&config, out.as_deref(), sequence.as_deref(), fine_tuned),
        Command::Sweep { config, out } => cmd_sweep(&config, out.as_deref()),
        Command::ExtractJ { results, frame, out } => cmd_extract_j(&results, &frame, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn save(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    let path = write_new(dir, name, bytes)
        .map_err(|e| CliError::Output(format!("cannot write {name} in {}: {e}", dir.display())))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(dir) => {
            let path = save(dir, name, bytes)?;
            eprintln!("{}", path.display());
        }
        None => print!("{}", String::from_utf8_lossy(bytes)),
    }
    Ok(())
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Output(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::Output(format!("CSV encoding failed: {e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Output(format!("JSON encoding failed: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

fn ket_label(s: QubitState) -> String {
    format!("|{}⟩", s.label())
}

// ----------------------------------------------------------------- simulate

const SIMULATE_HEADER: [&str; 5] = ["t_ns", "spectator_state", "arm", "fidelity", "ci_half_width"];

#[derive(Serialize)]
struct FitEntry {
    arm: String,
    spectator_state: String,
    fit: Option<FitResult>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SimulateSummary {
    config: String,
    engine: Engine,
    seed: u64,
    frame: FitFrame,
    shots: Option<u64>,
    fits: Vec<FitEntry>,
}

fn fit_entries(groups: &[(String, String, &FidelitySeries)], frame: FitFrame) -> Vec<FitEntry> {
    groups
        .iter()
        .map(|(arm, state, series)| {
            let (fit, error) = match extract_crosstalk(series, frame) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            FitEntry {
                arm: arm.clone(),
                spectator_state: state.clone(),
                fit,
                error,
            }
        })
        .collect()
}

fn cmd_simulate(
    config: &Path,
    out: &Path,
    engine: Option<&str>,
    seed: Option<u64>,
    svg: bool,
) -> CliResult<()> {
    let (json, mut cfg) = load_experiment(config)?;
    if let Some(e) = engine {
        cfg.engine = e.parse()?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let runs = run_state_protection(&cfg)?;

    let mut rows = Vec::new();
    for run in &runs {
        let s = &run.series;
        for (i, (&t, &f)) in s.times.iter().zip(&s.values).enumerate() {
            let ci = s.ci_half_width.as_ref().map_or(String::new(), |c| num(c[i]));
            rows.push(vec![
                num(t),
                run.spectator.label().to_string(),
                run.arm.as_str().to_string(),
                num(f),
                ci,
            ]);
        }
    }
    let csv = csv_bytes(&SIMULATE_HEADER, &rows)?;

    let frame = json.fit_frame();
    let groups: Vec<_> = runs
        .iter()
        .map(|r| (r.arm.as_str().to_string(), r.spectator.label().to_string(), &r.series))
        .collect();
    let summary = SimulateSummary {
        config: config.display().to_string(),
        engine: cfg.engine,
        seed: cfg.seed,
        frame,
        shots: cfg.shots,
        fits: fit_entries(&groups, frame),
    };
    let summary = json_bytes(&summary)?;

    let mut plots = Vec::new();
    if svg {
        let mut arms: Vec<_> = runs.iter().map(|r| r.arm).collect();
        arms.dedup();
        for arm in arms {
            let curves: Vec<svg::Curve> = runs
                .iter()
                .filter(|r| r.arm == arm)
                .map(|r| svg::Curve {
                    label: ket_label(r.spectator),
                    series: &r.series,
                })
                .collect();
            let title = format!("{} evolution, {} engine", arm.as_str(), engine_name(cfg.engine));
            if let Some(doc) = svg::render(&title, &curves) {
                plots.push((format!("fidelity_{}.svg", arm.as_str()), doc));
            }
        }
    }

    // Everything is computed before the first file is written.
    eprintln!("{}", save(out, "simulate.csv", &csv)?.display());
    eprintln!("{}", save(out, "summary.json", &summary)?.display());
    for (name, doc) in plots {
        eprintln!("{}", save(out, &name, doc.as_bytes())?.display());
    }
    Ok(())
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Lindblad => "lindblad",
        Engine::Redfield => "redfield",
        Engine::Closed => "closed",
    }
}

// ------------------------------------------------------------- cancellation

const CANCELLATION_HEADER: [&str; 7] =
    ["alpha", "beta", "sequence", "tau_ns", "omega_d_ghz", "residual_norm", "class"];

fn cmd_cancellation(
    config: &Path,
    out: Option<&Path>,
    sequence: Option<&str>,
    fine_tuned: bool,
) -> CliResult<()> {
    let mut cfg: CancellationJson = read_json(config)?;
    if let Some(s) = sequence {
        cfg.sequence = s.to_string();
    }
    let kind = cfg.kind()?;
    let taus = cfg.taus()?;
    let omega_d = cfg.omega_d();
    let report = cancellation_table(kind, cfg.pulse_qubit, omega_d, &taus)?;

    // The representative interval: the first generic one, or the first
    // fine-tuned one when only the survivors at fine tuning are wanted.
    let pick = |want_tuned: bool| {
        taus.iter()
            .copied()
            .find(|&t| omega_d == 0.0 || is_fine_tuned(t, omega_d) == want_tuned)
            .unwrap_or(taus[0])
    };
    let tau = pick(fine_tuned);
    let mut rows = Vec::new();
    for term in &report.terms {
        if fine_tuned
            && matches!(
                term.class,
                Classification::AlwaysCancels | Classification::CancelsAtFineTunedTau
            )
        {
            continue;
        }
        let residual = term
            .residuals
            .iter()
            .find(|&&(t, _)| t == tau)
            .map_or(f64::NAN, |&(_, r)| r);
        rows.push(vec![
            term.alpha.to_string(),
            term.beta.to_string(),
            report.sequence.clone(),
            num(tau),
            num(cfg.omega_d_ghz),
            num(residual),
            term.class.as_str().to_string(),
        ]);
    }
    emit(out, "cancellation.csv", &csv_bytes(&CANCELLATION_HEADER, &rows)?)
}

// -------------------------------------------------------------------- sweep

const SWEEP_HEADER: [&str; 5] = ["index", "axis", "value", "metric", "error_ratio"];

fn sweep_metric(cfg: &SweepJson, kind: SequenceKind, value: f64) -> zzsim::Result<f64> {
    match cfg.axis {
        SweepAxis::Tau | SweepAxis::J => {
            let (tau, j) = match cfg.axis {
                SweepAxis::Tau => (value, khz_to_rad_per_ns(cfg.j_khz)),
                _ => (cfg.tau_ns, khz_to_rad_per_ns(value)),
            };
            let seq = kind.build(tau, cfg.pulse_qubit)?;
            let h = cfg.h_main.as_ref().map_or((0.0, 0.0), |h| {
                (ghz_to_rad_per_ns(h.z_ghz), ghz_to_rad_per_ns(h.x_ghz))
            });
            let h_main = Pauli::Z.matrix() * zzsim::operator::C64::new(h.0, 0.0)
                + Pauli::X.matrix() * zzsim::operator::C64::new(h.1, 0.0);
            crosstalk_cycle_error(j, &h_main, &seq)
        }
        SweepAxis::OmegaD | SweepAxis::G => {
            let (alpha, beta) = cfg.term_axes()?;
            let (omega_d, g) = match cfg.axis {
                SweepAxis::OmegaD => (ghz_to_rad_per_ns(value), cfg.g_ghz),
                _ => (ghz_to_rad_per_ns(cfg.omega_d_ghz), value),
            };
            let seq = kind.build(cfg.tau_ns, cfg.pulse_qubit)?;
            let term = CouplingTerm::new(alpha, beta, g)?;
            Ok(first_order_integral(&term, &seq, omega_d)?.norm)
        }
    }
}

fn axis_name(a: SweepAxis) -> &'static str {
    match a {
        SweepAxis::Tau => "tau_ns",
        SweepAxis::OmegaD => "omega_d_ghz",
        SweepAxis::G => "g_ghz",
        SweepAxis::J => "j_khz",
    }
}

/// Least-squares slope of `ln y` against `ln x` over the positive points.
fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Serialize)]
struct SlopeReport {
    axis: &'static str,
    sequence: String,
    alpha: Option<String>,
    beta: Option<String>,
    points: usize,
    slope: f64,
}

fn cmd_sweep(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let cfg: SweepJson = read_json(config)?;
    cfg.validate()?;
    let kind: SequenceKind = cfg.sequence.parse()?;
    let metrics = cfg
        .values
        .par_iter()
        .map(|&v| sweep_metric(&cfg, kind, v))
        .collect::<zzsim::Result<Vec<f64>>>()?;
    let axis = axis_name(cfg.axis);
    let rows: Vec<Vec<String>> = metrics
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let ratio = if i == 0 { String::new() } else { num(metrics[i - 1] / m) };
            vec![i.to_string(), axis.to_string(), num(cfg.values[i]), num(m), ratio]
        })
        .collect();
    emit(out, "sweep.csv", &csv_bytes(&SWEEP_HEADER, &rows)?)?;
    if cfg.axis == SweepAxis::OmegaD {
        if let Some(slope) = log_log_slope(&cfg.values, &metrics) {
            let report = SlopeReport {
                axis,
                sequence: kind.name(),
                alpha: cfg.alpha.clone(),
                beta: cfg.beta.clone(),
                points: metrics.len(),
                slope,
            };
            let bytes = json_bytes(&report)?;
            match out {
                Some(dir) => eprintln!("{}", save(dir, "sweep_slope.json", &bytes)?.display()),
                None => eprint!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- extract-j

#[derive(Serialize)]
struct ExtractReport {
    results: String,
    frame: FitFrame,
    fits: Vec<FitEntry>,
}

fn read_simulate_csv(path: &Path) -> CliResult<Vec<(String, String, FidelitySeries)>> {
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != SIMULATE_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut groups: BTreeMap<(String, String), (usize, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| -> CliResult<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: column {}: {e}", line + 1, SIMULATE_HEADER[i])))
        };
        let (t, f) = (parse(0)?, parse(3)?);
        let order = groups.len();
        let g = groups
            .entry((rec[2].to_string(), rec[1].to_string()))
            .or_insert_with(|| (order, Vec::new(), Vec::new()));
        g.1.push(t);
        g.2.push(f);
    }
    if groups.is_empty() {
        return Err(bad("no data rows".into()));
    }
    let mut out: Vec<_> = groups.into_iter().collect();
    out.sort_by_key(|(_, g)| g.0);
    out.into_iter()
        .map(|((arm, state), (_, t, f))| {
            let label = format!("{arm} {state}");
            let s = FidelitySeries::new(t, f, label).map_err(|e| bad(e.to_string()))?;
            Ok((arm, state, s))
        })
        .collect()
}

fn cmd_extract_j(results: &Path, frame: &str, out: Option<&Path>) -> CliResult<()> {
    let frame: FitFrame = frame.parse()?;
    let groups = read_simulate_csv(results)?;
    let refs: Vec<_> = groups.iter().map(|(a, s, series)| (a.clone(), s.clone(), series)).collect();
    let report = ExtractReport {
        results: results.display().to_string(),
        frame,
        fits: fit_entries(&refs, frame),
    };
    emit(out, "extract_j.json", &json_bytes(&report)?)
}
