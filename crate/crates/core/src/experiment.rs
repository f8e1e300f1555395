//! End-to-end experiments: Ramsey-style state protection, crosstalk fits,
//! shot noise with bootstrap error bars and the random-gate DDPG comparison.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dd::{
    default_gate_set, gate_centres, random_gate_circuit, run_schedule, DDSequence, Gate, Pulse,
    SequenceKind, TIME_TOL,
};
use crate::device::{device_frame, DeviceSpec};
use crate::error::{Error, Result};
use crate::lindblad::{
    integrate_interval, liouvillian, step_cap, unvectorize, vectorize, FidelitySeries, JumpOperator,
    LindbladSpec,
};
use crate::magnus::lab_frame_cancels;
use crate::operator::{
    kron_kets, matrix_exp, rotation, DensityMatrix, Ket, Mat, Pauli, QubitState, C64,
};
use crate::redfield::{OhmicBathSpec, RedfieldEngine, RedfieldOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Lindblad,
    Redfield,
    Closed,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lindblad" => Ok(Engine::Lindblad),
            "redfield" => Ok(Engine::Redfield),
            "closed" => Ok(Engine::Closed),
            other => Err(Error::Config(format!("unknown engine '{other}'"))),
        }
    }
}

/// Main-qubit preparation. The state is made from `|0>` by a `pi/2` rotation
/// and measured after undoing that rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MainState {
    #[default]
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl MainState {
    /// `(axis, signed angle)` of the ideal preparation rotation.
    fn rotation(self) -> (Pauli, f64) {
        match self {
            MainState::Plus => (Pauli::Y, PI / 2.0),
            MainState::Minus => (Pauli::Y, -PI / 2.0),
            MainState::PlusI => (Pauli::X, -PI / 2.0),
            MainState::MinusI => (Pauli::X, PI / 2.0),
        }
    }

    /// Preparation unitary with the angle magnitude over-rotated by `eps`.
    pub fn prep_unitary(self, eps: f64) -> Mat {
        let (axis, angle) = self.rotation();
        rotation(axis, angle + eps * angle.signum())
    }

    pub fn ket(self) -> Ket {
        match self {
            MainState::Plus => QubitState::Plus.ket(),
            MainState::Minus => QubitState::Minus.ket(),
            MainState::PlusI => QubitState::PlusI.ket(),
            MainState::MinusI => QubitState::MinusI.ket(),
        }
    }
}

impl std::str::FromStr for MainState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(MainState::Plus),
            "minus" | "-" => Ok(MainState::Minus),
            "plus_i" | "+i" => Ok(MainState::PlusI),
            "minus_i" | "-i" => Ok(MainState::MinusI),
            other => Err(Error::Config(format!("unknown main state '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    None,
    Lindblad(LindbladSpec),
    Redfield(OhmicBathSpec),
}

/// Decoupling applied during a state-protection run.
#[derive(Clone, Debug, PartialEq)]
pub struct DdConfig {
    /// One cycle; the qubit field of its pulses is replaced by `qubits`.
    pub sequence: DDSequence,
    /// Target qubits; empty keeps the qubits named by the pulses.
    pub qubits: Vec<usize>,
    /// Number of cycles; `None` repeats through the whole grid.
    pub repeats: Option<usize>,
}

impl DdConfig {
    pub fn targets(&self) -> Vec<usize> {
        if self.qubits.is_empty() {
            self.sequence.qubits()
        } else {
            self.qubits.clone()
        }
    }

    fn placed(&self) -> DDSequence {
        if self.qubits.is_empty() {
            self.sequence.clone()
        } else {
            self.sequence.on_qubits(&self.qubits)
        }
    }

    /// Absolute pulse list up to `t_end`.
    pub fn pulses(&self, t_end: f64) -> Vec<Pulse> {
        let cycles = self
            .repeats
            .unwrap_or_else(|| (t_end / self.sequence.cycle).ceil().max(0.0) as usize);
        self.placed()
            .timeline(cycles, 0.0)
            .into_iter()
            .filter(|p| p.time <= t_end + TIME_TOL)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub device: DeviceSpec,
    pub noise: NoiseModel,
    pub engine: Engine,
    pub main_qubit: usize,
    pub spectator_states: Vec<QubitState>,
    pub main_state: MainState,
    pub dd: Option<DdConfig>,
    /// Final time in ns.
    pub t_max: f64,
    pub points: usize,
    pub shots: Option<u64>,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    /// Over-rotation of the preparation and undo gates, in rad.
    pub over_rotation: f64,
    pub redfield: RedfieldOptions,
}

pub const DEFAULT_POINTS: usize = 70;
pub const DEFAULT_RESAMPLES: usize = 10;

impl ExperimentConfig {
    /// A free-evolution configuration with the default grid and statistics.
    pub fn new(device: DeviceSpec, noise: NoiseModel, main_qubit: usize, t_max: f64) -> Self {
        let engine = match noise {
            NoiseModel::Redfield(_) => Engine::Redfield,
            _ => Engine::Lindblad,
        };
        Self {
            device,
            noise,
            engine,
            main_qubit,
            spectator_states: vec![QubitState::Zero, QubitState::One, QubitState::Plus],
            main_state: MainState::Plus,
            dd: None,
            t_max,
            points: DEFAULT_POINTS,
            shots: None,
            bootstrap_resamples: DEFAULT_RESAMPLES,
            seed: 0,
            over_rotation: 0.0,
            redfield: RedfieldOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.device.n;
        if self.main_qubit >= n {
            return Err(Error::Config(format!("main qubit {} out of range", self.main_qubit)));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::Config(format!("t_max {} must be > 0", self.t_max)));
        }
        if self.points < 2 {
            return Err(Error::Config("need at least 2 grid points".into()));
        }
        if self.spectator_states.is_empty() {
            return Err(Error::Config("no spectator states requested".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be positive".into()));
        }
        if self.shots.is_some() && self.bootstrap_resamples < 2 {
            return Err(Error::Config("bootstrap needs at least 2 resamples".into()));
        }
        if let Some(dd) = &self.dd {
            let targets = dd.targets();
            if targets.is_empty() || targets.iter().any(|&q| q >= n) {
                return Err(Error::Config("DD qubits must be nonempty and inside the register".into()));
            }
        }
        match (&self.engine, &self.noise) {
            (Engine::Redfield, NoiseModel::Redfield(b)) => b.validate(),
            (Engine::Redfield, _) => Err(Error::Config("redfield engine needs a bath".into())),
            (_, NoiseModel::Redfield(_)) => {
                Err(Error::Config("a bath model needs the redfield engine".into()))
            }
            _ => Ok(()),
        }
    }

    /// Uniform grid on `[0, t_max]`. With decoupling, each time is moved to
    /// the nearest whole number of cycles so that every sample sees complete
    /// cycles.
    pub fn time_grid(&self) -> Result<Vec<f64>> {
        let base = linspace(self.t_max, self.points);
        match &self.dd {
            Some(dd) => snap_to_cycles(&base, dd.sequence.cycle),
            None => Ok(base),
        }
    }

    /// Spectators: every qubit except the main one.
    pub fn spectators(&self) -> Vec<usize> {
        (0..self.device.n).filter(|&q| q != self.main_qubit).collect()
    }
}

pub fn linspace(t_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| t_max * k as f64 / (points - 1) as f64)
        .collect()
}

pub fn snap_to_cycles(grid: &[f64], cycle: f64) -> Result<Vec<f64>> {
    let spacing = grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if cycle > spacing * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "DD cycle {cycle} ns is longer than the grid spacing {spacing} ns"
        )));
    }
    Ok(grid.iter().map(|t| (t / cycle).round() * cycle).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Free,
    Dd,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Free => "free",
            Arm::Dd => "dd",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmSeries {
    pub arm: Arm,
    pub spectator: QubitState,
    pub series: FidelitySeries,
}

struct ClosedModel {
    /// Main-qubit Z coefficient in the rotating frame.
    omega_main: f64,
    /// `(J, pulsed)` per spectator coupled to the main qubit.
    neighbours: Vec<(usize, f64)>,
    gamma: f64,
}

enum Backend {
    Closed(ClosedModel),
    Lindblad { h: Mat, diss: crate::lindblad::Dissipator, cap: f64 },
    Redfield(Box<RedfieldEngine>),
}

fn closed_model(cfg: &ExperimentConfig) -> Result<ClosedModel> {
    let m = cfg.main_qubit;
    if cfg.over_rotation != 0.0 {
        return Err(Error::Config("closed engine assumes ideal preparation".into()));
    }
    let mut gamma = 0.0;
    if let NoiseModel::Lindblad(spec) = &cfg.noise {
        for op in &spec.ops {
            let JumpOperator::Pauli(t) = &op.op else {
                return Err(Error::Config("closed engine covers Z-type dephasing only".into()));
            };
            if t.labels.iter().any(|p| matches!(p, Pauli::X | Pauli::Y)) {
                return Err(Error::Config("closed engine covers Z-type dephasing only".into()));
            }
            if t.n_qubits() != cfg.device.n {
                return Err(Error::Dimension("jump operator size differs from the device".into()));
            }
            if t.labels[m] == Pauli::Z {
                gamma += op.rate;
            }
        }
    }
    let neighbours = cfg
        .spectators()
        .into_iter()
        .map(|q| (q, cfg.device.coupling(m, q)))
        .filter(|&(_, j)| j != 0.0)
        .collect();
    Ok(ClosedModel {
        omega_main: 0.5 * (cfg.device.omega_d - cfg.device.omega_q[m]),
        neighbours,
        gamma,
    })
}

impl ClosedModel {
    /// `(1 + e^{-2 gamma t} Re Phi(t))/2` with `Phi` the spectator-averaged
    /// phase of the main-qubit coherence. Decoupled neighbours contribute no
    /// phase at whole-cycle times.
    fn fidelity(&self, spectator: QubitState, decoupled: &[usize], t: f64) -> f64 {
        let p1 = spectator.ket()[1].norm_sqr();
        let p0 = 1.0 - p1;
        let mut phi = C64::new(0.0, -2.0 * self.omega_main * t).exp();
        for &(q, j) in &self.neighbours {
            if decoupled.contains(&q) {
                continue;
            }
            phi *= C64::new(0.0, -2.0 * j * t).exp() * p0 + C64::new(0.0, 2.0 * j * t).exp() * p1;
        }
        0.5 * (1.0 + (-2.0 * self.gamma * t).exp() * phi.re)
    }
}

fn build_backend(cfg: &ExperimentConfig) -> Result<Backend> {
    match cfg.engine {
        Engine::Closed => Ok(Backend::Closed(closed_model(cfg)?)),
        Engine::Lindblad => {
            let h = device_frame(&cfg.device).static_part;
            let diss = match &cfg.noise {
                NoiseModel::Lindblad(s) => s.compile(cfg.device.n)?,
                _ => crate::lindblad::Dissipator::none(cfg.device.n),
            };
            let cap = step_cap(crate::device::Hamiltonian::max_frequency(&h) + diss.rate_scale());
            Ok(Backend::Lindblad { h, diss, cap })
        }
        Engine::Redfield => {
            let NoiseModel::Redfield(bath) = &cfg.noise else {
                return Err(Error::Config("redfield engine needs a bath".into()));
            };
            Ok(Backend::Redfield(Box::new(RedfieldEngine::new(
                &device_frame(&cfg.device),
                bath,
                &cfg.redfield,
            )?)))
        }
    }
}

fn initial_state(cfg: &ExperimentConfig, spectator: QubitState) -> Result<DensityMatrix> {
    let prep = cfg.main_state.prep_unitary(cfg.over_rotation);
    let main = &prep * QubitState::Zero.ket();
    let kets: Vec<Ket> = (0..cfg.device.n)
        .map(|q| if q == cfg.main_qubit { main.clone() } else { spectator.ket() })
        .collect();
    DensityMatrix::from_ket(&kron_kets(&kets))
}

/// `<0| P^dag rho_main P |0>` with `P` the (possibly over-rotated) preparation.
fn undo_and_measure(cfg: &ExperimentConfig, rho: &DensityMatrix) -> Result<f64> {
    let prep = cfg.main_state.prep_unitary(cfg.over_rotation);
    let red = rho.reduced(&[cfg.main_qubit])?;
    let back = prep.adjoint() * red * &prep;
    Ok(back[(0, 0)].re.clamp(0.0, 1.0))
}

fn cell_stream(arm: Arm, state_idx: usize) -> u64 {
    ((arm as u64) << 32) | state_idx as u64
}

fn exact_fidelities(
    cfg: &ExperimentConfig,
    backend: &Backend,
    pulses: &[Pulse],
    grid: &[f64],
    spectator: QubitState,
) -> Result<Vec<f64>> {
    let n = cfg.device.n;
    match backend {
        Backend::Closed(model) => {
            let decoupled = if pulses.is_empty() {
                Vec::new()
            } else {
                closed_decoupled(cfg)?
            };
            Ok(grid.iter().map(|&t| model.fidelity(spectator, &decoupled, t)).collect())
        }
        Backend::Lindblad { h, diss, cap } => {
            let rho0 = initial_state(cfg, spectator)?;
            let mut out = Vec::with_capacity(grid.len());
            run_schedule(
                rho0,
                n,
                0.0,
                pulses,
                grid,
                |rho: DensityMatrix, t0, t1| {
                    let m = integrate_interval(rho.into_matrix(), h, diss, t0, t1, *cap)?;
                    Ok(DensityMatrix::from_raw(m, n))
                },
                |_, rho| {
                    out.push(undo_and_measure(cfg, rho)?);
                    Ok(())
                },
            )?;
            Ok(out)
        }
        Backend::Redfield(engine) => {
            let rho0 = initial_state(cfg, spectator)?;
            engine
                .evolve(&rho0, grid, pulses)?
                .iter()
                .map(|rho| undo_and_measure(cfg, rho))
                .collect()
        }
    }
}

/// Spectators whose ZZ phase the configured decoupling removes exactly at
/// whole-cycle times.
fn closed_decoupled(cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    let Some(dd) = &cfg.dd else { return Ok(Vec::new()) };
    let targets = dd.targets();
    if targets.contains(&cfg.main_qubit) {
        return Err(Error::Config("closed engine cannot pulse the main qubit".into()));
    }
    if dd.qubits.is_empty() {
        return Err(Error::Config("closed engine needs a named sequence".into()));
    }
    let single = dd.sequence.on_qubits(&[1]);
    if !lab_frame_cancels(Pauli::I, Pauli::Z, &single) {
        return Err(Error::Config(format!(
            "closed engine needs a sequence that refocuses Z; {} does not",
            dd.sequence.name()
        )));
    }
    Ok(targets)
}

/// Run one arm for every requested spectator state on `grid`.
fn run_arm(cfg: &ExperimentConfig, backend: &Backend, arm: Arm, grid: &[f64]) -> Result<Vec<ArmSeries>> {
    let pulses = match (arm, &cfg.dd) {
        (Arm::Dd, Some(dd)) => dd.pulses(grid[grid.len() - 1]),
        (Arm::Dd, None) => return Err(Error::Config("DD arm requested without a sequence".into())),
        (Arm::Free, _) => Vec::new(),
    };
    cfg.spectator_states
        .par_iter()
        .enumerate()
        .map(|(si, &s)| {
            let exact = exact_fidelities(cfg, backend, &pulses, grid, s).map_err(|e| {
                e.with_context(&format!("{} arm, spectator {s}", arm.as_str()))
            })?;
            let label = format!("{}:{}", arm.as_str(), s);
            let series = match cfg.shots {
                None => FidelitySeries::new(grid.to_vec(), exact, label)?,
                Some(shots) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(cell_stream(arm, si));
                    let mut means = Vec::with_capacity(exact.len());
                    let mut widths = Vec::with_capacity(exact.len());
                    for &p in &exact {
                        let counts = shot_sample_with(p, shots, &mut rng)?;
                        let b = bootstrap_with(&counts, cfg.bootstrap_resamples, &mut rng)?;
                        means.push(b.mean);
                        widths.push(b.half_width);
                    }
                    let mut s = FidelitySeries::new(grid.to_vec(), means, label)?;
                    s.ci_half_width = Some(widths);
                    s
                }
            };
            Ok(ArmSeries { arm, spectator: s, series })
        })
        .collect()
}

/// Free arm for every spectator state, followed by the DD arm when the
/// configuration has one. Both arms share one grid.
pub fn run_state_protection(cfg: &ExperimentConfig) -> Result<Vec<ArmSeries>> {
    cfg.validate()?;
    let grid = cfg.time_grid()?;
    let backend = build_backend(cfg)?;
    let mut out = run_arm(cfg, &backend, Arm::Free, &grid)?;
    if cfg.dd.is_some() {
        out.extend(run_arm(cfg, &backend, Arm::Dd, &grid)?);
    }
    Ok(out)
}

/// Only the arm selected by `cfg.dd`: protected if present, free otherwise.
pub fn run_single_arm(cfg: &ExperimentConfig) -> Result<Vec<ArmSeries>> {
    cfg.validate()?;
    let grid = cfg.time_grid()?;
    let backend = build_backend(cfg)?;
    let arm = if cfg.dd.is_some() { Arm::Dd } else { Arm::Free };
    run_arm(cfg, &backend, arm, &grid)
}

/// Largest pointwise spread across a set of series on a common grid.
pub fn pointwise_spread(series: &[&FidelitySeries]) -> Vec<f64> {
    let len = series.iter().map(|s| s.values.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals = series.iter().map(|s| s.values[i]);
            let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect()
}

// ---------------------------------------------------------------- fitting

pub const LM_MAX_ITER: usize = 200;
pub const LM_STEP_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Levenberg-Marquardt with Marquardt's diagonal scaling. `model` returns the
/// value at `t` and writes the gradient into its third argument. The step is
/// converged when `|dp_j| <= LM_STEP_TOL * scale(p, j)` for every `j`.
pub fn levenberg_marquardt<F, S>(t: &[f64], y: &[f64], p0: Vec<f64>, model: F, scale: S) -> Result<LmOutcome>
where
    F: Fn(f64, &[f64], &mut [f64]) -> f64,
    S: Fn(&[f64], usize) -> f64,
{
    let n = t.len();
    let k = p0.len();
    if n <= k {
        return Err(Error::Fit(format!("{n} points cannot fit {k} parameters")));
    }
    let eval = |p: &[f64]| -> (DVector<f64>, DMatrix<f64>) {
        let mut r = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, k);
        let mut g = vec![0.0; k];
        for i in 0..n {
            r[i] = model(t[i], p, &mut g) - y[i];
            for (j, gj) in g.iter().enumerate() {
                jac[(i, j)] = *gj;
            }
        }
        (r, jac)
    };
    let mut p = p0;
    let (mut r, mut jac) = eval(&p);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::Fit("model is not finite at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    'outer: while iterations < LM_MAX_ITER {
        iterations += 1;
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let diag: Vec<f64> = (0..k).map(|j| a[(j, j)].max(1e-300)).collect();
        loop {
            let mut m = a.clone();
            for j in 0..k {
                m[(j, j)] += lambda * diag[j];
            }
            let step = m.cholesky().map(|c| c.solve(&(-&g)));
            let Some(step) = step else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break 'outer;
                }
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (r2, j2) = eval(&trial);
            let c2 = r2.norm_squared();
            if c2.is_finite() && c2 <= cost {
                let small = (0..k).all(|j| step[j].abs() <= LM_STEP_TOL * scale(&trial, j));
                p = trial;
                r = r2;
                jac = j2;
                cost = c2;
                lambda = (lambda / 10.0).max(1e-12);
                if small {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No downhill step exists at any damping: a minimum.
                converged = true;
                break 'outer;
            }
        }
    }
    if !converged {
        log::warn!("Levenberg-Marquardt stopped after {iterations} iterations without converging");
    }
    let dof = (n - k) as f64;
    let s2 = cost / dof;
    let covariance = (jac.transpose() * &jac)
        .try_inverse()
        .map(|inv| inv * s2)
        .ok_or_else(|| Error::Fit("singular normal matrix at the fitted point".into()))?;
    Ok(LmOutcome {
        params: p,
        covariance,
        ssr: cost,
        iterations,
        converged,
    })
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    let n = times.len();
    if n < 8 {
        return Err(Error::Fit(format!("{n} samples are too few to fit an oscillation")));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Fit("time grid must be increasing".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        if (t - (times[0] + i as f64 * dt)).abs() > 1e-6 * dt {
            return Err(Error::Fit("oscillation fits need a uniform time grid".into()));
        }
    }
    Ok(dt)
}

/// FFT estimate of the dominant angular frequency, with zero padding and
/// parabolic refinement around the peak bin.
pub fn fft_peak_frequency(times: &[f64], values: &[f64]) -> Result<f64> {
    let dt = uniform_step(times)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * scale.max(f64::MIN_POSITIVE) || spread == 0.0 {
        return Err(Error::Fit("series is constant: no oscillation to fit".into()));
    }
    let m = values.len().next_power_of_two() * 8;
    let mut buf: Vec<C64> = values.iter().map(|v| C64::new(v - mean, 0.0)).collect();
    buf.resize(m, C64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mag: Vec<f64> = buf[..m / 2].iter().map(|z| z.norm()).collect();
    let (kmax, &peak) = mag
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Fit("empty spectrum".into()))?;
    let mut sorted = mag[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if kmax + 1 >= mag.len() || peak <= 3.0 * median {
        return Err(Error::Fit("no spectral peak above the noise floor".into()));
    }
    let (a, b, c) = (mag[kmax - 1], peak, mag[kmax + 1]);
    let den = a - 2.0 * b + c;
    let shift = if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
    Ok(2.0 * PI * (kmax as f64 + shift.clamp(-0.5, 0.5)) / (m as f64 * dt))
}

/// Which relation turns the fitted angular frequency into `J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FitFrame {
    /// `Omega = 2J`.
    #[default]
    Plus,
    /// `Omega = 4J` (zero frame, spectator in `|1>`).
    Zero,
}

impl std::str::FromStr for FitFrame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(FitFrame::Plus),
            "zero" | "0" => Ok(FitFrame::Zero),
            other => Err(Error::Config(format!("unknown fit frame '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// ZZ strength in rad/ns.
    pub j_estimate: f64,
    pub j_uncertainty: f64,
    /// Envelope decay rate in 1/ns.
    pub decay_rate: f64,
    pub decay_uncertainty: f64,
    /// Fitted angular frequency in rad/ns.
    pub omega: f64,
    pub omega_uncertainty: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Standard errors of `[A, Gamma, Omega, phi, c]`.
    pub uncertainties: [f64; 5],
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
}

/// Fit `A e^{-Gamma t} cos(Omega t + phi) + c` and convert `Omega` to `J`.
pub fn extract_crosstalk(series: &FidelitySeries, frame: FitFrame) -> Result<FitResult> {
    let t = &series.times;
    let y = &series.values;
    let w0 = fft_peak_frequency(t, y)?;
    let t0 = t[0];
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let z: C64 = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| C64::new(0.0, -w0 * (ti - t0)).exp() * (yi - mean))
        .sum();
    let a0 = 2.0 * z.norm() / n;
    let phi0 = z.arg();
    let model = |ti: f64, p: &[f64], g: &mut [f64]| -> f64 {
        let s = ti - t0;
        let e = (-p[1] * s).exp();
        let arg = p[2] * s + p[3];
        let (sn, cs) = arg.sin_cos();
        g[0] = e * cs;
        g[1] = -s * p[0] * e * cs;
        g[2] = -s * p[0] * e * sn;
        g[3] = -p[0] * e * sn;
        g[4] = 1.0;
        p[0] * e * cs + p[4]
    };
    let scale = |p: &[f64], j: usize| match j {
        0 | 4 => p[0].abs(),
        1 => p[1].abs() + 1e-3 * p[2].abs(),
        2 => p[2].abs(),
        _ => 1.0,
    };
    let fit = levenberg_marquardt(t, y, vec![a0, 0.0, w0, phi0, mean], model, scale)?;
    let p = &fit.params;
    let mut unc = [0.0; 5];
    for (j, u) in unc.iter_mut().enumerate() {
        *u = fit.covariance[(j, j)].max(0.0).sqrt();
    }
    let mut omega = p[2];
    let mut amplitude = p[0];
    let mut phase = p[3];
    if omega < 0.0 {
        omega = -omega;
        phase = -phase;
    }
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += PI;
    }
    let phase = (phase + PI).rem_euclid(2.0 * PI) - PI;
    let periods = omega * (t[t.len() - 1] - t0) / (2.0 * PI);
    if periods < 1.5 {
        return Err(Error::Fit(format!(
            "series spans {periods:.2} oscillation periods; at least 1.5 are needed"
        )));
    }
    let div = match frame {
        FitFrame::Plus => 2.0,
        FitFrame::Zero => 4.0,
    };
    Ok(FitResult {
        j_estimate: omega / div,
        j_uncertainty: unc[2] / div,
        decay_rate: p[1],
        decay_uncertainty: unc[1],
        omega,
        omega_uncertainty: unc[2],
        amplitude,
        phase,
        offset: p[4],
        uncertainties: unc,
        method: "fft-seeded levenberg-marquardt".into(),
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub rate_uncertainty: f64,
    pub amplitude: f64,
    pub amplitude_uncertainty: f64,
    pub floor: f64,
}

/// Fit `floor + A e^{-Gamma t}` with the floor held fixed.
pub fn fit_exponential_decay(times: &[f64], values: &[f64], floor: f64) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Fit("decay fit needs at least 3 matching samples".into()));
    }
    let t0 = times[0];
    let a0 = values[0] - floor;
    if a0.abs() <= 1e-15 {
        return Err(Error::Fit("no decay amplitude above the floor".into()));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| (v - floor) * a0.signum() > 1e-12)
        .map(|(&t, &v)| (t - t0, ((v - floor) / a0).ln()))
        .collect();
    let g0 = if pts.len() >= 2 {
        let num: f64 = pts.iter().map(|(t, l)| t * l).sum();
        let den: f64 = pts.iter().map(|(t, _)| t * t).sum();
        if den > 0.0 { (-num / den).max(0.0) } else { 0.0 }
    } else {
        0.0
    };
    let model = |t: f64, p: &[f64], g: &mut [f64]| -> f64 {
        let s = t - t0;
        let e = (-p[1] * s).exp();
        g[0] = e;
        g[1] = -s * p[0] * e;
        floor + p[0] * e
    };
    let span = times[times.len() - 1] - t0;
    let scale = |p: &[f64], j: usize| match j {
        0 => p[0].abs(),
        _ => p[1].abs() + 1e-6 / span,
    };
    let fit = levenberg_marquardt(times, values, vec![a0, g0], model, scale)?;
    Ok(DecayFit {
        rate: fit.params[1],
        rate_uncertainty: fit.covariance[(1, 1)].max(0.0).sqrt(),
        amplitude: fit.params[0],
        amplitude_uncertainty: fit.covariance[(0, 0)].max(0.0).sqrt(),
        floor,
    })
}

// ------------------------------------------------------- shots and bootstrap

/// Measurement record: number of `0` outcomes out of `shots`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub zeros: u64,
    pub shots: u64,
}

impl ShotCounts {
    pub fn fraction(&self) -> f64 {
        self.zeros as f64 / self.shots as f64
    }
}

/// Binomial draw of `0` outcomes with probability `p`.
pub fn shot_sample(p: f64, shots: u64, rng_seed: u64) -> Result<ShotCounts> {
    shot_sample_with(p, shots, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

pub fn shot_sample_with<R: Rng + ?Sized>(p: f64, shots: u64, rng: &mut R) -> Result<ShotCounts> {
    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(Error::Config(format!("probability {p} outside [0, 1]")));
    }
    let p = p.clamp(0.0, 1.0);
    let dist = Binomial::new(shots, p).map_err(|e| Error::Config(format!("binomial: {e}")))?;
    Ok(ShotCounts {
        zeros: dist.sample(rng),
        shots,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub mean: f64,
    pub std: f64,
    /// Two standard deviations.
    pub half_width: f64,
}

/// Resample the individual shots with replacement `resamples` times; report
/// the mean and sample standard deviation of the resampled fractions.
pub fn bootstrap_ci(counts: &ShotCounts, resamples: usize, rng_seed: u64) -> Result<BootstrapEstimate> {
    bootstrap_with(counts, resamples, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

pub fn bootstrap_with<R: Rng + ?Sized>(
    counts: &ShotCounts,
    resamples: usize,
    rng: &mut R,
) -> Result<BootstrapEstimate> {
    if counts.shots == 0 || counts.zeros > counts.shots {
        return Err(Error::Config("bootstrap needs a nonempty, consistent count record".into()));
    }
    if resamples < 2 {
        return Err(Error::Config("bootstrap needs at least 2 resamples".into()));
    }
    let fractions: Vec<f64> = (0..resamples)
        .map(|_| {
            let hits = (0..counts.shots)
                .filter(|_| rng.random_range(0..counts.shots) < counts.zeros)
                .count();
            hits as f64 / counts.shots as f64
        })
        .collect();
    let mean = fractions.iter().sum::<f64>() / resamples as f64;
    let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    let std = var.sqrt();
    Ok(BootstrapEstimate {
        mean,
        std,
        half_width: 2.0 * std,
    })
}

// -------------------------------------------------------------------- DDPG

#[derive(Clone, Debug, PartialEq)]
pub struct DdpgConfig {
    pub device: DeviceSpec,
    pub noise: LindbladSpec,
    pub main_qubit: usize,
    pub spectator_states: Vec<QubitState>,
    /// Gate duration in ns; gate centres sit two durations apart.
    pub gate_duration: f64,
    /// Sequence on the spectators; its pulse interval is the gate duration.
    pub dd_kind: SequenceKind,
    pub gate_set: Vec<Gate>,
    pub seed: u64,
}

impl DdpgConfig {
    pub fn new(device: DeviceSpec, noise: LindbladSpec, main_qubit: usize) -> Self {
        Self {
            device,
            noise,
            main_qubit,
            spectator_states: vec![QubitState::Zero, QubitState::One, QubitState::Plus],
            gate_duration: 71.1,
            dd_kind: SequenceKind::Xy4,
            gate_set: default_gate_set(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdpgResult {
    pub depths: Vec<usize>,
    pub times: Vec<f64>,
    pub free_mean: Vec<f64>,
    pub dd_mean: Vec<f64>,
    pub free_fit: DecayFit,
    pub dd_fit: DecayFit,
    /// Free rate over DD rate.
    pub ratio: f64,
}

fn gate_pulse(g: &Gate, time: f64, qubit: usize) -> Pulse {
    let mut angle = g.angle.rem_euclid(2.0 * PI);
    if angle == 0.0 {
        angle = 2.0 * PI;
    }
    Pulse {
        time,
        qubit,
        axis: g.axis,
        angle,
    }
}

/// Random single-qubit gate circuits on the main qubit, with and without
/// decoupling on the spectators in the gaps between gates. Fidelity against
/// the ideal circuit output is averaged over runs and spectator states at
/// each depth, and `1/2 + A e^{-Gamma t}` is fitted to each arm.
pub fn run_random_gate_ddpg(cfg: &DdpgConfig, runs: usize, depth_schedule: &[usize]) -> Result<DdpgResult> {
    let n = cfg.device.n;
    let m = cfg.main_qubit;
    if m >= n || runs == 0 || depth_schedule.len() < 3 {
        return Err(Error::Config("DDPG needs a valid main qubit, runs > 0 and 3+ depths".into()));
    }
    if depth_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("depth schedule must be strictly increasing".into()));
    }
    if !(cfg.gate_duration > 0.0) {
        return Err(Error::Config("gate duration must be > 0".into()));
    }
    let d = cfg.gate_duration;
    let max_depth = *depth_schedule.last().unwrap();
    let times: Vec<f64> = depth_schedule.iter().map(|&k| 2.0 * d * k as f64).collect();
    let t_end = times[times.len() - 1];
    let spectators: Vec<usize> = (0..n).filter(|&q| q != m).collect();

    let seq = cfg.dd_kind.build(d, 0)?;
    let shifted = DDSequence {
        pulses: seq.pulses.iter().map(|p| Pulse { time: p.time - d / 2.0, ..*p }).collect(),
        ..seq
    };
    let cycles = (t_end / shifted.cycle).ceil() as usize + 1;
    let dd_pulses: Vec<Pulse> = shifted
        .on_qubits(&spectators)
        .timeline(cycles, 0.0)
        .into_iter()
        .filter(|p| p.time >= 0.0 && p.time <= t_end + TIME_TOL)
        .collect();

    let h = device_frame(&cfg.device).static_part;
    let diss = cfg.noise.compile(n)?;
    let liou = liouvillian(&h, &diss);
    let cache: std::sync::Mutex<HashMap<i64, std::sync::Arc<Mat>>> = Default::default();
    let propagate = |rho: DensityMatrix, t0: f64, t1: f64| -> Result<DensityMatrix> {
        let key = ((t1 - t0) * 1e9).round() as i64;
        let p = {
            let hit = cache.lock().expect("propagator cache").get(&key).cloned();
            match hit {
                Some(p) => p,
                None => {
                    let p = std::sync::Arc::new(matrix_exp(&liou, C64::new(t1 - t0, 0.0))?);
                    cache.lock().expect("propagator cache").insert(key, p.clone());
                    p
                }
            }
        };
        let v = &*p * vectorize(rho.matrix());
        Ok(DensityMatrix::from_raw(unvectorize(&v, 1 << n), n))
    };
    let prep = MainState::Plus.prep_unitary(0.0);
    let psi0 = &prep * QubitState::Zero.ket();

    let cells: Vec<(usize, usize)> = (0..runs)
        .flat_map(|r| (0..cfg.spectator_states.len()).map(move |s| (r, s)))
        .collect();
    let per_cell: Vec<(Vec<f64>, Vec<f64>)> = cells
        .par_iter()
        .map(|&(r, si)| -> Result<(Vec<f64>, Vec<f64>)> {
            let gates = random_gate_circuit(cfg.seed.wrapping_add(r as u64), max_depth, &cfg.gate_set)?;
            let centres = gate_centres(max_depth, d);
            let gate_pulses: Vec<Pulse> =
                gates.iter().zip(&centres).map(|(g, &t)| gate_pulse(g, t, m)).collect();
            for p in &dd_pulses {
                if centres.iter().any(|&c| (c - p.time).abs() < TIME_TOL) {
                    return Err(Error::Config(format!(
                        "DD pulse collides with a gate at {} ns",
                        p.time
                    )));
                }
            }
            let mut ideal = Vec::with_capacity(depth_schedule.len());
            let mut psi = psi0.clone();
            let mut applied = 0;
            for &k in depth_schedule {
                while applied < k {
                    psi = gates[applied].unitary() * psi;
                    applied += 1;
                }
                ideal.push(psi.clone());
            }
            let spectator = cfg.spectator_states[si];
            let kets: Vec<Ket> = (0..n)
                .map(|q| if q == m { psi0.clone() } else { spectator.ket() })
                .collect();
            let rho0 = DensityMatrix::from_ket(&kron_kets(&kets))?;
            let arm = |extra: &[Pulse]| -> Result<Vec<f64>> {
                let mut events = gate_pulses.clone();
                events.extend_from_slice(extra);
                let mut fid = Vec::with_capacity(times.len());
                run_schedule(rho0.clone(), n, 0.0, &events, &times, &propagate, |i, rho| {
                    let red = rho.reduced(&[m])?;
                    let v = &ideal[i];
                    fid.push((v.adjoint() * red * v)[(0, 0)].re);
                    Ok(())
                })?;
                Ok(fid)
            };
            Ok((arm(&[])?, arm(&dd_pulses)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let cells_f = per_cell.len() as f64;
    let mut free_mean = vec![0.0; times.len()];
    let mut dd_mean = vec![0.0; times.len()];
    for (f, dd) in &per_cell {
        for i in 0..times.len() {
            free_mean[i] += f[i] / cells_f;
            dd_mean[i] += dd[i] / cells_f;
        }
    }
    let free_fit = fit_exponential_decay(&times, &free_mean, 0.5)?;
    let dd_fit = fit_exponential_decay(&times, &dd_mean, 0.5)?;
    Ok(DdpgResult {
        depths: depth_schedule.to_vec(),
        times,
        free_mean,
        dd_mean,
        ratio: free_fit.rate / dd_fit.rate,
        free_fit,
        dd_fit,
    })
}
