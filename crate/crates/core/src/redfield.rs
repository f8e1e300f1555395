//! Time-convolutionless (Redfield) dynamics for qubits coupled to uncorrelated
//! Ohmic baths, in the frame rotating at the drive frequency.
//!
//! Each channel `m` couples a single-qubit Pauli `A_m` to its own bath with
//! correlation `C_m(t) = g_m^2 C(t)`. The generator is
//! `L(rho) = -i[H, rho] - sum_m ([A_m, Lambda_m(t) rho] + h.c.)` with
//! `Lambda_m(t) = int_0^t C_m(s) e^{-iHs} A_m(t-s) e^{iHs} ds`.
//!
//! In the rotating frame `A_m(t) = sum_k e^{ik w_d t} A_m^(k)`, so entry
//! `(a, b)` of `Lambda_m` carries `K(t, nu) = int_0^t C(s) e^{-i nu s} ds` with
//! `nu = k w_d + e_a - e_b`. Products whose phases rotate at `+-2 w_d` are
//! dropped from the generator; the rates they would add are of relative size
//! `rate / w_d`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dd::{run_schedule, Pulse};
use crate::device::{pauli_harmonics, FrameHamiltonian};
use crate::error::{Error, Result};
use crate::lindblad::{check_grid, step_cap, unvectorize, vectorize};
use crate::operator::{embed_single, matrix_exp, DensityMatrix, Mat, Pauli, C64, ONE, ZERO};

/// `hbar / k_B` in ns mK.
pub const HBAR_OVER_KB_NS_MK: f64 = 7.638_232_577_577_646;

/// Inverse temperature in ns for a temperature in mK. Zero maps to infinity.
pub fn beta_from_millikelvin(t_mk: f64) -> Result<f64> {
    if !(t_mk >= 0.0) || !t_mk.is_finite() {
        return Err(Error::Config(format!("temperature {t_mk} mK must be >= 0")));
    }
    Ok(if t_mk == 0.0 {
        f64::INFINITY
    } else {
        HBAR_OVER_KB_NS_MK / t_mk
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathCoupling {
    pub qubit: usize,
    pub axis: Pauli,
    /// Coupling strength in rad/ns.
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OhmicBathSpec {
    /// Ohmic constant in ns^2.
    pub eta_ohmic: f64,
    /// Cutoff in rad/ns.
    pub omega_c: f64,
    /// Inverse temperature in ns.
    pub beta: f64,
    pub couplings: Vec<BathCoupling>,
}

impl OhmicBathSpec {
    pub fn new(eta_ohmic: f64, omega_c: f64, beta: f64, couplings: Vec<BathCoupling>) -> Result<Self> {
        let s = Self {
            eta_ohmic,
            omega_c,
            beta,
            couplings,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_ohmic > 0.0 && self.eta_ohmic.is_finite()) {
            return Err(Error::Config(format!("eta_ohmic {} must be > 0", self.eta_ohmic)));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::Config(format!("cutoff {} must be > 0", self.omega_c)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta {} must be > 0", self.beta)));
        }
        for c in &self.couplings {
            if c.axis == Pauli::I {
                return Err(Error::Config("bath coupling axis must be x, y or z".into()));
            }
            if !c.g.is_finite() {
                return Err(Error::Config(format!("coupling g = {} is not finite", c.g)));
            }
        }
        Ok(())
    }

    pub fn with_couplings(&self, couplings: Vec<BathCoupling>) -> Self {
        Self {
            couplings,
            ..self.clone()
        }
    }
}

/// `gamma(w) = 2 pi eta g^2 w e^{-|w|/w_c} / (1 - e^{-beta w})`.
pub fn ohmic_spectrum(omega: f64, bath: &OhmicBathSpec, g: f64) -> f64 {
    let pref = 2.0 * PI * bath.eta_ohmic * g * g * (-omega.abs() / bath.omega_c).exp();
    let x = bath.beta * omega;
    let bose = if omega == 0.0 {
        1.0 / bath.beta
    } else if x.abs() < 1e-8 {
        1.0 / bath.beta + 0.5 * omega
    } else {
        omega / -(-x).exp_m1()
    };
    pref * bose
}

/// Samples of a correlation function on `t_i = (i - N/2) dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub dt: f64,
    pub values: Vec<C64>,
    /// `C'(t)` on the same grid.
    pub derivative: Vec<C64>,
    pub channel: Option<usize>,
}

impl CorrelationTable {
    fn half(&self) -> usize {
        self.values.len() / 2
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.half() as f64;
        (0..self.values.len()).map(|i| (i as f64 - h) * self.dt).collect()
    }

    /// Samples at `t = 0, dt, ...`.
    pub fn positive(&self) -> &[C64] {
        &self.values[self.half()..]
    }

    /// Derivative samples at `t = 0, dt, ...`.
    pub fn positive_derivative(&self) -> &[C64] {
        &self.derivative[self.half()..]
    }

    pub fn at_index(&self, k: isize) -> Option<C64> {
        let i = self.half() as isize + k;
        (i >= 0).then(|| self.values.get(i as usize).copied()).flatten()
    }

    /// Largest stored positive time.
    pub fn max_time(&self) -> f64 {
        (self.positive().len() - 1) as f64 * self.dt
    }

    /// `max |C(-t) - C(t)^*|` over stored pairs.
    pub fn hermiticity_error(&self) -> f64 {
        let h = self.half() as isize;
        (1..h)
            .map(|k| (self.at_index(-k).unwrap() - self.at_index(k).unwrap().conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `sum_k dt C(t_k) e^{i w t_k}`, the discrete inverse of the table.
    pub fn transform(&self, omega: f64) -> C64 {
        self.times()
            .iter()
            .zip(&self.values)
            .map(|(&t, &c)| c * C64::new(0.0, omega * t).exp())
            .sum::<C64>()
            * self.dt
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dt: self.dt,
            values: self.values.iter().map(|v| v * s).collect(),
            derivative: self.derivative.iter().map(|v| v * s).collect(),
            channel: self.channel,
        }
    }
}

/// `C(t) = (1/2 pi) int gamma(w) e^{-iwt} dw` for one channel, by FFT over
/// `[-Omega, Omega)` with `Omega = omega_max_factor * w_c`. The time step is
/// `pi / Omega` and `samples / 2` nonnegative times are kept. The transform
/// is checked by summing the table back to `gamma` at off-grid frequencies.
pub fn correlation_from_spectrum(
    bath: &OhmicBathSpec,
    g: f64,
    window: f64,
    samples: usize,
    omega_max_factor: f64,
) -> Result<CorrelationTable> {
    bath.validate()?;
    if samples < 16 || !samples.is_power_of_two() {
        return Err(Error::Config(format!("samples {samples} must be a power of two >= 16")));
    }
    if !(omega_max_factor > 0.0) {
        return Err(Error::Config("omega_max_factor must be > 0".into()));
    }
    if !(window >= 10.0 / bath.omega_c) {
        return Err(Error::Config(format!(
            "window {window} ns is shorter than the decay support 10/w_c = {} ns",
            10.0 / bath.omega_c
        )));
    }
    let big = omega_max_factor * bath.omega_c;
    let dw = 2.0 * big / samples as f64;
    let dt = PI / big;
    if (samples / 2) as f64 * dt < window {
        return Err(Error::Config(format!(
            "{samples} samples cover {} ns, less than the requested window {window} ns",
            (samples / 2) as f64 * dt
        )));
    }
    let spectrum: Vec<f64> = (0..samples)
        .map(|j| ohmic_spectrum(-big + j as f64 * dw, bath, g))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(samples);
    let norm = dw / (2.0 * PI);
    let half = samples / 2;
    let to_time = |mut buf: Vec<C64>| {
        fft.process(&mut buf);
        let mut out = vec![ZERO; samples];
        for (k, v) in buf.into_iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let idx = if k < half { k + half } else { k - half };
            out[idx] = v * (norm * sign);
        }
        out
    };
    let values = to_time(spectrum.iter().map(|&v| C64::new(v, 0.0)).collect());
    // C'(t) transforms -i w gamma(w)
    let derivative = to_time(
        spectrum
            .iter()
            .enumerate()
            .map(|(j, &v)| C64::new(0.0, -(-big + j as f64 * dw) * v))
            .collect(),
    );
    let table = CorrelationTable {
        dt,
        values,
        derivative,
        channel: None,
    };
    check_roundtrip(&table, bath, g)?;
    Ok(table)
}

fn check_roundtrip(table: &CorrelationTable, bath: &OhmicBathSpec, g: f64) -> Result<()> {
    const POINTS: usize = 33;
    let lo = -2.0 * bath.omega_c;
    let span = 7.0 * bath.omega_c;
    let test: Vec<f64> = (0..POINTS)
        .map(|i| lo + (i as f64 + 0.37) * span / POINTS as f64)
        .collect();
    let exact: Vec<f64> = test.iter().map(|&w| ohmic_spectrum(w, bath, g)).collect();
    let peak = exact.iter().cloned().fold(0.0, f64::max);
    for (&w, &want) in test.iter().zip(&exact) {
        if want <= 1e-3 * peak {
            continue;
        }
        let got = table.transform(w).re;
        if (got - want).abs() > 0.01 * want {
            return Err(Error::Numerical(format!(
                "correlation aliasing: round trip gives {got:e} vs {want:e} at w = {w} rad/ns"
            )));
        }
    }
    Ok(())
}

/// Trapezoid panel of `int c(s) e^{-i nu s} ds` over `[t0, t0 + h]`. The
/// table is band-limited and sampled at the Nyquist rate, so the plain sum
/// reproduces its transform exactly; interpolating `c` linearly inside the
/// panel instead would damp the rates by `sinc^2(nu h / 2)`.
fn trapezoid_segment(c0: C64, c1: C64, t0: f64, h: f64, nu: f64) -> C64 {
    let e0 = C64::new(0.0, -nu * t0).exp();
    let e1 = C64::new(0.0, -nu * (t0 + h)).exp();
    (c0 * e0 + c1 * e1) * (0.5 * h)
}

/// Derivative of the integrand `C(s) e^{-i nu s}`.
fn integrand_slope(c: C64, dc: C64, s: f64, nu: f64) -> C64 {
    (dc - C64::new(0.0, nu) * c) * C64::new(0.0, -nu * s).exp()
}

/// `K(t_i, nu)` at table nodes `0..=steps`, trapezoid plus the
/// Euler-Maclaurin end correction `h^2/12 (g'(0) - g'(t_i))`.
fn node_integrals(c: &[C64], dc: &[C64], dt: f64, nu: f64, steps: usize) -> Vec<C64> {
    let g0 = integrand_slope(c[0], dc[0], 0.0, nu);
    let corr = dt * dt / 12.0;
    let mut acc = ZERO;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(ZERO);
    for i in 0..steps {
        acc += trapezoid_segment(c[i], c[i + 1], i as f64 * dt, dt, nu);
        let t = (i + 1) as f64 * dt;
        out.push(acc + (g0 - integrand_slope(c[i + 1], dc[i + 1], t, nu)) * corr);
    }
    out
}

/// `int_{t_i}^{t_i + rest} C(s) e^{-i nu s} ds` with `C` and `C'`
/// interpolated linearly inside panel `i`.
fn partial_panel(c: &[C64], dc: &[C64], dt: f64, i: usize, rest: f64, nu: f64) -> C64 {
    let f = rest / dt;
    let t0 = i as f64 * dt;
    let c_t = c[i] + (c[i + 1] - c[i]) * f;
    let dc_t = dc[i] + (dc[i + 1] - dc[i]) * f;
    let edge = integrand_slope(c[i], dc[i], t0, nu) - integrand_slope(c_t, dc_t, t0 + rest, nu);
    trapezoid_segment(c[i], c_t, t0, rest, nu) + edge * (rest * rest / 12.0)
}

/// `K(t, nu) = int_0^t C(s) e^{-i nu s} ds` by the end-corrected trapezoid
/// rule on the table nodes.
pub fn memory_integral(table: &CorrelationTable, t: f64, nu: f64) -> Result<C64> {
    if t < 0.0 {
        return Err(Error::Config(format!("memory integral at negative time {t}")));
    }
    if t > table.max_time() * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "correlation table covers {} ns, Lambda requested at {t} ns",
            table.max_time()
        )));
    }
    let c = table.positive();
    let dc = table.positive_derivative();
    let full = ((t / table.dt).floor() as usize).min(c.len() - 1);
    let mut acc = node_integrals(c, dc, table.dt, nu, full)[full];
    let rest = t - full as f64 * table.dt;
    if rest > 0.0 && full + 1 < c.len() {
        acc += partial_panel(c, dc, table.dt, full, rest, nu);
    }
    Ok(acc)
}

/// Rotating-frame `Lambda(t)` for one channel. `table` is the channel's own
/// correlation function and `energies` the diagonal of the static frame
/// Hamiltonian.
pub fn lambda_operator(
    t: f64,
    coupling: &BathCoupling,
    energies: &[f64],
    omega_d: f64,
    table: &CorrelationTable,
) -> Result<Mat> {
    let d = energies.len();
    let n = d.trailing_zeros() as usize;
    if !d.is_power_of_two() || coupling.qubit >= n {
        return Err(Error::Dimension("lambda_operator: coupling outside register".into()));
    }
    let mut out = Mat::zeros(d, d);
    for (k, a_k) in pauli_harmonics(coupling.axis) {
        let a = embed_single(&a_k, coupling.qubit, n)?;
        let phase = C64::new(0.0, k as f64 * omega_d * t).exp();
        for r in 0..d {
            for c in 0..d {
                if a[(r, c)] == ZERO {
                    continue;
                }
                let nu = k as f64 * omega_d + energies[r] - energies[c];
                out[(r, c)] += a[(r, c)] * memory_integral(table, t, nu)? * phase;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RedfieldOptions {
    pub samples: usize,
    pub omega_max_factor: f64,
    /// Bath memory in units of `1 / w_c`; the memory integrals stop there.
    pub support_factor: f64,
    pub positivity_tol: f64,
}

impl Default for RedfieldOptions {
    fn default() -> Self {
        Self {
            samples: 1 << 14,
            omega_max_factor: 10.0,
            support_factor: 10.0,
            positivity_tol: 1e-3,
        }
    }
}

struct Component {
    k: i32,
    a: Mat,
    /// `(row, col, g^2 A_rc, index into the nu list)`.
    entries: Vec<(usize, usize, C64, usize)>,
}

struct Channel {
    comps: Vec<Component>,
}

/// Redfield generator for one device and bath, with the memory integrals
/// precomputed up to the end of the bath memory.
pub struct RedfieldEngine {
    n: usize,
    d: usize,
    energies: Vec<f64>,
    omega_d: f64,
    table: CorrelationTable,
    mem_steps: usize,
    nus: Vec<f64>,
    /// Cumulative `K` at table nodes `0..=mem_steps`, per distinct `nu`.
    kcum: Vec<Vec<C64>>,
    channels: Vec<Channel>,
    l_inf: Mat,
    max_rate: f64,
    positivity_tol: f64,
    propagators: Mutex<HashMap<i64, Arc<Mat>>>,
}

const TRACE_DRIFT_LIMIT: f64 = 1e-6;

impl RedfieldEngine {
    pub fn new(h: &FrameHamiltonian, bath: &OhmicBathSpec, opts: &RedfieldOptions) -> Result<Self> {
        bath.validate()?;
        if !h.terms.is_empty() {
            return Err(Error::Config(
                "Redfield system Hamiltonian must not carry coupling terms".into(),
            ));
        }
        let energies = h
            .static_diagonal()
            .ok_or_else(|| Error::Config("Redfield system Hamiltonian must be diagonal".into()))?;
        let n = h.n;
        let d = energies.len();
        for c in &bath.couplings {
            if c.qubit >= n {
                return Err(Error::Config(format!(
                    "bath coupling on qubit {} outside a {n}-qubit register",
                    c.qubit
                )));
            }
        }
        if !(opts.support_factor > 0.0) {
            return Err(Error::Config("support_factor must be > 0".into()));
        }
        let window = opts.support_factor / bath.omega_c;
        let unit = correlation_from_spectrum(bath, 1.0, window, opts.samples, opts.omega_max_factor)?;
        let pos = unit.positive();
        let mem_steps = ((window / unit.dt).ceil() as usize).clamp(1, pos.len() - 1);

        let mut nu_index: HashMap<u64, usize> = HashMap::new();
        let mut nus = Vec::new();
        let mut channels = Vec::with_capacity(bath.couplings.len());
        for c in &bath.couplings {
            let g2 = c.g * c.g;
            let mut comps = Vec::new();
            for (k, a_k) in pauli_harmonics(c.axis) {
                let a = embed_single(&a_k, c.qubit, n)?;
                let mut entries = Vec::new();
                for r in 0..d {
                    for col in 0..d {
                        if a[(r, col)] == ZERO {
                            continue;
                        }
                        let nu = k as f64 * h.omega_d + energies[r] - energies[col];
                        let idx = *nu_index.entry(nu.to_bits()).or_insert_with(|| {
                            nus.push(nu);
                            nus.len() - 1
                        });
                        entries.push((r, col, a[(r, col)] * g2, idx));
                    }
                }
                comps.push(Component { k, a, entries });
            }
            channels.push(Channel { comps });
        }
        let dpos = unit.positive_derivative();
        let kcum = nus
            .iter()
            .map(|&nu| node_integrals(pos, dpos, unit.dt, nu, mem_steps))
            .collect();
        let mut engine = Self {
            n,
            d,
            energies,
            omega_d: h.omega_d,
            table: unit,
            mem_steps,
            nus,
            kcum,
            channels,
            l_inf: Mat::zeros(0, 0),
            max_rate: 0.0,
            positivity_tol: opts.positivity_tol,
            propagators: Mutex::new(HashMap::new()),
        };
        engine.l_inf = engine.superoperator(engine.memory_time())?;
        engine.max_rate = engine
            .channels
            .iter()
            .flat_map(|ch| ch.comps.iter().flat_map(|c| c.entries.iter()))
            .map(|&(_, _, coeff, i)| 4.0 * coeff.norm() * engine.k_at(i, engine.memory_time()).norm())
            .sum();
        Ok(engine)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Time after which every `Lambda` has saturated.
    pub fn memory_time(&self) -> f64 {
        self.mem_steps as f64 * self.table.dt
    }

    /// The unit-coupling correlation table in use.
    pub fn table(&self) -> &CorrelationTable {
        &self.table
    }

    fn k_at(&self, nu_idx: usize, t: f64) -> C64 {
        let cum = &self.kcum[nu_idx];
        if t >= self.memory_time() {
            return cum[self.mem_steps];
        }
        let dt = self.table.dt;
        let i = ((t / dt).floor() as usize).min(self.mem_steps - 1);
        let rest = t - i as f64 * dt;
        if rest <= 0.0 {
            return cum[i];
        }
        let (c, dc) = (self.table.positive(), self.table.positive_derivative());
        cum[i] + partial_panel(c, dc, dt, i, rest, self.nus[nu_idx])
    }

    /// Component `k` of channel `m`'s `Lambda(t)`, without its `e^{ik w_d t}`.
    fn lambda_component(&self, comp: &Component, t: f64) -> Mat {
        let mut l = Mat::zeros(self.d, self.d);
        for &(r, c, coeff, i) in &comp.entries {
            l[(r, c)] += coeff * self.k_at(i, t);
        }
        l
    }

    /// Full rotating-frame `Lambda_m(t)` including its fast phases.
    pub fn lambda(&self, channel: usize, t: f64) -> Result<Mat> {
        let ch = self
            .channels
            .get(channel)
            .ok_or_else(|| Error::Config(format!("no bath channel {channel}")))?;
        let mut out = Mat::zeros(self.d, self.d);
        for comp in &ch.comps {
            let phase = C64::new(0.0, comp.k as f64 * self.omega_d * t).exp();
            out += self.lambda_component(comp, t) * phase;
        }
        Ok(out)
    }

    /// Generator applied to `rho` at time `t`. With `full` the products that
    /// oscillate at `+-2 w_d` are kept. Linear in `rho`, so it is valid on
    /// non-Hermitian inputs as well.
    pub fn rhs(&self, t: f64, rho: &Mat, full: bool) -> Mat {
        let mut m = Mat::zeros(self.d, self.d);
        for ch in &self.channels {
            for comp in &ch.comps {
                let lam = self.lambda_component(comp, t);
                let lr = &lam * rho;
                let rl = rho * lam.adjoint();
                for other in &ch.comps {
                    let total = comp.k + other.k;
                    if total != 0 && !full {
                        continue;
                    }
                    let a_dag = other.a.adjoint();
                    let term = &other.a * &lr - &lr * &other.a;
                    let conj = &rl * &a_dag - &a_dag * &rl;
                    if total == 0 {
                        m += term + conj;
                    } else {
                        let ph = C64::new(0.0, total as f64 * self.omega_d * t).exp();
                        m += term * ph + conj * ph.conj();
                    }
                }
            }
        }
        let mut out = -m;
        for r in 0..self.d {
            for c in 0..self.d {
                out[(r, c)] += C64::new(0.0, -(self.energies[r] - self.energies[c])) * rho[(r, c)];
            }
        }
        out
    }

    /// Drive-averaged generator at time `t` as a matrix on row-major `vec(rho)`.
    pub fn superoperator(&self, t: f64) -> Result<Mat> {
        let d = self.d;
        let mut out = Mat::zeros(d * d, d * d);
        for r in 0..d {
            for c in 0..d {
                let mut e = Mat::zeros(d, d);
                e[(r, c)] = ONE;
                let col = vectorize(&self.rhs(t, &e, false));
                out.set_column(r * d + c, &col);
            }
        }
        Ok(out)
    }

    fn width(&self) -> f64 {
        let max = self.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.energies.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Fixed-step RK4 from `t0` to `t1`.
    pub fn integrate_rk4(&self, mut rho: Mat, t0: f64, t1: f64, full: bool) -> Result<Mat> {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(rho);
        }
        let f_max = self.width() + self.max_rate + if full { 2.0 * self.omega_d.abs() } else { 0.0 };
        let cap = step_cap(f_max).min(self.table.dt);
        let steps = (span / cap).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            let k1 = self.rhs(t, &rho, full);
            let k2 = self.rhs(t + h / 2.0, &(&rho + &k1 * C64::new(h / 2.0, 0.0)), full);
            let k3 = self.rhs(t + h / 2.0, &(&rho + &k2 * C64::new(h / 2.0, 0.0)), full);
            let k4 = self.rhs(t + h, &(&rho + &k3 * C64::new(h, 0.0)), full);
            rho += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
            rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        }
        Ok(rho)
    }

    fn propagator(&self, span: f64) -> Result<Arc<Mat>> {
        let key = (span * 1e9).round() as i64;
        if let Some(p) = self.propagators.lock().expect("propagator cache").get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(matrix_exp(&self.l_inf, C64::new(span, 0.0))?);
        self.propagators
            .lock()
            .expect("propagator cache")
            .entry(key)
            .or_insert_with(|| Arc::clone(&p));
        Ok(p)
    }

    /// Drive-averaged evolution from `t0` to `t1`: RK4 while the memory
    /// integrals are still growing, exact exponentials after.
    pub fn advance(&self, rho: Mat, t0: f64, t1: f64) -> Result<Mat> {
        if t1 <= t0 {
            return Ok(rho);
        }
        let t_mem = self.memory_time();
        let mut rho = rho;
        let mut t = t0;
        if t < t_mem {
            let stop = t1.min(t_mem);
            rho = self.integrate_rk4(rho, t, stop, false)?;
            t = stop;
        }
        if t1 > t {
            let p = self.propagator(t1 - t)?;
            rho = unvectorize(&(&*p * vectorize(&rho)), self.d);
            rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        }
        let tr = rho.trace();
        let drift = (tr - ONE).norm();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::Engine(format!("Redfield trace drift {drift:e} at t = {t1} ns")));
        }
        if drift > 1e-12 {
            log::debug!("renormalising Redfield trace drift {drift:e} at t = {t1} ns");
            rho /= tr;
        }
        Ok(rho)
    }

    /// States at each grid time, starting from `rho0` at `t = 0`. Pulses are
    /// instantaneous conjugations at absolute times.
    pub fn evolve(&self, rho0: &DensityMatrix, grid: &[f64], pulses: &[Pulse]) -> Result<Vec<DensityMatrix>> {
        if rho0.n_qubits() != self.n {
            return Err(Error::Dimension("Redfield initial state has the wrong size".into()));
        }
        check_grid(grid)?;
        if grid[0] < 0.0 {
            return Err(Error::Config("Redfield grid must start at t >= 0".into()));
        }
        let mut out = Vec::with_capacity(grid.len());
        let tol = self.positivity_tol;
        run_schedule(
            rho0.clone(),
            self.n,
            0.0,
            pulses,
            grid,
            |rho: DensityMatrix, t0, t1| {
                Ok(DensityMatrix::from_raw(self.advance(rho.into_matrix(), t0, t1)?, self.n))
            },
            |i, state: &DensityMatrix| {
                let min = state.min_eigenvalue();
                if min < -tol {
                    return Err(Error::Engine(format!(
                        "Redfield state lost positivity at t = {} ns (min eigenvalue {min:e}); \
                         the coupling is likely too strong for second-order theory",
                        grid[i]
                    )));
                }
                if min < -DensityMatrix::NEG_TOL {
                    log::debug!("Redfield negativity {min:e} at t = {} ns", grid[i]);
                }
                out.push(state.clone());
                Ok(())
            },
        )?;
        Ok(out)
    }
}

/// One-shot Redfield evolution; see [`RedfieldEngine::evolve`].
pub fn redfield_evolve(
    rho0: &DensityMatrix,
    h: &FrameHamiltonian,
    bath: &OhmicBathSpec,
    grid: &[f64],
    dd: Option<&[Pulse]>,
    opts: &RedfieldOptions,
) -> Result<Vec<DensityMatrix>> {
    RedfieldEngine::new(h, bath, opts)?.evolve(rho0, grid, dd.unwrap_or(&[]))
}
