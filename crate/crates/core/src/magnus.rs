//! First-order Magnus analysis of system-bath couplings under decoupling.
//!
//! A coupling `g sigma^a (x) sigma^b (x) B` between a main qubit (register
//! index 0) and a spectator (index 1) is moved into the frame rotating at
//! `w_d` and then into the toggling frame of the pulses. Its first-order
//! Magnus term over one cycle is `g int_0^dt Q(t)^dag [sigma^a(t) (x)
//! sigma^b(t)] Q(t) dt`, with the bath factor left out. The residual reported
//! for a term is the spectral norm of that integral divided by `g dt`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::dd::{DDSequence, Pulse, SequenceKind, TIME_TOL};
use crate::device::pauli_harmonics;
use crate::error::{Error, Result};
use crate::operator::{identity, kron, operator_norm, Mat, Pauli, C64, ZERO};

/// Residuals below this (relative to `g dt`) count as cancelled.
pub const CANCEL_TOL: f64 = 1e-10;
/// Relative tolerance on `tau w_d mod 2 pi` for a fine-tuned interval.
pub const FINE_TUNE_TOL: f64 = 1e-9;
/// Fast-drive slope at or below which a term counts as suppressed.
pub const SUPPRESSION_SLOPE: f64 = -0.9;

const SIMPSON_MAX_DEPTH: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingTerm {
    /// Axis on the main qubit.
    pub alpha: Pauli,
    /// Axis on the spectator.
    pub beta: Pauli,
    pub g: f64,
}

impl CouplingTerm {
    pub fn new(alpha: Pauli, beta: Pauli, g: f64) -> Result<Self> {
        if !g.is_finite() {
            return Err(Error::Config(format!("coupling strength {g} is not finite")));
        }
        if alpha == Pauli::I && beta == Pauli::I {
            log::warn!("coupling (0,0) acts on the bath only");
        }
        Ok(Self { alpha, beta, g })
    }

    pub fn is_pure_bath(&self) -> bool {
        self.alpha == Pauli::I && self.beta == Pauli::I
    }
}

/// Lower-case axis name with `0` for the identity.
pub fn axis_name(p: Pauli) -> &'static str {
    match p {
        Pauli::I => "0",
        Pauli::X => "x",
        Pauli::Y => "y",
        Pauli::Z => "z",
    }
}

pub fn parse_axis(s: &str) -> Result<Pauli> {
    match s.trim().to_ascii_lowercase().as_str() {
        "0" | "i" => Ok(Pauli::I),
        "x" => Ok(Pauli::X),
        "y" => Ok(Pauli::Y),
        "z" => Ok(Pauli::Z),
        other => Err(Error::InvalidLabel(format!("unknown axis '{other}'"))),
    }
}

/// The 15 pairs other than `(0,0)`, in `0,x,y,z` lexicographic order.
pub fn nontrivial_pairs() -> Vec<(Pauli, Pauli)> {
    let mut v = Vec::with_capacity(15);
    for a in Pauli::ALL {
        for b in Pauli::ALL {
            if (a, b) != (Pauli::I, Pauli::I) {
                v.push((a, b));
            }
        }
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    AlwaysCancels,
    CancelsAtFineTunedTau,
    SuppressedAsGOverOmegaD,
    NeverCancels,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::AlwaysCancels => "always_cancels",
            Classification::CancelsAtFineTunedTau => "cancels_at_fine_tuned_tau",
            Classification::SuppressedAsGOverOmegaD => "suppressed_as_g_over_omega_d",
            Classification::NeverCancels => "never_cancels",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn adaptive_simpson<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64) -> Result<C64> {
    fn simpson(fa: C64, fm: C64, fb: C64, h: f64) -> C64 {
        (fa + fm * 4.0 + fb) * (h / 6.0)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> C64>(
        f: &F,
        a: f64,
        b: f64,
        fa: C64,
        fm: C64,
        fb: C64,
        whole: C64,
        tol: f64,
        depth: u32,
    ) -> Result<C64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let diff = left + right - whole;
        if diff.norm() <= 15.0 * tol {
            return Ok(left + right + diff / 15.0);
        }
        if depth == 0 {
            return Err(Error::Numerical(format!(
                "adaptive Simpson did not converge on [{a}, {b}]"
            )));
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

/// `int_a^b exp(i w t) dt` by adaptive Simpson on panels short enough that
/// the phase advances by at most `pi/2` across each.
fn phase_integral(w: f64, a: f64, b: f64) -> Result<C64> {
    let len = b - a;
    if len <= 0.0 {
        return Ok(ZERO);
    }
    if w == 0.0 {
        return Ok(C64::new(len, 0.0));
    }
    let key = (w.to_bits(), a.to_bits(), b.to_bits());
    if let Some(v) = PHASE_CACHE.with(|c| c.borrow().get(&key).copied()) {
        return Ok(v);
    }
    let panels = (len * w.abs() / (PI / 2.0)).ceil().max(1.0) as usize;
    let h = len / panels as f64;
    let f = |t: f64| C64::new(0.0, w * t).exp();
    let mut sum = ZERO;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        sum += adaptive_simpson(&f, lo, hi, 1e-12 * (hi - lo))?;
    }
    PHASE_CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() >= PHASE_CACHE_LIMIT {
            c.clear();
        }
        c.insert(key, sum);
    });
    Ok(sum)
}

const PHASE_CACHE_LIMIT: usize = 1 << 16;

thread_local! {
    /// The same `(w, a, b)` integrals recur for every coupling pair of a table.
    static PHASE_CACHE: RefCell<HashMap<(u64, u64, u64), C64>> = RefCell::new(HashMap::new());
}

/// Piecewise-constant toggling frames of a sequence: `(start, end, Q)` with
/// `Q` the product of every pulse applied before `start`.
fn toggling_segments(seq: &DDSequence, n: usize) -> Result<Vec<(f64, f64, Mat)>> {
    let mut segs = Vec::with_capacity(seq.pulses.len() + 1);
    let mut q = identity(1 << n);
    let mut start = 0.0;
    for p in &seq.pulses {
        if p.qubit >= n {
            return Err(Error::Config(format!(
                "pulse on qubit {} outside a {n}-qubit register",
                p.qubit
            )));
        }
        let t = p.time.clamp(0.0, seq.cycle);
        if t > start {
            segs.push((start, t, q.clone()));
            start = t;
        }
        q = p.unitary(n)? * q;
    }
    if seq.cycle > start {
        segs.push((start, seq.cycle, q));
    }
    Ok(segs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrder {
    /// `g int Q^dag sigma^a(t) (x) sigma^b(t) Q dt` on the two-qubit register.
    pub integral: Mat,
    pub norm: f64,
    /// `norm / (g dt)`, or the unit-coupling value when `g = 0`.
    pub residual: f64,
}

/// First-order toggling-frame integral of one coupling over one cycle.
pub fn first_order_integral(term: &CouplingTerm, seq: &DDSequence, omega_d: f64) -> Result<FirstOrder> {
    if !omega_d.is_finite() || omega_d < 0.0 {
        return Err(Error::Config(format!("drive frequency {omega_d} must be >= 0")));
    }
    let segs = toggling_segments(seq, 2)?;
    let ha = pauli_harmonics(term.alpha);
    let hb = pauli_harmonics(term.beta);
    let mut total = Mat::zeros(4, 4);
    for (a, b, q) in &segs {
        let qd = q.adjoint();
        for (ka, ma) in &ha {
            for (kb, mb) in &hb {
                let k = ka + kb;
                let weight = phase_integral(k as f64 * omega_d, *a, *b)?;
                if weight == ZERO {
                    continue;
                }
                total += (&qd * kron(ma, mb) * q) * weight;
            }
        }
    }
    let unit_norm = operator_norm(&total);
    let residual = unit_norm / seq.cycle;
    let integral = total * C64::new(term.g, 0.0);
    Ok(FirstOrder {
        norm: term.g.abs() * unit_norm,
        integral,
        residual,
    })
}

pub fn is_fine_tuned(tau: f64, omega_d: f64) -> bool {
    let phase = tau * omega_d;
    if phase <= 0.0 {
        return false;
    }
    let k = (phase / (2.0 * PI)).round();
    k >= 1.0 && (phase - 2.0 * PI * k).abs() <= FINE_TUNE_TOL * phase
}

/// Nearest interval that is a whole multiple (at least one) of `2 pi / w_d`.
pub fn fine_tuned_tau(tau: f64, omega_d: f64) -> Result<f64> {
    if !(omega_d > 0.0) || !(tau > 0.0) {
        return Err(Error::Config("fine tuning needs positive tau and drive frequency".into()));
    }
    let period = 2.0 * PI / omega_d;
    Ok((tau / period).round().max(1.0) * period)
}

/// Drive ladder over `[10/dt, 1000/dt]` at which `w tau` keeps a fixed
/// residue mod `2 pi`, so that the fitted slope is not polluted by the
/// oscillating factors of the integrals. End points are snapped outward.
pub fn fast_drive_ladder(seq: &DDSequence, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Config("fast-drive ladder needs at least 2 points".into()));
    }
    let tau = seq.tau;
    let two_pi = 2.0 * PI;
    let lo = 10.0 * tau / seq.cycle;
    let hi = 1000.0 * tau / seq.cycle;
    let residue = (0.9 * lo).rem_euclid(two_pi);
    let m_of = |x: f64| (x - residue) / two_pi;
    let m_lo = m_of(lo).floor().max(0.0) as u64;
    let m_hi = m_of(hi).ceil() as u64;
    let x_lo = residue + two_pi * m_lo as f64;
    let x_hi = residue + two_pi * m_hi as f64;
    let mut ms: Vec<u64> = (0..points)
        .map(|i| {
            let x = x_lo * (x_hi / x_lo).powf(i as f64 / (points - 1) as f64);
            (m_of(x).round() as u64).clamp(m_lo, m_hi)
        })
        .collect();
    ms.dedup();
    Ok(ms.into_iter().map(|m| (residue + two_pi * m as f64) / tau).collect())
}

/// Least-squares slope of `log(residual)` against `log(w_d)`.
pub fn fast_drive_scaling(term: &CouplingTerm, seq: &DDSequence, ladder: &[f64]) -> Result<f64> {
    if ladder.len() < 2 || ladder.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Config("drive ladder needs at least two positive frequencies".into()));
    }
    let lo = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ladder.iter().cloned().fold(0.0, f64::max);
    if (hi / lo).log10() < 2.0 - 1e-9 {
        return Err(Error::Config(format!(
            "drive ladder spans {:.3} decades, need at least 2",
            (hi / lo).log10()
        )));
    }
    let unit = CouplingTerm { g: 1.0, ..*term };
    let mut xs = Vec::with_capacity(ladder.len());
    let mut ys = Vec::with_capacity(ladder.len());
    for &w in ladder {
        let r = first_order_integral(&unit, seq, w)?.residual;
        if r > 0.0 {
            xs.push(w.ln());
            ys.push(r.ln());
        }
    }
    if xs.len() < 2 || ys.iter().all(|&y| y < CANCEL_TOL.ln()) {
        return Err(Error::Numerical("degenerate ladder: residual vanishes everywhere".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Prediction at `w_d = 0`: the term cancels iff the segment-weighted sum of
/// the signs the pulses impose on `sigma^a (x) sigma^b` vanishes.
pub fn lab_frame_cancels(alpha: Pauli, beta: Pauli, seq: &DDSequence) -> bool {
    let labels = [alpha, beta];
    let mut sign = 1.0;
    let mut start = 0.0;
    let mut sum = 0.0;
    for p in &seq.pulses {
        let t = p.time.clamp(0.0, seq.cycle);
        sum += sign * (t - start);
        start = t;
        if labels.get(p.qubit).is_some_and(|&l| l.anticommutes(p.axis)) {
            sign = -sign;
        }
    }
    sum += sign * (seq.cycle - start);
    sum.abs() <= TIME_TOL * seq.cycle.max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermReport {
    pub alpha: &'static str,
    pub beta: &'static str,
    /// `(tau_ns, residual)` for every interval tested.
    pub residuals: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub class: Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CancellationReport {
    pub sequence: String,
    pub omega_d: f64,
    pub taus: Vec<f64>,
    pub terms: Vec<TermReport>,
}

impl CancellationReport {
    pub fn class_of(&self, alpha: Pauli, beta: Pauli) -> Option<Classification> {
        self.terms
            .iter()
            .find(|t| t.alpha == axis_name(alpha) && t.beta == axis_name(beta))
            .map(|t| t.class)
    }

    /// Pairs in a given class, as `(alpha, beta)` names.
    pub fn pairs_in(&self, class: Classification) -> Vec<(&'static str, &'static str)> {
        self.terms
            .iter()
            .filter(|t| t.class == class)
            .map(|t| (t.alpha, t.beta))
            .collect()
    }
}

fn build(kind: SequenceKind, tau: f64, pulse_qubit: usize) -> Result<DDSequence> {
    if pulse_qubit > 1 {
        return Err(Error::Config("pulses must target qubit 0 (main) or 1 (spectator)".into()));
    }
    kind.build(tau, pulse_qubit)
}

/// Classify all 15 nontrivial couplings for a sequence family. `tau_list`
/// must hold at least one fine-tuned and one generic interval when `w_d > 0`.
pub fn cancellation_table(
    kind: SequenceKind,
    pulse_qubit: usize,
    omega_d: f64,
    tau_list: &[f64],
) -> Result<CancellationReport> {
    if tau_list.is_empty() {
        return Err(Error::Config("empty tau list".into()));
    }
    let lab = omega_d == 0.0;
    let generic: Vec<f64> = tau_list.iter().copied().filter(|&t| !is_fine_tuned(t, omega_d)).collect();
    let tuned: Vec<f64> = tau_list.iter().copied().filter(|&t| is_fine_tuned(t, omega_d)).collect();
    if !lab && (generic.is_empty() || tuned.is_empty()) {
        return Err(Error::Config(
            "tau list needs at least one fine-tuned and one generic interval".into(),
        ));
    }
    let seqs = tau_list
        .iter()
        .map(|&t| build(kind, t, pulse_qubit))
        .collect::<Result<Vec<_>>>()?;
    let terms = nontrivial_pairs()
        .into_par_iter()
        .map(|(a, b)| -> Result<TermReport> {
            let unit = CouplingTerm { alpha: a, beta: b, g: 1.0 };
            let mut residuals = Vec::with_capacity(seqs.len());
            for (s, &t) in seqs.iter().zip(tau_list) {
                residuals.push((t, first_order_integral(&unit, s, omega_d)?.residual));
            }
            let cancels = |t: f64| {
                residuals
                    .iter()
                    .any(|&(tt, r)| tt == t && r < CANCEL_TOL)
            };
            let mut slope = None;
            let class = if residuals.iter().all(|&(_, r)| r < CANCEL_TOL) {
                Classification::AlwaysCancels
            } else if lab {
                Classification::NeverCancels
            } else if tuned.iter().all(|&t| cancels(t)) {
                Classification::CancelsAtFineTunedTau
            } else {
                let s = build(kind, generic[0], pulse_qubit)?;
                let ladder = fast_drive_ladder(&s, 24)?;
                let fitted = fast_drive_scaling(&unit, &s, &ladder)?;
                slope = Some(fitted);
                if fitted <= SUPPRESSION_SLOPE {
                    Classification::SuppressedAsGOverOmegaD
                } else {
                    Classification::NeverCancels
                }
            };
            Ok(TermReport {
                alpha: axis_name(a),
                beta: axis_name(b),
                residuals,
                slope,
                class,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CancellationReport {
        sequence: kind.name(),
        omega_d,
        taus: tau_list.to_vec(),
        terms,
    })
}

/// A `+-1` step function on `[0, end)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwitchingFunction {
    /// Piece boundaries, starting at 0 and ending at the cycle length.
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl SwitchingFunction {
    fn from_flips(flips: &[f64], end: f64) -> Self {
        let mut edges = vec![0.0];
        let mut values = Vec::new();
        let mut v = 1.0;
        for &t in flips {
            if t >= end - TIME_TOL {
                break;
            }
            if t > edges[edges.len() - 1] + TIME_TOL {
                values.push(v);
                edges.push(t);
            }
            v = -v;
        }
        values.push(v);
        edges.push(end);
        Self { edges, values }.merged()
    }

    fn merged(self) -> Self {
        let mut edges = vec![self.edges[0]];
        let mut values: Vec<f64> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            if values.last() == Some(&v) {
                *edges.last_mut().unwrap() = self.edges[i + 1];
            } else {
                values.push(v);
                edges.push(self.edges[i + 1]);
            }
        }
        Self { edges, values }
    }

    pub fn end(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.edges[1..].iter().position(|&e| t < e).unwrap_or(self.values.len() - 1);
        self.values[i]
    }

    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.edges[i], self.edges[i + 1], v))
    }

    pub fn integral(&self) -> f64 {
        self.pieces().map(|(a, b, v)| v * (b - a)).sum()
    }

    /// `(int f cos(w t), int f sin(w t))` over the cycle.
    pub fn fourier(&self, w: f64) -> (f64, f64) {
        if w == 0.0 {
            return (self.integral(), 0.0);
        }
        self.pieces().fold((0.0, 0.0), |(c, s), (a, b, v)| {
            (
                c + v * ((w * b).sin() - (w * a).sin()) / w,
                s + v * ((w * a).cos() - (w * b).cos()) / w,
            )
        })
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut edges: Vec<f64> = self.edges.iter().chain(&other.edges).copied().collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < TIME_TOL);
        let values = edges
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.at(mid) * other.at(mid)
            })
            .collect();
        Self { edges, values }.merged()
    }

    /// Number of constant pieces when the cycle is closed into a loop.
    pub fn cyclic_pieces(&self) -> usize {
        let k = self.values.len();
        if k > 1 && self.values[0] == self.values[k - 1] {
            k - 1
        } else {
            k
        }
    }
}

/// `(f_X, f_Y)`: `f_X` flips at X pulses, `f_Y` at Y pulses and both at Z
/// pulses. Every pulse must act on the same qubit.
pub fn switching_functions(seq: &DDSequence) -> Result<(SwitchingFunction, SwitchingFunction)> {
    let qubits = seq.qubits();
    if qubits.len() > 1 {
        return Err(Error::Config("switching functions need pulses on a single qubit".into()));
    }
    let of = |axis: Pauli| -> Vec<&Pulse> { seq.pulses.iter().filter(|p| p.axis == axis).collect() };
    let (xs, ys, zs) = (of(Pauli::X), of(Pauli::Y), of(Pauli::Z));
    for x in &xs {
        if ys.iter().any(|y| (x.time - y.time).abs() < TIME_TOL) {
            return Err(Error::Config(format!("coincident X and Y pulses at {} ns", x.time)));
        }
    }
    if seq.pulses.iter().any(|p| (p.angle - PI).abs() > 1e-12) {
        return Err(Error::Config("switching functions need pi pulses".into()));
    }
    let times = |set: &[&Pulse]| -> Vec<f64> {
        let mut t: Vec<f64> = set.iter().chain(&zs).map(|p| p.time).collect();
        t.sort_by(f64::total_cmp);
        t
    };
    Ok((
        SwitchingFunction::from_flips(&times(&xs), seq.cycle),
        SwitchingFunction::from_flips(&times(&ys), seq.cycle),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TogglingBound {
    pub lhs: f64,
    pub bound: f64,
}

impl TogglingBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.bound * (1.0 + 1e-12)
    }
}

/// Largest cyclic piece count the `16 g B / w_d` constant covers.
pub const MAX_CYCLIC_PIECES: usize = 2;

fn supported_switching(seq: &DDSequence) -> Result<(SwitchingFunction, SwitchingFunction)> {
    let (fx, fy) = switching_functions(seq)?;
    let c = fx.cyclic_pieces().max(fy.cyclic_pieces());
    if c > MAX_CYCLIC_PIECES {
        return Err(Error::Config(format!(
            "sequence {} has {c} piecewise-constant intervals per switching function; \
             the bound covers at most {MAX_CYCLIC_PIECES}",
            seq.name()
        )));
    }
    Ok((fx, fy))
}

/// Norm of `sum_R R int G_R` for constant baths with norm `b_norm` and equal
/// couplings `g` on every axis, together with the bound `16 g B / w_d`.
pub fn toggling_bound_check(g: f64, b_norm: f64, omega_d: f64, seq: &DDSequence) -> Result<TogglingBound> {
    if !(g >= 0.0 && b_norm >= 0.0) {
        return Err(Error::Config("g and bath norm must be nonnegative".into()));
    }
    if !(omega_d > 0.0) || !omega_d.is_finite() {
        return Err(Error::Config("the bound needs a positive drive frequency".into()));
    }
    let (fx, fy) = supported_switching(seq)?;
    let (cx, sx) = fx.fourier(omega_d);
    let (cy, sy) = fy.fourier(omega_d);
    let gb = g * b_norm;
    let a = gb * (cy - sx);
    let b = gb * (sy + cx);
    let c = gb * fx.product(&fy).integral();
    Ok(TogglingBound {
        lhs: (a * a + b * b + c * c).sqrt(),
        bound: 16.0 * gb / omega_d,
    })
}

/// First-order coefficients that survive when each bath operator oscillates
/// at `w_d` (`B_R(t) = B'_R cos + B''_R sin`): the prefactors of
/// `X B'_X`, `X B''_Y`, `Y B''_X` and `Y B'_Y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingleFrequencyTerms {
    pub x_bx_cos: f64,
    pub x_by_sin: f64,
    pub y_bx_sin: f64,
    pub y_by_cos: f64,
}

impl SingleFrequencyTerms {
    pub fn max_abs(&self) -> f64 {
        [self.x_bx_cos, self.x_by_sin, self.y_bx_sin, self.y_by_cos]
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn single_frequency_terms(g: f64, seq: &DDSequence) -> Result<SingleFrequencyTerms> {
    let (fx, fy) = supported_switching(seq)?;
    let ix = fx.integral();
    let iy = fy.integral();
    Ok(SingleFrequencyTerms {
        x_bx_cos: 0.5 * g * iy,
        x_by_sin: -0.5 * g * ix,
        y_bx_sin: 0.5 * g * iy,
        y_by_cos: -0.5 * g * ix,
    })
}
