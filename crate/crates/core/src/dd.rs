//! Instantaneous-pulse dynamical decoupling.
//!
//! A pulse about axis `s` with angle `theta` is `exp(-i theta s/2)`; for the
//! pi pulses used by every named sequence the global phase is dropped and the
//! pulse acts as the bare Pauli. Pulse times are peak positions measured from
//! the start of a cycle.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::{
    embed_single, identity, kron, matrix_exp, operator_norm, pauli_on, rotation, DensityMatrix,
    Ket, Mat, Pauli, C64,
};

/// Times closer than this (ns) are treated as simultaneous.
pub const TIME_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    pub time: f64,
    pub qubit: usize,
    pub axis: Pauli,
    pub angle: f64,
}

impl Pulse {
    pub fn pi(time: f64, qubit: usize, axis: Pauli) -> Self {
        Self {
            time,
            qubit,
            axis,
            angle: PI,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.time >= 0.0) || !self.time.is_finite() {
            return Err(Error::Config(format!("pulse time {} must be >= 0", self.time)));
        }
        if !(self.angle > 0.0 && self.angle <= 2.0 * PI) {
            return Err(Error::Config(format!("pulse angle {} outside (0, 2pi]", self.angle)));
        }
        if self.axis == Pauli::I {
            return Err(Error::Config("pulse axis must be X, Y or Z".into()));
        }
        Ok(())
    }

    /// Single-qubit unitary, global phase dropped for pi pulses.
    pub fn local_unitary(&self) -> Mat {
        if (self.angle - PI).abs() < 1e-15 {
            self.axis.matrix()
        } else {
            rotation(self.axis, self.angle)
        }
    }

    pub fn unitary(&self, n: usize) -> Result<Mat> {
        embed_single(&self.local_unitary(), self.qubit, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    PureX,
    PureY,
    Xy4,
    Xy4Palindrome,
    Udd(usize),
    Custom,
}

impl SequenceKind {
    pub fn name(self) -> String {
        match self {
            SequenceKind::PureX => "pure_x".into(),
            SequenceKind::PureY => "pure_y".into(),
            SequenceKind::Xy4 => "xy4".into(),
            SequenceKind::Xy4Palindrome => "xy4_palindrome".into(),
            SequenceKind::Udd(n) => format!("udd_{n}"),
            SequenceKind::Custom => "custom".into(),
        }
    }

    /// Cycle length in units of the pulse interval for equidistant sequences.
    pub fn cycle_in_tau(self) -> Option<f64> {
        match self {
            SequenceKind::PureX | SequenceKind::PureY => Some(2.0),
            SequenceKind::Xy4 => Some(4.0),
            SequenceKind::Xy4Palindrome => Some(8.0),
            _ => None,
        }
    }

    /// Build the sequence with interval `tau` (total time for UDD).
    pub fn build(self, tau: f64, qubit: usize) -> Result<DDSequence> {
        match self {
            SequenceKind::PureX => make_pure_x(tau, qubit),
            SequenceKind::PureY => make_pure_y(tau, qubit),
            SequenceKind::Xy4 => make_xy4(tau, qubit, false),
            SequenceKind::Xy4Palindrome => make_xy4(tau, qubit, true),
            SequenceKind::Udd(n) => make_udd(n, tau, qubit),
            SequenceKind::Custom => Err(Error::Config("custom sequences need explicit pulses".into())),
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        match s.as_str() {
            "pure_x" | "x" => Ok(SequenceKind::PureX),
            "pure_y" | "y" => Ok(SequenceKind::PureY),
            "xy4" => Ok(SequenceKind::Xy4),
            "xy4_palindrome" | "pxy4" => Ok(SequenceKind::Xy4Palindrome),
            "custom" => Ok(SequenceKind::Custom),
            other => match other.strip_prefix("udd_").or_else(|| other.strip_prefix("udd")) {
                Some(k) => k
                    .parse::<usize>()
                    .ok()
                    .filter(|&k| k >= 1)
                    .map(SequenceKind::Udd)
                    .ok_or_else(|| Error::Config(format!("bad UDD order in '{other}'"))),
                None => Err(Error::Config(format!("unknown sequence '{other}'"))),
            },
        }
    }
}

/// One cycle of a decoupling sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct DDSequence {
    pub pulses: Vec<Pulse>,
    pub cycle: f64,
    pub tau: f64,
    pub kind: SequenceKind,
}

impl DDSequence {
    pub fn custom(mut pulses: Vec<Pulse>, cycle: f64) -> Result<Self> {
        if !(cycle > 0.0) || !cycle.is_finite() {
            return Err(Error::Config(format!("cycle length {cycle} must be > 0")));
        }
        pulses.sort_by(|a, b| a.time.total_cmp(&b.time));
        for p in &pulses {
            p.validate()?;
            if p.time > cycle + TIME_TOL {
                return Err(Error::Config(format!(
                    "pulse at {} ns outside cycle of {cycle} ns",
                    p.time
                )));
            }
        }
        let tau = pulses.first().map_or(cycle, |p| p.time);
        Ok(Self {
            pulses,
            cycle,
            tau,
            kind: SequenceKind::Custom,
        })
    }

    pub fn name(&self) -> String {
        self.kind.name()
    }

    /// The same pulse pattern applied simultaneously to each listed qubit.
    pub fn on_qubits(&self, qubits: &[usize]) -> Self {
        let mut pulses = Vec::with_capacity(self.pulses.len() * qubits.len());
        for p in &self.pulses {
            for &q in qubits {
                pulses.push(Pulse { qubit: q, ..*p });
            }
        }
        Self {
            pulses,
            ..self.clone()
        }
    }

    /// Absolute pulse list for `repeats` back-to-back cycles starting at
    /// `offset`.
    pub fn timeline(&self, repeats: usize, offset: f64) -> Vec<Pulse> {
        (0..repeats)
            .flat_map(|r| {
                let base = offset + r as f64 * self.cycle;
                self.pulses.iter().map(move |p| Pulse {
                    time: base + p.time,
                    ..*p
                })
            })
            .collect()
    }

    /// Product of the ideal pulse unitaries over one cycle, latest on the left.
    pub fn cycle_product(&self, n: usize) -> Result<Mat> {
        let mut u = identity(1 << n);
        for p in &self.pulses {
            u = p.unitary(n)? * u;
        }
        Ok(u)
    }

    pub fn qubits(&self) -> Vec<usize> {
        let mut q: Vec<usize> = self.pulses.iter().map(|p| p.qubit).collect();
        q.sort_unstable();
        q.dedup();
        q
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("pulse interval {tau} must be > 0")));
    }
    Ok(())
}

fn uniform(tau: f64, qubit: usize, axes: &[Pauli], kind: SequenceKind) -> Result<DDSequence> {
    check_tau(tau)?;
    let pulses = axes
        .iter()
        .enumerate()
        .map(|(k, &a)| Pulse::pi((k + 1) as f64 * tau, qubit, a))
        .collect();
    Ok(DDSequence {
        pulses,
        cycle: axes.len() as f64 * tau,
        tau,
        kind,
    })
}

/// `X f X f`: pulses at `tau` and `2 tau`, cycle `2 tau`.
pub fn make_pure_x(tau: f64, qubit: usize) -> Result<DDSequence> {
    uniform(tau, qubit, &[Pauli::X, Pauli::X], SequenceKind::PureX)
}

pub fn make_pure_y(tau: f64, qubit: usize) -> Result<DDSequence> {
    uniform(tau, qubit, &[Pauli::Y, Pauli::Y], SequenceKind::PureY)
}

/// `X f Y f X f Y f`: in time order the pulses are Y, X, Y, X. The palindrome
/// variant runs Y X Y X X Y X Y over `8 tau`.
pub fn make_xy4(tau: f64, qubit: usize, palindrome: bool) -> Result<DDSequence> {
    use Pauli::{X, Y};
    if palindrome {
        uniform(tau, qubit, &[Y, X, Y, X, X, Y, X, Y], SequenceKind::Xy4Palindrome)
    } else {
        uniform(tau, qubit, &[Y, X, Y, X], SequenceKind::Xy4)
    }
}

/// Uhrig sequence: `n` X pulses at `T sin^2(j pi / (2n + 2))`.
pub fn make_udd(n: usize, total: f64, qubit: usize) -> Result<DDSequence> {
    if n == 0 {
        return Err(Error::Config("UDD order must be >= 1".into()));
    }
    check_tau(total)?;
    let pulses: Vec<Pulse> = (1..=n)
        .map(|j| {
            let s = (j as f64 * PI / (2.0 * (n as f64 + 1.0))).sin();
            Pulse::pi(total * s * s, qubit, Pauli::X)
        })
        .collect();
    let tau = pulses[0].time;
    Ok(DDSequence {
        pulses,
        cycle: total,
        tau,
        kind: SequenceKind::Udd(n),
    })
}

/// Objects that instantaneous pulses can act on.
pub trait PulseTarget: Sized {
    fn apply_unitary(self, u: &Mat) -> Self;
}

impl PulseTarget for DensityMatrix {
    fn apply_unitary(self, u: &Mat) -> Self {
        self.conjugate_by(u)
    }
}

/// Propagators compose on the left.
impl PulseTarget for Mat {
    fn apply_unitary(self, u: &Mat) -> Self {
        u * self
    }
}

impl PulseTarget for Ket {
    fn apply_unitary(self, u: &Mat) -> Self {
        u * self
    }
}

/// Advance `state` from `t_start` through `grid`, interleaving instantaneous
/// pulses. A pulse coinciding with a grid time is applied before that time is
/// recorded. `evolve(state, t0, t1)` moves the state between events.
pub fn run_schedule<S, E, R>(
    mut state: S,
    n: usize,
    t_start: f64,
    pulses: &[Pulse],
    grid: &[f64],
    mut evolve: E,
    mut record: R,
) -> Result<S>
where
    S: PulseTarget,
    E: FnMut(S, f64, f64) -> Result<S>,
    R: FnMut(usize, &S) -> Result<()>,
{
    let t_end = grid.last().copied().unwrap_or(t_start);
    for p in pulses {
        if p.time < t_start - TIME_TOL || p.time > t_end + TIME_TOL {
            return Err(Error::Config(format!(
                "pulse at {} ns outside [{t_start}, {t_end}] ns",
                p.time
            )));
        }
    }
    let mut order: Vec<&Pulse> = pulses.iter().collect();
    order.sort_by(|a, b| a.time.total_cmp(&b.time));
    let unitaries = order
        .iter()
        .map(|p| p.unitary(n))
        .collect::<Result<Vec<_>>>()?;
    let mut t = t_start;
    let mut next = 0usize;
    for (gi, &tg) in grid.iter().enumerate() {
        while next < order.len() && order[next].time <= tg + TIME_TOL {
            let tp = order[next].time.max(t);
            if tp > t {
                state = evolve(state, t, tp)?;
                t = tp;
            }
            state = state.apply_unitary(&unitaries[next]);
            next += 1;
        }
        if tg > t + TIME_TOL {
            state = evolve(state, t, tg)?;
            t = tg;
        } else if tg < t - TIME_TOL {
            return Err(Error::Config("grid times must be nondecreasing".into()));
        }
        record(gi, &state)?;
    }
    Ok(state)
}

/// Run `repeats` cycles of `seq` from time 0, returning the final state.
pub fn apply_sequence<S, E>(state: S, n: usize, seq: &DDSequence, repeats: usize, evolve: E) -> Result<S>
where
    S: PulseTarget,
    E: FnMut(S, f64, f64) -> Result<S>,
{
    let end = repeats as f64 * seq.cycle;
    let grid = if end > 0.0 { vec![end] } else { vec![0.0] };
    run_schedule(state, n, 0.0, &seq.timeline(repeats, 0.0), &grid, evolve, |_, _| Ok(()))
}

/// Norm distance between one pulsed cycle with ZZ coupling `j` and the same
/// cycle without it, on two qubits with main-qubit Hamiltonian `h_main`.
pub fn crosstalk_cycle_error(j: f64, h_main: &Mat, seq: &DDSequence) -> Result<f64> {
    if h_main.nrows() != 2 || h_main.ncols() != 2 {
        return Err(Error::Dimension("main-qubit Hamiltonian must be 2x2".into()));
    }
    if seq.qubits().iter().any(|&q| q > 1) {
        return Err(Error::Config("two-qubit cycle error needs pulses on qubits 0 or 1".into()));
    }
    let h0 = kron(h_main, &identity(2));
    let zz = pauli_on(Pauli::Z, 0, 2)? * pauli_on(Pauli::Z, 1, 2)?;
    let cycle = |h: &Mat| -> Result<Mat> {
        apply_sequence(identity(4), 2, seq, 1, |u: Mat, t0, t1| {
            Ok(matrix_exp(h, C64::new(0.0, -(t1 - t0)))? * u)
        })
    };
    let with = cycle(&(&h0 + zz * C64::new(j, 0.0)))?;
    let without = cycle(&h0)?;
    Ok(operator_norm(&(with - without)))
}

/// A single-qubit rotation gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gate {
    pub axis: Pauli,
    pub angle: f64,
}

impl Gate {
    pub fn unitary(&self) -> Mat {
        rotation(self.axis, self.angle)
    }
}

/// `{Rx(+-pi/8), Rx(+-pi/4), Ry(+-pi/8), Ry(+-pi/4)}`.
pub fn default_gate_set() -> Vec<Gate> {
    let mut g = Vec::with_capacity(8);
    for axis in [Pauli::X, Pauli::Y] {
        for angle in [PI / 8.0, -PI / 8.0, PI / 4.0, -PI / 4.0] {
            g.push(Gate { axis, angle });
        }
    }
    g
}

/// Uniform draws from `gate_set`, reproducible from `seed`.
pub fn random_gate_circuit(seed: u64, depth: usize, gate_set: &[Gate]) -> Result<Vec<Gate>> {
    if gate_set.is_empty() && depth > 0 {
        return Err(Error::Config("empty gate set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..depth)
        .map(|_| gate_set[rng.random_range(0..gate_set.len())])
        .collect())
}

/// Gate centres for a circuit whose consecutive centres sit two gate
/// durations apart, starting one duration after time 0.
pub fn gate_centres(depth: usize, gate_duration: f64) -> Vec<f64> {
    (0..depth)
        .map(|k| gate_duration + 2.0 * gate_duration * k as f64)
        .collect()
}
