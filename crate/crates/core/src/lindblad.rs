//! Phenomenological Lindblad dynamics.
//!
//! `d rho/dt = -i[H, rho] + sum_a g_a (L_a rho L_a^dag - {L_a^dag L_a, rho}/2)`
//!
//! Integration is fixed-step RK4. The two-qubit closed forms in this module
//! serve as independent oracles for the integrator.

use serde::{Deserialize, Serialize};

use crate::device::Hamiltonian;
use crate::error::{Error, Result};
use crate::operator::{
    dim, embed_single, kron, pauli_expand, DensityMatrix, Mat, PauliTerm, QubitState, C64, ONE,
};

/// Jump operator descriptor.
#[derive(Clone, Debug, PartialEq)]
pub enum JumpOperator {
    Pauli(PauliTerm),
    /// `|0><1|` on one qubit.
    Lower(usize),
    /// `|0><1| (x) |0><1|` on two qubits.
    LowerJoint(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladOp {
    pub op: JumpOperator,
    /// Rate in 1/ns.
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LindbladSpec {
    pub ops: Vec<LindbladOp>,
}

impl LindbladSpec {
    pub fn new(ops: Vec<LindbladOp>) -> Result<Self> {
        for o in &ops {
            if !(o.rate >= 0.0) || !o.rate.is_finite() {
                return Err(Error::Config(format!("rate {} must be finite and >= 0", o.rate)));
            }
        }
        Ok(Self { ops })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Convenience constructor from `(pauli label, rate)` pairs.
    pub fn paulis(items: &[(&str, f64)]) -> Result<Self> {
        let ops = items
            .iter()
            .map(|&(l, r)| {
                Ok(LindbladOp {
                    op: JumpOperator::Pauli(l.parse()?),
                    rate: r,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }

    pub fn push(&mut self, op: JumpOperator, rate: f64) -> Result<()> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::Config(format!("rate {rate} must be finite and >= 0")));
        }
        self.ops.push(LindbladOp { op, rate });
        Ok(())
    }

    /// Build dense jump operators for an `n`-qubit register.
    pub fn compile(&self, n: usize) -> Result<Dissipator> {
        let mut terms = Vec::with_capacity(self.ops.len());
        for o in &self.ops {
            let l = jump_matrix(&o.op, n)?;
            if o.rate == 0.0 {
                continue;
            }
            let ldl = l.adjoint() * &l;
            terms.push(DissipatorTerm { l, ldl, rate: o.rate });
        }
        Ok(Dissipator { n, terms })
    }
}

fn lowering() -> Mat {
    let mut m = Mat::zeros(2, 2);
    m[(0, 1)] = ONE;
    m
}

pub fn jump_matrix(op: &JumpOperator, n: usize) -> Result<Mat> {
    match op {
        JumpOperator::Pauli(t) => {
            if t.n_qubits() != n {
                return Err(Error::Dimension(format!(
                    "jump operator on {} qubits for an {n}-qubit register",
                    t.n_qubits()
                )));
            }
            pauli_expand(t)
        }
        JumpOperator::Lower(q) => embed_single(&lowering(), *q, n),
        JumpOperator::LowerJoint(a, b) => {
            if a == b {
                return Err(Error::Config("joint lowering needs two distinct qubits".into()));
            }
            Ok(embed_single(&lowering(), *a, n)? * embed_single(&lowering(), *b, n)?)
        }
    }
}

#[derive(Clone, Debug)]
pub struct DissipatorTerm {
    pub l: Mat,
    pub ldl: Mat,
    pub rate: f64,
}

/// Jump operators compiled for a fixed register.
#[derive(Clone, Debug)]
pub struct Dissipator {
    pub n: usize,
    pub terms: Vec<DissipatorTerm>,
}

impl Dissipator {
    pub fn none(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    /// Rough upper bound on the dissipative rates, used for the step cap.
    pub fn rate_scale(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| 2.0 * t.rate * crate::operator::operator_norm(&t.ldl))
            .sum()
    }
}

pub fn lindblad_rhs(rho: &Mat, h: &Mat, diss: &Dissipator) -> Result<Mat> {
    let d = rho.nrows();
    if h.nrows() != d || h.ncols() != d || rho.ncols() != d || dim(diss.n) != d {
        return Err(Error::Dimension(format!(
            "lindblad_rhs: rho {}x{}, H {}x{}, register dim {}",
            rho.nrows(),
            rho.ncols(),
            h.nrows(),
            h.ncols(),
            dim(diss.n)
        )));
    }
    Ok(rhs_unchecked(rho, h, diss))
}

fn rhs_unchecked(rho: &Mat, h: &Mat, diss: &Dissipator) -> Mat {
    let hr = h * rho;
    let mut out = (&hr - hr.adjoint()) * C64::new(0.0, -1.0);
    for t in &diss.terms {
        let lr = &t.l * rho;
        let jump = &lr * t.l.adjoint();
        let anti = &t.ldl * rho;
        out += (jump - (&anti + anti.adjoint()) * C64::new(0.5, 0.0)) * C64::new(t.rate, 0.0);
    }
    out
}

/// Liouvillian superoperator acting on row-major `vec(rho)`.
pub fn liouvillian(h: &Mat, diss: &Dissipator) -> Mat {
    let d = h.nrows();
    let id = Mat::identity(d, d);
    let mut out = (kron(h, &id) - kron(&id, &h.transpose())) * C64::new(0.0, -1.0);
    for t in &diss.terms {
        let lbar = t.l.map(|z| z.conj());
        out += (kron(&t.l, &lbar)
            - kron(&t.ldl, &id) * C64::new(0.5, 0.0)
            - kron(&id, &t.ldl.transpose()) * C64::new(0.5, 0.0))
            * C64::new(t.rate, 0.0);
    }
    out
}

pub fn vectorize(rho: &Mat) -> crate::operator::Ket {
    let d = rho.nrows();
    crate::operator::Ket::from_iterator(d * d, (0..d).flat_map(|r| (0..d).map(move |c| rho[(r, c)])))
}

pub fn unvectorize(v: &crate::operator::Ket, d: usize) -> Mat {
    Mat::from_fn(d, d, |r, c| v[r * d + c])
}

const TRACE_DRIFT_LIMIT: f64 = 1e-6;
const MAX_STEPS: u64 = 2_000_000_000;

/// Integrate from `grid[0]` (where the state is `rho0`) through every grid
/// time. The returned trajectory has one state per grid point.
pub fn evolve<H: Hamiltonian + ?Sized>(
    rho0: &DensityMatrix,
    h: &H,
    diss: &Dissipator,
    grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    let d = dim(rho0.n_qubits());
    if h.dim() != d || dim(diss.n) != d {
        return Err(Error::Dimension("evolve: Hamiltonian, dissipator and state disagree".into()));
    }
    check_grid(grid)?;
    let h_cap = step_cap(h.max_frequency() + diss.rate_scale());
    let mut rho = rho0.matrix().clone();
    let mut out = Vec::with_capacity(grid.len());
    out.push(rho0.clone());
    for w in grid.windows(2) {
        rho = integrate_interval(rho, h, diss, w[0], w[1], h_cap)?;
        out.push(DensityMatrix::from_raw(rho.clone(), rho0.n_qubits()));
    }
    Ok(out)
}

/// Step cap `2 pi / (50 f_max)`.
pub fn step_cap(f_max: f64) -> f64 {
    if f_max > 0.0 {
        2.0 * std::f64::consts::PI / (50.0 * f_max)
    } else {
        f64::INFINITY
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("empty time grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// RK4 from `t0` to `t1` with the largest uniform step not above `h_cap`.
pub fn integrate_interval<H: Hamiltonian + ?Sized>(
    mut rho: Mat,
    h: &H,
    diss: &Dissipator,
    t0: f64,
    t1: f64,
    h_cap: f64,
) -> Result<Mat> {
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(rho);
    }
    let steps = (span / h_cap).ceil().max(1.0);
    if steps > MAX_STEPS as f64 {
        return Err(Error::Numerical(format!(
            "step size underflow: {steps:e} RK4 steps needed over {span} ns"
        )));
    }
    let steps = steps as u64;
    let dt = span / steps as f64;
    let half = C64::new(dt / 2.0, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    let h_static = h.is_static().then(|| h.at(t0));
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let owned;
        let (ha, hm, hb): (&Mat, &Mat, &Mat) = match &h_static {
            Some(m) => (m, m, m),
            None => {
                owned = (h.at(t), h.at(t + dt / 2.0), h.at(t + dt));
                (&owned.0, &owned.1, &owned.2)
            }
        };
        let k1 = rhs_unchecked(&rho, ha, diss);
        let k2 = rhs_unchecked(&(&rho + &k1 * half), hm, diss);
        let k3 = rhs_unchecked(&(&rho + &k2 * half), hm, diss);
        let k4 = rhs_unchecked(&(&rho + &k3 * full), hb, diss);
        rho += (k1 + (k2 + k3) * two + k4) * sixth;
        rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    }
    let tr = rho.trace();
    let drift = (tr - ONE).norm();
    if drift > TRACE_DRIFT_LIMIT {
        return Err(Error::Engine(format!("trace drift {drift:e} at t = {t1} ns")));
    }
    if drift > 1e-12 {
        log::debug!("renormalising trace drift {drift:e} at t = {t1} ns");
        rho /= tr;
    }
    Ok(rho)
}

/// `<psi| Tr_{others} rho |psi>` for a single-qubit reference on `main`.
pub fn main_fidelity(rho: &DensityMatrix, main: usize, psi: &crate::operator::Ket) -> Result<f64> {
    let red = rho.reduced(&[main])?;
    Ok((psi.adjoint() * red * psi)[(0, 0)].re)
}

/// Time grid with fidelities, optional shot counts and confidence intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelitySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub ci_half_width: Option<Vec<f64>>,
    pub label: String,
}

impl FidelitySeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension("times and values differ in length".into()));
        }
        check_grid(&times)?;
        if values.iter().any(|v| !(*v >= -1e-9 && *v <= 1.0 + 1e-9)) {
            return Err(Error::Numerical("fidelity outside [0, 1]".into()));
        }
        Ok(Self {
            times,
            values,
            ci_half_width: None,
            label: label.into(),
        })
    }
}

/// Free-evolution fidelity of the main qubit under `{ZI, IZ, ZZ}` dephasing
/// with total main-qubit rate `gamma = g1 + g3`.
///
/// In the plus frame the spectator only flips the sign of the `2J` rotation, so
/// every spectator state gives `(1 + e^{-2 gamma t} cos 2Jt)/2`. In the zero
/// frame the spectator `|1>` component precesses at `4J` while `|0>` is static,
/// so the envelope factor is `p0 + p1 cos 4Jt`.
pub fn closed_form_fidelity(
    frame: crate::device::TwoQubitFrame,
    spectator: QubitState,
    t: f64,
    j: f64,
    gamma: f64,
) -> f64 {
    let env = (-2.0 * gamma * t).exp();
    let f = match frame {
        crate::device::TwoQubitFrame::Plus => (2.0 * j * t).cos(),
        crate::device::TwoQubitFrame::Zero => {
            let p1 = spectator.ket()[1].norm_sqr();
            (1.0 - p1) + p1 * (4.0 * j * t).cos()
        }
    };
    0.5 * (1.0 + env * f)
}

/// `cos(w t) + a sin(w t)/w` with `w = sqrt(4J^2 - a^2)`, continued to
/// `cosh`/`sinh` when `w` is imaginary.
fn damped_oscillation(j: f64, a: f64, t: f64) -> f64 {
    let w2 = 4.0 * j * j - a * a;
    if w2 > 0.0 {
        let w = w2.sqrt();
        (w * t).cos() + a * (w * t).sin() / w
    } else if w2 < 0.0 {
        let k = (-w2).sqrt();
        (k * t).cosh() + a * (k * t).sinh() / k
    } else {
        1.0 + a * t
    }
}

/// Dephasing plus bit-flip noise `{ZI, IZ, ZZ, XI, IX, XX}` with rates
/// `gammas[k] = gamma_{k+1}`. Independent of the spectator state.
pub fn closed_form_x_noise(t: f64, j: f64, gammas: [f64; 6]) -> f64 {
    let [g1, _g2, g3, g4, g5, _g6] = gammas;
    let decay = (-(2.0 * (g1 + g3) + g4 + g5) * t).exp();
    0.5 * (1.0 + decay * damped_oscillation(j, g4 + g5, t))
}

/// Dephasing plus `{YI, IY, YY}` noise; `gammas = [g1, g3, g7, g8, g9]`.
pub fn closed_form_y_noise(t: f64, j: f64, gammas: [f64; 5]) -> f64 {
    let [g1, g3, g7, g8, g9] = gammas;
    let decay = (-(2.0 * (g1 + g3 + g9) + g7 + g8) * t).exp();
    0.5 * (1.0 + decay * damped_oscillation(j, g8 - g7, t))
}

/// Dephasing plus spontaneous emission `{s-(x)I, I(x)s-, s-(x)s-}`;
/// `gammas = [g1, g3, g10, g11, g12]`. Spectator must be `0`, `1` or `+`.
pub fn closed_form_emission(spectator: QubitState, t: f64, j: f64, gammas: [f64; 5]) -> Result<f64> {
    let [g1, g3, g10, g11, g12] = gammas;
    let gd = 2.0 * g11 + g12;
    let e = (-t * (2.0 * (g1 + g3) + g10 / 2.0)).exp();
    let (c, s) = ((2.0 * j * t).cos(), (2.0 * j * t).sin());
    let q = (-gd * t / 2.0).exp();
    let j8 = (8.0 * j).powi(2);
    let den = j8 + gd * gd;
    Ok(match spectator {
        QubitState::Zero => 0.5 * (1.0 + c * e),
        QubitState::One => {
            let cc = (j8 * q + gd * (2.0 * g11 + g12 * q)) / den;
            let ss = 16.0 * j * g11 * (1.0 + q) / den;
            0.5 * (1.0 + e * (cc * c + ss * s))
        }
        QubitState::Plus => {
            0.5 + e / den
                * ((1.0 + q) * (0.25 * c * j8 + 4.0 * s * j * g11)
                    + 0.25 * c * gd * (g12 * q + 4.0 * g11 + g12))
        }
        other => {
            return Err(Error::Config(format!(
                "emission closed form covers spectators 0, 1, +; got {other}"
            )))
        }
    })
}
