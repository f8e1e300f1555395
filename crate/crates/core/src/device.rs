//! Device descriptions and the Hamiltonians built from them.
//!
//! The lab-frame system Hamiltonian is `-sum_i w_i/2 Z_i + sum_{i<j} J_ij Z_i Z_j`.
//! Moving to the frame rotating at the drive frequency `w_d` on every qubit
//! turns each `Z_i` coefficient into `Omega_i = (w_d - w_i)/2` and makes X/Y
//! factors of any coupling term rotate at `w_d`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    dim, hermitian_eigen, identity, kron, pauli_expand, pauli_on, Mat, Pauli, PauliTerm, C64,
    MAX_QUBITS, ZERO,
};

/// Which eigenfrequency convention the drive frequency was calibrated
/// against. Metadata only: the physics depends on `omega_d` alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrameTag {
    #[default]
    Plus,
    Zero,
    One,
    Custom,
}

impl FromStr for FrameTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(FrameTag::Plus),
            "zero" | "0" => Ok(FrameTag::Zero),
            "one" | "1" => Ok(FrameTag::One),
            "custom" => Ok(FrameTag::Custom),
            other => Err(Error::Config(format!("unknown frame '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    /// ZZ strength in rad/ns.
    pub j_zz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceSpec {
    pub n: usize,
    /// Qubit frequencies in rad/ns.
    pub omega_q: Vec<f64>,
    pub couplings: Vec<Coupling>,
    /// Drive (frame) frequency in rad/ns.
    pub omega_d: f64,
    pub frame: FrameTag,
}

impl DeviceSpec {
    pub fn new(
        omega_q: Vec<f64>,
        couplings: Vec<Coupling>,
        omega_d: f64,
        frame: FrameTag,
    ) -> Result<Self> {
        Self::with_sign_policy(omega_q, couplings, omega_d, frame, false)
    }

    /// As [`DeviceSpec::new`], optionally permitting negative `J`.
    pub fn with_sign_policy(
        omega_q: Vec<f64>,
        mut couplings: Vec<Coupling>,
        omega_d: f64,
        frame: FrameTag,
        allow_signed_j: bool,
    ) -> Result<Self> {
        let n = omega_q.len();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Config(format!("device must have 1..={MAX_QUBITS} qubits")));
        }
        if omega_q.iter().chain([&omega_d]).any(|w| !w.is_finite()) {
            return Err(Error::Config("non-finite frequency".into()));
        }
        for c in &couplings {
            if c.i >= c.j || c.j >= n {
                return Err(Error::Config(format!(
                    "coupling ({}, {}) must satisfy i < j < n",
                    c.i, c.j
                )));
            }
            if !c.j_zz.is_finite() || (!allow_signed_j && c.j_zz < 0.0) {
                return Err(Error::Config(format!(
                    "coupling ({}, {}) has invalid strength {}",
                    c.i, c.j, c.j_zz
                )));
            }
        }
        couplings.sort_by_key(|c| (c.i, c.j));
        if couplings.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::Config("duplicate coupling pair".into()));
        }
        Ok(Self {
            n,
            omega_q,
            couplings,
            omega_d,
            frame,
        })
    }

    /// Sum of ZZ strengths between `q` and its neighbours.
    pub fn total_coupling(&self, q: usize) -> f64 {
        self.couplings
            .iter()
            .filter(|c| c.i == q || c.j == q)
            .map(|c| c.j_zz)
            .sum()
    }

    /// Coupling strength between two qubits, zero when uncoupled.
    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        let (i, j) = (a.min(b), a.max(b));
        self.couplings
            .iter()
            .find(|c| c.i == i && c.j == j)
            .map_or(0.0, |c| c.j_zz)
    }

    /// Drive frequency that makes `main` resonant when every neighbour sits in
    /// the state named by `frame`.
    pub fn drive_for_frame(&self, frame: FrameTag, main: usize) -> Result<f64> {
        if main >= self.n {
            return Err(Error::Config(format!("main qubit {main} out of range")));
        }
        let w = self.omega_q[main];
        let jt = self.total_coupling(main);
        match frame {
            FrameTag::Plus => Ok(w),
            FrameTag::Zero => Ok(w - 2.0 * jt),
            FrameTag::One => Ok(w + 2.0 * jt),
            FrameTag::Custom => Err(Error::Config("custom frame needs an explicit omega_d".into())),
        }
    }
}

/// Diagonal of the lab-frame system Hamiltonian.
pub fn lab_diagonal(spec: &DeviceSpec) -> Vec<f64> {
    let n = spec.n;
    (0..dim(n))
        .map(|b| {
            let z = |q: usize| if b >> (n - 1 - q) & 1 == 0 { 1.0 } else { -1.0 };
            let single: f64 = (0..n).map(|q| -spec.omega_q[q] / 2.0 * z(q)).sum();
            let pair: f64 = spec.couplings.iter().map(|c| c.j_zz * z(c.i) * z(c.j)).sum();
            single + pair
        })
        .collect()
}

pub fn build_lab_hamiltonian(spec: &DeviceSpec) -> Mat {
    diag(&lab_diagonal(spec))
}

pub fn diag(values: &[f64]) -> Mat {
    let mut m = Mat::zeros(values.len(), values.len());
    for (k, &v) in values.iter().enumerate() {
        m[(k, k)] = C64::new(v, 0.0);
    }
    m
}

/// Diagonal matrix of Hamming weights.
pub fn number_operator(n: usize) -> Mat {
    let w: Vec<f64> = (0..dim(n)).map(|b: usize| b.count_ones() as f64).collect();
    diag(&w)
}

/// `U sigma U^dag` for `U = exp(-i w_d t Z / 2)`.
pub fn rotated_pauli(alpha: Pauli, t: f64, omega_d: f64) -> Mat {
    let ph = C64::new(0.0, -omega_d * t).exp();
    let mut m = Mat::zeros(2, 2);
    match alpha {
        Pauli::I | Pauli::Z => return alpha.matrix(),
        Pauli::X => {
            m[(0, 1)] = ph;
            m[(1, 0)] = ph.conj();
        }
        Pauli::Y => {
            m[(0, 1)] = C64::new(0.0, -1.0) * ph;
            m[(1, 0)] = C64::new(0.0, 1.0) * ph.conj();
        }
    }
    m
}

/// Fourier components of `rotated_pauli`: pairs `(k, A_k)` with
/// `sigma(t) = sum_k exp(i k w_d t) A_k`.
pub fn pauli_harmonics(alpha: Pauli) -> Vec<(i32, Mat)> {
    let mut lo = Mat::zeros(2, 2);
    let mut hi = Mat::zeros(2, 2);
    match alpha {
        Pauli::I | Pauli::Z => return vec![(0, alpha.matrix())],
        Pauli::X => {
            lo[(0, 1)] = C64::new(1.0, 0.0);
            hi[(1, 0)] = C64::new(1.0, 0.0);
        }
        Pauli::Y => {
            lo[(0, 1)] = C64::new(0.0, -1.0);
            hi[(1, 0)] = C64::new(0.0, 1.0);
        }
    }
    vec![(-1, lo), (1, hi)]
}

/// A rotating-frame term: the lab-frame Pauli string and the number of its
/// factors that rotate at `w_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTerm {
    pub term: PauliTerm,
    pub harmonics: usize,
}

/// Rotating-frame Hamiltonian `H~(t) = static + sum_k U P_k U^dag`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameHamiltonian {
    pub n: usize,
    pub static_part: Mat,
    pub terms: Vec<FrameTerm>,
    pub omega_d: f64,
}

impl FrameHamiltonian {
    pub fn evaluate(&self, t: f64) -> Mat {
        let mut h = self.static_part.clone();
        for ft in &self.terms {
            let mut m = rotated_pauli(ft.term.labels[0], t, self.omega_d);
            for &p in &ft.term.labels[1..] {
                m = kron(&m, &rotated_pauli(p, t, self.omega_d));
            }
            h += m * ft.term.coeff;
        }
        h
    }

    /// Diagonal of the static part, when it is diagonal.
    pub fn static_diagonal(&self) -> Option<Vec<f64>> {
        diagonal_of(&self.static_part)
    }
}

pub fn diagonal_of(m: &Mat) -> Option<Vec<f64>> {
    let d = m.nrows();
    for r in 0..d {
        for c in 0..d {
            if r != c && m[(r, c)].norm() > 0.0 {
                return None;
            }
        }
    }
    Some((0..d).map(|k| m[(k, k)].re).collect())
}

/// Move a diagonal lab Hamiltonian and a set of coupling terms into the frame
/// rotating at `omega_d`. The constant `-n w_d/2` is dropped.
pub fn to_rotating_frame(
    h_lab: &Mat,
    sb_terms: &[PauliTerm],
    omega_d: f64,
) -> Result<FrameHamiltonian> {
    let d = h_lab.nrows();
    if !d.is_power_of_two() || h_lab.ncols() != d {
        return Err(Error::Dimension("lab Hamiltonian must be 2^n square".into()));
    }
    let n = d.trailing_zeros() as usize;
    if diagonal_of(h_lab).is_none() {
        return Err(Error::Config("lab Hamiltonian is not diagonal".into()));
    }
    let mut static_part = h_lab.clone();
    for q in 0..n {
        static_part += pauli_on(Pauli::Z, q, n)? * C64::new(omega_d / 2.0, 0.0);
    }
    let mut terms = Vec::with_capacity(sb_terms.len());
    for t in sb_terms {
        if t.n_qubits() != n {
            return Err(Error::Dimension(format!(
                "term on {} qubits for an {n}-qubit frame",
                t.n_qubits()
            )));
        }
        pauli_expand(t)?;
        terms.push(FrameTerm {
            term: t.clone(),
            harmonics: t.transverse_weight(),
        });
    }
    Ok(FrameHamiltonian {
        n,
        static_part,
        terms,
        omega_d,
    })
}

/// Rotating-frame system Hamiltonian of a device (no coupling terms).
pub fn device_frame(spec: &DeviceSpec) -> FrameHamiltonian {
    to_rotating_frame(&build_lab_hamiltonian(spec), &[], spec.omega_d)
        .expect("lab Hamiltonian of a valid device is diagonal")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoQubitFrame {
    Plus,
    Zero,
}

/// Two-qubit frame Hamiltonians in the `|main spectator>` basis with qubit 0
/// as the main qubit and `Delta = w_0 - w_1`.
///
/// * plus (`w_d = w_0`): `-(Delta+2J)|01><01| - 2J|10><10| - Delta|11><11|`
/// * zero (`w_d = w_0 - 2J`): `-Delta|01><01| + (4J-Delta)|11><11|`
pub fn frame_system_hamiltonian(spec: &DeviceSpec, frame: TwoQubitFrame) -> Result<Mat> {
    if spec.n != 2 {
        return Err(Error::Config(format!("two-qubit frame requested for n={}", spec.n)));
    }
    let delta = spec.omega_q[0] - spec.omega_q[1];
    let j = spec.coupling(0, 1);
    let d = match frame {
        TwoQubitFrame::Plus => [0.0, -(delta + 2.0 * j), -2.0 * j, -delta],
        TwoQubitFrame::Zero => [0.0, -delta, 0.0, 4.0 * j - delta],
    };
    Ok(diag(&d))
}

/// Two coupled transmons, used for dressed-frequency estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransmonPair {
    pub omega_q1: f64,
    pub omega_q2: f64,
    pub g: f64,
    /// Anharmonicity: the second level sits at `2w - eta_anharm`.
    pub eta_anharm: f64,
    pub levels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DressedFrequencies {
    pub omega_eig_0: f64,
    pub omega_eig_1: f64,
    pub omega_eig_plus: f64,
    pub omega_zz: f64,
}

const POLE_TOL: f64 = 1e-6;

/// Second-order perturbative dressed frequencies of the first transmon.
pub fn dressed_frequencies(t: &TransmonPair) -> Result<DressedFrequencies> {
    let delta = t.omega_q1 - t.omega_q2;
    let eta = t.eta_anharm;
    for (name, x) in [("Delta", delta), ("Delta-eta", delta - eta), ("Delta+eta", delta + eta)] {
        if x.abs() < POLE_TOL {
            return Err(Error::Singular(format!("|{name}| = {:e} rad/ns", x.abs())));
        }
    }
    if (t.g / delta).abs() >= 0.2 {
        log::warn!("g/Delta = {:.3}: perturbative dressed frequencies are unreliable", t.g / delta);
    }
    let g2 = t.g * t.g;
    let w0 = t.omega_q1 + g2 / delta;
    let w1 = t.omega_q1 - 2.0 * g2 / (delta - eta) + 2.0 * g2 / (delta + eta) + g2 / delta;
    Ok(DressedFrequencies {
        omega_eig_0: w0,
        omega_eig_1: w1,
        omega_eig_plus: 0.5 * (w0 + w1),
        omega_zz: g2 / (delta + eta) - g2 / (delta - eta),
    })
}

/// Dressed frequencies from exact diagonalisation of two Duffing ladders
/// `E_k = k w - eta k(k-1)/2` coupled by `g (a1^dag a2 + a1 a2^dag)`.
/// Dressed states are labelled by maximum overlap with bare states.
pub fn exact_dressed_frequencies(t: &TransmonPair) -> Result<DressedFrequencies> {
    let l = t.levels;
    if l < 3 {
        return Err(Error::Config("exact transmon model needs at least 3 levels".into()));
    }
    let mut a = Mat::zeros(l, l);
    for k in 1..l {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let ladder = |w: f64| {
        let e: Vec<f64> = (0..l)
            .map(|k| {
                let k = k as f64;
                k * w - t.eta_anharm * k * (k - 1.0) / 2.0
            })
            .collect();
        diag(&e)
    };
    let id = identity(l);
    let ad = a.adjoint();
    let h = kron(&ladder(t.omega_q1), &id)
        + kron(&id, &ladder(t.omega_q2))
        + (kron(&ad, &a) + kron(&a, &ad)) * C64::new(t.g, 0.0);
    let (vals, vecs) = hermitian_eigen(&h);
    let energy = |i: usize, j: usize| {
        let row = i * l + j;
        let best = (0..vals.len())
            .max_by(|&x, &y| vecs[(row, x)].norm_sqr().total_cmp(&vecs[(row, y)].norm_sqr()))
            .unwrap_or(0);
        vals[best]
    };
    let w0 = energy(1, 0) - energy(0, 0);
    let w1 = energy(1, 1) - energy(0, 1);
    Ok(DressedFrequencies {
        omega_eig_0: w0,
        omega_eig_1: w1,
        omega_eig_plus: 0.5 * (w0 + w1),
        omega_zz: 0.5 * (w1 - w0),
    })
}

/// A time-dependent Hamiltonian as seen by the integrators.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> Mat;
    /// Upper bound on the angular frequencies present in the dynamics.
    fn max_frequency(&self) -> f64;
    fn is_static(&self) -> bool;
}

impl Hamiltonian for Mat {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn at(&self, _t: f64) -> Mat {
        self.clone()
    }

    fn max_frequency(&self) -> f64 {
        spectral_width(self)
    }

    fn is_static(&self) -> bool {
        true
    }
}

impl Hamiltonian for FrameHamiltonian {
    fn dim(&self) -> usize {
        self.static_part.nrows()
    }

    fn at(&self, t: f64) -> Mat {
        self.evaluate(t)
    }

    fn max_frequency(&self) -> f64 {
        let coupling: f64 = self.terms.iter().map(|t| 2.0 * t.term.coeff.norm()).sum();
        let harm = self.terms.iter().map(|t| t.harmonics).max().unwrap_or(0) as f64;
        spectral_width(&self.static_part) + coupling + harm * self.omega_d.abs()
    }

    fn is_static(&self) -> bool {
        self.terms.is_empty()
    }
}

fn spectral_width(h: &Mat) -> f64 {
    if let Some(d) = diagonal_of(h) {
        let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        return max - min;
    }
    let (vals, _) = hermitian_eigen(h);
    vals[vals.len() - 1] - vals[0]
}

/// Zero operator on `n` qubits.
pub fn zero_operator(n: usize) -> Mat {
    Mat::from_element(dim(n), dim(n), ZERO)
}
