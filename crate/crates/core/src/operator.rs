//! Dense operator algebra on n-qubit Hilbert spaces.
//!
//! Basis index bit `n - 1 - q` belongs to qubit `q`, so qubit 0 is the leftmost
//! tensor factor and `|q0 q1 ...>` reads like a binary number.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type Ket = DVector<C64>;

/// Largest register the dense engines are meant for.
pub const MAX_QUBITS: usize = 5;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I_UNIT: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Mat {
        let (a, b, c, d) = match self {
            Pauli::I => (ONE, ZERO, ZERO, ONE),
            Pauli::X => (ZERO, ONE, ONE, ZERO),
            Pauli::Y => (ZERO, -I_UNIT, I_UNIT, ZERO),
            Pauli::Z => (ONE, ZERO, ZERO, -ONE),
        };
        Mat::from_row_slice(2, 2, &[a, b, c, d])
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' | '0' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::InvalidLabel(format!("unknown Pauli '{other}'"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// True when the two single-qubit Paulis anticommute.
    pub fn anticommutes(self, other: Pauli) -> bool {
        self != Pauli::I && other != Pauli::I && self != other
    }
}

/// A weighted tensor product of Paulis, one label per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub labels: Vec<Pauli>,
    pub coeff: C64,
}

impl PauliTerm {
    pub fn new(labels: Vec<Pauli>, coeff: C64) -> Self {
        Self { labels, coeff }
    }

    pub fn real(label: &str, coeff: f64) -> Result<Self> {
        let mut t: PauliTerm = label.parse()?;
        t.coeff = C64::new(coeff, 0.0);
        Ok(t)
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    /// Number of X or Y factors, i.e. factors that rotate in a Z frame.
    pub fn transverse_weight(&self) -> usize {
        self.labels
            .iter()
            .filter(|p| matches!(p, Pauli::X | Pauli::Y))
            .count()
    }
}

impl FromStr for PauliTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidLabel("empty label".into()));
        }
        let labels = s.chars().map(Pauli::from_char).collect::<Result<Vec<_>>>()?;
        Ok(Self { labels, coeff: ONE })
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.labels.iter().map(|p| p.as_char()).collect();
        write!(f, "({})*{}", self.coeff, s)
    }
}

pub fn dim(n: usize) -> usize {
    1usize << n
}

pub fn identity(d: usize) -> Mat {
    Mat::identity(d, d)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Dense matrix of a Pauli string, including its coefficient.
pub fn pauli_expand(term: &PauliTerm) -> Result<Mat> {
    let n = term.n_qubits();
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "Pauli term on {n} qubits, supported range is 1..={MAX_QUBITS}"
        )));
    }
    let mut out = term.labels[0].matrix();
    for p in &term.labels[1..] {
        out = kron(&out, &p.matrix());
    }
    Ok(out * term.coeff)
}

pub fn pauli_string(label: &str) -> Result<Mat> {
    pauli_expand(&label.parse()?)
}

/// Embed a single-qubit operator on `qubit` of an `n`-qubit register.
pub fn embed_single(op: &Mat, qubit: usize, n: usize) -> Result<Mat> {
    if op.nrows() != 2 || op.ncols() != 2 {
        return Err(Error::Dimension("embed_single expects a 2x2 operator".into()));
    }
    if qubit >= n || n > MAX_QUBITS {
        return Err(Error::Dimension(format!("qubit {qubit} out of range for n={n}")));
    }
    let left = identity(dim(qubit));
    let right = identity(dim(n - qubit - 1));
    Ok(kron(&kron(&left, op), &right))
}

/// Single-qubit Pauli `p` acting on `qubit` of an `n`-qubit register.
pub fn pauli_on(p: Pauli, qubit: usize, n: usize) -> Result<Mat> {
    embed_single(&p.matrix(), qubit, n)
}

pub fn dagger(m: &Mat) -> Mat {
    m.adjoint()
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

pub fn anticommutator(a: &Mat, b: &Mat) -> Mat {
    a * b + b * a
}

pub fn is_hermitian(m: &Mat, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).iter().all(|z| z.norm() <= tol)
}

pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest singular value.
pub fn operator_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching column eigenvectors.
pub fn hermitian_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// `exp(scale * a)`.
///
/// When `scale * a` is Hermitian or anti-Hermitian the exponential goes through
/// an eigendecomposition (unitary to machine precision); otherwise a Padé
/// scaling-and-squaring approximant is used.
pub fn matrix_exp(a: &Mat, scale: C64) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::Dimension("matrix_exp needs a square matrix".into()));
    }
    if !scale.is_finite() || a.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numerical("non-finite input to matrix_exp".into()));
    }
    let b = a * scale;
    let tol = 1e-13 * (1.0 + b.iter().map(|z| z.norm()).fold(0.0, f64::max));
    let out = if is_hermitian(&b, tol) {
        let (vals, v) = hermitian_eigen(&b);
        spectral_apply(&v, &vals, |x| C64::new(x.exp(), 0.0))
    } else {
        let k = &b * C64::new(0.0, -1.0);
        if is_hermitian(&k, tol) {
            // b = i k with k Hermitian
            let (vals, v) = hermitian_eigen(&k);
            spectral_apply(&v, &vals, |x| C64::new(0.0, x).exp())
        } else {
            b.exp()
        }
    };
    if out.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    Ok(out)
}

fn spectral_apply(v: &Mat, vals: &[f64], f: impl Fn(f64) -> C64) -> Mat {
    let mut scaled = v.clone();
    for (j, &x) in vals.iter().enumerate() {
        let fx = f(x);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= fx;
        }
    }
    scaled * v.adjoint()
}

/// Trace out every qubit not listed in `keep`. The kept qubits retain their
/// relative order.
pub fn partial_trace(rho: &Mat, keep: &[usize], n: usize) -> Result<Mat> {
    let d = dim(n);
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::Dimension(format!(
            "partial_trace: {}x{} matrix for n={n}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::Dimension("partial_trace needs a nonempty keep set".into()));
    }
    if keep.iter().any(|&q| q >= n) {
        return Err(Error::Dimension(format!("keep set {keep:?} out of range for n={n}")));
    }
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let dk = dim(keep.len());
    let dt = dim(traced.len());
    let compose = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in keep.iter().enumerate() {
            if kept_bits >> (keep.len() - 1 - pos) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        for (pos, &q) in traced.iter().enumerate() {
            if traced_bits >> (traced.len() - 1 - pos) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        idx
    };
    let mut out = Mat::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = ZERO;
            for t in 0..dt {
                acc += rho[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Named single-qubit pure states used for preparation and spectators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QubitState {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
}

impl QubitState {
    pub fn ket(self) -> Ket {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            QubitState::Zero => (ONE, ZERO),
            QubitState::One => (ZERO, ONE),
            QubitState::Plus => (C64::new(h, 0.0), C64::new(h, 0.0)),
            QubitState::Minus => (C64::new(h, 0.0), C64::new(-h, 0.0)),
            QubitState::PlusI => (C64::new(h, 0.0), C64::new(0.0, h)),
            QubitState::MinusI => (C64::new(h, 0.0), C64::new(0.0, -h)),
        };
        Ket::from_vec(vec![a, b])
    }

    pub fn label(self) -> &'static str {
        match self {
            QubitState::Zero => "0",
            QubitState::One => "1",
            QubitState::Plus => "+",
            QubitState::Minus => "-",
            QubitState::PlusI => "+i",
            QubitState::MinusI => "-i",
        }
    }
}

impl FromStr for QubitState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" | "zero" => Ok(QubitState::Zero),
            "1" | "one" => Ok(QubitState::One),
            "+" | "plus" => Ok(QubitState::Plus),
            "-" | "minus" => Ok(QubitState::Minus),
            "+i" | "plus_i" => Ok(QubitState::PlusI),
            "-i" | "minus_i" => Ok(QubitState::MinusI),
            other => Err(Error::Config(format!("unknown qubit state '{other}'"))),
        }
    }
}

impl fmt::Display for QubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn kron_kets(kets: &[Ket]) -> Ket {
    let mut out = Ket::from_vec(vec![ONE]);
    for k in kets {
        out = out.kronecker(k);
    }
    out
}

/// A validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: Mat,
    n: usize,
}

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-9;
    pub const HERM_TOL: f64 = 1e-9;
    pub const NEG_TOL: f64 = 1e-7;

    /// Validates trace and Hermiticity. Eigenvalues below `-NEG_TOL` are
    /// rejected; smaller negativity is accepted and logged.
    pub fn new(mat: Mat, n: usize) -> Result<Self> {
        let d = dim(n);
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::Dimension(format!("density matrix must be {d}x{d}")));
        }
        if !is_hermitian(&mat, Self::HERM_TOL) {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        let tr = mat.trace();
        if (tr - ONE).norm() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigen(&mat).0[0];
        if min < -Self::NEG_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        if min < 0.0 {
            log::debug!("density matrix eigenvalue {min:e} within tolerance");
        }
        Ok(Self { mat, n })
    }

    /// Wrap without validation; used inside integrators that check
    /// invariants on their own schedule.
    pub fn from_raw(mat: Mat, n: usize) -> Self {
        Self { mat, n }
    }

    pub fn from_ket(psi: &Ket) -> Result<Self> {
        let d = psi.len();
        if !d.is_power_of_two() || d < 2 {
            return Err(Error::Dimension(format!("ket length {d} is not 2^n")));
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("ket norm {norm}")));
        }
        Ok(Self {
            mat: psi * psi.adjoint(),
            n: d.trailing_zeros() as usize,
        })
    }

    pub fn product(states: &[QubitState]) -> Result<Self> {
        let kets: Vec<Ket> = states.iter().map(|s| s.ket()).collect();
        Self::from_ket(&kron_kets(&kets))
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn into_matrix(self) -> Mat {
        self.mat
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.mat).0[0]
    }

    pub fn conjugate_by(&self, u: &Mat) -> Self {
        Self {
            mat: u * &self.mat * u.adjoint(),
            n: self.n,
        }
    }

    pub fn reduced(&self, keep: &[usize]) -> Result<Mat> {
        partial_trace(&self.mat, keep, self.n)
    }

    /// `<psi| rho |psi>` for a pure reference on the full register.
    pub fn overlap(&self, psi: &Ket) -> f64 {
        (psi.adjoint() * &self.mat * psi)[(0, 0)].re
    }
}

/// `exp(-i theta/2 sigma)` for a single-qubit Pauli.
pub fn rotation(axis: Pauli, theta: f64) -> Mat {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    identity(2) * C64::new(c, 0.0) + axis.matrix() * C64::new(0.0, -s)
}
