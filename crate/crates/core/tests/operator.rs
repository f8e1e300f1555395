use proptest::prelude::*;
use zzsim::operator::*;

fn close(a: &Mat, b: &Mat, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).iter().all(|z| z.norm() <= tol)
}

/// Single-qubit product table written out by hand: `a b = phase * c`.
fn product(a: Pauli, b: Pauli) -> (C64, Pauli) {
    use Pauli::*;
    match (a, b) {
        (I, p) | (p, I) => (ONE, p),
        (X, X) | (Y, Y) | (Z, Z) => (ONE, I),
        (X, Y) => (I_UNIT, Z),
        (Y, X) => (-I_UNIT, Z),
        (Y, Z) => (I_UNIT, X),
        (Z, Y) => (-I_UNIT, X),
        (Z, X) => (I_UNIT, Y),
        (X, Z) => (-I_UNIT, Y),
    }
}

#[test]
fn two_qubit_multiplication_table() {
    for a0 in Pauli::ALL {
        for a1 in Pauli::ALL {
            for b0 in Pauli::ALL {
                for b1 in Pauli::ALL {
                    let lhs = pauli_expand(&PauliTerm::new(vec![a0, a1], ONE)).unwrap()
                        * pauli_expand(&PauliTerm::new(vec![b0, b1], ONE)).unwrap();
                    let (p0, c0) = product(a0, b0);
                    let (p1, c1) = product(a1, b1);
                    let rhs = pauli_expand(&PauliTerm::new(vec![c0, c1], p0 * p1)).unwrap();
                    assert!(close(&lhs, &rhs, 1e-15), "{a0:?}{a1:?} * {b0:?}{b1:?}");
                }
            }
        }
    }
}

#[test]
fn qubit_zero_is_leftmost() {
    let zi = pauli_string("ZI").unwrap();
    let expected = [1.0, 1.0, -1.0, -1.0];
    for (k, e) in expected.iter().enumerate() {
        assert_eq!(zi[(k, k)].re, *e);
    }
    assert_eq!(pauli_on(Pauli::Z, 0, 2).unwrap(), zi);
}

#[test]
fn label_parsing() {
    assert!("XYZI".parse::<PauliTerm>().is_ok());
    assert!("".parse::<PauliTerm>().is_err());
    assert!("XQ".parse::<PauliTerm>().is_err());
    assert!(pauli_string("XXXXXX").is_err());
    assert_eq!(PauliTerm::real("XZY", 1.0).unwrap().transverse_weight(), 2);
}

#[test]
fn exp_of_x_quarter_turn() {
    let u = matrix_exp(&Pauli::X.matrix(), C64::new(0.0, -std::f64::consts::FRAC_PI_2)).unwrap();
    let expected = Mat::from_row_slice(2, 2, &[ZERO, -I_UNIT, -I_UNIT, ZERO]);
    assert!(close(&u, &expected, 1e-14));
}

#[test]
fn exp_of_z_sixth_turn() {
    let u = matrix_exp(&Pauli::Z.matrix(), C64::new(0.0, -std::f64::consts::PI / 6.0)).unwrap();
    let a = std::f64::consts::PI / 6.0;
    assert!((u[(0, 0)] - C64::new(0.0, -a).exp()).norm() < 1e-14);
    assert!((u[(1, 1)] - C64::new(0.0, a).exp()).norm() < 1e-14);
    assert!(u[(0, 1)].norm() < 1e-15 && u[(1, 0)].norm() < 1e-15);
}

#[test]
fn exp_of_non_normal_matrix() {
    // exp of a nilpotent matrix truncates after the linear term
    let mut n = Mat::zeros(2, 2);
    n[(0, 1)] = C64::new(2.0, 1.0);
    let e = matrix_exp(&n, ONE).unwrap();
    let expected = identity(2) + n;
    assert!(close(&e, &expected, 1e-13));
}

#[test]
fn exp_rejects_non_square_and_non_finite() {
    assert!(matrix_exp(&Mat::zeros(2, 3), ONE).is_err());
    let mut m = identity(2);
    m[(0, 0)] = C64::new(f64::NAN, 0.0);
    assert!(matrix_exp(&m, ONE).is_err());
}

#[test]
fn partial_trace_of_product_state() {
    let rho = DensityMatrix::product(&[QubitState::Plus, QubitState::One, QubitState::Zero]).unwrap();
    let r0 = rho.reduced(&[0]).unwrap();
    let plus = DensityMatrix::from_ket(&QubitState::Plus.ket()).unwrap();
    assert!(close(&r0, plus.matrix(), 1e-15));
    let r21 = rho.reduced(&[2, 1]).unwrap();
    let expected = DensityMatrix::product(&[QubitState::One, QubitState::Zero]).unwrap();
    assert!(close(&r21, expected.matrix(), 1e-15));
}

#[test]
fn partial_trace_rejects_bad_keep_sets() {
    let rho = identity(4);
    assert!(partial_trace(&rho, &[], 2).is_err());
    assert!(partial_trace(&rho, &[2], 2).is_err());
    assert!(partial_trace(&identity(3), &[0], 2).is_err());
}

#[test]
fn density_matrix_validation() {
    assert!(DensityMatrix::new(identity(2), 1).is_err());
    assert!(DensityMatrix::new(identity(2) * C64::new(0.5, 0.0), 1).is_ok());
    let mut bad = Mat::zeros(2, 2);
    bad[(0, 0)] = C64::new(1.5, 0.0);
    bad[(1, 1)] = C64::new(-0.5, 0.0);
    assert!(DensityMatrix::new(bad, 1).is_err());
}

#[test]
fn rotation_by_pi_is_pauli_up_to_phase() {
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        let r = rotation(p, std::f64::consts::PI);
        assert!(close(&r, &(p.matrix() * -I_UNIT), 1e-15));
    }
}

fn arb_c64() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b))
}

fn arb_matrix(d: usize) -> impl Strategy<Value = Mat> {
    proptest::collection::vec(arb_c64(), d * d).prop_map(move |v| Mat::from_vec(d, d, v))
}

fn arb_density(n: usize) -> impl Strategy<Value = Mat> {
    arb_matrix(dim(n)).prop_map(|a| {
        let m = &a * a.adjoint();
        let tr = m.trace();
        m / tr
    })
}

/// Index-sum definition of the partial trace, written independently of the
/// library's bit bookkeeping.
fn brute_partial_trace(rho: &Mat, keep: &[usize], n: usize) -> Mat {
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let dk = dim(keep.len());
    let mut out = Mat::zeros(dk, dk);
    for r in 0..dim(n) {
        for c in 0..dim(n) {
            let traced_equal = (0..n).filter(|q| !keep.contains(q)).all(|q| bit(r, q) == bit(c, q));
            if !traced_equal {
                continue;
            }
            let sub = |idx: usize| keep.iter().fold(0, |acc, &q| (acc << 1) | bit(idx, q));
            out[(sub(r), sub(c))] += rho[(r, c)];
        }
    }
    out
}

proptest! {
    #[test]
    fn exp_of_anti_hermitian_is_unitary(a in arb_matrix(4), s in -5.0f64..5.0) {
        let h = hermitian_part(&a);
        let u = matrix_exp(&h, C64::new(0.0, s)).unwrap();
        let err = (&u * u.adjoint() - identity(4)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn exp_adds_for_commuting_arguments(a in arb_matrix(2), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let h = hermitian_part(&a);
        let lhs = matrix_exp(&h, C64::new(0.0, s + t)).unwrap();
        let rhs = matrix_exp(&h, C64::new(0.0, s)).unwrap() * matrix_exp(&h, C64::new(0.0, t)).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn partial_trace_preserves_trace(rho in arb_density(3), mask in 1usize..8) {
        let keep: Vec<usize> = (0..3).filter(|q| mask >> q & 1 == 1).collect();
        let r = partial_trace(&rho, &keep, 3).unwrap();
        prop_assert!((r.trace() - ONE).norm() < 1e-12);
        prop_assert!(is_hermitian(&r, 1e-12));
    }

    #[test]
    fn partial_trace_matches_index_sum(rho in arb_matrix(8), mask in 1usize..8) {
        let keep: Vec<usize> = (0..3).filter(|q| mask >> q & 1 == 1).collect();
        let fast = partial_trace(&rho, &keep, 3).unwrap();
        prop_assert!(close(&fast, &brute_partial_trace(&rho, &keep, 3), 1e-13));
    }

    #[test]
    fn embedded_operators_on_distinct_qubits_commute(a in arb_matrix(2), b in arb_matrix(2), qa in 0usize..3, qb in 0usize..3) {
        prop_assume!(qa != qb);
        let ea = embed_single(&a, qa, 3).unwrap();
        let eb = embed_single(&b, qb, 3).unwrap();
        prop_assert!(commutator(&ea, &eb).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn conjugation_preserves_spectrum(rho in arb_density(2), a in arb_matrix(4)) {
        let u = matrix_exp(&hermitian_part(&a), C64::new(0.0, 1.0)).unwrap();
        let dm = DensityMatrix::new(rho.clone(), 2).unwrap();
        let rotated = dm.conjugate_by(&u);
        let (v0, _) = hermitian_eigen(&rho);
        let (v1, _) = hermitian_eigen(rotated.matrix());
        for (x, y) in v0.iter().zip(&v1) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
