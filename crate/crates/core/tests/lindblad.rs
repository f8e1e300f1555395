use std::f64::consts::PI;

use proptest::prelude::*;
use zzsim::device::*;
use zzsim::lindblad::*;
use zzsim::operator::*;

const SPECTATORS: [QubitState; 3] = [QubitState::Zero, QubitState::One, QubitState::Plus];

fn khz(f: f64) -> f64 {
    2.0 * PI * f * 1e-6
}

fn per_us(r: f64) -> f64 {
    r * 1e-3
}

fn plus_frame(j: f64) -> Mat {
    let spec = DeviceSpec::new(
        vec![2.0 * PI * 4.9, 2.0 * PI * 4.897],
        vec![Coupling { i: 0, j: 1, j_zz: j }],
        2.0 * PI * 4.9,
        FrameTag::Plus,
    )
    .unwrap();
    frame_system_hamiltonian(&spec, TwoQubitFrame::Plus).unwrap()
}

fn main_plus_fidelities(h: &Mat, noise: &LindbladSpec, s: QubitState, times: &[f64]) -> Vec<f64> {
    let rho0 = DensityMatrix::product(&[QubitState::Plus, s]).unwrap();
    let traj = evolve(&rho0, h, &noise.compile(2).unwrap(), times).unwrap();
    traj.iter()
        .map(|r| main_fidelity(r, 0, &QubitState::Plus.ket()).unwrap())
        .collect()
}

fn linspace(t_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn no_dynamics_leaves_state_fixed() {
    let rho0 = DensityMatrix::product(&[QubitState::Plus, QubitState::PlusI]).unwrap();
    let traj = evolve(&rho0, &Mat::zeros(4, 4), &Dissipator::none(2), &linspace(100.0, 5)).unwrap();
    for r in &traj {
        assert_eq!(r.matrix(), rho0.matrix());
    }
}

fn test_hamiltonian() -> Mat {
    pauli_string("XZ").unwrap() * C64::new(0.013, 0.0)
        + pauli_string("YY").unwrap() * C64::new(0.02, 0.0)
        + pauli_string("ZI").unwrap() * C64::new(-0.05, 0.0)
}

fn unitary_error(h: &Mat, times: &[f64]) -> f64 {
    let rho0 = DensityMatrix::product(&[QubitState::Plus, QubitState::One]).unwrap();
    let traj = evolve(&rho0, h, &Dissipator::none(2), times).unwrap();
    times
        .iter()
        .zip(&traj)
        .map(|(t, r)| {
            let u = matrix_exp(h, C64::new(0.0, -t)).unwrap();
            let expected = rho0.conjugate_by(&u);
            (r.matrix() - expected.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[test]
fn unitary_evolution_matches_exponential() {
    let h = test_hamiltonian();
    // Fine grid: the step follows the grid spacing.
    assert!(unitary_error(&h, &linspace(200.0, 4001)) < 1e-8);
    // Coarse grid: the step sits at the frequency cap, where RK4 loses about
    // (w dt)^5 / 120 per step.
    let span = 500.0;
    let steps = span / step_cap(h.max_frequency());
    let bound = steps * (2.0 * PI / 50.0f64).powi(5) / 120.0;
    assert!(unitary_error(&h, &linspace(span, 11)) < bound);
}

#[test]
fn dephasing_damps_coherence_at_twice_the_rate() {
    let gamma = 0.03;
    let diss = LindbladSpec::paulis(&[("Z", gamma)]).unwrap().compile(1).unwrap();
    let rho = DensityMatrix::product(&[QubitState::Plus]).unwrap();
    let d = lindblad_rhs(rho.matrix(), &Mat::zeros(2, 2), &diss).unwrap();
    assert!((d[(0, 1)] - rho.matrix()[(0, 1)] * (-2.0 * gamma)).norm() < 1e-15);
    assert!(d[(0, 0)].norm() < 1e-15);
}

#[test]
fn spec_rejects_bad_rates_and_sizes() {
    assert!(LindbladSpec::paulis(&[("ZI", -0.1)]).is_err());
    assert!(LindbladSpec::paulis(&[("ZI", f64::NAN)]).is_err());
    assert!(LindbladSpec::paulis(&[("ZIZ", 0.1)]).unwrap().compile(2).is_err());
    let mut s = LindbladSpec::empty();
    assert!(s.push(JumpOperator::Lower(3), 0.1).is_ok());
    assert!(s.compile(2).is_err());
    assert!(s.push(JumpOperator::Lower(0), f64::INFINITY).is_err());
}

#[test]
fn evolve_rejects_bad_grids() {
    let rho0 = DensityMatrix::product(&[QubitState::Zero]).unwrap();
    let h = Mat::zeros(2, 2);
    let d = Dissipator::none(1);
    assert!(evolve(&rho0, &h, &d, &[]).is_err());
    assert!(evolve(&rho0, &h, &d, &[0.0, 1.0, 1.0]).is_err());
    assert!(evolve(&rho0, &h, &d, &[0.0, f64::NAN]).is_err());
    assert!(evolve(&rho0, &Mat::zeros(4, 4), &d, &[0.0, 1.0]).is_err());
}

#[test]
fn fidelity_series_validation() {
    assert!(FidelitySeries::new(vec![0.0, 1.0], vec![1.0], "x").is_err());
    assert!(FidelitySeries::new(vec![0.0, 1.0], vec![1.0, 1.2], "x").is_err());
    assert!(FidelitySeries::new(vec![1.0, 0.0], vec![1.0, 1.0], "x").is_err());
    assert!(FidelitySeries::new(vec![0.0, 1.0], vec![1.0, 0.5], "x").is_ok());
}

#[test]
fn closed_forms_start_at_one() {
    let j = khz(51.55);
    let g = [0.001; 6];
    for s in SPECTATORS {
        assert_eq!(closed_form_fidelity(TwoQubitFrame::Plus, s, 0.0, j, 0.001), 1.0);
        assert_eq!(closed_form_fidelity(TwoQubitFrame::Zero, s, 0.0, j, 0.001), 1.0);
        assert!((closed_form_emission(s, 0.0, j, [0.001; 5]).unwrap() - 1.0).abs() < 1e-15);
    }
    assert_eq!(closed_form_x_noise(0.0, j, g), 1.0);
    assert_eq!(closed_form_y_noise(0.0, j, [0.001; 5]), 1.0);
}

#[test]
fn plus_frame_first_crossing() {
    let j = khz(51.55);
    let t: f64 = 1.0 / (8.0 * 51.55e3) * 1e9;
    assert!((t - 2425.0).abs() < 1.0);
    for s in SPECTATORS {
        assert!((closed_form_fidelity(TwoQubitFrame::Plus, s, t, j, 0.0) - 0.5).abs() < 1e-12);
    }
}

#[test]
fn zero_frame_branches() {
    let (j, gamma) = (khz(52.63), per_us(0.02));
    for t in linspace(20_000.0, 9) {
        let env = (-2.0 * gamma * t).exp();
        let p0 = closed_form_fidelity(TwoQubitFrame::Zero, QubitState::Zero, t, j, gamma);
        assert!((p0 - 0.5 * (1.0 + env)).abs() < 1e-15);
        let pp = closed_form_fidelity(TwoQubitFrame::Zero, QubitState::Plus, t, j, gamma);
        assert!((pp - 0.5 * (1.0 + env * (2.0 * j * t).cos().powi(2))).abs() < 1e-12);
        let p1 = closed_form_fidelity(TwoQubitFrame::Zero, QubitState::One, t, j, gamma);
        assert!((p1 - 0.5 * (1.0 + env * (4.0 * j * t).cos())).abs() < 1e-12);
    }
}

#[test]
fn extended_closed_forms_reduce_to_dephasing() {
    let j = khz(40.0);
    let (g1, g3) = (per_us(0.02), per_us(0.005));
    for t in linspace(20_000.0, 21) {
        let base = closed_form_fidelity(TwoQubitFrame::Plus, QubitState::Plus, t, j, g1 + g3);
        assert!((closed_form_x_noise(t, j, [g1, 0.3, g3, 0.0, 0.0, 0.7]) - base).abs() < 1e-14);
        assert!((closed_form_y_noise(t, j, [g1, g3, 0.0, 0.0, 0.0]) - base).abs() < 1e-14);
        for s in SPECTATORS {
            assert!((closed_form_emission(s, t, j, [g1, g3, 0.0, 0.0, 0.0]).unwrap() - base).abs() < 1e-14);
        }
    }
}

#[test]
fn equal_y_rates_keep_the_bare_frequency() {
    let j = khz(40.0);
    let g = per_us(0.03);
    let rates = [0.0, 0.0, g, g, 0.0];
    for t in linspace(20_000.0, 21) {
        let expected = 0.5 * (1.0 + (-2.0 * g * t).exp() * (2.0 * j * t).cos());
        assert!((closed_form_y_noise(t, j, rates) - expected).abs() < 1e-14);
    }
}

#[test]
fn overdamped_x_noise_is_continuous_at_threshold() {
    let j = 0.01;
    let at = |a: f64, t: f64| closed_form_x_noise(t, j, [0.0, 0.0, 0.0, a / 2.0, a / 2.0, 0.0]);
    for t in [1.0, 10.0, 100.0] {
        let crit = at(2.0 * j, t);
        assert!((at(2.0 * j * (1.0 - 1e-7), t) - crit).abs() < 1e-6);
        assert!((at(2.0 * j * (1.0 + 1e-7), t) - crit).abs() < 1e-6);
    }
}

#[test]
fn emission_rejects_other_spectators() {
    assert!(closed_form_emission(QubitState::Minus, 1.0, 0.1, [0.0; 5]).is_err());
}

/// Largest `|p - 1/2|` within one oscillation period around `t`.
fn envelope(f: impl Fn(f64) -> f64, t: f64, j: f64) -> f64 {
    let period = PI / j;
    (0..=400)
        .map(|k| f(t - period / 2.0 + period * k as f64 / 400.0))
        .map(|p| (p - 0.5).abs())
        .fold(0.0, f64::max)
}

#[test]
fn emission_amplitude_ordering() {
    let j = 0.3;
    let rates = [0.01, 0.0025, 0.01, 0.01, 0.01];
    for t in [10.0, 25.0, 50.0, 100.0] {
        let e: Vec<f64> = SPECTATORS
            .iter()
            .map(|&s| envelope(|x| closed_form_emission(s, x, j, rates).unwrap(), t, j))
            .collect();
        let (zero, one, plus) = (e[0], e[1], e[2]);
        assert!(zero >= plus && plus >= one, "t = {t}: {e:?}");
    }
}

#[test]
fn single_draw_matches_numerics() {
    let j = khz(48.0);
    let h = plus_frame(j);
    let times = linspace(20_000.0, 41);
    let g = [0.021, 0.013, 0.008, 0.017, 0.011, 0.006, 0.019, 0.009, 0.004, 0.015, 0.012, 0.007].map(per_us);

    let xn = LindbladSpec::paulis(&[("ZI", g[0]), ("IZ", g[1]), ("ZZ", g[2]), ("XI", g[3]), ("IX", g[4]), ("XX", g[5])]).unwrap();
    let yn = LindbladSpec::paulis(&[("ZI", g[0]), ("ZZ", g[2]), ("YI", g[6]), ("IY", g[7]), ("YY", g[8])]).unwrap();
    let es = [g[0], g[2], g[9], g[10], g[11]];
    let mut em = LindbladSpec::paulis(&[("ZI", es[0]), ("ZZ", es[1])]).unwrap();
    em.push(JumpOperator::Lower(0), es[2]).unwrap();
    em.push(JumpOperator::Lower(1), es[3]).unwrap();
    em.push(JumpOperator::LowerJoint(0, 1), es[4]).unwrap();

    for s in SPECTATORS {
        let num = main_plus_fidelities(&h, &xn, s, &times);
        for (t, v) in times.iter().zip(&num) {
            assert!((v - closed_form_x_noise(*t, j, [g[0], g[1], g[2], g[3], g[4], g[5]])).abs() < 1e-6);
        }
        let num = main_plus_fidelities(&h, &yn, s, &times);
        for (t, v) in times.iter().zip(&num) {
            assert!((v - closed_form_y_noise(*t, j, [g[0], g[2], g[6], g[7], g[8]])).abs() < 1e-6);
        }
        let num = main_plus_fidelities(&h, &em, s, &times);
        for (t, v) in times.iter().zip(&num) {
            assert!((v - closed_form_emission(s, *t, j, es).unwrap()).abs() < 1e-6);
        }
    }
}

fn arb_density(d: usize) -> impl Strategy<Value = Mat> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |v| {
        let a = Mat::from_vec(d, d, v.into_iter().map(|(x, y)| C64::new(x, y)).collect());
        let m = &a * a.adjoint();
        let tr = m.trace();
        m / tr
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generator_is_traceless_and_hermitian(rho in arb_density(4), rates in proptest::collection::vec(0.0f64..0.1, 5), c in -0.1f64..0.1) {
        let mut spec = LindbladSpec::paulis(&[("ZI", rates[0]), ("XY", rates[1]), ("IY", rates[2])]).unwrap();
        spec.push(JumpOperator::Lower(1), rates[3]).unwrap();
        spec.push(JumpOperator::LowerJoint(0, 1), rates[4]).unwrap();
        let diss = spec.compile(2).unwrap();
        let h = pauli_string("ZZ").unwrap() * C64::new(c, 0.0) + pauli_string("XI").unwrap() * C64::new(0.5 * c, 0.0);
        let d = lindblad_rhs(&rho, &h, &diss).unwrap();
        prop_assert!(d.trace().norm() < 1e-14);
        prop_assert!(is_hermitian(&d, 1e-14));
        let l = liouvillian(&h, &diss);
        let via_l = unvectorize(&(l * vectorize(&rho)), 4);
        prop_assert!((via_l - d).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn trajectories_stay_physical(rates in proptest::collection::vec(0.0f64..0.05, 4), j_khz in 10.0f64..100.0) {
        let h = plus_frame(khz(j_khz));
        let mut spec = LindbladSpec::paulis(&[("ZI", per_us(rates[0])), ("XX", per_us(rates[1])), ("IY", per_us(rates[2]))]).unwrap();
        spec.push(JumpOperator::Lower(0), per_us(rates[3])).unwrap();
        let rho0 = DensityMatrix::product(&[QubitState::Plus, QubitState::PlusI]).unwrap();
        let traj = evolve(&rho0, &h, &spec.compile(2).unwrap(), &linspace(20_000.0, 11)).unwrap();
        for r in &traj {
            prop_assert!((r.trace() - ONE).norm() < 1e-6);
            prop_assert!(r.min_eigenvalue() >= -1e-7);
        }
    }

    #[test]
    fn plus_frame_fidelity_ignores_the_spectator(t in 0.0f64..50_000.0, j in 0.0f64..0.001, gamma in 0.0f64..1e-4) {
        let p = closed_form_fidelity(TwoQubitFrame::Plus, QubitState::Plus, t, j, gamma);
        for s in [QubitState::Zero, QubitState::One] {
            prop_assert_eq!(closed_form_fidelity(TwoQubitFrame::Plus, s, t, j, gamma), p);
        }
    }
}
