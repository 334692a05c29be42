use std::f64::consts::PI;

use nopa_core::closed_form::{closed_form, determinant_path, optimal_thetas, ThetaClass};
use nopa_core::dynamics::{build_a1, build_closed_loop, StateSpace};
use nopa_core::entanglement::{
    squeezing, squeezing_spectrum, vanishing_search, wrap_angle, DEFAULT_SEARCH_GRID,
};
use nopa_core::network::{NopaParams, PassiveNetwork, REFERENCE_RATE_HZ};
use nopa_core::numerics::{inverse, kron, ComplexMatrix, RealMatrix};
use nopa_core::static_limit::{extract_uv, static_transfer, StaticCoefficients};
use nopa_core::Error;
use num_complex::Complex64;

/// The lossless `(N, x, y)` grid, restricted to stable instances.
fn stable_grid(max_n: usize) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for n in 2..=max_n {
        let scaled = 0.078 * (10.0 / n as f64).sqrt();
        for &x in &[0.02, 0.05, scaled, 0.1] {
            for &y in &[0.5, 1.0] {
                if stable(n, x, y) {
                    out.push((n, x, y));
                }
            }
        }
    }
    out
}

fn chain(n: usize, x: f64, y: f64) -> StateSpace {
    let p = NopaParams::lossless(x, y).unwrap();
    build_closed_loop(&p, &PassiveNetwork::cfb(n).unwrap()).unwrap()
}

fn stable(n: usize, x: f64, y: f64) -> bool {
    chain(n, x, y).stability().unwrap().stable
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn grid_has_stable_instances_for_every_size() {
    let grid = stable_grid(10);
    for n in 2..=10 {
        assert!(
            grid.iter().any(|g| g.0 == n),
            "no stable instance for N = {n}"
        );
    }
}

#[test]
fn zero_frequency_matches_static_transfer() {
    for (n, x, y) in stable_grid(6) {
        let ss = chain(n, x, y);
        let coeffs = StaticCoefficients::from_params(&ss.params).unwrap();
        let st = static_transfer(&coeffs, &PassiveNetwork::cfb(n).unwrap()).unwrap();
        let gap = ss.transfer(0.0).unwrap().max_abs_diff(&st.h_n.to_complex());
        assert!(gap < 1e-9, "N = {n}, x = {x}, y = {y}: {gap:e}");
    }
}

#[test]
fn zero_frequency_matches_static_transfer_with_loss() {
    let net = PassiveNetwork::cfb(3).unwrap();
    let k = nopa_core::network::default_loss_proportionality(REFERENCE_RATE_HZ);
    let p = NopaParams::normalized(0.1, 1.0, k, REFERENCE_RATE_HZ).unwrap();
    let ss = build_closed_loop(&p, &net).unwrap();
    assert!(ss.stability().unwrap().stable);
    let st = static_transfer(&StaticCoefficients::from_params(&p).unwrap(), &net).unwrap();
    assert!(st.h_n.block(0, 4, 4, 12).max_abs() > 1e-3);
    assert!(ss.transfer(0.0).unwrap().max_abs_diff(&st.h_n.to_complex()) < 1e-9);
}

#[test]
fn unpumped_lossless_chain_is_unitary_at_every_frequency() {
    for n in 1..=4 {
        let ss = chain(n, 0.0, 1.0);
        for &w in &[0.0, 1e5, 3e7, 7.2e7, 1e9] {
            let h = ss.transfer(w).unwrap().block(0, 0, 4, 4);
            let hh = &h * &h.adjoint();
            assert!(hh.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        }
    }
}

#[test]
fn lossless_transfer_is_flat_near_zero() {
    for (n, x, y) in stable_grid(6) {
        let ss = chain(n, x, y);
        let omega = 1e-6 * ss.params.gamma;
        let h0 = ss.transfer(0.0).unwrap();
        let h1 = ss.transfer(omega).unwrap();
        // H(i w) = H(0) - i w C A^-2 B + O(w^2).
        let a_inv = inverse(&ss.a).unwrap();
        let slope = &(&ss.c * &a_inv) * &(&a_inv * &ss.b);
        let linear = &h0 - &slope.to_complex().scale(Complex64::new(0.0, omega));
        // Residual is rounding in the resolvent solve, worst near the stability edge.
        assert!(h1.max_abs_diff(&linear) < 1e-8 * h0.max_abs().max(1.0));
        // The variances only move at second order.
        let v0 = squeezing(&h0, 0.0, 0.0).unwrap().v_total;
        let v1 = squeezing(&h1, 0.0, 0.0).unwrap().v_total;
        assert!((v1 - v0).abs() < 1e-8 * v0);
    }
}

#[test]
fn elimination_reproduces_literal_state_matrix() {
    for (n, x, y) in stable_grid(5) {
        let ss = chain(n, x, y);
        let net = PassiveNetwork::cfb(n).unwrap();
        let s22 = &net.blocks().s22;
        let inv = inverse(&(&RealMatrix::identity(4 * n) - s22)).unwrap();
        let literal = &kron(&RealMatrix::identity(n), &build_a1(&ss.params))
            - &(&inv * s22).scale(ss.params.gamma);
        assert!(ss.a.max_abs_diff(&literal) < 1e-12 * literal.max_abs());
    }
}

#[test]
fn loop_inverse_has_unit_corner_entries() {
    for (n, x, y) in stable_grid(10) {
        let coeffs = StaticCoefficients::new(x, y, 0.0).unwrap();
        let st = static_transfer(&coeffs, &PassiveNetwork::cfb(n).unwrap()).unwrap();
        let uv = extract_uv(&st).unwrap();
        assert!((uv.p_11 - 1.0).abs() < 1e-12);
        assert!(uv.p_4n_minus_1_1.abs() < 1e-12);
        let q = nopa_core::static_limit::loop_matrix(&coeffs, &PassiveNetwork::cfb(n).unwrap());
        assert!((&st.p_n * &q).max_abs_diff(&RealMatrix::identity(4 * n)) < 1e-10);
    }
}

#[test]
fn static_transfer_has_cfb_zero_pattern() {
    for (n, x, y) in stable_grid(10) {
        let coeffs = StaticCoefficients::new(x, y, 0.0).unwrap();
        let st = static_transfer(&coeffs, &PassiveNetwork::cfb(n).unwrap()).unwrap();
        let h = &st.h_n;
        for (i, j) in [
            (0, 1),
            (0, 3),
            (1, 0),
            (1, 2),
            (2, 1),
            (2, 3),
            (3, 0),
            (3, 2),
        ] {
            assert!(h[(i, j)].abs() < 1e-10);
        }
        assert!(h.block(0, 4, 4, 4 * n).max_abs() < 1e-10);
    }
}

#[test]
fn three_paths_agree() {
    for (n, x, y) in stable_grid(10) {
        let coeffs = StaticCoefficients::new(x, y, 0.0).unwrap();
        let closed = closed_form(&coeffs, n).unwrap();
        let (du, dv) = determinant_path(&coeffs, n).unwrap().uv();
        let st = static_transfer(&coeffs, &PassiveNetwork::cfb(n).unwrap()).unwrap();
        let m = extract_uv(&st).unwrap();
        for (a, b) in [(closed.u, m.u), (closed.v, m.v), (du, m.u), (dv, m.v)] {
            assert!(rel(a, b) < 1e-9, "N = {n}, x = {x}, y = {y}: {a} vs {b}");
        }
        assert_eq!(closed.product_sign, 1.0);
        assert_eq!(closed.theorem_upsilon.signum(), closed.upsilon.signum());
    }
}

#[test]
fn grid_search_certifies_the_optimum() {
    for (n, x, y) in stable_grid(10) {
        let coeffs = StaticCoefficients::new(x, y, 0.0).unwrap();
        let closed = closed_form(&coeffs, n).unwrap();
        let st = static_transfer(&coeffs, &PassiveNetwork::cfb(n).unwrap()).unwrap();
        let best = vanishing_search(&st.h_n, DEFAULT_SEARCH_GRID).unwrap();
        // Both variances equal v_opt at the optimum.
        assert!((best.v_total - 2.0 * closed.v_opt).abs() < 1e-8);
        let sum = wrap_angle(best.psi_1 + best.psi_2).abs();
        match closed.theta_class {
            ThetaClass::SumIsPi => assert!((sum - PI).abs() < 1e-4),
            ThetaClass::SumIsZeroOrBothPi => assert!(sum < 1e-4),
            ThetaClass::Indifferent => {}
        }
    }
}

#[test]
fn phase_sum_law() {
    for (n, x, y) in stable_grid(6) {
        let coeffs = StaticCoefficients::new(x, y, 0.0).unwrap();
        let st = static_transfer(&coeffs, &PassiveNetwork::cfb(n).unwrap()).unwrap();
        let uv = extract_uv(&st).unwrap();
        for k in 0..24 {
            let a = -PI + 0.29 * k as f64;
            let b = 2.0 - 0.41 * k as f64;
            let s = squeezing(&st.h_n, a, b).unwrap();
            let law = 2.0 * (uv.u * uv.u + uv.v * uv.v + 2.0 * uv.u * uv.v * (a + b).cos());
            assert!((s.v_plus - law).abs() < 1e-10);
            assert!((s.v_plus - s.v_minus).abs() < 1e-12);
        }
    }
}

#[test]
fn representative_phases_attain_the_optimum() {
    for (n, x, y) in stable_grid(10) {
        let coeffs = StaticCoefficients::new(x, y, 0.0).unwrap();
        let closed = closed_form(&coeffs, n).unwrap();
        let st = static_transfer(&coeffs, &PassiveNetwork::cfb(n).unwrap()).unwrap();
        for (a, b) in optimal_thetas(&closed) {
            let s = squeezing(&st.h_n, a, b).unwrap();
            assert!((s.v_plus - closed.v_opt).abs() < 1e-9);
        }
        assert!(closed.v_opt < 2.0, "pumped chain must beat shot noise");
    }
}

#[test]
fn unpumped_chain_is_phase_indifferent() {
    for n in 2..=10 {
        let coeffs = StaticCoefficients::new(0.0, 1.0, 0.0).unwrap();
        let closed = closed_form(&coeffs, n).unwrap();
        assert_eq!(closed.theta_class, ThetaClass::Indifferent);
        assert_eq!(closed.v_opt, 2.0);
        let st = static_transfer(&coeffs, &PassiveNetwork::cfb(n).unwrap()).unwrap();
        let values: Vec<f64> = (0..100)
            .map(|k| {
                let t = -PI + 2.0 * PI * k as f64 / 100.0;
                squeezing(&st.h_n, t, 0.37 * t).unwrap().v_plus
            })
            .collect();
        let spread = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-10);
    }
}

#[test]
fn more_amplifiers_squeeze_better_at_equal_power() {
    let db: Vec<f64> = (2..=10)
        .map(|n| {
            let x = (10.0 / n as f64).sqrt() * 0.078;
            assert!(stable(n, x, 1.0));
            closed_form(&StaticCoefficients::new(x, 1.0, 0.0).unwrap(), n)
                .unwrap()
                .v_opt_db()
        })
        .collect();
    assert!(db.windows(2).all(|w| w[1] < w[0]), "{db:?}");
}

#[test]
fn exact_rational_anchor() {
    let closed = closed_form(&StaticCoefficients::new(0.1, 1.0, 0.0).unwrap(), 2).unwrap();
    let exact = 2.0 * (6241.0f64 / 9401.0).powi(2);
    let abs_form = 2.0 * (closed.u.abs() - closed.v.abs()).powi(2);
    assert!((abs_form - exact).abs() < 1e-14);
}

#[test]
fn single_static_amplifier() {
    let coeffs = StaticCoefficients::new(0.5, 1.0, 0.0).unwrap();
    let st = static_transfer(&coeffs, &PassiveNetwork::cfb(1).unwrap()).unwrap();
    let s = squeezing(&st.h_n, 0.0, 0.0).unwrap();
    assert!((s.v_plus - 18.0).abs() < 1e-12 && (s.v_minus - 18.0).abs() < 1e-12);
    let s = squeezing(&st.h_n, PI, 0.0).unwrap();
    assert!((s.v_plus - 2.0 / 9.0).abs() < 1e-12 && (s.v_minus - 2.0 / 9.0).abs() < 1e-12);
    assert!(s.entangled);
}

#[test]
fn vacuum_spectrum_sits_at_shot_noise() {
    let omegas: Vec<f64> = (0..20).map(|k| k as f64 * 1e7).collect();
    for n in 1..=5 {
        let ss = chain(n, 0.0, 1.0);
        for &(a, b) in &[(0.0, 0.0), (0.4, -1.3), (PI, PI / 3.0)] {
            for s in squeezing_spectrum(&ss, &omegas, a, b).unwrap() {
                assert!((s.v_plus - 2.0).abs() < 1e-12);
                assert!((s.v_minus - 2.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn spectrum_at_zero_matches_theorem() {
    let ss = chain(2, 0.1, 1.0);
    let s = squeezing_spectrum(&ss, &[0.0], 0.0, 0.0).unwrap()[0];
    let exact = 2.0 * (6241.0f64 / 9401.0).powi(2);
    assert!((s.v_plus - exact).abs() < 1e-9);
    assert!((s.v_minus - exact).abs() < 1e-9);
}

#[test]
fn unstable_spectrum_is_refused() {
    let ss = chain(10, 1.0, 1.0);
    assert!(matches!(
        squeezing_spectrum(&ss, &[0.0], 0.0, 0.0),
        Err(Error::Unstable { .. })
    ));
}

#[test]
fn high_frequency_rows_approach_shot_noise() {
    let ss = chain(2, 0.1, 1.0);
    let g = ss.params.gamma;
    let rows = squeezing_spectrum(&ss, &[0.0, 10.0 * g, 1000.0 * g], 0.0, 0.0).unwrap();
    assert!((rows[2].v_total - 4.0).abs() < (rows[1].v_total - 4.0).abs());
    assert!((rows[1].v_total - 4.0).abs() < (rows[0].v_total - 4.0).abs());
}

/// Exploratory, not an invariant: inside the entangled band the optimum
/// degrades monotonically; past the shot-noise crossing V peaks and falls
/// back toward 4, so the check stops at the first point with V >= 4.
#[test]
fn entangled_band_degradation_is_monotone_at_tested_params() {
    for (n, x, y) in [
        (2, 0.1, 1.0),
        (3, 0.1, 1.0),
        (4, 0.05, 1.0),
        (6, 0.078 * (10.0f64 / 6.0).sqrt(), 1.0),
    ] {
        let ss = chain(n, x, y);
        let closed = closed_form(&StaticCoefficients::new(x, y, 0.0).unwrap(), n).unwrap();
        let (a, b) = optimal_thetas(&closed)[0];
        let omegas: Vec<f64> = (0..200)
            .map(|k| k as f64 * 0.005 * ss.params.gamma)
            .collect();
        let spec = squeezing_spectrum(&ss, &omegas, a, b).unwrap();
        let band = spec.iter().take_while(|s| s.entangled).count();
        assert!(band > 10, "N = {n}: entangled band too narrow to test");
        for w in spec[..band].windows(2) {
            assert!(
                w[0].v_total <= w[1].v_total + 1e-12,
                "N = {n}: V({}) = {} > V({}) = {}",
                w[0].omega.unwrap(),
                w[0].v_total,
                w[1].omega.unwrap(),
                w[1].v_total
            );
        }
    }
}
