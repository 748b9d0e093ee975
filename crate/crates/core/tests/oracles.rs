//! Independent reference computations for the basis, the Bessel solution and
//! the coherence.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

use wsdrive::basis::solve_ws_basis;
use wsdrive::bessel::bessel_j;
use wsdrive::drive::{DriveWaveform, Envelope};
use wsdrive::dynamics::{bessel_solution, coherence, CoefficientModel, CoefficientState};
use wsdrive::lattice::{Axis, GridSpec, LatticeParams};

/// Dense FD4 Hamiltonian on the interior samples, diagonalized in full.
/// Returns the lowest state concentrated in well 0 and its energy.
fn dense_reference_state(depth: f64, force: f64, grid: &GridSpec) -> (Vec<f64>, f64) {
    let n = grid.len() - 1;
    let h = grid.spacing();
    let kin = 1.0 / (PI * PI * h * h);
    let stencil = [5.0 / 2.0, -4.0 / 3.0, 1.0 / 12.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        let x = grid.x(r + 1);
        m[(r, r)] = kin * stencil[0] + depth * (2.0 * PI * x).cos() + force * x;
        for (d, c) in stencil.iter().enumerate().skip(1) {
            if r + d < n {
                m[(r, r + d)] = kin * c;
                m[(r + d, r)] = kin * c;
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    let ppp = grid.points_per_period;
    let well0 = grid.origin_well * ppp;
    let mut best: Option<(f64, usize)> = None;
    for k in 0..n {
        let v = eig.eigenvectors.column(k);
        let norm: f64 = v.iter().map(|a| a * a).sum();
        // sample i of the grid is row i - 1
        let inside: f64 = (well0..well0 + ppp).map(|i| v[i - 1].powi(2)).sum::<f64>() / norm;
        let e = eig.eigenvalues[k];
        if inside > 0.5 && best.is_none_or(|(b, _)| e < b) {
            best = Some((e, k));
        }
    }
    let (e, k) = best.expect("a state lives in well 0");
    let v = eig.eigenvectors.column(k);
    let norm = (v.iter().map(|a| a * a).sum::<f64>() * h).sqrt();
    let mut phi = vec![0.0; grid.len()];
    for r in 0..n {
        phi[r + 1] = v[r] / norm;
    }
    (phi, e)
}

fn moment(phi: &[f64], grid: &GridSpec, p: i64) -> f64 {
    let shift = p * grid.points_per_period as i64;
    (0..phi.len())
        .filter_map(|i| {
            let j = i as i64 - shift;
            (0..phi.len() as i64)
                .contains(&j)
                .then(|| phi[i] * phi[j as usize] * (2.0 * PI * grid.x(i)).cos())
        })
        .sum::<f64>()
        * grid.spacing()
}

#[test]
fn basis_matches_dense_diagonalization() {
    for force in [0.2, 0.25] {
        let grid = GridSpec::centered(33, 16).unwrap();
        let lattice = LatticeParams::isotropic(2.5, force).unwrap().axis(Axis::X);
        let basis = solve_ws_basis(lattice, grid).unwrap();
        let (phi, e) = dense_reference_state(2.5, force, &grid);
        assert!(
            (basis.energy0() - e).abs() < 1e-8,
            "E0 {} vs {e}",
            basis.energy0()
        );
        for p in 0..=3 {
            let m = moment(&phi, &grid, p);
            let got = basis.moments().get(p);
            assert!((got - m).abs() < 1e-8, "F = {force}, M_{p}: {got} vs {m}");
        }
    }
}

/// `J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt` by composite Simpson.
fn bessel_quadrature(n: i64, x: f64) -> f64 {
    let panels = 4000;
    let h = PI / panels as f64;
    let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for i in 1..panels {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0 / PI
}

#[test]
fn bessel_matches_integral_representation() {
    for x in [0.0, 0.1, 1.0, 2.404826, 7.5, 20.0, -3.3] {
        for n in -8..=8 {
            let a = bessel_j(n, x);
            let b = bessel_quadrature(n, x);
            assert!((a - b).abs() < 1e-11, "J_{n}({x}): {a} vs {b}");
        }
    }
}

#[test]
fn closed_form_dynamics_matches_a_direct_sum() {
    // c_n(t) = sum_p c_{n+p}(0) e^{i p beta} J_p(-M_1 int alpha), single site start
    let basis = solve_ws_basis(
        LatticeParams::isotropic(2.5, 0.2).unwrap().axis(Axis::X),
        GridSpec::centered(33, 16).unwrap(),
    )
    .unwrap();
    let model = CoefficientModel::from_basis(&basis);
    let omega = basis.bloch_frequency();
    let beta = 0.4;
    let drive = DriveWaveform::new(Axis::X, Envelope::Constant { level: 0.8 }, beta, omega);
    let t = 7.0 * basis.bloch_period();
    let state = bessel_solution(&CoefficientState::single_site(0), &model, &drive, t).unwrap();
    let z = -basis.m1() * 0.8 * t;
    for n in -6..=6 {
        let expected = Complex64::from_polar(bessel_quadrature(-n, z), -(n as f64) * beta);
        let got = state.get(n);
        assert!((got.norm() - expected.norm()).abs() < 1e-9, "|c_{n}|");
    }
}

fn brute_sigma(amps: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..amps.len() {
        for j in 0..amps.len() {
            if j == i + 1 {
                s += amps[i].conj() * amps[j];
            }
        }
    }
    s
}

proptest! {
    #[test]
    fn coherence_is_the_neighbor_overlap(
        width in 0.7f64..6.0,
        q in -PI..PI,
        n_min in -20i64..20,
    ) {
        let amps: Vec<Complex64> = (0..41)
            .map(|i| {
                let u = i as f64 - 20.0;
                Complex64::from_polar((-u * u / (4.0 * width * width)).exp(), q * i as f64)
            })
            .collect();
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = amps.iter().map(|c| c / norm).collect();
        let state = CoefficientState::new(n_min, amps.clone());
        let s = coherence(&state).value;
        let b = brute_sigma(&amps);
        prop_assert!((s - b).norm() < 1e-13);
        // a uniform phase gradient only rotates sigma
        prop_assert!((s.arg() - q).rem_euclid(2.0 * PI).min((q - s.arg()).rem_euclid(2.0 * PI)) < 1e-9);
    }
}
