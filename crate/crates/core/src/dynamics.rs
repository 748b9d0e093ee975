// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Coefficient dynamics in the lowest Wannier-Stark ladder.
//!
//! `psi = sum_n c_n exp(i phi_n) phi_n` with `phi_n = -(E_0 + n omega_B) t -
//! M_0 int A`. Three solvers share the same state: the full coupled system
//! with all moments up to `p_max`, the nearest-neighbor rotating-wave
//! system, and its closed Bessel-function solution.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::basis::{CouplingMoments, WannierStarkBasis};
use crate::bessel::bessel_j_truncated;
use crate::drive::{DriveWaveform, SpatialProfile};
use crate::error::{Error, Result};

/// Amplitude above which the outer sites trigger window growth.
pub const WINDOW_EDGE_TOLERANCE: f64 = 1e-8;
/// Sites added on each growth.
pub const WINDOW_GROWTH: usize = 8;
/// Largest allowed per-step norm change.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
/// Default step as a fraction of the Bloch period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 500;
/// Coarsest admissible step as a fraction of the Bloch period.
pub const MIN_STEPS_PER_PERIOD: usize = 200;
/// Bessel orders below this magnitude are dropped.
pub const BESSEL_CUTOFF: f64 = 1e-14;

const EDGE_SITES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coherence {
    pub value: Complex64,
}

impl Coherence {
    pub fn real(v: f64) -> Self {
        Coherence {
            value: Complex64::new(v, 0.0),
        }
    }

    pub fn norm(&self) -> f64 {
        self.value.norm()
    }
}

/// Amplitudes `c_n` on the window `[n_min, n_min + len)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientState {
    n_min: i64,
    amps: Vec<Complex64>,
    pub time: f64,
    /// `int_0^t A` of the uniform drive component.
    pub phase_accum: f64,
}

impl CoefficientState {
    pub fn new(n_min: i64, amps: Vec<Complex64>) -> Self {
        assert!(!amps.is_empty(), "empty coefficient window");
        CoefficientState {
            n_min,
            amps,
            time: 0.0,
            phase_accum: 0.0,
        }
    }

    pub fn single_site(n: i64) -> Self {
        let mut s = Self::new(
            n - WINDOW_GROWTH as i64,
            vec![Complex64::new(0.0, 0.0); 2 * WINDOW_GROWTH + 1],
        );
        s.amps[WINDOW_GROWTH] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.amps.len() as i64 - 1
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn get(&self, n: i64) -> Complex64 {
        let i = n - self.n_min;
        if i < 0 || i >= self.amps.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.amps[i as usize]
        }
    }

    /// `(n, c_n)` over the window.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.amps
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.n_min + i as i64, c))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        self.amps.iter_mut().for_each(|c| *c /= n);
    }

    /// Grows the window by [`WINDOW_GROWTH`] on any side whose outer sites
    /// carry more than [`WINDOW_EDGE_TOLERANCE`].
    pub fn ensure_margin(&mut self) {
        loop {
            let len = self.amps.len();
            let k = EDGE_SITES.min(len);
            let low = self.amps[..k]
                .iter()
                .any(|c| c.norm() > WINDOW_EDGE_TOLERANCE);
            let high = self.amps[len - k..]
                .iter()
                .any(|c| c.norm() > WINDOW_EDGE_TOLERANCE);
            if !low && !high {
                return;
            }
            let zero = Complex64::new(0.0, 0.0);
            if low {
                let mut grown = vec![zero; WINDOW_GROWTH];
                grown.extend_from_slice(&self.amps);
                self.amps = grown;
                self.n_min -= WINDOW_GROWTH as i64;
            }
            if high {
                self.amps.extend(std::iter::repeat_n(zero, WINDOW_GROWTH));
            }
        }
    }

    /// Same amplitudes on a window covering at least `[lo, hi]`.
    pub fn widened(&self, lo: i64, hi: i64) -> Self {
        let lo = lo.min(self.n_min);
        let hi = hi.max(self.n_max());
        let amps = (lo..=hi).map(|n| self.get(n)).collect();
        CoefficientState {
            n_min: lo,
            amps,
            time: self.time,
            phase_accum: self.phase_accum,
        }
    }
}

/// `c_n ∝ exp(-(n - center)^2 / width^2)`; `width = 3` gives `exp(-n^2/9)`.
pub fn init_gaussian(width: f64, center: f64) -> Result<CoefficientState> {
    if !(width > 0.0) || !width.is_finite() || !center.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gaussian width must be positive and finite (got {width}, center {center})"
        )));
    }
    // exp(-d^2/w^2) < 1e-17 beyond 6.3 w
    let reach = (6.3 * width).ceil() as i64 + WINDOW_GROWTH as i64;
    let c = center.round() as i64;
    let n_min = c - reach;
    let amps = (n_min..=c + reach)
        .map(|n| {
            let d = n as f64 - center;
            Complex64::new((-d * d / (width * width)).exp(), 0.0)
        })
        .collect();
    let mut s = CoefficientState::new(n_min, amps);
    s.normalize();
    Ok(s)
}

/// `sigma = sum_p c_p^* c_{p+1}`.
pub fn coherence(state: &CoefficientState) -> Coherence {
    let value = state.amps.windows(2).map(|w| w[0].conj() * w[1]).sum();
    Coherence { value }
}

/// `sum_n n |c_n|^2`, normalized by the total weight.
pub fn mean_position_coeffs(state: &CoefficientState) -> f64 {
    let w = state.norm_sqr();
    state
        .iter()
        .map(|(n, c)| n as f64 * c.norm_sqr())
        .sum::<f64>()
        / w
}

/// Variance of `|c_n|^2` over `n`.
pub fn variance_coeffs(state: &CoefficientState) -> f64 {
    let m = mean_position_coeffs(state);
    let w = state.norm_sqr();
    state
        .iter()
        .map(|(n, c)| (n as f64 - m).powi(2) * c.norm_sqr())
        .sum::<f64>()
        / w
}

/// `v = M_1 alpha Re(sigma e^{i beta})` in wells per unit time.
pub fn drift_velocity(m1: f64, alpha: f64, beta: f64, sigma: Coherence) -> f64 {
    m1 * alpha * (sigma.value * Complex64::from_polar(1.0, beta)).re
}

/// `M_1 alpha Im(sigma e^{i beta})`: proportional to the instantaneous
/// diffusion coefficient (relative metric, no absolute scale).
pub fn diffusion_metric(m1: f64, alpha: f64, beta: f64, sigma: Coherence) -> f64 {
    m1 * alpha * (sigma.value * Complex64::from_polar(1.0, beta)).im
}

/// Which coherence the drift law uses along a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SigmaMode {
    #[default]
    Current,
    Initial,
}

/// Coupling moments and Bloch frequency of one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientModel {
    moments: CouplingMoments,
    pub omega_b: f64,
}

impl CoefficientModel {
    pub fn new(moments: CouplingMoments, omega_b: f64) -> Self {
        CoefficientModel { moments, omega_b }
    }

    pub fn from_basis(basis: &WannierStarkBasis) -> Self {
        Self::new(basis.moments().clone(), basis.bloch_frequency())
    }

    pub fn moments(&self) -> &CouplingMoments {
        &self.moments
    }

    pub fn m1(&self) -> f64 {
        self.moments.get(1)
    }

    pub fn bloch_period(&self) -> f64 {
        2.0 * PI / self.omega_b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientEngine {
    /// All moments up to `p_max`, no rotating-wave approximation.
    Full,
    /// Nearest-neighbor rotating-wave system.
    Rwa,
}

fn profile_1d(drive: &DriveWaveform) -> Result<Option<f64>> {
    match drive.profile {
        SpatialProfile::None => Ok(None),
        SpatialProfile::Beat { k } => Ok(Some(k)),
        SpatialProfile::Crossed { .. } => Err(Error::NonSeparableDrive),
    }
}

fn rhs_rwa(
    state: &CoefficientState,
    amps: &[Complex64],
    m1: f64,
    drive: &DriveWaveform,
    beat: Option<f64>,
    t: f64,
    out: &mut [Complex64],
) {
    let half = 0.5 * m1 * drive.alpha(t);
    let beta = drive.rwa_phase();
    let down = Complex64::from_polar(half, -beta);
    let up = Complex64::from_polar(half, beta);
    let bond = |i: usize| -> f64 {
        // bond between sites i and i + 1, centered at u = n + 1/2
        match beat {
            None => 1.0,
            Some(k) => (k * ((state.n_min + i as i64) as f64 + 0.5)).sin(),
        }
    };
    let len = amps.len();
    for i in 0..len {
        let mut d = Complex64::new(0.0, 0.0);
        if i > 0 {
            d += down * bond(i - 1) * amps[i - 1];
        }
        if i + 1 < len {
            d -= up * bond(i) * amps[i + 1];
        }
        out[i] = d;
    }
}

#[allow(clippy::too_many_arguments)]
fn rhs_full(
    state: &CoefficientState,
    amps: &[Complex64],
    model: &CoefficientModel,
    drive: &DriveWaveform,
    beat: Option<f64>,
    t: f64,
    out: &mut [Complex64],
) {
    let a = drive.amplitude(t);
    let p_max = model.moments.p_max() as i64;
    let len = amps.len() as i64;
    let s_ref = drive.uniform_reference();
    let s = |u: f64| match beat {
        None => 1.0,
        Some(k) => (k * u).sin(),
    };
    let rot: Vec<Complex64> = (-p_max..=p_max)
        .map(|p| Complex64::from_polar(1.0, -(p as f64) * model.omega_b * t))
        .collect();
    for i in 0..len {
        let n = (state.n_min + i) as f64;
        let mut d = Complex64::new(0.0, 0.0);
        for p in -p_max..=p_max {
            let j = i + p;
            if j < 0 || j >= len {
                continue;
            }
            let weight = if p == 0 {
                model.moments.get(0) * (s(n) - s_ref)
            } else {
                model.moments.get(p) * s(n + 0.5 * p as f64)
            };
            if weight != 0.0 {
                d += rot[(p + p_max) as usize] * weight * amps[j as usize];
            }
        }
        out[i as usize] = Complex64::new(0.0, -a) * d;
    }
}

/// One classical RK4 step of the chosen coefficient system.
pub fn step(
    state: &mut CoefficientState,
    model: &CoefficientModel,
    drive: &DriveWaveform,
    engine: CoefficientEngine,
    dt: f64,
) -> Result<()> {
    let limit = model.bloch_period() / MIN_STEPS_PER_PERIOD as f64;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} outside (0, T_B/{MIN_STEPS_PER_PERIOD}] = (0, {limit}]"
        )));
    }
    let beat = profile_1d(drive)?;
    state.ensure_margin();
    let t = state.time;
    let norm0 = state.norm_sqr();
    let len = state.amps.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut k = [
        vec![zero; len],
        vec![zero; len],
        vec![zero; len],
        vec![zero; len],
    ];
    let mut tmp = vec![zero; len];
    let eval = |amps: &[Complex64], t: f64, out: &mut [Complex64]| match engine {
        CoefficientEngine::Rwa => rhs_rwa(state, amps, model.m1(), drive, beat, t, out),
        CoefficientEngine::Full => rhs_full(state, amps, model, drive, beat, t, out),
    };
    eval(&state.amps, t, &mut k[0]);
    for (stage, (frac, prev)) in [(0.5, 0usize), (0.5, 1), (1.0, 2)].into_iter().enumerate() {
        for i in 0..len {
            tmp[i] = state.amps[i] + k[prev][i] * (frac * dt);
        }
        eval(&tmp, t + frac * dt, &mut k[stage + 1]);
    }
    for i in 0..len {
        state.amps[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (dt / 6.0);
    }
    let s_ref = drive.uniform_reference();
    if s_ref != 0.0 {
        let a0 = drive.amplitude(t);
        let am = drive.amplitude(t + 0.5 * dt);
        let a1 = drive.amplitude(t + dt);
        state.phase_accum += s_ref * dt / 6.0 * (a0 + 4.0 * am + a1);
    }
    state.time = t + dt;
    let drift = (state.norm_sqr() - norm0).abs();
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::StepSize {
            drift,
            limit: NORM_DRIFT_LIMIT,
        });
    }
    Ok(())
}

/// One step of the full coupled system.
pub fn evolve_full(
    state: &mut CoefficientState,
    model: &CoefficientModel,
    drive: &DriveWaveform,
    dt: f64,
) -> Result<()> {
    step(state, model, drive, CoefficientEngine::Full, dt)
}

/// One step of the nearest-neighbor rotating-wave system.
pub fn evolve_rwa(
    state: &mut CoefficientState,
    model: &CoefficientModel,
    drive: &DriveWaveform,
    dt: f64,
) -> Result<()> {
    step(state, model, drive, CoefficientEngine::Rwa, dt)
}

/// Advances to `t_end` with steps no longer than `max_dt` (the last step
/// lands exactly on `t_end`), calling `observe` after every `stride` steps.
pub fn advance(
    state: &mut CoefficientState,
    model: &CoefficientModel,
    drive: &DriveWaveform,
    engine: CoefficientEngine,
    t_end: f64,
    max_dt: f64,
    stride: usize,
    mut observe: impl FnMut(&CoefficientState),
) -> Result<()> {
    let span = t_end - state.time;
    if span <= 0.0 {
        return Ok(());
    }
    let steps = (span / max_dt - 1e-9).ceil().max(1.0) as usize;
    let t0 = state.time;
    for i in 1..=steps {
        let target = t0 + span * i as f64 / steps as f64;
        step(state, model, drive, engine, target - state.time)?;
        state.time = target;
        if stride > 0 && i % stride == 0 {
            observe(state);
        }
    }
    Ok(())
}

/// `int_{t0}^{t1} A(t) dt` of the uniform component, composite Simpson with
/// 200 panels per Bloch period.
pub fn carrier_integral(drive: &DriveWaveform, t0: f64, t1: f64) -> f64 {
    let s_ref = drive.uniform_reference();
    if s_ref == 0.0 || t1 <= t0 {
        return 0.0;
    }
    let period = 2.0 * PI / drive.carrier;
    let n = ((t1 - t0) / period * 200.0).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let a = t0 + i as f64 * h;
        acc += drive.amplitude(a) + 4.0 * drive.amplitude(a + 0.5 * h) + drive.amplitude(a + h);
    }
    s_ref * acc * h / 6.0
}

/// Closed-form rotating-wave solution for uniform drives:
/// `c_n(t) = sum_p c_{n+p}(0) e^{i p beta} J_p(-M_1 int_0^t alpha)`.
pub fn bessel_solution(
    state0: &CoefficientState,
    model: &CoefficientModel,
    drive: &DriveWaveform,
    t: f64,
) -> Result<CoefficientState> {
    if drive.profile != SpatialProfile::None {
        return Err(Error::InvalidParameter(
            "the Bessel solution requires a spatially uniform drive".into(),
        ));
    }
    let x = -model.m1() * (drive.alpha_integral(t) - drive.alpha_integral(state0.time));
    let j = bessel_j_truncated(x.abs(), BESSEL_CUTOFF);
    let reach = j.len() as i64 - 1;
    // J_p(x) for p in -reach..=reach
    let sign_x = if x < 0.0 { -1.0 } else { 1.0 };
    let jp = |p: i64| -> f64 {
        let m = p.unsigned_abs() as usize;
        let v = j[m];
        let parity = if m % 2 == 1 { -1.0 } else { 1.0 };
        let mut out = v;
        if p < 0 {
            out *= parity;
        }
        if sign_x < 0.0 {
            out *= parity;
        }
        out
    };
    let beta = drive.rwa_phase();
    let weights: Vec<Complex64> = (-reach..=reach)
        .map(|p| Complex64::from_polar(jp(p), p as f64 * beta))
        .collect();
    let n_min = state0.n_min - reach;
    let n_max = state0.n_max() + reach;
    let amps = (n_min..=n_max)
        .map(|n| {
            (-reach..=reach)
                .map(|p| weights[(p + reach) as usize] * state0.get(n + p))
                .sum()
        })
        .collect();
    let mut out = CoefficientState::new(n_min, amps);
    out.time = t;
    out.phase_accum = state0.phase_accum + carrier_integral(drive, state0.time, t);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::Envelope;
    use crate::lattice::Axis;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const OMEGA: f64 = 0.2;

    fn model() -> CoefficientModel {
        let moments =
            CouplingMoments::from_values(vec![5e-4, -4e-3, 0.0342, -0.545, 0.0342, -4e-3, 5e-4]);
        CoefficientModel::new(moments, OMEGA)
    }

    fn constant(alpha: f64, beta: f64) -> DriveWaveform {
        DriveWaveform::new(Axis::X, Envelope::Constant { level: alpha }, beta, OMEGA)
    }

    fn dt() -> f64 {
        2.0 * PI / OMEGA / 500.0
    }

    fn max_dev(a: &CoefficientState, b: &CoefficientState) -> f64 {
        let lo = a.n_min().min(b.n_min());
        let hi = a.n_max().max(b.n_max());
        (lo..=hi)
            .map(|n| (a.get(n) - b.get(n)).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gaussian_default_is_real_positive_coherence() {
        let s = init_gaussian(3.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-14);
        let sigma = coherence(&s);
        assert!(sigma.value.re > 0.9 && sigma.value.im == 0.0);
        assert_abs_diff_eq!(mean_position_coeffs(&s), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(
            coherence(&CoefficientState::single_site(0)).value,
            Complex64::new(0.0, 0.0)
        );
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let two = CoefficientState::new(0, vec![Complex64::new(h, 0.0), Complex64::new(h, 0.0)]);
        assert_abs_diff_eq!(coherence(&two).value.re, 0.5, epsilon = 1e-15);
        assert_eq!(mean_position_coeffs(&CoefficientState::single_site(5)), 5.0);
        assert!(init_gaussian(0.0, 0.0).is_err());
    }

    #[test]
    fn velocity_and_diffusion_examples() {
        let s = Coherence::real(0.9);
        assert_eq!(drift_velocity(0.03, 1.0, 0.3, Coherence::real(0.0)), 0.0);
        assert_abs_diff_eq!(drift_velocity(0.03, 1.0, PI / 2.0, s), 0.0, epsilon = 1e-17);
        assert_eq!(diffusion_metric(0.03, 1.0, 0.0, s), 0.0);
        assert_abs_diff_eq!(
            diffusion_metric(0.03, 1.0, PI / 2.0, s),
            0.03 * 0.9,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            diffusion_metric(0.03, 1.0, -0.7, s),
            -diffusion_metric(0.03, 1.0, 0.7, s),
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_drive_is_identity() {
        let s0 = init_gaussian(3.0, 0.0).unwrap();
        for engine in [CoefficientEngine::Rwa, CoefficientEngine::Full] {
            let mut s = s0.clone();
            advance(
                &mut s,
                &model(),
                &constant(0.0, 0.0),
                engine,
                20.0 * dt(),
                dt(),
                0,
                |_| {},
            )
            .unwrap();
            assert_eq!(max_dev(&s, &s0), 0.0);
        }
    }

    #[test]
    fn rwa_matches_bessel() {
        let s0 = init_gaussian(3.0, 0.0).unwrap();
        for &(alpha, beta) in &[(1.0, 0.0), (0.5, 0.8), (-0.7, PI / 2.0)] {
            let d = constant(alpha, beta);
            let mut s = s0.clone();
            let t = 3.0 * 2.0 * PI / OMEGA;
            advance(
                &mut s,
                &model(),
                &d,
                CoefficientEngine::Rwa,
                t,
                dt(),
                0,
                |_| {},
            )
            .unwrap();
            let b = bessel_solution(&s0, &model(), &d, t).unwrap();
            assert!(
                max_dev(&s, &b) < 1e-10,
                "{alpha} {beta}: {}",
                max_dev(&s, &b)
            );
            assert_abs_diff_eq!(s.phase_accum, b.phase_accum, epsilon = 1e-10);
        }
    }

    #[test]
    fn real_coefficients_stay_real_at_zero_phase() {
        let mut s = init_gaussian(2.0, 1.0).unwrap();
        advance(
            &mut s,
            &model(),
            &constant(0.8, 0.0),
            CoefficientEngine::Rwa,
            200.0 * dt(),
            dt(),
            0,
            |_| {},
        )
        .unwrap();
        assert!(s.amps().iter().all(|c| c.im == 0.0));
    }

    #[test]
    fn bessel_zero_empties_the_site() {
        let m = model();
        let alpha = 1.0;
        let t = 2.404_825_557_695_773 / (m.m1() * alpha);
        let s = bessel_solution(
            &CoefficientState::single_site(0),
            &m,
            &constant(alpha, 0.0),
            t,
        )
        .unwrap();
        assert!(s.get(0).norm() < 1e-12);
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn window_grows_under_transport() {
        let mut s = CoefficientState::single_site(0);
        let (lo, hi) = (s.n_min(), s.n_max());
        advance(
            &mut s,
            &model(),
            &constant(1.0, 0.0),
            CoefficientEngine::Rwa,
            5.0 * 2.0 * PI / OMEGA,
            dt(),
            0,
            |_| {},
        )
        .unwrap();
        assert!(s.n_min() < lo && s.n_max() > hi);
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn coarse_step_is_rejected() {
        let mut s = CoefficientState::single_site(0);
        let r = evolve_rwa(
            &mut s,
            &model(),
            &constant(1.0, 0.0),
            2.0 * PI / OMEGA / 100.0,
        );
        assert!(r.is_err());
        let crossed = constant(1.0, 0.0).with_profile(SpatialProfile::Crossed { k: 0.02 });
        assert!(matches!(
            evolve_rwa(&mut s, &model(), &crossed, dt()),
            Err(Error::NonSeparableDrive)
        ));
    }

    #[test]
    fn rwa_drift_matches_velocity_law() {
        let s0 = init_gaussian(3.0, 0.0).unwrap();
        let sigma = coherence(&s0);
        let d = constant(1.0, 0.0);
        let t = 10.0 * 2.0 * PI / OMEGA;
        let b = bessel_solution(&s0, &model(), &d, t).unwrap();
        let v = drift_velocity(model().m1(), 1.0, 0.0, sigma);
        assert_abs_diff_eq!(mean_position_coeffs(&b) / t, v, epsilon = 1e-12);
        assert_abs_diff_eq!(coherence(&b).value.re, sigma.value.re, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn reversal_restores_state(alpha in 0.1f64..1.0, beta in -3.0f64..3.0, periods in 1usize..6) {
            let s0 = init_gaussian(3.0, 0.0).unwrap();
            let t = periods as f64 * 2.0 * PI / OMEGA;
            let env = Envelope::Pieces { pieces: vec![
                crate::drive::Piece::Level { duration: t, level: alpha, ramp: 0.0 },
                crate::drive::Piece::Level { duration: t, level: -alpha, ramp: 0.0 },
            ] };
            let d = DriveWaveform::new(Axis::X, env, beta, OMEGA);
            let b = bessel_solution(&s0, &model(), &d, 2.0 * t).unwrap();
            prop_assert!(max_dev(&b, &s0) < 1e-12);
        }

        #[test]
        fn bessel_preserves_norm(alpha in -1.0f64..1.0, beta in -3.0f64..3.0, t in 0.0f64..3000.0) {
            let s0 = init_gaussian(2.5, 0.3).unwrap();
            let b = bessel_solution(&s0, &model(), &constant(alpha, beta), t).unwrap();
            prop_assert!((b.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}
