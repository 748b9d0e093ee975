// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Split-operator propagation of the driven washboard Hamiltonian on a
//! uniform grid, in one dimension and on a full two-dimensional grid.
//!
//! Kinetic half-steps are diagonal in the discrete Fourier basis; adjacent
//! half-steps are merged between observations. The default kinetic symbol
//! is the one of the fourth-order stencil used by the basis solver, so the
//! reference state is a stationary state of the propagator up to splitting
//! error.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::basis::{fd4_symbol, WannierStarkBasis};
use crate::drive::{DriveWaveform, SpatialProfile};
use crate::dynamics::CoefficientState;
use crate::error::{Error, Result};
use crate::lattice::{AxisLattice, GridSpec, LatticeParams};

/// Probability allowed within [`EDGE_WELLS`] of a wall. Splitting error
/// scatters a small high-energy component over the whole box (amplitude
/// about `1e-4` at `dt = T_B/1000`), so a pointwise amplitude test cannot
/// tell it apart from real boundary contact; the edge probability can.
pub const EDGE_PROBABILITY: f64 = 1e-5;
pub const EDGE_WELLS: usize = 2;
/// Largest allowed drift of the discrete norm over a propagation.
pub const GRID_NORM_LIMIT: f64 = 1e-7;
/// Projection leakage above which reduced models are flagged unreliable.
pub const LEAKAGE_WARNING: f64 = 0.05;
/// Largest 2D grid (samples) accepted by the full propagator.
pub const MAX_2D_SAMPLES: usize = 1 << 22;
/// Coarsest admissible step as a fraction of the Bloch period.
pub const GRID_MIN_STEPS_PER_PERIOD: usize = 500;
/// Default step as a fraction of the Bloch period.
pub const GRID_DEFAULT_STEPS_PER_PERIOD: usize = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KineticSymbol {
    /// Symbol of the fourth-order difference stencil.
    #[default]
    Fd4,
    /// `k^2`.
    Exact,
}

fn kinetic_energies(grid: &GridSpec, symbol: KineticSymbol) -> Vec<f64> {
    let n = grid.len();
    let h = grid.spacing();
    let pref = 1.0 / (PI * PI);
    (0..n)
        .map(|j| {
            let m = if j <= n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            let theta = 2.0 * PI * m / n as f64;
            match symbol {
                KineticSymbol::Fd4 => pref * fd4_symbol(theta) / (h * h),
                KineticSymbol::Exact => pref * (theta / h).powi(2),
            }
        })
        .collect()
}

/// Complex samples on a 1D grid; sample 0 sits on the left wall.
#[derive(Clone, Debug, PartialEq)]
pub struct GridWavefunction {
    grid: GridSpec,
    values: Vec<Complex64>,
    pub time: f64,
    /// `int_0^t A` of the uniform drive component.
    pub drive_phase: f64,
}

impl GridWavefunction {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: (grid.len(), 1),
                found: (values.len(), 1),
            });
        }
        Ok(GridWavefunction {
            grid,
            values,
            time: 0.0,
            drive_phase: 0.0,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    /// Coordinate of sample 0.
    pub fn origin(&self) -> f64 {
        self.grid.x_min()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.spacing()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `<x>` normalized by the current norm.
    pub fn mean_position(&self) -> f64 {
        let (w, m) = self
            .values
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(w, m), (i, c)| {
                let p = c.norm_sqr();
                (w + p, m + p * self.grid.x(i))
            });
        m / w
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean_position();
        let (w, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(w, v), (i, c)| {
                let p = c.norm_sqr();
                (w + p, v + p * (self.grid.x(i) - mean).powi(2))
            });
        v / w
    }

    pub fn inner(&self, other: &GridWavefunction) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.spacing()
    }

    /// Largest `|psi|` within `wells` wells of either wall.
    pub fn edge_amplitude(&self, wells: usize) -> f64 {
        let m = (wells * self.grid.points_per_period).min(self.values.len());
        edge_samples(&self.values, m).fold(0.0f64, |a, c| a.max(c.norm()))
    }

    /// Probability within `wells` wells of either wall.
    pub fn edge_probability(&self, wells: usize) -> f64 {
        edge_weight(&self.values, wells * self.grid.points_per_period) * self.spacing()
    }
}

fn edge_samples(values: &[Complex64], m: usize) -> impl Iterator<Item = &Complex64> {
    let n = values.len();
    values[..m].iter().chain(&values[n - m..])
}

fn edge_weight(values: &[Complex64], m: usize) -> f64 {
    let m = m.min(values.len() / 2);
    edge_samples(values, m).map(|c| c.norm_sqr()).sum()
}

/// Wells carrying amplitude above `1e-10` of the largest one.
fn occupied(coeffs: &CoefficientState) -> Option<(i64, i64)> {
    let peak = coeffs.amps().iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let first = coeffs.iter().find(|(_, c)| c.norm() > 1e-10 * peak)?.0;
    let last = coeffs
        .iter()
        .filter(|(_, c)| c.norm() > 1e-10 * peak)
        .last()?
        .0;
    Some((first, last))
}

/// Phase `phi_n(t) = -(E_0 + n omega_B) t - M_0 int A`.
fn ladder_phase(basis: &WannierStarkBasis, n: i64, time: f64, drive_phase: f64) -> f64 {
    -(basis.energy0() + basis.ladder_energy(n)) * time - basis.m0() * drive_phase
}

/// `psi(x) = sum_n c_n e^{i phi_n(t)} phi_0(x - n)` at the coefficient time.
pub fn synthesize(
    basis: &WannierStarkBasis,
    coeffs: &CoefficientState,
) -> Result<GridWavefunction> {
    let grid = *basis.grid();
    let (lo, hi) = basis.synthesis_range();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    if let Some((first, last)) = occupied(coeffs) {
        if first < lo || last > hi {
            return Err(Error::WindowOutsideBasis {
                n_min: first,
                n_max: last,
                lo,
                hi,
            });
        }
        let ppp = grid.points_per_period as i64;
        let phi0 = basis.phi0();
        let (i_lo, i_hi) = (0, grid.len());
        for n in first..=last {
            let c = coeffs.get(n);
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let w = c * Complex64::from_polar(
                1.0,
                ladder_phase(basis, n, coeffs.time, coeffs.phase_accum),
            );
            let shift = n * ppp;
            for i in i_lo..i_hi {
                let j = i as i64 + shift;
                if j >= 0 && (j as usize) < grid.len() {
                    values[j as usize] += w * phi0[i];
                }
            }
        }
    }
    let mut psi = GridWavefunction::new(grid, values)?;
    psi.time = coeffs.time;
    psi.drive_phase = coeffs.phase_accum;
    Ok(psi)
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub coeffs: CoefficientState,
    /// `1 - sum |c_n|^2` relative to the norm of the input.
    pub leakage: f64,
}

/// `c_n = e^{-i phi_n(t)} <phi_n | psi>` over the synthesis range.
pub fn project(basis: &WannierStarkBasis, psi: &GridWavefunction) -> Result<Projection> {
    if psi.grid() != basis.grid() {
        return Err(Error::ShapeMismatch {
            expected: (basis.grid().len(), 1),
            found: (psi.grid().len(), 1),
        });
    }
    let (lo, hi) = basis.synthesis_range();
    let grid = basis.grid();
    let ppp = grid.points_per_period as i64;
    let h = grid.spacing();
    let phi0 = basis.phi0();
    let (i_lo, i_hi) = (0, grid.len());
    let amps: Vec<Complex64> = (lo..=hi)
        .map(|n| {
            let shift = n * ppp;
            let overlap: Complex64 = (i_lo..i_hi)
                .filter_map(|i| {
                    let j = i as i64 + shift;
                    (j >= 0 && (j as usize) < grid.len()).then(|| psi.values[j as usize] * phi0[i])
                })
                .sum::<Complex64>()
                * h;
            overlap * Complex64::from_polar(1.0, -ladder_phase(basis, n, psi.time, psi.drive_phase))
        })
        .collect();
    let mut coeffs = CoefficientState::new(lo, amps);
    coeffs.time = psi.time;
    coeffs.phase_accum = psi.drive_phase;
    let leakage = 1.0 - coeffs.norm_sqr() / psi.norm_sqr();
    if leakage > LEAKAGE_WARNING {
        log::warn!(
            "projection leakage {leakage:.3e} out of the lowest ladder: reduced models unreliable"
        );
    }
    Ok(Projection { coeffs, leakage })
}

/// Lowest-ladder amplitudes `c_{n,m}` of a 2D state, row-major in `m`.
#[derive(Clone, Debug)]
pub struct Projection2d {
    pub n_min: [i64; 2],
    pub dims: [usize; 2],
    pub coeffs: Vec<Complex64>,
    pub leakage: f64,
}

impl Projection2d {
    /// Nearest-neighbour coherence along each axis.
    pub fn coherence(&self) -> [Complex64; 2] {
        let [nx, ny] = self.dims;
        let c = |n: usize, m: usize| self.coeffs[m * nx + n];
        let mut s = [Complex64::new(0.0, 0.0); 2];
        for m in 0..ny {
            for n in 0..nx {
                if n + 1 < nx {
                    s[0] += c(n, m).conj() * c(n + 1, m);
                }
                if m + 1 < ny {
                    s[1] += c(n, m).conj() * c(n, m + 1);
                }
            }
        }
        s
    }
}

/// Projects onto products `phi_n(x) phi_m(y)` over both synthesis ranges.
pub fn project_2d(
    basis_x: &WannierStarkBasis,
    basis_y: &WannierStarkBasis,
    psi: &GridWavefunction2d,
) -> Result<Projection2d> {
    if psi.grid_x != *basis_x.grid() || psi.grid_y != *basis_y.grid() {
        return Err(Error::ShapeMismatch {
            expected: (basis_x.grid().len(), basis_y.grid().len()),
            found: psi.shape(),
        });
    }
    let (nx, ny) = psi.shape();
    let (lx, hx) = basis_x.synthesis_range();
    let (ly, hy) = basis_y.synthesis_range();
    let (cx, cy) = ((hx - lx + 1) as usize, (hy - ly + 1) as usize);
    let hxs = psi.grid_x.spacing();
    let hys = psi.grid_y.spacing();
    let px = basis_x.grid().points_per_period as i64;
    let py = basis_y.grid().points_per_period as i64;
    // x contraction: rows[iy][a] = h_x sum_i phi0(i - n_a px) psi(i, iy)
    let phi_x = basis_x.phi0();
    let rows: Vec<Vec<Complex64>> = psi
        .values
        .par_chunks(nx)
        .map(|row| {
            (lx..=hx)
                .map(|n| {
                    let shift = n * px;
                    let (lo, hi) = (
                        (shift.max(0)) as usize,
                        ((nx as i64 + shift).min(nx as i64)) as usize,
                    );
                    row[lo..hi]
                        .iter()
                        .zip(&phi_x[(lo as i64 - shift) as usize..])
                        .map(|(v, p)| v * p)
                        .sum::<Complex64>()
                        * hxs
                })
                .collect()
        })
        .collect();
    let phi_y = basis_y.phi0();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); cx * cy];
    for (b, m) in (ly..=hy).enumerate() {
        let shift = m * py;
        for iy in 0..ny {
            let j = iy as i64 - shift;
            if j < 0 || j >= ny as i64 {
                continue;
            }
            let w = phi_y[j as usize] * hys;
            if w == 0.0 {
                continue;
            }
            for a in 0..cx {
                coeffs[b * cx + a] += rows[iy][a] * w;
            }
        }
    }
    for (b, m) in (ly..=hy).enumerate() {
        let phase_y = ladder_phase(basis_y, m, psi.time, psi.drive_phase[1]);
        for (a, n) in (lx..=hx).enumerate() {
            let phase = phase_y + ladder_phase(basis_x, n, psi.time, psi.drive_phase[0]);
            coeffs[b * cx + a] *= Complex64::from_polar(1.0, -phase);
        }
    }
    let weight: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let leakage = 1.0 - weight / psi.norm_sqr();
    if leakage > LEAKAGE_WARNING {
        log::warn!(
            "projection leakage {leakage:.3e} out of the lowest ladder: reduced models unreliable"
        );
    }
    Ok(Projection2d {
        n_min: [lx, ly],
        dims: [cx, cy],
        coeffs,
        leakage,
    })
}

/// Probability in each well cell, row-major in y; wells ordered from the
/// left wall.
pub fn well_occupation_2d(psi: &GridWavefunction2d) -> Vec<f64> {
    let (nx, _) = psi.shape();
    let (px, py) = (psi.grid_x.points_per_period, psi.grid_y.points_per_period);
    let (wx, wy) = (psi.grid_x.wells_count, psi.grid_y.wells_count);
    let mut out = vec![0.0; wx * wy];
    for (iy, row) in psi.values.chunks(nx).enumerate() {
        let base = (iy / py) * wx;
        for (ix, c) in row.iter().enumerate() {
            out[base + ix / px] += c.norm_sqr();
        }
    }
    let a = psi.cell_area();
    out.iter_mut().for_each(|v| *v *= a);
    out
}

/// Probability in each well cell of a 1D state.
pub fn well_occupation(psi: &GridWavefunction) -> Vec<f64> {
    let p = psi.grid.points_per_period;
    let h = psi.spacing();
    psi.values
        .chunks(p)
        .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>() * h)
        .collect()
}

fn check_step(dt: f64, omega_b: f64) -> Result<()> {
    let limit = 2.0 * PI / omega_b / GRID_MIN_STEPS_PER_PERIOD as f64;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "grid time step {dt} outside (0, T_B/{GRID_MIN_STEPS_PER_PERIOD}] = (0, {limit}]"
        )));
    }
    Ok(())
}

/// Number of steps of at most `max_dt` covering `span`.
fn step_count(span: f64, max_dt: f64) -> usize {
    (span / max_dt - 1e-9).ceil().max(1.0) as usize
}

/// Reusable 1D split-operator propagator.
pub struct Propagator1d {
    lattice: AxisLattice,
    grid: GridSpec,
    kinetic: Vec<f64>,
    static_potential: Vec<f64>,
    cosine: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Propagator1d {
    pub fn new(lattice: AxisLattice, grid: GridSpec, symbol: KineticSymbol) -> Result<Self> {
        grid.validate()?;
        lattice.bloch_frequency()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Propagator1d {
            lattice,
            kinetic: kinetic_energies(&grid, symbol),
            static_potential: (0..grid.len())
                .map(|i| lattice.potential(grid.x(i)))
                .collect(),
            cosine: (0..grid.len())
                .map(|i| (2.0 * PI * grid.x(i)).cos())
                .collect(),
            grid,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    fn kinetic_step(&mut self, values: &mut [Complex64], phases: &[Complex64]) {
        self.forward.process_with_scratch(values, &mut self.scratch);
        values.iter_mut().zip(phases).for_each(|(v, p)| *v *= p);
        self.inverse.process_with_scratch(values, &mut self.scratch);
    }

    fn kinetic_phases(&self, tau: f64) -> Vec<Complex64> {
        let scale = 1.0 / self.grid.len() as f64;
        self.kinetic
            .iter()
            .map(|&e| Complex64::from_polar(scale, -e * tau))
            .collect()
    }

    /// `<H>` of the undriven Hamiltonian (normalized by the norm).
    pub fn energy(&mut self, psi: &GridWavefunction) -> f64 {
        let mut k = psi.values.clone();
        self.forward.process_with_scratch(&mut k, &mut self.scratch);
        let n = self.grid.len() as f64;
        let kin: f64 = k
            .iter()
            .zip(&self.kinetic)
            .map(|(c, e)| c.norm_sqr() * e)
            .sum::<f64>()
            / n;
        let pot: f64 = psi
            .values
            .iter()
            .zip(&self.static_potential)
            .map(|(c, v)| c.norm_sqr() * v)
            .sum();
        (kin + pot) / psi.values.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Propagates to `t_end` with steps of at most `max_dt`, calling
    /// `observe` every `stride` steps (and never between merged half-steps).
    pub fn advance(
        &mut self,
        psi: &mut GridWavefunction,
        drive: &DriveWaveform,
        t_end: f64,
        max_dt: f64,
        stride: usize,
        mut observe: impl FnMut(&GridWavefunction),
    ) -> Result<()> {
        if psi.grid != self.grid {
            return Err(Error::ShapeMismatch {
                expected: (self.grid.len(), 1),
                found: (psi.grid.len(), 1),
            });
        }
        if !drive.is_separable() {
            return Err(Error::NonSeparableDrive);
        }
        let omega = self.lattice.bloch_frequency()?;
        check_step(max_dt, omega)?;
        let span = t_end - psi.time;
        if span <= 0.0 {
            return Ok(());
        }
        let steps = step_count(span, max_dt);
        let dt = span / steps as f64;
        let half = self.kinetic_phases(0.5 * dt);
        let full = self.kinetic_phases(dt);
        let profile: Vec<f64> = (0..self.grid.len())
            .map(|i| drive.profile_factor(self.grid.x(i) - 0.5, 0.0))
            .collect();
        let s_ref = drive.uniform_reference();
        let norm0 = psi.norm_sqr();
        let edge_samples = EDGE_WELLS * self.grid.points_per_period;
        let h = self.grid.spacing();
        let t0 = psi.time;
        let mut values = std::mem::take(&mut psi.values);
        let mut open = false;
        for i in 0..steps {
            if !open {
                self.kinetic_step(&mut values, &half);
                open = true;
            }
            let tm = t0 + (i as f64 + 0.5) * dt;
            let a = drive.amplitude(tm);
            for (((v, vs), c), s) in values
                .iter_mut()
                .zip(&self.static_potential)
                .zip(&self.cosine)
                .zip(&profile)
            {
                *v *= Complex64::from_polar(1.0, -dt * (vs + a * s * c));
            }
            psi.drive_phase += s_ref * a * dt;
            let edge = edge_weight(&values, edge_samples) * h;
            if edge > EDGE_PROBABILITY {
                psi.values = values;
                psi.time = tm;
                return Err(Error::BoundaryReached {
                    time: tm,
                    probability: edge,
                });
            }
            let last = i + 1 == steps;
            let show = stride > 0 && (i + 1) % stride == 0;
            if last || show {
                self.kinetic_step(&mut values, &half);
                open = false;
                psi.values = values;
                psi.time = t0 + (i + 1) as f64 * dt;
                let drift = (psi.norm_sqr() - norm0).abs();
                if drift > GRID_NORM_LIMIT {
                    return Err(Error::StepSize {
                        drift,
                        limit: GRID_NORM_LIMIT,
                    });
                }
                if show {
                    observe(psi);
                }
                values = std::mem::take(&mut psi.values);
            } else {
                self.kinetic_step(&mut values, &full);
            }
        }
        psi.values = values;
        psi.time = t_end;
        Ok(())
    }
}

/// Second-order split-operator propagation of one axis to `t_end`.
pub fn propagate_1d(
    psi: &mut GridWavefunction,
    lattice: &AxisLattice,
    drive: &DriveWaveform,
    t_end: f64,
    dt: f64,
) -> Result<()> {
    let mut p = Propagator1d::new(*lattice, *psi.grid(), KineticSymbol::default())?;
    p.advance(psi, drive, t_end, dt, 0, |_| {})
}

/// Independent propagation of the two factors of a product state.
#[allow(clippy::too_many_arguments)]
pub fn propagate_2d_separable(
    psi_x: &mut GridWavefunction,
    psi_y: &mut GridWavefunction,
    params: &LatticeParams,
    drive_x: &DriveWaveform,
    drive_y: &DriveWaveform,
    t_end: f64,
    dt: f64,
) -> Result<()> {
    if !drive_x.is_separable() || !drive_y.is_separable() {
        return Err(Error::NonSeparableDrive);
    }
    let lx = params.axis(crate::lattice::Axis::X);
    let ly = params.axis(crate::lattice::Axis::Y);
    let (rx, ry) = rayon::join(
        || propagate_1d(psi_x, &lx, drive_x, t_end, dt),
        || propagate_1d(psi_y, &ly, drive_y, t_end, dt),
    );
    rx?;
    ry
}

/// Complex samples on a 2D grid, row-major with `x` contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct GridWavefunction2d {
    grid_x: GridSpec,
    grid_y: GridSpec,
    values: Vec<Complex64>,
    pub time: f64,
    pub drive_phase: [f64; 2],
}

impl GridWavefunction2d {
    pub fn new(grid_x: GridSpec, grid_y: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        let samples = grid_x.len() * grid_y.len();
        if samples > MAX_2D_SAMPLES {
            return Err(Error::MemoryGuard {
                samples,
                limit: MAX_2D_SAMPLES,
            });
        }
        if values.len() != samples {
            return Err(Error::ShapeMismatch {
                expected: (grid_x.len(), grid_y.len()),
                found: (values.len(), 1),
            });
        }
        Ok(GridWavefunction2d {
            grid_x,
            grid_y,
            values,
            time: 0.0,
            drive_phase: [0.0; 2],
        })
    }

    /// `Psi(x, y) = psi_x(x) psi_y(y)`.
    pub fn product(psi_x: &GridWavefunction, psi_y: &GridWavefunction) -> Result<Self> {
        let (gx, gy) = (*psi_x.grid(), *psi_y.grid());
        let samples = gx.len() * gy.len();
        if samples > MAX_2D_SAMPLES {
            return Err(Error::MemoryGuard {
                samples,
                limit: MAX_2D_SAMPLES,
            });
        }
        let mut values = Vec::with_capacity(samples);
        for b in &psi_y.values {
            values.extend(psi_x.values.iter().map(|a| a * b));
        }
        let mut out = Self::new(gx, gy, values)?;
        out.time = psi_x.time;
        out.drive_phase = [psi_x.drive_phase, psi_y.drive_phase];
        Ok(out)
    }

    pub fn grids(&self) -> (&GridSpec, &GridSpec) {
        (&self.grid_x, &self.grid_y)
    }

    /// `(nx, ny)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.grid_x.len(), self.grid_y.len())
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn cell_area(&self) -> f64 {
        self.grid_x.spacing() * self.grid_y.spacing()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.cell_area()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &GridWavefunction2d) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.cell_area()
    }

    /// Probability within `wells` wells of any wall.
    pub fn edge_probability(&self, wells: usize) -> f64 {
        edge_weight_2d(
            &self.values,
            self.shape(),
            (
                wells * self.grid_x.points_per_period,
                wells * self.grid_y.points_per_period,
            ),
        ) * self.cell_area()
    }
}

fn edge_weight_2d(values: &[Complex64], (nx, ny): (usize, usize), (mx, my): (usize, usize)) -> f64 {
    let (mx, my) = (mx.min(nx / 2), my.min(ny / 2));
    let mut w = 0.0;
    for (iy, row) in values.chunks(nx).enumerate() {
        if iy < my || iy + my >= ny {
            w += row.iter().map(|c| c.norm_sqr()).sum::<f64>();
        } else {
            w += edge_samples(row, mx).map(|c| c.norm_sqr()).sum::<f64>();
        }
    }
    w
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

fn fft_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], len: usize) {
    let scratch_len = fft.get_inplace_scratch_len();
    data.par_chunks_mut(len).for_each_init(
        || vec![Complex64::new(0.0, 0.0); scratch_len],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

/// Split-operator propagation on the full 2D grid, for any pair of drives
/// (including crossed profiles that couple the axes).
pub struct Propagator2d {
    params: LatticeParams,
    grid_x: GridSpec,
    grid_y: GridSpec,
    kinetic_x: Vec<f64>,
    kinetic_y: Vec<f64>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
}

impl Propagator2d {
    pub fn new(
        params: LatticeParams,
        grid_x: GridSpec,
        grid_y: GridSpec,
        symbol: KineticSymbol,
    ) -> Result<Self> {
        grid_x.validate()?;
        grid_y.validate()?;
        params.validate()?;
        let samples = grid_x.len() * grid_y.len();
        if samples > MAX_2D_SAMPLES {
            return Err(Error::MemoryGuard {
                samples,
                limit: MAX_2D_SAMPLES,
            });
        }
        let mut planner = FftPlanner::new();
        Ok(Propagator2d {
            params,
            kinetic_x: kinetic_energies(&grid_x, symbol),
            kinetic_y: kinetic_energies(&grid_y, symbol),
            fwd_x: planner.plan_fft_forward(grid_x.len()),
            inv_x: planner.plan_fft_inverse(grid_x.len()),
            fwd_y: planner.plan_fft_forward(grid_y.len()),
            inv_y: planner.plan_fft_inverse(grid_y.len()),
            grid_x,
            grid_y,
            buffer: vec![Complex64::new(0.0, 0.0); samples],
        })
    }

    fn phases(&self, tau: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let scale = 1.0 / (self.grid_x.len() * self.grid_y.len()) as f64;
        let px = self
            .kinetic_x
            .iter()
            .map(|&e| Complex64::from_polar(scale, -e * tau))
            .collect();
        let py = self
            .kinetic_y
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * tau))
            .collect();
        (px, py)
    }

    fn kinetic_step(
        &mut self,
        values: &mut [Complex64],
        (px, py): &(Vec<Complex64>, Vec<Complex64>),
    ) {
        let (nx, ny) = (self.grid_x.len(), self.grid_y.len());
        fft_rows(&self.fwd_x, values, nx);
        transpose(values, &mut self.buffer, ny, nx);
        fft_rows(&self.fwd_y, &mut self.buffer, ny);
        // buffer is [kx][ky]
        self.buffer
            .par_chunks_mut(ny)
            .zip(px.par_iter())
            .for_each(|(row, ax)| {
                row.iter_mut().zip(py).for_each(|(v, ay)| *v *= ax * ay);
            });
        fft_rows(&self.inv_y, &mut self.buffer, ny);
        transpose(&self.buffer, values, nx, ny);
        fft_rows(&self.inv_x, values, nx);
    }

    pub fn advance(
        &mut self,
        psi: &mut GridWavefunction2d,
        drive_x: &DriveWaveform,
        drive_y: &DriveWaveform,
        t_end: f64,
        max_dt: f64,
        stride: usize,
        mut observe: impl FnMut(&GridWavefunction2d),
    ) -> Result<()> {
        if psi.grid_x != self.grid_x || psi.grid_y != self.grid_y {
            return Err(Error::ShapeMismatch {
                expected: (self.grid_x.len(), self.grid_y.len()),
                found: psi.shape(),
            });
        }
        let lx = self.params.axis(crate::lattice::Axis::X);
        let ly = self.params.axis(crate::lattice::Axis::Y);
        check_step(max_dt, lx.bloch_frequency()?.max(ly.bloch_frequency()?))?;
        let span = t_end - psi.time;
        if span <= 0.0 {
            return Ok(());
        }
        let steps = step_count(span, max_dt);
        let dt = span / steps as f64;
        let half = self.phases(0.5 * dt);
        let full = self.phases(dt);
        let (nx, ny) = (self.grid_x.len(), self.grid_y.len());
        let xs = self.grid_x.positions();
        let ys = self.grid_y.positions();
        let vx: Vec<f64> = xs.iter().map(|&x| lx.potential(x)).collect();
        let vy: Vec<f64> = ys.iter().map(|&y| ly.potential(y)).collect();
        let cx: Vec<f64> = xs.iter().map(|&x| (2.0 * PI * x).cos()).collect();
        let cy: Vec<f64> = ys.iter().map(|&y| (2.0 * PI * y).cos()).collect();
        // profile factors in drive coordinates u = x - 1/2
        let fx = |x: f64, y: f64| drive_x.profile_factor(x - 0.5, y - 0.5);
        let fy = |x: f64, y: f64| drive_y.profile_factor(y - 0.5, x - 0.5);
        let crossed_x = matches!(drive_x.profile, SpatialProfile::Crossed { .. });
        let crossed_y = matches!(drive_y.profile, SpatialProfile::Crossed { .. });
        // separable parts of the profiles: f(x, y) = gx(x) hy(y)
        let gx_x: Vec<f64> = xs
            .iter()
            .map(|&x| if crossed_x { 1.0 } else { fx(x, 0.5) })
            .collect();
        let gx_y: Vec<f64> = ys
            .iter()
            .map(|&y| if crossed_x { fx(0.5, y) } else { 1.0 })
            .collect();
        let gy_x: Vec<f64> = xs
            .iter()
            .map(|&x| if crossed_y { fy(x, 0.5) } else { 1.0 })
            .collect();
        let gy_y: Vec<f64> = ys
            .iter()
            .map(|&y| if crossed_y { 1.0 } else { fy(0.5, y) })
            .collect();
        let refs = [drive_x.uniform_reference(), drive_y.uniform_reference()];
        let cell = psi.cell_area();
        let norm0 = psi.norm_sqr();
        let edge = (
            EDGE_WELLS * self.grid_x.points_per_period,
            EDGE_WELLS * self.grid_y.points_per_period,
        );
        let t0 = psi.time;
        let mut values = std::mem::take(&mut psi.values);
        let mut open = false;
        for i in 0..steps {
            if !open {
                self.kinetic_step(&mut values, &half);
                open = true;
            }
            let tm = t0 + (i as f64 + 0.5) * dt;
            let ax = drive_x.amplitude(tm);
            let ay = drive_y.amplitude(tm);
            values.par_chunks_mut(nx).enumerate().for_each(|(iy, row)| {
                let wy = vy[iy];
                let bx = ax * gx_y[iy];
                let by = ay * gy_y[iy] * cy[iy];
                for (ix, v) in row.iter_mut().enumerate() {
                    let pot = vx[ix] + wy + bx * gx_x[ix] * cx[ix] + by * gy_x[ix];
                    *v *= Complex64::from_polar(1.0, -dt * pot);
                }
            });
            psi.drive_phase[0] += refs[0] * ax * dt;
            psi.drive_phase[1] += refs[1] * ay * dt;
            let p_edge = edge_weight_2d(&values, (nx, ny), edge) * cell;
            if p_edge > EDGE_PROBABILITY {
                psi.values = values;
                psi.time = tm;
                return Err(Error::BoundaryReached {
                    time: tm,
                    probability: p_edge,
                });
            }
            let last = i + 1 == steps;
            let show = stride > 0 && (i + 1) % stride == 0;
            if last || show {
                self.kinetic_step(&mut values, &half);
                open = false;
                psi.values = values;
                psi.time = t0 + (i + 1) as f64 * dt;
                let drift = (psi.norm_sqr() - norm0).abs();
                if drift > GRID_NORM_LIMIT {
                    return Err(Error::StepSize {
                        drift,
                        limit: GRID_NORM_LIMIT,
                    });
                }
                if show {
                    observe(psi);
                }
                values = std::mem::take(&mut psi.values);
            } else {
                self.kinetic_step(&mut values, &full);
            }
        }
        psi.values = values;
        psi.time = t_end;
        Ok(())
    }
}

/// Split-operator propagation of a 2D state under possibly crossed drives.
pub fn propagate_2d_full(
    psi: &mut GridWavefunction2d,
    params: &LatticeParams,
    drive_x: &DriveWaveform,
    drive_y: &DriveWaveform,
    t_end: f64,
    dt: f64,
) -> Result<()> {
    let (gx, gy) = (psi.grid_x, psi.grid_y);
    let mut p = Propagator2d::new(*params, gx, gy, KineticSymbol::default())?;
    p.advance(psi, drive_x, drive_y, t_end, dt, 0, |_| {})
}
