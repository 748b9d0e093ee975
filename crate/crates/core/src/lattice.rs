// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Normalized-unit lattice description.
//!
//! Lengths are measured in lattice periods `d`, energies in recoil energies
//! `E_R` and times in `hbar / E_R`. In these units the single-axis washboard
//! Hamiltonian reads
//!
//! ```text
//! H = -1/(2 m*) d^2/dx^2 + [V + A(t)] cos(2 pi x) + F x,    m* = pi^2 / 2
//! ```
//!
//! Well `n` occupies `[n, n + 1)`; its nominal center sits at `n + 1/2`,
//! which is also the origin `u = 0` of the slowly varying drive profiles
//! (`u = x - 1/2`).

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensionless effective mass `m* = pi^2 / 2`.
pub const EFFECTIVE_MASS: f64 = PI * PI / 2.0;

/// Largest admissible spatial-beat wavenumber.
pub const BEAT_K_LIMIT: f64 = 0.1;
/// Beat wavenumbers above this trigger a linearization warning.
pub const BEAT_K_WARN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Y => f.write_str("y"),
        }
    }
}

/// Static lattice parameters for both axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeParams {
    pub depth_x: f64,
    pub depth_y: f64,
    pub force_x: f64,
    pub force_y: f64,
    effective_mass: f64,
    /// Spatial-beat wavenumber `k = (k_L - k_L') / k_L`; zero when unused.
    pub beat_k: f64,
}

/// The one-dimensional slice of [`LatticeParams`] seen by a single axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisLattice {
    pub axis: Axis,
    pub depth: f64,
    pub force: f64,
}

impl LatticeParams {
    pub fn new(
        depth_x: f64,
        depth_y: f64,
        force_x: f64,
        force_y: f64,
        beat_k: f64,
    ) -> Result<Self> {
        let params = LatticeParams {
            depth_x,
            depth_y,
            force_x,
            force_y,
            effective_mass: EFFECTIVE_MASS,
            beat_k,
        };
        params.validate()?;
        Ok(params)
    }

    /// Same depth and tilt on both axes, no spatial beat.
    pub fn isotropic(depth: f64, force: f64) -> Result<Self> {
        Self::new(depth, depth, force, force, 0.0)
    }

    pub fn with_beat(mut self, beat_k: f64) -> Result<Self> {
        self.beat_k = beat_k;
        self.validate()?;
        Ok(self)
    }

    pub fn effective_mass(&self) -> f64 {
        self.effective_mass
    }

    /// Coefficient `1 / (2 m*)` of the kinetic operator.
    pub fn kinetic_prefactor(&self) -> f64 {
        1.0 / (2.0 * self.effective_mass)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in Axis::BOTH {
            let a = self.axis(axis);
            if !(a.depth > 0.0) || !a.depth.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "lattice depth on axis {axis} must be positive, got {}",
                    a.depth
                )));
            }
            if !(a.force > 0.0) || !a.force.is_finite() {
                return Err(Error::NoLadder {
                    axis,
                    force: a.force,
                });
            }
        }
        if !self.beat_k.is_finite() || self.beat_k.abs() > BEAT_K_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "|beat_k| = {} exceeds the linearization limit {BEAT_K_LIMIT}",
                self.beat_k.abs()
            )));
        }
        if self.beat_k.abs() > BEAT_K_WARN {
            log::warn!(
                "beat_k = {} is outside the small-k regime (|k| <= {BEAT_K_WARN}); sin(ku) ~ ku degrades",
                self.beat_k
            );
        }
        Ok(())
    }

    pub fn axis(&self, axis: Axis) -> AxisLattice {
        match axis {
            Axis::X => AxisLattice {
                axis,
                depth: self.depth_x,
                force: self.force_x,
            },
            Axis::Y => AxisLattice {
                axis,
                depth: self.depth_y,
                force: self.force_y,
            },
        }
    }

    /// Undriven potential `V cos(2 pi x) + F x` on the given axis.
    pub fn potential_static(&self, axis: Axis, x: f64) -> f64 {
        self.axis(axis).potential(x)
    }

    /// Bloch frequency `omega_B = F` of the given axis.
    pub fn bloch_frequency(&self, axis: Axis) -> Result<f64> {
        self.axis(axis).bloch_frequency()
    }
}

impl AxisLattice {
    pub fn potential(&self, x: f64) -> f64 {
        self.depth * (2.0 * PI * x).cos() + self.force * x
    }

    pub fn bloch_frequency(&self) -> Result<f64> {
        if self.force > 0.0 && self.force.is_finite() {
            Ok(self.force)
        } else {
            Err(Error::NoLadder {
                axis: self.axis,
                force: self.force,
            })
        }
    }

    pub fn bloch_period(&self) -> Result<f64> {
        Ok(2.0 * PI / self.bloch_frequency()?)
    }
}

/// Uniform spatial sampling of a finite lattice box along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub wells_count: usize,
    pub points_per_period: usize,
    /// Index (counted from the left edge) of the well labeled `n = 0`.
    pub origin_well: usize,
}

pub const MIN_POINTS_PER_PERIOD: usize = 16;

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::centered(65, 32).expect("default grid is valid")
    }
}

impl GridSpec {
    /// Odd number of wells with the origin well in the middle.
    pub fn centered(wells_count: usize, points_per_period: usize) -> Result<Self> {
        let grid = GridSpec {
            wells_count,
            points_per_period,
            origin_well: wells_count.saturating_sub(1) / 2,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_period < MIN_POINTS_PER_PERIOD {
            return Err(Error::InvalidParameter(format!(
                "points_per_period = {} is below the minimum {MIN_POINTS_PER_PERIOD}",
                self.points_per_period
            )));
        }
        if self.wells_count < 5 || self.wells_count.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "wells_count = {} must be odd and at least 5",
                self.wells_count
            )));
        }
        if self.origin_well >= self.wells_count {
            return Err(Error::InvalidParameter(format!(
                "origin_well = {} lies outside the {} wells of the box",
                self.origin_well, self.wells_count
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.wells_count * self.points_per_period
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.points_per_period as f64
    }

    /// Coordinate of sample 0 (the left hard wall).
    pub fn x_min(&self) -> f64 {
        -(self.origin_well as f64)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min() + i as f64 * self.spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Lowest and highest well labels contained in the box.
    pub fn well_range(&self) -> (i64, i64) {
        let lo = -(self.origin_well as i64);
        (lo, lo + self.wells_count as i64 - 1)
    }

    /// Wells within the central half of the box.
    pub fn interior_range(&self) -> (i64, i64) {
        let half = (self.wells_count / 4) as i64;
        let center = self.well_range().0 + (self.wells_count as i64 - 1) / 2;
        (center - half, center + half)
    }

    /// Sample index of the first point of well `n`, if it is inside the box.
    pub fn well_start(&self, n: i64) -> Option<usize> {
        let (lo, hi) = self.well_range();
        (lo..=hi)
            .contains(&n)
            .then(|| (n - lo) as usize * self.points_per_period)
    }

    /// Well label of a coordinate (floor), not clamped to the box.
    pub fn well_of(&self, x: f64) -> i64 {
        x.floor() as i64
    }
}
