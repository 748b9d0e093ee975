// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Measurements shared by the coefficient and grid representations.
//!
//! Positions are reported in well units: a coefficient state contributes
//! `n`, a grid state contributes `x - <phi_0|x|phi_0>`, so both agree on
//! where the lowest-ladder state of well `n` sits.

use std::f64::consts::PI;

use crate::basis::WannierStarkBasis;
use crate::dynamics::CoefficientState;
use crate::error::{Error, Result};
use crate::grid::{GridWavefunction, GridWavefunction2d};

/// Eigenvalue ratio below which the principal axis is not reported.
pub const ISOTROPY_LIMIT: f64 = 1.05;

/// First and second moments of a (possibly unnormalized) density.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DensityMoments {
    pub weight: f64,
    pub mean: [f64; 2],
    /// Central second moments `[[xx, xy], [xy, yy]]`.
    pub cov: [[f64; 2]; 2],
}

impl DensityMoments {
    fn from_sums(w: f64, s: [f64; 2], ss: [[f64; 2]; 2]) -> Self {
        if w <= 0.0 {
            return DensityMoments::default();
        }
        let mean = [s[0] / w, s[1] / w];
        let mut cov = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                cov[a][b] = ss[a][b] / w - mean[a] * mean[b];
            }
        }
        DensityMoments {
            weight: w,
            mean,
            cov,
        }
    }

    fn raw(&self) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let w = self.weight;
        let s = [w * self.mean[0], w * self.mean[1]];
        let mut ss = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                ss[a][b] = w * (self.cov[a][b] + self.mean[a] * self.mean[b]);
            }
        }
        (w, s, ss)
    }

    /// Moments of a 1D coefficient state along x.
    pub fn of_coeffs(state: &CoefficientState) -> Self {
        let (mut w, mut s, mut ss) = (0.0, 0.0, 0.0);
        for (n, c) in state.iter() {
            let p = c.norm_sqr();
            let x = n as f64;
            w += p;
            s += p * x;
            ss += p * x * x;
        }
        Self::from_sums(w, [s, 0.0], [[ss, 0.0], [0.0, 0.0]])
    }

    /// Moments of the product state `c^x_n c^y_m`.
    pub fn of_product(x: &CoefficientState, y: &CoefficientState) -> Self {
        let mx = Self::of_coeffs(x);
        let my = Self::of_coeffs(y);
        DensityMoments {
            weight: mx.weight * my.weight,
            mean: [mx.mean[0], my.mean[0]],
            cov: [[mx.cov[0][0], 0.0], [0.0, my.cov[0][0]]],
        }
    }

    /// Moments of a 1D grid state along x, in well units.
    pub fn of_grid(psi: &GridWavefunction, basis: &WannierStarkBasis) -> Self {
        let grid = psi.grid();
        let off = basis.mean_offset();
        let (mut w, mut s, mut ss) = (0.0, 0.0, 0.0);
        for (i, c) in psi.values().iter().enumerate() {
            let p = c.norm_sqr();
            let x = grid.x(i) - off;
            w += p;
            s += p * x;
            ss += p * x * x;
        }
        let h = grid.spacing();
        Self::from_sums(w * h, [s * h, 0.0], [[ss * h, 0.0], [0.0, 0.0]])
    }

    /// Moments of a product of two 1D grid states.
    pub fn of_grid_product(
        psi_x: &GridWavefunction,
        basis_x: &WannierStarkBasis,
        psi_y: &GridWavefunction,
        basis_y: &WannierStarkBasis,
    ) -> Self {
        let mx = Self::of_grid(psi_x, basis_x);
        let my = Self::of_grid(psi_y, basis_y);
        DensityMoments {
            weight: mx.weight * my.weight,
            mean: [mx.mean[0], my.mean[0]],
            cov: [[mx.cov[0][0], 0.0], [0.0, my.cov[0][0]]],
        }
    }

    /// Moments of a full 2D grid state, in well units.
    pub fn of_grid_2d(psi: &GridWavefunction2d, offsets: [f64; 2]) -> Self {
        let (gx, gy) = psi.grids();
        let nx = gx.len();
        let xs: Vec<f64> = (0..nx).map(|i| gx.x(i) - offsets[0]).collect();
        let (mut w, mut s, mut ss) = (0.0, [0.0; 2], [[0.0; 2]; 2]);
        for (iy, row) in psi.values().chunks(nx).enumerate() {
            let y = gy.x(iy) - offsets[1];
            let (mut rw, mut rx, mut rxx) = (0.0, 0.0, 0.0);
            for (c, &x) in row.iter().zip(&xs) {
                let p = c.norm_sqr();
                rw += p;
                rx += p * x;
                rxx += p * x * x;
            }
            w += rw;
            s[0] += rx;
            s[1] += rw * y;
            ss[0][0] += rxx;
            ss[0][1] += rx * y;
            ss[1][1] += rw * y * y;
        }
        ss[1][0] = ss[0][1];
        let a = psi.cell_area();
        let scale = |v: [f64; 2]| [v[0] * a, v[1] * a];
        Self::from_sums(w * a, scale(s), [scale(ss[0]), scale(ss[1])])
    }

    /// Moments of an incoherent mixture.
    pub fn mixture(parts: &[DensityMoments]) -> Self {
        let (mut w, mut s, mut ss) = (0.0, [0.0; 2], [[0.0; 2]; 2]);
        for p in parts {
            let (pw, ps, pss) = p.raw();
            w += pw;
            for a in 0..2 {
                s[a] += ps[a];
                for b in 0..2 {
                    ss[a][b] += pss[a][b];
                }
            }
        }
        Self::from_sums(w, s, ss)
    }

    /// Eigenvalues of the covariance, largest first.
    pub fn principal_variances(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.cov;
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mid + rad, mid - rad]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionReference {
    Origin,
    #[default]
    Centroid,
}

/// `sqrt(<|r - r_ref|^2>)`.
pub fn total_dispersion(m: &DensityMoments, reference: DispersionReference) -> f64 {
    let spread = m.cov[0][0] + m.cov[1][1];
    let offset = match reference {
        DispersionReference::Origin => m.mean[0] * m.mean[0] + m.mean[1] * m.mean[1],
        DispersionReference::Centroid => 0.0,
    };
    (spread + offset).max(0.0).sqrt()
}

/// Angle of the major principal axis of the density, in `(-pi/2, pi/2]`.
pub fn orientation_angle(m: &DensityMoments) -> Result<f64> {
    let [l1, l2] = m.principal_variances();
    let ratio = if l2 > 0.0 { l1 / l2 } else { f64::INFINITY };
    if ratio < ISOTROPY_LIMIT {
        return Err(Error::OrientationUndefined { ratio });
    }
    let [[a, b], [_, d]] = m.cov;
    let mut theta = 0.5 * (2.0 * b).atan2(a - d);
    if theta <= -0.5 * PI {
        theta += PI;
    }
    Ok(theta)
}

/// Removes jumps of `pi` between consecutive axis angles.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(angles.len());
    for &a in angles {
        match out.last() {
            None => out.push(a),
            Some(&prev) => {
                let k = ((prev - a) / PI).round();
                out.push(a + k * PI);
            }
        }
    }
    out
}

/// Centered sliding mean over exactly one `period`, by the trapezoid rule
/// on the linear interpolant. Returns `(times, means)` for the window
/// centers that fit inside the series.
pub fn bloch_averaged_centroid(
    times: &[f64],
    values: &[f64],
    period: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if times.len() != values.len() {
        return Err(Error::ShapeMismatch {
            expected: (times.len(), 1),
            found: (values.len(), 1),
        });
    }
    if !(period > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "averaging period {period} must be positive"
        )));
    }
    let span = match (times.first(), times.last()) {
        (Some(a), Some(b)) if times.len() >= 2 => b - a,
        _ => 0.0,
    };
    let slack = 1e-9 * period;
    if span + slack < period {
        return Err(Error::SeriesTooShort { span, period });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "series times must increase strictly".into(),
        ));
    }

    let mut cumulative = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 1..times.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
        cumulative.push(acc);
    }
    let integral_to = |t: f64| -> f64 {
        let j = match times.partition_point(|&s| s <= t) {
            0 => 0,
            k if k >= times.len() => times.len() - 2,
            k => k - 1,
        };
        let dt = t - times[j];
        let slope = (values[j + 1] - values[j]) / (times[j + 1] - times[j]);
        cumulative[j] + values[j] * dt + 0.5 * slope * dt * dt
    };

    let (t0, t1) = (times[0], times[times.len() - 1]);
    let half = 0.5 * period;
    let mut out_t = Vec::new();
    let mut out_v = Vec::new();
    for &t in times {
        if t - half < t0 - slack || t + half > t1 + slack {
            continue;
        }
        let lo = (t - half).max(t0);
        let hi = (t + half).min(t1);
        out_t.push(t);
        out_v.push((integral_to(hi) - integral_to(lo)) / period);
    }
    Ok((out_t, out_v))
}

/// Time integral of density frames (trapezoid rule), scaled to peak 1.
pub fn accumulated_density(times: &[f64], frames: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = frames.first() else {
        return Err(Error::InvalidParameter(
            "at least one frame is required".into(),
        ));
    };
    if times.len() != frames.len() {
        return Err(Error::ShapeMismatch {
            expected: (frames.len(), 1),
            found: (times.len(), 1),
        });
    }
    let len = first.len();
    if let Some(bad) = frames.iter().find(|f| f.len() != len) {
        return Err(Error::ShapeMismatch {
            expected: (len, 1),
            found: (bad.len(), 1),
        });
    }
    let mut acc = if frames.len() == 1 {
        first.clone()
    } else {
        let mut acc = vec![0.0; len];
        for k in 1..frames.len() {
            let dt = times[k] - times[k - 1];
            for (a, (p, q)) in acc.iter_mut().zip(frames[k - 1].iter().zip(&frames[k])) {
                *a += 0.5 * dt * (p + q);
            }
        }
        acc
    };
    let peak = acc.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak > 0.0 {
        acc.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(acc)
}

/// One row of a [`TimeSeries`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub centroid: [f64; 2],
    pub dispersion: f64,
    /// `|sigma|` along each axis.
    pub coherence: [f64; 2],
    pub leakage: f64,
}

/// Per-time measurements of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    records: Vec<Record>,
}

impl TimeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, record: Record) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(time > last) {
                return Err(Error::InvalidParameter(format!(
                    "time series must increase strictly ({time} after {last})"
                )));
            }
        }
        if !(record.dispersion >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "negative dispersion {}",
                record.dispersion
            )));
        }
        self.times.push(time);
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn centroid(&self, axis: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.centroid[axis]).collect()
    }

    pub fn dispersion(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.dispersion).collect()
    }
}

/// Shape summary of a closed planar curve tested for the figure-eight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FigureEight {
    /// Interior close approaches to the starting point.
    pub returns: usize,
    /// Sample index of the deepest interior return.
    pub crossing: usize,
    /// Distance of that return from the start.
    pub crossing_distance: f64,
    /// Shoelace areas of the two lobes split at the crossing.
    pub lobe_areas: [f64; 2],
    /// Mean x of each lobe relative to the start.
    pub lobe_centers: [f64; 2],
}

impl FigureEight {
    /// Two lobes of opposite orientation on opposite sides, joined at a
    /// single crossing through the start.
    pub fn is_figure_eight(&self) -> bool {
        self.returns == 1
            && self.lobe_areas[0] * self.lobe_areas[1] < 0.0
            && self.lobe_centers[0] * self.lobe_centers[1] < 0.0
    }
}

/// Analyses one period of a curve starting and ending near its
/// self-crossing. A return is an interior local minimum of the distance
/// to the start below `tolerance`, away from the ends by a tenth of the
/// samples.
pub fn figure_eight(points: &[[f64; 2]], tolerance: f64) -> Result<FigureEight> {
    let n = points.len();
    if n < 20 {
        return Err(Error::InvalidParameter(format!(
            "{n} points are too few for a shape test"
        )));
    }
    let o = points[0];
    let dist: Vec<f64> = points
        .iter()
        .map(|p| ((p[0] - o[0]).powi(2) + (p[1] - o[1]).powi(2)).sqrt())
        .collect();
    let guard = n / 10;
    let mut returns = 0;
    let mut crossing = n / 2;
    let mut best = f64::INFINITY;
    let mut i = guard.max(1);
    while i + 1 < n - guard {
        if dist[i] < tolerance && dist[i] <= dist[i - 1] && dist[i] < dist[i + 1] {
            returns += 1;
            if dist[i] < best {
                best = dist[i];
                crossing = i;
            }
            // skip the rest of this approach
            while i + 1 < n - guard && dist[i] < tolerance {
                i += 1;
            }
        }
        i += 1;
    }
    let lobe = |pts: &[[f64; 2]]| {
        let m = pts.len();
        let area = 0.5
            * (0..m)
                .map(|k| {
                    let (a, b) = (pts[k], pts[(k + 1) % m]);
                    a[0] * b[1] - b[0] * a[1]
                })
                .sum::<f64>();
        let cx = pts.iter().map(|p| p[0] - o[0]).sum::<f64>() / m as f64;
        (area, cx)
    };
    let (a0, c0) = lobe(&points[..=crossing]);
    let (a1, c1) = lobe(&points[crossing..]);
    Ok(FigureEight {
        returns,
        crossing,
        crossing_distance: if best.is_finite() {
            best
        } else {
            dist[crossing]
        },
        lobe_areas: [a0, a1],
        lobe_centers: [c0, c1],
    })
}
