// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Resonant amplitude modulation `A_u(t) = alpha_u(t) sin(omega_B t + beta_u)`
//! and the inversion of the drift law that turns a 2D path into envelopes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::WannierStarkBasis;
use crate::dynamics::Coherence;
use crate::error::{Error, Result};
use crate::lattice::Axis;

/// Largest admissible `|alpha|` unless configured otherwise.
pub const DEFAULT_ALPHA_MAX: f64 = 1.0;
/// The slow-envelope rule requires `|alpha'| / max(|alpha|, gate) <= omega_B / factor`.
pub const DEFAULT_SLOWNESS_FACTOR: f64 = 20.0;
/// Fraction of a compiled segment spent on each raised-cosine ramp.
pub const DEFAULT_RAMP_FRACTION: f64 = 1.0 / 3.0;
/// Arc envelopes are sampled this many times per Bloch period.
pub const DEFAULT_ARC_SAMPLES_PER_PERIOD: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialProfile {
    #[default]
    None,
    /// `sin(k u)` along the drive's own axis.
    Beat { k: f64 },
    /// `-sin(k y)` on the x drive and `sin(k x)` on the y drive.
    Crossed { k: f64 },
}

/// How the carrier term of a profiled drive is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierReading {
    /// `sin(omega_B t + beta)`
    #[default]
    Phase,
    /// `sin(omega_B t) + beta`
    Literal,
}

/// One piece of a piecewise envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Piece {
    /// Plateau `level` entered and left through raised-cosine ramps of
    /// length `ramp` (0 gives a hard step).
    Level {
        duration: f64,
        level: f64,
        ramp: f64,
    },
    /// Uniform samples (both endpoints included), linearly interpolated.
    Samples { duration: f64, values: Vec<f64> },
}

impl Piece {
    pub fn duration(&self) -> f64 {
        match self {
            Piece::Level { duration, .. } | Piece::Samples { duration, .. } => *duration,
        }
    }

    fn value(&self, tau: f64) -> f64 {
        match self {
            Piece::Level {
                duration,
                level,
                ramp,
            } => level * taper(tau, *duration, *ramp),
            Piece::Samples { duration, values } => {
                let (j, w) = sample_cell(tau, *duration, values.len());
                values[j] * (1.0 - w) + values[j + 1] * w
            }
        }
    }

    fn derivative(&self, tau: f64) -> f64 {
        match self {
            Piece::Level {
                duration,
                level,
                ramp,
            } => {
                let (t, r) = (*duration, *ramp);
                if r <= 0.0 {
                    0.0
                } else if tau < r {
                    level * PI / (2.0 * r) * (PI * tau / r).sin()
                } else if tau > t - r {
                    -level * PI / (2.0 * r) * (PI * (t - tau) / r).sin()
                } else {
                    0.0
                }
            }
            Piece::Samples { duration, values } => {
                let (j, _) = sample_cell(tau, *duration, values.len());
                let step = duration / (values.len() - 1) as f64;
                (values[j + 1] - values[j]) / step
            }
        }
    }

    /// `int_0^tau alpha`.
    fn integral(&self, tau: f64) -> f64 {
        match self {
            Piece::Level {
                duration,
                level,
                ramp,
            } => level * taper_integral(tau, *duration, *ramp),
            Piece::Samples { duration, values } => {
                let step = duration / (values.len() - 1) as f64;
                let (j, w) = sample_cell(tau, *duration, values.len());
                let full: f64 = values[..=j]
                    .windows(2)
                    .map(|p| 0.5 * (p[0] + p[1]) * step)
                    .sum();
                let mid = values[j] * (1.0 - w) + values[j + 1] * w;
                full + 0.5 * (values[j] + mid) * w * step
            }
        }
    }

    fn end_values(&self) -> (f64, f64) {
        match self {
            Piece::Level { level, ramp, .. } => {
                if *ramp > 0.0 {
                    (0.0, 0.0)
                } else {
                    (*level, *level)
                }
            }
            Piece::Samples { values, .. } => (values[0], values[values.len() - 1]),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Piece::Level {
                duration,
                level,
                ramp,
            } => {
                *duration > 0.0
                    && level.is_finite()
                    && *ramp >= 0.0
                    && 2.0 * ramp <= duration * (1.0 + 1e-12)
            }
            Piece::Samples { duration, values } => {
                *duration > 0.0 && values.len() >= 2 && values.iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "malformed envelope piece {self:?}"
            )))
        }
    }
}

fn sample_cell(tau: f64, duration: f64, n: usize) -> (usize, f64) {
    let pos = (tau / duration).clamp(0.0, 1.0) * (n - 1) as f64;
    let j = (pos.floor() as usize).min(n - 2);
    (j, pos - j as f64)
}

/// Unit plateau with raised-cosine edges of length `ramp` on `[0, duration]`.
pub fn taper(tau: f64, duration: f64, ramp: f64) -> f64 {
    if ramp <= 0.0 {
        1.0
    } else if tau < ramp {
        0.5 * (1.0 - (PI * tau / ramp).cos())
    } else if tau > duration - ramp {
        0.5 * (1.0 - (PI * (duration - tau) / ramp).cos())
    } else {
        1.0
    }
}

/// `int_0^tau taper`; equals `duration - ramp` at `tau = duration`.
pub fn taper_integral(tau: f64, duration: f64, ramp: f64) -> f64 {
    let up = |s: f64| 0.5 * s - ramp / (2.0 * PI) * (PI * s / ramp).sin();
    if ramp <= 0.0 {
        tau
    } else if tau < ramp {
        up(tau)
    } else if tau > duration - ramp {
        (duration - ramp) - up(duration - tau)
    } else {
        0.5 * ramp + (tau - ramp)
    }
}

/// Slowly varying amplitude `alpha(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Constant {
        level: f64,
    },
    /// `amplitude cos(omega t + phase)`.
    Harmonic {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// Consecutive pieces starting at `t = 0`; zero after the last one.
    Pieces {
        pieces: Vec<Piece>,
    },
}

impl Envelope {
    pub fn zero() -> Self {
        Envelope::Constant { level: 0.0 }
    }

    fn locate(pieces: &[Piece], t: f64) -> Option<(usize, f64)> {
        let mut start = 0.0;
        for (i, p) in pieces.iter().enumerate() {
            let end = start + p.duration();
            if t < end || i + 1 == pieces.len() && t <= end {
                return Some((i, (t - start).max(0.0)));
            }
            start = end;
        }
        None
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { level } => *level,
            Envelope::Harmonic {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).cos(),
            Envelope::Pieces { pieces } => match Self::locate(pieces, t) {
                Some((i, tau)) => pieces[i].value(tau),
                None => 0.0,
            },
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { .. } => 0.0,
            Envelope::Harmonic {
                amplitude,
                omega,
                phase,
            } => -amplitude * omega * (omega * t + phase).sin(),
            Envelope::Pieces { pieces } => match Self::locate(pieces, t) {
                Some((i, tau)) => pieces[i].derivative(tau),
                None => 0.0,
            },
        }
    }

    /// `int_0^t alpha(t') dt'`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { level } => level * t,
            Envelope::Harmonic {
                amplitude,
                omega,
                phase,
            } => {
                if *omega == 0.0 {
                    amplitude * phase.cos() * t
                } else {
                    amplitude / omega * ((omega * t + phase).sin() - phase.sin())
                }
            }
            Envelope::Pieces { pieces } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for p in pieces {
                    let d = p.duration();
                    if t < start + d {
                        return acc + p.integral((t - start).max(0.0));
                    }
                    acc += p.integral(d);
                    start += d;
                }
                acc
            }
        }
    }

    /// Same envelope with every time stretched by `period` (durations and
    /// ramps multiplied, angular frequencies divided).
    pub fn rescaled(&self, period: f64) -> Envelope {
        match self {
            Envelope::Constant { level } => Envelope::Constant { level: *level },
            Envelope::Harmonic {
                amplitude,
                omega,
                phase,
            } => Envelope::Harmonic {
                amplitude: *amplitude,
                omega: omega / period,
                phase: *phase,
            },
            Envelope::Pieces { pieces } => Envelope::Pieces {
                pieces: pieces
                    .iter()
                    .map(|p| match p {
                        Piece::Level {
                            duration,
                            level,
                            ramp,
                        } => Piece::Level {
                            duration: duration * period,
                            level: *level,
                            ramp: ramp * period,
                        },
                        Piece::Samples { duration, values } => Piece::Samples {
                            duration: duration * period,
                            values: values.clone(),
                        },
                    })
                    .collect(),
            },
        }
    }

    /// Support of a piecewise envelope; `None` for envelopes defined for all `t`.
    pub fn duration(&self) -> Option<f64> {
        match self {
            Envelope::Pieces { pieces } => Some(pieces.iter().map(Piece::duration).sum()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Envelope::Constant { level } if level.is_finite() => Ok(()),
            Envelope::Harmonic {
                amplitude,
                omega,
                phase,
            } if amplitude.is_finite() && omega.is_finite() && phase.is_finite() => Ok(()),
            Envelope::Pieces { pieces } => pieces.iter().try_for_each(Piece::validate),
            _ => Err(Error::InvalidParameter(format!(
                "non-finite envelope {self:?}"
            ))),
        }
    }

    /// Jumps `|alpha(t+) - alpha(t-)|` at piece boundaries inside `[0, t_end]`.
    fn jumps(&self, t_end: f64) -> Vec<(f64, f64)> {
        let Envelope::Pieces { pieces } = self else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut t = 0.0;
        let mut prev_end: Option<f64> = None;
        for p in pieces {
            let (a, b) = p.end_values();
            if let Some(e) = prev_end {
                out.push((t, (a - e).abs()));
            }
            t += p.duration();
            prev_end = Some(b);
        }
        if let Some(e) = prev_end {
            if t_end > t {
                out.push((t, e.abs()));
            }
        }
        out.retain(|&(at, _)| at <= t_end);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveWaveform {
    pub axis: Axis,
    pub envelope: Envelope,
    /// `beta_u`.
    pub phase: f64,
    /// `omega_B` of the axis.
    pub carrier: f64,
    pub profile: SpatialProfile,
    #[serde(default)]
    pub reading: CarrierReading,
}

impl DriveWaveform {
    pub fn new(axis: Axis, envelope: Envelope, phase: f64, carrier: f64) -> Self {
        DriveWaveform {
            axis,
            envelope,
            phase,
            carrier,
            profile: SpatialProfile::None,
            reading: CarrierReading::Phase,
        }
    }

    pub fn zero(axis: Axis, carrier: f64) -> Self {
        Self::new(axis, Envelope::zero(), 0.0, carrier)
    }

    pub fn with_profile(mut self, profile: SpatialProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.envelope.value(t)
    }

    pub fn carrier_value(&self, t: f64) -> f64 {
        match self.reading {
            CarrierReading::Phase => (self.carrier * t + self.phase).sin(),
            CarrierReading::Literal => (self.carrier * t).sin() + self.phase,
        }
    }

    /// `alpha(t) * carrier(t)`, before the spatial profile.
    pub fn amplitude(&self, t: f64) -> f64 {
        self.alpha(t) * self.carrier_value(t)
    }

    /// Profile factor at drive-frame coordinates (`u = x - 1/2`) along the own
    /// and the other axis.
    pub fn profile_factor(&self, own: f64, other: f64) -> f64 {
        match self.profile {
            SpatialProfile::None => 1.0,
            SpatialProfile::Beat { k } => (k * own).sin(),
            SpatialProfile::Crossed { k } => match self.axis {
                Axis::X => -(k * other).sin(),
                Axis::Y => (k * other).sin(),
            },
        }
    }

    /// Crossed drives couple the two axes.
    pub fn is_separable(&self) -> bool {
        !matches!(self.profile, SpatialProfile::Crossed { .. })
    }

    /// Profile value whose diagonal phase is factored out of the coefficients:
    /// 1 for uniform drives, 0 (no common phase) for profiled ones.
    pub fn uniform_reference(&self) -> f64 {
        match self.profile {
            SpatialProfile::None => 1.0,
            _ => 0.0,
        }
    }

    /// Phase of the resonant component seen by the nearest-neighbor dynamics.
    pub fn rwa_phase(&self) -> f64 {
        match self.reading {
            CarrierReading::Phase => self.phase,
            CarrierReading::Literal => 0.0,
        }
    }

    /// `int_0^t alpha`.
    pub fn alpha_integral(&self, t: f64) -> f64 {
        self.envelope.integral(t)
    }

    pub fn is_zero(&self) -> bool {
        match &self.envelope {
            Envelope::Constant { level } => *level == 0.0,
            Envelope::Harmonic { amplitude, .. } => *amplitude == 0.0,
            Envelope::Pieces { pieces } => pieces.iter().all(|p| match p {
                Piece::Level { level, .. } => *level == 0.0,
                Piece::Samples { values, .. } => values.iter().all(|v| *v == 0.0),
            }),
        }
    }
}

/// Operational slow-envelope rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlownessRule {
    pub factor: f64,
    /// Floor on `|alpha|` in the log-derivative, so zero crossings stay finite.
    pub gate: f64,
    pub alpha_max: f64,
}

impl Default for SlownessRule {
    fn default() -> Self {
        SlownessRule {
            factor: DEFAULT_SLOWNESS_FACTOR,
            gate: DEFAULT_ALPHA_MAX,
            alpha_max: DEFAULT_ALPHA_MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlownessReport {
    pub max_ratio: f64,
    /// Time of the largest ratio.
    pub worst_time: f64,
    pub threshold: f64,
    pub max_amplitude: f64,
    pub alpha_max: f64,
    pub slow: bool,
    pub bounded: bool,
}

impl SlownessReport {
    pub fn passed(&self) -> bool {
        self.slow && self.bounded
    }
}

/// Samples the envelope on `[0, t_end]` and reports slowness and amplitude.
pub fn validate(waveform: &DriveWaveform, omega_b: f64, t_end: f64) -> SlownessReport {
    validate_with(waveform, omega_b, t_end, &SlownessRule::default())
}

pub fn validate_with(
    waveform: &DriveWaveform,
    omega_b: f64,
    t_end: f64,
    rule: &SlownessRule,
) -> SlownessReport {
    let env = &waveform.envelope;
    let threshold = omega_b / rule.factor;
    let period = 2.0 * PI / omega_b;
    let steps = ((t_end / period) * 200.0).ceil().max(1.0) as usize;
    let mut max_ratio: f64 = 0.0;
    let mut worst_time = 0.0;
    let mut max_amplitude: f64 = 0.0;
    for i in 0..=steps {
        let t = t_end * i as f64 / steps as f64;
        let a = env.value(t);
        let ratio = env.derivative(t).abs() / a.abs().max(rule.gate);
        max_amplitude = max_amplitude.max(a.abs());
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_time = t;
        }
    }
    for (t, jump) in env.jumps(t_end) {
        if jump > 1e-12 {
            max_ratio = f64::INFINITY;
            worst_time = t;
        }
    }
    SlownessReport {
        max_ratio,
        worst_time,
        threshold,
        max_amplitude,
        alpha_max: rule.alpha_max,
        // the analytic maximum of a raised-cosine ramp sits exactly on the
        // threshold for the presets; allow roundoff
        slow: max_ratio <= threshold * (1.0 + 1e-9),
        bounded: max_amplitude <= rule.alpha_max * (1.0 + 1e-12),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSegment {
    /// Straight line; `duration` in Bloch periods.
    Line {
        from: [f64; 2],
        to: [f64; 2],
        duration: f64,
    },
    /// Circular arc starting at `start_angle`, sweeping `span` radians
    /// (positive is counterclockwise).
    Arc {
        center: [f64; 2],
        radius: f64,
        start_angle: f64,
        span: f64,
        duration: f64,
    },
    Dwell {
        duration: f64,
    },
}

impl PathSegment {
    pub fn duration(&self) -> f64 {
        match self {
            PathSegment::Line { duration, .. }
            | PathSegment::Arc { duration, .. }
            | PathSegment::Dwell { duration } => *duration,
        }
    }

    fn endpoints(&self) -> Option<([f64; 2], [f64; 2])> {
        match *self {
            PathSegment::Line { from, to, .. } => Some((from, to)),
            PathSegment::Arc {
                center,
                radius,
                start_angle,
                span,
                ..
            } => Some((
                arc_point(center, radius, start_angle),
                arc_point(center, radius, start_angle + span),
            )),
            PathSegment::Dwell { .. } => None,
        }
    }
}

fn arc_point(c: [f64; 2], r: f64, theta: f64) -> [f64; 2] {
    [c[0] + r * theta.cos(), c[1] + r * theta.sin()]
}

/// Ordered chain of path segments in well units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub segments: Vec<PathSegment>,
}

impl PathSpec {
    /// Starting point (origin when the path has only dwells).
    pub fn start(&self) -> [f64; 2] {
        self.segments
            .iter()
            .find_map(|s| s.endpoints().map(|e| e.0))
            .unwrap_or([0.0, 0.0])
    }

    /// Total duration in Bloch periods.
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(PathSegment::duration).sum()
    }

    /// `(time in Bloch periods, point)` at every segment boundary.
    pub fn waypoints(&self) -> Vec<(f64, [f64; 2])> {
        let mut pos = self.start();
        let mut t = 0.0;
        let mut out = vec![(0.0, pos)];
        for s in &self.segments {
            t += s.duration();
            if let Some((_, end)) = s.endpoints() {
                pos = end;
            }
            out.push((t, pos));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidParameter("path has no segments".into()));
        }
        let mut pos = self.start();
        for (i, s) in self.segments.iter().enumerate() {
            let d = s.duration();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "segment {i} has non-positive duration {d}"
                )));
            }
            if let PathSegment::Arc { radius, span, .. } = s {
                if !(*radius > 0.0) || !span.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "segment {i} is a degenerate arc"
                    )));
                }
            }
            if let Some((from, to)) = s.endpoints() {
                let gap = ((from[0] - pos[0]).powi(2) + (from[1] - pos[1]).powi(2)).sqrt();
                if gap > 1e-9 {
                    return Err(Error::PathDiscontinuous { segment: i, gap });
                }
                pos = to;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileOptions {
    pub ramp_fraction: f64,
    pub arc_samples_per_period: usize,
    pub rule: SlownessRule,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            ramp_fraction: DEFAULT_RAMP_FRACTION,
            arc_samples_per_period: DEFAULT_ARC_SAMPLES_PER_PERIOD,
            rule: SlownessRule::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledDrive {
    pub x: DriveWaveform,
    pub y: DriveWaveform,
    /// Nominal (unsmoothed) per-segment levels `delta / (T M_1 |sigma|)`;
    /// zero for dwells, mean level for arcs.
    pub levels: Vec<[f64; 2]>,
    /// Total duration in time units.
    pub duration: f64,
}

/// Inverts the drift law for a path, with coherence `sigma[u]` on axis `u`.
pub fn compile(
    path: &PathSpec,
    basis_x: &WannierStarkBasis,
    basis_y: &WannierStarkBasis,
    sigma: [Coherence; 2],
) -> Result<CompiledDrive> {
    compile_raw(
        path,
        [basis_x.m1(), basis_y.m1()],
        [basis_x.bloch_frequency(), basis_y.bloch_frequency()],
        sigma,
        &CompileOptions::default(),
    )
}

/// [`compile`] from bare coupling moments and Bloch frequencies. Segment
/// durations are in units of the x-axis Bloch period.
pub fn compile_raw(
    path: &PathSpec,
    m1: [f64; 2],
    omega_b: [f64; 2],
    sigma: [Coherence; 2],
    opts: &CompileOptions,
) -> Result<CompiledDrive> {
    path.validate()?;
    let s = [sigma[0].value.norm(), sigma[1].value.norm()];
    if s.iter().any(|&v| v < 1e-12) {
        return Err(Error::NoCoherence);
    }
    let f = opts.ramp_fraction;
    if !(0.0..=0.5).contains(&f) {
        return Err(Error::InvalidParameter(format!(
            "ramp fraction {f} outside [0, 1/2]"
        )));
    }
    // zero-diffusion phase: Re(sigma e^{i beta}) = |sigma|
    let beta = [-sigma[0].value.arg(), -sigma[1].value.arg()];
    let period = 2.0 * PI / omega_b[0];
    let mut pieces: [Vec<Piece>; 2] = [Vec::new(), Vec::new()];
    let mut levels = Vec::new();
    let mut pos = path.start();

    for (index, seg) in path.segments.iter().enumerate() {
        let duration = seg.duration() * period;
        let ramp = f * duration;
        let plateau_scale = 1.0 / (1.0 - f);
        match *seg {
            PathSegment::Dwell { .. } => {
                for p in pieces.iter_mut() {
                    p.push(Piece::Level {
                        duration,
                        level: 0.0,
                        ramp,
                    });
                }
                levels.push([0.0, 0.0]);
            }
            PathSegment::Line { from, to, .. } => {
                let mut lv = [0.0; 2];
                for u in 0..2 {
                    let a = (to[u] - from[u]) / (duration * m1[u] * s[u]);
                    let b = a * plateau_scale;
                    check_level(index, b, ramp, omega_b[u], opts)?;
                    lv[u] = a;
                    pieces[u].push(Piece::Level {
                        duration,
                        level: b,
                        ramp,
                    });
                }
                levels.push(lv);
                pos = to;
            }
            PathSegment::Arc {
                center,
                radius,
                start_angle,
                span,
                ..
            } => {
                let n =
                    ((seg.duration() * opts.arc_samples_per_period as f64).ceil() as usize).max(2);
                let norm = taper_integral(duration, duration, ramp);
                let mut lv = [0.0; 2];
                for u in 0..2 {
                    let values: Vec<f64> = (0..=n)
                        .map(|j| {
                            let t = duration * j as f64 / n as f64;
                            let theta =
                                start_angle + span * taper_integral(t, duration, ramp) / norm;
                            let speed = radius * span * taper(t, duration, ramp) / norm;
                            let v = if u == 0 {
                                -speed * theta.sin()
                            } else {
                                speed * theta.cos()
                            };
                            v / (m1[u] * s[u])
                        })
                        .collect();
                    let piece = Piece::Samples { duration, values };
                    check_samples(index, &piece, omega_b[u], opts)?;
                    let end = arc_point(center, radius, start_angle + span);
                    lv[u] = (end[u] - pos[u]) / (duration * m1[u] * s[u]);
                    pieces[u].push(piece);
                }
                levels.push(lv);
                pos = arc_point(center, radius, start_angle + span);
            }
        }
    }

    let [px, py] = pieces;
    let duration = path.duration() * period;
    let x = DriveWaveform::new(
        Axis::X,
        Envelope::Pieces { pieces: px },
        beta[0],
        omega_b[0],
    );
    let y = DriveWaveform::new(
        Axis::Y,
        Envelope::Pieces { pieces: py },
        beta[1],
        omega_b[1],
    );
    Ok(CompiledDrive {
        x,
        y,
        levels,
        duration,
    })
}

fn check_level(
    segment: usize,
    level: f64,
    ramp: f64,
    omega_b: f64,
    opts: &CompileOptions,
) -> Result<()> {
    if level.abs() > opts.rule.alpha_max {
        return Err(Error::PathTooFast {
            segment,
            quantity: "|alpha|",
            required: level.abs(),
            limit: opts.rule.alpha_max,
        });
    }
    if level != 0.0 {
        let slope = if ramp > 0.0 {
            level.abs() * PI / (2.0 * ramp)
        } else {
            f64::INFINITY
        };
        let ratio = slope / level.abs().max(opts.rule.gate);
        let limit = omega_b / opts.rule.factor;
        if ratio > limit * (1.0 + 1e-9) {
            return Err(Error::PathTooFast {
                segment,
                quantity: "slowness ratio",
                required: ratio,
                limit,
            });
        }
    }
    Ok(())
}

fn check_samples(segment: usize, piece: &Piece, omega_b: f64, opts: &CompileOptions) -> Result<()> {
    let Piece::Samples { duration, values } = piece else {
        unreachable!("arc pieces are sampled")
    };
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > opts.rule.alpha_max {
        return Err(Error::PathTooFast {
            segment,
            quantity: "|alpha|",
            required: peak,
            limit: opts.rule.alpha_max,
        });
    }
    let step = duration / (values.len() - 1) as f64;
    let ratio = values
        .windows(2)
        .map(|w| ((w[1] - w[0]) / step).abs() / w[0].abs().max(w[1].abs()).max(opts.rule.gate))
        .fold(0.0, f64::max);
    let limit = omega_b / opts.rule.factor;
    if ratio > limit * (1.0 + 1e-9) {
        return Err(Error::PathTooFast {
            segment,
            quantity: "slowness ratio",
            required: ratio,
            limit,
        });
    }
    Ok(())
}

/// Drift velocity law `v = M_1 alpha Re(sigma e^{i beta})` times the profile
/// factor, for the two axes at position `pos` (well units).
fn drift(drive: &DriveWaveform, m1: f64, sigma: Complex64, pos: [f64; 2], t: f64) -> f64 {
    let (own, other) = match drive.axis {
        Axis::X => (pos[0], pos[1]),
        Axis::Y => (pos[1], pos[0]),
    };
    let c = (sigma * Complex64::from_polar(1.0, drive.rwa_phase())).re;
    m1 * drive.alpha(t) * c * drive.profile_factor(own, other)
}

/// Integrates the drift law from `start` and returns the centroid at each of
/// `times` (ascending).
pub fn predicted_path(
    drive_x: &DriveWaveform,
    drive_y: &DriveWaveform,
    m1: [f64; 2],
    sigma: [Coherence; 2],
    start: [f64; 2],
    times: &[f64],
) -> Vec<[f64; 2]> {
    let uniform =
        drive_x.profile == SpatialProfile::None && drive_y.profile == SpatialProfile::None;
    if uniform {
        let drives = [drive_x, drive_y];
        return times
            .iter()
            .map(|&t| {
                let mut p = start;
                for u in 0..2 {
                    let c = (sigma[u].value * Complex64::from_polar(1.0, drives[u].rwa_phase())).re;
                    p[u] += m1[u] * c * drives[u].alpha_integral(t);
                }
                p
            })
            .collect();
    }

    let rhs = |p: [f64; 2], t: f64| -> [f64; 2] {
        [
            drift(drive_x, m1[0], sigma[0].value, p, t),
            drift(drive_y, m1[1], sigma[1].value, p, t),
        ]
    };
    let max_step = 2.0 * PI / drive_x.carrier.max(drive_y.carrier) / 10.0;
    let mut p = start;
    let mut t = times.first().copied().unwrap_or(0.0).min(0.0);
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let h = (target - t).min(max_step);
            let k1 = rhs(p, t);
            let k2 = rhs(add(p, k1, h / 2.0), t + h / 2.0);
            let k3 = rhs(add(p, k2, h / 2.0), t + h / 2.0);
            let k4 = rhs(add(p, k3, h), t + h);
            for u in 0..2 {
                p[u] += h / 6.0 * (k1[u] + 2.0 * k2[u] + 2.0 * k3[u] + k4[u]);
            }
            t += h;
        }
        out.push(p);
    }
    out
}

fn add(p: [f64; 2], k: [f64; 2], h: f64) -> [f64; 2] {
    [p[0] + h * k[0], p[1] + h * k[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const OMEGA: f64 = 0.2;
    const M1: f64 = 0.034;

    fn tb() -> f64 {
        2.0 * PI / OMEGA
    }

    fn real_sigma(s: f64) -> Coherence {
        Coherence {
            value: Complex64::new(s, 0.0),
        }
    }

    fn square_path(side: f64) -> PathSpec {
        let c = [
            [0.0, 0.0],
            [side, 0.0],
            [side, side],
            [0.0, side],
            [0.0, 0.0],
        ];
        PathSpec {
            segments: (0..4)
                .map(|i| PathSegment::Line {
                    from: c[i],
                    to: c[i + 1],
                    duration: 15.0,
                })
                .collect(),
        }
    }

    #[test]
    fn taper_integral_matches_quadrature() {
        let (d, r) = (10.0, 3.0);
        let n = 20000;
        let mut acc = 0.0;
        for i in 0..n {
            let t = d * (i as f64 + 0.5) / n as f64;
            acc += taper(t, d, r) * d / n as f64;
            if i % 1000 == 999 {
                let t1 = d * (i + 1) as f64 / n as f64;
                assert_abs_diff_eq!(acc, taper_integral(t1, d, r), epsilon = 1e-7);
            }
        }
        assert_abs_diff_eq!(taper_integral(d, d, r), d - r, epsilon = 1e-12);
    }

    #[test]
    fn piecewise_integral_and_derivative() {
        let env = Envelope::Pieces {
            pieces: vec![
                Piece::Level {
                    duration: 6.0,
                    level: 2.0,
                    ramp: 2.0,
                },
                Piece::Samples {
                    duration: 4.0,
                    values: vec![0.0, 1.0, 1.0, 0.0],
                },
            ],
        };
        assert_abs_diff_eq!(env.integral(6.0), 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(env.integral(10.0), 8.0 + 8.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(env.integral(25.0), env.integral(10.0), epsilon = 1e-12);
        assert_eq!(env.value(12.0), 0.0);
        let h = 1e-6;
        for &t in &[0.5, 1.9, 4.5, 7.0, 9.5] {
            let fd = (env.value(t + h) - env.value(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, env.derivative(t), epsilon = 1e-6);
            let fi = (env.integral(t + h) - env.integral(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(fi, env.value(t), epsilon = 1e-6);
        }
    }

    #[test]
    fn constant_envelope_is_slow() {
        let w = DriveWaveform::new(Axis::X, Envelope::Constant { level: 1.0 }, 0.0, OMEGA);
        let r = validate(&w, OMEGA, 15.0 * tb());
        assert_eq!(r.max_ratio, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn slow_cosine_passes_with_gate() {
        let omega = OMEGA / 250.0;
        let w = DriveWaveform::new(
            Axis::X,
            Envelope::Harmonic {
                amplitude: 1.0,
                omega,
                phase: 0.0,
            },
            0.0,
            OMEGA,
        );
        let r = validate(&w, OMEGA, 250.0 * tb());
        assert!(r.passed(), "{r:?}");
        assert!(r.max_ratio <= omega * (1.0 + 1e-12));
    }

    #[test]
    fn hard_step_fails() {
        let w = DriveWaveform::new(
            Axis::X,
            Envelope::Pieces {
                pieces: vec![
                    Piece::Level {
                        duration: tb(),
                        level: 0.5,
                        ramp: 0.0,
                    },
                    Piece::Level {
                        duration: tb(),
                        level: 0.0,
                        ramp: 0.0,
                    },
                ],
            },
            0.0,
            OMEGA,
        );
        let r = validate(&w, OMEGA, 2.0 * tb());
        assert!(r.max_ratio.is_infinite());
        assert!(!r.passed());
    }

    #[test]
    fn line_inverts_drift_law() {
        let path = PathSpec {
            segments: vec![PathSegment::Line {
                from: [0.0, 0.0],
                to: [6.0, -3.0],
                duration: 20.0,
            }],
        };
        let c = compile_raw(
            &path,
            [M1, M1],
            [OMEGA, OMEGA],
            [real_sigma(0.9); 2],
            &CompileOptions::default(),
        )
        .unwrap();
        let t = 20.0 * tb();
        assert_abs_diff_eq!(c.levels[0][0], 6.0 / (t * M1 * 0.9), epsilon = 1e-15);
        assert_abs_diff_eq!(c.levels[0][1], -3.0 / (t * M1 * 0.9), epsilon = 1e-15);
        assert_abs_diff_eq!(c.x.alpha_integral(t) * M1 * 0.9, 6.0, epsilon = 1e-12);
        assert!(validate(&c.x, OMEGA, t).passed());
    }

    #[test]
    fn dwell_is_zero() {
        let path = PathSpec {
            segments: vec![PathSegment::Dwell { duration: 3.0 }],
        };
        let c = compile_raw(
            &path,
            [M1, M1],
            [OMEGA, OMEGA],
            [real_sigma(0.9); 2],
            &CompileOptions::default(),
        )
        .unwrap();
        assert!(c.x.is_zero() && c.y.is_zero());
        assert_eq!(c.levels, vec![[0.0, 0.0]]);
    }

    #[test]
    fn square_closes_and_matches_schedule() {
        let side = 10.0 * tb() * M1 * 0.95;
        let c = compile_raw(
            &square_path(side),
            [M1, M1],
            [OMEGA, OMEGA],
            [real_sigma(0.95); 2],
            &CompileOptions::default(),
        )
        .unwrap();
        // nominal levels (+a, 0), (0, +a), (-a, 0), (0, -a)
        let a = c.levels[0][0];
        assert_abs_diff_eq!(a, 2.0 / 3.0, epsilon = 1e-12);
        let want = [[a, 0.0], [0.0, a], [-a, 0.0], [0.0, -a]];
        for (got, want) in c.levels.iter().zip(want) {
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-12);
            assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(c.duration, 60.0 * tb(), epsilon = 1e-9);
        let times: Vec<f64> = (0..=4).map(|i| 15.0 * tb() * i as f64).collect();
        let p = predicted_path(
            &c.x,
            &c.y,
            [M1, M1],
            [real_sigma(0.95); 2],
            [0.0, 0.0],
            &times,
        );
        let corners = [
            [0.0, 0.0],
            [side, 0.0],
            [side, side],
            [0.0, side],
            [0.0, 0.0],
        ];
        for (got, want) in p.iter().zip(corners) {
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-9);
            assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn too_fast_and_incoherent_paths_are_rejected() {
        let fast = square_path(40.0);
        assert!(matches!(
            compile_raw(
                &fast,
                [M1, M1],
                [OMEGA, OMEGA],
                [real_sigma(0.9); 2],
                &CompileOptions::default()
            ),
            Err(Error::PathTooFast { .. })
        ));
        assert!(matches!(
            compile_raw(
                &square_path(1.0),
                [M1, M1],
                [OMEGA, OMEGA],
                [real_sigma(0.0); 2],
                &CompileOptions::default()
            ),
            Err(Error::NoCoherence)
        ));
    }

    #[test]
    fn arc_reaches_its_endpoint() {
        let path = PathSpec {
            segments: vec![PathSegment::Arc {
                center: [0.0, 0.0],
                radius: 4.0,
                start_angle: -PI / 2.0,
                span: PI,
                duration: 20.0,
            }],
        };
        let c = compile_raw(
            &path,
            [M1, M1],
            [OMEGA, OMEGA],
            [real_sigma(0.9); 2],
            &CompileOptions::default(),
        )
        .unwrap();
        let t = 20.0 * tb();
        let p = predicted_path(
            &c.x,
            &c.y,
            [M1, M1],
            [real_sigma(0.9); 2],
            path.start(),
            &[0.5 * t, t],
        );
        assert!(
            ((p[0][0] - 4.0).abs()) < 0.05 && p[0][1].abs() < 0.05,
            "{p:?}"
        );
        assert!(
            p[1][0].abs() < 0.02 && (p[1][1] - 4.0).abs() < 0.02,
            "{p:?}"
        );
    }

    #[test]
    fn discontinuous_path_is_rejected() {
        let path = PathSpec {
            segments: vec![
                PathSegment::Line {
                    from: [0.0, 0.0],
                    to: [1.0, 0.0],
                    duration: 10.0,
                },
                PathSegment::Line {
                    from: [2.0, 0.0],
                    to: [3.0, 0.0],
                    duration: 10.0,
                },
            ],
        };
        assert!(matches!(
            path.validate(),
            Err(Error::PathDiscontinuous { segment: 1, .. })
        ));
    }

    #[test]
    fn beat_profile_prediction_is_linear_near_origin() {
        let k = 0.02;
        let w = DriveWaveform::new(Axis::X, Envelope::Constant { level: 1.0 }, 0.0, OMEGA)
            .with_profile(SpatialProfile::Beat { k });
        let zero = DriveWaveform::zero(Axis::Y, OMEGA);
        let dt = 1e-3;
        let p = predicted_path(&w, &zero, [M1, M1], [real_sigma(0.9); 2], [5.0, 0.0], &[dt]);
        let v = (p[0][0] - 5.0) / dt;
        assert_abs_diff_eq!(v, M1 * 0.9 * (k * 5.0).sin(), epsilon = 1e-8);
    }

    proptest! {
        #[test]
        fn doubling_durations_halves_levels(
            dx in -8.0f64..8.0, dy in -8.0f64..8.0, d in 20.0f64..40.0
        ) {
            let line = |d: f64| PathSpec { segments: vec![PathSegment::Line { from: [0.0, 0.0], to: [dx, dy], duration: d }] };
            let o = CompileOptions::default();
            let a = compile_raw(&line(d), [M1, M1], [OMEGA, OMEGA], [real_sigma(0.9); 2], &o).unwrap();
            let b = compile_raw(&line(2.0 * d), [M1, M1], [OMEGA, OMEGA], [real_sigma(0.9); 2], &o).unwrap();
            for u in 0..2 {
                prop_assert_eq!(b.levels[0][u] * 2.0, a.levels[0][u]);
            }
            let (t1, t2) = (0.37 * a.duration, 0.37 * b.duration);
            prop_assert!((2.0 * b.x.alpha(t2) - a.x.alpha(t1)).abs() <= 1e-14 * a.x.alpha(t1).abs().max(1e-300));
        }
    }
}
