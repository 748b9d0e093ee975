// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::lattice::Axis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no Wannier-Stark ladder on axis {axis}: tilt force must be positive (got {force})")]
    NoLadder { axis: Axis, force: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ladder identification failed: {0}")]
    LadderIdentification(String),

    #[error("multiple ladders entangled, refine grid (well {well}: intra-well gap {gap:.3e})")]
    LaddersEntangled { well: i64, gap: f64 },

    #[error("coupling moment order {p_max} exceeds the interior-well margin {margin}")]
    MomentRange { p_max: usize, margin: usize },

    #[error("norm drift {drift:.3e} exceeds {limit:.1e}: reduce step size")]
    StepSize { drift: f64, limit: f64 },

    #[error("wavepacket reached boundary at t = {time:.6}: enlarge box (edge probability {probability:.3e})")]
    BoundaryReached { time: f64, probability: f64 },

    #[error("coefficient window [{n_min}, {n_max}] exceeds the basis interior [{lo}, {hi}]")]
    WindowOutsideBasis {
        n_min: i64,
        n_max: i64,
        lo: i64,
        hi: i64,
    },

    #[error("non-separable drive: use propagate_2d_full")]
    NonSeparableDrive,

    #[error("no coherence: packet cannot be driven")]
    NoCoherence,

    #[error("path too fast: increase duration (segment {segment}: {quantity} = {required:.4e} exceeds {limit:.4e})")]
    PathTooFast {
        segment: usize,
        quantity: &'static str,
        required: f64,
        limit: f64,
    },

    #[error("path is discontinuous at segment {segment}: gap of {gap:.3e} lattice periods")]
    PathDiscontinuous { segment: usize, gap: f64 },

    #[error("unknown preset '{0}' (expected one of square, lissajous, beta_path, concentration, rotation)")]
    UnknownPreset(String),

    #[error("orientation undefined: density is nearly isotropic (eigenvalue ratio {ratio:.4})")]
    OrientationUndefined { ratio: f64 },

    #[error("series spans {span:.4} but at least one Bloch period ({period:.4}) is required")]
    SeriesTooShort { span: f64, period: f64 },

    #[error("inconsistent frame shapes: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("grid of {samples} samples exceeds the memory guard of {limit} samples")]
    MemoryGuard { samples: usize, limit: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid config: {0}")]
    ConfigValidation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
