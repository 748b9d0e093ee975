// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! The five reference experiments, as complete configs.

use std::f64::consts::PI;

use crate::config::{
    DriveConfig, Engine, ExperimentConfig, GridConfig, InitialConfig, LatticeConfig, RunConfig,
    WaveformConfig,
};
use crate::drive::{CarrierReading, Envelope, PathSegment, PathSpec, Piece, SpatialProfile};
use crate::error::{Error, Result};
use crate::observables::DispersionReference;

pub const NAMES: [&str; 5] = [
    "square",
    "lissajous",
    "beta_path",
    "concentration",
    "rotation",
];

/// Ramp (Bloch periods) that keeps a unit plateau within the slowness bound.
pub const UNIT_RAMP: f64 = 5.0;
/// Overmodulation period of the lissajous preset, in Bloch periods.
pub const LISSAJOUS_PERIOD: f64 = 250.0;
pub const CONCENTRATION_K: f64 = 0.02;
/// Packet offset from the origin along each axis in the concentration preset.
pub const CONCENTRATION_OFFSET: f64 = 16.0;
pub const ROTATION_K: f64 = 0.05;
/// Distance of the rotation center from the origin along each axis.
///
/// Besides the crossed coupling, each profile's gradient in the other
/// coordinate acts on the `M_0` part of the well as a force at the Bloch
/// frequency, which transports the packet uniformly by about `0.28 sigma`
/// wells per Bloch period. The drifts cancel the rotation field at
/// `tan(k u) = -c / M_1`, about 5 wells down each axis.
pub const ROTATION_CENTER_OFFSET: f64 = 5.0;

fn level(duration: f64, level: f64) -> Piece {
    Piece::Level {
        duration,
        level,
        ramp: UNIT_RAMP,
    }
}

fn waveform(envelope: Envelope, phase: f64, profile: SpatialProfile) -> WaveformConfig {
    WaveformConfig {
        envelope,
        phase,
        profile,
        reading: CarrierReading::Phase,
    }
}

fn explicit(x: WaveformConfig, y: WaveformConfig) -> DriveConfig {
    DriveConfig {
        x: Some(x),
        y: Some(y),
        ..DriveConfig::default()
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "square" => Ok(square()),
        "lissajous" => Ok(lissajous()),
        "beta_path" => Ok(beta_path()),
        "concentration" => Ok(concentration()),
        "rotation" => Ok(rotation()),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Four 15-period legs: `alpha_x = 1`, then `alpha_y = 1`, then the reverses.
pub fn square() -> ExperimentConfig {
    let leg = 15.0;
    let schedule = |levels: [f64; 4]| Envelope::Pieces {
        pieces: levels.iter().map(|&l| level(leg, l)).collect(),
    };
    ExperimentConfig {
        lattice: LatticeConfig::isotropic(2.5, 0.2),
        grid: GridConfig::default(),
        initial: InitialConfig::default(),
        drive: explicit(
            waveform(schedule([1.0, 0.0, -1.0, 0.0]), 0.0, SpatialProfile::None),
            waveform(schedule([0.0, 1.0, 0.0, -1.0]), 0.0, SpatialProfile::None),
        ),
        run: RunConfig::new(4.0 * leg, Engine::Grid2dSeparable),
    }
}

/// `alpha_x = cos(Omega t)`, `alpha_y = cos(2 Omega t)` over one period of
/// `Omega = omega_B / 250`.
pub fn lissajous() -> ExperimentConfig {
    let omega = 2.0 * PI / LISSAJOUS_PERIOD;
    let harmonic = |w: f64| Envelope::Harmonic {
        amplitude: 1.0,
        omega: w,
        phase: 0.0,
    };
    ExperimentConfig {
        lattice: LatticeConfig::isotropic(2.5, 0.2),
        grid: GridConfig {
            wells: 125,
            ..GridConfig::default()
        },
        initial: InitialConfig::default(),
        drive: explicit(
            waveform(harmonic(omega), 0.0, SpatialProfile::None),
            waveform(harmonic(2.0 * omega), 0.0, SpatialProfile::None),
        ),
        run: RunConfig::new(LISSAJOUS_PERIOD, Engine::Grid2dSeparable),
    }
}

/// A stem drawn upward, then two clockwise lobes meeting at a turning
/// point on the stem.
pub fn beta_path() -> ExperimentConfig {
    let segments = vec![
        PathSegment::Line {
            from: [0.0, -6.0],
            to: [0.0, 10.0],
            duration: 30.0,
        },
        PathSegment::Arc {
            center: [0.0, 7.0],
            radius: 3.0,
            start_angle: 0.5 * PI,
            span: -PI,
            duration: 20.0,
        },
        PathSegment::Arc {
            center: [0.0, 0.0],
            radius: 4.0,
            start_angle: 0.5 * PI,
            span: -PI,
            duration: 25.0,
        },
        PathSegment::Dwell { duration: 5.0 },
    ];
    let path = PathSpec { segments };
    ExperimentConfig {
        lattice: LatticeConfig::isotropic(2.5, 0.2),
        grid: GridConfig::default(),
        initial: InitialConfig::Gaussian {
            width: [3.0, 3.0],
            center: path.start(),
        },
        run: RunConfig::new(path.duration(), Engine::Grid2dSeparable),
        drive: DriveConfig {
            path: Some(path),
            ..DriveConfig::default()
        },
    }
}

/// Beat-note profile with `beta = pi`: the local drift `-M_1 sigma k u`
/// pulls four packets toward the origin.
pub fn concentration() -> ExperimentConfig {
    let duration = 140.0;
    let k = CONCENTRATION_K;
    let env = Envelope::Pieces {
        pieces: vec![level(duration, 1.0)],
    };
    let profile = SpatialProfile::Beat { k };
    let mut run = RunConfig::new(duration, Engine::Grid2dSeparable);
    run.dispersion = DispersionReference::Origin;
    run.dt = Some(1.0 / 500.0);
    let d = CONCENTRATION_OFFSET;
    ExperimentConfig {
        lattice: LatticeConfig {
            beat_k: k,
            ..LatticeConfig::isotropic(2.5, 0.25)
        },
        // the slowest quasimomentum components run outward ever faster
        grid: GridConfig {
            wells: 161,
            ..GridConfig::default()
        },
        initial: InitialConfig::Packets {
            width: [4.0, 4.0],
            centers: vec![[d, d], [-d, d], [-d, -d], [d, -d]],
        },
        drive: explicit(
            waveform(env.clone(), PI, profile),
            waveform(env, PI, profile),
        ),
        run,
    }
}

/// Crossed profiles `A_x = -sin(k y) ...`, `A_y = sin(k x) ...` give the
/// rigid-rotation drift `v = M_1 sigma k (-y, x)` about the rotation center,
/// where the cigar starts.
pub fn rotation() -> ExperimentConfig {
    let duration = 30.0;
    let k = ROTATION_K;
    let env = Envelope::Pieces {
        pieces: vec![level(duration, 1.0)],
    };
    let profile = SpatialProfile::Crossed { k };
    let mut run = RunConfig::new(duration, Engine::Grid2dFull);
    run.dt = Some(1.0 / 500.0);
    run.sample_interval = 0.25;
    ExperimentConfig {
        lattice: LatticeConfig {
            beat_k: k,
            ..LatticeConfig::isotropic(2.5, 0.2)
        },
        // 16 * 51 samples keeps the FFT length smooth
        grid: GridConfig {
            wells: 51,
            points_per_period: 16,
            wells_y: None,
        },
        initial: InitialConfig::Cigar {
            major: 2.5,
            minor: 1.5,
            center: [-ROTATION_CENTER_OFFSET, -ROTATION_CENTER_OFFSET],
        },
        drive: explicit(
            waveform(env.clone(), 0.0, profile),
            waveform(env, 0.0, profile),
        ),
        run,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::validate;

    #[test]
    fn square_lasts_sixty_periods() {
        assert_eq!(square().run.duration, 60.0);
    }

    #[test]
    fn lissajous_periods() {
        let c = lissajous();
        let omega = |w: &Option<WaveformConfig>| match w.as_ref().unwrap().envelope {
            Envelope::Harmonic { omega, .. } => omega,
            _ => unreachable!(),
        };
        assert!((2.0 * PI / omega(&c.drive.x) - 250.0).abs() < 1e-12);
        assert!((2.0 * PI / omega(&c.drive.y) - 125.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(preset("spiral"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn presets_are_valid_and_slow() {
        for name in NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let period = 2.0 * PI / c.lattice.force_x;
            for w in c.drive.x.iter().chain(&c.drive.y) {
                let d = w.waveform(crate::lattice::Axis::X, c.lattice.force_x, period);
                let r = validate(&d, c.lattice.force_x, c.run.duration * period);
                assert!(r.passed(), "{name}: {r:?}");
            }
        }
    }
}
