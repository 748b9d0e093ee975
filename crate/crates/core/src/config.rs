// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration: a TOML document with `[lattice]`, `[grid]`,
//! `[initial]`, `[drive]` and `[run]` sections. Unknown keys are errors.
//!
//! Times in the drive and run sections are in Bloch periods of the x axis;
//! harmonic envelope frequencies are in radians per Bloch period.

use serde::{Deserialize, Serialize};

use crate::drive::{CarrierReading, DriveWaveform, Envelope, PathSpec, SpatialProfile};
use crate::error::{Error, Result};
use crate::lattice::{Axis, GridSpec, LatticeParams};
use crate::observables::DispersionReference;
use crate::presets;

/// Default RWA step, in Bloch periods.
pub const DEFAULT_RWA_DT: f64 = 1.0 / 500.0;
/// Default grid step, in Bloch periods.
pub const DEFAULT_GRID_DT: f64 = 1.0 / 1000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub depth_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_y: Option<f64>,
    pub force_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_y: Option<f64>,
    #[serde(default)]
    pub beat_k: f64,
}

impl LatticeConfig {
    pub fn isotropic(depth: f64, force: f64) -> Self {
        LatticeConfig {
            depth_x: depth,
            depth_y: None,
            force_x: force,
            force_y: None,
            beat_k: 0.0,
        }
    }

    pub fn params(&self) -> Result<LatticeParams> {
        LatticeParams::new(
            self.depth_x,
            self.depth_y.unwrap_or(self.depth_x),
            self.force_x,
            self.force_y.unwrap_or(self.force_x),
            self.beat_k,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub wells: usize,
    pub points_per_period: usize,
    /// Wells along y for two-dimensional engines (defaults to `wells`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wells_y: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            wells: 65,
            points_per_period: 32,
            wells_y: None,
        }
    }
}

impl GridConfig {
    pub fn spec(&self, axis: Axis) -> Result<GridSpec> {
        let wells = match axis {
            Axis::X => self.wells,
            Axis::Y => self.wells_y.unwrap_or(self.wells),
        };
        GridSpec::centered(wells, self.points_per_period)
    }
}

/// Initial coefficient state(s), `c_n ~ exp(-(n - center)^2 / width^2)` per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Gaussian {
        width: [f64; 2],
        #[serde(default)]
        center: [f64; 2],
    },
    /// Equal-weight incoherent mixture of product packets.
    Packets {
        width: [f64; 2],
        centers: Vec<[f64; 2]>,
    },
    /// Packet elongated along x.
    Cigar {
        major: f64,
        minor: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Gaussian {
            width: [3.0, 3.0],
            center: [0.0, 0.0],
        }
    }
}

impl InitialConfig {
    /// `(widths, center)` of every packet of the mixture.
    pub fn packets(&self) -> Vec<([f64; 2], [f64; 2])> {
        match self {
            InitialConfig::Gaussian { width, center } => vec![(*width, *center)],
            InitialConfig::Packets { width, centers } => {
                centers.iter().map(|c| (*width, *c)).collect()
            }
            InitialConfig::Cigar {
                major,
                minor,
                center,
            } => vec![([*major, *minor], *center)],
        }
    }

    fn validate(&self) -> Result<()> {
        let packets = self.packets();
        if packets.is_empty() {
            return Err(Error::ConfigValidation(
                "initial state has no packets".into(),
            ));
        }
        for (w, c) in packets {
            if !(w[0] > 0.0 && w[1] > 0.0) || !w.iter().chain(&c).all(|v| v.is_finite()) {
                return Err(Error::ConfigValidation(format!(
                    "packet widths must be positive and finite (width {w:?}, center {c:?})"
                )));
            }
        }
        Ok(())
    }
}

/// Drive of one axis as written in a config (times in Bloch periods).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    pub envelope: Envelope,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub profile: SpatialProfile,
    #[serde(default)]
    pub reading: CarrierReading,
}

impl WaveformConfig {
    pub fn waveform(&self, axis: Axis, carrier: f64, period: f64) -> DriveWaveform {
        DriveWaveform {
            axis,
            envelope: self.envelope.rescaled(period),
            phase: self.phase,
            carrier,
            profile: self.profile,
            reading: self.reading,
        }
    }
}

/// Exactly one of `preset`, `path` or explicit `x`/`y` waveforms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<WaveformConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<WaveformConfig>,
}

impl DriveConfig {
    fn sources(&self) -> usize {
        self.preset.is_some() as usize
            + self.path.is_some() as usize
            + (self.x.is_some() || self.y.is_some()) as usize
    }

    fn profiles(&self) -> impl Iterator<Item = SpatialProfile> + '_ {
        self.x.iter().chain(&self.y).map(|w| w.profile)
    }

    pub fn is_crossed(&self) -> bool {
        self.profiles()
            .any(|p| matches!(p, SpatialProfile::Crossed { .. }))
    }

    pub fn is_uniform(&self) -> bool {
        self.profiles().all(|p| p == SpatialProfile::None)
    }

    fn drives_y(&self) -> bool {
        match (&self.path, &self.y) {
            (Some(path), _) => path
                .waypoints()
                .iter()
                .any(|(_, p)| p[1] != path.start()[1]),
            (None, Some(y)) => y.envelope != Envelope::zero(),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Nearest-neighbour coefficient model.
    Rwa,
    /// Closed-form Bessel solution of the coefficient model.
    Bessel,
    /// Split-operator grid along x only.
    Grid1d,
    /// Two independent 1D grids (product states).
    Grid2dSeparable,
    /// Split-operator grid in two dimensions.
    Grid2dFull,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Rwa => "rwa",
            Engine::Bessel => "bessel",
            Engine::Grid1d => "grid1d",
            Engine::Grid2dSeparable => "grid2d_separable",
            Engine::Grid2dFull => "grid2d_full",
        }
    }

    pub fn parse(s: &str) -> Result<Engine> {
        [
            Engine::Rwa,
            Engine::Bessel,
            Engine::Grid1d,
            Engine::Grid2dSeparable,
            Engine::Grid2dFull,
        ]
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| {
            Error::ConfigValidation(format!(
                "unknown engine '{s}' (expected rwa, bessel, grid1d, grid2d_separable or grid2d_full)"
            ))
        })
    }

    pub fn is_grid(self) -> bool {
        matches!(
            self,
            Engine::Grid1d | Engine::Grid2dSeparable | Engine::Grid2dFull
        )
    }

    pub fn default_dt(self) -> f64 {
        if self.is_grid() {
            DEFAULT_GRID_DT
        } else {
            DEFAULT_RWA_DT
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Bloch periods.
    pub duration: f64,
    pub engine: Engine,
    /// Step in Bloch periods (engine default when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Time-series sampling interval, Bloch periods.
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    /// Density frame interval, Bloch periods.
    #[serde(default = "default_frame_interval")]
    pub frame_interval: f64,
    #[serde(default)]
    pub dispersion: DispersionReference,
    #[serde(default = "default_true")]
    pub graymap: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_sample_interval() -> f64 {
    0.05
}

fn default_frame_interval() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn new(duration: f64, engine: Engine) -> Self {
        RunConfig {
            duration,
            engine,
            dt: None,
            sample_interval: default_sample_interval(),
            frame_interval: default_frame_interval(),
            dispersion: DispersionReference::default(),
            graymap: true,
            output: None,
        }
    }

    pub fn step(&self) -> f64 {
        self.dt.unwrap_or_else(|| self.engine.default_dt())
    }
}

/// Config as written, before preset expansion.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lattice: LatticeConfig,
    grid: Option<GridConfig>,
    initial: Option<InitialConfig>,
    drive: DriveConfig,
    run: Option<RunConfig>,
}

/// Fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeConfig,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub drive: DriveConfig,
    pub run: RunConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Strict parse followed by preset expansion and validation.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    let config = match raw.drive.preset.clone() {
        Some(name) => {
            if raw.drive.sources() != 1 {
                return Err(Error::ConfigValidation(
                    "drive section must name exactly one source (preset, path or x/y waveforms)"
                        .into(),
                ));
            }
            let base = presets::preset(&name)?;
            ExperimentConfig {
                lattice: raw.lattice,
                grid: raw.grid.unwrap_or(base.grid),
                initial: raw.initial.unwrap_or(base.initial),
                drive: base.drive,
                run: raw.run.unwrap_or(base.run),
            }
        }
        None => ExperimentConfig {
            lattice: raw.lattice,
            grid: raw.grid.unwrap_or_default(),
            initial: raw.initial.unwrap_or_default(),
            drive: raw.drive,
            run: raw.run.ok_or_else(|| {
                Error::ConfigValidation("missing [run] section (duration and engine)".into())
            })?,
        },
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn params(&self) -> Result<LatticeParams> {
        self.lattice.params()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::ConfigValidation(m));
        self.params()
            .map_err(|e| Error::ConfigValidation(e.to_string()))?;
        for axis in Axis::BOTH {
            self.grid
                .spec(axis)
                .map_err(|e| Error::ConfigValidation(e.to_string()))?;
        }
        self.initial.validate()?;
        let d = &self.drive;
        if d.sources() != 1 || d.preset.is_some() {
            return invalid(
                "drive section must name exactly one source (path or x/y waveforms)".into(),
            );
        }
        if let Some(path) = &d.path {
            path.validate()
                .map_err(|e| Error::ConfigValidation(e.to_string()))?;
        }
        for w in d.x.iter().chain(&d.y) {
            w.envelope
                .validate()
                .map_err(|e| Error::ConfigValidation(e.to_string()))?;
            if !w.phase.is_finite() {
                return invalid(format!("drive phase {} is not finite", w.phase));
            }
            if let SpatialProfile::Beat { k } | SpatialProfile::Crossed { k } = w.profile {
                if self.lattice.beat_k != 0.0 && self.lattice.beat_k != k {
                    return invalid(format!(
                        "profile wavenumber {k} disagrees with lattice beat_k {}",
                        self.lattice.beat_k
                    ));
                }
                self.params()
                    .and_then(|p| p.with_beat(k))
                    .map_err(|e| Error::ConfigValidation(e.to_string()))?;
            }
        }
        let run = &self.run;
        if !(run.duration >= 0.0) || !run.duration.is_finite() {
            return invalid(format!(
                "run duration {} must be a non-negative number of Bloch periods",
                run.duration
            ));
        }
        let dt = run.step();
        let coarsest = if run.engine.is_grid() {
            1.0 / 500.0
        } else {
            1.0 / 200.0
        };
        if !(dt > 0.0) || dt > coarsest * (1.0 + 1e-9) {
            return invalid(format!(
                "dt = {dt} T_B is outside (0, {coarsest}] for engine {}",
                run.engine.name()
            ));
        }
        if !(run.sample_interval > 0.0) || !(run.frame_interval > 0.0) {
            return invalid("sample and frame intervals must be positive".into());
        }
        match run.engine {
            _ if d.is_crossed() && run.engine != Engine::Grid2dFull => invalid(format!(
                "crossed profiles couple the axes: engine {} cannot run them (use grid2d_full)",
                run.engine.name()
            )),
            Engine::Bessel if !d.is_uniform() => {
                invalid("the Bessel engine needs spatially uniform drives".into())
            }
            Engine::Grid1d if d.drives_y() => {
                invalid("grid1d simulates the x axis only; drop the y drive".into())
            }
            _ => Ok(()),
        }
    }

    /// Output directory (`out` when unset).
    pub fn output_dir(&self) -> &str {
        self.run.output.as_deref().unwrap_or("out")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "[lattice]\ndepth_x = 2.5\nforce_x = 0.2\n\n[drive]\npreset = \"square\"\n";

    #[test]
    fn minimal_preset_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.run.duration, 60.0);
        assert!(c.drive.preset.is_none());
        assert!(c.drive.x.is_some());
    }

    #[test]
    fn zero_force_has_no_ladder() {
        let text = MINIMAL.replace("force_x = 0.2", "force_x = 0");
        let e = parse_config(&text).unwrap_err();
        assert!(e.to_string().contains("no Wannier-Stark ladder"), "{e}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = MINIMAL.replace("force_x = 0.2", "force_x = 0.2\nforse_y = 0.2");
        match parse_config(&text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("forse_y"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "[lattice]\ndepth_x = 2.5\nforce_x = = 0.2\n";
        assert!(matches!(
            parse_config(text),
            Err(Error::Config { line: 3, .. })
        ));
    }

    #[test]
    fn missing_run_section_is_rejected() {
        let text = "[lattice]\ndepth_x = 2.5\nforce_x = 0.2\n[drive.x]\nenvelope = { kind = \"constant\", level = 0.5 }\n";
        assert!(matches!(
            parse_config(text),
            Err(Error::ConfigValidation(_))
        ));
    }

    #[test]
    fn two_drive_sources_are_rejected() {
        let text =
            format!("{MINIMAL}[drive.x]\nenvelope = {{ kind = \"constant\", level = 0.5 }}\n");
        assert!(matches!(
            parse_config(&text),
            Err(Error::ConfigValidation(_))
        ));
    }

    #[test]
    fn crossed_drive_requires_full_grid() {
        let mut c = presets::preset("rotation").unwrap();
        c.run.engine = Engine::Grid2dSeparable;
        assert!(matches!(c.validate(), Err(Error::ConfigValidation(_))));
    }

    #[test]
    fn every_preset_round_trips() {
        for name in presets::NAMES {
            let c = presets::preset(name).unwrap();
            let text = c.to_toml();
            let back = parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(back, c, "{name}");
            assert_eq!(back.to_toml(), text, "{name}");
        }
    }

    #[test]
    fn engine_names() {
        for e in ["rwa", "bessel", "grid1d", "grid2d_separable", "grid2d_full"] {
            assert_eq!(Engine::parse(e).unwrap().name(), e);
        }
        assert!(Engine::parse("grid3d").is_err());
    }
}
