// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment orchestration: basis, drives, propagation, measurements and
//! output files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{solve_ws_basis, WannierStarkBasis};
use crate::config::{Engine, ExperimentConfig};
use crate::drive::{compile, DriveWaveform};
use crate::dynamics::{
    self, bessel_solution, coherence, init_gaussian, CoefficientEngine, CoefficientModel,
    CoefficientState,
};
use crate::error::{Error, Result};
use crate::grid::{
    project, project_2d, synthesize, well_occupation, well_occupation_2d, GridWavefunction,
    GridWavefunction2d, KineticSymbol, Propagator1d, Propagator2d, GRID_NORM_LIMIT,
    LEAKAGE_WARNING,
};
use crate::lattice::{Axis, LatticeParams};
use crate::observables::{
    accumulated_density, bloch_averaged_centroid, total_dispersion, DensityMoments, Record,
    TimeSeries,
};
use crate::output::{csv, write_file, Frame};

/// Bases and drives of a validated config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub params: LatticeParams,
    pub bases: [WannierStarkBasis; 2],
    pub drives: [DriveWaveform; 2],
    /// Bloch period of the x axis (the config time unit).
    pub period: f64,
}

fn initial_coeffs(width: [f64; 2], center: [f64; 2]) -> Result<[CoefficientState; 2]> {
    Ok([
        init_gaussian(width[0], center[0])?,
        init_gaussian(width[1], center[1])?,
    ])
}

/// Solves the bases and resolves the drives.
pub fn prepare(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    let params = config.params()?;
    let lx = params.axis(Axis::X);
    let ly = params.axis(Axis::Y);
    let gx = config.grid.spec(Axis::X)?;
    let gy = config.grid.spec(Axis::Y)?;
    let basis_x = solve_ws_basis(lx, gx)?;
    let basis_y = if (ly.depth, ly.force, gy) == (lx.depth, lx.force, gx) {
        basis_x.clone()
    } else {
        solve_ws_basis(ly, gy)?
    };
    let period = 2.0 * PI / params.force_x;
    let drive = &config.drive;
    let drives = if let Some(path) = &drive.path {
        let (width, center) = config.initial.packets()[0];
        let c = initial_coeffs(width, center)?;
        let compiled = compile(
            path,
            &basis_x,
            &basis_y,
            [coherence(&c[0]), coherence(&c[1])],
        )?;
        [compiled.x, compiled.y]
    } else {
        let make = |axis: Axis, force: f64| match if axis == Axis::X { &drive.x } else { &drive.y }
        {
            Some(w) => w.waveform(axis, force, period),
            None => DriveWaveform::zero(axis, force),
        };
        [make(Axis::X, params.force_x), make(Axis::Y, params.force_y)]
    };
    Ok(Setup {
        params,
        bases: [basis_x, basis_y],
        drives,
        period,
    })
}

enum Packet {
    Coeff {
        init: [CoefficientState; 2],
        states: [CoefficientState; 2],
        bessel: bool,
    },
    Grid1d {
        psi: GridWavefunction,
        prop: Box<Propagator1d>,
        norm0: f64,
    },
    Separable {
        psi: [GridWavefunction; 2],
        prop: Box<[Propagator1d; 2]>,
        norm0: [f64; 2],
    },
    Full {
        psi: GridWavefunction2d,
        prop: Box<Propagator2d>,
        norm0: f64,
    },
}

struct Measure {
    moments: DensityMoments,
    coherence: [f64; 2],
    leakage: f64,
}

impl Packet {
    fn new(setup: &Setup, engine: Engine, width: [f64; 2], center: [f64; 2]) -> Result<Packet> {
        let c = initial_coeffs(width, center)?;
        let [bx, by] = &setup.bases;
        Ok(match engine {
            Engine::Rwa | Engine::Bessel => Packet::Coeff {
                states: c.clone(),
                init: c,
                bessel: engine == Engine::Bessel,
            },
            Engine::Grid1d => {
                let psi = synthesize(bx, &c[0])?;
                Packet::Grid1d {
                    norm0: psi.norm_sqr(),
                    prop: Box::new(Propagator1d::new(
                        *bx.lattice(),
                        *bx.grid(),
                        KineticSymbol::Fd4,
                    )?),
                    psi,
                }
            }
            Engine::Grid2dSeparable => {
                let psi = [synthesize(bx, &c[0])?, synthesize(by, &c[1])?];
                Packet::Separable {
                    norm0: [psi[0].norm_sqr(), psi[1].norm_sqr()],
                    prop: Box::new([
                        Propagator1d::new(*bx.lattice(), *bx.grid(), KineticSymbol::Fd4)?,
                        Propagator1d::new(*by.lattice(), *by.grid(), KineticSymbol::Fd4)?,
                    ]),
                    psi,
                }
            }
            Engine::Grid2dFull => {
                let psi =
                    GridWavefunction2d::product(&synthesize(bx, &c[0])?, &synthesize(by, &c[1])?)?;
                Packet::Full {
                    norm0: psi.norm_sqr(),
                    prop: Box::new(Propagator2d::new(
                        setup.params,
                        *bx.grid(),
                        *by.grid(),
                        KineticSymbol::Fd4,
                    )?),
                    psi,
                }
            }
        })
    }

    fn advance(&mut self, setup: &Setup, t: f64, dt: f64) -> Result<()> {
        let [dx, dy] = &setup.drives;
        match self {
            Packet::Coeff {
                init,
                states,
                bessel,
            } => {
                for u in 0..2 {
                    let model = CoefficientModel::from_basis(&setup.bases[u]);
                    if *bessel {
                        states[u] = bessel_solution(&init[u], &model, &setup.drives[u], t)?;
                    } else {
                        dynamics::advance(
                            &mut states[u],
                            &model,
                            &setup.drives[u],
                            CoefficientEngine::Rwa,
                            t,
                            dt,
                            0,
                            |_| {},
                        )?;
                    }
                }
                Ok(())
            }
            Packet::Grid1d { psi, prop, .. } => prop.advance(psi, dx, t, dt, 0, |_| {}),
            Packet::Separable { psi, prop, .. } => {
                let [px, py] = psi;
                let [qx, qy] = prop.as_mut();
                let (a, b) = rayon::join(
                    || qx.advance(px, dx, t, dt, 0, |_| {}),
                    || qy.advance(py, dy, t, dt, 0, |_| {}),
                );
                a.and(b)
            }
            Packet::Full { psi, prop, .. } => prop.advance(psi, dx, dy, t, dt, 0, |_| {}),
        }
    }

    fn measure(&self, setup: &Setup) -> Result<Measure> {
        let [bx, by] = &setup.bases;
        let sigma_abs = |c: Complex64| c.norm();
        Ok(match self {
            Packet::Coeff { states, .. } => Measure {
                moments: DensityMoments::of_product(&states[0], &states[1]),
                coherence: [coherence(&states[0]).norm(), coherence(&states[1]).norm()],
                leakage: 0.0,
            },
            Packet::Grid1d { psi, .. } => {
                let p = project(bx, psi)?;
                Measure {
                    moments: DensityMoments::of_grid(psi, bx),
                    coherence: [coherence(&p.coeffs).norm(), 0.0],
                    leakage: p.leakage,
                }
            }
            Packet::Separable { psi, .. } => {
                let p = [project(bx, &psi[0])?, project(by, &psi[1])?];
                Measure {
                    moments: DensityMoments::of_grid_product(&psi[0], bx, &psi[1], by),
                    coherence: [
                        coherence(&p[0].coeffs).norm(),
                        coherence(&p[1].coeffs).norm(),
                    ],
                    leakage: 1.0 - (1.0 - p[0].leakage) * (1.0 - p[1].leakage),
                }
            }
            Packet::Full { psi, .. } => {
                let p = project_2d(bx, by, psi)?;
                let s = p.coherence();
                let w = 1.0 - p.leakage;
                Measure {
                    moments: DensityMoments::of_grid_2d(psi, [bx.mean_offset(), by.mean_offset()]),
                    coherence: [sigma_abs(s[0]) / w, sigma_abs(s[1]) / w],
                    leakage: p.leakage,
                }
            }
        })
    }

    /// Probability per well over the box, row-major in y.
    fn occupation(&self, setup: &Setup) -> Vec<f64> {
        let [gx, gy] = [setup.bases[0].grid(), setup.bases[1].grid()];
        let outer = |a: &[f64], b: &[f64]| -> Vec<f64> {
            b.iter()
                .flat_map(|q| a.iter().map(move |p| p * q))
                .collect()
        };
        match self {
            Packet::Coeff { states, .. } => {
                let per_axis = |s: &CoefficientState, g: &crate::lattice::GridSpec| -> Vec<f64> {
                    let (lo, hi) = g.well_range();
                    (lo..=hi).map(|n| s.get(n).norm_sqr()).collect()
                };
                outer(&per_axis(&states[0], gx), &per_axis(&states[1], gy))
            }
            Packet::Grid1d { psi, .. } => well_occupation(psi),
            Packet::Separable { psi, .. } => {
                outer(&well_occupation(&psi[0]), &well_occupation(&psi[1]))
            }
            Packet::Full { psi, .. } => well_occupation_2d(psi),
        }
    }

    fn norm_drift(&self) -> f64 {
        match self {
            Packet::Coeff { states, .. } => states
                .iter()
                .map(|s| (s.norm_sqr() - 1.0).abs())
                .fold(0.0, f64::max),
            Packet::Grid1d { psi, norm0, .. } => (psi.norm_sqr() - norm0).abs(),
            Packet::Separable { psi, norm0, .. } => (psi[0].norm_sqr() - norm0[0])
                .abs()
                .max((psi[1].norm_sqr() - norm0[1]).abs()),
            Packet::Full { psi, norm0, .. } => (psi.norm_sqr() - norm0).abs(),
        }
    }
}

/// Runtime invariants of a finished (or aborted) run.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub engine: Engine,
    pub norm_drift: f64,
    pub norm_limit: f64,
    pub boundary_ok: bool,
    pub max_leakage: f64,
    pub error: Option<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.norm_drift < self.norm_limit
            && self.boundary_ok
            && self.max_leakage < LEAKAGE_WARNING
    }

    pub fn to_toml(&self) -> String {
        let mut t = toml::Table::new();
        t.insert("engine".into(), self.engine.name().into());
        t.insert(
            "status".into(),
            if self.passed() { "passed" } else { "failed" }.into(),
        );
        t.insert("norm_drift".into(), self.norm_drift.into());
        t.insert("norm_limit".into(), self.norm_limit.into());
        t.insert("norm_ok".into(), (self.norm_drift < self.norm_limit).into());
        t.insert("boundary_ok".into(), self.boundary_ok.into());
        t.insert("max_leakage".into(), self.max_leakage.into());
        t.insert(
            "leakage_ok".into(),
            (self.max_leakage < LEAKAGE_WARNING).into(),
        );
        if let Some(e) = &self.error {
            t.insert("error".into(), e.clone().into());
        }
        toml::to_string(&t).expect("summary serializes")
    }
}

/// Everything a run measures.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub series: TimeSeries,
    /// Bloch-averaged centroid `(time, [x, y])`; empty for runs shorter than a period.
    pub averaged: Vec<(f64, [f64; 2])>,
    pub frames: Vec<Frame>,
    pub summary: Summary,
    pub period: f64,
}

/// Checkpoint times: samples, frames and the end, merged.
fn checkpoints(duration: f64, sample: f64, frame: f64) -> Vec<(f64, bool, bool)> {
    let eps = 1e-9 * sample.min(frame);
    let nf = if frame.is_finite() {
        (duration / frame + 1e-9).floor() as usize
    } else {
        0
    };
    let mut out: Vec<(f64, bool, bool)> = Vec::new();
    let mut push = |t: f64, is_sample: bool, is_frame: bool| out.push((t, is_sample, is_frame));
    let ns = (duration / sample + 1e-9).floor() as usize;
    for k in 0..=ns {
        push(k as f64 * sample, true, false);
    }
    for k in 0..=nf {
        push(k as f64 * frame, false, frame.is_finite());
    }
    push(duration, true, frame.is_finite());
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, bool, bool)> = Vec::new();
    for (t, s, f) in out {
        match merged.last_mut() {
            Some(last) if (t - last.0).abs() <= eps => {
                last.1 |= s;
                last.2 |= f;
            }
            _ => merged.push((t, s, f)),
        }
    }
    merged
}

/// Runs the experiment in memory.
pub fn simulate(config: &ExperimentConfig) -> Result<RunOutcome> {
    let setup = prepare(config)?;
    simulate_with(config, &setup)
}

/// Like [`simulate`], reusing a prepared setup.
pub fn simulate_with(config: &ExperimentConfig, setup: &Setup) -> Result<RunOutcome> {
    match simulate_inner(config, setup) {
        (outcome, None) => Ok(outcome),
        (_, Some(e)) => Err(e),
    }
}

/// Runs as far as possible; a failure ends the run early and is recorded in
/// the summary.
pub fn simulate_partial(config: &ExperimentConfig, setup: &Setup) -> RunOutcome {
    simulate_inner(config, setup).0
}

fn simulate_inner(config: &ExperimentConfig, setup: &Setup) -> (RunOutcome, Option<Error>) {
    let run = &config.run;
    let period = setup.period;
    let engine = run.engine;
    let dt = run.step() * period;
    let norm_limit = match engine {
        Engine::Bessel => 1e-10,
        Engine::Rwa => dynamics::NORM_DRIFT_LIMIT * (run.duration / run.step() / 1e4).max(1.0),
        _ => GRID_NORM_LIMIT,
    };
    let mut summary = Summary {
        engine,
        norm_drift: 0.0,
        norm_limit,
        boundary_ok: true,
        max_leakage: 0.0,
        error: None,
    };
    let mut series = TimeSeries::new();
    let mut frames = Vec::new();
    let mut failure = None;
    let mut fail = |summary: &mut Summary, e: Error| {
        if matches!(e, Error::BoundaryReached { .. }) {
            summary.boundary_ok = false;
        }
        summary.error = Some(e.to_string());
        failure = Some(e);
    };

    let mut packets = Vec::new();
    for (width, center) in config.initial.packets() {
        match Packet::new(setup, engine, width, center) {
            Ok(p) => packets.push(p),
            Err(e) => {
                fail(&mut summary, e);
                let outcome = RunOutcome {
                    series,
                    averaged: Vec::new(),
                    frames,
                    summary,
                    period,
                };
                return (outcome, failure);
            }
        }
    }
    let weight = 1.0 / packets.len() as f64;
    let [gx, gy] = [setup.bases[0].grid(), setup.bases[1].grid()];
    let frame_shape = match engine {
        Engine::Grid1d => (gx.wells_count, 1),
        _ => (gx.wells_count, gy.wells_count),
    };
    let frame_origin = [gx.well_range().0 as f64, gy.well_range().0 as f64];

    for (t_b, is_sample, is_frame) in
        checkpoints(run.duration, run.sample_interval, run.frame_interval)
    {
        let t = t_b * period;
        let step: Result<()> = packets
            .par_iter_mut()
            .map(|p| p.advance(setup, t, dt))
            .collect();
        if let Err(e) = step {
            fail(&mut summary, e);
            break;
        }
        if is_sample {
            let measured: Result<Vec<Measure>> = packets.iter().map(|p| p.measure(setup)).collect();
            let measured = match measured {
                Ok(m) => m,
                Err(e) => {
                    fail(&mut summary, e);
                    break;
                }
            };
            let moments: Vec<DensityMoments> = measured
                .iter()
                .map(|m| DensityMoments {
                    weight: m.moments.weight * weight,
                    ..m.moments
                })
                .collect();
            let mix = DensityMoments::mixture(&moments);
            let mut coh = [0.0; 2];
            let mut leak = 0.0;
            for m in &measured {
                coh[0] += weight * m.coherence[0];
                coh[1] += weight * m.coherence[1];
                leak += weight * m.leakage;
            }
            summary.max_leakage = summary.max_leakage.max(leak);
            let record = Record {
                centroid: mix.mean,
                dispersion: total_dispersion(&mix, run.dispersion),
                coherence: coh,
                leakage: leak,
            };
            series.push(t, record).expect("checkpoints increase");
        }
        if is_frame {
            let mut data = vec![0.0; frame_shape.0 * frame_shape.1];
            for p in &packets {
                for (d, v) in data.iter_mut().zip(p.occupation(setup)) {
                    *d += weight * v;
                }
            }
            frames.push(Frame {
                time: t,
                shape: frame_shape,
                spacing: [1.0, 1.0],
                origin: frame_origin,
                data,
            });
        }
    }
    summary.norm_drift = packets.iter().map(Packet::norm_drift).fold(0.0, f64::max);

    let averaged = averaged_centroid(&series, setup);
    let outcome = RunOutcome {
        series,
        averaged,
        frames,
        summary,
        period,
    };
    (outcome, failure)
}

fn averaged_centroid(series: &TimeSeries, setup: &Setup) -> Vec<(f64, [f64; 2])> {
    let periods = [setup.bases[0].bloch_period(), setup.bases[1].bloch_period()];
    let (Ok((tx, vx)), Ok((ty, vy))) = (
        bloch_averaged_centroid(series.times(), &series.centroid(0), periods[0]),
        bloch_averaged_centroid(series.times(), &series.centroid(1), periods[1]),
    ) else {
        return Vec::new();
    };
    tx.iter()
        .zip(&vx)
        .filter_map(|(&t, &x)| ty.iter().position(|&s| s == t).map(|j| (t, [x, vy[j]])))
        .collect()
}

/// Manifest: the resolved config plus basis diagnostics per axis.
pub fn manifest(config: &ExperimentConfig, setup: &Setup) -> String {
    let mut root = toml::Table::new();
    let cfg = toml::Value::try_from(config).expect("config converts to a table");
    root.insert("config".into(), cfg);
    let mut bases = toml::Table::new();
    for (name, b) in ["x", "y"].iter().zip(&setup.bases) {
        let d = b.diagnostics();
        let mut t = toml::Table::new();
        t.insert("omega_b".into(), b.bloch_frequency().into());
        t.insert("bloch_period".into(), b.bloch_period().into());
        t.insert("energy0".into(), b.energy0().into());
        t.insert("m0".into(), b.m0().into());
        t.insert("m1".into(), b.m1().into());
        let moments: Vec<toml::Value> = b.moments().iter().map(|(_, m)| m.into()).collect();
        t.insert("moments".into(), moments.into());
        if let Some(off) = d.first_excited_offset {
            t.insert("first_excited_offset".into(), off.into());
        }
        t.insert(
            "spacing_max_deviation".into(),
            d.spacing_max_deviation.into(),
        );
        t.insert("eigen_residual".into(), d.eigen_residual.into());
        t.insert("mean_offset".into(), b.mean_offset().into());
        let (lo, hi) = b.synthesis_range();
        t.insert(
            "synthesis_range".into(),
            vec![toml::Value::from(lo), toml::Value::from(hi)].into(),
        );
        bases.insert((*name).into(), t.into());
    }
    root.insert("basis".into(), bases.into());
    toml::to_string(&root).expect("manifest serializes")
}

pub const SERIES_HEADER: [&str; 8] = [
    "time",
    "time_bloch",
    "centroid_x",
    "centroid_y",
    "dispersion",
    "coherence_x",
    "coherence_y",
    "leakage",
];

/// Writes every output of `outcome` below `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    setup: &Setup,
    outcome: &RunOutcome,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        write_file(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put("manifest.toml", manifest(config, setup).as_bytes())?;
    let rows = outcome
        .series
        .times()
        .iter()
        .zip(outcome.series.records())
        .map(|(&t, r)| {
            vec![
                t,
                t / outcome.period,
                r.centroid[0],
                r.centroid[1],
                r.dispersion,
                r.coherence[0],
                r.coherence[1],
                r.leakage,
            ]
        });
    put("series.csv", csv(&SERIES_HEADER, rows).as_bytes())?;
    if !outcome.averaged.is_empty() {
        let rows = outcome
            .averaged
            .iter()
            .map(|(t, c)| vec![*t, t / outcome.period, c[0], c[1]]);
        put(
            "averaged.csv",
            csv(&["time", "time_bloch", "centroid_x", "centroid_y"], rows).as_bytes(),
        )?;
    }
    for (k, f) in outcome.frames.iter().enumerate() {
        put(&format!("frames/density_{k:05}.bin"), &f.to_bytes())?;
        if config.run.graymap {
            put(&format!("frames/density_{k:05}.pgm"), &f.to_pgm())?;
        }
    }
    if let Some(first) = outcome.frames.first() {
        let times: Vec<f64> = outcome.frames.iter().map(|f| f.time).collect();
        let data: Vec<Vec<f64>> = outcome.frames.iter().map(|f| f.data.clone()).collect();
        let acc = Frame {
            data: accumulated_density(&times, &data)?,
            time: *times.last().expect("non-empty"),
            ..first.clone()
        };
        put("accumulated.bin", &acc.to_bytes())?;
        if config.run.graymap {
            put("accumulated.pgm", &acc.to_pgm())?;
        }
    }
    put("summary.toml", outcome.summary.to_toml().as_bytes())?;
    Ok(written)
}

/// Runs a config and writes its outputs to `dir`. Propagation failures are
/// recorded in `summary.toml` and then returned.
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let setup = prepare(config)?;
    let (outcome, failure) = simulate_inner(config, &setup);
    write_outputs(dir, config, &setup, &outcome)?;
    match failure {
        None => Ok(outcome),
        Some(e) => Err(e),
    }
}

/// Grid engine used when a coefficient-model config is propagated on a grid.
pub fn grid_engine_for(config: &ExperimentConfig) -> Engine {
    if config.drive.is_crossed() {
        Engine::Grid2dFull
    } else {
        Engine::Grid2dSeparable
    }
}

/// Basis tables of one axis: ladder energies over the box, coupling moments
/// and `phi_0` samples.
pub fn basis_tables(basis: &WannierStarkBasis) -> [String; 3] {
    let (lo, hi) = basis.grid().well_range();
    let energies = csv(
        &["n", "energy"],
        (lo..=hi).map(|n| vec![n as f64, basis.ladder_energy(n)]),
    );
    let moments = csv(
        &["p", "m_p"],
        basis.moments().iter().map(|(p, m)| vec![p as f64, m]),
    );
    let g = basis.grid();
    let phi = csv(
        &["x", "phi0"],
        basis
            .phi0()
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![g.x(i), v]),
    );
    [energies, moments, phi]
}

pub const COEFFICIENT_HEADER: [&str; 7] =
    ["time", "n", "re", "im", "centroid", "sigma_re", "sigma_im"];

/// Rotating-wave evolution of the first packet, one CSV per axis with a row
/// per site and sample time.
pub fn coefficient_tables(config: &ExperimentConfig, setup: &Setup) -> Result<[String; 2]> {
    let (width, center) = config.initial.packets()[0];
    let dt = config.run.step().min(Engine::Rwa.default_dt()) * setup.period;
    let times: Vec<f64> = checkpoints(
        config.run.duration,
        config.run.sample_interval,
        f64::INFINITY,
    )
    .into_iter()
    .filter(|c| c.1)
    .map(|c| c.0 * setup.period)
    .collect();
    let mut out = [String::new(), String::new()];
    for u in 0..2 {
        let mut state = init_gaussian(width[u], center[u])?;
        let model = CoefficientModel::from_basis(&setup.bases[u]);
        let mut rows = Vec::new();
        for &t in &times {
            dynamics::advance(
                &mut state,
                &model,
                &setup.drives[u],
                CoefficientEngine::Rwa,
                t,
                dt,
                0,
                |_| {},
            )?;
            let centroid = dynamics::mean_position_coeffs(&state);
            let sigma = coherence(&state).value;
            for (n, c) in state.iter() {
                rows.push(vec![t, n as f64, c.re, c.im, centroid, sigma.re, sigma.im]);
            }
        }
        out[u] = csv(&COEFFICIENT_HEADER, rows);
    }
    Ok(out)
}

/// Samples per Bloch period of compiled waveform tables.
pub const WAVEFORM_SAMPLES_PER_PERIOD: usize = 10;

/// Envelopes and phases of both drives, sampled over the run.
pub fn waveform_table(config: &ExperimentConfig, setup: &Setup) -> String {
    let n = (config.run.duration * WAVEFORM_SAMPLES_PER_PERIOD as f64).round() as usize;
    let [dx, dy] = &setup.drives;
    let rows = (0..=n).map(|i| {
        let t = i as f64 / WAVEFORM_SAMPLES_PER_PERIOD as f64 * setup.period;
        vec![t, dx.alpha(t), dx.phase, dy.alpha(t), dy.phase]
    });
    csv(&["time", "alpha_x", "beta_x", "alpha_y", "beta_y"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::presets;

    #[test]
    fn checkpoint_merge() {
        let c = checkpoints(1.0, 0.25, 0.5);
        let t: Vec<f64> = c.iter().map(|x| x.0).collect();
        assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(c[2].1 && c[2].2 && !c[1].2);
        assert_eq!(checkpoints(0.0, 0.05, 1.0), vec![(0.0, true, true)]);
    }

    #[test]
    fn zero_duration_gives_one_frame() {
        let mut c = presets::square();
        c.run.duration = 0.0;
        c.run.engine = Engine::Rwa;
        let out = simulate(&c).unwrap();
        assert_eq!(out.frames.len(), 1);
        assert_eq!(out.series.len(), 1);
        assert!(out.averaged.is_empty());
        let f = &out.frames[0];
        assert!((f.data.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_rwa_run_writes_everything() {
        let text = "[lattice]\ndepth_x = 2.5\nforce_x = 0.2\n[drive]\npreset = \"square\"\n[run]\nduration = 2\nengine = \"rwa\"\n";
        let c = parse_config(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run(&c, dir.path()).unwrap();
        assert!(out.summary.passed(), "{:?}", out.summary);
        for f in [
            "manifest.toml",
            "series.csv",
            "averaged.csv",
            "accumulated.pgm",
            "summary.toml",
            "frames/density_00002.bin",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
        assert!(manifest.contains("first_excited_offset"));
        let series = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
        assert_eq!(series.lines().count(), 1 + 41);
    }
}
