// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use wsdrive::config::{parse_config, Engine, ExperimentConfig};
use wsdrive::output::write_file;
use wsdrive::presets;
use wsdrive::run::{basis_tables, coefficient_tables, prepare, run, waveform_table};
use wsdrive::Error;

/// Worker count for the data-parallel engines.
const THREADS_ENV: &str = "WSDRIVE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "wsdrive",
    version,
    about = "Wannier-Stark wavepacket transport simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ladder energies, coupling moments and reference state as CSV.
    Basis(Common),
    /// Coefficient evolution of the first packet in the rotating-wave model.
    Rwa(Common),
    /// Grid propagation; coefficient engines are replaced by a grid engine.
    Propagate(Common),
    /// Drive waveforms of a path as CSV.
    Compile(Common),
    /// Prints a complete preset config.
    Preset {
        name: String,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a config with its own engine.
    Run(Common),
}

#[derive(Args, Debug)]
struct Common {
    config: PathBuf,
    /// Output directory (default: the config's `output`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time step as a fraction of the Bloch period.
    #[arg(long)]
    dt: Option<f64>,
    /// Density frame stride in Bloch periods.
    #[arg(long)]
    frames: Option<f64>,
    /// Engine override: rwa, bessel, grid1d, grid2d_separable, grid2d_full.
    #[arg(long)]
    engine: Option<String>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let text = fs::read_to_string(&self.config)?;
        let mut config = parse_config(&text)?;
        if let Some(dt) = self.dt {
            config.run.dt = Some(dt);
        }
        if let Some(f) = self.frames {
            config.run.frame_interval = f;
        }
        if let Some(e) = &self.engine {
            config.run.engine = Engine::parse(e)?;
        }
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(config.output_dir()));
        Ok((config, out))
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return;
    };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                warn!("{THREADS_ENV}: {e}");
            }
        }
        _ => warn!("{THREADS_ENV}={v} ignored: expected a positive integer"),
    }
}

fn put(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    let p = dir.join(name);
    write_file(&p, text.as_bytes())?;
    info!("wrote {}", p.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Preset { name, out } => {
            let text = presets::preset(&name)?.to_toml();
            match out {
                Some(p) => write_file(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Basis(c) => {
            let (config, out) = c.load()?;
            let setup = prepare(&config)?;
            for (axis, basis) in ["x", "y"].iter().zip(&setup.bases) {
                let [energies, moments, phi] = basis_tables(basis);
                put(&out, &format!("basis_{axis}_energies.csv"), &energies)?;
                put(&out, &format!("basis_{axis}_moments.csv"), &moments)?;
                put(&out, &format!("basis_{axis}_phi0.csv"), &phi)?;
            }
        }
        Command::Rwa(c) => {
            let (config, out) = c.load()?;
            let setup = prepare(&config)?;
            let [x, y] = coefficient_tables(&config, &setup)?;
            put(&out, "coefficients_x.csv", &x)?;
            put(&out, "coefficients_y.csv", &y)?;
        }
        Command::Compile(c) => {
            let (config, out) = c.load()?;
            if config.drive.path.is_none() {
                return Err(Error::ConfigValidation(
                    "compile needs a [drive.path] block".into(),
                ));
            }
            let setup = prepare(&config)?;
            put(&out, "waveforms.csv", &waveform_table(&config, &setup))?;
        }
        Command::Propagate(c) => {
            let (mut config, out) = c.load()?;
            if !config.run.engine.is_grid() {
                config.run.engine = wsdrive::run::grid_engine_for(&config);
                config.run.dt = c.dt;
            }
            finish(run(&config, &out), &out)?;
        }
        Command::Run(c) => {
            let (config, out) = c.load()?;
            finish(run(&config, &out), &out)?;
        }
    }
    Ok(())
}

fn finish(result: wsdrive::Result<wsdrive::run::RunOutcome>, out: &Path) -> Result<(), Error> {
    let outcome = result?;
    let s = &outcome.summary;
    if !s.passed() {
        warn!(
            "runtime invariants not met: norm drift {:.3e} (limit {:.1e}), max leakage {:.3e}",
            s.norm_drift, s.norm_limit, s.max_leakage
        );
    }
    println!("{}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
