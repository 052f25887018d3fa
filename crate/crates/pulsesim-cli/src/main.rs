//! `pulsesim` — experiment runner for the shaped-pulse qubit control
//! simulator. Each subcommand reads a strict-JSON config, runs one protocol,
//! and writes deterministic CSV/JSON artifacts into the run directory.
//!
//! Exit codes: 0 success, 2 bad arguments or configuration, 3 fit or
//! convergence failure, 1 I/O trouble.

mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::Ctx;
use config::{load_calibration, load_config};
use error::CliError;
use output::RunWriter;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pulsesim",
    version,
    about = "Shaped-pulse qubit control simulator: fringe metrology, leakage scans, \
             a calibration ladder, state tomography, and parameter sweeps",
    long_about = "Simulates a weakly anharmonic multilevel qubit under shaped microwave \
                  and frequency-shift control, and runs the measurement protocols used to \
                  characterize single-qubit gates.\n\n\
                  Every subcommand reads a strict-JSON config (unknown keys rejected, all \
                  blocks optional with documented defaults) and writes CSV/JSON files into \
                  the run directory. Outputs are byte-deterministic for a given config and \
                  embed the config's SHA-256 and the tool version.\n\n\
                  Common config blocks:\n  \
                  device     {f10, anharmonicity, dim, frame}            GHz / level count\n  \
                  pulses     {fwhm, protocol, beta}                      ns / shaping choice\n  \
                  integrator {dt, rotating_wave}                         ns / bool"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (strict JSON; unknown keys rejected)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory for this run (created if missing); overrides the
    /// config's out_dir
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Amplified-phase-error fringe metrology for both pulse protocols
    #[command(long_about = "Repeats a pseudo-identity block n times between two half \
        rotations and fits the analysis-phase fringe; the fringe shift grows linearly \
        with n at twice the per-gate phase error. Runs the bare-Gaussian and \
        half-derivative protocols side by side.\n\n\
        Config blocks: device, pulses, integrator, ape {n_list, phi_points, transition}, \
        shot_noise {shots, seed} (optional).\n\
        Writes fringes.csv (protocol,n,phi,p1) and summary.json (shifts in radians and \
        degrees, per-gate and per-pulse errors, linearity, visibility, HD/Gaussian ratio).")]
    Ape {
        #[command(flatten)]
        common: CommonArgs,
        /// Calibration record whose optimized quadrature weight is run as a
        /// third, 'calibrated' protocol
        #[arg(long, value_name = "PATH")]
        calibration: Option<PathBuf>,
        /// Overrides shot_noise.seed (requires the shot_noise config block)
        #[arg(long, value_name = "U64")]
        seed: Option<u64>,
    },
    /// Residual upper-level population vs pulse width, plus the two-pulse filter
    #[command(long_about = "Calibrates a pi pulse at every width in the grid and records \
        the residual |2> population it leaves, for both protocols; then runs the two-pulse \
        Ramsey filter whose delay scan interferes the pulses' leakage amplitudes.\n\n\
        Config blocks: device (dim >= 3), pulses, integrator, leakage {tau_grid}.\n\
        Writes leakage.csv (tau_ns,P2_gaussian,P2_hd) and summary.json (per-width \
        populations, Gaussian/HD ratios, filter min/max/per-pulse numbers).")]
    Leakage {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the calibration ladder and persist the record
    #[command(long_about = "Chains amplitude tuning (at the assumed frequency), frequency \
        tracking, amplitude re-tuning at the corrected carrier, upper-transition \
        spectroscopy, z-pulse calibration, and quadrature-weight optimization. A failing \
        stage aborts with the stage name and exit code 3.\n\n\
        Config blocks: device, integrator, calibrate {injected_detuning} (GHz the device \
        has drifted above the configured f10).\n\
        Writes calibration.json (the record other subcommands consume via --calibration) \
        and summary.json. Rerunning with --calibration pointing at a previous record \
        starts from its frequency estimate; amplitudes then move only by the residual \
        tracking error.")]
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Prior record; the rerun starts from its frequency estimate
        #[arg(long, value_name = "PATH")]
        calibration: Option<PathBuf>,
    },
    /// Bloch trajectories of swept rotations and the two-stage Hadamard
    #[command(long_about = "Reconstructs the Bloch vector along an x-rotation angle sweep \
        for both protocols (the derivative quadrature keeps the path in the y-z plane), \
        and along the two-stage Hadamard sweep s in [0,2] (|0> to |+> and back).\n\n\
        Config blocks: device, pulses, integrator, tomography {theta_points, s_points, \
        hadamard {x_amplitude, z_amplitude, x_phase, fwhm}}. Omitting tomography.hadamard \
        triggers a full Hadamard calibration (slow).\n\
        Writes trajectory_gaussian.csv, trajectory_half_derivative.csv, hadamard.csv \
        (each s,x,y,z,leakage) and summary.json (max |x|, plus-state and return \
        fidelities, leakage).")]
    Tomography {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate a scalar output over a grid of one scalar parameter
    #[command(long_about = "Sweeps one scalar config parameter (pulses.fwhm, pulses.beta, \
        or gate.theta) over a grid and evaluates one scalar output per point \
        (epsilon_per_gate_deg for pi/2 gates, or p2_leakage). Points run on a worker \
        pool; aggregation is in grid order, so outputs are byte-identical for any \
        --workers value.\n\n\
        Config blocks: device, pulses, integrator, sweep {parameter, values, output, \
        theta}.\n\
        Writes sweep.csv (parameter,output columns) and summary.json (results, zero \
        crossing if the output changes sign, first/last ratio).")]
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for the grid evaluation
        #[arg(long, value_name = "N", default_value_t = 1)]
        workers: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Ape { common, calibration, seed } => {
            let loaded = load_config(&common.config)?;
            if seed.is_some() && loaded.config.shot_noise.is_none() {
                return Err(CliError::Config(
                    "--seed requires a shot_noise config block (it overrides \
                     shot_noise.seed)"
                        .into(),
                ));
            }
            let rec = calibration.as_deref().map(load_calibration).transpose()?;
            let out = writer(&common, &loaded)?;
            commands::ape::run(&Ctx { config: &loaded.config, out: &out }, rec.as_ref(), seed)
        }
        Cmd::Leakage { common } => {
            let loaded = load_config(&common.config)?;
            let out = writer(&common, &loaded)?;
            commands::leakage::run(&Ctx { config: &loaded.config, out: &out })
        }
        Cmd::Calibrate { common, calibration } => {
            let loaded = load_config(&common.config)?;
            let rec = calibration.as_deref().map(load_calibration).transpose()?;
            let out = writer(&common, &loaded)?;
            commands::calibrate::run(&Ctx { config: &loaded.config, out: &out }, rec.as_ref())
        }
        Cmd::Tomography { common } => {
            let loaded = load_config(&common.config)?;
            let out = writer(&common, &loaded)?;
            commands::tomography::run(&Ctx { config: &loaded.config, out: &out })
        }
        Cmd::Sweep { common, workers } => {
            let loaded = load_config(&common.config)?;
            let out = writer(&common, &loaded)?;
            commands::sweep::run(&Ctx { config: &loaded.config, out: &out }, workers)
        }
    }
}

fn writer(common: &CommonArgs, loaded: &config::LoadedConfig) -> Result<RunWriter, CliError> {
    let dir = common
        .out
        .clone()
        .or_else(|| loaded.config.out_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Config("no output directory: pass --out or set out_dir in the config".into())
        })?;
    RunWriter::create(&dir, &loaded.hash)
}
