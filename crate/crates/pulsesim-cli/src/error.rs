//! Error type mapping every failure onto the documented exit codes:
//! 2 for configuration problems, 3 for fit/convergence failures, 1 for I/O.

use pulsesim::calibration::CalibrationError;
use pulsesim::metrology::MetrologyError;
use pulsesim::sim::SimError;
use pulsesim::tomography::TomographyError;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration: exit code 2.
    Config(String),
    /// A fit, search, or convergence failure while running: exit code 3.
    Fit(String),
    /// Filesystem trouble: exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Fit(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Fit(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Simulation errors are configuration problems, with one exception: the
/// amplitude search converging onto its bracket edge is a runtime convergence
/// failure even though the library reports it through the config-error
/// variant.
pub fn from_sim(e: SimError) -> CliError {
    match &e {
        SimError::InvalidConfig(m) if m.contains("pinned at a bracket edge") => {
            CliError::Fit(e.to_string())
        }
        SimError::InvalidConfig(_) | SimError::Schedule(_) => CliError::Config(e.to_string()),
        SimError::UnnormalizedState { .. } => CliError::Fit(e.to_string()),
    }
}

pub fn from_metrology(e: MetrologyError) -> CliError {
    match e {
        MetrologyError::InvalidScan(_)
        | MetrologyError::InvalidConfig(_)
        | MetrologyError::NonUniformGrid => CliError::Config(e.to_string()),
        MetrologyError::LowVisibility { .. } | MetrologyError::TooFewPeriods { .. } => {
            CliError::Fit(e.to_string())
        }
        MetrologyError::Sim(inner) => from_sim(inner),
    }
}

pub fn from_tomography(e: TomographyError) -> CliError {
    match e {
        TomographyError::InvalidInput(_) => CliError::Config(e.to_string()),
        TomographyError::InvalidState(_) => CliError::Fit(e.to_string()),
        TomographyError::Sim(inner) => from_sim(inner),
    }
}

pub fn from_calibration(e: CalibrationError) -> CliError {
    match e {
        CalibrationError::InvalidInput(_)
        | CalibrationError::InsufficientScan { .. }
        | CalibrationError::DegenerateDetuning => CliError::Config(e.to_string()),
        CalibrationError::NoExtremumInGrid { .. } | CalibrationError::NoSignChange { .. } => {
            CliError::Fit(e.to_string())
        }
        // A failure inside the pipeline is a runtime abort regardless of the
        // underlying variant; the message names the stage.
        CalibrationError::Stage { .. } => CliError::Fit(e.to_string()),
        CalibrationError::Sim(inner) => from_sim(inner),
        CalibrationError::Metrology(inner) => from_metrology(inner),
    }
}

pub fn io_err(context: &str, e: std::io::Error) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}
