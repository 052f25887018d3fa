//! Strict-JSON experiment configuration: unknown keys are rejected at every
//! level, every block has documented defaults, and the SHA-256 of the raw
//! config bytes is recorded in every output file.

use crate::error::CliError;
use pulsesim::calibration::CalibrationRecord;
use pulsesim::{PropagatorConfig, QuditParams, ShapingProtocol, Transition};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub device: DeviceBlock,
    #[serde(default)]
    pub pulses: PulseBlock,
    #[serde(default)]
    pub integrator: IntegratorBlock,
    #[serde(default)]
    pub ape: ApeBlock,
    #[serde(default)]
    pub leakage: LeakageBlock,
    #[serde(default)]
    pub calibrate: CalibrateBlock,
    #[serde(default)]
    pub tomography: TomographyBlock,
    /// Required by the sweep subcommand; ignored by the others.
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    /// When present, fringe scans are resampled with binomial shot noise.
    #[serde(default)]
    pub shot_noise: Option<ShotNoiseBlock>,
    /// Default output directory; the --out flag overrides it.
    #[serde(default)]
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceBlock {
    /// 0<->1 transition frequency, GHz.
    #[serde(default = "d_f10")]
    pub f10: f64,
    /// f21 - f10, GHz (negative for a weakly anharmonic ladder).
    #[serde(default = "d_anharmonicity")]
    pub anharmonicity: f64,
    /// Number of simulated levels.
    #[serde(default = "d_dim")]
    pub dim: usize,
    /// Rotating-frame frequency, GHz; defaults to the addressed transition.
    #[serde(default)]
    pub frame: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    /// Gaussian full width at half maximum, ns.
    #[serde(default = "d_fwhm")]
    pub fwhm: f64,
    /// "gaussian_only" | "half_derivative" | "derivative_scaled".
    #[serde(default = "d_protocol")]
    pub protocol: String,
    /// Quadrature weight; required by (and only valid for) derivative_scaled.
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    /// Piecewise-constant propagation step, ns.
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Keep only the co-rotating drive term.
    #[serde(default = "d_true")]
    pub rotating_wave: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApeBlock {
    /// Pseudo-identity counts; must contain 0 (the phase baseline).
    #[serde(default = "d_n_list")]
    pub n_list: Vec<usize>,
    /// Analysis-axis angles per fringe (uniform full circle, at least 16).
    #[serde(default = "d_phi_points")]
    pub phi_points: usize,
    /// Addressed transition: "q01" or "q12".
    #[serde(default = "d_transition")]
    pub transition: Transition,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageBlock {
    /// Pulse widths to scan, ns.
    #[serde(default = "d_tau_grid")]
    pub tau_grid: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    /// How far the simulated device has drifted above the configured f10, GHz.
    #[serde(default)]
    pub injected_detuning: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyBlock {
    /// Points of the rotation-angle sweep over [0, pi].
    #[serde(default = "d_theta_points")]
    pub theta_points: usize,
    /// Points of the Hadamard sweep over [0, 2]; odd, so s=1 is on the grid.
    #[serde(default = "d_s_points")]
    pub s_points: usize,
    /// Explicit Hadamard stage knobs; omitting them triggers a full Hadamard
    /// calibration run (slow).
    #[serde(default)]
    pub hadamard: Option<HadamardKnobs>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HadamardKnobs {
    /// Microwave amplitude for one full stage, rad/ns.
    pub x_amplitude: f64,
    /// Z amplitude for one full stage, GHz.
    pub z_amplitude: f64,
    /// Drive axis angle, rad.
    pub x_phase: f64,
    /// Stage pulse width, ns; defaults to pulses.fwhm.
    #[serde(default)]
    pub fwhm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// "pulses.fwhm" | "pulses.beta" | "gate.theta".
    pub parameter: String,
    /// Grid of parameter values (non-empty, finite).
    pub values: Vec<f64>,
    /// "epsilon_per_gate_deg" | "p2_leakage".
    pub output: String,
    /// Fixed rotation angle, rad, for parameters other than gate.theta.
    #[serde(default)]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotNoiseBlock {
    pub shots: u64,
    pub seed: u64,
}

fn d_f10() -> f64 {
    6.0
}
fn d_anharmonicity() -> f64 {
    -0.2
}
fn d_dim() -> usize {
    3
}
fn d_fwhm() -> f64 {
    6.0
}
fn d_protocol() -> String {
    "half_derivative".to_string()
}
fn d_dt() -> f64 {
    0.005
}
fn d_true() -> bool {
    true
}
fn d_n_list() -> Vec<usize> {
    vec![0, 1, 3, 5]
}
fn d_phi_points() -> usize {
    64
}
fn d_transition() -> Transition {
    Transition::Q01
}
fn d_tau_grid() -> Vec<f64> {
    (0..19).map(|i| 3.0 + 0.5 * i as f64).collect()
}
fn d_theta_points() -> usize {
    21
}
fn d_s_points() -> usize {
    17
}

impl Default for DeviceBlock {
    fn default() -> Self {
        DeviceBlock { f10: d_f10(), anharmonicity: d_anharmonicity(), dim: d_dim(), frame: None }
    }
}
impl Default for PulseBlock {
    fn default() -> Self {
        PulseBlock { fwhm: d_fwhm(), protocol: d_protocol(), beta: None }
    }
}
impl Default for IntegratorBlock {
    fn default() -> Self {
        IntegratorBlock { dt: d_dt(), rotating_wave: d_true() }
    }
}
impl Default for ApeBlock {
    fn default() -> Self {
        ApeBlock { n_list: d_n_list(), phi_points: d_phi_points(), transition: d_transition() }
    }
}
impl Default for LeakageBlock {
    fn default() -> Self {
        LeakageBlock { tau_grid: d_tau_grid() }
    }
}
impl Default for CalibrateBlock {
    fn default() -> Self {
        CalibrateBlock { injected_detuning: 0.0 }
    }
}
impl Default for TomographyBlock {
    fn default() -> Self {
        TomographyBlock {
            theta_points: d_theta_points(),
            s_points: d_s_points(),
            hadamard: None,
        }
    }
}

impl DeviceBlock {
    /// Device parameters with the frame defaulting to f10.
    pub fn params(&self) -> QuditParams {
        QuditParams {
            dim: self.dim,
            f10: self.f10,
            anharmonicity: self.anharmonicity,
            frame: self.frame.unwrap_or(self.f10),
        }
    }

    /// Device parameters with the frame defaulting to the addressed
    /// transition's frequency (an explicit frame wins).
    pub fn params_at_transition(&self, transition: Transition) -> QuditParams {
        let p = self.params();
        match self.frame {
            Some(_) => p,
            None => {
                let f = p.transition_frequency(transition.base());
                p.with_frame(f)
            }
        }
    }
}

impl PulseBlock {
    pub fn protocol(&self) -> Result<ShapingProtocol, CliError> {
        match (self.protocol.as_str(), self.beta) {
            ("gaussian_only", None) => Ok(ShapingProtocol::GaussianOnly),
            ("half_derivative", None) => Ok(ShapingProtocol::HalfDerivative),
            ("derivative_scaled", Some(beta)) if beta.is_finite() => {
                Ok(ShapingProtocol::DerivativeScaled(beta))
            }
            ("derivative_scaled", Some(beta)) => {
                Err(CliError::Config(format!("pulses.beta must be finite, got {beta}")))
            }
            ("derivative_scaled", None) => Err(CliError::Config(
                "protocol 'derivative_scaled' requires a 'beta' value".into(),
            )),
            (_, Some(_)) => Err(CliError::Config(
                "'pulses.beta' is only meaningful for protocol 'derivative_scaled'".into(),
            )),
            (other, None) => Err(CliError::Config(format!(
                "unknown protocol '{other}' (expected gaussian_only, half_derivative, \
                 or derivative_scaled)"
            ))),
        }
    }
}

impl IntegratorBlock {
    pub fn propagator(&self) -> PropagatorConfig {
        PropagatorConfig { dt: self.dt, rotating_wave: self.rotating_wave }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), CliError> {
        let d = &self.device;
        for (name, v) in [
            ("device.f10", d.f10),
            ("device.anharmonicity", d.anharmonicity),
            ("device.frame", d.frame.unwrap_or(d.f10)),
            ("pulses.fwhm", self.pulses.fwhm),
            ("integrator.dt", self.integrator.dt),
        ] {
            if !v.is_finite() {
                return Err(CliError::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if d.dim < 2 {
            return Err(CliError::Config(format!(
                "device.dim must be at least 2, got {}",
                d.dim
            )));
        }
        if !(self.pulses.fwhm > 0.0) {
            return Err(CliError::Config(format!(
                "pulses.fwhm must be positive, got {}",
                self.pulses.fwhm
            )));
        }
        if !(self.integrator.dt > 0.0) {
            return Err(CliError::Config(format!(
                "integrator.dt must be positive, got {}",
                self.integrator.dt
            )));
        }
        self.pulses.protocol()?;
        if !self.calibrate.injected_detuning.is_finite() {
            return Err(CliError::Config(format!(
                "calibrate.injected_detuning must be finite, got {}",
                self.calibrate.injected_detuning
            )));
        }
        if self.tomography.theta_points < 2 {
            return Err(CliError::Config(format!(
                "tomography.theta_points must be at least 2, got {}",
                self.tomography.theta_points
            )));
        }
        if self.tomography.s_points < 3 || self.tomography.s_points % 2 == 0 {
            return Err(CliError::Config(format!(
                "tomography.s_points must be odd and at least 3 so the sweep hits s=1 \
                 exactly, got {}",
                self.tomography.s_points
            )));
        }
        if let Some(sn) = &self.shot_noise {
            if sn.shots == 0 {
                return Err(CliError::Config("shot_noise.shots must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// A parsed config together with the SHA-256 hex digest of its raw bytes.
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let hash = hex_digest(&bytes);
    let config: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    config.validate()?;
    Ok(LoadedConfig { config, hash })
}

pub fn load_calibration(path: &Path) -> Result<CalibrationRecord, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::Config(format!("cannot read calibration {}: {e}", path.display()))
    })?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("calibration {}: {e}", path.display())))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
