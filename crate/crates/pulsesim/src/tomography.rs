//! Single-qubit state tomography on the simulated multilevel device: Bloch
//! vectors reconstructed from three measured populations, plus the rotation
//! trajectories used to visualize pulse shaping and the two-stage Hadamard.

use nalgebra::{DVector, Matrix2, Vector2};
use num_complex::Complex64;

use crate::calibration::{hadamard_sequence, tune_amplitude, HadamardCalibration};
use crate::device::QuditParams;
use crate::gate_algebra::rotation;
use crate::pulse::{ControlSequence, GateSpec, ShapingProtocol};
use crate::sim::{gate_unitary, propagate_unitary, PropagatorConfig, SimError};

/// Population above this fraction outside the qubit subspace marks the
/// reconstruction as untrustworthy (flagged, not rejected).
pub const LEAKAGE_FLAG_THRESHOLD: f64 = 0.01;

/// A reconstructed Bloch vector.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Exact Bloch vector of a normalized two-level amplitude pair, for comparing
/// reconstructions against the state they came from.
pub fn bloch_from_amplitudes(c0: Complex64, c1: Complex64) -> BlochVector {
    let cross = c0.conj() * c1;
    BlochVector {
        x: 2.0 * cross.re,
        y: 2.0 * cross.im,
        z: c0.norm_sqr() - c1.norm_sqr(),
    }
}

/// One tomography result.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct QstOutcome {
    pub bloch: BlochVector,
    /// Population outside the qubit subspace.
    pub leakage: f64,
    /// True when the leakage exceeds [`LEAKAGE_FLAG_THRESHOLD`].
    pub leakage_flagged: bool,
}

/// Tomography failures.
#[derive(Debug)]
pub enum TomographyError {
    InvalidState(String),
    InvalidInput(String),
    Sim(SimError),
}

impl std::fmt::Display for TomographyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TomographyError::InvalidState(m) => write!(f, "invalid state: {m}"),
            TomographyError::InvalidInput(m) => write!(f, "invalid tomography input: {m}"),
            TomographyError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TomographyError {}

impl From<SimError> for TomographyError {
    fn from(e: SimError) -> Self {
        TomographyError::Sim(e)
    }
}

/// Reconstructs the qubit Bloch vector from a (possibly leaky) device state.
///
/// Three measurement settings on the renormalized qubit-subspace amplitudes:
/// the bare |1> population gives `z = 1 - 2 P1`, an exact `rotation(0, pi/2)`
/// prerotation gives `y = 1 - 2 P1`, and an exact `rotation(pi/2, pi/2)`
/// prerotation gives `x = 2 P1 - 1`. Leakage is reported alongside and only
/// flagged, never fatal, so trajectories that graze the third level still
/// produce data.
pub fn qst_state(psi: &DVector<Complex64>) -> Result<QstOutcome, TomographyError> {
    if psi.len() < 2 {
        return Err(TomographyError::InvalidState(
            "state must span at least the two qubit levels".into(),
        ));
    }
    let v = Vector2::new(psi[0], psi[1]);
    let qubit_norm = v.norm_squared();
    if qubit_norm < 1e-12 {
        return Err(TomographyError::InvalidState(
            "no amplitude left in the qubit subspace; nothing to reconstruct".into(),
        ));
    }
    let p1 = |u: &Matrix2<Complex64>| -> f64 { (u * v)[1].norm_sqr() / qubit_norm };
    let rx = rotation(0.0, std::f64::consts::FRAC_PI_2);
    let ry = rotation(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    let z = 1.0 - 2.0 * (v[1].norm_sqr() / qubit_norm);
    let y = 1.0 - 2.0 * p1(rx.matrix());
    let x = 2.0 * p1(ry.matrix()) - 1.0;
    let leakage = 1.0 - qubit_norm;
    Ok(QstOutcome {
        bloch: BlochVector { x, y, z },
        leakage,
        leakage_flagged: leakage > LEAKAGE_FLAG_THRESHOLD,
    })
}

/// Propagates `sequence` from the ground state and reconstructs the final
/// Bloch vector.
pub fn qst(
    params: &QuditParams,
    sequence: &ControlSequence,
    config: &PropagatorConfig,
) -> Result<QstOutcome, TomographyError> {
    let u = propagate_unitary(params, sequence, config)?;
    qst_state(&u.column(0).into_owned())
}

/// A Bloch-vector sweep: one reconstructed point per sweep value.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrajectoryScan {
    pub s_values: Vec<f64>,
    pub points: Vec<BlochVector>,
    pub leakages: Vec<f64>,
    /// Human-readable description of the swept sequence.
    pub descriptor: String,
}

impl TrajectoryScan {
    /// CSV with header `s,x,y,z,leakage`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,x,y,z,leakage\n");
        for i in 0..self.s_values.len() {
            let r = &self.points[i];
            out.push_str(&format!(
                "{:.6},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.s_values[i], r.x, r.y, r.z, self.leakages[i]
            ));
        }
        out
    }
}

/// Bloch trajectory of a single x-axis pulse as its rotation angle sweeps
/// `theta_grid` (within [0, pi]): the pi amplitude is tuned once and scaled
/// linearly to each angle, mirroring how a hardware amplitude sweep reuses one
/// calibration point.
pub fn x_rotation_trajectory(
    params: &QuditParams,
    protocol: ShapingProtocol,
    tau: f64,
    theta_grid: &[f64],
    config: &PropagatorConfig,
) -> Result<TrajectoryScan, TomographyError> {
    if theta_grid.is_empty() {
        return Err(TomographyError::InvalidInput("empty angle grid".into()));
    }
    for &theta in theta_grid {
        if !(theta >= 0.0 && theta <= std::f64::consts::PI + 1e-12) {
            return Err(TomographyError::InvalidInput(format!(
                "angle {theta} outside [0, pi]; the scaled-amplitude sweep is calibrated \
                 against the pi pulse"
            )));
        }
    }
    let pi_amp = tune_amplitude(params, std::f64::consts::PI, tau, protocol, config)?.value;
    let mut points = Vec::with_capacity(theta_grid.len());
    let mut leakages = Vec::with_capacity(theta_grid.len());
    for &theta in theta_grid {
        let spec = GateSpec::new(theta, tau)
            .with_protocol(protocol)
            .with_amplitude(pi_amp * theta / std::f64::consts::PI);
        let psi = gate_unitary(params, &spec, config)?.column(0).into_owned();
        let outcome = qst_state(&psi)?;
        points.push(outcome.bloch);
        leakages.push(outcome.leakage);
    }
    Ok(TrajectoryScan {
        s_values: theta_grid.to_vec(),
        points,
        leakages,
        descriptor: format!("x rotation, {protocol:?}, fwhm {tau} ns, scaled pi amplitude"),
    })
}

/// Bloch trajectory of the two-stage Hadamard as the sweep parameter `s` runs
/// over [0, 2]: s <= 1 scales the first simultaneous X+Z stage, s > 1 adds a
/// second stage scaled to `s - 1`. At s=1 the state should sit on |+>, at s=2
/// back at |0>.
pub fn hadamard_trajectory(
    params: &QuditParams,
    tau: f64,
    s_grid: &[f64],
    cal: &HadamardCalibration,
    config: &PropagatorConfig,
) -> Result<TrajectoryScan, TomographyError> {
    if s_grid.is_empty() {
        return Err(TomographyError::InvalidInput("empty sweep grid".into()));
    }
    for &s in s_grid {
        if !(s >= 0.0 && s <= 2.0 + 1e-12) {
            return Err(TomographyError::InvalidInput(format!(
                "sweep parameter {s} outside [0, 2]"
            )));
        }
    }
    let mut points = Vec::with_capacity(s_grid.len());
    let mut leakages = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let seq = hadamard_sequence(
            params,
            tau,
            s,
            cal.x_amplitude,
            cal.z_amplitude,
            cal.x_phase,
        )
        .map_err(SimError::Schedule)?;
        let psi = propagate_unitary(params, &seq, config)?.column(0).into_owned();
        let outcome = qst_state(&psi)?;
        points.push(outcome.bloch);
        leakages.push(outcome.leakage);
    }
    Ok(TrajectoryScan {
        s_values: s_grid.to_vec(),
        points,
        leakages,
        descriptor: format!("two-stage hadamard, fwhm {tau} ns"),
    })
}
