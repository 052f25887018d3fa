//! Simulation of a weakly anharmonic multilevel qubit under shaped microwave and
//! frequency-shift control, with the measurement protocols used to characterize
//! single-qubit gates: amplified-phase-error (APE) fringe metrology, Ramsey-filter
//! leakage measurement, a full calibration ladder, and Bloch-vector state tomography.
//!
//! Conventions used throughout:
//!
//! * Time in ns, frequencies in GHz, drive amplitudes in rad/ns (angular Rabi rate).
//! * The qudit ladder has level energies `E_n/h = n*f10 + n(n-1)/2 * a` with
//!   anharmonicity `a = f21 - f10 < 0` (GHz).
//! * Dynamics are integrated in a frame rotating at `f_frame` under the rotating-wave
//!   approximation: `H = sum_n 2*pi*[(E_n/h - n*f_frame) + n*z(t)] |n><n|
//!   + sum_n sqrt(n+1)/2 * [(x - i*y)(t) |n+1><n| + h.c.]`, x/y in rad/ns, z in GHz.
//! * A scheduled pulse with axis angle `phi` realizes the qubit-subspace rotation
//!   `exp(-i*theta/2*(cos(phi) sigma_x - sin(phi) sigma_y))`, i.e. [`gate_algebra::rotation`]
//!   with axis angle `-phi`.

pub mod calibration;
pub mod device;
pub mod gate_algebra;
pub mod metrology;
mod numerics;
pub mod pulse;
pub mod sim;
pub mod tomography;

pub use device::QuditParams;
pub use pulse::{ControlSequence, GateSpec, ShapingProtocol, Transition, ZPulseSpec};
pub use sim::PropagatorConfig;
