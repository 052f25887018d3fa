//! Analytic pulse envelopes and the scheduling of gate lists onto the three
//! time-dependent control channels (microwave x/y quadratures and the z
//! frequency-shift line).
//!
//! A scheduled microwave pulse contributes the complex drive
//! `omega(t) = (X(t) + i*Y(t)) * exp(i*(axis_phi + 2*pi*(f_carrier - f_frame)*t))`
//! where `X` is a Gaussian envelope, `Y` the derivative quadrature selected by
//! the shaping protocol, and `f_carrier` the addressed transition frequency
//! plus the per-gate drive detuning. The real channels are `x = Re(omega)`,
//! `y = Im(omega)`. Carrier phases are anchored at the sequence origin `t = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::QuditParams;

/// Integral of `exp(-4 ln2 t^2 / tau^2)` over the whole line is `tau *` this
/// factor (`sqrt(pi / (4 ln 2))`, about 1.0645).
pub fn gaussian_area_factor() -> f64 {
    (std::f64::consts::PI / (4.0 * std::f64::consts::LN_2)).sqrt()
}

/// Fraction of a Gaussian's total area lying inside the scheduling window of
/// +/- 2 FWHM around its center: `erf(2*sqrt(4 ln 2))`.
///
/// Amplitude calibration seeds divide by this so that the truncated pulse, not
/// the ideal untruncated one, carries the requested rotation area.
pub const TRUNCATED_AREA_FRACTION: f64 = 0.999_997_518_453_982_7;

/// Amplitude (rad/ns) whose full Gaussian time integral equals `theta`:
/// `A = theta / (tau * sqrt(pi/(4 ln 2)))`. This is the two-level area-theorem
/// seed that amplitude calibration refines.
pub fn amplitude_for_angle(theta: f64, tau: f64) -> f64 {
    assert!(tau > 0.0, "fwhm must be positive");
    theta / (tau * gaussian_area_factor())
}

/// Gaussian envelope `A * exp(-4 ln2 (t - t0)^2 / tau^2)` parameterized by its
/// full width at half maximum `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianEnvelope {
    /// Peak value. rad/ns for microwave envelopes, GHz for z pulses.
    pub amplitude: f64,
    /// Center time t0 in ns.
    pub center: f64,
    /// Full width at half maximum in ns.
    pub fwhm: f64,
}

impl GaussianEnvelope {
    pub fn value(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.fwhm;
        self.amplitude * (-4.0 * std::f64::consts::LN_2 * u * u).exp()
    }

    /// Analytic time derivative (no numerical differencing).
    pub fn derivative(&self, t: f64) -> f64 {
        self.value(t) * (-8.0 * std::f64::consts::LN_2 * (t - self.center) / (self.fwhm * self.fwhm))
    }

    /// Scheduling window `[t0 - 2 tau, t0 + 2 tau]` outside which the envelope
    /// is treated as zero.
    pub fn window(&self) -> (f64, f64) {
        (self.center - 2.0 * self.fwhm, self.center + 2.0 * self.fwhm)
    }
}

/// Derivative quadrature of a Gaussian envelope: `beta * dX/dt / delta`, with
/// `delta` the (signed, negative) anharmonicity in rad/ns.
///
/// The sign is chosen so the quadrature suppresses the drive's spectral weight
/// at the next ladder transition (which sits at `delta < 0` relative to the
/// carrier); `beta = 0.5` is the half-derivative protocol, `beta = 1` the full
/// derivative correction.
pub fn quadrature_value(
    env: &GaussianEnvelope,
    beta: f64,
    delta: f64,
    t: f64,
) -> Result<f64, ScheduleError> {
    if delta == 0.0 {
        return Err(ScheduleError::QuadratureUndefined);
    }
    Ok(beta * env.derivative(t) / delta)
}

/// Which quadrature shaping a gate uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingProtocol {
    /// Plain Gaussian; no y quadrature.
    GaussianOnly,
    /// Derivative quadrature at half weight (beta = 0.5).
    HalfDerivative,
    /// Derivative quadrature with explicit weight beta.
    DerivativeScaled(f64),
}

impl ShapingProtocol {
    pub fn beta(&self) -> f64 {
        match self {
            ShapingProtocol::GaussianOnly => 0.0,
            ShapingProtocol::HalfDerivative => 0.5,
            ShapingProtocol::DerivativeScaled(b) => *b,
        }
    }
}

/// Which ladder transition a gate drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// |0> <-> |1>
    Q01,
    /// |1> <-> |2>
    Q12,
}

impl Transition {
    /// Lower level index of the transition.
    pub fn base(&self) -> usize {
        match self {
            Transition::Q01 => 0,
            Transition::Q12 => 1,
        }
    }
}

fn default_transition() -> Transition {
    Transition::Q01
}

fn default_protocol() -> ShapingProtocol {
    ShapingProtocol::GaussianOnly
}

/// One shaped microwave gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    /// Addressed transition (default 0<->1).
    #[serde(default = "default_transition")]
    pub transition: Transition,
    /// Drive axis angle in radians (default 0: x axis).
    #[serde(default)]
    pub axis_phi: f64,
    /// Rotation angle in radians; sets the default amplitude via the area
    /// theorem. Must lie in [-2 pi, 2 pi].
    pub theta: f64,
    /// Envelope FWHM in ns.
    pub fwhm: f64,
    /// Quadrature shaping (default plain Gaussian).
    #[serde(default = "default_protocol")]
    pub protocol: ShapingProtocol,
    /// Carrier offset from the addressed transition frequency, GHz (default 0).
    #[serde(default)]
    pub drive_detuning: f64,
    /// Explicit peak amplitude in rad/ns; overrides the area-theorem default
    /// derived from `theta` when present (used by calibrated sequences).
    #[serde(default)]
    pub amplitude_override: Option<f64>,
}

impl GateSpec {
    pub fn new(theta: f64, fwhm: f64) -> Self {
        GateSpec {
            transition: Transition::Q01,
            axis_phi: 0.0,
            theta,
            fwhm,
            protocol: ShapingProtocol::GaussianOnly,
            drive_detuning: 0.0,
            amplitude_override: None,
        }
    }

    pub fn with_protocol(mut self, protocol: ShapingProtocol) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn with_axis(mut self, axis_phi: f64) -> Self {
        self.axis_phi = axis_phi;
        self
    }

    pub fn with_transition(mut self, transition: Transition) -> Self {
        self.transition = transition;
        self
    }

    pub fn with_drive_detuning(mut self, drive_detuning: f64) -> Self {
        self.drive_detuning = drive_detuning;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude_override = Some(amplitude);
        self
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return Err(ScheduleError::InvalidSpec(format!(
                "fwhm must be positive and finite, got {}",
                self.fwhm
            )));
        }
        if !self.theta.is_finite() || self.theta.abs() > 2.0 * std::f64::consts::PI + 1e-12 {
            return Err(ScheduleError::InvalidSpec(format!(
                "theta must lie in [-2pi, 2pi], got {}",
                self.theta
            )));
        }
        for (name, v) in [("axis_phi", self.axis_phi), ("drive_detuning", self.drive_detuning)] {
            if !v.is_finite() {
                return Err(ScheduleError::InvalidSpec(format!("{name} must be finite")));
            }
        }
        if let Some(a) = self.amplitude_override {
            if !a.is_finite() {
                return Err(ScheduleError::InvalidSpec("amplitude_override must be finite".into()));
            }
        }
        Ok(())
    }

    /// Peak amplitude used when scheduling: the override if present, otherwise
    /// the area-theorem amplitude divided by the ladder coupling `sqrt(base+1)`
    /// of the addressed transition (so `theta` means the rotation angle on that
    /// transition, not the bare drive area).
    pub fn resolved_amplitude(&self) -> f64 {
        match self.amplitude_override {
            Some(a) => a,
            None => {
                amplitude_for_angle(self.theta, self.fwhm)
                    / ((self.transition.base() as f64 + 1.0).sqrt())
            }
        }
    }
}

/// A Gaussian-shaped shift of the qubit frequency (z control), GHz peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZPulseSpec {
    /// Peak frequency shift in GHz (applied as `n * z(t)` across the ladder).
    pub amplitude: f64,
    /// FWHM in ns.
    pub fwhm: f64,
}

impl ZPulseSpec {
    pub fn new(amplitude: f64, fwhm: f64) -> Self {
        ZPulseSpec { amplitude, fwhm }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return Err(ScheduleError::InvalidSpec(format!(
                "z-pulse fwhm must be positive and finite, got {}",
                self.fwhm
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(ScheduleError::InvalidSpec("z-pulse amplitude must be finite".into()));
        }
        Ok(())
    }
}

/// One element of a sequential schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceElement {
    Gate(GateSpec),
    Z(ZPulseSpec),
    /// Free evolution for the given number of ns.
    Idle(f64),
}

/// Scheduling failures.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleError {
    InvalidSpec(String),
    /// Two pulse windows overlap and neither placement was flagged simultaneous.
    Overlap { existing: (f64, f64), added: (f64, f64) },
    /// A pulse window would extend before the sequence origin t = 0.
    BeforeOrigin { window: (f64, f64) },
    /// A derivative quadrature was requested on a device with zero anharmonicity.
    QuadratureUndefined,
}

impl std::fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleError::InvalidSpec(msg) => write!(f, "invalid pulse spec: {msg}"),
            ScheduleError::Overlap { existing, added } => write!(
                f,
                "pulse window ({:.3}, {:.3}) overlaps ({:.3}, {:.3}); flag the placement \
                 simultaneous if the overlap is intended",
                added.0, added.1, existing.0, existing.1
            ),
            ScheduleError::BeforeOrigin { window } => write!(
                f,
                "pulse window ({:.3}, {:.3}) extends before the sequence origin t=0",
                window.0, window.1
            ),
            ScheduleError::QuadratureUndefined => write!(
                f,
                "derivative quadrature undefined: device anharmonicity is zero"
            ),
        }
    }
}

impl std::error::Error for ScheduleError {}

/// A microwave pulse fixed in time with its amplitude and carrier resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacedMicrowave {
    pub envelope: GaussianEnvelope,
    /// Quadrature weight (0 for plain Gaussian).
    pub beta: f64,
    /// Drive axis angle in radians.
    pub axis_phi: f64,
    /// Absolute carrier frequency in GHz (transition frequency + drive detuning).
    pub carrier: f64,
    /// Lower level index of the addressed transition.
    pub base: usize,
}

/// A z pulse fixed in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacedZPulse {
    pub envelope: GaussianEnvelope,
}

/// A fully scheduled control sequence: three deterministic channel functions
/// over `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSequence {
    pub(crate) duration: f64,
    /// Rotating-frame frequency the carriers are referenced to, GHz.
    pub(crate) frame: f64,
    /// Anharmonicity in rad/ns (`2 pi * (f21 - f10)`), the quadrature scaling.
    pub(crate) delta_rad: f64,
    pub(crate) microwaves: Vec<PlacedMicrowave>,
    pub(crate) z_pulses: Vec<PlacedZPulse>,
}

impl ControlSequence {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn microwaves(&self) -> &[PlacedMicrowave] {
        &self.microwaves
    }

    pub fn z_pulses(&self) -> &[PlacedZPulse] {
        &self.z_pulses
    }

    /// Complex drive `x(t) + i y(t)` under the rotating-wave approximation.
    pub fn omega(&self, t: f64) -> Complex64 {
        self.omega_full(t, true)
    }

    /// Complex drive, optionally including the counter-rotating term that the
    /// rotating-wave approximation drops.
    pub(crate) fn omega_full(&self, t: f64, rotating_wave: bool) -> Complex64 {
        if t < 0.0 || t > self.duration {
            return Complex64::new(0.0, 0.0);
        }
        let mut om = Complex64::new(0.0, 0.0);
        for p in &self.microwaves {
            let (lo, hi) = p.envelope.window();
            if t < lo || t > hi {
                continue;
            }
            let x = p.envelope.value(t);
            let y = if p.beta != 0.0 {
                p.beta * p.envelope.derivative(t) / self.delta_rad
            } else {
                0.0
            };
            let xy = Complex64::new(x, y);
            let ph = p.axis_phi + 2.0 * std::f64::consts::PI * (p.carrier - self.frame) * t;
            om += xy * Complex64::new(0.0, ph).exp();
            if !rotating_wave {
                let ph_counter =
                    p.axis_phi + 2.0 * std::f64::consts::PI * (p.carrier + self.frame) * t;
                om += xy.conj() * Complex64::new(0.0, -ph_counter).exp();
            }
        }
        om
    }

    /// In-phase microwave channel, rad/ns.
    pub fn x(&self, t: f64) -> f64 {
        self.omega(t).re
    }

    /// Quadrature microwave channel, rad/ns.
    pub fn y(&self, t: f64) -> f64 {
        self.omega(t).im
    }

    /// Frequency-shift channel, GHz.
    pub fn z(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        let mut z = 0.0;
        for p in &self.z_pulses {
            let (lo, hi) = p.envelope.window();
            if t >= lo && t <= hi {
                z += p.envelope.value(t);
            }
        }
        z
    }
}

/// Incremental construction of a [`ControlSequence`].
///
/// `push_*` methods lay elements out left to right: each pulse occupies a
/// window of four FWHM, consecutive windows abut with `gap` ns between them,
/// and idles insert dead time. `place_*_at` methods pin a pulse at an explicit
/// center instead; overlapping windows are rejected unless the placement is
/// flagged simultaneous.
pub struct SequenceBuilder {
    params: QuditParams,
    gap: f64,
    cursor: f64,
    last_was_pulse: bool,
    occupied: Vec<(f64, f64)>,
    microwaves: Vec<PlacedMicrowave>,
    z_pulses: Vec<PlacedZPulse>,
    end: f64,
}

impl SequenceBuilder {
    pub fn new(params: &QuditParams, gap: f64) -> Result<Self, ScheduleError> {
        params
            .validate()
            .map_err(ScheduleError::InvalidSpec)?;
        if !(gap >= 0.0 && gap.is_finite()) {
            return Err(ScheduleError::InvalidSpec(format!(
                "gap must be nonnegative and finite, got {gap}"
            )));
        }
        Ok(SequenceBuilder {
            params: *params,
            gap,
            cursor: 0.0,
            last_was_pulse: false,
            occupied: Vec::new(),
            microwaves: Vec::new(),
            z_pulses: Vec::new(),
            end: 0.0,
        })
    }

    fn check_window(
        &mut self,
        window: (f64, f64),
        simultaneous: bool,
    ) -> Result<(), ScheduleError> {
        if window.0 < -1e-9 {
            return Err(ScheduleError::BeforeOrigin { window });
        }
        if !simultaneous {
            for &existing in &self.occupied {
                if window.0 < existing.1 - 1e-9 && existing.0 < window.1 - 1e-9 {
                    return Err(ScheduleError::Overlap { existing, added: window });
                }
            }
            self.occupied.push(window);
        }
        self.end = self.end.max(window.1);
        Ok(())
    }

    fn insert_gate(
        &mut self,
        spec: &GateSpec,
        center: f64,
        simultaneous: bool,
    ) -> Result<(), ScheduleError> {
        spec.validate()?;
        if spec.protocol.beta() != 0.0 && self.params.anharmonicity == 0.0 {
            return Err(ScheduleError::QuadratureUndefined);
        }
        let envelope = GaussianEnvelope {
            amplitude: spec.resolved_amplitude(),
            center,
            fwhm: spec.fwhm,
        };
        self.check_window(envelope.window(), simultaneous)?;
        self.microwaves.push(PlacedMicrowave {
            envelope,
            beta: spec.protocol.beta(),
            axis_phi: spec.axis_phi,
            carrier: self.params.transition_frequency(spec.transition.base()) + spec.drive_detuning,
            base: spec.transition.base(),
        });
        Ok(())
    }

    fn insert_z(
        &mut self,
        spec: &ZPulseSpec,
        center: f64,
        simultaneous: bool,
    ) -> Result<(), ScheduleError> {
        spec.validate()?;
        let envelope = GaussianEnvelope { amplitude: spec.amplitude, center, fwhm: spec.fwhm };
        self.check_window(envelope.window(), simultaneous)?;
        self.z_pulses.push(PlacedZPulse { envelope });
        Ok(())
    }

    /// Appends a gate after everything scheduled so far.
    pub fn push_gate(&mut self, spec: &GateSpec) -> Result<&mut Self, ScheduleError> {
        if self.last_was_pulse {
            self.cursor += self.gap;
        }
        let center = self.cursor + 2.0 * spec.fwhm;
        self.insert_gate(spec, center, false)?;
        self.cursor = center + 2.0 * spec.fwhm;
        self.last_was_pulse = true;
        Ok(self)
    }

    /// Appends a z pulse after everything scheduled so far.
    pub fn push_z(&mut self, spec: &ZPulseSpec) -> Result<&mut Self, ScheduleError> {
        if self.last_was_pulse {
            self.cursor += self.gap;
        }
        let center = self.cursor + 2.0 * spec.fwhm;
        self.insert_z(spec, center, false)?;
        self.cursor = center + 2.0 * spec.fwhm;
        self.last_was_pulse = true;
        Ok(self)
    }

    /// Appends dead time (free evolution).
    pub fn push_idle(&mut self, duration: f64) -> Result<&mut Self, ScheduleError> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(ScheduleError::InvalidSpec(format!(
                "idle duration must be nonnegative and finite, got {duration}"
            )));
        }
        self.cursor += duration;
        self.end = self.end.max(self.cursor);
        self.last_was_pulse = false;
        Ok(self)
    }

    /// Pins a gate at an explicit center time. With `simultaneous` the window
    /// may overlap other pulses (calibrated simultaneous-drive sequences).
    pub fn place_gate_at(
        &mut self,
        spec: &GateSpec,
        center: f64,
        simultaneous: bool,
    ) -> Result<&mut Self, ScheduleError> {
        self.insert_gate(spec, center, simultaneous)?;
        Ok(self)
    }

    /// Pins a z pulse at an explicit center time.
    pub fn place_z_at(
        &mut self,
        spec: &ZPulseSpec,
        center: f64,
        simultaneous: bool,
    ) -> Result<&mut Self, ScheduleError> {
        self.insert_z(spec, center, simultaneous)?;
        Ok(self)
    }

    pub fn finish(self) -> ControlSequence {
        ControlSequence {
            duration: self.end.max(self.cursor),
            frame: self.params.frame,
            delta_rad: 2.0 * std::f64::consts::PI * self.params.anharmonicity,
            microwaves: self.microwaves,
            z_pulses: self.z_pulses,
        }
    }
}

/// Schedules a list of elements left to right with `gap` ns between pulse
/// windows.
pub fn schedule(
    params: &QuditParams,
    elements: &[SequenceElement],
    gap: f64,
) -> Result<ControlSequence, ScheduleError> {
    let mut b = SequenceBuilder::new(params, gap)?;
    for el in elements {
        match el {
            SequenceElement::Gate(g) => {
                b.push_gate(g)?;
            }
            SequenceElement::Z(z) => {
                b.push_z(z)?;
            }
            SequenceElement::Idle(d) => {
                b.push_idle(*d)?;
            }
        }
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_peak_and_half_width() {
        let e = GaussianEnvelope { amplitude: 1.0, center: 10.0, fwhm: 6.0 };
        assert!((e.value(10.0) - 1.0).abs() < 1e-15);
        assert!((e.value(13.0) - 0.5).abs() < 1e-12);
        assert!((e.value(7.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn schedule_single_pi_pulse() {
        let p = QuditParams::default_three_level();
        let seq = schedule(
            &p,
            &[SequenceElement::Gate(GateSpec::new(std::f64::consts::PI, 6.0))],
            0.0,
        )
        .unwrap();
        assert!((seq.duration() - 24.0).abs() < 1e-12);
        let peak = seq.x(12.0);
        assert!(peak > seq.x(11.0) && peak > seq.x(13.0));
    }

    #[test]
    fn overlap_rejected_without_flag() {
        let p = QuditParams::default_three_level();
        let g = GateSpec::new(std::f64::consts::FRAC_PI_2, 6.0);
        let mut b = SequenceBuilder::new(&p, 0.0).unwrap();
        b.place_gate_at(&g, 12.0, false).unwrap();
        let err = b.place_gate_at(&g, 20.0, false).err().unwrap();
        assert!(matches!(err, ScheduleError::Overlap { .. }));
    }
}
