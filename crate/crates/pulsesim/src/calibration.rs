//! The calibration chain: every knob the experiments depend on — pulse
//! amplitude, drive frequency, upper-transition frequency, z-pulse scale, and
//! the derivative-quadrature weight — measured from simulated fringe data
//! rather than assumed.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::device::QuditParams;
use crate::metrology::{
    fit_fringe, fit_time_fringe_lenient, FringeKind, FringeScan, MetrologyError,
};
use crate::numerics::{golden_max, golden_min, linear_fit, unwrap_phases};
use crate::pulse::{
    amplitude_for_angle, gaussian_area_factor, GateSpec, SequenceBuilder, ShapingProtocol,
    Transition, ZPulseSpec, TRUNCATED_AREA_FRACTION,
};
use crate::sim::{
    axis_conjugate, effective_gate_of_pulse, gate_unitary, idle_unitary, propagate_unitary,
    PropagatorConfig, SimError,
};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Relative bracket around the analytic amplitude seed searched by
/// [`tune_amplitude`].
pub const AMPLITUDE_SEARCH_BRACKET: (f64, f64) = (0.9, 1.1);
/// Golden-section iterations used by the amplitude search.
pub const AMPLITUDE_SEARCH_ITERS: usize = 70;
/// Per-sample analysis-axis advance used by [`track_frequency`], GHz. Turning
/// the Ramsey axis at a known rate moves the fringe to a nonzero frequency so
/// small detunings of either sign are resolvable.
pub const TRACK_AXIS_ADVANCE: f64 = 0.050;
/// Number of delay samples used by [`track_frequency`].
pub const TRACK_POINTS: usize = 201;
/// Pulse width of the Ramsey analysis pulses used throughout the chain, ns.
pub const RAMSEY_FWHM: f64 = 6.0;
/// Shortest usable [`track_frequency`] scan: two full periods of the axis
/// advance.
pub const MIN_TRACK_SPAN: f64 = 40.0;

/// A calibrated number together with the residual of the fit or search that
/// produced it. For population targets the residual is the distance of the
/// achieved population from the ideal target (leakage-limited for full
/// transfers); for fringe fits it is the RMS misfit; for multi-point
/// estimates it is the spread.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fitted {
    pub value: f64,
    pub residual: f64,
}

/// Calibration failures.
#[derive(Debug)]
pub enum CalibrationError {
    /// Frequency tracking needs at least [`MIN_TRACK_SPAN`] ns of delay scan.
    InsufficientScan { t_max: f64 },
    /// A deliberately detuned measurement was requested with zero detuning;
    /// the sign of the fitted beat frequency would be unresolvable.
    DegenerateDetuning,
    /// The fitted z-pulse amplitude fell outside the scanned grid.
    NoExtremumInGrid { value: f64, lo: f64, hi: f64 },
    /// Bisection for the quadrature weight needs opposite phase-error signs at
    /// the bracket ends.
    NoSignChange { lo: f64, hi: f64 },
    InvalidInput(String),
    Sim(SimError),
    Metrology(MetrologyError),
    /// A pipeline stage failed; `name` identifies which one so runners can
    /// report where the chain broke.
    Stage { name: &'static str, source: Box<CalibrationError> },
}

impl std::fmt::Display for CalibrationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CalibrationError::InsufficientScan { t_max } => write!(
                f,
                "delay scan of {t_max} ns is too short to resolve the fringe; \
                 need at least {MIN_TRACK_SPAN} ns"
            ),
            CalibrationError::DegenerateDetuning => write!(
                f,
                "deliberate detuning of zero is degenerate: the beat frequency sign \
                 cannot be resolved"
            ),
            CalibrationError::NoExtremumInGrid { value, lo, hi } => write!(
                f,
                "no oscillation extremum inside amp_grid: fitted z amplitude \
                 {value:.6} GHz lies outside [{lo:.6}, {hi:.6}]"
            ),
            CalibrationError::NoSignChange { lo, hi } => write!(
                f,
                "phase error has the same sign at both bracket ends [{lo}, {hi}]; \
                 no quadrature weight zero crossing inside"
            ),
            CalibrationError::InvalidInput(m) => write!(f, "invalid calibration input: {m}"),
            CalibrationError::Sim(e) => write!(f, "{e}"),
            CalibrationError::Metrology(e) => write!(f, "{e}"),
            CalibrationError::Stage { name, source } => {
                write!(f, "calibration stage '{name}' failed: {source}")
            }
        }
    }
}

impl std::error::Error for CalibrationError {}

impl From<SimError> for CalibrationError {
    fn from(e: SimError) -> Self {
        CalibrationError::Sim(e)
    }
}

impl From<MetrologyError> for CalibrationError {
    fn from(e: MetrologyError) -> Self {
        CalibrationError::Metrology(e)
    }
}

impl From<crate::pulse::ScheduleError> for CalibrationError {
    fn from(e: crate::pulse::ScheduleError) -> Self {
        CalibrationError::Sim(SimError::Schedule(e))
    }
}

/// Searches the pulse amplitude that realizes the rotation angle `theta`
/// (0 < theta <= pi) on the 0<->1 transition: golden-section minimization of
/// `|P1 - sin^2(theta/2)|` over a +/-10% bracket around the analytic seed
/// `theta / (tau * area * truncated_fraction)`. Converging onto a bracket edge
/// is reported as an error (the true optimum lies outside the search range).
///
/// Returns a [`SimError`] so propagator-level scans can chain it directly.
pub fn tune_amplitude(
    params: &QuditParams,
    theta: f64,
    tau: f64,
    protocol: ShapingProtocol,
    config: &PropagatorConfig,
) -> Result<Fitted, SimError> {
    tune_amplitude_detuned(params, theta, tau, protocol, 0.0, config)
}

/// [`tune_amplitude`] with the drive carrier offset `drive_detuning` GHz from
/// the 0<->1 transition: the tuning an operator gets when the synthesizer sits
/// on a stale frequency estimate. The optimum shifts downward with detuning
/// (the generalized rotation angle picks up a detuning contribution, so the
/// population maximum is reached with less drive area) until, for offsets of a
/// few tens of MHz at the default width, it leaves the search bracket entirely
/// and the search reports the bracket-edge error.
pub fn tune_amplitude_detuned(
    params: &QuditParams,
    theta: f64,
    tau: f64,
    protocol: ShapingProtocol,
    drive_detuning: f64,
    config: &PropagatorConfig,
) -> Result<Fitted, SimError> {
    if !(theta > 0.0 && theta <= std::f64::consts::PI + 1e-12) {
        return Err(SimError::InvalidConfig(format!(
            "amplitude tuning is defined for rotation angles in (0, pi], got {theta}"
        )));
    }
    let seed = amplitude_for_angle(theta, tau) / TRUNCATED_AREA_FRACTION;
    let (lo, hi) = (AMPLITUDE_SEARCH_BRACKET.0 * seed, AMPLITUDE_SEARCH_BRACKET.1 * seed);
    let target = (0.5 * theta).sin().powi(2);
    let p1_of = |amp: f64| -> Result<f64, SimError> {
        let spec = GateSpec::new(theta, tau)
            .with_protocol(protocol)
            .with_amplitude(amp)
            .with_drive_detuning(drive_detuning);
        Ok(gate_unitary(params, &spec, config)?[(1, 0)].norm_sqr())
    };
    // Surface schedule/propagator errors once; they cannot depend on the
    // amplitude value, so the search closure may unwrap.
    p1_of(seed)?;
    let opt = golden_min(
        |amp| {
            (p1_of(amp).expect("pulse already propagated at the seed amplitude") - target).abs()
        },
        lo,
        hi,
        AMPLITUDE_SEARCH_ITERS,
    );
    let width = hi - lo;
    if (opt - lo).abs() < 1e-6 * width || (hi - opt).abs() < 1e-6 * width {
        return Err(SimError::InvalidConfig(format!(
            "amplitude search pinned at a bracket edge ([{lo:.6}, {hi:.6}] rad/ns); \
             the optimum lies outside the +/-10% range around the analytic seed"
        )));
    }
    let residual = (p1_of(opt)? - target).abs();
    Ok(Fitted { value: opt, residual })
}

fn ground_state(dim: usize) -> DVector<Complex64> {
    let mut e0 = DVector::<Complex64>::zeros(dim);
    e0[0] = Complex64::new(1.0, 0.0);
    e0
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn phi_circle(n: usize) -> Vec<f64> {
    (0..n).map(|k| TWO_PI * k as f64 / n as f64).collect()
}

/// Measures the qubit-minus-drive detuning in two stages. A Ramsey delay scan
/// whose analysis axis advances at [`TRACK_AXIS_ADVANCE`] — the population
/// after `pi/2 - idle(t) - pi/2(axis -2 pi f_adv t)` oscillates at
/// `f_adv + df` — gives a coarse estimate good to ~0.1 MHz; then two
/// full-circle phase fringes at fixed delays refine it: their phase offsets
/// each carry a pulse-induced constant that cancels in the delay difference,
/// and the circle fit is immune to the leakage-harmonic ripple that biases
/// the time fit. The refinement pins the residual detuning to the kHz level,
/// which downstream amplitude tunes need (the third level makes the tuned
/// amplitude linearly sensitive to the carrier offset).
///
/// `df_true` stands in for a drifted qubit: the observation frame and the
/// pulse carriers both sit at the stale assumption `f10 - df_true`, so the
/// idle phase advances at `df_true` and the Ramsey pulses are genuinely
/// detuned, exactly as on a rig whose synthesizer lags the device.
pub fn track_frequency(
    params: &QuditParams,
    df_true: f64,
    t_max: f64,
    config: &PropagatorConfig,
) -> Result<Fitted, CalibrationError> {
    if !(t_max >= MIN_TRACK_SPAN) {
        return Err(CalibrationError::InsufficientScan { t_max });
    }
    let detuned = params.with_frame(params.f10 - df_true);
    let half =
        GateSpec::new(std::f64::consts::FRAC_PI_2, RAMSEY_FWHM).with_drive_detuning(-df_true);
    let a = gate_unitary(&detuned, &half, config)?;
    let ts = linspace(0.0, t_max, TRACK_POINTS);
    let ps: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let analysis = axis_conjugate(&a, -TWO_PI * TRACK_AXIS_ADVANCE * t);
            (analysis * (idle_unitary(&detuned, t) * &a))[(1, 0)].norm_sqr()
        })
        .collect();
    let fit = fit_fringe(&FringeScan { abscissa: ts, p: ps, kind: FringeKind::Time })?;
    let coarse = fit.frequency.expect("time fits always carry a frequency") - TRACK_AXIS_ADVANCE;

    let phase_at = |t: f64| -> Result<(f64, f64), CalibrationError> {
        let da = idle_unitary(&detuned, t) * &a;
        let phis = phi_circle(64);
        let ps: Vec<f64> =
            phis.iter().map(|&phi| (axis_conjugate(&a, phi) * &da)[(1, 0)].norm_sqr()).collect();
        let f = fit_fringe(&FringeScan { abscissa: phis, p: ps, kind: FringeKind::Phase })?;
        Ok((f.phase_offset, f.rms_residual))
    };
    let (t1, t2) = (0.25 * t_max, t_max);
    let (phi1, rms1) = phase_at(t1)?;
    let (phi2, rms2) = phase_at(t2)?;
    // The coarse estimate is far better than the half-cycle-per-baseline
    // ambiguity of the phase difference, so the wrapped correction is safe.
    let correction =
        wrap_angle(phi2 - phi1 - TWO_PI * coarse * (t2 - t1)) / (TWO_PI * (t2 - t1));
    Ok(Fitted { value: coarse + correction, residual: rms1.max(rms2) })
}

/// Phase of the Ramsey fringe (`pi/2 - idle - pi/2(axis phi)`, phi swept over
/// `phi_grid` uniform angles) after `idle_ns` of free evolution at detuning
/// `df_true`. The difference between two idle times is `2 pi df dt`: the
/// accumulated-phase cross-check of the frequency tracker.
pub fn idle_phase_shift(
    params: &QuditParams,
    df_true: f64,
    idle_ns: f64,
    phi_grid: usize,
    config: &PropagatorConfig,
) -> Result<f64, CalibrationError> {
    let detuned = params.with_frame(params.f10 - df_true);
    let half =
        GateSpec::new(std::f64::consts::FRAC_PI_2, RAMSEY_FWHM).with_drive_detuning(-df_true);
    let a = gate_unitary(&detuned, &half, config)?;
    let da = idle_unitary(&detuned, idle_ns) * &a;
    let phis = phi_circle(phi_grid);
    let ps: Vec<f64> =
        phis.iter().map(|&phi| (axis_conjugate(&a, phi) * &da)[(1, 0)].norm_sqr()).collect();
    let fit = fit_fringe(&FringeScan { abscissa: phis, p: ps, kind: FringeKind::Phase })?;
    Ok(fit.phase_offset)
}

/// Full two-dimensional Ramsey data set: rows indexed by idle time, columns by
/// analysis-pulse axis angle (a uniform full circle of `phi_grid` angles).
/// At zero detuning every row is the same fringe; a detuning tilts the
/// interference ridge with slope `2 pi df` in phase per ns.
pub fn two_d_ramsey(
    params: &QuditParams,
    df_true: f64,
    t_grid: &[f64],
    phi_grid: usize,
    config: &PropagatorConfig,
) -> Result<Vec<Vec<f64>>, CalibrationError> {
    if t_grid.is_empty() {
        return Err(CalibrationError::InvalidInput("empty idle-time grid".into()));
    }
    if phi_grid < 16 {
        return Err(CalibrationError::InvalidInput(format!(
            "phi_grid must be at least 16, got {phi_grid}"
        )));
    }
    let detuned = params.with_frame(params.f10 - df_true);
    let half =
        GateSpec::new(std::f64::consts::FRAC_PI_2, RAMSEY_FWHM).with_drive_detuning(-df_true);
    let a = gate_unitary(&detuned, &half, config)?;
    let analysis: Vec<_> = phi_circle(phi_grid).iter().map(|&p| axis_conjugate(&a, p)).collect();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let da = idle_unitary(&detuned, t) * &a;
            analysis.iter().map(|c| (c * &da)[(1, 0)].norm_sqr()).collect()
        })
        .collect())
}

/// Slope of the [`two_d_ramsey`] ridge: per-row fringe phases, unwrapped and
/// fitted against idle time. Equals `2 pi df` (rad/ns) up to pulse-length
/// corrections.
pub fn ridge_slope(
    params: &QuditParams,
    df_true: f64,
    t_grid: &[f64],
    phi_grid: usize,
    config: &PropagatorConfig,
) -> Result<Fitted, CalibrationError> {
    let rows = two_d_ramsey(params, df_true, t_grid, phi_grid, config)?;
    let phis = phi_circle(phi_grid);
    let mut phases = Vec::with_capacity(rows.len());
    for row in &rows {
        let fit = fit_fringe(&FringeScan {
            abscissa: phis.clone(),
            p: row.clone(),
            kind: FringeKind::Phase,
        })?;
        phases.push(fit.phase_offset);
    }
    unwrap_phases(&mut phases);
    let lf = linear_fit(t_grid, &phases);
    Ok(Fitted { value: lf.slope, residual: lf.max_abs_residual })
}

/// Analytic z-pulse amplitude (GHz) whose truncated Gaussian area advances the
/// |1> phase by pi.
pub fn analytic_z_pi_amplitude(tau_z: f64) -> f64 {
    1.0 / (2.0 * tau_z * gaussian_area_factor() * TRUNCATED_AREA_FRACTION)
}

/// Default amplitude grid for [`calibrate_z`]: 45 points from zero to 2.2x the
/// analytic pi amplitude (slightly more than one full fringe period).
pub fn default_z_amplitude_grid(tau_z: f64) -> Vec<f64> {
    linspace(0.0, 2.2 * analytic_z_pi_amplitude(tau_z), 45)
}

/// Calibrates the z-pulse amplitude that advances the qubit phase by pi: two
/// half-derivative pi/2 pulses (using the already-tuned `half_pi_amplitude`)
/// separated by `t_fixed` ns with a z pulse of width `tau_z` centered between
/// them, swept over `amp_grid`. P1 traces a fringe in the z amplitude; the
/// amplitude at which its phase reaches pi is returned. Errors if that
/// amplitude falls outside the scanned grid.
pub fn calibrate_z(
    params: &QuditParams,
    t_fixed: f64,
    tau_z: f64,
    amp_grid: &[f64],
    half_pi_amplitude: f64,
    config: &PropagatorConfig,
) -> Result<Fitted, CalibrationError> {
    if !(t_fixed > 0.0 && tau_z > 0.0) {
        return Err(CalibrationError::InvalidInput(
            "t_fixed and tau_z must be positive".into(),
        ));
    }
    if amp_grid.len() < 8 {
        return Err(CalibrationError::InvalidInput(format!(
            "amp_grid needs at least 8 points, got {}",
            amp_grid.len()
        )));
    }
    let c1 = 2.0 * RAMSEY_FWHM;
    let c2 = c1 + t_fixed;
    let x_spec = GateSpec::new(std::f64::consts::FRAC_PI_2, RAMSEY_FWHM)
        .with_protocol(ShapingProtocol::HalfDerivative)
        .with_amplitude(half_pi_amplitude);
    let mut ps = Vec::with_capacity(amp_grid.len());
    for &za in amp_grid {
        let mut b = SequenceBuilder::new(params, 0.0)?;
        b.place_gate_at(&x_spec, c1, false)?;
        b.place_gate_at(&x_spec, c2, false)?;
        b.place_z_at(&ZPulseSpec::new(za, tau_z), 0.5 * (c1 + c2), true)?;
        let u = propagate_unitary(params, &b.finish(), config)?;
        ps.push(u[(1, 0)].norm_sqr());
    }
    let fit = fit_time_fringe_lenient(amp_grid, &ps)?;
    let freq = fit.frequency.expect("time fits always carry a frequency");
    let z_pi = (std::f64::consts::PI - fit.phase_offset) / (TWO_PI * freq);
    let (lo, hi) = (amp_grid[0], amp_grid[amp_grid.len() - 1]);
    if !(z_pi >= lo && z_pi <= hi) {
        return Err(CalibrationError::NoExtremumInGrid { value: z_pi, lo, hi });
    }
    Ok(Fitted { value: z_pi, residual: fit.rms_residual })
}

/// Delay grid used by [`measure_f21`]: 301 samples over 600 ns.
pub const F21_DELAY_MAX: f64 = 600.0;
const F21_DELAY_POINTS: usize = 301;

/// Measures the 1<->2 transition frequency by a Ramsey pair on the upper
/// transition, driven deliberately off the assumed frequency. |1> is prepared
/// by a plain Gaussian (pi)_01 pulse of width `prep_fwhm`; two (pi/2)_12
/// pulses separated by a scanned delay beat at the true offset between the
/// drive and the 1<->2 transition. Each deliberate detuning gives
/// `f21 = f_drive - sign(detuning) * f_beat`; the estimates are averaged and
/// their spread reported as the residual. A zero detuning is rejected since
/// the beat sign would be unresolvable.
pub fn measure_f21(
    params: &QuditParams,
    f21_assumed: f64,
    deliberate_detunings: &[f64],
    prep_fwhm: f64,
    config: &PropagatorConfig,
) -> Result<Fitted, CalibrationError> {
    if params.dim < 3 {
        return Err(CalibrationError::InvalidInput(
            "measuring the 1<->2 transition needs at least three levels".into(),
        ));
    }
    if deliberate_detunings.is_empty() {
        return Err(CalibrationError::InvalidInput("no deliberate detunings given".into()));
    }
    if !(prep_fwhm > 0.0) {
        return Err(CalibrationError::InvalidInput("prep_fwhm must be positive".into()));
    }
    let mut estimates = Vec::with_capacity(deliberate_detunings.len());
    for &detuning in deliberate_detunings {
        if detuning.abs() < 1e-6 {
            return Err(CalibrationError::DegenerateDetuning);
        }
        let f_drive = f21_assumed + detuning;
        let device = params.with_frame(f_drive);
        let prep = gate_unitary(&device, &GateSpec::new(std::f64::consts::PI, prep_fwhm), config)?;
        let b = gate_unitary(
            &device,
            &GateSpec::new(std::f64::consts::FRAC_PI_2, RAMSEY_FWHM)
                .with_transition(Transition::Q12),
            config,
        )?;
        let psi1 = &b * (&prep * ground_state(params.dim));
        let ts = linspace(0.0, F21_DELAY_MAX, F21_DELAY_POINTS);
        let ps: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let idled = idle_unitary(&device, t) * &psi1;
                (&b * idled)[2].norm_sqr()
            })
            .collect();
        let fit = fit_time_fringe_lenient(&ts, &ps)?;
        let beat = fit.frequency.expect("time fits always carry a frequency");
        estimates.push(f_drive - detuning.signum() * beat);
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let spread =
        estimates.iter().map(|e| (e - mean).abs()).fold(0.0_f64, f64::max);
    Ok(Fitted { value: mean, residual: spread })
}

/// Finds the derivative-quadrature weight that nulls the per-gate phase error:
/// bisection (40 halvings) on the sign of the extracted phase error of a
/// single pi/2 pulse with `DerivativeScaled(beta)` shaping and analytic
/// amplitude. Errors if the phase error has the same sign at both bracket
/// ends.
pub fn optimize_beta(
    params: &QuditParams,
    theta: f64,
    tau: f64,
    bracket: (f64, f64),
    config: &PropagatorConfig,
) -> Result<Fitted, CalibrationError> {
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CalibrationError::InvalidInput(format!(
            "invalid beta bracket [{lo}, {hi}]"
        )));
    }
    let eps_of = |beta: f64| -> Result<f64, CalibrationError> {
        let spec =
            GateSpec::new(theta, tau).with_protocol(ShapingProtocol::DerivativeScaled(beta));
        let gate = effective_gate_of_pulse(params, &spec, config)?;
        gate.epsilon
            .map(|e| e.epsilon)
            .map_err(|e| CalibrationError::InvalidInput(e.to_string()))
    };
    let mut f_lo = eps_of(lo)?;
    let f_hi = eps_of(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(CalibrationError::NoSignChange { lo, hi });
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let f_mid = eps_of(mid)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let beta_star = 0.5 * (lo + hi);
    let residual = eps_of(beta_star)?.abs();
    Ok(Fitted { value: beta_star, residual })
}

/// Calibrated knobs of the two-stage Hadamard recipe: a half-derivative-shaped
/// microwave pulse and a simultaneous negative z pulse of the same width, each
/// nominally rotating by pi/sqrt(2).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HadamardCalibration {
    /// Microwave amplitude for one full stage, rad/ns.
    pub x_amplitude: f64,
    /// Z amplitude for one full stage, GHz (negative).
    pub z_amplitude: f64,
    /// Drive axis angle of the microwave pulse, rad.
    pub x_phase: f64,
    /// Pulse width the knobs were calibrated for, ns.
    pub fwhm: f64,
    /// |<+|psi(s=1)>|^2 achieved at the calibrated knobs.
    pub fidelity_plus: f64,
    /// |<0|psi(s=2)>|^2 achieved at the calibrated knobs.
    pub fidelity_identity: f64,
}

/// Builds the scaled-Hadamard sequence for sweep parameter `s` in [0, 2]:
/// one simultaneous X+Z stage scaled by `s` for s <= 1 (duration 4 tau), or a
/// full first stage followed by a second scaled to `s - 1` (duration 8 tau).
pub(crate) fn hadamard_sequence(
    params: &QuditParams,
    tau: f64,
    s: f64,
    x_amplitude: f64,
    z_amplitude: f64,
    x_phase: f64,
) -> Result<crate::pulse::ControlSequence, crate::pulse::ScheduleError> {
    let stages: Vec<(f64, f64)> = if s <= 1.0 {
        vec![(s, 2.0 * tau)]
    } else {
        vec![(1.0, 2.0 * tau), (s - 1.0, 6.0 * tau)]
    };
    let mut b = SequenceBuilder::new(params, 0.0)?;
    for &(frac, center) in &stages {
        let x_spec = GateSpec::new(std::f64::consts::PI / std::f64::consts::SQRT_2, tau)
            .with_protocol(ShapingProtocol::HalfDerivative)
            .with_axis(x_phase)
            .with_amplitude(x_amplitude * frac);
        b.place_gate_at(&x_spec, center, false)?;
        b.place_z_at(&ZPulseSpec::new(z_amplitude * frac, tau), center, true)?;
    }
    Ok(b.finish())
}

fn hadamard_state(
    params: &QuditParams,
    tau: f64,
    s: f64,
    x_amplitude: f64,
    z_amplitude: f64,
    x_phase: f64,
    config: &PropagatorConfig,
) -> Result<DVector<Complex64>, SimError> {
    let seq = hadamard_sequence(params, tau, s, x_amplitude, z_amplitude, x_phase)
        .map_err(SimError::Schedule)?;
    Ok(propagate_unitary(params, &seq, config)?.column(0).into_owned())
}

fn state_fidelity(target: &DVector<Complex64>, psi: &DVector<Complex64>) -> f64 {
    target.dotc(psi).norm_sqr()
}

/// Calibrates [`HadamardCalibration`] by coordinate golden-section ascent on
/// the joint objective `|<+|psi(s=1)>|^2 * |<0|psi(s=2)>|^2`: five sweeps over
/// the three knobs, each refined within a +/-7% (amplitudes) or +/-0.3 rad
/// (phase) bracket around its current value. Seeds are the analytic
/// truncated-area amplitudes for a pi/sqrt(2) rotation.
///
/// Tuning on the s=1 state alone leaves a residual axis misalignment that the
/// second stage doubles; the joint objective is what makes both trajectory
/// endpoints land.
pub fn calibrate_hadamard(
    params: &QuditParams,
    tau: f64,
    config: &PropagatorConfig,
) -> Result<HadamardCalibration, CalibrationError> {
    if params.dim < 2 {
        return Err(CalibrationError::InvalidInput("need at least two levels".into()));
    }
    let angle = std::f64::consts::PI / std::f64::consts::SQRT_2;
    let norm = tau * gaussian_area_factor() * TRUNCATED_AREA_FRACTION;
    let mut ax = angle / norm;
    let mut az = -angle / (TWO_PI * norm);
    let mut phix = 0.0_f64;

    let mut plus = DVector::<Complex64>::zeros(params.dim);
    plus[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    plus[1] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let zero = ground_state(params.dim);

    let objective = |ax: f64, az: f64, phix: f64| -> Result<f64, SimError> {
        let f1 = state_fidelity(&plus, &hadamard_state(params, tau, 1.0, ax, az, phix, config)?);
        let f2 = state_fidelity(&zero, &hadamard_state(params, tau, 2.0, ax, az, phix, config)?);
        Ok(f1 * f2)
    };
    // Surface schedule/propagator errors once; the knob values cannot change
    // the error paths, so the search closures may unwrap.
    objective(ax, az, phix)?;
    for _ in 0..5 {
        ax = golden_max(
            |v| objective(v, az, phix).expect("sequence already propagated at the seed knobs"),
            0.93 * ax,
            1.07 * ax,
            40,
        );
        az = golden_max(
            |v| objective(ax, v, phix).expect("sequence already propagated at the seed knobs"),
            1.07 * az,
            0.93 * az,
            40,
        );
        phix = golden_max(
            |v| objective(ax, az, v).expect("sequence already propagated at the seed knobs"),
            phix - 0.3,
            phix + 0.3,
            40,
        );
    }
    let fidelity_plus =
        state_fidelity(&plus, &hadamard_state(params, tau, 1.0, ax, az, phix, config)?);
    let fidelity_identity =
        state_fidelity(&zero, &hadamard_state(params, tau, 2.0, ax, az, phix, config)?);
    Ok(HadamardCalibration {
        x_amplitude: ax,
        z_amplitude: az,
        x_phase: phix,
        fwhm: tau,
        fidelity_plus,
        fidelity_identity,
    })
}

/// Everything the calibration pipeline measured, with per-quantity residuals.
/// `config_hash` identifies the run configuration (filled by callers that own
/// a config file); no wall-clock state is recorded, so equal inputs give
/// byte-equal records.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRecord {
    pub pi_amplitude: Fitted,
    pub half_pi_amplitude: Fitted,
    /// Relative deviation of tune(pi)/2 from tune(pi/2): a consistency check
    /// on the amplitude search, dimensionless.
    pub half_pi_check: f64,
    /// 0<->1 transition frequency estimate, GHz.
    pub f10_estimate: Fitted,
    /// 1<->2 transition frequency estimate, GHz.
    pub f21_estimate: Fitted,
    /// f21 - f10, GHz.
    pub anharmonicity_estimate: f64,
    /// Z amplitude advancing the qubit phase by pi, GHz.
    pub z_pi_amplitude: Fitted,
    /// Quadrature weight that nulls the per-gate phase error.
    pub beta_star: Fitted,
    /// Shaping protocol the amplitudes were tuned for.
    pub protocol: ShapingProtocol,
    /// Pulse width the amplitudes were tuned for, ns.
    pub fwhm: f64,
    pub config_hash: Option<String>,
    pub tool_version: String,
}

/// Runs the full chain on a device of at least three levels: amplitude tuning
/// (pi and pi/2, half-derivative shaping), frequency tracking, 1<->2
/// frequency measurement, z-pulse calibration, and quadrature-weight
/// optimization. Deterministic: no randomness, no timestamps.
///
/// Equivalent to [`run_drifted_calibration`] with zero drift.
pub fn run_calibration_pipeline(
    params: &QuditParams,
    config: &PropagatorConfig,
) -> Result<CalibrationRecord, CalibrationError> {
    run_drifted_calibration(params, 0.0, config)
}

fn stage<T>(
    name: &'static str,
    r: Result<T, impl Into<CalibrationError>>,
) -> Result<T, CalibrationError> {
    r.map_err(|e| CalibrationError::Stage { name, source: Box::new(e.into()) })
}

/// [`run_calibration_pipeline`] on a device whose qubit frequency has drifted
/// `df_true` GHz above the operator's assumed value (`params.f10 - df_true`).
///
/// The first amplitude tune drives at the stale assumed carrier, exactly as a
/// live rig would; it fails with the bracket-edge error when the drift is
/// comparable to the Rabi rate. Once the tracking stage has measured the
/// drift, the amplitudes are re-tuned at the corrected carrier — those are the
/// values recorded, so rerunning the pipeline from the produced record moves
/// them by only the residual tracking error — and every later stage drives at
/// the corrected estimate. Each stage failure is wrapped in
/// [`CalibrationError::Stage`] naming the stage.
pub fn run_drifted_calibration(
    params: &QuditParams,
    df_true: f64,
    config: &PropagatorConfig,
) -> Result<CalibrationRecord, CalibrationError> {
    if params.dim < 3 {
        return Err(CalibrationError::InvalidInput(
            "the calibration pipeline measures the 1<->2 transition and needs at least \
             three levels"
                .into(),
        ));
    }
    if !df_true.is_finite() {
        return Err(CalibrationError::InvalidInput(format!(
            "drift must be finite, got {df_true}"
        )));
    }
    let tau = RAMSEY_FWHM;
    let protocol = ShapingProtocol::HalfDerivative;
    let assumed = params.f10 - df_true;
    let stale = params.with_frame(assumed);
    stage(
        "tune_amplitude",
        tune_amplitude_detuned(&stale, std::f64::consts::PI, tau, protocol, -df_true, config),
    )?;
    let track = stage("track_frequency", track_frequency(params, df_true, 200.0, config))?;
    let f10_estimate = Fitted { value: assumed + track.value, residual: track.residual };
    // From here on drive at the tracked frequency, not the stale assumption;
    // the recorded amplitudes are re-tuned there.
    let corrected = params.with_frame(f10_estimate.value);
    let residual_detuning = f10_estimate.value - params.f10;
    let pi_amplitude = stage(
        "tune_amplitude",
        tune_amplitude_detuned(
            &corrected,
            std::f64::consts::PI,
            tau,
            protocol,
            residual_detuning,
            config,
        ),
    )?;
    let half_pi_amplitude = stage(
        "tune_amplitude",
        tune_amplitude_detuned(
            &corrected,
            std::f64::consts::FRAC_PI_2,
            tau,
            protocol,
            residual_detuning,
            config,
        ),
    )?;
    let half_pi_check = 0.5 * pi_amplitude.value / half_pi_amplitude.value - 1.0;
    let f21_estimate = stage(
        "measure_f21",
        measure_f21(
            &corrected,
            f10_estimate.value + params.anharmonicity,
            &[0.005, -0.005],
            4.0,
            config,
        ),
    )?;
    let grid = default_z_amplitude_grid(tau);
    let z_pi_amplitude = stage(
        "calibrate_z",
        calibrate_z(&corrected, 24.0, tau, &grid, half_pi_amplitude.value, config),
    )?;
    let beta_star = stage(
        "optimize_beta",
        optimize_beta(&corrected, std::f64::consts::FRAC_PI_2, tau, (0.0, 1.5), config),
    )?;
    Ok(CalibrationRecord {
        pi_amplitude,
        half_pi_amplitude,
        half_pi_check,
        f10_estimate,
        anharmonicity_estimate: f21_estimate.value - f10_estimate.value,
        f21_estimate,
        z_pi_amplitude,
        beta_star,
        protocol,
        fwhm: tau,
        config_hash: None,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}
