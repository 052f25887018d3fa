//! Time evolution of the d-level anharmonic ladder under a scheduled control
//! sequence, in the rotating frame.
//!
//! The integrator is an exponential midpoint rule: over each step the
//! Hamiltonian is frozen at the step midpoint and the exact matrix exponential
//! `exp(-i H dt)` is applied, so every step is exactly unitary and the global
//! error is second order in `dt`. The exponential of the small (d <= 5)
//! anti-Hermitian step generator is evaluated by a scaled fixed-order Taylor
//! series, which at `||H dt|| < 0.25` is accurate to machine precision.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::device::QuditParams;
use crate::gate_algebra::{extract_epsilon, EpsilonExtraction, GateAlgebraError, QubitGate};
use crate::pulse::{ControlSequence, GateSpec, ScheduleError, SequenceBuilder, ShapingProtocol, Transition};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    /// Time step in ns (default 0.005).
    pub dt: f64,
    /// Keep only the co-rotating drive term (default true). Disabling it adds
    /// the counter-rotating term oscillating near twice the carrier frequency,
    /// which requires a far smaller `dt` to resolve.
    pub rotating_wave: bool,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig { dt: 0.005, rotating_wave: true }
    }
}

impl PropagatorConfig {
    pub fn with_dt(dt: f64) -> Self {
        PropagatorConfig { dt, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Simulation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidConfig(String),
    /// The initial state is not normalized.
    UnnormalizedState { norm: f64 },
    Schedule(ScheduleError),
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::InvalidConfig(msg) => write!(f, "invalid simulation input: {msg}"),
            SimError::UnnormalizedState { norm } => {
                write!(f, "initial state norm {norm} differs from 1")
            }
            SimError::Schedule(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<ScheduleError> for SimError {
    fn from(e: ScheduleError) -> Self {
        SimError::Schedule(e)
    }
}

fn check_consistency(params: &QuditParams, seq: &ControlSequence) -> Result<(), SimError> {
    params.validate().map_err(SimError::InvalidConfig)?;
    if (params.frame - seq.frame).abs() > 1e-12
        || (TWO_PI * params.anharmonicity - seq.delta_rad).abs() > 1e-12
    {
        return Err(SimError::InvalidConfig(
            "control sequence was scheduled against different device parameters".into(),
        ));
    }
    Ok(())
}

/// Rotating-frame Hamiltonian (rad/ns) of the driven ladder at time `t`:
/// `H = sum_n 2 pi [(E_n/h - n f_frame) + n z(t)] |n><n|
///    + sum_n sqrt(n+1)/2 [omega(t) |n><n+1| + conj(omega)(t) |n+1><n|]`.
pub fn hamiltonian(
    params: &QuditParams,
    seq: &ControlSequence,
    config: &PropagatorConfig,
    t: f64,
) -> DMatrix<Complex64> {
    let mut h = DMatrix::<Complex64>::zeros(params.dim, params.dim);
    fill_hamiltonian(params, seq, config.rotating_wave, t, &mut h);
    h
}

fn fill_hamiltonian(
    params: &QuditParams,
    seq: &ControlSequence,
    rotating_wave: bool,
    t: f64,
    h: &mut DMatrix<Complex64>,
) {
    let d = params.dim;
    h.fill(Complex64::new(0.0, 0.0));
    let z = seq.z(t);
    for n in 0..d {
        let nf = n as f64;
        let diag = TWO_PI * ((params.level_energy(n) - nf * params.frame) + nf * z);
        h[(n, n)] = Complex64::new(diag, 0.0);
    }
    let om = seq.omega_full(t, rotating_wave);
    if om != Complex64::new(0.0, 0.0) {
        for n in 0..d - 1 {
            let c = om * (0.5 * ((n + 1) as f64).sqrt());
            h[(n, n + 1)] += c;
            h[(n + 1, n)] += c.conj();
        }
    }
}

/// Workspace for repeated matrix exponentials without reallocation.
struct Stepper {
    h: DMatrix<Complex64>,
    gen: DMatrix<Complex64>,
    p: DMatrix<Complex64>,
    tmp: DMatrix<Complex64>,
}

impl Stepper {
    fn new(dim: usize) -> Self {
        Stepper {
            h: DMatrix::zeros(dim, dim),
            gen: DMatrix::zeros(dim, dim),
            p: DMatrix::zeros(dim, dim),
            tmp: DMatrix::zeros(dim, dim),
        }
    }

    /// Computes `p = exp(-i * h * dt)` for the Hamiltonian currently in `self.h`.
    fn exponential(&mut self, dt: f64) {
        let d = self.h.nrows();
        // gen = -i * h * dt, scaled down until its infinity norm is <= 0.25 so
        // the fixed-order Taylor series is exact to machine precision.
        let mut norm: f64 = 0.0;
        for r in 0..d {
            let mut row_sum = 0.0;
            for c in 0..d {
                row_sum += self.h[(r, c)].norm();
            }
            norm = norm.max(row_sum * dt);
        }
        let mut squarings = 0u32;
        let mut scale = 1.0;
        while norm * scale > 0.25 && squarings < 40 {
            squarings += 1;
            scale *= 0.5;
        }
        let factor = Complex64::new(0.0, -dt * scale);
        for r in 0..d {
            for c in 0..d {
                self.gen[(r, c)] = self.h[(r, c)] * factor;
            }
        }
        // Horner evaluation of the order-12 Taylor polynomial:
        // p = I + gen (I + gen/2 (I + ... (I + gen/12)))
        self.p.fill_with_identity();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        for k in (1..=12u32).rev() {
            self.tmp.gemm(one, &self.gen, &self.p, zero);
            let inv_k = Complex64::new(1.0 / k as f64, 0.0);
            for r in 0..d {
                for c in 0..d {
                    self.p[(r, c)] = self.tmp[(r, c)] * inv_k;
                }
                self.p[(r, r)] += one;
            }
        }
        for _ in 0..squarings {
            self.tmp.gemm(one, &self.p, &self.p, zero);
            self.p.copy_from(&self.tmp);
        }
    }
}

/// Sampled propagation result: states at every step boundary plus the
/// accumulated total unitary.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<Complex64>>,
    pub unitary: DMatrix<Complex64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<Complex64> {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// Population of level `n` along the trajectory.
    pub fn population(&self, n: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[n].norm_sqr()).collect()
    }

    /// CSV export with columns `t_ns, p0..p{d-1}` and, when requested, the
    /// real/imaginary parts of every amplitude.
    pub fn to_csv(&self, include_amplitudes: bool) -> String {
        let d = self.states.first().map_or(0, |s| s.len());
        let mut out = String::new();
        out.push_str("t_ns");
        for n in 0..d {
            out.push_str(&format!(",p{n}"));
        }
        if include_amplitudes {
            for n in 0..d {
                out.push_str(&format!(",re{n},im{n}"));
            }
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.6}"));
            for n in 0..d {
                out.push_str(&format!(",{:.12e}", s[n].norm_sqr()));
            }
            if include_amplitudes {
                for n in 0..d {
                    out.push_str(&format!(",{:.12e},{:.12e}", s[n].re, s[n].im));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn propagate_core(
    params: &QuditParams,
    seq: &ControlSequence,
    config: &PropagatorConfig,
    t0: f64,
    t1: f64,
    mut psi: Option<&mut DVector<Complex64>>,
    mut on_step: Option<&mut dyn FnMut(f64, &DVector<Complex64>)>,
) -> DMatrix<Complex64> {
    let d = params.dim;
    let mut u = DMatrix::<Complex64>::identity(d, d);
    let n_steps = ((t1 - t0) / config.dt).round() as usize;
    let mut stepper = Stepper::new(d);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut psi_tmp = DVector::<Complex64>::zeros(d);
    if let (Some(ref p), Some(cb)) = (psi.as_ref(), on_step.as_mut()) {
        cb(t0, p);
    }
    for k in 0..n_steps {
        let tm = t0 + (k as f64 + 0.5) * config.dt;
        fill_hamiltonian(params, seq, config.rotating_wave, tm, &mut stepper.h);
        stepper.exponential(config.dt);
        stepper.tmp.gemm(one, &stepper.p, &u, zero);
        u.copy_from(&stepper.tmp);
        if let Some(ref mut p) = psi {
            psi_tmp.gemv(one, &stepper.p, p, zero);
            p.copy_from(&psi_tmp);
            if let Some(cb) = on_step.as_mut() {
                cb(t0 + (k as f64 + 1.0) * config.dt, p);
            }
        }
    }
    u
}

/// Propagates `psi0` through the whole sequence, sampling the state at every
/// step boundary, and returns the trajectory together with the total unitary.
pub fn propagate(
    params: &QuditParams,
    seq: &ControlSequence,
    config: &PropagatorConfig,
    psi0: &DVector<Complex64>,
) -> Result<Trajectory, SimError> {
    check_consistency(params, seq)?;
    config.validate()?;
    if psi0.len() != params.dim {
        return Err(SimError::InvalidConfig(format!(
            "state dimension {} does not match device dimension {}",
            psi0.len(),
            params.dim
        )));
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(SimError::UnnormalizedState { norm });
    }
    let mut psi = psi0.clone();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let unitary = {
        let mut record = |t: f64, s: &DVector<Complex64>| {
            times.push(t);
            states.push(s.clone());
        };
        propagate_core(params, seq, config, 0.0, seq.duration(), Some(&mut psi), Some(&mut record))
    };
    Ok(Trajectory { times, states, unitary })
}

/// Total unitary of the whole sequence (no state sampling).
pub fn propagate_unitary(
    params: &QuditParams,
    seq: &ControlSequence,
    config: &PropagatorConfig,
) -> Result<DMatrix<Complex64>, SimError> {
    propagate_unitary_between(params, seq, config, 0.0, seq.duration())
}

/// Unitary accumulated over `[t0, t1]` only. Channels are zero outside pulse
/// windows, so this is how a pulse's own unitary is computed in place.
pub fn propagate_unitary_between(
    params: &QuditParams,
    seq: &ControlSequence,
    config: &PropagatorConfig,
    t0: f64,
    t1: f64,
) -> Result<DMatrix<Complex64>, SimError> {
    check_consistency(params, seq)?;
    config.validate()?;
    if !(t1 >= t0) {
        return Err(SimError::InvalidConfig(format!("empty propagation window [{t0}, {t1}]")));
    }
    Ok(propagate_core(params, seq, config, t0, t1, None, None))
}

/// Unitary of a single gate propagated over its own 4-FWHM window at the
/// canonical placement (center at two FWHM, window starting at t = 0).
pub fn gate_unitary(
    params: &QuditParams,
    spec: &GateSpec,
    config: &PropagatorConfig,
) -> Result<DMatrix<Complex64>, SimError> {
    gate_unitary_at(params, spec, 2.0 * spec.fwhm, config)
}

/// Unitary of a single gate placed at an explicit center, propagated over its
/// own window. Placement matters whenever the carrier differs from the frame:
/// the carrier phase is anchored at the sequence origin.
pub fn gate_unitary_at(
    params: &QuditParams,
    spec: &GateSpec,
    center: f64,
    config: &PropagatorConfig,
) -> Result<DMatrix<Complex64>, SimError> {
    let mut b = SequenceBuilder::new(params, 0.0)?;
    b.place_gate_at(spec, center, false)?;
    let seq = b.finish();
    propagate_unitary_between(params, &seq, config, center - 2.0 * spec.fwhm, center + 2.0 * spec.fwhm)
}

/// Exact free-evolution unitary for `t` ns:
/// `diag(exp(-i 2 pi (E_n/h - n f_frame) t))`.
pub fn idle_unitary(params: &QuditParams, t: f64) -> DMatrix<Complex64> {
    let d = params.dim;
    let mut u = DMatrix::<Complex64>::zeros(d, d);
    for n in 0..d {
        let ph = -TWO_PI * (params.level_energy(n) - n as f64 * params.frame) * t;
        u[(n, n)] = Complex64::new(0.0, ph).exp();
    }
    u
}

/// Conjugates a unitary by the ladder phase operator `D = diag(exp(-i n phi))`:
/// returns `D U D^dagger`. This is exactly the unitary of the same pulse driven
/// with its axis angle advanced by `phi` (when carrier and frame coincide), so
/// fringe scans over the analysis phase need only one propagation.
pub fn axis_conjugate(u: &DMatrix<Complex64>, phi: f64) -> DMatrix<Complex64> {
    let d = u.nrows();
    let mut out = u.clone();
    for r in 0..d {
        for c in 0..d {
            let ph = Complex64::new(0.0, -(r as f64 - c as f64) * phi).exp();
            out[(r, c)] *= ph;
        }
    }
    out
}

/// `m` to the `n`-th power by repeated multiplication.
pub fn matrix_power(m: &DMatrix<Complex64>, n: usize) -> DMatrix<Complex64> {
    let mut acc = DMatrix::<Complex64>::identity(m.nrows(), m.ncols());
    for _ in 0..n {
        acc = m * &acc;
    }
    acc
}

/// Nearest unitary (polar factor) of a 2x2 block, in closed form.
///
/// For `B = U P` with `P = (B^dagger B)^{1/2}`, the 2x2 Hermitian square root
/// has the closed form `(H + sqrt(det H) I) / sqrt(tr H + 2 sqrt(det H))`.
pub fn polar_unitary(block: &Matrix2<Complex64>) -> QubitGate {
    let h = block.adjoint() * block;
    let tr = (h[(0, 0)] + h[(1, 1)]).re;
    let det = (h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]).re.max(0.0);
    let sd = det.sqrt();
    let denom = (tr + 2.0 * sd).sqrt();
    if denom < 1e-12 {
        return QubitGate::identity();
    }
    let scale = Complex64::new(1.0 / denom, 0.0);
    let sqrt_h = Matrix2::new(
        (h[(0, 0)] + Complex64::new(sd, 0.0)) * scale,
        h[(0, 1)] * scale,
        h[(1, 0)] * scale,
        (h[(1, 1)] + Complex64::new(sd, 0.0)) * scale,
    );
    let det_s = sqrt_h[(0, 0)] * sqrt_h[(1, 1)] - sqrt_h[(0, 1)] * sqrt_h[(1, 0)];
    let inv = Matrix2::new(
        sqrt_h[(1, 1)] / det_s,
        -sqrt_h[(0, 1)] / det_s,
        -sqrt_h[(1, 0)] / det_s,
        sqrt_h[(0, 0)] / det_s,
    );
    QubitGate::from_matrix(block * inv)
}

/// Effective qubit-subspace action of a full-ladder unitary.
#[derive(Debug, Clone)]
pub struct EffectiveGate {
    /// Full d x d propagator.
    pub full_unitary: DMatrix<Complex64>,
    /// Raw (sub-unitary under leakage) 2x2 block on the addressed transition.
    pub raw_block: Matrix2<Complex64>,
    /// Nearest-unitary projection of the raw block.
    pub qubit_block: QubitGate,
    /// Average probability of leaving the two-level subspace:
    /// `1 - (||block e0||^2 + ||block e1||^2) / 2`.
    pub leakage: f64,
    /// Per-gate phase error extracted from the projected block; an error when
    /// the block is not a phase-corrupted pi/2 rotation (e.g. a pi pulse).
    pub epsilon: Result<EpsilonExtraction, GateAlgebraError>,
}

/// Propagates the sequence and extracts the effective gate on the given
/// transition's two-level block.
pub fn effective_gate(
    params: &QuditParams,
    seq: &ControlSequence,
    config: &PropagatorConfig,
    transition: Transition,
) -> Result<EffectiveGate, SimError> {
    let base = transition.base();
    if base + 2 > params.dim {
        return Err(SimError::InvalidConfig(format!(
            "transition block ({}, {}) does not fit in dimension {}",
            base,
            base + 1,
            params.dim
        )));
    }
    let u = propagate_unitary(params, seq, config)?;
    Ok(effective_gate_from_unitary(u, base))
}

/// Effective gate of a single canonically placed pulse.
pub fn effective_gate_of_pulse(
    params: &QuditParams,
    spec: &GateSpec,
    config: &PropagatorConfig,
) -> Result<EffectiveGate, SimError> {
    let base = spec.transition.base();
    if base + 2 > params.dim {
        return Err(SimError::InvalidConfig(format!(
            "transition block ({}, {}) does not fit in dimension {}",
            base,
            base + 1,
            params.dim
        )));
    }
    let u = gate_unitary(params, spec, config)?;
    Ok(effective_gate_from_unitary(u, base))
}

fn effective_gate_from_unitary(u: DMatrix<Complex64>, base: usize) -> EffectiveGate {
    let raw_block = Matrix2::new(
        u[(base, base)],
        u[(base, base + 1)],
        u[(base + 1, base)],
        u[(base + 1, base + 1)],
    );
    let col0 = raw_block[(0, 0)].norm_sqr() + raw_block[(1, 0)].norm_sqr();
    let col1 = raw_block[(0, 1)].norm_sqr() + raw_block[(1, 1)].norm_sqr();
    let leakage = 1.0 - 0.5 * (col0 + col1);
    let qubit_block = polar_unitary(&raw_block);
    let epsilon = extract_epsilon(&qubit_block);
    EffectiveGate { full_unitary: u, raw_block, qubit_block, leakage, epsilon }
}

/// Residual population of |2> after a calibrated `theta` pulse from |0>, for
/// each FWHM in `tau_list`. The pulse amplitude is re-calibrated at every
/// width before measuring the leakage.
pub fn leakage_scan(
    params: &QuditParams,
    protocol: ShapingProtocol,
    theta: f64,
    tau_list: &[f64],
    config: &PropagatorConfig,
) -> Result<Vec<(f64, f64)>, SimError> {
    if params.dim < 3 {
        return Err(SimError::InvalidConfig(
            "leakage scan needs at least three levels".into(),
        ));
    }
    let mut out = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let amp = crate::calibration::tune_amplitude(params, theta, tau, protocol, config)?;
        let spec = GateSpec::new(theta, tau).with_protocol(protocol).with_amplitude(amp.value);
        let u = gate_unitary(params, &spec, config)?;
        out.push((tau, u[(2, 0)].norm_sqr()));
    }
    Ok(out)
}
