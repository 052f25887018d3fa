//! Measurement protocols that convert simulated populations into phase-error
//! and leakage figures: fringe fitting, amplified-phase-error (APE) sequences,
//! and the Ramsey error filter.
//!
//! The APE idea: a pi/2 rotation immediately undone (X_{-pi/2} X_{pi/2}) is a
//! "pseudo-identity" that would be exact but for the per-gate phase error
//! `eps`; `n` of them in front of a Ramsey analysis pulse shift the fringe by
//! `2 n eps`, amplifying a fraction-of-a-degree error into something a fringe
//! fit resolves easily.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::Distribution;

use crate::device::QuditParams;
use crate::gate_algebra::{corrupted_rotation, pseudo_identity, rotation};
use crate::numerics::{linear_fit, unwrap_phases};
use crate::pulse::{GateSpec, ShapingProtocol, Transition};
use crate::sim::{
    axis_conjugate, gate_unitary, idle_unitary, matrix_power, PropagatorConfig, SimError,
};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Whether a scan's abscissa is a rotation-axis phase or a time-like sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FringeKind {
    /// Uniform full-circle grid of analysis-pulse axis angles (rad).
    Phase,
    /// Uniform grid of a time-like parameter (ns, or any unit; the fitted
    /// frequency is in cycles per abscissa unit).
    Time,
}

/// Raw oscillation data to be fitted.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FringeScan {
    pub abscissa: Vec<f64>,
    pub p: Vec<f64>,
    pub kind: FringeKind,
}

/// Cosine-model fit of a fringe.
///
/// Phase fringes are modeled as `p = mean + amplitude * cos(phi - phase_offset)`;
/// time fringes as `p = mean + amplitude * cos(2 pi frequency t + phase_offset)`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FringeFit {
    pub amplitude: f64,
    pub phase_offset: f64,
    pub mean: f64,
    /// Fitted oscillation frequency; present for time fringes only.
    pub frequency: Option<f64>,
    pub rms_residual: f64,
}

/// Metrology failures.
#[derive(Debug, Clone, PartialEq)]
pub enum MetrologyError {
    InvalidScan(String),
    InvalidConfig(String),
    /// Fringe contrast too low to trust the fitted phase.
    LowVisibility { n: usize, visibility: f64 },
    /// A time fringe must contain at least two full oscillation periods.
    TooFewPeriods { periods: usize },
    /// Phase fringes require a uniform grid covering a full circle.
    NonUniformGrid,
    Sim(SimError),
}

impl std::fmt::Display for MetrologyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetrologyError::InvalidScan(m) => write!(f, "invalid fringe scan: {m}"),
            MetrologyError::InvalidConfig(m) => write!(f, "invalid metrology input: {m}"),
            MetrologyError::LowVisibility { n, visibility } => write!(
                f,
                "fringe visibility {visibility:.4} at n={n} is below the 0.05 floor; \
                 fit rejected"
            ),
            MetrologyError::TooFewPeriods { periods } => write!(
                f,
                "time fringe spans only {periods} oscillation period(s); at least 2 required"
            ),
            MetrologyError::NonUniformGrid => {
                write!(f, "fringe abscissa is not a uniform grid")
            }
            MetrologyError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MetrologyError {}

impl From<SimError> for MetrologyError {
    fn from(e: SimError) -> Self {
        MetrologyError::Sim(e)
    }
}

fn check_uniform(abscissa: &[f64]) -> Result<f64, MetrologyError> {
    let n = abscissa.len();
    let step = (abscissa[n - 1] - abscissa[0]) / (n as f64 - 1.0);
    if !(step > 0.0) {
        return Err(MetrologyError::InvalidScan("abscissa must be strictly increasing".into()));
    }
    for w in abscissa.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
            return Err(MetrologyError::NonUniformGrid);
        }
    }
    Ok(step)
}

/// Fits a cosine model to an oscillation scan.
///
/// Phase fringes (uniform grid covering a full circle) are fitted by the exact
/// first-Fourier-coefficient projection `c = (2/N) sum p(phi) e^{i phi}`,
/// giving `amplitude = |c|` and `phase_offset = arg c`. Time fringes locate the
/// dominant discrete Fourier peak and refine the frequency by maximizing the
/// projection magnitude between the two neighboring bins, then read amplitude
/// and phase from the projection at the refined frequency.
pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit, MetrologyError> {
    let n = scan.abscissa.len();
    if n != scan.p.len() {
        return Err(MetrologyError::InvalidScan(format!(
            "abscissa ({}) and p ({}) lengths differ",
            n,
            scan.p.len()
        )));
    }
    if n < 8 {
        return Err(MetrologyError::InvalidScan(format!("need at least 8 samples, got {n}")));
    }
    for &v in &scan.p {
        if !v.is_finite() {
            return Err(MetrologyError::InvalidScan("non-finite probability sample".into()));
        }
    }
    let step = check_uniform(&scan.abscissa)?;
    let nf = n as f64;
    let mean = scan.p.iter().sum::<f64>() / nf;
    match scan.kind {
        FringeKind::Phase => {
            let span = scan.abscissa[n - 1] - scan.abscissa[0];
            if span + step < TWO_PI * (1.0 - 1e-9) {
                return Err(MetrologyError::InvalidScan(format!(
                    "phase grid must span a full circle; covers only {:.4} rad",
                    span + step
                )));
            }
            let mut c = Complex64::new(0.0, 0.0);
            for (phi, p) in scan.abscissa.iter().zip(&scan.p) {
                c += Complex64::new(*p, 0.0) * Complex64::new(0.0, *phi).exp();
            }
            c *= Complex64::new(2.0 / nf, 0.0);
            let amplitude = c.norm();
            let phase_offset = c.arg();
            let rms = rms_of(&scan.abscissa, &scan.p, |phi| {
                mean + amplitude * (phi - phase_offset).cos()
            });
            Ok(FringeFit { amplitude, phase_offset, mean, frequency: None, rms_residual: rms })
        }
        FringeKind::Time => time_fit_core(&scan.abscissa, &scan.p, mean, step, true),
    }
}

/// Time-kind fit without the two-period floor, for internal scans whose
/// physics guarantees an oscillation but whose natural range covers only
/// slightly more than one period (e.g. the z-amplitude fringe).
pub(crate) fn fit_time_fringe_lenient(
    abscissa: &[f64],
    p: &[f64],
) -> Result<FringeFit, MetrologyError> {
    let scan = FringeScan { abscissa: abscissa.to_vec(), p: p.to_vec(), kind: FringeKind::Time };
    let n = scan.abscissa.len();
    if n != scan.p.len() || n < 8 {
        return Err(MetrologyError::InvalidScan(format!(
            "need matching abscissa/p of at least 8 samples, got {} / {}",
            n,
            scan.p.len()
        )));
    }
    let step = check_uniform(&scan.abscissa)?;
    let mean = scan.p.iter().sum::<f64>() / n as f64;
    time_fit_core(&scan.abscissa, &scan.p, mean, step, false)
}

fn time_fit_core(
    abscissa: &[f64],
    p: &[f64],
    mean: f64,
    step: f64,
    require_two_periods: bool,
) -> Result<FringeFit, MetrologyError> {
    let n = abscissa.len();
    let nf = n as f64;
    let centered: Vec<f64> = p.iter().map(|v| v - mean).collect();
    let proj = |f: f64| -> Complex64 {
        let mut c = Complex64::new(0.0, 0.0);
        for (t, v) in abscissa.iter().zip(&centered) {
            c += Complex64::new(*v, 0.0) * Complex64::new(0.0, -TWO_PI * f * t).exp();
        }
        c * Complex64::new(2.0 / nf, 0.0)
    };
    // Discrete Fourier magnitudes at f_j = j / (N step), j = 1..N/2; refine the
    // peak between its two neighboring bins.
    let bin = 1.0 / (nf * step);
    let mut best_j = 1;
    let mut best_mag = -1.0;
    for j in 1..=(n / 2) {
        let mag = proj(j as f64 * bin).norm();
        if mag > best_mag {
            best_mag = mag;
            best_j = j;
        }
    }
    if require_two_periods && best_j < 2 {
        return Err(MetrologyError::TooFewPeriods { periods: best_j });
    }
    let lo = (best_j as f64 - 1.0) * bin;
    let hi = ((best_j + 1).min(n / 2) as f64) * bin;
    let freq = crate::numerics::golden_min(|f| -proj(f).norm(), lo, hi, 100);
    let c = proj(freq);
    let amplitude = c.norm();
    let phase_offset = c.arg();
    let rms =
        rms_of(abscissa, p, |t| mean + amplitude * (TWO_PI * freq * t + phase_offset).cos());
    Ok(FringeFit { amplitude, phase_offset, mean, frequency: Some(freq), rms_residual: rms })
}

fn rms_of(xs: &[f64], ps: &[f64], model: impl Fn(f64) -> f64) -> f64 {
    let ss: f64 = xs.iter().zip(ps).map(|(x, p)| (p - model(*x)).powi(2)).sum();
    (ss / xs.len() as f64).sqrt()
}

/// Result of an APE scan.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ApeResult {
    /// Pseudo-identity counts, sorted ascending (always contains 0).
    pub n_list: Vec<usize>,
    /// Fringe phase shift relative to the n=0 baseline, rad, per n.
    pub shifts: Vec<f64>,
    /// Least-squares slope of shift vs n, divided by 2: the per-gate phase
    /// error in rad.
    pub epsilon_per_gate: f64,
    /// Largest shift divided by the total pulse count (2 n_max + 1) of that
    /// sequence: the per-pulse error convention.
    pub epsilon_per_pulse: f64,
    /// Largest line-fit residual as a fraction of the total accumulated shift.
    pub linearity_residual: f64,
    /// Fringe contrast per n.
    pub visibility: Vec<f64>,
    /// The raw fringe scans, one per n, in the same (sorted) order as `n_list`.
    pub fringes: Vec<FringeScan>,
}

/// Assembles an APE result from already-measured fringe scans, one per
/// pseudo-identity count. This is the analysis half of [`run_ape`], exposed so
/// stored or noise-perturbed scans can be refitted without rerunning the
/// simulation.
///
/// `n_list` must contain 0 (the phase baseline) and have no duplicates; the
/// scans are matched to it positionally and may arrive in any order.
pub fn ape_from_scans(n_list: &[usize], scans: &[FringeScan]) -> Result<ApeResult, MetrologyError> {
    if n_list.len() != scans.len() {
        return Err(MetrologyError::InvalidConfig(format!(
            "{} pseudo-identity counts but {} scans",
            n_list.len(),
            scans.len()
        )));
    }
    if !n_list.contains(&0) {
        return Err(MetrologyError::InvalidConfig("n_list must include 0 (the baseline)".into()));
    }
    let mut order: Vec<usize> = (0..n_list.len()).collect();
    order.sort_unstable_by_key(|&i| n_list[i]);
    for w in order.windows(2) {
        if n_list[w[0]] == n_list[w[1]] {
            return Err(MetrologyError::InvalidConfig(format!(
                "duplicate pseudo-identity count {}",
                n_list[w[0]]
            )));
        }
    }
    let sorted_n: Vec<usize> = order.iter().map(|&i| n_list[i]).collect();
    let sorted_scans: Vec<FringeScan> = order.iter().map(|&i| scans[i].clone()).collect();
    let mut raw_phases = Vec::with_capacity(sorted_n.len());
    let mut visibility = Vec::with_capacity(sorted_n.len());
    for (&n, scan) in sorted_n.iter().zip(&sorted_scans) {
        let fit = fit_fringe(scan)?;
        if fit.amplitude < 0.05 {
            return Err(MetrologyError::LowVisibility { n, visibility: fit.amplitude });
        }
        raw_phases.push(fit.phase_offset);
        visibility.push(fit.amplitude);
    }
    let mut ph = raw_phases;
    unwrap_phases(&mut ph);
    let baseline = ph[0];
    let shifts: Vec<f64> = ph.iter().map(|v| v - baseline).collect();
    // A single count gives no slope to fit; the baseline alone carries no
    // error estimate, so both per-gate error and residual are zero.
    let (slope_half, lin_res) = if sorted_n.len() < 2 {
        (0.0, 0.0)
    } else {
        let xs: Vec<f64> = sorted_n.iter().map(|&n| n as f64).collect();
        let fit = linear_fit(&xs, &ph);
        let total = (ph[ph.len() - 1] - ph[0]).abs().max(1e-30);
        (0.5 * fit.slope, fit.max_abs_residual / total)
    };
    let n_max = *sorted_n.last().unwrap();
    let epsilon_per_pulse = if n_max > 0 {
        shifts[shifts.len() - 1] / (2.0 * n_max as f64 + 1.0)
    } else {
        0.0
    };
    Ok(ApeResult {
        n_list: sorted_n,
        shifts,
        epsilon_per_gate: slope_half,
        epsilon_per_pulse,
        linearity_residual: lin_res,
        visibility,
        fringes: sorted_scans,
    })
}

fn phi_grid_values(phi_grid: usize) -> Vec<f64> {
    (0..phi_grid).map(|k| TWO_PI * k as f64 / phi_grid as f64).collect()
}

/// Runs the APE experiment on the simulated device.
///
/// For each n the sequence is: (for the 1<->2 transition, a half-derivative
/// (pi)_{01} preparation pulse) -> X_{pi/2} -> n pseudo-identities
/// (X_{-pi/2} X_{pi/2}) -> analysis pi/2 pulse with axis swept over `phi_grid`
/// uniform angles. The upper-level population traces out a fringe whose phase
/// shift relative to n=0 grows as 2 n eps.
///
/// The analysis-axis sweep is evaluated by the exact ladder-phase conjugation
/// of one propagated pulse unitary, which requires the rotating frame to sit
/// at the addressed transition frequency and the gates to be undetuned; other
/// configurations are rejected. Preparation-pulse imperfections for the upper
/// transition are cancelled by averaging the fringe over four preparation
/// drive phases a quarter circle apart.
pub fn run_ape(
    params: &QuditParams,
    protocol: ShapingProtocol,
    tau: f64,
    n_list: &[usize],
    phi_grid: usize,
    transition: Transition,
    config: &PropagatorConfig,
) -> Result<ApeResult, MetrologyError> {
    if !n_list.contains(&0) {
        return Err(MetrologyError::InvalidConfig("n_list must include 0 (the baseline)".into()));
    }
    if phi_grid < 16 {
        return Err(MetrologyError::InvalidConfig(format!(
            "phi_grid must be at least 16, got {phi_grid}"
        )));
    }
    let base = transition.base();
    if base + 2 > params.dim {
        return Err(MetrologyError::InvalidConfig(format!(
            "transition block ({}, {}) does not fit in dimension {}",
            base,
            base + 1,
            params.dim
        )));
    }
    if (params.transition_frequency(base) - params.frame).abs() > 1e-9 {
        return Err(MetrologyError::InvalidConfig(
            "the fringe scan requires the rotating frame at the addressed transition \
             frequency (analysis-axis sweep by ladder-phase conjugation)"
                .into(),
        ));
    }
    let half = GateSpec::new(std::f64::consts::FRAC_PI_2, tau)
        .with_protocol(protocol)
        .with_transition(transition);
    let minus_half = GateSpec::new(-std::f64::consts::FRAC_PI_2, tau)
        .with_protocol(protocol)
        .with_transition(transition);
    let uh = gate_unitary(params, &half, config)?;
    let umh = gate_unitary(params, &minus_half, config)?;
    let upi = &umh * &uh;

    // Initial states: ground state for 0<->1; four phase-cycled preparations
    // of |1> for 1<->2.
    let mut initial_states: Vec<DVector<Complex64>> = Vec::new();
    if base == 0 {
        let mut e0 = DVector::<Complex64>::zeros(params.dim);
        e0[0] = Complex64::new(1.0, 0.0);
        initial_states.push(e0);
    } else {
        let prep_spec = GateSpec::new(std::f64::consts::PI, tau)
            .with_protocol(ShapingProtocol::HalfDerivative);
        let prep = gate_unitary(params, &prep_spec, config)?;
        for cycle in 0..4 {
            let chi = TWO_PI * cycle as f64 / 4.0;
            initial_states.push(axis_conjugate(&prep, chi).column(0).into_owned());
        }
    }

    let phis = phi_grid_values(phi_grid);
    let analysis: Vec<DMatrix<Complex64>> =
        phis.iter().map(|&phi| axis_conjugate(&uh, phi)).collect();
    let mut sorted_n = n_list.to_vec();
    sorted_n.sort_unstable();
    sorted_n.dedup();
    let measure = base + 1;

    let mut scans = Vec::with_capacity(sorted_n.len());
    for &n in &sorted_n {
        let upre = matrix_power(&upi, n) * &uh;
        let pre_states: Vec<DVector<Complex64>> =
            initial_states.iter().map(|s| &upre * s).collect();
        let ps: Vec<f64> = analysis
            .iter()
            .map(|a| {
                pre_states
                    .iter()
                    .map(|s| (a * s)[measure].norm_sqr())
                    .sum::<f64>()
                    / pre_states.len() as f64
            })
            .collect();
        scans.push(FringeScan { abscissa: phis.clone(), p: ps, kind: FringeKind::Phase });
    }
    ape_from_scans(&sorted_n, &scans)
}

/// APE on the closed-form corrupted-gate model instead of the simulator: the
/// pseudo-identities are exact `pseudo_identity(pi/2, eps)` matrices and the
/// analysis pulse is the ideal `rotation(-phi, pi/2)`. Closes the loop between
/// the fringe pipeline and the algebraic `2 n eps` prediction.
pub fn run_ape_analytic(
    epsilon: f64,
    n_list: &[usize],
    phi_grid: usize,
) -> Result<ApeResult, MetrologyError> {
    if !n_list.contains(&0) {
        return Err(MetrologyError::InvalidConfig("n_list must include 0 (the baseline)".into()));
    }
    if phi_grid < 16 {
        return Err(MetrologyError::InvalidConfig(format!(
            "phi_grid must be at least 16, got {phi_grid}"
        )));
    }
    let mut sorted_n = n_list.to_vec();
    sorted_n.sort_unstable();
    sorted_n.dedup();
    let xp = corrupted_rotation(std::f64::consts::FRAC_PI_2, epsilon);
    let ip = pseudo_identity(std::f64::consts::FRAC_PI_2, epsilon);
    let phis = phi_grid_values(phi_grid);
    let mut scans = Vec::with_capacity(sorted_n.len());
    for &n in &sorted_n {
        let u0 = ip.power(n) * xp;
        let ps: Vec<f64> = phis
            .iter()
            .map(|&phi| {
                (rotation(-phi, std::f64::consts::FRAC_PI_2) * u0).entry(1, 0).norm_sqr()
            })
            .collect();
        scans.push(FringeScan { abscissa: phis.clone(), p: ps, kind: FringeKind::Phase });
    }
    ape_from_scans(&sorted_n, &scans)
}

/// One pulse width's Ramsey-error-filter numbers.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RamseyFilterPoint {
    pub tau: f64,
    /// Minimum |2> population over the delay scan: the filter's leakage floor.
    pub p2_min: f64,
    /// Maximum over the scan (both pulses' leakage interfering constructively).
    pub p2_max: f64,
    /// `(p2_max + p2_min) / 4`: the per-pulse |2> occupation, since amplitudes
    /// from the two pulses add coherently at the maximum.
    pub per_pulse: f64,
}

/// Two calibrated pi pulses separated by a scanned delay; the |2> population
/// after the pair oscillates with the delay as the two pulses' leakage
/// amplitudes interfere.
pub fn ramsey_error_filter(
    params: &QuditParams,
    protocol: ShapingProtocol,
    tau_list: &[f64],
    separations: &[f64],
    config: &PropagatorConfig,
) -> Result<Vec<RamseyFilterPoint>, MetrologyError> {
    if params.dim < 3 {
        return Err(MetrologyError::InvalidConfig(
            "the Ramsey error filter needs at least three levels".into(),
        ));
    }
    if separations.len() < 2 {
        return Err(MetrologyError::InvalidConfig("need at least two separations".into()));
    }
    let mut out = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let amp =
            crate::calibration::tune_amplitude(params, std::f64::consts::PI, tau, protocol, config)?;
        let spec = GateSpec::new(std::f64::consts::PI, tau)
            .with_protocol(protocol)
            .with_amplitude(amp.value);
        let up = gate_unitary(params, &spec, config)?;
        let mut p2_min = f64::INFINITY;
        let mut p2_max = f64::NEG_INFINITY;
        for &sep in separations {
            let u = &up * idle_unitary(params, sep) * &up;
            let p2 = u[(2, 0)].norm_sqr();
            p2_min = p2_min.min(p2);
            p2_max = p2_max.max(p2);
        }
        out.push(RamseyFilterPoint { tau, p2_min, p2_max, per_pulse: 0.25 * (p2_max + p2_min) });
    }
    Ok(out)
}

/// Shrinks a fringe's contrast toward its mean by `exp(-duration / t2)`: the
/// closed-system scans are noiseless, so dephasing over the sequence length is
/// modeled after the fact as pure visibility loss.
pub fn apply_visibility_decay(scan: &FringeScan, duration_ns: f64, t2_ns: f64) -> FringeScan {
    assert!(t2_ns > 0.0, "decay time must be positive");
    assert!(duration_ns >= 0.0, "duration must be non-negative");
    let factor = (-duration_ns / t2_ns).exp();
    let mean = scan.p.iter().sum::<f64>() / scan.p.len().max(1) as f64;
    let p = scan.p.iter().map(|&v| mean + (v - mean) * factor).collect();
    FringeScan { abscissa: scan.abscissa.clone(), p, kind: scan.kind }
}

/// Replaces each probability with a binomial sample mean over `shots` draws,
/// for exercising the fitters on noisy data. Deterministic for a given seed.
pub fn apply_shot_noise(scan: &FringeScan, shots: u64, seed: u64) -> FringeScan {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p = scan
        .p
        .iter()
        .map(|&p| {
            let clamped = p.clamp(0.0, 1.0);
            let dist = rand_distr::Binomial::new(shots, clamped)
                .expect("clamped probability is always valid");
            dist.sample(&mut rng) as f64 / shots as f64
        })
        .collect();
    FringeScan { abscissa: scan.abscissa.clone(), p, kind: scan.kind }
}
