//! The calibration ladder: amplitude tuning at the operator's assumed
//! frequency, frequency tracking, amplitude re-tuning at the corrected
//! carrier, upper-transition spectroscopy, z-pulse calibration, and
//! quadrature-weight optimization. Persists the record for other subcommands
//! and for idempotent reruns via `--calibration`.

use super::Ctx;
use crate::error::{from_calibration, CliError};
use pulsesim::calibration::{analytic_z_pi_amplitude, run_drifted_calibration, CalibrationRecord};
use pulsesim::QuditParams;
use serde_json::json;

pub fn run(ctx: &Ctx, prior: Option<&CalibrationRecord>) -> Result<(), CliError> {
    let cfg = ctx.config;
    let sim = cfg.integrator.propagator();
    let injected = cfg.calibrate.injected_detuning;
    let nominal = cfg.device.f10;
    let true_f10 = nominal + injected;
    // A prior record shifts the starting assumption to its estimate; a fresh
    // run assumes the configured nominal frequency.
    let assumed = prior.map(|r| r.f10_estimate.value).unwrap_or(nominal);
    let truth = QuditParams { f10: true_f10, ..cfg.device.params() };
    let df_true = true_f10 - assumed;

    let mut rec = run_drifted_calibration(&truth, df_true, &sim).map_err(from_calibration)?;
    rec.config_hash = Some(ctx.out.config_hash().to_string());
    let rec_value = serde_json::to_value(&rec)
        .map_err(|e| CliError::Io(format!("cannot serialize calibration record: {e}")))?;
    ctx.out.write_json("calibration.json", &rec_value)?;

    let analytic_z = analytic_z_pi_amplitude(rec.fwhm);
    let payload = json!({
        "f10_assumed_ghz": assumed,
        "f10_true_ghz": true_f10,
        "injected_detuning_mhz": injected * 1e3,
        "f10_estimate_ghz": rec.f10_estimate.value,
        "correction_applied_mhz": (rec.f10_estimate.value - assumed) * 1e3,
        "residual_error_mhz": (rec.f10_estimate.value - true_f10) * 1e3,
        "f21_estimate_ghz": rec.f21_estimate.value,
        "anharmonicity_estimate_ghz": rec.anharmonicity_estimate,
        "pi_amplitude": rec.pi_amplitude,
        "half_pi_amplitude": rec.half_pi_amplitude,
        "half_pi_check": rec.half_pi_check,
        "z_pi_amplitude": rec.z_pi_amplitude,
        "z_pi_analytic_ghz": analytic_z,
        "z_pi_deviation": rec.z_pi_amplitude.value / analytic_z - 1.0,
        "beta_star": rec.beta_star,
        "protocol": rec.protocol,
        "fwhm_ns": rec.fwhm,
        "rerun_of_prior_record": prior.is_some(),
    });
    ctx.out.write_summary("calibrate", payload)
}
