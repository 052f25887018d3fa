//! Generic scalar sweep: one config parameter over a grid, one scalar output
//! per point, evaluated on a worker pool with deterministic (grid-order)
//! aggregation, so the output bytes are independent of `--workers`.

use super::Ctx;
use crate::error::{from_sim, CliError};
use pulsesim::calibration::tune_amplitude;
use pulsesim::sim::{effective_gate_of_pulse, gate_unitary};
use pulsesim::{GateSpec, ShapingProtocol};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Clone, Copy)]
enum Param {
    Fwhm,
    Beta,
    Theta,
}

#[derive(Clone, Copy)]
enum Output {
    EpsilonDeg,
    P2Leakage,
}

pub fn run(ctx: &Ctx, workers: usize) -> Result<(), CliError> {
    let cfg = ctx.config;
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("the sweep subcommand requires a 'sweep' config block".into()))?;
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    if sw.values.is_empty() {
        return Err(CliError::Config("sweep.values must not be empty".into()));
    }
    for &v in &sw.values {
        if !v.is_finite() {
            return Err(CliError::Config(format!("sweep.values must be finite, got {v}")));
        }
    }

    let param = match sw.parameter.as_str() {
        "pulses.fwhm" => Param::Fwhm,
        "pulses.beta" => Param::Beta,
        "gate.theta" => Param::Theta,
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep parameter '{other}' (expected pulses.fwhm, pulses.beta, \
                 or gate.theta)"
            )))
        }
    };
    let output = match sw.output.as_str() {
        "epsilon_per_gate_deg" => Output::EpsilonDeg,
        "p2_leakage" => Output::P2Leakage,
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep output '{other}' (expected epsilon_per_gate_deg or p2_leakage)"
            )))
        }
    };

    let theta = sw.theta.unwrap_or(FRAC_PI_2);
    if !(theta.is_finite() && theta > 0.0 && theta <= PI + 1e-12) {
        return Err(CliError::Config(format!("sweep.theta must lie in (0, pi], got {theta}")));
    }
    if matches!(output, Output::EpsilonDeg) {
        // The phase-error extraction is a pi/2-gate template match.
        if matches!(param, Param::Theta) {
            return Err(CliError::Config(
                "output 'epsilon_per_gate_deg' is defined for pi/2 gates and cannot be \
                 swept over gate.theta; use p2_leakage there"
                    .into(),
            ));
        }
        if (theta - FRAC_PI_2).abs() > 1e-12 {
            return Err(CliError::Config(format!(
                "output 'epsilon_per_gate_deg' is defined for pi/2 gates; leave sweep.theta \
                 unset (got {theta})"
            )));
        }
    }
    let params = cfg.device.params();
    if matches!(output, Output::P2Leakage) && params.dim < 3 {
        return Err(CliError::Config(format!(
            "output 'p2_leakage' needs device.dim of at least 3, got {}",
            params.dim
        )));
    }
    let base_protocol = cfg.pulses.protocol()?;
    let sim = cfg.integrator.propagator();

    let eval = |v: f64| -> Result<f64, CliError> {
        let (tau, protocol, th) = match param {
            Param::Fwhm => {
                if !(v > 0.0) {
                    return Err(CliError::Config(format!(
                        "pulses.fwhm sweep values must be positive, got {v}"
                    )));
                }
                (v, base_protocol, theta)
            }
            Param::Beta => (cfg.pulses.fwhm, ShapingProtocol::DerivativeScaled(v), theta),
            Param::Theta => {
                if !(v > 0.0 && v <= PI + 1e-12) {
                    return Err(CliError::Config(format!(
                        "gate.theta sweep values must lie in (0, pi], got {v}"
                    )));
                }
                (cfg.pulses.fwhm, base_protocol, v)
            }
        };
        let amp = tune_amplitude(&params, th, tau, protocol, &sim).map_err(from_sim)?;
        let spec = GateSpec::new(th, tau).with_protocol(protocol).with_amplitude(amp.value);
        match output {
            Output::EpsilonDeg => {
                let gate = effective_gate_of_pulse(&params, &spec, &sim).map_err(from_sim)?;
                let eps = gate.epsilon.map_err(|e| CliError::Fit(e.to_string()))?;
                Ok(eps.epsilon.to_degrees())
            }
            Output::P2Leakage => {
                let u = gate_unitary(&params, &spec, &sim).map_err(from_sim)?;
                Ok(u[(2, 0)].norm_sqr())
            }
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    let evaluated: Vec<Result<f64, CliError>> =
        pool.install(|| sw.values.par_iter().map(|&v| eval(v)).collect());
    // Surface the first failure in grid order, independent of scheduling.
    let mut results = Vec::with_capacity(evaluated.len());
    for r in evaluated {
        results.push(r?);
    }

    let rows: Vec<String> = sw
        .values
        .iter()
        .zip(&results)
        .map(|(v, y)| format!("{v:.12e},{y:.12e}"))
        .collect();
    let header = format!("{},{}", sw.parameter, sw.output);
    ctx.out.write_csv("sweep.csv", &header, &rows)?;

    let payload = json!({
        "parameter": sw.parameter,
        "output": sw.output,
        "theta_rad": theta,
        "theta_deg": theta.to_degrees(),
        "values": sw.values,
        "results": results,
        "zero_crossing": zero_crossing(&sw.values, &results),
        "first_over_last_ratio": ratio_first_last(&results),
    });
    ctx.out.write_summary("sweep", payload)
}

/// Linearly interpolated root between the first adjacent pair of results with
/// opposite signs, if any.
fn zero_crossing(values: &[f64], results: &[f64]) -> Value {
    for i in 1..results.len() {
        let (a, b) = (results[i - 1], results[i]);
        if a == 0.0 {
            return json!(values[i - 1]);
        }
        if a * b < 0.0 {
            let t = a / (a - b);
            return json!(values[i - 1] + t * (values[i] - values[i - 1]));
        }
    }
    if let Some(&last) = results.last() {
        if last == 0.0 {
            return json!(values[values.len() - 1]);
        }
    }
    Value::Null
}

fn ratio_first_last(results: &[f64]) -> Value {
    match (results.first(), results.last()) {
        (Some(a), Some(b)) if results.len() >= 2 && *b != 0.0 => json!(a / b),
        _ => Value::Null,
    }
}
