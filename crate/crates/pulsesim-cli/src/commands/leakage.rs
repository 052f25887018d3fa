//! Residual |2> population of calibrated pi pulses versus pulse width, for
//! both protocols, plus the two-pulse Ramsey interference filter that
//! separates single-pulse leakage from the scan's coherent beating.

use super::Ctx;
use crate::error::{from_metrology, from_sim, CliError};
use pulsesim::metrology::ramsey_error_filter;
use pulsesim::sim::leakage_scan;
use pulsesim::ShapingProtocol;
use serde_json::{json, Value};
use std::f64::consts::PI;

/// Separations of the two-pulse filter, ns: 201 points over [0, 10] cover two
/// beat periods of the default 200 MHz anharmonicity.
fn separations() -> Vec<f64> {
    (0..201).map(|i| 10.0 * i as f64 / 200.0).collect()
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.config;
    let sim = cfg.integrator.propagator();
    let params = cfg.device.params();
    let taus = &cfg.leakage.tau_grid;
    if taus.is_empty() {
        return Err(CliError::Config("leakage.tau_grid must not be empty".into()));
    }
    for &t in taus {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Config(format!(
                "leakage.tau_grid entries must be positive and finite, got {t}"
            )));
        }
    }

    let gauss =
        leakage_scan(&params, ShapingProtocol::GaussianOnly, PI, taus, &sim).map_err(from_sim)?;
    let hd =
        leakage_scan(&params, ShapingProtocol::HalfDerivative, PI, taus, &sim).map_err(from_sim)?;

    let rows: Vec<String> = gauss
        .iter()
        .zip(&hd)
        .map(|((tau, p2g), (_, p2h))| format!("{tau:.6},{p2g:.12e},{p2h:.12e}"))
        .collect();
    ctx.out.write_csv("leakage.csv", "tau_ns,P2_gaussian,P2_hd", &rows)?;

    let seps = separations();
    let filter_g = ramsey_error_filter(&params, ShapingProtocol::GaussianOnly, taus, &seps, &sim)
        .map_err(from_metrology)?;
    let filter_h =
        ramsey_error_filter(&params, ShapingProtocol::HalfDerivative, taus, &seps, &sim)
            .map_err(from_metrology)?;

    let ratios: Vec<Value> = gauss
        .iter()
        .zip(&hd)
        .map(|((_, p2g), (_, p2h))| if *p2h > 0.0 { json!(p2g / p2h) } else { Value::Null })
        .collect();
    let payload = json!({
        "tau_grid_ns": taus,
        "p2_gaussian": gauss.iter().map(|(_, p)| *p).collect::<Vec<_>>(),
        "p2_hd": hd.iter().map(|(_, p)| *p).collect::<Vec<_>>(),
        "p2_ratio_gaussian_over_hd": ratios,
        "ramsey_filter": {
            "gaussian": filter_g,
            "half_derivative": filter_h,
        },
    });
    ctx.out.write_summary("leakage", payload)
}
