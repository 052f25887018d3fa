//! One module per subcommand, sharing the run context.

pub mod ape;
pub mod calibrate;
pub mod leakage;
pub mod sweep;
pub mod tomography;

use crate::config::ExperimentConfig;
use crate::output::RunWriter;

pub struct Ctx<'a> {
    pub config: &'a ExperimentConfig,
    pub out: &'a RunWriter,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
