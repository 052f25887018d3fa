//! Static description of the simulated multilevel device.

use serde::{Deserialize, Serialize};

/// Parameters of a weakly anharmonic multilevel system (a transmon/phase-qubit
/// style ladder truncated at `dim` levels) together with the rotating frame the
/// simulation is carried out in.
///
/// Units: frequencies in GHz, times in ns, microwave quadratures in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuditParams {
    /// Number of retained levels (>= 2).
    pub dim: usize,
    /// |0> -> |1> transition frequency in GHz.
    pub f10: f64,
    /// Anharmonicity in GHz: `f21 - f10`. Negative for the ladder modeled here.
    pub anharmonicity: f64,
    /// Rotating-frame frequency in GHz. Level `n` rotates at `n * frame`.
    pub frame: f64,
}

impl QuditParams {
    /// Three-level device with f10 = 6 GHz, anharmonicity -200 MHz, frame on f10.
    pub fn default_three_level() -> Self {
        QuditParams { dim: 3, f10: 6.0, anharmonicity: -0.2, frame: 6.0 }
    }

    /// Same ladder truncated at a different dimension.
    pub fn with_dim(self, dim: usize) -> Self {
        QuditParams { dim, ..self }
    }

    /// Same ladder observed in a different rotating frame.
    pub fn with_frame(self, frame: f64) -> Self {
        QuditParams { frame, ..self }
    }

    /// Ladder energy of level `n` in GHz (E_n / h):
    /// `n * f10 + n (n - 1) / 2 * anharmonicity`.
    pub fn level_energy(&self, n: usize) -> f64 {
        let n = n as f64;
        n * self.f10 + 0.5 * n * (n - 1.0) * self.anharmonicity
    }

    /// Frequency of the |n> -> |n+1> transition in GHz.
    pub fn transition_frequency(&self, n: usize) -> f64 {
        self.level_energy(n + 1) - self.level_energy(n)
    }

    /// Validates the structural constraints (dimension >= 2, frequencies finite).
    pub fn validate(&self) -> Result<(), String> {
        if self.dim < 2 {
            return Err(format!("dim must be >= 2, got {}", self.dim));
        }
        for v in [self.f10, self.anharmonicity, self.frame] {
            if !v.is_finite() {
                return Err("device frequencies must be finite".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_energies() {
        let p = QuditParams::default_three_level();
        assert_eq!(p.level_energy(0), 0.0);
        assert!((p.level_energy(1) - 6.0).abs() < 1e-15);
        assert!((p.level_energy(2) - 11.8).abs() < 1e-12);
        assert!((p.transition_frequency(0) - 6.0).abs() < 1e-12);
        assert!((p.transition_frequency(1) - 5.8).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(QuditParams::default_three_level().validate().is_ok());
        let bad = QuditParams { dim: 1, ..QuditParams::default_three_level() };
        assert!(bad.validate().is_err());
    }
}
