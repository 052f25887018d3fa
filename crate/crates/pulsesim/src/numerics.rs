//! Small derivative-free numeric helpers shared by the calibration and metrology code.

/// Golden-section minimization of a unimodal scalar function on `[a, b]`.
///
/// Runs a fixed number of iterations (deterministic, no floating-point tolerance
/// comparisons) and returns the midpoint of the final bracket.
pub(crate) fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let invphi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Golden-section maximization (see [`golden_min`]).
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, iters: usize) -> f64 {
    golden_min(|x| -f(x), a, b, iters)
}

/// Least-squares straight line `y = slope*x + intercept`.
pub(crate) struct LineFit {
    pub slope: f64,
    #[allow(dead_code)]
    pub intercept: f64,
    /// Largest absolute deviation of the data from the fitted line.
    pub max_abs_residual: f64,
}

pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points for a line fit");
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let max_abs_residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (slope * a + intercept)).abs())
        .fold(0.0, f64::max);
    LineFit { slope, intercept, max_abs_residual }
}

/// Wraps an angle to `(-pi, pi]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * std::f64::consts::PI);
    if w > std::f64::consts::PI {
        w -= 2.0 * std::f64::consts::PI;
    }
    w
}

/// Unwraps a phase series in place: successive jumps larger than pi are folded
/// by multiples of 2*pi so the series is continuous.
pub(crate) fn unwrap_phases(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let mut d = phases[i] - phases[i - 1];
        d = wrap_angle(d);
        phases[i] = phases[i - 1] + d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let m = golden_min(|x| (x - 1.3).powi(2), 0.0, 3.0, 60);
        assert!((m - 1.3).abs() < 1e-10);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&x, &y);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.max_abs_residual < 1e-12);
    }

    #[test]
    fn unwrap_removes_two_pi_jumps() {
        // A wrapped linear ramp of step 0.9 pi stays linear after unwrapping.
        let step = 0.9 * std::f64::consts::PI;
        let mut p: Vec<f64> = (0..8).map(|i| wrap_angle(i as f64 * step)).collect();
        unwrap_phases(&mut p);
        for (i, v) in p.iter().enumerate() {
            assert!((v - i as f64 * step).abs() < 1e-9);
        }
        // Back-and-forth around the branch cut stays continuous.
        let mut q = [3.0, -3.0, 3.0];
        unwrap_phases(&mut q);
        assert!((q[1] - (3.0 + 2.0 * std::f64::consts::PI - 6.0)).abs() < 1e-9);
        assert!((q[2] - 3.0).abs() < 1e-9);
    }
}
