//! Numerical gradient checking against central finite differences.

/// Central-difference gradient of a scalar function of a flat parameter
/// vector.
pub fn central_diff<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let fp = f(&probe);
        probe[i] = orig - step;
        let fm = f(&probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Worst-case relative error between analytic and numerical gradients.
///
/// The denominator is floored so that near-zero entries are compared
/// absolutely instead of amplifying finite-difference noise.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Default finite-difference step from the contract shared by every
/// gradient test in this workspace.
pub const FD_STEP: f64 = 1e-5;

/// Default denominator floor for [`max_rel_error`].
pub const FD_FLOOR: f64 = 1e-3;

/// Default relative tolerance.
pub const FD_TOL: f64 = 1e-4;
