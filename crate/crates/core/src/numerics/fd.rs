//! Central finite differences, used by the test suites to check analytic gradients.

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖₂ / max(‖b‖₂, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / scale.max(floor)
}

/// Compares `analytic` against a central-difference gradient of `f`; returns the
/// relative error.
pub fn check_gradient<F>(f: F, x: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let numeric = central_gradient(f, x, h);
    relative_error(analytic, &numeric, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact_up_to_rounding() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] - x[1];
        let x = [0.7, -1.3];
        let analytic = [2.0 * x[0] + 3.0 * x[1], 3.0 * x[0] - 1.0];
        assert!(check_gradient(f, &x, &analytic, 1e-5) < 1e-9);
    }
}
