//! Central finite differences, used as the gradient oracle in tests.

/// `(f(θ + h·e_i) − f(θ − h·e_i)) / 2h` for every coordinate `i`.
pub fn finite_diff_grad<F>(mut loss: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut theta = params.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = theta[i];
            theta[i] = orig + step;
            let up = loss(&theta);
            theta[i] = orig - step;
            let down = loss(&theta);
            theta[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}
