/// Central-difference gradient of `f` at `theta`:
/// `(f(θ + eps·eᵢ) − f(θ − eps·eᵢ)) / (2·eps)` for every coordinate `i`.
///
/// Used as the reference for the tape's backward pass; it shares no code
/// with the autodiff path.
pub fn finite_diff_grad<F>(mut f: F, theta: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(eps > 0.0, "eps must be positive");
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            probe[i] = theta[i] + eps;
            let plus = f(&probe);
            probe[i] = theta[i] - eps;
            let minus = f(&probe);
            probe[i] = theta[i];
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, |b|, floor)` over paired entries.
///
/// The floor keeps entries whose true value is ~0 from turning rounding
/// noise into huge relative errors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
