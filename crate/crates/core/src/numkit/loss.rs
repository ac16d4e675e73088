//! Huber loss and its derivative.

/// Huber loss of observation `x` against prediction `xhat`.
///
/// Quadratic inside `|x − xhat| ≤ delta`, linear outside; both branches meet
/// at `delta² / 2`.
#[inline]
pub fn huber(x: f64, xhat: f64, delta: f64) -> f64 {
    let e = (x - xhat).abs();
    if e <= delta {
        0.5 * e * e
    } else {
        delta * e - 0.5 * delta * delta
    }
}

/// Derivative of [`huber`] with respect to the prediction `xhat`.
#[inline]
pub fn huber_grad(x: f64, xhat: f64, delta: f64) -> f64 {
    let e = xhat - x;
    if e.abs() <= delta {
        e
    } else {
        delta * e.signum()
    }
}
