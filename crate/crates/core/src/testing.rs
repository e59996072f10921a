//! Test-only oracles shared by unit tests.

use alloc::vec::Vec;
use rand::Rng as _;

use crate::numerics::Tensor;
use crate::rng::Rng;

pub fn random_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn random_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Central difference of `f` with respect to entry `entry` of `inputs[which]`.
pub fn central_difference<F>(inputs: &[Tensor], which: usize, entry: usize, h: f64, f: &F) -> f64
where
    F: Fn(&[Tensor]) -> f64,
{
    let mut plus = inputs.to_vec();
    plus[which].data_mut()[entry] += h;
    let mut minus = inputs.to_vec();
    minus[which].data_mut()[entry] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Relative error with an absolute floor so that near-zero gradients compare
/// sensibly.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

/// Relative error ≤ `rel`, or an absolute gap below the rounding noise of a
/// central difference with step `h` on a function of magnitude `scale`.
pub fn gradient_agrees(analytic: f64, numeric: f64, rel: f64, h: f64, scale: f64) -> bool {
    let gap = (analytic - numeric).abs();
    let noise = 64.0 * f64::EPSILON * scale.abs().max(1.0) / h;
    gap <= rel * analytic.abs().max(numeric.abs()) || gap <= noise
}
