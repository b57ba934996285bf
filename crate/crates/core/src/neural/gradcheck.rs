//! Finite-difference helpers shared by the gradient tests.

use super::tape::Tensor;

/// Central-difference gradient of `f` at `x`.
pub(crate) fn numeric_grad(x: &Tensor, f: &dyn Fn(&Tensor) -> f64) -> Vec<f64> {
    let h = 1e-5;
    (0..x.len())
        .map(|i| {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Relative error at most 1e-4, or both sides within 1e-9 of each other.
pub(crate) fn assert_close(analytic: &[f64], numeric: &[f64]) {
    assert_eq!(analytic.len(), numeric.len());
    for (a, n) in analytic.iter().zip(numeric) {
        let err = (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
        assert!(err <= 1e-4 || (a - n).abs() < 1e-9, "analytic {a} vs numeric {n}");
    }
}
