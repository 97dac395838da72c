//! Central finite differences for validating tape gradients.

use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Numeric gradient of `f` w.r.t. every entry of every input, by central
/// differences with step `h`. `f` must be a pure function of the inputs.
pub fn central_diff_grads<S: Scalar>(
    mut f: impl FnMut(&[Matrix<S>]) -> S,
    inputs: &[Matrix<S>],
    h: S,
) -> Vec<Matrix<S>> {
    let two_h = h + h;
    let mut grads = Vec::with_capacity(inputs.len());
    for (which, input) in inputs.iter().enumerate() {
        let mut grad = Matrix::zeros(input.rows(), input.cols());
        for idx in 0..input.data().len() {
            let mut work = inputs.to_vec();
            work[which].data_mut()[idx] = input.data()[idx] + h;
            let plus = f(&work);
            work[which].data_mut()[idx] = input.data()[idx] - h;
            let minus = f(&work);
            grad.data_mut()[idx] = (plus - minus) / two_h;
        }
        grads.push(grad);
    }
    grads
}

/// Largest relative error between two gradient sets, where relative error
/// of a pair is `|a - b| / max(|a|, |b|, floor)`.
pub fn max_rel_err<S: Scalar>(analytic: &[Matrix<S>], numeric: &[Matrix<S>], floor: S) -> S {
    let mut worst = S::zero();
    for (a, n) in analytic.iter().zip(numeric) {
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let denom = x.abs().max(y.abs()).max(floor);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}
