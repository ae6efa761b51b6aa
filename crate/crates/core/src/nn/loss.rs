//! Mean-squared-error loss.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// `sum (pred - target)^2 / batch` and its gradient `2 (pred - target) / batch`.
///
/// `batch` is the leading dimension of `pred`, so the loss is a per-sample sum
/// averaged over the batch.
pub fn mse_loss<F: Real>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<(F, Tensor<F>)> {
    if pred.shape() != target.shape() {
        return Err(Error::invalid(format!(
            "prediction {:?} and target {:?} differ in shape",
            pred.shape(),
            target.shape()
        )));
    }
    let batch = pred.shape().first().copied().unwrap_or(1).max(1);
    let inv = F::one() / F::of(batch as f64);
    let two_inv = inv + inv;
    let mut loss = F::zero();
    let grad: Vec<F> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = *p - *t;
            loss += d * d;
            d * two_inv
        })
        .collect();
    Ok((loss * inv, Tensor::from_vec(pred.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_and_gradient_values() {
        let p = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = Tensor::from_vec(&[2, 2], vec![0.0, 2.0, 1.0, 4.0]).unwrap();
        let (l, g) = mse_loss::<f64>(&p, &t).unwrap();
        assert_eq!(l, (1.0 + 4.0) / 2.0);
        assert_eq!(g.data(), &[1.0, 0.0, 2.0, 0.0]);
        assert!(mse_loss(&p, &Tensor::zeros(&[4])).is_err());
    }
}
