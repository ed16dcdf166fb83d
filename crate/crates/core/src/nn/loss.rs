//! Loss functions. Each returns the mean loss and its gradient with respect
//! to the prediction tensor.

use super::{NnError, Result};
use crate::tensor::{Scalar, Tensor};

/// Probability clamp used by the cross-entropy losses.
pub const PROB_EPSILON: f64 = 1e-7;
/// Allowed deviation of a probability row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

/// A loss value with the gradient for its input.
#[derive(Debug, Clone)]
pub struct LossGrad<T> {
    pub value: f64,
    pub grad: Tensor<T>,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(NnError::LengthMismatch { what, expected, found });
    }
    Ok(())
}

/// Mean pixel-wise binary cross entropy. Predictions are clamped to
/// `[eps, 1 - eps]`; clamped entries receive zero gradient.
pub fn loss_bce<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<LossGrad<T>> {
    if pred.shape() != target.shape() {
        return Err(NnError::ShapeMismatch {
            what: "bce target",
            expected: pred.shape().to_vec(),
            found: target.shape().to_vec(),
        });
    }
    let n = pred.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let (p, t) = (p.as_f64(), t.as_f64());
        let pc = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
        total -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        let g = if p > PROB_EPSILON && p < 1.0 - PROB_EPSILON {
            (pc - t) / (pc * (1.0 - pc)) / n
        } else {
            0.0
        };
        grad.push(T::from_f64(g));
    }
    Ok(LossGrad {
        value: total / n,
        grad: Tensor::new(pred.shape(), grad)?,
    })
}

/// Mean negative log probability of the true class.
pub fn loss_cce<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<LossGrad<T>> {
    let (n, k) = match probs.shape() {
        &[n, k] => (n, k),
        other => {
            return Err(NnError::ShapeMismatch {
                what: "cce probabilities",
                expected: vec![labels.len(), 5],
                found: other.to_vec(),
            })
        }
    };
    check_len("cce labels", n, labels.len())?;
    let p = probs.data();
    let mut grad = vec![T::zero(); p.len()];
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(NnError::LabelOutOfRange { label, classes: k });
        }
        let row = &p[i * k..(i + 1) * k];
        let sum: f64 = row.iter().map(|v| v.as_f64()).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE || row.iter().any(|v| v.as_f64() < 0.0) {
            return Err(NnError::InvalidProbabilities { row: i, sum });
        }
        let py = row[label].as_f64();
        let pc = py.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
        total -= pc.ln();
        if py > PROB_EPSILON && py < 1.0 - PROB_EPSILON {
            grad[i * k + label] = T::from_f64(-1.0 / (pc * n as f64));
        }
    }
    Ok(LossGrad {
        value: total / n as f64,
        grad: Tensor::new(probs.shape(), grad)?,
    })
}

/// Mean squared error over a batch of scalar predictions.
pub fn loss_mse<T: Scalar>(pred: &Tensor<T>, target: &[f64]) -> Result<LossGrad<T>> {
    if target.is_empty() || pred.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    check_len("mse targets", pred.len(), target.len())?;
    let n = target.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(target.len());
    for (&y_hat, &y) in pred.data().iter().zip(target) {
        let d = y_hat.as_f64() - y;
        total += d * d;
        grad.push(T::from_f64(2.0 * d / n));
    }
    Ok(LossGrad {
        value: total / n,
        grad: Tensor::new(pred.shape(), grad)?,
    })
}

/// Components of the weighted classification + regression objective.
#[derive(Debug, Clone)]
pub struct JointLoss<T> {
    pub total: f64,
    pub cce: f64,
    pub mse: f64,
    pub grad_probs: Tensor<T>,
    pub grad_reg: Tensor<T>,
}

/// `(1 - w_reg) * CCE + w_reg * MSE`.
pub fn loss_joint<T: Scalar>(
    probs: &Tensor<T>,
    labels: &[usize],
    reg_pred: &Tensor<T>,
    targets: &[f64],
    w_reg: f64,
) -> Result<JointLoss<T>> {
    if !(0.0..=1.0).contains(&w_reg) {
        return Err(NnError::InvalidWeight(w_reg));
    }
    let c = loss_cce(probs, labels)?;
    let m = loss_mse(reg_pred, targets)?;
    let wc = T::from_f64(1.0 - w_reg);
    let wm = T::from_f64(w_reg);
    Ok(JointLoss {
        total: (1.0 - w_reg) * c.value + w_reg * m.value,
        cce: c.value,
        mse: m.value,
        grad_probs: c.grad.map(|g| g * wc),
        grad_reg: m.grad.map(|g| g * wm),
    })
}

/// Expected grade under fixed class weights, then `scale_w * e + scale_b`.
pub fn ordinal_head<T: Scalar>(probs: &Tensor<T>, fixed_weights: &[f64], scale_w: T, scale_b: T) -> Result<Tensor<T>> {
    let k = fixed_weights.len();
    let n = match probs.shape() {
        &[n, d] if d == k => n,
        other => {
            return Err(NnError::ShapeMismatch {
                what: "ordinal head input",
                expected: vec![other.first().copied().unwrap_or(1), k],
                found: other.to_vec(),
            })
        }
    };
    let w: Vec<T> = fixed_weights.iter().map(|&v| T::from_f64(v)).collect();
    let out = probs
        .data()
        .chunks(k)
        .map(|row| scale_w * row.iter().zip(&w).map(|(&p, &c)| p * c).sum::<T>() + scale_b)
        .collect();
    Ok(Tensor::new(&[n, 1], out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_half_is_ln2() {
        let p = Tensor::<f64>::full(&[1, 1, 4, 4], 0.5);
        let t = Tensor::from_f64(&[1, 1, 4, 4], &[1., 0., 1., 0., 0., 0., 1., 1., 1., 0., 1., 0., 0., 1., 1., 0.]).unwrap();
        let l = loss_bce(&p, &t).unwrap();
        assert!((l.value - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn bce_perfect_prediction() {
        let t = Tensor::<f64>::from_f64(&[4], &[0., 1., 1., 0.]).unwrap();
        assert!(loss_bce(&t, &t).unwrap().value <= 1.2e-7);
    }

    #[test]
    fn cce_uniform_is_ln5() {
        let p = Tensor::<f64>::full(&[3, 5], 0.2);
        let l = loss_cce(&p, &[0, 3, 4]).unwrap();
        assert!((l.value - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cce_rejects_bad_label_and_rows() {
        let p = Tensor::<f64>::full(&[1, 5], 0.2);
        assert!(matches!(loss_cce(&p, &[5]), Err(NnError::LabelOutOfRange { label: 5, .. })));
        let q = Tensor::<f64>::full(&[1, 5], 0.3);
        assert!(matches!(loss_cce(&q, &[0]), Err(NnError::InvalidProbabilities { row: 0, .. })));
    }

    #[test]
    fn mse_extremes() {
        let p = Tensor::<f64>::from_f64(&[2, 1], &[4.0, 0.0]).unwrap();
        assert_eq!(loss_mse(&p, &[0.0, 4.0]).unwrap().value, 16.0);
        assert!(matches!(loss_mse(&p, &[]), Err(NnError::EmptyBatch)));
    }

    #[test]
    fn joint_boundaries_are_exact() {
        let p = Tensor::<f64>::from_f64(&[2, 5], &[0.1, 0.2, 0.3, 0.2, 0.2, 0.5, 0.1, 0.1, 0.1, 0.2]).unwrap();
        let r = Tensor::<f64>::from_f64(&[2, 1], &[1.5, 0.2]).unwrap();
        let (labels, targets) = ([2, 0], [2.0, 0.0]);
        let c = loss_cce(&p, &labels).unwrap().value;
        let m = loss_mse(&r, &targets).unwrap().value;
        assert_eq!(loss_joint(&p, &labels, &r, &targets, 0.0).unwrap().total, c);
        assert_eq!(loss_joint(&p, &labels, &r, &targets, 1.0).unwrap().total, m);
        assert!(loss_joint(&p, &labels, &r, &targets, 1.5).is_err());
    }

    #[test]
    fn ordinal_head_examples() {
        let p = Tensor::<f64>::from_f64(
            &[3, 5],
            &[0.1, 0.2, 0.4, 0.2, 0.1, 0., 0., 0., 0., 1., 0.5, 0.5, 0., 0., 0.],
        )
        .unwrap();
        let y = ordinal_head(&p, &[0., 1., 2., 3., 4.], 1.0, 0.0).unwrap();
        let v = y.data();
        assert!((v[0] - 2.0).abs() < 1e-15);
        assert_eq!(v[1], 4.0);
        assert_eq!(v[2], 0.5);
    }
}
