use super::{Result, Scalar, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Sigmoid,
    /// Normalised along the given axis.
    Softmax(usize),
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| {
        if v >= T::zero() {
            T::one() / (T::one() + (-v).exp())
        } else {
            let e = v.exp();
            e / (T::one() + e)
        }
    })
}

/// `(outer, axis_len, inner)` decomposition around `axis`.
fn axis_layout(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(TensorError::InvalidParam {
            op: "softmax",
            msg: format!("axis {axis} out of range for shape {shape:?}"),
        });
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

/// Softmax with max subtraction, so large logits do not overflow.
pub fn softmax<T: Scalar>(input: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let (outer, len, inner) = axis_layout(input.shape(), axis)?;
    let x = input.data();
    let mut out = vec![T::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + i;
            let max = (0..len).map(|k| x[idx(k)]).fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for k in 0..len {
                let e = (x[idx(k)] - max).exp();
                out[idx(k)] = e;
                total += e;
            }
            for k in 0..len {
                out[idx(k)] /= total;
            }
        }
    }
    Tensor::new(input.shape(), out)
}

pub fn activate<T: Scalar>(input: &Tensor<T>, kind: Activation) -> Result<Tensor<T>> {
    match kind {
        Activation::ReLU => Ok(relu(input)),
        Activation::Sigmoid => Ok(sigmoid(input)),
        Activation::Softmax(axis) => softmax(input, axis),
    }
}

/// Gradient with respect to the activation input. ReLU needs the forward
/// input; sigmoid and softmax use the forward output.
pub fn activate_backward<T: Scalar>(
    input: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
    kind: Activation,
) -> Result<Tensor<T>> {
    if grad_out.shape() != output.shape() || input.shape() != output.shape() {
        return Err(TensorError::InvalidParam {
            op: "activate_backward",
            msg: format!("gradient shape {:?} vs output {:?}", grad_out.shape(), output.shape()),
        });
    }
    let g = grad_out.data();
    let data: Vec<T> = match kind {
        Activation::ReLU => input
            .data()
            .iter()
            .zip(g)
            .map(|(&x, &d)| if x > T::zero() { d } else { T::zero() })
            .collect(),
        Activation::Sigmoid => output
            .data()
            .iter()
            .zip(g)
            .map(|(&y, &d)| d * y * (T::one() - y))
            .collect(),
        Activation::Softmax(axis) => {
            let (outer, len, inner) = axis_layout(output.shape(), axis)?;
            let y = output.data();
            let mut dx = vec![T::zero(); y.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |k: usize| (o * len + k) * inner + i;
                    let dot: T = (0..len).map(|k| g[idx(k)] * y[idx(k)]).sum();
                    for k in 0..len {
                        dx[idx(k)] = y[idx(k)] * (g[idx(k)] - dot);
                    }
                }
            }
            dx
        }
    };
    Tensor::new(output.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_definition() {
        let x = Tensor::<f32>::from_f64(&[3], &[-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let x = Tensor::<f64>::full(&[2, 5], 0.3);
        let y = softmax(&x, 1).unwrap();
        assert!(y.data().iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let x = Tensor::<f32>::from_f64(&[1, 2], &[1000.0, 1000.0]).unwrap();
        let y = softmax(&x, 1).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_on_inner_axis() {
        let x = Tensor::<f64>::new(&[2, 3, 4], (0..24).map(|v| v as f64 * 0.1).collect()).unwrap();
        let y = softmax(&x, 1).unwrap();
        for o in 0..2 {
            for i in 0..4 {
                let s: f64 = (0..3).map(|k| y.data()[(o * 3 + k) * 4 + i]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sigmoid_is_symmetric() {
        let x = Tensor::<f64>::from_f64(&[4], &[-30.0, -1.0, 1.0, 30.0]).unwrap();
        let y = sigmoid(&x);
        assert!((y.data()[0] + y.data()[3] - 1.0).abs() < 1e-12);
        assert!((y.data()[1] + y.data()[2] - 1.0).abs() < 1e-12);
    }
}
