use super::{expect_dim, Result, Scalar, Tensor};

/// Affine map `input [N,D] x weights [D,M] + bias [M]`.
pub fn dense<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, d] = input.dims2("dense")?;
    let [wd, m] = weights.dims2("dense")?;
    expect_dim("dense", "input features", wd, d)?;
    expect_dim("dense", "bias length", m, bias.len())?;
    let mut out = Vec::with_capacity(n * m);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    T::gemm(n, d, m, T::one(), input.data(), (d, 1), weights.data(), (m, 1), T::one(), &mut out, (m, 1));
    Tensor::new(&[n, m], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let [n, d] = input.dims2("dense_backward")?;
    let [wd, m] = weights.dims2("dense_backward")?;
    expect_dim("dense_backward", "input features", wd, d)?;
    let [gn, gm] = grad_out.dims2("dense_backward")?;
    expect_dim("dense_backward", "batch", n, gn)?;
    expect_dim("dense_backward", "outputs", m, gm)?;
    let g = grad_out.data();

    let mut dx = vec![T::zero(); n * d];
    T::gemm(n, m, d, T::one(), g, (m, 1), weights.data(), (1, m), T::zero(), &mut dx, (d, 1));
    let mut dw = vec![T::zero(); d * m];
    T::gemm(d, n, m, T::one(), input.data(), (1, d), g, (m, 1), T::zero(), &mut dw, (m, 1));
    let mut db = vec![T::zero(); m];
    for row in g.chunks(m) {
        for (b, &v) in db.iter_mut().zip(row) {
            *b += v;
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(&[n, d], dx)?,
        weights: Tensor::new(&[d, m], dw)?,
        bias: Tensor::new(&[m], db)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::TensorError;

    #[test]
    fn identity_passthrough() {
        let x = Tensor::<f64>::from_f64(&[2, 3], &[1., -2., 3., 0.5, 0., -1.]).unwrap();
        let mut eye = Tensor::<f64>::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let y = dense(&x, &eye, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn classifier_fc_shape() {
        let x = Tensor::<f32>::zeros(&[1, 128 * 5 * 8]);
        let w = Tensor::<f32>::zeros(&[5120, 1024]);
        let y = dense(&x, &w, &Tensor::zeros(&[1024])).unwrap();
        assert_eq!(y.shape(), &[1, 1024]);
    }

    #[test]
    fn mismatch_is_reported() {
        let x = Tensor::<f32>::zeros(&[1, 4]);
        let w = Tensor::<f32>::zeros(&[3, 2]);
        assert!(matches!(
            dense(&x, &w, &Tensor::zeros(&[2])),
            Err(TensorError::Dimension { axis: "input features", .. })
        ));
    }
}
