use super::{expect_dim, Result, Scalar, Tensor, TensorError};

/// Flat input index of the maximum of every pooling window.
pub type PoolIndices = Vec<usize>;

pub fn pool_output_extent(input: usize, window: usize, stride: usize) -> Option<usize> {
    (input >= window && window > 0 && stride > 0).then(|| (input - window) / stride + 1)
}

/// Valid max pooling. Ties go to the first position in row-major window
/// order, which is also the only position that receives gradient.
pub fn maxpool2d<T: Scalar>(
    input: &Tensor<T>,
    window: (usize, usize),
    stride: usize,
) -> Result<(Tensor<T>, PoolIndices)> {
    let [n, c, h, w] = input.dims4("maxpool2d")?;
    let (kh, kw) = window;
    if stride == 0 {
        return Err(TensorError::InvalidParam {
            op: "maxpool2d",
            msg: "stride must be at least 1".into(),
        });
    }
    let (oh, ow) = match (pool_output_extent(h, kh, stride), pool_output_extent(w, kw, stride)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(TensorError::WindowTooLarge {
                op: "maxpool2d",
                window,
                input: (h, w),
            })
        }
    };
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut idx = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                let mut best_val = x[best];
                for i in 0..kh {
                    let row = base + (oy * stride + i) * w + ox * stride;
                    for j in 0..kw {
                        let v = x[row + j];
                        if v > best_val {
                            best_val = v;
                            best = row + j;
                        }
                    }
                }
                out.push(best_val);
                idx.push(best);
            }
        }
    }
    Ok((Tensor::new(&[n, c, oh, ow], out)?, idx))
}

pub fn maxpool2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    indices: &PoolIndices,
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    expect_dim("maxpool2d_backward", "outputs", indices.len(), grad_out.len())?;
    let mut dx = Tensor::zeros(input_shape);
    let buf = dx.data_mut();
    for (&i, &g) in indices.iter().zip(grad_out.data()) {
        buf[i] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_2x2_stride_2() {
        let x = Tensor::<f32>::new(&[1, 1, 4, 4], (0..16).map(|v| v as f32).collect()).unwrap();
        let (y, _) = maxpool2d(&x, (2, 2), 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn classifier_pool_shape() {
        let x = Tensor::<f32>::zeros(&[1, 32, 100, 150]);
        let (y, _) = maxpool2d(&x, (3, 3), 2).unwrap();
        assert_eq!(y.shape(), &[1, 32, 49, 74]);
    }

    #[test]
    fn constant_input_routes_to_first_index() {
        let x = Tensor::<f64>::full(&[1, 1, 4, 4], 3.0);
        let (y, idx) = maxpool2d(&x, (2, 2), 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 3.0));
        assert_eq!(idx, vec![0, 2, 8, 10]);
        let g = Tensor::<f64>::full(&[1, 1, 2, 2], 1.0);
        let dx = maxpool2d_backward(&g, &idx, x.shape()).unwrap();
        let expect: Vec<f64> = (0..16)
            .map(|i| if [0, 2, 8, 10].contains(&i) { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(dx.data(), expect.as_slice());
    }

    #[test]
    fn window_larger_than_input() {
        let x = Tensor::<f32>::zeros(&[1, 1, 2, 5]);
        assert!(matches!(
            maxpool2d(&x, (3, 3), 1),
            Err(TensorError::WindowTooLarge { .. })
        ));
    }
}
