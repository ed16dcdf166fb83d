use super::{expect_dim, Result, Scalar, Tensor, TensorError};

/// Nearest-neighbour upsampling: each pixel becomes a `factor x factor` block.
pub fn upsample_nearest<T: Scalar>(input: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.dims4("upsample_nearest")?;
    if factor == 0 {
        return Err(TensorError::InvalidParam {
            op: "upsample_nearest",
            msg: "factor must be at least 1".into(),
        });
    }
    let (oh, ow) = (h * factor, w * factor);
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let src = &x[plane * h * w..(plane + 1) * h * w];
        for oy in 0..oh {
            let row = &src[(oy / factor) * w..(oy / factor + 1) * w];
            for &v in row {
                for _ in 0..factor {
                    out.push(v);
                }
            }
        }
    }
    Tensor::new(&[n, c, oh, ow], out)
}

/// Sums the gradient over each replication block.
pub fn upsample_nearest_backward<T: Scalar>(grad_out: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let [n, c, oh, ow] = grad_out.dims4("upsample_nearest_backward")?;
    if factor == 0 || oh % factor != 0 || ow % factor != 0 {
        return Err(TensorError::InvalidParam {
            op: "upsample_nearest_backward",
            msg: format!("gradient extent {oh}x{ow} is not a multiple of {factor}"),
        });
    }
    let (h, w) = (oh / factor, ow / factor);
    expect_dim("upsample_nearest_backward", "height", h * factor, oh)?;
    let g = grad_out.data();
    let mut dx = vec![T::zero(); n * c * h * w];
    for plane in 0..n * c {
        let src = &g[plane * oh * ow..(plane + 1) * oh * ow];
        let dst = &mut dx[plane * h * w..(plane + 1) * h * w];
        for oy in 0..oh {
            let drow = &mut dst[(oy / factor) * w..(oy / factor + 1) * w];
            for (ox, &v) in src[oy * ow..(oy + 1) * ow].iter().enumerate() {
                drow[ox / factor] += v;
            }
        }
    }
    Tensor::new(&[n, c, h, w], dx)
}
