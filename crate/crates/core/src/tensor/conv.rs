//! 2-D cross-correlation via im2col + GEMM.

use super::{expect_dim, ConvParams, Padding, Result, Scalar, Tensor, TensorError};

/// Output extent of a convolution along one axis, or `None` when a Valid
/// window does not fit.
pub fn conv_output_extent(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<usize> {
    match padding {
        Padding::Same => Some(input.div_ceil(stride)),
        Padding::Valid => (input >= kernel).then(|| (input - kernel) / stride + 1),
    }
}

/// Padding applied before the first row/column.
fn leading_pad(input: usize, out: usize, kernel: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        Padding::Valid => 0,
        Padding::Same => {
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            total / 2
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Fill `cols` (`rows x positions`) from one `[C, H, W]` sample.
    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let p = self.positions();
        for c in 0..self.c {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = ((c * self.kh + i) * self.kw + j) * p;
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + i) as isize - self.pad_top as isize;
                        let dst = &mut cols[row + oy * self.ow..row + (oy + 1) * self.ow];
                        if iy < 0 || iy >= self.h as isize {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * self.stride + j) as isize - self.pad_left as isize;
                            *d = if ix < 0 || ix >= self.w as isize {
                                T::zero()
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Scatter-add `cols` back into a `[C, H, W]` gradient buffer.
    fn col2im<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        let p = self.positions();
        for c in 0..self.c {
            let plane = &mut dx[c * self.h * self.w..(c + 1) * self.h * self.w];
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = ((c * self.kh + i) * self.kw + j) * p;
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + i) as isize - self.pad_top as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let src = &cols[row + oy * self.ow..row + (oy + 1) * self.ow];
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, &g) in src.iter().enumerate() {
                            let ix = (ox * self.stride + j) as isize - self.pad_left as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn geometry<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    params: &ConvParams,
) -> Result<(usize, Geometry)> {
    params.validate()?;
    let [n, c, h, w] = input.dims4("conv2d")?;
    let [k, wc, kh, kw] = weights.dims4("conv2d")?;
    expect_dim("conv2d", "weight channels", c, wc)?;
    expect_dim("conv2d", "weight count", params.kernels, k)?;
    expect_dim("conv2d", "kernel height", params.kernel_size.0, kh)?;
    expect_dim("conv2d", "kernel width", params.kernel_size.1, kw)?;
    if let Some(b) = bias {
        expect_dim("conv2d", "bias length", k, b.len())?;
    }
    let (oh, ow) = match (
        conv_output_extent(h, kh, params.stride, params.padding),
        conv_output_extent(w, kw, params.stride, params.padding),
    ) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(TensorError::WindowTooLarge {
                op: "conv2d",
                window: (kh, kw),
                input: (h, w),
            })
        }
    };
    Ok((
        n,
        Geometry {
            c,
            h,
            w,
            kh,
            kw,
            stride: params.stride,
            oh,
            ow,
            pad_top: leading_pad(h, oh, kh, params.stride, params.padding),
            pad_left: leading_pad(w, ow, kw, params.stride, params.padding),
        },
    ))
}

/// Cross-correlation of `input [N,C,H,W]` with `weights [K,C,kh,kw]` plus a
/// per-kernel bias, giving `[N,K,H',W']`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    params: &ConvParams,
) -> Result<Tensor<T>> {
    let (n, g) = geometry(input, weights, Some(bias), params)?;
    let k = params.kernels;
    let rows = g.rows();
    let p = g.positions();
    let in_per = g.c * g.h * g.w;
    let mut out = vec![T::zero(); n * k * p];
    let mut cols = vec![T::zero(); rows * p];
    for s in 0..n {
        g.im2col(&input.data()[s * in_per..(s + 1) * in_per], &mut cols);
        let dst = &mut out[s * k * p..(s + 1) * k * p];
        for (kk, chunk) in dst.chunks_mut(p).enumerate() {
            chunk.fill(bias.data()[kk]);
        }
        T::gemm(k, rows, p, T::one(), weights.data(), (rows, 1), &cols, (p, 1), T::one(), dst, (p, 1));
    }
    Tensor::new(&[n, k, g.oh, g.ow], out)
}

/// Gradients of a convolution with respect to its three inputs.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    params: &ConvParams,
) -> Result<ConvGrads<T>> {
    let (n, g) = geometry(input, weights, None, params)?;
    let k = params.kernels;
    let [gn, gk, goh, gow] = grad_out.dims4("conv2d_backward")?;
    expect_dim("conv2d_backward", "batch", n, gn)?;
    expect_dim("conv2d_backward", "channels", k, gk)?;
    expect_dim("conv2d_backward", "height", g.oh, goh)?;
    expect_dim("conv2d_backward", "width", g.ow, gow)?;

    let rows = g.rows();
    let p = g.positions();
    let in_per = g.c * g.h * g.w;
    let mut dx = vec![T::zero(); input.len()];
    let mut dw = vec![T::zero(); weights.len()];
    let mut db = vec![T::zero(); k];
    let mut cols = vec![T::zero(); rows * p];
    let mut dcols = vec![T::zero(); rows * p];
    for s in 0..n {
        let gy = &grad_out.data()[s * k * p..(s + 1) * k * p];
        for (kk, chunk) in gy.chunks(p).enumerate() {
            db[kk] += chunk.iter().copied().sum::<T>();
        }
        g.im2col(&input.data()[s * in_per..(s + 1) * in_per], &mut cols);
        // dW[K, rows] += dY[K, P] * cols^T
        T::gemm(k, p, rows, T::one(), gy, (p, 1), &cols, (1, p), T::one(), &mut dw, (rows, 1));
        // dcols[rows, P] = W^T * dY
        T::gemm(rows, k, p, T::one(), weights.data(), (1, rows), gy, (p, 1), T::zero(), &mut dcols, (p, 1));
        g.col2im(&dcols, &mut dx[s * in_per..(s + 1) * in_per]);
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), dx)?,
        weights: Tensor::new(weights.shape(), dw)?,
        bias: Tensor::new(&[k], db)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, size: usize, stride: usize, padding: Padding) -> ConvParams {
        ConvParams::new(k, (size, size), stride, padding)
    }

    /// Direct nested-loop correlation used as an oracle.
    fn naive(input: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, p: &ConvParams) -> Tensor<f64> {
        let [n, c, h, wd] = input.dims4("naive").unwrap();
        let (kh, kw) = p.kernel_size;
        let oh = conv_output_extent(h, kh, p.stride, p.padding).unwrap();
        let ow = conv_output_extent(wd, kw, p.stride, p.padding).unwrap();
        let pt = leading_pad(h, oh, kh, p.stride, p.padding) as isize;
        let pl = leading_pad(wd, ow, kw, p.stride, p.padding) as isize;
        let mut out = vec![0.0; n * p.kernels * oh * ow];
        for s in 0..n {
            for k in 0..p.kernels {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b.data()[k];
                        for ch in 0..c {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let iy = (oy * p.stride + i) as isize - pt;
                                    let ix = (ox * p.stride + j) as isize - pl;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                        acc += input.data()[((s * c + ch) * h + iy as usize) * wd + ix as usize]
                                            * w.data()[((k * c + ch) * kh + i) * kw + j];
                                    }
                                }
                            }
                        }
                        out[((s * p.kernels + k) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        Tensor::new(&[n, p.kernels, oh, ow], out).unwrap()
    }

    #[test]
    fn sum_of_ones_valid() {
        let x = Tensor::<f32>::full(&[1, 1, 3, 3], 1.0);
        let w = Tensor::<f32>::full(&[1, 1, 3, 3], 1.0);
        let b = Tensor::<f32>::zeros(&[1]);
        let y = conv2d(&x, &w, &b, &params(1, 3, 1, Padding::Valid)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data()[0], 9.0);
    }

    #[test]
    fn same_padding_shape_of_first_classifier_layer() {
        let x = Tensor::<f32>::zeros(&[1, 1, 200, 300]);
        let w = Tensor::<f32>::zeros(&[32, 1, 11, 11]);
        let b = Tensor::<f32>::zeros(&[32]);
        let y = conv2d(&x, &w, &b, &params(32, 11, 2, Padding::Same)).unwrap();
        assert_eq!(y.shape(), &[1, 32, 100, 150]);
    }

    #[test]
    fn zero_weights_give_zero_map() {
        let x = Tensor::<f32>::full(&[1, 1, 256, 256], 0.7);
        let w = Tensor::<f32>::zeros(&[32, 1, 3, 3]);
        let b = Tensor::<f32>::zeros(&[32]);
        let y = conv2d(&x, &w, &b, &params(32, 3, 1, Padding::Same)).unwrap();
        assert_eq!(y.shape(), &[1, 32, 256, 256]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_direct_loops() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        for &(h, w, k, s, pad) in &[
            (7, 9, 3, 1, Padding::Same),
            (8, 8, 3, 2, Padding::Same),
            (9, 6, 5, 2, Padding::Valid),
            (5, 5, 1, 1, Padding::Same),
            (10, 7, 5, 3, Padding::Same),
        ] {
            let x = Tensor::<f64>::new(&[2, 3, h, w], (0..2 * 3 * h * w).map(|_| next()).collect()).unwrap();
            let wt = Tensor::<f64>::new(&[4, 3, k, k], (0..4 * 3 * k * k).map(|_| next()).collect()).unwrap();
            let b = Tensor::<f64>::new(&[4], (0..4).map(|_| next()).collect()).unwrap();
            let p = params(4, k, s, pad);
            let fast = conv2d(&x, &wt, &b, &p).unwrap();
            let slow = naive(&x, &wt, &b, &p);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_mismatch_names_axis() {
        let x = Tensor::<f32>::zeros(&[1, 2, 5, 5]);
        let w = Tensor::<f32>::zeros(&[1, 3, 3, 3]);
        let b = Tensor::<f32>::zeros(&[1]);
        let err = conv2d(&x, &w, &b, &params(1, 3, 1, Padding::Same)).unwrap_err();
        assert_eq!(
            err,
            TensorError::Dimension {
                op: "conv2d",
                axis: "weight channels",
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn same_padding_extent_is_ceil() {
        for input in 1..40 {
            for k in [1, 3, 5, 7, 11] {
                for stride in 1..5 {
                    assert_eq!(
                        conv_output_extent(input, k, stride, Padding::Same).unwrap(),
                        (input + stride - 1) / stride
                    );
                }
            }
        }
    }
}
