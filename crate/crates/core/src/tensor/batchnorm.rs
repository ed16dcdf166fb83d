//! Per-channel batch normalisation.

use super::{expect_dim, Result, Scalar, Tensor, TensorError};

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

/// Running statistics, updated in training mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::from_f64(BN_MOMENTUM),
            eps: T::from_f64(BN_EPSILON),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub x_hat: Vec<T>,
    pub inv_std: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

/// `(N, C, spatial)` view of a rank-2 or rank-4 tensor.
fn layout<T: Scalar>(t: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match t.shape() {
        &[n, c] => Ok((n, c, 1)),
        &[n, c, h, w] => Ok((n, c, h * w)),
        other => Err(TensorError::Rank {
            op: "batchnorm",
            expected: 4,
            found: other.to_vec(),
        }),
    }
}

fn check_affine<T: Scalar>(c: usize, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<()> {
    expect_dim("batchnorm", "gamma length", c, gamma.len())?;
    expect_dim("batchnorm", "beta length", c, beta.len())
}

#[inline]
fn at(n: usize, c: usize, s: usize, channels: usize, spatial: usize) -> usize {
    (n * channels + c) * spatial + s
}

/// Normalise with batch statistics and fold them into the running averages.
pub fn batchnorm_train<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    state: &mut BatchNormState<T>,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (n, c, sp) = layout(input)?;
    check_affine(c, gamma, beta)?;
    expect_dim("batchnorm", "running stats", c, state.running_mean.len())?;
    let m = n * sp;
    if m < 2 {
        return Err(TensorError::DegenerateVariance { found: m });
    }
    let x = input.data();
    let mf = T::from_f64(m as f64);
    let mut out = vec![T::zero(); x.len()];
    let mut x_hat = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); c];
    for ch in 0..c {
        let mut sum = 0.0f64;
        for b in 0..n {
            for s in 0..sp {
                sum += x[at(b, ch, s, c, sp)].as_f64();
            }
        }
        let mean = T::from_f64(sum / m as f64);
        let mut sq = T::zero();
        for b in 0..n {
            for s in 0..sp {
                let d = x[at(b, ch, s, c, sp)] - mean;
                sq += d * d;
            }
        }
        let var = sq / mf;
        let istd = T::one() / (var + state.eps).sqrt();
        inv_std[ch] = istd;
        let (g, bt) = (gamma.data()[ch], beta.data()[ch]);
        for b in 0..n {
            for s in 0..sp {
                let i = at(b, ch, s, c, sp);
                let xh = (x[i] - mean) * istd;
                x_hat[i] = xh;
                out[i] = g * xh + bt;
            }
        }
        let mom = state.momentum;
        state.running_mean[ch] = mom * state.running_mean[ch] + (T::one() - mom) * mean;
        state.running_var[ch] = mom * state.running_var[ch] + (T::one() - mom) * var;
    }
    Ok((Tensor::new(input.shape(), out)?, BatchNormCache { x_hat, inv_std }))
}

/// Normalise with the running statistics.
pub fn batchnorm_infer<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    state: &BatchNormState<T>,
) -> Result<Tensor<T>> {
    let (n, c, sp) = layout(input)?;
    check_affine(c, gamma, beta)?;
    expect_dim("batchnorm", "running stats", c, state.running_mean.len())?;
    let x = input.data();
    let mut out = vec![T::zero(); x.len()];
    for ch in 0..c {
        let istd = T::one() / (state.running_var[ch] + state.eps).sqrt();
        let scale = gamma.data()[ch] * istd;
        let shift = beta.data()[ch] - state.running_mean[ch] * scale;
        for b in 0..n {
            for s in 0..sp {
                let i = at(b, ch, s, c, sp);
                out[i] = x[i] * scale + shift;
            }
        }
    }
    Tensor::new(input.shape(), out)
}

/// Full batch-statistics gradient.
pub fn batchnorm_train_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    gamma: &Tensor<T>,
    cache: &BatchNormCache<T>,
) -> Result<BatchNormGrads<T>> {
    let (n, c, sp) = layout(grad_out)?;
    expect_dim("batchnorm_backward", "cache", grad_out.len(), cache.x_hat.len())?;
    let g = grad_out.data();
    let m = T::from_f64((n * sp) as f64);
    let mut dx = vec![T::zero(); g.len()];
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for ch in 0..c {
        let (mut sum_g, mut sum_gx) = (T::zero(), T::zero());
        for b in 0..n {
            for s in 0..sp {
                let i = at(b, ch, s, c, sp);
                sum_g += g[i];
                sum_gx += g[i] * cache.x_hat[i];
            }
        }
        dgamma[ch] = sum_gx;
        dbeta[ch] = sum_g;
        let k = gamma.data()[ch] * cache.inv_std[ch] / m;
        for b in 0..n {
            for s in 0..sp {
                let i = at(b, ch, s, c, sp);
                dx[i] = k * (m * g[i] - sum_g - cache.x_hat[i] * sum_gx);
            }
        }
    }
    Ok(BatchNormGrads {
        input: Tensor::new(grad_out.shape(), dx)?,
        gamma: Tensor::new(&[c], dgamma)?,
        beta: Tensor::new(&[c], dbeta)?,
    })
}

/// Gradient when the running statistics are treated as constants.
pub fn batchnorm_infer_backward<T: Scalar>(
    input: &Tensor<T>,
    grad_out: &Tensor<T>,
    gamma: &Tensor<T>,
    state: &BatchNormState<T>,
) -> Result<BatchNormGrads<T>> {
    let (n, c, sp) = layout(input)?;
    expect_dim("batchnorm_backward", "gradient", input.len(), grad_out.len())?;
    let (x, g) = (input.data(), grad_out.data());
    let mut dx = vec![T::zero(); g.len()];
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for ch in 0..c {
        let istd = T::one() / (state.running_var[ch] + state.eps).sqrt();
        let scale = gamma.data()[ch] * istd;
        for b in 0..n {
            for s in 0..sp {
                let i = at(b, ch, s, c, sp);
                dx[i] = g[i] * scale;
                dgamma[ch] += g[i] * (x[i] - state.running_mean[ch]) * istd;
                dbeta[ch] += g[i];
            }
        }
    }
    Ok(BatchNormGrads {
        input: Tensor::new(input.shape(), dx)?,
        gamma: Tensor::new(&[c], dgamma)?,
        beta: Tensor::new(&[c], dbeta)?,
    })
}
