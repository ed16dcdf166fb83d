//! Dense row-major tensors and the forward/backward kernels used by every
//! network in this crate.
//!
//! Kernels are plain functions over immutable inputs. Every forward kernel
//! has a paired backward kernel returning exact analytic gradients; the
//! gradient suites in `tests/` check each pair against central differences.
//!
//! Precision is selected by the element type: `f32` for training and
//! inference, `f64` for gradient checking.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod pool;
mod upsample;

pub use activation::{activate, activate_backward, relu, sigmoid, softmax, Activation};
pub use batchnorm::{
    batchnorm_infer, batchnorm_infer_backward, batchnorm_train, batchnorm_train_backward,
    BatchNormCache, BatchNormGrads, BatchNormState, BnMode, BN_EPSILON, BN_MOMENTUM,
};
pub use conv::{conv2d, conv2d_backward, conv_output_extent, ConvGrads};
pub use dense::{dense, dense_backward, DenseGrads};
pub use pool::{maxpool2d, maxpool2d_backward, pool_output_extent, PoolIndices};
pub use upsample::{upsample_nearest, upsample_nearest_backward};

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Errors raised by tensor construction and kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("shape {shape:?} holds {expected} values but {found} were supplied")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("shape {0:?} has a zero extent")]
    ZeroExtent(Vec<usize>),
    #[error("{op}: expected a rank-{expected} tensor, found shape {found:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        found: Vec<usize>,
    },
    #[error("{op}: dimension mismatch on axis `{axis}`: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{op}: window {window:?} does not fit input {input:?}")]
    WindowTooLarge {
        op: &'static str,
        window: (usize, usize),
        input: (usize, usize),
    },
    #[error("batchnorm: training mode needs at least 2 values per channel, found {found}")]
    DegenerateVariance { found: usize },
    #[error("{op}: {msg}")]
    InvalidParam { op: &'static str, msg: String },
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Element type of a tensor.
pub trait Scalar:
    Float
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    const NAME: &'static str;

    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;

    /// `c = alpha * a * b + beta * c` with arbitrary row/column strides.
    ///
    /// `a` is `m x k`, `b` is `k x n`, `c` is `m x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
        c_strides: (usize, usize),
    );
}

fn check_gemm_bounds<T>(rows: usize, cols: usize, strides: (usize, usize), buf: &[T]) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows - 1) * strides.0 + (cols - 1) * strides.1;
    assert!(last < buf.len(), "gemm operand out of bounds");
}

macro_rules! impl_scalar {
    ($t:ty, $name:expr, $gemm:path) => {
        impl Scalar for $t {
            const NAME: &'static str = $name;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (usize, usize),
                b: &[Self],
                b_strides: (usize, usize),
                beta: Self,
                c: &mut [Self],
                c_strides: (usize, usize),
            ) {
                check_gemm_bounds(m, k, a_strides, a);
                check_gemm_bounds(k, n, b_strides, b);
                check_gemm_bounds(m, n, c_strides, c);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every element addressed by the strides was bounds
                // checked above and `c` does not alias `a` or `b`.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0 as isize,
                        a_strides.1 as isize,
                        b.as_ptr(),
                        b_strides.0 as isize,
                        b_strides.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0 as isize,
                        c_strides.1 as isize,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, "f32", matrixmultiply::sgemm);
impl_scalar!(f64, "f64", matrixmultiply::dgemm);

/// Convolution padding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Zero fill so that the output extent is `ceil(in / stride)`; an odd
    /// amount of padding puts the extra pixel at the bottom/right.
    Same,
    /// No padding: `floor((in - k) / stride) + 1`.
    Valid,
}

/// Convolution hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvParams {
    pub kernels: usize,
    pub kernel_size: (usize, usize),
    pub stride: usize,
    pub padding: Padding,
}

impl ConvParams {
    pub fn new(kernels: usize, kernel_size: (usize, usize), stride: usize, padding: Padding) -> Self {
        Self {
            kernels,
            kernel_size,
            stride,
            padding,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (kh, kw) = self.kernel_size;
        if kh == 0 || kw == 0 || kh % 2 == 0 || kw % 2 == 0 {
            return Err(TensorError::InvalidParam {
                op: "conv2d",
                msg: format!("kernel size {kh}x{kw} must be odd and positive"),
            });
        }
        if self.stride == 0 {
            return Err(TensorError::InvalidParam {
                op: "conv2d",
                msg: "stride must be at least 1".into(),
            });
        }
        if self.kernels == 0 {
            return Err(TensorError::InvalidParam {
                op: "conv2d",
                msg: "kernel count must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// An n-dimensional array in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::ZeroExtent(shape.to_vec()));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape: shape.to_vec(),
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_f64(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| T::from_f64(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// True when no element is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum()
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(TensorError::InvalidParam {
                op: "add_assign",
                msg: format!("shape {:?} vs {:?}", self.shape, other.shape),
            });
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub(crate) fn dims4(&self, op: &'static str) -> Result<[usize; 4]> {
        match self.shape.as_slice() {
            &[n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(TensorError::Rank {
                op,
                expected: 4,
                found: self.shape.clone(),
            }),
        }
    }

    pub(crate) fn dims2(&self, op: &'static str) -> Result<[usize; 2]> {
        match self.shape.as_slice() {
            &[n, d] => Ok([n, d]),
            _ => Err(TensorError::Rank {
                op,
                expected: 2,
                found: self.shape.clone(),
            }),
        }
    }

    /// Slice along the leading axis, `[start, start + count)`.
    pub fn batch_slice(&self, start: usize, count: usize) -> Result<Self> {
        let n = *self.shape.first().ok_or(TensorError::Rank {
            op: "batch_slice",
            expected: 1,
            found: vec![],
        })?;
        if count == 0 || start + count > n {
            return Err(TensorError::InvalidParam {
                op: "batch_slice",
                msg: format!("range {start}..{} outside batch of {n}", start + count),
            });
        }
        let per = self.data.len() / n;
        let mut shape = self.shape.clone();
        shape[0] = count;
        Ok(Self {
            shape,
            data: self.data[start * per..(start + count) * per].to_vec(),
        })
    }

    /// Concatenate tensors along the leading axis.
    pub fn stack(parts: &[Tensor<T>]) -> Result<Self> {
        let first = parts.first().ok_or(TensorError::InvalidParam {
            op: "stack",
            msg: "no tensors to stack".into(),
        })?;
        let tail = &first.shape[1..];
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut n = 0;
        for p in parts {
            if &p.shape[1..] != tail {
                return Err(TensorError::InvalidParam {
                    op: "stack",
                    msg: format!("trailing shape {:?} vs {:?}", &p.shape[1..], tail),
                });
            }
            n += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = n;
        Ok(Self { shape, data })
    }
}

pub(crate) fn expect_dim(op: &'static str, axis: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(TensorError::Dimension {
            op,
            axis,
            expected,
            found,
        })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks_length() {
        assert!(Tensor::<f32>::new(&[2, 3], vec![0.0; 6]).is_ok());
        let err = Tensor::<f32>::new(&[2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, TensorError::DataLength { expected: 6, found: 5, .. }));
        assert!(matches!(
            Tensor::<f32>::new(&[0, 3], vec![]),
            Err(TensorError::ZeroExtent(_))
        ));
    }

    #[test]
    fn finiteness_predicate() {
        let mut t = Tensor::<f64>::zeros(&[4]);
        assert!(t.is_finite());
        t.data_mut()[2] = f64::NAN;
        assert!(!t.is_finite());
        t.data_mut()[2] = f64::INFINITY;
        assert!(!t.is_finite());
    }

    #[test]
    fn gemm_with_transposed_operand() {
        // a: 2x3, b^T stored as 2x3 -> b is 3x2
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let bt = [1.0f64, 0.0, 1.0, 0.0, 1.0, 0.0];
        let mut c = [0.0f64; 4];
        f64::gemm(2, 3, 2, 1.0, &a, (3, 1), &bt, (1, 3), 0.0, &mut c, (2, 1));
        assert_eq!(c, [4.0, 2.0, 10.0, 5.0]);
    }

    #[test]
    fn stack_and_slice_roundtrip() {
        let a = Tensor::<f32>::from_f64(&[1, 2], &[1.0, 2.0]).unwrap();
        let b = Tensor::<f32>::from_f64(&[2, 2], &[3.0, 4.0, 5.0, 6.0]).unwrap();
        let s = Tensor::stack(&[a.clone(), b]).unwrap();
        assert_eq!(s.shape(), &[3, 2]);
        assert_eq!(s.batch_slice(0, 1).unwrap(), a);
        assert_eq!(s.batch_slice(2, 1).unwrap().data(), &[5.0, 6.0]);
    }

    #[test]
    fn conv_params_validation() {
        assert!(ConvParams::new(4, (3, 3), 1, Padding::Same).validate().is_ok());
        assert!(ConvParams::new(4, (2, 3), 1, Padding::Same).validate().is_err());
        assert!(ConvParams::new(4, (3, 3), 0, Padding::Same).validate().is_err());
    }
}
