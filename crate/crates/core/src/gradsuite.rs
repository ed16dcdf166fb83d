//! Finite-difference verification of every differentiable operation.
//!
//! Each case draws random inputs from a seed, reduces the operation's output
//! to a scalar with a random projection (losses are already scalar) and
//! compares the analytic gradient of every input against numeric
//! differences. 64-bit cases use the plain central difference; 32-bit cases
//! evaluate the operation in `f32` and use a five-point stencil with a
//! larger step so that truncation stays below `f32` rounding noise. Inputs
//! to piecewise-linear operations are kept further than the stencil reach
//! from their kinks.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{grad_check_with, GradCheck, MetricsError, Stencil};
use crate::nn::{
    build_network, head_losses, HeadLoss, loss_bce, loss_cce, loss_joint, loss_mse, HeadSource, HeadSpec, LayerSpec,
    LossSpec, Network, NetworkSpec, NnError, Phase, Targets, GRADES,
};
use crate::tensor::{
    activate, activate_backward, batchnorm_infer, batchnorm_infer_backward, batchnorm_train, batchnorm_train_backward,
    conv2d, conv2d_backward, dense, dense_backward, maxpool2d, maxpool2d_backward, upsample_nearest,
    upsample_nearest_backward, Activation, BatchNormState, ConvParams, Padding, Scalar, Tensor, TensorError,
};

pub const F64_TOLERANCE: f64 = 1e-6;
pub const F32_TOLERANCE: f64 = 1e-4;
const F64_STEP: f64 = 1e-5;
const F32_STEP: f64 = 0.04;
/// Smallest distance of a kink input from its kink.
const KINK_MARGIN: f64 = 0.2;

/// Every operation the suite covers.
pub const OPS: &[&str] = &[
    "conv2d",
    "conv2d-strided",
    "maxpool2d",
    "upsample",
    "dense",
    "batchnorm-train",
    "batchnorm-train-flat",
    "batchnorm-infer",
    "relu",
    "sigmoid",
    "softmax",
    "bce",
    "cce",
    "mse",
    "joint",
    "ordinal",
    "network-cnn",
    "network-fcn",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F64,
    F32,
}

impl Precision {
    pub fn tolerance(&self) -> f64 {
        match self {
            Precision::F64 => F64_TOLERANCE,
            Precision::F32 => F32_TOLERANCE,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        })
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "f64" | "64" => Ok(Precision::F64),
            "f32" | "32" => Ok(Precision::F32),
            _ => Err(format!("unknown precision `{s}` (expected f32 or f64)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Check(#[from] MetricsError),
}

type Result<T> = std::result::Result<T, SuiteError>;

/// Check of one input of one operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub op: String,
    /// Which input was differentiated, e.g. `weights`.
    pub wrt: String,
    pub precision: Precision,
    pub seed: u64,
    pub check: GradCheck,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.check.passes(self.precision.tolerance())
    }
}

/// An input vector, its analytic gradient and the function to difference.
struct Var<'a> {
    wrt: &'static str,
    x: Vec<f64>,
    analytic: Vec<f64>,
    f: Box<dyn FnMut(&[f64]) -> f64 + 'a>,
}

fn tensor<T: Scalar>(shape: &[usize], v: &[f64]) -> Tensor<T> {
    Tensor::new(shape, v.iter().map(|&x| T::from_f64(x)).collect()).expect("shape matches data")
}

fn to_f64<T: Scalar>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.as_f64()).collect()
}

/// `sum_i r_i y_i`, accumulated in 64 bits.
fn project<T: Scalar>(y: &Tensor<T>, r: &[f64]) -> f64 {
    y.data().iter().zip(r).map(|(a, b)| a.as_f64() * b).sum()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Values bounded away from zero by `KINK_MARGIN`, random sign.
fn off_kink(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.gen_range(KINK_MARGIN..1.5);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// Distinct values spaced `2 * KINK_MARGIN` apart in random order.
fn distinct(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * 2.0 * KINK_MARGIN).collect();
    v.shuffle(rng);
    v
}

fn shape_len(s: &[usize]) -> usize {
    s.iter().product()
}

fn conv_vars<'a, T: Scalar>(rng: &mut ChaCha8Rng, xs: [usize; 4], p: ConvParams) -> Result<Vec<Var<'a>>> {
    let ws = [p.kernels, xs[1], p.kernel_size.0, p.kernel_size.1];
    let x = uniform(rng, shape_len(&xs), -1.0, 1.0);
    let w = uniform(rng, shape_len(&ws), -1.0, 1.0);
    let b = uniform(rng, p.kernels, -1.0, 1.0);
    let y = conv2d(&tensor::<T>(&xs, &x), &tensor(&ws, &w), &tensor(&[p.kernels], &b), &p)?;
    let r = uniform(rng, y.len(), -1.0, 1.0);
    let g = conv2d_backward(&tensor::<T>(&xs, &x), &tensor(&ws, &w), &tensor(y.shape(), &r), &p)?;
    let eval = move |x: &[f64], w: &[f64], b: &[f64]| {
        let y = conv2d(&tensor::<T>(&xs, x), &tensor(&ws, w), &tensor(&[p.kernels], b), &p).expect("checked shapes");
        project(&y, &r)
    };
    let (x1, w1, b1) = (x.clone(), w.clone(), b.clone());
    let (x2, w2, b2) = (x.clone(), w.clone(), b.clone());
    let eval2 = eval.clone();
    let eval3 = eval.clone();
    Ok(vec![
        Var {
            wrt: "input",
            x,
            analytic: to_f64(&g.input),
            f: Box::new(move |v| eval(v, &w1, &b1)),
        },
        Var {
            wrt: "weights",
            x: w,
            analytic: to_f64(&g.weights),
            f: Box::new(move |v| eval2(&x1, v, &b2)),
        },
        Var {
            wrt: "bias",
            x: b,
            analytic: to_f64(&g.bias),
            f: Box::new(move |v| eval3(&x2, &w2, v)),
        },
    ])
}

fn dense_vars<'a, T: Scalar>(rng: &mut ChaCha8Rng) -> Result<Vec<Var<'a>>> {
    let (n, d, m) = (3, 4, 5);
    let x = uniform(rng, n * d, -1.0, 1.0);
    let w = uniform(rng, d * m, -1.0, 1.0);
    let b = uniform(rng, m, -1.0, 1.0);
    let r = uniform(rng, n * m, -1.0, 1.0);
    let g = dense_backward(&tensor::<T>(&[n, d], &x), &tensor(&[d, m], &w), &tensor(&[n, m], &r))?;
    let eval = move |x: &[f64], w: &[f64], b: &[f64]| {
        let y = dense(&tensor::<T>(&[n, d], x), &tensor(&[d, m], w), &tensor(&[m], b)).expect("checked shapes");
        project(&y, &r)
    };
    let (x1, w1, b1) = (x.clone(), w.clone(), b.clone());
    let (x2, w2, b2) = (x.clone(), w.clone(), b.clone());
    let (e2, e3) = (eval.clone(), eval.clone());
    Ok(vec![
        Var {
            wrt: "input",
            x,
            analytic: to_f64(&g.input),
            f: Box::new(move |v| eval(v, &w1, &b1)),
        },
        Var {
            wrt: "weights",
            x: w,
            analytic: to_f64(&g.weights),
            f: Box::new(move |v| e2(&x1, v, &b2)),
        },
        Var {
            wrt: "bias",
            x: b,
            analytic: to_f64(&g.bias),
            f: Box::new(move |v| e3(&x2, &w2, v)),
        },
    ])
}

fn batchnorm_vars<'a, T: Scalar>(rng: &mut ChaCha8Rng, xs: &'static [usize], train: bool) -> Result<Vec<Var<'a>>> {
    let c = xs[1];
    let x = uniform(rng, shape_len(xs), -1.0, 1.0);
    let gamma = uniform(rng, c, 0.5, 1.5);
    let beta = uniform(rng, c, -0.5, 0.5);
    let r = uniform(rng, x.len(), -1.0, 1.0);
    let mut state = BatchNormState::<T>::new(c);
    state.running_mean = uniform(rng, c, -0.3, 0.3).iter().map(|&v| T::from_f64(v)).collect();
    state.running_var = uniform(rng, c, 0.5, 1.5).iter().map(|&v| T::from_f64(v)).collect();
    let tx = tensor::<T>(xs, &x);
    let (tg, tb) = (tensor::<T>(&[c], &gamma), tensor::<T>(&[c], &beta));
    let tr = tensor::<T>(xs, &r);
    let g = if train {
        let (_, cache) = batchnorm_train(&tx, &tg, &tb, &mut state.clone())?;
        batchnorm_train_backward(&tr, &tg, &cache)?
    } else {
        batchnorm_infer_backward(&tx, &tr, &tg, &state)?
    };
    let eval = move |x: &[f64], gm: &[f64], bt: &[f64]| {
        let (tx, tg, tb) = (tensor::<T>(xs, x), tensor::<T>(&[c], gm), tensor::<T>(&[c], bt));
        let y = if train {
            batchnorm_train(&tx, &tg, &tb, &mut state.clone()).expect("checked shapes").0
        } else {
            batchnorm_infer(&tx, &tg, &tb, &state).expect("checked shapes")
        };
        project(&y, &r)
    };
    let (x1, g1, b1) = (x.clone(), gamma.clone(), beta.clone());
    let (x2, g2, b2) = (x.clone(), gamma.clone(), beta.clone());
    let (e2, e3) = (eval.clone(), eval.clone());
    Ok(vec![
        Var {
            wrt: "input",
            x,
            analytic: to_f64(&g.input),
            f: Box::new(move |v| eval(v, &g1, &b1)),
        },
        Var {
            wrt: "gamma",
            x: gamma,
            analytic: to_f64(&g.gamma),
            f: Box::new(move |v| e2(&x1, v, &b2)),
        },
        Var {
            wrt: "beta",
            x: beta,
            analytic: to_f64(&g.beta),
            f: Box::new(move |v| e3(&x2, &g2, v)),
        },
    ])
}

fn activation_var<'a, T: Scalar>(rng: &mut ChaCha8Rng, kind: Activation) -> Result<Vec<Var<'a>>> {
    let shape = [3usize, 5];
    let x = match kind {
        Activation::ReLU => off_kink(rng, 15),
        _ => uniform(rng, 15, -3.0, 3.0),
    };
    let r = uniform(rng, 15, -1.0, 1.0);
    let tx = tensor::<T>(&shape, &x);
    let y = activate(&tx, kind)?;
    let g = activate_backward(&tx, &y, &tensor(&shape, &r), kind)?;
    Ok(vec![Var {
        wrt: "input",
        x,
        analytic: to_f64(&g),
        f: Box::new(move |v| project(&activate(&tensor::<T>(&shape, v), kind).expect("valid axis"), &r)),
    }])
}

fn labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..GRADES)).collect()
}

/// Cross-entropy is differentiated through a softmax so that perturbed
/// inputs remain probability rows.
fn cce_var<'a, T: Scalar>(rng: &mut ChaCha8Rng) -> Result<Vec<Var<'a>>> {
    let n = 4;
    let shape = [n, GRADES];
    let z = uniform(rng, n * GRADES, -2.0, 2.0);
    let y = labels(rng, n);
    let tz = tensor::<T>(&shape, &z);
    let p = activate(&tz, Activation::Softmax(1))?;
    let lg = loss_cce(&p, &y)?;
    let g = activate_backward(&tz, &p, &lg.grad, Activation::Softmax(1))?;
    Ok(vec![Var {
        wrt: "logits",
        x: z,
        analytic: to_f64(&g),
        f: Box::new(move |v| {
            let p = activate(&tensor::<T>(&shape, v), Activation::Softmax(1)).expect("valid axis");
            loss_cce(&p, &y).expect("probability rows").value
        }),
    }])
}

fn joint_vars<'a, T: Scalar>(rng: &mut ChaCha8Rng) -> Result<Vec<Var<'a>>> {
    let n = 4;
    let shape = [n, GRADES];
    let w_reg = rng.gen_range(0.2..0.8);
    let z = uniform(rng, n * GRADES, -2.0, 2.0);
    let reg = uniform(rng, n, -1.0, 5.0);
    let y = labels(rng, n);
    let targets: Vec<f64> = y.iter().map(|&l| l as f64).collect();
    let tz = tensor::<T>(&shape, &z);
    let p = activate(&tz, Activation::Softmax(1))?;
    let jl = loss_joint(&p, &y, &tensor::<T>(&[n, 1], &reg), &targets, w_reg)?;
    let gz = activate_backward(&tz, &p, &jl.grad_probs, Activation::Softmax(1))?;
    let eval = move |z: &[f64], reg: &[f64]| {
        let p = activate(&tensor::<T>(&shape, z), Activation::Softmax(1)).expect("valid axis");
        loss_joint(&p, &y, &tensor::<T>(&[n, 1], reg), &targets, w_reg)
            .expect("valid inputs")
            .total
    };
    let (z1, r1) = (z.clone(), reg.clone());
    let e2 = eval.clone();
    Ok(vec![
        Var {
            wrt: "logits",
            x: z,
            analytic: to_f64(&gz),
            f: Box::new(move |v| eval(v, &r1)),
        },
        Var {
            wrt: "reg",
            x: reg,
            analytic: to_f64(&jl.grad_reg),
            f: Box::new(move |v| e2(&z1, v)),
        },
    ])
}

/// Checks of a whole network: the input and every parameter, through the
/// weighted head losses plus the L2 term.
fn network_vars<'a, T: Scalar>(
    rng: &mut ChaCha8Rng,
    spec: NetworkSpec,
    batch: usize,
    loss: LossSpec,
) -> Result<Vec<Var<'a>>> {
    let mut net = build_network::<T>(&spec, rng.gen())?;
    for p in net.params_mut() {
        let vals = uniform(rng, p.value.len(), -0.8, 0.8);
        for (d, v) in p.value.data_mut().iter_mut().zip(vals) {
            *d = T::from_f64(v);
        }
    }
    let [c, h, w] = spec.input_shape;
    let xs = [batch, c, h, w];
    let x = uniform(rng, shape_len(&xs), -1.0, 1.0);
    let y = labels(rng, batch);
    let grades: Vec<f64> = uniform(rng, batch, 0.0, 4.0);
    let mask_shape = spec.shapes()?.last().map(|s| s.output.clone()).unwrap_or_default();
    let mask: Vec<f64> = (0..batch * shape_len(&mask_shape))
        .map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 })
        .collect();
    let mut mshape = vec![batch];
    mshape.extend_from_slice(&mask_shape);
    let tmask = tensor::<T>(&mshape, &mask);

    let objective = {
        let (y, grades, tmask, loss) = (y.clone(), grades.clone(), tmask.clone(), loss.clone());
        move |net: &mut Network<T>, x: &Tensor<T>, backward: bool| -> Result<(f64, Option<Tensor<T>>)> {
            let out = net.forward(x, Phase::Train)?;
            let targets = Targets {
                masks: Some(&tmask),
                labels: Some(&y),
                grades: Some(&grades),
            };
            let (data, _, grads) = head_losses(net, &out, &targets, &loss)?;
            let value = data + net.l2_penalty();
            if !backward {
                return Ok((value, None));
            }
            let named: Vec<(&str, Tensor<T>)> = grads.iter().map(|(n, g)| (n.as_str(), g.clone())).collect();
            let dx = net.backward(&named)?;
            net.add_l2_grads();
            Ok((value, Some(dx)))
        }
    };
    let tx = tensor::<T>(&xs, &x);
    let (_, dx) = objective(&mut net, &tx, true)?;
    let mut vars = Vec::new();
    {
        let mut work = net.clone();
        let obj = objective.clone();
        vars.push(Var {
            wrt: "input",
            x: x.clone(),
            analytic: to_f64(&dx.expect("backward requested")),
            f: Box::new(move |v| obj(&mut work, &tensor::<T>(&xs, v), false).expect("valid network").0),
        });
    }
    let mut names = Vec::new();
    for i in 0..net.params().len() {
        let p = &net.params()[i];
        names.push(p.name.clone());
        let mut work = net.clone();
        let obj = objective.clone();
        let tx = tx.clone();
        vars.push(Var {
            wrt: "param",
            x: to_f64(&p.value),
            analytic: to_f64(&p.grad),
            f: Box::new(move |v| {
                for (d, &s) in work.params_mut()[i].value.data_mut().iter_mut().zip(v) {
                    *d = T::from_f64(s);
                }
                obj(&mut work, &tx, false).expect("valid network").0
            }),
        });
    }
    Ok(vars)
}

fn cnn_spec() -> NetworkSpec {
    NetworkSpec {
        name: "check-cnn".into(),
        input_shape: [2, 6, 6],
        trunk: vec![
            LayerSpec::conv("conv1", 3, 3, 1).with_l2(0.01),
            LayerSpec::relu("relu1"),
            LayerSpec::batch_norm("bn1"),
            LayerSpec::max_pool("pool1", 3, 2),
            LayerSpec::flatten("flat"),
            LayerSpec::dense("fc", 6).with_l2(0.01),
            LayerSpec::relu("fc_relu"),
        ],
        heads: vec![
            HeadSpec {
                name: "clsf".into(),
                source: HeadSource::Trunk,
                loss: HeadLoss::Cce,
                layers: vec![LayerSpec::softmax_dense("fc-clsf", GRADES)],
            },
            HeadSpec {
                name: "reg".into(),
                source: HeadSource::Trunk,
                loss: HeadLoss::Mse,
                layers: vec![LayerSpec::dense("fc-reg", 1)],
            },
        ],
    }
}

fn fcn_spec() -> NetworkSpec {
    NetworkSpec {
        name: "check-fcn".into(),
        input_shape: [1, 8, 8],
        trunk: vec![
            LayerSpec::conv("conv1", 2, 3, 1),
            LayerSpec::relu("relu1"),
            LayerSpec::max_pool("pool1", 2, 2),
            LayerSpec::conv("conv2", 2, 3, 1),
            LayerSpec::upsample("up", 2),
        ],
        heads: vec![HeadSpec {
            name: "mask".into(),
            source: HeadSource::Trunk,
            loss: HeadLoss::Bce,
            layers: vec![LayerSpec::conv("conv3", 1, 1, 1), LayerSpec::sigmoid("sig")],
        }],
    }
}

fn ordinal_spec() -> NetworkSpec {
    NetworkSpec {
        name: "check-ordinal".into(),
        input_shape: [1, 2, 3],
        trunk: vec![LayerSpec::flatten("flat")],
        heads: vec![
            HeadSpec {
                name: "clsf".into(),
                source: HeadSource::Trunk,
                loss: HeadLoss::Cce,
                layers: vec![LayerSpec::softmax_dense("fc6", GRADES)],
            },
            HeadSpec {
                name: "reg".into(),
                source: HeadSource::Head("clsf".into()),
                loss: HeadLoss::Mse,
                layers: vec![LayerSpec::ordinal("fc7", GRADES)],
            },
        ],
    }
}

fn op_vars<'a, T: Scalar>(op: &str, rng: &mut ChaCha8Rng) -> Result<Vec<Var<'a>>> {
    match op {
        "conv2d" => conv_vars::<T>(rng, [2, 2, 5, 5], ConvParams::new(3, (3, 3), 1, Padding::Same)),
        "conv2d-strided" => conv_vars::<T>(rng, [2, 2, 7, 6], ConvParams::new(2, (3, 5), 2, Padding::Same)),
        "maxpool2d" => {
            let xs = [2usize, 2, 7, 7];
            let x = distinct(rng, shape_len(&xs));
            let (y, idx) = maxpool2d(&tensor::<T>(&xs, &x), (3, 3), 2)?;
            let r = uniform(rng, y.len(), -1.0, 1.0);
            let g = maxpool2d_backward(&tensor::<T>(y.shape(), &r), &idx, &xs)?;
            Ok(vec![Var {
                wrt: "input",
                x,
                analytic: to_f64(&g),
                f: Box::new(move |v| project(&maxpool2d(&tensor::<T>(&xs, v), (3, 3), 2).expect("fits").0, &r)),
            }])
        }
        "upsample" => {
            let xs = [2usize, 3, 3, 4];
            let x = uniform(rng, shape_len(&xs), -1.0, 1.0);
            let y = upsample_nearest(&tensor::<T>(&xs, &x), 2)?;
            let r = uniform(rng, y.len(), -1.0, 1.0);
            let g = upsample_nearest_backward(&tensor::<T>(y.shape(), &r), 2)?;
            Ok(vec![Var {
                wrt: "input",
                x,
                analytic: to_f64(&g),
                f: Box::new(move |v| project(&upsample_nearest(&tensor::<T>(&xs, v), 2).expect("valid"), &r)),
            }])
        }
        "dense" => dense_vars::<T>(rng),
        "batchnorm-train" => batchnorm_vars::<T>(rng, &[4, 3, 3, 3], true),
        "batchnorm-train-flat" => batchnorm_vars::<T>(rng, &[6, 4], true),
        "batchnorm-infer" => batchnorm_vars::<T>(rng, &[4, 3, 3, 3], false),
        "relu" => activation_var::<T>(rng, Activation::ReLU),
        "sigmoid" => activation_var::<T>(rng, Activation::Sigmoid),
        "softmax" => activation_var::<T>(rng, Activation::Softmax(1)),
        "bce" => {
            let shape = [2usize, 1, 3, 3];
            let p = uniform(rng, 18, 0.25, 0.75);
            let t: Vec<f64> = (0..18).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let tt = tensor::<T>(&shape, &t);
            let g = loss_bce(&tensor::<T>(&shape, &p), &tt)?.grad;
            Ok(vec![Var {
                wrt: "pred",
                x: p,
                analytic: to_f64(&g),
                f: Box::new(move |v| loss_bce(&tensor::<T>(&shape, v), &tt).expect("same shape").value),
            }])
        }
        "cce" => cce_var::<T>(rng),
        "mse" => {
            let pred = uniform(rng, 6, -1.0, 5.0);
            let target = uniform(rng, 6, 0.0, 4.0);
            let g = loss_mse(&tensor::<T>(&[6, 1], &pred), &target)?.grad;
            Ok(vec![Var {
                wrt: "pred",
                x: pred,
                analytic: to_f64(&g),
                f: Box::new(move |v| loss_mse(&tensor::<T>(&[6, 1], v), &target).expect("same length").value),
            }])
        }
        "joint" => joint_vars::<T>(rng),
        "ordinal" => network_vars::<T>(rng, ordinal_spec(), 4, LossSpec::single("reg")),
        "network-cnn" => network_vars::<T>(rng, cnn_spec(), 3, LossSpec::joint(0.5)),
        "network-fcn" => network_vars::<T>(rng, fcn_spec(), 2, LossSpec::single("mask")),
        other => Err(SuiteError::UnknownOp(other.to_string())),
    }
}

/// Log losses have large high-order derivatives near the ends of their
/// domain and need a finer stencil.
fn f32_step(op: &str) -> f64 {
    match op {
        "bce" => 0.01,
        _ => F32_STEP,
    }
}

fn stream(op: &str) -> u64 {
    OPS.iter().position(|&o| o == op).map_or(u64::MAX, |i| i as u64 + 1)
}

/// Check every input of `op` for one seed.
pub fn check_op(op: &str, precision: Precision, seed: u64) -> Result<Vec<CaseResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream(op));
    let (vars, step, stencil) = match precision {
        Precision::F64 => (op_vars::<f64>(op, &mut rng)?, F64_STEP, Stencil::Central),
        Precision::F32 => (op_vars::<f32>(op, &mut rng)?, f32_step(op), Stencil::FivePoint),
    };
    let mut out = Vec::new();
    let mut counts = std::collections::HashMap::new();
    for mut v in vars {
        let check = grad_check_with(&mut v.f, &v.x, &v.analytic, step, stencil)?;
        let k = counts.entry(v.wrt).or_insert(0usize);
        let wrt = if v.wrt == "param" { format!("param{k}") } else { v.wrt.to_string() };
        *k += 1;
        out.push(CaseResult {
            op: op.to_string(),
            wrt,
            precision,
            seed,
            check,
        });
    }
    Ok(out)
}

/// Operations checked at `precision`. Whole-network cases cross ReLU and
/// max-pool kinks at any step usable in 32 bits, so they run in 64 bits
/// only; [`check_network_sample`] covers networks in 32 bits.
pub fn ops(precision: Precision) -> Vec<&'static str> {
    OPS.iter()
        .copied()
        .filter(|op| precision == Precision::F64 || !op.starts_with("network-"))
        .collect()
}

/// Every operation in [`ops`] for every seed.
pub fn run_suite(precision: Precision, seeds: std::ops::Range<u64>) -> Result<Vec<CaseResult>> {
    let mut out = Vec::new();
    for op in ops(precision) {
        for seed in seeds.clone() {
            out.extend(check_op(op, precision, seed)?);
        }
    }
    Ok(out)
}

/// Width divisor applied to full-size presets before a whole-network check.
pub const CHECK_WIDTH_DIVISOR: usize = 8;

/// The preset `name` at the width used for whole-network checks. Desk
/// presets are already narrow and are used as they are.
pub fn check_spec(name: &str) -> Result<NetworkSpec> {
    let spec = crate::nn::preset(name)?;
    Ok(if name.starts_with("desk-") { spec } else { spec.narrowed(CHECK_WIDTH_DIVISOR) })
}

/// Tolerance of [`check_network_sample`].
pub const NETWORK_TOLERANCE: f64 = 1e-3;
/// Small enough that a deep network rarely has a kink within reach.
const TWIN_STEP: f64 = 1e-7;

/// Check of a 32-bit network's loss gradient with respect to `samples`
/// randomly chosen weights, with every head's loss weighted equally plus
/// the L2 term. Runs in inference mode, so dropout is off and batch-norm
/// uses its running statistics.
///
/// The finite differences are taken on a 64-bit copy of the same network:
/// 32-bit loss rounding noise divided by any step small enough to avoid
/// ReLU and max-pool kinks in a deep network exceeds the tolerance, while
/// the 64-bit copy evaluates the same function exactly enough.
pub fn check_network_sample(spec: &NetworkSpec, seed: u64, samples: usize, batch: usize) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = build_network::<f32>(spec, seed)?;
    // Zero biases put dead regions exactly on the ReLU kink.
    for p in net.params_mut().iter_mut().filter(|p| p.name.ends_with(".bias")) {
        for v in p.value.data_mut() {
            *v = rng.gen_range(-0.1f32..0.1);
        }
    }
    let [c, h, w] = spec.input_shape;
    let xs = [batch, c, h, w];
    let x = uniform(&mut rng, shape_len(&xs), -1.0, 1.0);
    let y = labels(&mut rng, batch);
    let grades = uniform(&mut rng, batch, 0.0, 4.0);
    let out = net.predict(&tensor::<f32>(&xs, &x))?;
    let mask = spec
        .heads
        .iter()
        .find(|h| h.loss == HeadLoss::Bce)
        .and_then(|h| out.get(&h.name))
        .map(|t| {
            let v: Vec<f64> = (0..t.len()).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
            (t.shape().to_vec(), v)
        });
    let loss = LossSpec {
        weights: spec.heads.iter().map(|h| (h.name.clone(), 1.0 / spec.heads.len() as f64)).collect(),
    };

    let mask32 = mask.as_ref().map(|(s, v)| tensor::<f32>(s, v));
    let targets = Targets {
        masks: mask32.as_ref(),
        labels: Some(&y),
        grades: Some(&grades),
    };
    let out = net.forward(&tensor::<f32>(&xs, &x), Phase::Infer)?;
    let (_, _, grads) = head_losses(&net, &out, &targets, &loss)?;
    let named: Vec<(&str, Tensor<f32>)> = grads.iter().map(|(n, g)| (n.as_str(), g.clone())).collect();
    net.backward(&named)?;
    net.add_l2_grads();

    let mut twin = build_network::<f64>(spec, seed)?;
    for (d, s) in twin.params_mut().iter_mut().zip(net.params()) {
        d.value = s.value.cast();
    }
    for (d, (_, s)) in twin.bn_states_mut().into_iter().zip(net.bn_states()) {
        d.running_mean = s.running_mean.iter().map(|v| v.as_f64()).collect();
        d.running_var = s.running_var.iter().map(|v| v.as_f64()).collect();
        d.eps = s.eps.as_f64();
    }

    let total: usize = net.params().iter().map(|p| p.value.len()).sum();
    let picks = rand::seq::index::sample(&mut rng, total, samples.min(total)).into_vec();
    let locate = |mut k: usize| {
        for (i, p) in net.params().iter().enumerate() {
            if k < p.value.len() {
                return (i, k);
            }
            k -= p.value.len();
        }
        unreachable!("index below the parameter total")
    };
    let sites: Vec<(usize, usize)> = picks.into_iter().map(locate).collect();
    let x0: Vec<f64> = sites.iter().map(|&(i, k)| net.params()[i].value.data()[k].as_f64()).collect();
    let analytic: Vec<f64> = sites.iter().map(|&(i, k)| net.params()[i].grad.data()[k].as_f64()).collect();

    let x64 = tensor::<f64>(&xs, &x);
    let mask64 = mask.as_ref().map(|(s, v)| tensor::<f64>(s, v));
    let targets = Targets {
        masks: mask64.as_ref(),
        labels: Some(&y),
        grades: Some(&grades),
    };
    let f = |v: &[f64]| {
        for (&(i, k), &s) in sites.iter().zip(v) {
            twin.params_mut()[i].value.data_mut()[k] = s;
        }
        let out = twin.predict(&x64).expect("valid network");
        let (data, _, _) = head_losses(&twin, &out, &targets, &loss).expect("valid targets");
        data + twin.l2_penalty()
    };
    Ok(grad_check_with(f, &x0, &analytic, TWIN_STEP, Stencil::Central)?)
}

/// Worst error per operation: `(op, worst, tolerance, passed)`.
pub fn summarize(results: &[CaseResult]) -> Vec<(String, Precision, f64, bool)> {
    let mut rows: Vec<(String, Precision, f64, bool)> = Vec::new();
    for r in results {
        match rows.iter_mut().find(|(o, p, _, _)| *o == r.op && *p == r.precision) {
            Some(row) => {
                row.2 = row.2.max(r.check.max_rel_error);
                row.3 &= r.passed();
            }
            None => rows.push((r.op.clone(), r.precision, r.check.max_rel_error, r.passed())),
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes_one_seed() {
        for p in [Precision::F64, Precision::F32] {
            for op in ops(p) {
                for r in check_op(op, p, 0).unwrap() {
                    assert!(r.passed(), "{op}/{} at {p}: {:?}", r.wrt, r.check);
                }
            }
        }
    }

    #[test]
    fn unknown_op() {
        assert!(matches!(check_op("gelu", Precision::F64, 0), Err(SuiteError::UnknownOp(_))));
    }
}
