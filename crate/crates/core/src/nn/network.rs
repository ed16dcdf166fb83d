use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{HeadSource, LayerKind, LayerSpec, NetworkSpec};
use super::{NnError, Result};
use crate::tensor::{
    activate_backward, batchnorm_infer, batchnorm_infer_backward, batchnorm_train, batchnorm_train_backward,
    conv2d, conv2d_backward, dense, dense_backward, maxpool2d, maxpool2d_backward, softmax, upsample_nearest,
    upsample_nearest_backward, Activation, BatchNormCache, BatchNormState, ConvParams, PoolIndices, Scalar, Tensor,
};

/// Whether dropout is active and batch norm uses batch statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    /// `layer.weight`, `layer.bias`, `layer.gamma`, ...
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    /// L2 coefficient; non-zero only for regularised weight tensors.
    pub l2: f64,
}

#[derive(Debug, Clone)]
struct Layer<T> {
    spec: LayerSpec,
    params: Range<usize>,
    bn: Option<BatchNormState<T>>,
}

#[derive(Debug, Clone)]
struct Head {
    name: String,
    source: Option<usize>,
    layers: Range<usize>,
}

#[derive(Debug, Clone)]
enum Cache<T> {
    Empty,
    Input(Tensor<T>),
    Output(Tensor<T>),
    Pool(PoolIndices, Vec<usize>),
    BnTrain(BatchNormCache<T>),
    Mask(Vec<T>),
    Softmax { input: Tensor<T>, probs: Tensor<T> },
    Shape(Vec<usize>),
}

struct Step<T> {
    out: Tensor<T>,
    cache: Cache<T>,
    bn: Option<BatchNormState<T>>,
}

/// Named head outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs<T> {
    pub heads: Vec<(String, Tensor<T>)>,
}

impl<T> Outputs<T> {
    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.heads.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Serializable dropout RNG position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone)]
pub struct Network<T = f32> {
    spec: NetworkSpec,
    seed: u64,
    layers: Vec<Layer<T>>,
    trunk: Range<usize>,
    heads: Vec<Head>,
    params: Vec<Param<T>>,
    caches: Vec<Cache<T>>,
    rng: ChaCha8Rng,
    first_non_finite: Option<String>,
}

/// Build a network with Xavier-uniform weights and zero biases.
pub fn build_network<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<Network<T>> {
    let shapes = spec.shapes()?;
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut params = Vec::new();
    for (l, s) in spec.layers().zip(&shapes) {
        let start = params.len();
        let (fan_in, fan_out) = fans(l, &s.input);
        for (suffix, shape) in l.param_shapes(&s.input) {
            let n: usize = shape.iter().product();
            let values: Vec<T> = match suffix {
                "weight" => {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..n).map(|_| T::from_f64(init.gen_range(-a..a))).collect()
                }
                "gamma" | "scale_w" => vec![T::one(); n],
                _ => vec![T::zero(); n],
            };
            params.push(Param {
                name: format!("{}.{suffix}", l.name),
                value: Tensor::new(&shape, values)?,
                grad: Tensor::zeros(&shape),
                l2: if suffix == "weight" { l.kind.l2() } else { 0.0 },
            });
        }
        layers.push(Layer {
            spec: l.clone(),
            params: start..params.len(),
            bn: matches!(l.kind, LayerKind::BatchNorm).then(|| BatchNormState::new(s.input[0])),
        });
    }
    let trunk = 0..spec.trunk.len();
    let mut heads: Vec<Head> = Vec::new();
    let mut next = trunk.end;
    for h in &spec.heads {
        let source = match &h.source {
            HeadSource::Trunk => None,
            HeadSource::Head(src) => Some(
                heads
                    .iter()
                    .position(|p| &p.name == src)
                    .ok_or_else(|| NnError::UnknownHead(src.clone()))?,
            ),
        };
        heads.push(Head {
            name: h.name.clone(),
            source,
            layers: next..next + h.layers.len(),
        });
        next += h.layers.len();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let n_layers = layers.len();
    Ok(Network {
        spec: spec.clone(),
        seed,
        layers,
        trunk,
        heads,
        params,
        caches: vec![Cache::Empty; n_layers],
        rng,
        first_non_finite: None,
    })
}

fn fans(l: &LayerSpec, input: &[usize]) -> (usize, usize) {
    match &l.kind {
        LayerKind::Conv {
            kernels, kernel_size, ..
        } => {
            let area = kernel_size.0 * kernel_size.1;
            (input[0] * area, kernels * area)
        }
        LayerKind::Dense { units, .. } | LayerKind::SoftmaxDense { units, .. } => (input[0], *units),
        _ => (1, 1),
    }
}

impl<T: Scalar> Network<T> {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Batch-norm running statistics in declaration order.
    pub fn bn_states(&self) -> Vec<(&str, &BatchNormState<T>)> {
        self.layers
            .iter()
            .filter_map(|l| l.bn.as_ref().map(|s| (l.spec.name.as_str(), s)))
            .collect()
    }

    pub fn bn_states_mut(&mut self) -> Vec<&mut BatchNormState<T>> {
        self.layers.iter_mut().filter_map(|l| l.bn.as_mut()).collect()
    }

    pub fn rng_state(&self) -> RngState {
        RngState {
            seed: self.rng.get_seed(),
            stream: self.rng.get_stream(),
            word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn set_rng_state(&mut self, state: RngState) {
        let mut rng = ChaCha8Rng::from_seed(state.seed);
        rng.set_stream(state.stream);
        rng.set_word_pos(state.word_pos);
        self.rng = rng;
    }

    /// Name of the first layer whose output was not finite in the last
    /// [`Network::forward`] call.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.first_non_finite.as_deref()
    }

    pub fn head_names(&self) -> Vec<&str> {
        self.heads.iter().map(|h| h.name.as_str()).collect()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let ok = x.rank() == 4 && x.shape()[1..] == self.spec.input_shape;
        if !ok {
            return Err(NnError::ShapeMismatch {
                what: "network input",
                expected: [&[x.shape().first().copied().unwrap_or(1)][..], &self.spec.input_shape].concat(),
                found: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Forward pass that keeps the caches needed by [`Network::backward`].
    pub fn forward(&mut self, x: &Tensor<T>, phase: Phase) -> Result<Outputs<T>> {
        self.check_input(x)?;
        self.first_non_finite = None;
        let mut h = x.clone();
        for i in self.trunk.clone() {
            h = self.step(i, &h, phase)?;
        }
        let trunk_out = h;
        let mut outs: Vec<(String, Tensor<T>)> = Vec::new();
        for hi in 0..self.heads.len() {
            let mut h = match self.heads[hi].source {
                None => trunk_out.clone(),
                Some(s) => outs[s].1.clone(),
            };
            for i in self.heads[hi].layers.clone() {
                h = self.step(i, &h, phase)?;
            }
            outs.push((self.heads[hi].name.clone(), h));
        }
        Ok(Outputs { heads: outs })
    }

    fn step(&mut self, i: usize, x: &Tensor<T>, phase: Phase) -> Result<Tensor<T>> {
        let s = layer_forward(&self.layers[i], &self.params, x, phase, Some(&mut self.rng), true)?;
        if let Some(bn) = s.bn {
            self.layers[i].bn = Some(bn);
        }
        if self.first_non_finite.is_none() && !s.out.is_finite() {
            self.first_non_finite = Some(self.layers[i].spec.name.clone());
        }
        self.caches[i] = s.cache;
        Ok(s.out)
    }

    /// Inference without caches or state updates.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Outputs<T>> {
        self.check_input(x)?;
        let run = |range: Range<usize>, mut h: Tensor<T>| -> Result<Tensor<T>> {
            for i in range {
                h = layer_forward(&self.layers[i], &self.params, &h, Phase::Infer, None, false)?.out;
            }
            Ok(h)
        };
        let trunk_out = run(self.trunk.clone(), x.clone())?;
        let mut outs: Vec<(String, Tensor<T>)> = Vec::new();
        for head in &self.heads {
            let src = match head.source {
                None => trunk_out.clone(),
                Some(s) => outs[s].1.clone(),
            };
            outs.push((head.name.clone(), run(head.layers.clone(), src)?));
        }
        Ok(Outputs { heads: outs })
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Back-propagate head gradients from the last `forward` call. Parameter
    /// gradients are overwritten; the gradient for the input is returned.
    pub fn backward(&mut self, head_grads: &[(&str, Tensor<T>)]) -> Result<Tensor<T>> {
        self.zero_grads();
        let mut pending: Vec<Option<Tensor<T>>> = vec![None; self.heads.len()];
        for (name, g) in head_grads {
            let idx = self
                .heads
                .iter()
                .position(|h| h.name == *name)
                .ok_or_else(|| NnError::UnknownHead(name.to_string()))?;
            accumulate(&mut pending[idx], g.clone())?;
        }
        let mut trunk_grad: Option<Tensor<T>> = None;
        for hi in (0..self.heads.len()).rev() {
            let Some(mut g) = pending[hi].take() else { continue };
            for i in self.heads[hi].layers.clone().rev() {
                g = self.back_step(i, &g)?;
            }
            match self.heads[hi].source {
                None => accumulate(&mut trunk_grad, g)?,
                Some(s) => accumulate(&mut pending[s], g)?,
            }
        }
        let mut g = trunk_grad.ok_or(NnError::NoGradient)?;
        for i in self.trunk.clone().rev() {
            g = self.back_step(i, &g)?;
        }
        Ok(g)
    }

    fn back_step(&mut self, i: usize, g: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = std::mem::replace(&mut self.caches[i], Cache::Empty);
        layer_backward(&self.layers[i], &mut self.params, &cache, g)
    }

    /// `sum(l2 * ||w||^2)` over regularised weights.
    pub fn l2_penalty(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.l2 > 0.0)
            .map(|p| p.l2 * p.value.data().iter().map(|v| v.as_f64().powi(2)).sum::<f64>())
            .sum()
    }

    /// Add `2 * l2 * w` to regularised weight gradients.
    pub fn add_l2_grads(&mut self) {
        for p in self.params.iter_mut().filter(|p| p.l2 > 0.0) {
            let k = T::from_f64(2.0 * p.l2);
            for (g, &w) in p.grad.data_mut().iter_mut().zip(p.value.data()) {
                *g += k * w;
            }
        }
    }

    /// Per-sample output shape of every layer.
    pub fn layer_shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.spec
            .shapes()
            .expect("validated at build time")
            .into_iter()
            .map(|s| (s.name, s.output))
            .collect()
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(&g)?,
        None => *slot = Some(g),
    }
    Ok(())
}

fn conv_params(kind: &LayerKind) -> ConvParams {
    match kind {
        LayerKind::Conv {
            kernels,
            kernel_size,
            stride,
            padding,
            ..
        } => ConvParams::new(*kernels, *kernel_size, *stride, *padding),
        _ => unreachable!("conv params requested for {}", kind.tag()),
    }
}

fn layer_forward<T: Scalar>(
    layer: &Layer<T>,
    params: &[Param<T>],
    x: &Tensor<T>,
    phase: Phase,
    rng: Option<&mut ChaCha8Rng>,
    keep: bool,
) -> Result<Step<T>> {
    let p = &params[layer.params.clone()];
    let keep_input = |t: &Tensor<T>| if keep { Cache::Input(t.clone()) } else { Cache::Empty };
    let plain = |out: Tensor<T>, cache: Cache<T>| Step { out, cache, bn: None };
    Ok(match &layer.spec.kind {
        LayerKind::Conv { .. } => {
            let out = conv2d(x, &p[0].value, &p[1].value, &conv_params(&layer.spec.kind))?;
            plain(out, keep_input(x))
        }
        LayerKind::MaxPool { size, stride } => {
            let (out, idx) = maxpool2d(x, *size, *stride)?;
            plain(out, if keep { Cache::Pool(idx, x.shape().to_vec()) } else { Cache::Empty })
        }
        LayerKind::Upsample { factor } => plain(upsample_nearest(x, *factor)?, Cache::Empty),
        LayerKind::Dense { .. } => plain(dense(x, &p[0].value, &p[1].value)?, keep_input(x)),
        LayerKind::BatchNorm => {
            let state = layer.bn.as_ref().expect("batch-norm layer without state");
            match phase {
                Phase::Train => {
                    let mut next = state.clone();
                    let (out, cache) = batchnorm_train(x, &p[0].value, &p[1].value, &mut next)?;
                    Step {
                        out,
                        cache: if keep { Cache::BnTrain(cache) } else { Cache::Empty },
                        bn: Some(next),
                    }
                }
                Phase::Infer => plain(batchnorm_infer(x, &p[0].value, &p[1].value, state)?, keep_input(x)),
            }
        }
        LayerKind::Relu => plain(crate::tensor::relu(x), keep_input(x)),
        LayerKind::Sigmoid => {
            let out = crate::tensor::sigmoid(x);
            let cache = if keep { Cache::Output(out.clone()) } else { Cache::Empty };
            plain(out, cache)
        }
        LayerKind::SoftmaxDense { .. } => {
            let probs = softmax(&dense(x, &p[0].value, &p[1].value)?, 1)?;
            let cache = if keep {
                Cache::Softmax {
                    input: x.clone(),
                    probs: probs.clone(),
                }
            } else {
                Cache::Empty
            };
            plain(probs, cache)
        }
        LayerKind::Dropout { rate } => match (phase, rng) {
            (Phase::Train, Some(rng)) if *rate > 0.0 => {
                let scale = T::from_f64(1.0 / (1.0 - rate));
                let mask: Vec<T> = (0..x.len())
                    .map(|_| if rng.gen::<f64>() >= *rate { scale } else { T::zero() })
                    .collect();
                let out = Tensor::new(x.shape(), x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect())?;
                plain(out, Cache::Mask(mask))
            }
            _ => plain(x.clone(), Cache::Empty),
        },
        LayerKind::Flatten => {
            let n = x.shape()[0];
            let out = x.clone().reshape(&[n, x.len() / n])?;
            plain(out, Cache::Shape(x.shape().to_vec()))
        }
        LayerKind::OrdinalHead { fixed_weights } => {
            let out = super::loss::ordinal_head(x, fixed_weights, p[0].value.data()[0], p[1].value.data()[0])?;
            plain(out, keep_input(x))
        }
    })
}

fn missing_cache(layer: &Layer<impl Scalar>) -> NnError {
    NnError::MissingCache(layer.spec.name.clone())
}

fn layer_backward<T: Scalar>(
    layer: &Layer<T>,
    params: &mut [Param<T>],
    cache: &Cache<T>,
    g: &Tensor<T>,
) -> Result<Tensor<T>> {
    let p = &mut params[layer.params.clone()];
    let out = match (&layer.spec.kind, cache) {
        (LayerKind::Conv { .. }, Cache::Input(x)) => {
            let grads = conv2d_backward(x, &p[0].value, g, &conv_params(&layer.spec.kind))?;
            p[0].grad.add_assign(&grads.weights)?;
            p[1].grad.add_assign(&grads.bias)?;
            grads.input
        }
        (LayerKind::MaxPool { .. }, Cache::Pool(idx, shape)) => maxpool2d_backward(g, idx, shape)?,
        (LayerKind::Upsample { factor }, _) => upsample_nearest_backward(g, *factor)?,
        (LayerKind::Dense { .. }, Cache::Input(x)) => {
            let grads = dense_backward(x, &p[0].value, g)?;
            p[0].grad.add_assign(&grads.weights)?;
            p[1].grad.add_assign(&grads.bias)?;
            grads.input
        }
        (LayerKind::BatchNorm, Cache::BnTrain(c)) => {
            let grads = batchnorm_train_backward(g, &p[0].value, c)?;
            p[0].grad.add_assign(&grads.gamma)?;
            p[1].grad.add_assign(&grads.beta)?;
            grads.input
        }
        (LayerKind::BatchNorm, Cache::Input(x)) => {
            let state = layer.bn.as_ref().expect("batch-norm layer without state");
            let grads = batchnorm_infer_backward(x, g, &p[0].value, state)?;
            p[0].grad.add_assign(&grads.gamma)?;
            p[1].grad.add_assign(&grads.beta)?;
            grads.input
        }
        (LayerKind::Relu, Cache::Input(x)) => activate_backward(x, x, g, Activation::ReLU)?,
        (LayerKind::Sigmoid, Cache::Output(y)) => activate_backward(y, y, g, Activation::Sigmoid)?,
        (LayerKind::SoftmaxDense { .. }, Cache::Softmax { input, probs }) => {
            let dz = activate_backward(probs, probs, g, Activation::Softmax(1))?;
            let grads = dense_backward(input, &p[0].value, &dz)?;
            p[0].grad.add_assign(&grads.weights)?;
            p[1].grad.add_assign(&grads.bias)?;
            grads.input
        }
        (LayerKind::Dropout { .. }, Cache::Mask(mask)) => {
            Tensor::new(g.shape(), g.data().iter().zip(mask).map(|(&v, &m)| v * m).collect())?
        }
        (LayerKind::Dropout { .. }, Cache::Empty) => g.clone(),
        (LayerKind::Flatten, Cache::Shape(shape)) => g.clone().reshape(shape)?,
        (LayerKind::OrdinalHead { fixed_weights }, Cache::Input(x)) => {
            let k = fixed_weights.len();
            let sw = p[0].value.data()[0];
            let (mut dsw, mut dsb) = (T::zero(), T::zero());
            let mut dx = Vec::with_capacity(x.len());
            for (row, &gi) in x.data().chunks(k).zip(g.data()) {
                let e: T = row.iter().zip(fixed_weights).map(|(&p, &w)| p * T::from_f64(w)).sum();
                dsw += gi * e;
                dsb += gi;
                dx.extend(fixed_weights.iter().map(|&w| gi * sw * T::from_f64(w)));
            }
            p[0].grad.data_mut()[0] += dsw;
            p[1].grad.data_mut()[0] += dsb;
            Tensor::new(x.shape(), dx)?
        }
        _ => return Err(missing_cache(layer)),
    };
    Ok(out)
}
