use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NnError, Result};
use crate::tensor::{conv_output_extent, pool_output_extent, ConvParams, Padding};

/// Kind-specific layer hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv {
        kernels: usize,
        kernel_size: (usize, usize),
        stride: usize,
        padding: Padding,
        #[serde(default)]
        l2: f64,
    },
    MaxPool {
        size: (usize, usize),
        stride: usize,
    },
    Upsample {
        factor: usize,
    },
    Dense {
        units: usize,
        #[serde(default)]
        l2: f64,
    },
    BatchNorm,
    Relu,
    Sigmoid,
    /// Dense layer followed by a softmax over its units.
    SoftmaxDense {
        units: usize,
        #[serde(default)]
        l2: f64,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    /// Expected value of a probability row under fixed per-class weights,
    /// followed by a trainable scalar affine map.
    OrdinalHead {
        fixed_weights: Vec<f64>,
    },
}

impl LayerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LayerKind::Conv { .. } => "conv",
            LayerKind::MaxPool { .. } => "max_pool",
            LayerKind::Upsample { .. } => "upsample",
            LayerKind::Dense { .. } => "dense",
            LayerKind::BatchNorm => "batch_norm",
            LayerKind::Relu => "relu",
            LayerKind::Sigmoid => "sigmoid",
            LayerKind::SoftmaxDense { .. } => "softmax_dense",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::Flatten => "flatten",
            LayerKind::OrdinalHead { .. } => "ordinal_head",
        }
    }

    /// L2 penalty on the layer's weight tensor, zero when not regularised.
    pub fn l2(&self) -> f64 {
        match self {
            LayerKind::Conv { l2, .. } | LayerKind::Dense { l2, .. } | LayerKind::SoftmaxDense { l2, .. } => *l2,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn conv(name: &str, kernels: usize, k: usize, stride: usize) -> Self {
        Self::new(
            name,
            LayerKind::Conv {
                kernels,
                kernel_size: (k, k),
                stride,
                padding: Padding::Same,
                l2: 0.0,
            },
        )
    }

    pub fn max_pool(name: &str, k: usize, stride: usize) -> Self {
        Self::new(name, LayerKind::MaxPool { size: (k, k), stride })
    }

    pub fn upsample(name: &str, factor: usize) -> Self {
        Self::new(name, LayerKind::Upsample { factor })
    }

    pub fn dense(name: &str, units: usize) -> Self {
        Self::new(name, LayerKind::Dense { units, l2: 0.0 })
    }

    pub fn softmax_dense(name: &str, units: usize) -> Self {
        Self::new(name, LayerKind::SoftmaxDense { units, l2: 0.0 })
    }

    pub fn batch_norm(name: &str) -> Self {
        Self::new(name, LayerKind::BatchNorm)
    }

    pub fn relu(name: &str) -> Self {
        Self::new(name, LayerKind::Relu)
    }

    pub fn sigmoid(name: &str) -> Self {
        Self::new(name, LayerKind::Sigmoid)
    }

    pub fn dropout(name: &str, rate: f64) -> Self {
        Self::new(name, LayerKind::Dropout { rate })
    }

    pub fn flatten(name: &str) -> Self {
        Self::new(name, LayerKind::Flatten)
    }

    pub fn ordinal(name: &str, classes: usize) -> Self {
        Self::new(
            name,
            LayerKind::OrdinalHead {
                fixed_weights: (0..classes).map(|c| c as f64).collect(),
            },
        )
    }

    /// Set the L2 penalty; no effect on layers without weights.
    pub fn with_l2(mut self, penalty: f64) -> Self {
        match &mut self.kind {
            LayerKind::Conv { l2, .. } | LayerKind::Dense { l2, .. } | LayerKind::SoftmaxDense { l2, .. } => {
                *l2 = penalty
            }
            _ => {}
        }
        self
    }

    /// Output shape for a single sample, `[C, H, W]` or `[D]`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |msg: String| NnError::InvalidSpec {
            layer: self.name.clone(),
            msg,
        };
        let spatial = |op: &str| -> Result<(usize, usize, usize)> {
            match input {
                &[c, h, w] => Ok((c, h, w)),
                _ => Err(bad(format!("{op} needs a [C,H,W] input, found {input:?}"))),
            }
        };
        let flat = |op: &str| -> Result<usize> {
            match input {
                &[d] => Ok(d),
                _ => Err(bad(format!("{op} needs a flat input, found {input:?}"))),
            }
        };
        match &self.kind {
            LayerKind::Conv {
                kernels,
                kernel_size,
                stride,
                padding,
                ..
            } => {
                let (_, h, w) = spatial("conv")?;
                let p = ConvParams::new(*kernels, *kernel_size, *stride, *padding);
                p.validate().map_err(|e| bad(e.to_string()))?;
                let oh = conv_output_extent(h, kernel_size.0, *stride, *padding);
                let ow = conv_output_extent(w, kernel_size.1, *stride, *padding);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![*kernels, oh, ow]),
                    _ => Err(bad(format!("kernel {kernel_size:?} does not fit {h}x{w}"))),
                }
            }
            LayerKind::MaxPool { size, stride } => {
                let (c, h, w) = spatial("max pool")?;
                match (pool_output_extent(h, size.0, *stride), pool_output_extent(w, size.1, *stride)) {
                    (Some(oh), Some(ow)) => Ok(vec![c, oh, ow]),
                    _ => Err(bad(format!("window {size:?} does not fit {h}x{w}"))),
                }
            }
            LayerKind::Upsample { factor } => {
                let (c, h, w) = spatial("upsample")?;
                if *factor == 0 {
                    return Err(bad("upsampling factor must be at least 1".into()));
                }
                Ok(vec![c, h * factor, w * factor])
            }
            LayerKind::Dense { units, .. } | LayerKind::SoftmaxDense { units, .. } => {
                flat("dense")?;
                if *units == 0 {
                    return Err(bad("dense layer needs at least one unit".into()));
                }
                Ok(vec![*units])
            }
            LayerKind::BatchNorm | LayerKind::Relu | LayerKind::Sigmoid => Ok(input.to_vec()),
            LayerKind::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(bad(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(input.to_vec())
            }
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::OrdinalHead { fixed_weights } => {
                let d = flat("ordinal head")?;
                if d != fixed_weights.len() {
                    return Err(bad(format!(
                        "{} fixed weights for {d} probabilities",
                        fixed_weights.len()
                    )));
                }
                Ok(vec![1])
            }
        }
    }

    /// Shapes of the trainable tensors, in storage order.
    pub fn param_shapes(&self, input: &[usize]) -> Vec<(&'static str, Vec<usize>)> {
        match &self.kind {
            LayerKind::Conv {
                kernels, kernel_size, ..
            } => vec![
                ("weight", vec![*kernels, input[0], kernel_size.0, kernel_size.1]),
                ("bias", vec![*kernels]),
            ],
            LayerKind::Dense { units, .. } | LayerKind::SoftmaxDense { units, .. } => {
                vec![("weight", vec![input[0], *units]), ("bias", vec![*units])]
            }
            LayerKind::BatchNorm => vec![("gamma", vec![input[0]]), ("beta", vec![input[0]])],
            LayerKind::OrdinalHead { .. } => vec![("scale_w", vec![1]), ("scale_b", vec![1])],
            _ => vec![],
        }
    }
}

/// Training objective attached to a head output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadLoss {
    /// Pixel-wise binary cross entropy against a mask.
    Bce,
    /// Categorical cross entropy against integer grades.
    Cce,
    /// Mean squared error against real-valued grades.
    Mse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadSource {
    Trunk,
    Head(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub source: HeadSource,
    pub loss: HeadLoss,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    /// Per-sample input shape `[C, H, W]`.
    pub input_shape: [usize; 3],
    pub trunk: Vec<LayerSpec>,
    pub heads: Vec<HeadSpec>,
}

/// Per-layer input/output shapes produced by [`NetworkSpec::shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerShape {
    pub name: String,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

impl NetworkSpec {
    pub fn head(&self, name: &str) -> Option<&HeadSpec> {
        self.heads.iter().find(|h| h.name == name)
    }

    pub fn has_head(&self, name: &str) -> bool {
        self.head(name).is_some()
    }

    /// Copy with every convolution and hidden dense layer divided in width
    /// by `divisor` (rounded up). Output layers keep their size.
    pub fn narrowed(&self, divisor: usize) -> NetworkSpec {
        let d = divisor.max(1);
        let mut out = self.clone();
        out.name = format!("{}/w{d}", self.name);
        let heads = out.heads.iter_mut().map(|h| &mut h.layers);
        for layers in std::iter::once(&mut out.trunk).chain(heads) {
            for l in layers.iter_mut() {
                match &mut l.kind {
                    LayerKind::Conv { kernels: n, .. } | LayerKind::Dense { units: n, .. } => *n = n.div_ceil(d),
                    _ => {}
                }
            }
        }
        out
    }

    /// Every layer in declaration order: trunk first, then each head.
    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.trunk.iter().chain(self.heads.iter().flat_map(|h| h.layers.iter()))
    }

    /// Check names and static shapes, returning per-layer shapes.
    pub fn shapes(&self) -> Result<Vec<LayerShape>> {
        let mut seen = HashSet::new();
        for l in self.layers() {
            if !seen.insert(l.name.as_str()) {
                return Err(NnError::DuplicateName(l.name.clone()));
            }
        }
        let mut head_names = HashSet::new();
        for h in &self.heads {
            if !head_names.insert(h.name.as_str()) {
                return Err(NnError::DuplicateName(h.name.clone()));
            }
        }
        if self.heads.is_empty() {
            return Err(NnError::InvalidSpec {
                layer: self.name.clone(),
                msg: "network has no heads".into(),
            });
        }
        if self.input_shape.iter().any(|&d| d == 0) {
            return Err(NnError::InvalidSpec {
                layer: self.name.clone(),
                msg: format!("input shape {:?} has a zero extent", self.input_shape),
            });
        }
        for l in self.layers() {
            let l2 = l.kind.l2();
            if !(l2 >= 0.0 && l2.is_finite()) {
                return Err(NnError::InvalidSpec {
                    layer: l.name.clone(),
                    msg: format!("l2 penalty {l2} must be finite and non-negative"),
                });
            }
        }

        let mut out = Vec::new();
        let mut shape = self.input_shape.to_vec();
        for l in &self.trunk {
            let next = l.output_shape(&shape)?;
            out.push(LayerShape {
                name: l.name.clone(),
                input: shape,
                output: next.clone(),
            });
            shape = next;
        }
        let trunk_out = shape;
        let mut head_out: Vec<(String, Vec<usize>)> = Vec::new();
        for h in &self.heads {
            let mut shape = match &h.source {
                HeadSource::Trunk => trunk_out.clone(),
                HeadSource::Head(src) => head_out
                    .iter()
                    .find(|(n, _)| n == src)
                    .map(|(_, s)| s.clone())
                    .ok_or_else(|| NnError::UnknownHead(src.clone()))?,
            };
            if h.layers.is_empty() {
                return Err(NnError::InvalidSpec {
                    layer: h.name.clone(),
                    msg: "head has no layers".into(),
                });
            }
            for l in &h.layers {
                let next = l.output_shape(&shape)?;
                out.push(LayerShape {
                    name: l.name.clone(),
                    input: shape,
                    output: next.clone(),
                });
                shape = next;
            }
            head_out.push((h.name.clone(), shape));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(self
            .layers()
            .zip(&shapes)
            .flat_map(|(l, s)| l.param_shapes(&s.input))
            .map(|(_, s)| s.iter().product::<usize>())
            .sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialisation cannot fail")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkSpec {
        NetworkSpec {
            name: "tiny".into(),
            input_shape: [1, 8, 8],
            trunk: vec![
                LayerSpec::conv("c1", 2, 3, 1),
                LayerSpec::max_pool("p1", 2, 2),
                LayerSpec::flatten("flat"),
            ],
            heads: vec![HeadSpec {
                name: "clsf".into(),
                source: HeadSource::Trunk,
                loss: HeadLoss::Cce,
                layers: vec![LayerSpec::softmax_dense("out", 5)],
            }],
        }
    }

    #[test]
    fn narrowing_keeps_outputs() {
        let n = tiny().narrowed(4);
        let s = n.shapes().unwrap();
        assert_eq!(s[0].output, vec![1, 8, 8]);
        assert_eq!(s.last().unwrap().output, vec![5]);
        assert_ne!(n.digest(), tiny().digest());
    }

    #[test]
    fn shapes_chain() {
        let s = tiny().shapes().unwrap();
        assert_eq!(s[0].output, vec![2, 8, 8]);
        assert_eq!(s[1].output, vec![2, 4, 4]);
        assert_eq!(s[2].output, vec![32]);
        assert_eq!(s[3].output, vec![5]);
        assert_eq!(tiny().param_count().unwrap(), 2 * 9 + 2 + 32 * 5 + 5);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut spec = tiny();
        spec.trunk[1].name = "c1".into();
        assert!(matches!(spec.validate(), Err(NnError::DuplicateName(n)) if n == "c1"));
    }

    #[test]
    fn dense_on_spatial_input_names_layer() {
        let mut spec = tiny();
        spec.trunk.pop();
        match spec.validate() {
            Err(NnError::InvalidSpec { layer, .. }) => assert_eq!(layer, "out"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dropout_rate_bounds() {
        let mut spec = tiny();
        spec.trunk.insert(1, LayerSpec::dropout("d", 1.0));
        assert!(spec.validate().is_err());
        spec.trunk[1] = LayerSpec::dropout("d", 0.0);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn digest_tracks_content() {
        let a = tiny();
        let mut b = tiny();
        assert_eq!(a.digest(), b.digest());
        b.trunk[0] = LayerSpec::conv("c1", 3, 3, 1);
        assert_ne!(a.digest(), b.digest());
        let back: NetworkSpec = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}
