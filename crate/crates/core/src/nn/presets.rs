//! Named architectures.
//!
//! FCN presets take a 1x256x256 radiograph and emit a 1x256x256 sigmoid map.
//! CNN presets take a 1x200x300 knee crop. Convolutions use Same padding,
//! pooling is Valid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spec::{HeadLoss, HeadSource, HeadSpec, LayerSpec, NetworkSpec};
use super::{NnError, Result};

pub const FCN_INPUT: [usize; 3] = [1, 256, 256];
pub const CNN_INPUT: [usize; 3] = [1, 200, 300];
pub const GRADES: usize = 5;
const L2: f64 = 0.01;

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "fcn-initial",
    "fcn-conv4",
    "fcn-pool2",
    "fcn-pool3",
    "fcn-center-best",
    "fcn-roi",
    "cnn-clsf-best",
    "cnn-reg-best",
    "cnn-joint-best",
    "cnn-ordinal",
    "desk-fcn",
    "desk-cnn",
    "desk-cnn-clsf",
    "desk-cnn-reg",
    "desk-cnn-ordinal",
];

/// Which heads a quantifier exposes, and so which objective trains it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadLayout {
    /// Softmax head `clsf` only.
    Clsf,
    /// Linear head `reg` only.
    Reg,
    /// Independent `clsf` and `reg` heads on a shared trunk.
    Joint,
    /// `reg` computed from the `clsf` probabilities by a fixed-weight layer.
    Ordinal,
}

impl HeadLayout {
    pub const ALL: [HeadLayout; 4] = [HeadLayout::Clsf, HeadLayout::Reg, HeadLayout::Joint, HeadLayout::Ordinal];

    pub fn as_str(&self) -> &'static str {
        match self {
            HeadLayout::Clsf => "clsf",
            HeadLayout::Reg => "reg",
            HeadLayout::Joint => "joint",
            HeadLayout::Ordinal => "ordinal",
        }
    }

    /// Full-size preset for this layout.
    pub fn full_preset(&self) -> &'static str {
        match self {
            HeadLayout::Clsf => "cnn-clsf-best",
            HeadLayout::Reg => "cnn-reg-best",
            HeadLayout::Joint => "cnn-joint-best",
            HeadLayout::Ordinal => "cnn-ordinal",
        }
    }

    /// Reduced-width preset for this layout.
    pub fn desk_preset(&self) -> &'static str {
        match self {
            HeadLayout::Clsf => "desk-cnn-clsf",
            HeadLayout::Reg => "desk-cnn-reg",
            HeadLayout::Joint => "desk-cnn",
            HeadLayout::Ordinal => "desk-cnn-ordinal",
        }
    }

    /// Layout implied by a spec's heads, if it is a quantifier.
    pub fn of(spec: &NetworkSpec) -> Option<HeadLayout> {
        match (spec.head("clsf"), spec.head("reg")) {
            (Some(c), None) if c.loss == HeadLoss::Cce => Some(HeadLayout::Clsf),
            (None, Some(r)) if r.loss == HeadLoss::Mse && r.source == HeadSource::Trunk => Some(HeadLayout::Reg),
            (Some(c), Some(r)) if c.loss == HeadLoss::Cce && r.loss == HeadLoss::Mse => match &r.source {
                HeadSource::Trunk => Some(HeadLayout::Joint),
                HeadSource::Head(h) if h == "clsf" => Some(HeadLayout::Ordinal),
                HeadSource::Head(_) => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for HeadLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadLayout {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected clsf, reg, joint or ordinal)"))
    }
}

pub fn preset(name: &str) -> Result<NetworkSpec> {
    let spec = match name {
        "fcn-initial" => fcn_initial(),
        "fcn-conv4" => fcn_conv4(),
        "fcn-pool2" => fcn_pool2(),
        "fcn-pool3" => fcn_pool3(),
        "fcn-center-best" | "fcn-roi" => fcn_best(name, [32, 32, 32, 64, 64, 96, 96]),
        "desk-fcn" => fcn_best(name, [8, 8, 8, 16, 16, 24, 24]),
        "cnn-clsf-best" => cnn_clsf_best(),
        "cnn-reg-best" => cnn_reg_best(),
        "cnn-joint-best" => joint_family(name, [32, 64, 64, 96, 96, 128, 128], 512, HeadLayout::Joint),
        "cnn-ordinal" => joint_family(name, [32, 64, 64, 96, 96, 128, 128], 512, HeadLayout::Ordinal),
        "desk-cnn" => desk_cnn(HeadLayout::Joint),
        "desk-cnn-clsf" => desk_cnn(HeadLayout::Clsf),
        "desk-cnn-reg" => desk_cnn(HeadLayout::Reg),
        "desk-cnn-ordinal" => desk_cnn(HeadLayout::Ordinal),
        other => return Err(NnError::UnknownPreset(other.to_string())),
    };
    debug_assert!(spec.validate().is_ok(), "preset {name} is inconsistent");
    Ok(spec)
}

/// Reduced-width quantifier with the heads a training mode needs.
pub fn desk_cnn(layout: HeadLayout) -> NetworkSpec {
    let mut spec = joint_family("desk-cnn", [8, 16, 16, 24, 24, 32, 32], 128, layout);
    if layout != HeadLayout::Joint {
        spec.name = layout.desk_preset().to_string();
    }
    spec
}

fn conv_relu(layers: &mut Vec<LayerSpec>, name: &str, kernels: usize, k: usize) {
    layers.push(LayerSpec::conv(name, kernels, k, 1));
    layers.push(LayerSpec::relu(&format!("{name}_relu")));
}

fn mask_head(name: &str) -> HeadSpec {
    HeadSpec {
        name: "mask".into(),
        source: HeadSource::Trunk,
        loss: HeadLoss::Bce,
        layers: vec![
            LayerSpec::conv(name, 1, 1, 1),
            LayerSpec::sigmoid(&format!("{name}_sigmoid")),
        ],
    }
}

fn fcn(name: &str, trunk: Vec<LayerSpec>, head: &str) -> NetworkSpec {
    NetworkSpec {
        name: name.into(),
        input_shape: FCN_INPUT,
        trunk,
        heads: vec![mask_head(head)],
    }
}

fn fcn_initial() -> NetworkSpec {
    let mut t = Vec::new();
    for (i, k) in [32, 32, 64, 64].into_iter().enumerate() {
        conv_relu(&mut t, &format!("conv{}", i + 1), k, 3);
    }
    fcn("fcn-initial", t, "conv5")
}

fn fcn_conv4() -> NetworkSpec {
    let mut t = Vec::new();
    conv_relu(&mut t, "conv1", 32, 7);
    conv_relu(&mut t, "conv2", 64, 3);
    conv_relu(&mut t, "conv3", 96, 3);
    fcn("fcn-conv4", t, "conv4")
}

fn fcn_pool2() -> NetworkSpec {
    let mut t = Vec::new();
    conv_relu(&mut t, "conv1", 32, 7);
    t.push(LayerSpec::max_pool("maxPool2", 2, 2));
    conv_relu(&mut t, "conv3", 64, 3);
    t.push(LayerSpec::max_pool("maxPool4", 2, 2));
    conv_relu(&mut t, "conv5", 96, 3);
    t.push(LayerSpec::upsample("upSamp6", 4));
    fcn("fcn-pool2", t, "conv7")
}

fn fcn_pool3() -> NetworkSpec {
    let mut t = Vec::new();
    conv_relu(&mut t, "conv1", 32, 7);
    t.push(LayerSpec::max_pool("maxPool2", 2, 2));
    conv_relu(&mut t, "conv3", 32, 3);
    t.push(LayerSpec::max_pool("maxPool4", 2, 2));
    conv_relu(&mut t, "conv5", 64, 3);
    t.push(LayerSpec::max_pool("maxPool6", 2, 2));
    conv_relu(&mut t, "conv7", 96, 3);
    t.push(LayerSpec::upsample("upSamp8", 8));
    fcn("fcn-pool3", t, "conv9")
}

/// Four conv stages with 2x2 pooling after the first three, then 8x
/// upsampling. `w` lists kernel counts for conv1, conv2_1 .. conv4_2.
fn fcn_best(name: &str, w: [usize; 7]) -> NetworkSpec {
    let mut t = Vec::new();
    conv_relu(&mut t, "conv1", w[0], 3);
    t.push(LayerSpec::max_pool("maxPool1", 2, 2));
    conv_relu(&mut t, "conv2_1", w[1], 3);
    conv_relu(&mut t, "conv2_2", w[2], 3);
    t.push(LayerSpec::max_pool("maxPool2", 2, 2));
    conv_relu(&mut t, "conv3_1", w[3], 3);
    conv_relu(&mut t, "conv3_2", w[4], 3);
    t.push(LayerSpec::max_pool("maxPool3", 2, 2));
    conv_relu(&mut t, "conv4_1", w[5], 3);
    conv_relu(&mut t, "conv4_2", w[6], 3);
    t.push(LayerSpec::upsample("upSamp5", 8));
    fcn(name, t, "conv5")
}

/// Conv, batch norm, ReLU.
fn conv_block(layers: &mut Vec<LayerSpec>, name: &str, kernels: usize, k: usize, stride: usize, l2: f64) {
    layers.push(LayerSpec::conv(name, kernels, k, stride).with_l2(l2));
    layers.push(LayerSpec::batch_norm(&format!("{name}_bn")));
    layers.push(LayerSpec::relu(&format!("{name}_relu")));
}

fn pool(layers: &mut Vec<LayerSpec>, name: &str) {
    layers.push(LayerSpec::max_pool(name, 3, 2));
}

fn clsf_head(source: HeadSource, name: &str, l2: f64) -> HeadSpec {
    HeadSpec {
        name: "clsf".into(),
        source,
        loss: HeadLoss::Cce,
        layers: vec![LayerSpec::softmax_dense(name, GRADES).with_l2(l2)],
    }
}

fn reg_head(name: &str) -> HeadSpec {
    HeadSpec {
        name: "reg".into(),
        source: HeadSource::Trunk,
        loss: HeadLoss::Mse,
        layers: vec![LayerSpec::dense(name, 1)],
    }
}

fn cnn_clsf_best() -> NetworkSpec {
    let mut t = Vec::new();
    conv_block(&mut t, "conv1", 32, 11, 2, 0.0);
    pool(&mut t, "maxPool1");
    conv_block(&mut t, "conv2", 64, 5, 1, 0.0);
    pool(&mut t, "maxPool2");
    conv_block(&mut t, "conv3", 96, 3, 1, L2);
    pool(&mut t, "maxPool3");
    conv_block(&mut t, "conv4", 128, 3, 1, L2);
    t.push(LayerSpec::dropout("conv4_dropout", 0.25));
    pool(&mut t, "maxPool4");
    t.push(LayerSpec::flatten("flatten"));
    t.push(LayerSpec::dense("fc5", 1024).with_l2(L2));
    t.push(LayerSpec::relu("fc5_relu"));
    t.push(LayerSpec::dropout("fc5_dropout", 0.5));
    NetworkSpec {
        name: "cnn-clsf-best".into(),
        input_shape: CNN_INPUT,
        trunk: t,
        heads: vec![clsf_head(HeadSource::Trunk, "fc6", 0.0)],
    }
}

fn cnn_reg_best() -> NetworkSpec {
    let mut t = Vec::new();
    conv_block(&mut t, "conv1", 32, 11, 2, 0.0);
    pool(&mut t, "maxPool1");
    conv_block(&mut t, "conv2", 64, 5, 1, 0.0);
    pool(&mut t, "maxPool2");
    conv_block(&mut t, "conv3-1", 64, 3, 1, 0.0);
    conv_block(&mut t, "conv3-2", 64, 3, 1, 0.0);
    pool(&mut t, "maxPool3");
    conv_block(&mut t, "conv4-1", 128, 3, 1, 0.0);
    conv_block(&mut t, "conv4-2", 128, 3, 1, 0.0);
    pool(&mut t, "maxPool4");
    t.push(LayerSpec::flatten("flatten"));
    t.push(LayerSpec::dense("fc5", 1024));
    t.push(LayerSpec::relu("fc5_relu"));
    t.push(LayerSpec::dropout("fc5_dropout", 0.5));
    NetworkSpec {
        name: "cnn-reg-best".into(),
        input_shape: CNN_INPUT,
        trunk: t,
        heads: vec![reg_head("fc6")],
    }
}

/// Seven conv layers in four stages, one hidden dense layer. The first two
/// convolutions are unregularised; the rest and fc5 carry an L2 penalty.
fn joint_family(name: &str, w: [usize; 7], fc: usize, layout: HeadLayout) -> NetworkSpec {
    let mut t = Vec::new();
    conv_block(&mut t, "conv1", w[0], 11, 2, 0.0);
    pool(&mut t, "maxPool1");
    conv_block(&mut t, "conv2-1", w[1], 3, 1, 0.0);
    conv_block(&mut t, "conv2-2", w[2], 3, 1, L2);
    pool(&mut t, "maxPool2");
    conv_block(&mut t, "conv3-1", w[3], 3, 1, L2);
    conv_block(&mut t, "conv3-2", w[4], 3, 1, L2);
    pool(&mut t, "maxPool3");
    conv_block(&mut t, "conv4-1", w[5], 3, 1, L2);
    conv_block(&mut t, "conv4-2", w[6], 3, 1, L2);
    pool(&mut t, "maxPool4");
    t.push(LayerSpec::flatten("flatten"));
    t.push(LayerSpec::dense("fc5", fc).with_l2(L2));
    t.push(LayerSpec::relu("fc5_relu"));
    t.push(LayerSpec::dropout("fc5_dropout", 0.3));
    let heads = match layout {
        HeadLayout::Clsf => vec![clsf_head(HeadSource::Trunk, "fc6-Clsf", 0.0)],
        HeadLayout::Reg => vec![reg_head("fc6-Reg")],
        HeadLayout::Joint => vec![clsf_head(HeadSource::Trunk, "fc6-Clsf", 0.0), reg_head("fc6-Reg")],
        HeadLayout::Ordinal => vec![
            clsf_head(HeadSource::Trunk, "fc6-Clsf", 0.0),
            HeadSpec {
                name: "reg".into(),
                source: HeadSource::Head("clsf".into()),
                loss: HeadLoss::Mse,
                layers: vec![LayerSpec::ordinal("fc7-Reg", GRADES)],
            },
        ],
    };
    NetworkSpec {
        name: name.into(),
        input_shape: CNN_INPUT,
        trunk: t,
        heads,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            spec.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        for layout in [HeadLayout::Clsf, HeadLayout::Reg, HeadLayout::Joint, HeadLayout::Ordinal] {
            desk_cnn(layout).validate().unwrap();
        }
    }

    #[test]
    fn fcn_restores_input_resolution() {
        for name in ["fcn-initial", "fcn-conv4", "fcn-pool2", "fcn-pool3", "fcn-center-best", "desk-fcn"] {
            let shapes = preset(name).unwrap().shapes().unwrap();
            assert_eq!(shapes.last().unwrap().output, vec![1, 256, 256], "{name}");
        }
    }

    #[test]
    fn layout_is_recovered_from_spec() {
        for layout in HeadLayout::ALL {
            assert_eq!(HeadLayout::of(&desk_cnn(layout)), Some(layout));
            assert_eq!(HeadLayout::of(&preset(layout.full_preset()).unwrap()), Some(layout));
            assert_eq!(preset(layout.desk_preset()).unwrap(), desk_cnn(layout));
            assert_eq!(layout.as_str().parse::<HeadLayout>(), Ok(layout));
        }
        assert_eq!(HeadLayout::of(&preset("desk-fcn").unwrap()), None);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("resnet"), Err(NnError::UnknownPreset(_))));
    }

    #[test]
    fn head_layouts() {
        assert!(desk_cnn(HeadLayout::Clsf).has_head("clsf"));
        assert!(!desk_cnn(HeadLayout::Clsf).has_head("reg"));
        let ord = desk_cnn(HeadLayout::Ordinal);
        assert_eq!(ord.head("reg").unwrap().source, HeadSource::Head("clsf".into()));
    }
}
