use super::spec::{HeadSource, LayerKind, LayerSpec, NetworkSpec};
use super::{NnError, Result};

/// Receptive field in input pixels of a unit in `layer`.
///
/// Folds `r += (k - 1) * j; j *= s` over the path from the input. An
/// upsampling layer counts as a window of `factor` at stride 1.
pub fn receptive_field(spec: &NetworkSpec, layer: &str) -> Result<usize> {
    if !spec.layers().any(|l| l.name == layer) {
        return Err(NnError::UnknownLayer(layer.to_string()));
    }
    let path: Vec<&LayerSpec> = spec
        .trunk
        .iter()
        .chain(
            spec.heads
                .iter()
                .filter(|h| h.source == HeadSource::Trunk && h.layers.iter().any(|l| l.name == layer))
                .flat_map(|h| h.layers.iter()),
        )
        .collect();
    let (mut r, mut j) = (1usize, 1usize);
    for l in path {
        match &l.kind {
            LayerKind::Conv { kernel_size, stride, .. } => {
                r += (kernel_size.0.max(kernel_size.1) - 1) * j;
                j *= stride;
            }
            LayerKind::MaxPool { size, stride } => {
                r += (size.0.max(size.1) - 1) * j;
                j *= stride;
            }
            LayerKind::Upsample { factor } => r += (factor - 1) * j,
            LayerKind::BatchNorm | LayerKind::Relu | LayerKind::Sigmoid | LayerKind::Dropout { .. } => {}
            other => {
                return Err(NnError::ReceptiveField {
                    layer: l.name.clone(),
                    kind: other.tag(),
                })
            }
        }
        if l.name == layer {
            return Ok(r);
        }
    }
    Err(NnError::UnknownLayer(layer.to_string()))
}

/// Last layer before the first upsampling stage, or the last layer when
/// the network does not upsample.
pub fn default_rf_layer(spec: &NetworkSpec) -> Option<&str> {
    let mut last = None;
    for l in spec.trunk.iter().chain(spec.heads.iter().flat_map(|h| h.layers.iter())) {
        match l.kind {
            LayerKind::Upsample { .. } => return last,
            LayerKind::Conv { .. } | LayerKind::MaxPool { .. } => last = Some(l.name.as_str()),
            _ => {}
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::preset;

    #[test]
    fn fcn_apertures() {
        let rf = |p: &str, l: &str| receptive_field(&preset(p).unwrap(), l).unwrap();
        assert_eq!(rf("fcn-initial", "conv5"), 9);
        assert_eq!(rf("fcn-conv4", "conv4"), 11);
        assert_eq!(rf("fcn-pool2", "conv7"), 34);
        assert_eq!(rf("fcn-pool3", "conv7"), 42);
        assert_eq!(rf("fcn-center-best", "conv4_2"), 66);
    }

    #[test]
    fn default_layer_is_before_upsampling() {
        assert_eq!(default_rf_layer(&preset("fcn-center-best").unwrap()), Some("conv4_2"));
        assert_eq!(default_rf_layer(&preset("fcn-initial").unwrap()), Some("conv5"));
    }

    #[test]
    fn errors() {
        let spec = preset("cnn-clsf-best").unwrap();
        assert!(matches!(receptive_field(&spec, "nope"), Err(NnError::UnknownLayer(_))));
        assert!(matches!(receptive_field(&spec, "fc6"), Err(NnError::ReceptiveField { .. })));
        assert!(receptive_field(&spec, "conv1").unwrap() == 11);
    }
}
