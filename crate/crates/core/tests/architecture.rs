mod common;

use common::*;
use kneeoa::nn::{build_network, default_rf_layer, preset, receptive_field, HeadLayout, PRESET_NAMES};

#[test]
fn preset_shapes_follow_published_tables() {
    for name in SHAPE_PRESETS {
        let (rows, divergent) = check_shapes(name).unwrap();
        assert!(rows >= 10, "{name}: only {rows} rows");
        if name == "cnn-reg-best" {
            assert_eq!(divergent, 4);
        } else {
            assert_eq!(divergent, 0, "{name}");
        }
    }
}

#[test]
fn classifier_parameter_count_is_near_published() {
    let n = preset("cnn-clsf-best").unwrap().param_count().unwrap();
    let rel = (n as f64 - 5.4e6).abs() / 5.4e6;
    assert!(rel <= 0.02, "{n} is {:.1}% off", rel * 100.0);
}

#[test]
fn joint_parameter_count_is_reported() {
    // The stated layers give 3.08M against a quoted ~2.9M; the acceptance
    // target records that gap. Here only the exact arithmetic is pinned.
    let spec = preset("cnn-joint-best").unwrap();
    let convs: usize = [(1, 32, 11), (32, 64, 3), (64, 64, 3), (64, 96, 3), (96, 96, 3), (96, 128, 3), (128, 128, 3)]
        .iter()
        .map(|&(c, k, s)| c * k * s * s + k + 2 * k)
        .sum();
    let dense = 5120 * 512 + 512 + 512 * 5 + 5 + 512 + 1;
    assert_eq!(spec.param_count().unwrap(), convs + dense);
}

#[test]
fn network_parameter_count_matches_spec() {
    for name in ["desk-fcn", "desk-cnn", "desk-cnn-ordinal"] {
        let spec = preset(name).unwrap();
        let net = build_network::<f32>(&spec, 0).unwrap();
        assert_eq!(net.param_count(), spec.param_count().unwrap(), "{name}");
    }
}

#[test]
fn stated_apertures() {
    for (p, layer, want) in APERTURES {
        assert_eq!(receptive_field(&preset(p).unwrap(), layer).unwrap(), want, "{p}/{layer}");
    }
    assert_eq!(default_rf_layer(&preset("fcn-center-best").unwrap()), Some("conv4_2"));
}

#[test]
fn every_preset_builds_and_chains() {
    for name in PRESET_NAMES {
        let spec = preset(name).unwrap();
        let shapes = spec.shapes().unwrap();
        let mut seen = vec![spec.input_shape.to_vec()];
        for s in &shapes {
            assert!(seen.contains(&s.input), "{name}: {} fed {:?}", s.name, s.input);
            seen.push(s.output.clone());
        }
    }
}

#[test]
fn desk_presets_keep_head_layouts() {
    for layout in HeadLayout::ALL {
        let spec = kneeoa::nn::desk_cnn(layout);
        assert_eq!(HeadLayout::of(&spec), Some(layout));
    }
}
