//! Print the layer shapes, parameter counts and receptive fields of the
//! bundled architecture presets.
//!
//! ```text
//! cargo run --example architectures -- cnn-joint-best
//! ```

use kneeoa::nn::{default_rf_layer, preset, receptive_field, PRESET_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(name) = std::env::args().nth(1) {
        let spec = preset(&name)?;
        println!("{name}: input {:?}", spec.input_shape);
        for s in spec.shapes()? {
            println!("  {:<16} {:?}", s.name, s.output);
        }
        return Ok(());
    }
    println!("{:<18} {:>10}  receptive field", "preset", "params");
    for name in PRESET_NAMES {
        let spec = preset(name)?;
        let rf = match default_rf_layer(&spec) {
            Some(layer) if name.starts_with("fcn") || *name == "desk-fcn" => {
                format!("{} at {layer}", receptive_field(&spec, layer)?)
            }
            _ => "-".into(),
        };
        println!("{name:<18} {:>10}  {rf}", spec.param_count()?);
    }
    Ok(())
}
