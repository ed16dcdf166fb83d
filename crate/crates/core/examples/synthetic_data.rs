//! Generate a small synthetic radiograph set, write it to disk, and read it
//! back through the manifest loader.
//!
//! ```text
//! cargo run --example synthetic_data -- /tmp/knees 20
//! ```

use kneeoa::data::{load_manifest, synth_generate, SyntheticConfig};
use kneeoa::geom::Side;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| std::env::temp_dir().join("kneeoa-synth").display().to_string());
    let count = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);

    let cfg = SyntheticConfig {
        count,
        noise: 4.0,
        seed: 7,
        ..Default::default()
    };
    println!("gap width per grade: {:?} px", cfg.gap_widths);
    let set = synth_generate(&cfg)?;
    set.write(&out)?;

    let ds = load_manifest(format!("{out}/manifest.tsv"))?;
    print!("{}", ds.summary());
    let first = &ds.records[0];
    for side in Side::BOTH {
        let k = first.knee(side);
        println!(
            "{} {side}: grade {:?}, centre {:?}, roi {}",
            first.image,
            k.grade,
            k.center,
            k.roi.map_or("-".into(), |b| b.to_string())
        );
    }
    println!("wrote {} images under {out}", ds.len());
    Ok(())
}
