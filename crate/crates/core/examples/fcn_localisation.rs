//! Train the reduced-width localisation FCN on synthetic radiographs and
//! read knee boxes off its heatmap, both directly (ROI mode) and as fixed
//! regions about the blob centres (centre mode).
//!
//! ```text
//! cargo run --release --example fcn_localisation -- 120 6
//! ```

use std::collections::BTreeMap;

use kneeoa::data::{synth_generate, MaskMode, SyntheticConfig};
use kneeoa::geom::Side;
use kneeoa::locate::{fcn_localize_centers, fcn_localize_roi, fcn_samples, train_fcn, CenterRegion, FcnTrainConfig};
use kneeoa::metrics::detection_report;
use kneeoa::nn::{preset, OptimizerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let count = args.next().transpose()?.unwrap_or(120);
    let epochs = args.next().transpose()?.unwrap_or(6);

    let train = synth_generate(&SyntheticConfig { count, seed: 21, ..Default::default() })?;
    let test = synth_generate(&SyntheticConfig { count: 20, seed: 22, ..Default::default() })?;
    let spec = preset("desk-fcn")?;
    let samples = fcn_samples(&train.images, &train.records, MaskMode::Roi, (256, 256))?;
    let cfg = FcnTrainConfig {
        epochs,
        batch_size: 8,
        optimizer: OptimizerConfig::adam(),
        seed: 1,
    };
    let (net, history) = train_fcn(&spec, &samples, None, &cfg)?;
    for e in &history {
        println!("epoch {:>2}  pixel BCE {:.4}", e.epoch, e.train_loss);
    }

    let mut gts = BTreeMap::new();
    let mut roi = BTreeMap::new();
    let mut centred = BTreeMap::new();
    // Fixed regions sized to the synthetic ROI on a canvas ten times the input.
    let region = CenterRegion { canvas: (2560, 2560), region: (800, 500) };
    for (img, rec) in test.images.iter().zip(&test.records) {
        for side in Side::BOTH {
            gts.insert((rec.image.clone(), side), rec.knee(side).roi.expect("synthetic knees carry a roi"));
        }
        if let Ok(d) = fcn_localize_roi(img, &net) {
            roi.extend(d.iter().map(|det| ((rec.image.clone(), det.side), det.bbox)));
        }
        if let Ok(d) = fcn_localize_centers(img, &net, &region) {
            centred.extend(d.iter().map(|det| ((rec.image.clone(), det.side), det.bbox)));
        }
    }
    println!("\n{}", detection_report(&roi, &gts)?.to_table("fcn-roi"));
    println!("{}", detection_report(&centred, &gts)?.to_table("fcn-center"));
    Ok(())
}
