//! Template-matching localisation: take knee templates from annotated
//! training images, then slide them over the halves of unseen images.

use kneeoa::data::{synth_generate, SyntheticConfig};
use kneeoa::geom::Side;
use kneeoa::imageproc::GrayImage;
use kneeoa::locate::{extract_templates, locate_templates, preprocess_downscale, TemplateConfig};
use kneeoa::metrics::jaccard;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = synth_generate(&SyntheticConfig { count: 10, seed: 1, ..Default::default() })?;
    let test = synth_generate(&SyntheticConfig { count: 5, seed: 2, ..Default::default() })?;
    let downscale = 0.5;

    // Centres are annotated on a 256-pixel canvas; map them to the working raster.
    let work: Vec<GrayImage> = train.images.iter().map(|i| preprocess_downscale(i, downscale)).collect::<Result<_, _>>()?;
    let mut picks = Vec::new();
    for (img, rec) in work.iter().zip(&train.records) {
        for side in Side::BOTH {
            if let Some((x, y)) = rec.knee(side).center {
                let s = img.width() as f64 / 256.0;
                picks.push((img, (x * s, y * s)));
            }
        }
    }
    let templates = extract_templates(&picks, 20)?;
    let cfg = TemplateConfig { stride: 2, region: (80, 50), downscale };

    for (img, rec) in test.images.iter().zip(&test.records) {
        let found = locate_templates(img, &templates, &cfg)?;
        for det in found.iter() {
            let ji = rec.knee(det.side).roi.map(|gt| jaccard(&det.bbox, &gt)).transpose()?;
            println!("{} {:<5} bbox {}  JI {:.3}", rec.image, det.side, det.bbox, ji.unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
