//! Linear SVM over horizontal Sobel responses as a sliding-window knee
//! detector. The feature only sees horizontal edges, so on synthetic images
//! it is easily drawn to the soft-tissue outline; compare with the FCN.

use kneeoa::data::{synth_generate, SyntheticConfig};
use kneeoa::geom::Side;
use kneeoa::imageproc::GrayImage;
use kneeoa::locate::{collect_svm_samples, preprocess_downscale, svm_detect, train_svm, SvmConfig, SvmDetectConfig};
use kneeoa::metrics::jaccard;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = synth_generate(&SyntheticConfig { count: 30, seed: 1, ..Default::default() })?;
    let test = synth_generate(&SyntheticConfig { count: 5, seed: 2, ..Default::default() })?;
    let downscale = 0.5;
    let patch = (20, 20);

    let work: Vec<GrayImage> = train.images.iter().map(|i| preprocess_downscale(i, downscale)).collect::<Result<_, _>>()?;
    let samples: Vec<(&GrayImage, Vec<(f64, f64)>)> = work
        .iter()
        .zip(&train.records)
        .map(|(img, rec)| {
            let s = img.width() as f64 / 256.0;
            let c = Side::BOTH.iter().filter_map(|&side| rec.knee(side).center).map(|(x, y)| (x * s, y * s)).collect();
            (img, c)
        })
        .collect();
    let (xs, ys) = collect_svm_samples(&samples, patch, 6, 0)?;
    let fit = train_svm(&xs, &ys, patch, &SvmConfig::default())?;
    let acc = xs.iter().zip(&ys).filter(|(x, &y)| y * fit.model.decision(x) > 0.0).count() as f64 / xs.len() as f64;
    println!("{} windows, training accuracy {:.1}%, final objective {:.2}", xs.len(), 100.0 * acc, fit.objective.last().unwrap());

    let cfg = SvmDetectConfig { stride: 2, region: (80, 50) };
    for (img, rec) in test.images.iter().zip(&test.records) {
        let w = preprocess_downscale(img, downscale)?;
        let found = svm_detect(&w, &fit.model, (img.width(), img.height()), &cfg)?;
        for det in found.iter() {
            let ji = rec.knee(det.side).roi.map(|gt| jaccard(&det.bbox, &gt)).transpose()?.unwrap_or(f64::NAN);
            println!("{} {:<5} margin {:+.2}  JI {ji:.3}", rec.image, det.side, det.score);
        }
    }
    Ok(())
}
