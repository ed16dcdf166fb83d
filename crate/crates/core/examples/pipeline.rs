//! Fully automatic grading: localise both knees with an FCN, crop and
//! mirror them, and grade each crop with a CNN. Both networks are trained
//! briefly here, saved as checkpoints and loaded back into a `Pipeline`.

use kneeoa::data::{synth_generate, MaskMode, SyntheticConfig};
use kneeoa::locate::{fcn_samples, train_fcn, FcnTrainConfig};
use kneeoa::nn::{desk_cnn, preset, save_checkpoint, OptimizerConfig};
use kneeoa::quantify::{knee_samples, train_quantifier, Mode, Pipeline, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("kneeoa-pipeline");
    std::fs::create_dir_all(&dir)?;
    let train = synth_generate(&SyntheticConfig { count: 100, seed: 3, ..Default::default() })?;

    let samples = fcn_samples(&train.images, &train.records, MaskMode::Roi, (256, 256))?;
    let fcn_cfg = FcnTrainConfig { epochs: 6, batch_size: 8, optimizer: OptimizerConfig::adam(), seed: 1 };
    let (fcn, _) = train_fcn(&preset("desk-fcn")?, &samples, None, &fcn_cfg)?;
    save_checkpoint(&fcn, None, 6, dir.join("fcn.oakn"))?;

    let knees = knee_samples(&train.images, &train.records)?.samples;
    let cfg = TrainConfig { mode: Mode::Joint, epochs: 8, ..Default::default() };
    let (cnn, _) = train_quantifier(&knees, &desk_cnn(Mode::Joint), &cfg)?;
    save_checkpoint(&cnn, None, 8, dir.join("cnn.oakn"))?;

    let pipeline = Pipeline::load(dir.join("fcn.oakn"), dir.join("cnn.oakn"))?;
    let test = synth_generate(&SyntheticConfig { count: 6, seed: 4, ..Default::default() })?;
    for (img, rec) in test.images.iter().zip(&test.records) {
        for knee in pipeline.run_named(&rec.image, img)? {
            let side = knee.detection.side;
            println!(
                "{} {:<5} box {:<16} grade {} (continuous {:.2}, true {})",
                rec.image,
                side,
                knee.detection.bbox.to_string(),
                knee.prediction.grade_discrete,
                knee.prediction.grade_continuous.unwrap_or(f64::NAN),
                rec.knee(side).grade.map_or("-".into(), |g| g.to_string()),
            );
        }
    }
    Ok(())
}
