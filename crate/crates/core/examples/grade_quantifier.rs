//! Train a reduced-width grading CNN on synthetic knee crops under one of
//! the four objectives and report held-out metrics.
//!
//! ```text
//! cargo run --release --example grade_quantifier -- ordinal 8
//! ```

use kneeoa::data::{synth_generate, SyntheticConfig};
use kneeoa::metrics::{classification_report, roc_auc_ovr};
use kneeoa::nn::desk_cnn;
use kneeoa::quantify::{evaluate_quantifier, knee_samples, train_quantifier, Mode, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mode: Mode = args.next().map(|s| s.parse()).transpose()?.unwrap_or(Mode::Joint);
    let epochs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(8);

    let train = synth_generate(&SyntheticConfig { count: 120, seed: 11, ..Default::default() })?;
    let test = synth_generate(&SyntheticConfig { count: 40, seed: 12, ..Default::default() })?;
    let train_knees = knee_samples(&train.images, &train.records)?.samples;
    let test_knees = knee_samples(&test.images, &test.records)?.samples;

    let cfg = TrainConfig { mode, epochs, ..Default::default() };
    let (net, history) = train_quantifier(&train_knees, &desk_cnn(mode), &cfg)?;
    println!(
        "{mode}: {} training knees ({} with mirrored copies), {} validation knees",
        history.train_knees, history.train_samples, history.val_knees
    );
    for e in &history.epochs {
        println!("epoch {:>2}  train {:.4}  val {:.4}", e.epoch, e.train_loss, e.val_loss.unwrap_or(f64::NAN));
    }

    let crops: Vec<_> = test_knees.iter().map(|k| &k.crop).collect();
    let grades: Vec<u8> = test_knees.iter().map(|k| k.grade).collect();
    let eval = evaluate_quantifier(&net, &crops, &grades, cfg.w_reg)?;
    let preds: Vec<usize> = eval.predictions.iter().map(|p| p.grade_discrete as usize).collect();
    let labels: Vec<usize> = grades.iter().map(|&g| g as usize).collect();
    println!("\n{}", classification_report(&preds, &labels)?.to_table());
    let probs: Vec<Vec<f64>> = eval.predictions.iter().map(|p| p.probs.to_vec()).collect();
    println!("macro AUC {:?}", roc_auc_ovr(&probs, &labels)?.macro_auc);
    println!("MSE {:.3}, rounded continuous MSE {:?}", eval.mse, eval.mse_rounded);
    Ok(())
}
