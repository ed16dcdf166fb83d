use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::predict::{evaluate_quantifier, knee_tensor, loss_spec};
use super::{Mode, QuantifyError, Result};
use crate::data::ManifestRecord;
use crate::geom::Side;
use crate::imageproc::{hflip, GrayImage};
use crate::locate::{extract_roi, ROI_HEIGHT, ROI_WIDTH};
use crate::nn::{
    build_network, epoch_batches, optimizer_for, train_step, EpochStats, Network, NetworkSpec, OptimizerConfig, Targets,
    GRADES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Weight of the regression loss in joint and ordinal training.
    pub w_reg: f64,
    pub seed: u64,
    /// Share of the knees held out (per grade) for validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Joint,
            epochs: 80,
            batch_size: 32,
            optimizer: OptimizerConfig::adam(),
            w_reg: 0.5,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(QuantifyError::InvalidConfig(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad(format!(
                "epochs ({}) and batch size ({}) must be positive",
                self.epochs, self.batch_size
            ));
        }
        if !(0.0..=1.0).contains(&self.w_reg) {
            return bad(format!("regression weight {} outside [0, 1]", self.w_reg));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return bad(format!("validation fraction {} outside (0, 0.5)", self.validation_fraction));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}

/// One graded knee crop in canonical (right-knee) orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct KneeSample {
    pub image: String,
    pub side: Side,
    pub crop: GrayImage,
    pub grade: u8,
}

/// Labelled knees plus the knees that could not be used.
#[derive(Debug, Clone, Default)]
pub struct KneeSet {
    pub samples: Vec<KneeSample>,
    /// `(image, side, reason)`.
    pub skipped: Vec<(String, Side, String)>,
}

/// Crop each annotated knee at its ROI and resize it to the quantifier
/// input. Left knees are mirrored.
pub fn knee_samples(images: &[GrayImage], records: &[ManifestRecord]) -> Result<KneeSet> {
    if images.len() != records.len() {
        return Err(QuantifyError::InvalidConfig(format!(
            "{} images for {} records",
            images.len(),
            records.len()
        )));
    }
    let mut set = KneeSet::default();
    for (img, rec) in images.iter().zip(records) {
        for side in Side::BOTH {
            let k = rec.knee(side);
            let (Some(grade), Some(roi)) = (k.grade, k.roi) else {
                let why = if k.grade.is_none() { "no grade" } else { "no roi" };
                log::warn!("skipping {side} knee of `{}`: {why}", rec.image);
                set.skipped.push((rec.image.clone(), side, why.to_string()));
                continue;
            };
            let crop = extract_roi(img, roi, ROI_WIDTH, ROI_HEIGHT)?;
            set.samples.push(KneeSample {
                image: rec.image.clone(),
                side,
                crop: canonical(crop, side),
                grade,
            });
        }
    }
    Ok(set)
}

pub fn canonical(crop: GrayImage, side: Side) -> GrayImage {
    match side {
        Side::Right => crop,
        Side::Left => hflip(&crop),
    }
}

/// Per-epoch statistics plus the sample counts behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Knees in the training split before augmentation.
    pub train_knees: usize,
    /// Samples seen per training epoch (knees plus mirrored copies).
    pub train_samples: usize,
    /// Knees scored each epoch for validation, never augmented.
    pub val_knees: usize,
}

/// Stratified hold-out: about `fraction` of each grade, at least one
/// knee overall when there are two or more.
fn validation_split(grades: &[u8], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for g in 0..GRADES as u8 {
        let mut idx: Vec<usize> = (0..grades.len()).filter(|&i| grades[i] == g).collect();
        if idx.is_empty() {
            log::warn!("grade {g} has no knees; the split is not fully stratified");
            continue;
        }
        idx.shuffle(&mut rng);
        let k = (fraction * idx.len() as f64).round() as usize;
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    if val.is_empty() && train.len() >= 2 {
        val.push(train.pop().expect("non-empty"));
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn check_layout(spec: &NetworkSpec, mode: Mode) -> Result<()> {
    if Mode::of(spec) != Some(mode) {
        return Err(QuantifyError::ModeMismatch {
            preset: spec.name.clone(),
            mode,
        });
    }
    Ok(())
}

/// Train a fresh network from `spec` on `knees`. A validation share is
/// held out per grade; the rest is doubled by mirroring. Returns the
/// final-epoch model and its history.
pub fn train_quantifier(
    knees: &[KneeSample],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<(Network<f32>, TrainHistory)> {
    cfg.validate()?;
    check_layout(spec, cfg.mode)?;
    if knees.is_empty() {
        return Err(QuantifyError::EmptyTraining);
    }
    if let Some(k) = knees.iter().find(|k| k.grade as usize >= GRADES) {
        return Err(QuantifyError::InvalidConfig(format!("grade {} of `{}` is out of range", k.grade, k.image)));
    }
    let grades: Vec<u8> = knees.iter().map(|k| k.grade).collect();
    let (train_idx, val_idx) = validation_split(&grades, cfg.validation_fraction, cfg.seed);

    let mut inputs: Vec<GrayImage> = train_idx.iter().map(|&i| knees[i].crop.clone()).collect();
    inputs.extend(train_idx.iter().map(|&i| hflip(&knees[i].crop)));
    let labels: Vec<u8> = train_idx.iter().chain(&train_idx).map(|&i| grades[i]).collect();
    let val_inputs: Vec<&GrayImage> = val_idx.iter().map(|&i| &knees[i].crop).collect();
    let val_grades: Vec<u8> = val_idx.iter().map(|&i| grades[i]).collect();

    let loss = loss_spec(cfg.mode, cfg.w_reg);
    let mut net = build_network::<f32>(spec, cfg.seed)?;
    let mut opt = optimizer_for(&net, cfg.optimizer)?;
    let mut history = TrainHistory {
        epochs: Vec::with_capacity(cfg.epochs),
        train_knees: train_idx.len(),
        train_samples: inputs.len(),
        val_knees: val_idx.len(),
    };
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        for batch in epoch_batches(inputs.len(), cfg.batch_size, cfg.seed, epoch) {
            let imgs: Vec<&GrayImage> = batch.iter().map(|&i| &inputs[i]).collect();
            let x = knee_tensor(&net, &imgs)?;
            let y: Vec<usize> = batch.iter().map(|&i| labels[i] as usize).collect();
            let g: Vec<f64> = batch.iter().map(|&i| labels[i] as f64).collect();
            let t = Targets {
                masks: None,
                labels: Some(&y),
                grades: Some(&g),
            };
            sum += train_step(&mut net, &x, &t, &loss, &mut opt)?.total * batch.len() as f64;
        }
        let stats = if val_inputs.is_empty() {
            EpochStats {
                epoch: epoch + 1,
                train_loss: sum / inputs.len() as f64,
                val_loss: None,
                val_accuracy: None,
                val_mse: None,
            }
        } else {
            let ev = evaluate_quantifier(&net, &val_inputs, &val_grades, cfg.w_reg)?;
            EpochStats {
                epoch: epoch + 1,
                train_loss: sum / inputs.len() as f64,
                val_loss: Some(ev.loss),
                val_accuracy: Some(ev.accuracy),
                val_mse: Some(ev.mse),
            }
        };
        log::info!(
            "{} epoch {}/{}: train {:.4} val loss {:?} acc {:?} mse {:?}",
            cfg.mode,
            stats.epoch,
            cfg.epochs,
            stats.train_loss,
            stats.val_loss,
            stats.val_accuracy,
            stats.val_mse
        );
        history.epochs.push(stats);
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{desk_cnn, HeadLoss, HeadSource, HeadSpec, LayerSpec};

    #[test]
    fn split_is_stratified_and_disjoint() {
        let grades: Vec<u8> = (0..100).map(|i| (i % 5) as u8).collect();
        let (t, v) = validation_split(&grades, 0.1, 9);
        assert_eq!((t.len(), v.len()), (90, 10));
        for g in 0..5u8 {
            assert_eq!(v.iter().filter(|&&i| grades[i] == g).count(), 2);
        }
        assert!(t.iter().all(|i| !v.contains(i)));
        assert_eq!(validation_split(&grades, 0.1, 9), (t, v));
    }

    #[test]
    fn mode_must_match_heads() {
        let knee = KneeSample {
            image: "a".into(),
            side: Side::Right,
            crop: GrayImage::filled(ROI_WIDTH, ROI_HEIGHT, 3),
            grade: 1,
        };
        let cfg = TrainConfig {
            mode: Mode::Reg,
            ..Default::default()
        };
        assert!(matches!(
            train_quantifier(&[knee], &desk_cnn(Mode::Joint), &cfg),
            Err(QuantifyError::ModeMismatch { .. })
        ));
        let bad = TrainConfig {
            validation_fraction: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn tiny(layout_reg: bool) -> NetworkSpec {
        let mut heads = vec![HeadSpec {
            name: "clsf".into(),
            source: HeadSource::Trunk,
            loss: HeadLoss::Cce,
            layers: vec![LayerSpec::softmax_dense("fc-c", GRADES)],
        }];
        if layout_reg {
            heads.push(HeadSpec {
                name: "reg".into(),
                source: HeadSource::Trunk,
                loss: HeadLoss::Mse,
                layers: vec![LayerSpec::dense("fc-r", 1)],
            });
        }
        NetworkSpec {
            name: "tiny-quant".into(),
            input_shape: [1, ROI_HEIGHT, ROI_WIDTH],
            trunk: vec![
                LayerSpec::max_pool("p1", 10, 10),
                LayerSpec::flatten("flat"),
                LayerSpec::dense("fc", 8),
                LayerSpec::relu("fc_relu"),
            ],
            heads,
        }
    }

    #[test]
    fn history_and_augmentation_bookkeeping() {
        let knees: Vec<KneeSample> = (0..20)
            .map(|i| {
                let grade = (i % 5) as u8;
                let crop = GrayImage::from_fn(ROI_WIDTH, ROI_HEIGHT, |x, y| {
                    if y >= 80 + 10 * grade as usize && y < 120 && x > 10 {
                        200
                    } else {
                        ((x + y + i) % 40) as u8
                    }
                });
                KneeSample {
                    image: format!("k{i}"),
                    side: Side::Right,
                    crop,
                    grade,
                }
            })
            .collect();
        let cfg = TrainConfig {
            mode: Mode::Joint,
            epochs: 3,
            batch_size: 8,
            validation_fraction: 0.2,
            ..Default::default()
        };
        let (net, h) = train_quantifier(&knees, &tiny(true), &cfg).unwrap();
        assert_eq!(h.epochs.len(), 3);
        assert_eq!((h.train_knees, h.val_knees), (15, 5));
        assert_eq!(h.train_samples, 2 * h.train_knees);
        assert!(h
            .epochs
            .iter()
            .all(|e| e.train_loss.is_finite() && e.val_loss.is_some_and(f64::is_finite)));
        let (again, h2) = train_quantifier(&knees, &tiny(true), &cfg).unwrap();
        assert_eq!(net.params(), again.params());
        assert_eq!(h, h2);
        assert!(train_quantifier(&knees, &tiny(false), &TrainConfig { epochs: 1, ..cfg }).is_err());
    }
}
