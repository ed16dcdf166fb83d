use serde::{Deserialize, Serialize};

use super::fcn::fcn_input;
use super::{LocateError, Result};
use crate::data::{make_masks, ManifestRecord, MaskMode};
use crate::imageproc::{standardized_batch, BinaryMask, GrayImage};
use crate::nn::{
    build_network, epoch_batches, eval_loss, optimizer_for, train_step, EpochStats, HeadLoss, LossSpec, Network,
    NetworkSpec, OptimizerConfig, Targets,
};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for FcnTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 8,
            optimizer: OptimizerConfig::adam(),
            seed: 0,
        }
    }
}

impl FcnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(LocateError::InvalidInput(format!(
                "epochs ({}) and batch size ({}) must be positive",
                self.epochs, self.batch_size
            )));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}

/// Working-raster inputs paired with their target masks.
#[derive(Debug, Clone, Default)]
pub struct FcnSamples {
    pub inputs: Vec<GrayImage>,
    pub masks: Vec<BinaryMask>,
    /// Record index of each sample.
    pub indices: Vec<usize>,
    /// `(record index, reason)` for records without the needed annotation.
    pub skipped: Vec<(usize, String)>,
}

impl FcnSamples {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Preprocess `images` to `size` and draw the matching masks.
pub fn fcn_samples(
    images: &[GrayImage],
    records: &[ManifestRecord],
    mode: MaskMode,
    size: (usize, usize),
) -> Result<FcnSamples> {
    if images.len() != records.len() {
        return Err(LocateError::InvalidInput(format!(
            "{} images for {} records",
            images.len(),
            records.len()
        )));
    }
    let set = make_masks(records, mode, size);
    let mut out = FcnSamples {
        skipped: set.skipped,
        ..Default::default()
    };
    for (i, mask) in set.masks {
        out.inputs.push(fcn_input(&images[i], size)?);
        out.masks.push(mask);
        out.indices.push(i);
    }
    Ok(out)
}

fn mask_tensor(masks: &[&BinaryMask]) -> Tensor<f32> {
    let (w, h) = (masks[0].width(), masks[0].height());
    let data = masks.iter().flat_map(|m| m.to_unit()).collect();
    Tensor::new(&[masks.len(), 1, h, w], data).expect("masks share extents")
}

fn mask_head(spec: &NetworkSpec) -> Result<String> {
    spec.heads
        .iter()
        .find(|h| h.loss == HeadLoss::Bce)
        .map(|h| h.name.clone())
        .ok_or_else(|| LocateError::InvalidInput(format!("preset `{}` has no mask head", spec.name)))
}

fn check_samples(spec: &NetworkSpec, s: &FcnSamples) -> Result<()> {
    let [_, h, w] = spec.input_shape;
    for (img, m) in s.inputs.iter().zip(&s.masks) {
        if (img.width(), img.height()) != (w, h) || (m.width(), m.height()) != (w, h) {
            return Err(LocateError::InvalidInput(format!(
                "sample is {}x{} with a {}x{} mask; the network takes {w}x{h}",
                img.width(),
                img.height(),
                m.width(),
                m.height()
            )));
        }
    }
    Ok(())
}

/// Mean loss and pixel accuracy (threshold 0.5) over `samples`.
pub fn evaluate_fcn(net: &Network<f32>, samples: &FcnSamples, batch_size: usize) -> Result<(f64, f64)> {
    let head = mask_head(net.spec())?;
    let loss = LossSpec::single(&head);
    let (mut total, mut correct, mut pixels) = (0.0, 0usize, 0usize);
    let idx: Vec<usize> = (0..samples.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let imgs: Vec<&GrayImage> = chunk.iter().map(|&i| &samples.inputs[i]).collect();
        let masks: Vec<&BinaryMask> = chunk.iter().map(|&i| &samples.masks[i]).collect();
        let x = standardized_batch::<f32>(&imgs)?;
        let y = mask_tensor(&masks);
        let targets = Targets {
            masks: Some(&y),
            ..Default::default()
        };
        total += eval_loss(net, &x, &targets, &loss)?.total * chunk.len() as f64;
        let out = net.predict(&x)?;
        let pred = out.get(&head).expect("head exists");
        correct += pred
            .data()
            .iter()
            .zip(y.data())
            .filter(|(&p, &t)| (p > 0.5) == (t > 0.5))
            .count();
        pixels += y.len();
    }
    Ok((total / samples.len() as f64, correct as f64 / pixels as f64))
}

/// Train a fresh network built from `spec` with binary cross-entropy on
/// its mask head. Returns the final-epoch model and per-epoch statistics.
pub fn train_fcn(
    spec: &NetworkSpec,
    train: &FcnSamples,
    val: Option<&FcnSamples>,
    cfg: &FcnTrainConfig,
) -> Result<(Network<f32>, Vec<EpochStats>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(LocateError::InvalidInput("no training samples".into()));
    }
    check_samples(spec, train)?;
    if let Some(v) = val {
        check_samples(spec, v)?;
    }
    let head = mask_head(spec)?;
    let loss = LossSpec::single(&head);
    let mut net = build_network::<f32>(spec, cfg.seed)?;
    let mut opt = optimizer_for(&net, cfg.optimizer)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        for batch in epoch_batches(train.len(), cfg.batch_size, cfg.seed, epoch) {
            let imgs: Vec<&GrayImage> = batch.iter().map(|&i| &train.inputs[i]).collect();
            let masks: Vec<&BinaryMask> = batch.iter().map(|&i| &train.masks[i]).collect();
            let x = standardized_batch::<f32>(&imgs)?;
            let y = mask_tensor(&masks);
            let targets = Targets {
                masks: Some(&y),
                ..Default::default()
            };
            sum += train_step(&mut net, &x, &targets, &loss, &mut opt)?.total * batch.len() as f64;
        }
        let (val_loss, val_accuracy) = match val.filter(|v| !v.is_empty()) {
            Some(v) => {
                let (l, a) = evaluate_fcn(&net, v, cfg.batch_size)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss: sum / train.len() as f64,
            val_loss,
            val_accuracy,
            val_mse: None,
        };
        log::info!(
            "fcn epoch {}/{}: train {:.5} val {:?}",
            stats.epoch,
            cfg.epochs,
            stats.train_loss,
            stats.val_loss
        );
        history.push(stats);
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::BBox;
    use crate::nn::{HeadSource, HeadSpec, LayerSpec};

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            name: "tiny-fcn".into(),
            input_shape: [1, 16, 16],
            trunk: vec![LayerSpec::conv("c1", 4, 3, 1), LayerSpec::relu("r1")],
            heads: vec![HeadSpec {
                name: "mask".into(),
                source: HeadSource::Trunk,
                loss: HeadLoss::Bce,
                layers: vec![LayerSpec::conv("c2", 1, 1, 1), LayerSpec::sigmoid("s2")],
            }],
        }
    }

    fn samples() -> FcnSamples {
        let mut s = FcnSamples::default();
        for i in 0..6 {
            let b = BBox::new(2 + i as i64, 3, 5, 4);
            let mut img = GrayImage::filled(16, 16, 20);
            let mut m = BinaryMask::empty(16, 16);
            m.fill_rect(b);
            for (p, &bit) in img.pixels_mut().iter_mut().zip(m.bits()) {
                if bit {
                    *p = 200;
                }
            }
            s.inputs.push(img);
            s.masks.push(m);
            s.indices.push(i);
        }
        s
    }

    #[test]
    fn loss_falls_and_runs_repeat_exactly() {
        let cfg = FcnTrainConfig {
            epochs: 8,
            batch_size: 4,
            optimizer: OptimizerConfig::adam().with_lr(0.01),
            seed: 3,
        };
        let s = samples();
        let (net, hist) = train_fcn(&tiny_spec(), &s, Some(&s), &cfg).unwrap();
        assert_eq!(hist.len(), 8);
        assert!(hist[7].train_loss < hist[0].train_loss);
        assert!(hist[7].val_accuracy.unwrap() > 0.9);
        let (again, _) = train_fcn(&tiny_spec(), &s, None, &cfg).unwrap();
        assert_eq!(net.params(), again.params());
    }

    #[test]
    fn rejects_wrong_extents() {
        let mut s = samples();
        s.inputs[0] = GrayImage::filled(8, 8, 0);
        assert!(train_fcn(&tiny_spec(), &s, None, &FcnTrainConfig::default()).is_err());
    }
}
