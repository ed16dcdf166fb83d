//! Linear SVM over horizontal Sobel responses and its sliding-window
//! detector.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{region_about, Detection, KneeDetections, LocateError, Result};
use crate::geom::{BBox, Side};
use crate::imageproc::{sobel_horizontal, FloatMap, GrayImage};
use crate::locate::Method;

/// Sobel responses are divided by this (the largest possible magnitude,
/// `4 * 255`) so features lie in `[-1, 1]`.
pub const SOBEL_SCALE: f64 = 1020.0;

/// `sign(w . x + b)` classifier over flattened feature patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Patch `(w, h)` the weights are laid out for.
    pub patch: (usize, usize),
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| LocateError::InvalidInput(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: LinearModel = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| LocateError::InvalidInput(format!("svm model: {e}")))?;
        if m.weights.len() != m.patch.0 * m.patch.1 || m.weights.iter().any(|w| !w.is_finite()) {
            return Err(LocateError::InvalidInput("svm model weights are inconsistent".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Hinge-loss weight in `1/2 |w|^2 + C * sum(hinge)`.
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
    pub fit_bias: bool,
    /// Step size at the first update; later steps decay as `1 / t`.
    pub initial_step: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 100,
            seed: 0,
            fit_bias: true,
            initial_step: 0.1,
        }
    }
}

/// Trained model and the objective after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmTraining {
    pub model: LinearModel,
    pub objective: Vec<f64>,
}

/// `1/2 |w|^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))`.
pub fn hinge_objective(model: &LinearModel, features: &[Vec<f64>], labels: &[f64], c: f64) -> f64 {
    let reg = 0.5 * model.weights.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| (1.0 - y * model.decision(x)).max(0.0))
        .sum();
    reg + c * hinge
}

/// Fit a linear SVM by stochastic subgradient descent on the primal.
///
/// Each epoch visits the samples in a seeded shuffle. With
/// `lambda = 1 / (C n)` the step at update `t` is `1 / (lambda (t + t0))`,
/// where `t0` makes the first step `initial_step`. The bias is not
/// regularised.
pub fn train_svm(features: &[Vec<f64>], labels: &[f64], patch: (usize, usize), cfg: &SvmConfig) -> Result<SvmTraining> {
    let n = features.len();
    if labels.len() != n {
        return Err(LocateError::InvalidInput(format!("{n} feature rows but {} labels", labels.len())));
    }
    let dim = patch.0 * patch.1;
    if let Some(row) = features.iter().find(|r| r.len() != dim) {
        return Err(LocateError::InvalidInput(format!("feature row of {} values, expected {dim}", row.len())));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(LocateError::InvalidInput("labels must be +1 or -1".into()));
    }
    if !labels.contains(&1.0) {
        return Err(LocateError::SingleClass("negatives"));
    }
    if !labels.contains(&-1.0) {
        return Err(LocateError::SingleClass("positives"));
    }
    if !(cfg.c > 0.0 && cfg.initial_step > 0.0) {
        return Err(LocateError::InvalidInput("C and the initial step must be positive".into()));
    }
    let lambda = 1.0 / (cfg.c * n as f64);
    let t0 = 1.0 / (lambda * cfg.initial_step);
    let mut model = LinearModel {
        weights: vec![0.0; dim],
        bias: 0.0,
        patch,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut objective = Vec::with_capacity(cfg.epochs);
    let mut t = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = 1.0 / (lambda * (t + t0));
            let (x, y) = (&features[i], labels[i]);
            let margin = y * model.decision(x);
            let shrink = 1.0 - eta * lambda;
            for w in &mut model.weights {
                *w *= shrink;
            }
            if margin < 1.0 {
                for (w, v) in model.weights.iter_mut().zip(x) {
                    *w += eta * y * v;
                }
                if cfg.fit_bias {
                    model.bias += eta * y;
                }
            }
            t += 1.0;
        }
        objective.push(hinge_objective(&model, features, labels, cfg.c));
    }
    Ok(SvmTraining { model, objective })
}

/// Scaled Sobel map of a working raster.
pub fn sobel_features(img: &GrayImage) -> Result<FloatMap> {
    let mut map = sobel_horizontal(img)?;
    for v in map.data_mut() {
        *v /= SOBEL_SCALE;
    }
    Ok(map)
}

fn window(map: &FloatMap, x: usize, y: usize, patch: (usize, usize)) -> Vec<f64> {
    let mut out = Vec::with_capacity(patch.0 * patch.1);
    for yy in y..y + patch.1 {
        out.extend_from_slice(&map.data()[yy * map.width() + x..yy * map.width() + x + patch.0]);
    }
    out
}

/// Positive windows centred on each knee centre and `negatives` random
/// windows per image whose centres keep at least one window size away
/// from every knee centre.
pub fn collect_svm_samples(
    images: &[(&GrayImage, Vec<(f64, f64)>)],
    patch: (usize, usize),
    negatives: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (img, centres) in images {
        if img.width() < 2 * patch.0 || img.height() < 2 * patch.1 {
            return Err(LocateError::TooSmall {
                what: "svm sample image",
                need_w: 2 * patch.0,
                need_h: 2 * patch.1,
                found_w: img.width(),
                found_h: img.height(),
            });
        }
        let map = sobel_features(img)?;
        for &(cx, cy) in centres {
            let b = BBox::centered(cx, cy, patch.0 as i64, patch.1 as i64).shift_inside(img.width(), img.height());
            xs.push(window(&map, b.x as usize, b.y as usize, patch));
            ys.push(1.0);
        }
        let mut drawn = 0;
        let mut attempts = 0;
        while drawn < negatives && attempts < 1000 * negatives.max(1) {
            attempts += 1;
            let x = rng.gen_range(0..=img.width() - patch.0);
            let y = rng.gen_range(0..=img.height() - patch.1);
            let (mx, my) = (x as f64 + patch.0 as f64 / 2.0, y as f64 + patch.1 as f64 / 2.0);
            if centres
                .iter()
                .any(|&(cx, cy)| (mx - cx).abs() < patch.0 as f64 && (my - cy).abs() < patch.1 as f64)
            {
                continue;
            }
            xs.push(window(&map, x, y, patch));
            ys.push(-1.0);
            drawn += 1;
        }
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmDetectConfig {
    pub stride: usize,
    /// Extracted region `(w, h)` in original pixels.
    pub region: (usize, usize),
}

impl Default for SvmDetectConfig {
    fn default() -> Self {
        Self {
            stride: 10,
            region: (300, 200),
        }
    }
}

/// Highest-scoring window in each half of a preprocessed image; the first
/// window in raster order wins ties.
pub fn svm_detect(
    img: &GrayImage,
    model: &LinearModel,
    original: (usize, usize),
    cfg: &SvmDetectConfig,
) -> Result<KneeDetections> {
    let (pw, ph) = model.patch;
    let mid = img.width() / 2;
    if mid < pw || img.width() - mid < pw || img.height() < ph {
        return Err(LocateError::TooSmall {
            what: "image half",
            need_w: pw,
            need_h: ph,
            found_w: mid,
            found_h: img.height(),
        });
    }
    let map = sobel_features(img)?;
    let stride = cfg.stride.max(1);
    let scale = (original.0 as f64 / img.width() as f64, original.1 as f64 / img.height() as f64);
    let mut dets = Vec::with_capacity(2);
    for (x0, x_end) in [(0, mid), (mid, img.width())] {
        let mut best: Option<(usize, usize, f64)> = None;
        for y in (0..=img.height() - ph).step_by(stride) {
            for x in (x0..=x_end - pw).step_by(stride) {
                let s = model.decision(&window(&map, x, y, model.patch));
                if best.map_or(true, |(_, _, b)| s > b) {
                    best = Some((x, y, s));
                }
            }
        }
        let (x, y, score) = best.expect("half holds at least one window");
        let center = (x as f64 + pw as f64 / 2.0, y as f64 + ph as f64 / 2.0);
        dets.push(Detection {
            side: Side::from_image_x(center.0, img.width()),
            center,
            bbox: region_about(center, scale, cfg.region, original)?,
            score,
            method: Method::Svm,
        });
    }
    let right = dets.pop().expect("two halves");
    KneeDetections::from_pair(dets.pop().expect("two halves"), right)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs = vec![
            vec![2.0, 1.0],
            vec![1.5, 2.0],
            vec![3.0, 0.5],
            vec![-1.0, -2.0],
            vec![-2.0, 0.0],
            vec![-0.5, -1.5],
        ];
        (xs, vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0])
    }

    #[test]
    fn separable_toy_is_fit() {
        let (xs, ys) = toy();
        let t = train_svm(&xs, &ys, (2, 1), &SvmConfig::default()).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert!(y * t.model.decision(x) > 0.0);
        }
    }

    #[test]
    fn single_class_rejected() {
        let (xs, _) = toy();
        assert!(matches!(
            train_svm(&xs, &[1.0; 6], (2, 1), &SvmConfig::default()),
            Err(LocateError::SingleClass(_))
        ));
    }

    #[test]
    fn zero_weights_pick_first_window() {
        let img = GrayImage::from_fn(100, 50, |x, y| ((x * 13 + y * 7) % 200) as u8);
        let model = LinearModel {
            weights: vec![0.0; 400],
            bias: 0.0,
            patch: (20, 20),
        };
        let d = svm_detect(&img, &model, (1000, 500), &SvmDetectConfig::default()).unwrap();
        assert_eq!(d.right.center, (10.0, 10.0));
        assert_eq!(d.left.center, (60.0, 10.0));
    }
}
