use serde::{Deserialize, Serialize};

use super::{Mode, QuantifyError, Result};
use crate::imageproc::{hist_equalize, standardized_batch, GrayImage};
use crate::nn::{eval_loss, LossSpec, Network, Targets, GRADES};
use crate::tensor::Tensor;

/// Continuous grades are reported clamped to this range.
const REPORT_RANGE: (f64, f64) = (-1.0, 6.0);
const BATCH: usize = 32;

/// Grade estimate for one knee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneePrediction {
    /// Softmax output. For regression-only networks, the one-hot vector of
    /// the rounded continuous grade.
    pub probs: [f64; GRADES],
    pub grade_discrete: u8,
    /// Regression output clamped to `[-1, 6]`; `None` for classifiers.
    pub grade_continuous: Option<f64>,
    /// The raw regression output fell outside `[0, 4]`.
    pub out_of_range: bool,
}

/// Nearest grade, halves rounded away from zero, clamped to `0..=4`.
pub fn round_grade(g: f64) -> Result<u8> {
    if !g.is_finite() {
        return Err(QuantifyError::NonFinite(g));
    }
    Ok(g.round().clamp(0.0, (GRADES - 1) as f64) as u8)
}

fn argmax(p: &[f64]) -> usize {
    // first index wins ties
    p.iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > p[best] { i } else { best })
}

/// Equalize and standardize knee crops into an `[N, 1, H, W]` batch.
pub fn knee_tensor(net: &Network<f32>, knees: &[&GrayImage]) -> Result<Tensor<f32>> {
    let [_, h, w] = net.spec().input_shape;
    if let Some(k) = knees.iter().find(|k| (k.width(), k.height()) != (w, h)) {
        return Err(QuantifyError::InputSize {
            need_w: w,
            need_h: h,
            found_w: k.width(),
            found_h: k.height(),
        });
    }
    let eq: Vec<GrayImage> = knees.iter().map(|k| hist_equalize(k)).collect();
    let refs: Vec<&GrayImage> = eq.iter().collect();
    Ok(standardized_batch(&refs)?)
}

pub(crate) fn mode_of(net: &Network<f32>) -> Result<Mode> {
    Mode::of(net.spec()).ok_or_else(|| QuantifyError::NotQuantifier(net.spec().name.clone()))
}

fn from_outputs(mode: Mode, probs: Option<&[f32]>, reg: Option<f32>) -> Result<KneePrediction> {
    let continuous = reg.map(|r| r as f64);
    if let Some(c) = continuous {
        if !c.is_finite() {
            return Err(QuantifyError::NonFinite(c));
        }
    }
    let (probs, grade) = match probs {
        Some(p) => {
            let mut out = [0.0; GRADES];
            for (o, &v) in out.iter_mut().zip(p) {
                *o = v as f64;
            }
            let g = argmax(&out) as u8;
            (out, g)
        }
        None => {
            let g = round_grade(continuous.expect("regression networks have a reg head"))?;
            let mut out = [0.0; GRADES];
            out[g as usize] = 1.0;
            (out, g)
        }
    };
    debug_assert!(mode != Mode::Clsf || continuous.is_none());
    Ok(KneePrediction {
        probs,
        grade_discrete: grade,
        grade_continuous: continuous.map(|c| c.clamp(REPORT_RANGE.0, REPORT_RANGE.1)),
        out_of_range: continuous.is_some_and(|c| !(0.0..=(GRADES - 1) as f64).contains(&c)),
    })
}

/// Predict a batch of knee crops in inference mode.
pub fn predict_batch(net: &Network<f32>, knees: &[&GrayImage]) -> Result<Vec<KneePrediction>> {
    let mode = mode_of(net)?;
    let mut out = Vec::with_capacity(knees.len());
    for chunk in knees.chunks(BATCH) {
        let x = knee_tensor(net, chunk)?;
        let o = net.predict(&x)?;
        let probs = o.get("clsf");
        let reg = o.get("reg");
        for i in 0..chunk.len() {
            out.push(from_outputs(
                mode,
                probs.map(|p| &p.data()[i * GRADES..(i + 1) * GRADES]),
                reg.map(|r| r.data()[i]),
            )?);
        }
    }
    Ok(out)
}

pub fn predict(net: &Network<f32>, knee: &GrayImage) -> Result<KneePrediction> {
    Ok(predict_batch(net, &[knee])?.remove(0))
}

/// Scores of a network on labelled knee crops.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantEval {
    /// Mean training objective (data term plus L2).
    pub loss: f64,
    pub accuracy: f64,
    /// MSE of the continuous head, or of the discrete grades if there is none.
    pub mse: f64,
    /// MSE of the rounded continuous grades, when a regression head exists.
    pub mse_rounded: Option<f64>,
    pub predictions: Vec<KneePrediction>,
}

pub(crate) fn loss_spec(mode: Mode, w_reg: f64) -> LossSpec {
    match mode {
        Mode::Clsf => LossSpec::single("clsf"),
        Mode::Reg => LossSpec::single("reg"),
        Mode::Joint | Mode::Ordinal => LossSpec::joint(w_reg),
    }
}

/// Loss, accuracy and MSE on `knees` with `grades` as ground truth.
pub fn evaluate_quantifier(net: &Network<f32>, knees: &[&GrayImage], grades: &[u8], w_reg: f64) -> Result<QuantEval> {
    if knees.len() != grades.len() || knees.is_empty() {
        return Err(QuantifyError::InvalidConfig(format!(
            "{} knees for {} grades",
            knees.len(),
            grades.len()
        )));
    }
    let mode = mode_of(net)?;
    let spec = loss_spec(mode, w_reg);
    let mut loss = 0.0;
    for (chunk, g) in knees.chunks(BATCH).zip(grades.chunks(BATCH)) {
        let x = knee_tensor(net, chunk)?;
        let labels: Vec<usize> = g.iter().map(|&v| v as usize).collect();
        let reals: Vec<f64> = g.iter().map(|&v| v as f64).collect();
        let t = Targets {
            masks: None,
            labels: Some(&labels),
            grades: Some(&reals),
        };
        loss += eval_loss(net, &x, &t, &spec)?.total * chunk.len() as f64;
    }
    let predictions = predict_batch(net, knees)?;
    let n = knees.len() as f64;
    let correct = predictions
        .iter()
        .zip(grades)
        .filter(|(p, &g)| p.grade_discrete == g)
        .count();
    let sq = |a: f64, g: u8| (a - g as f64).powi(2);
    let mse = predictions
        .iter()
        .zip(grades)
        .map(|(p, &g)| sq(p.grade_continuous.unwrap_or(p.grade_discrete as f64), g))
        .sum::<f64>()
        / n;
    let mse_rounded = match mode {
        Mode::Clsf => None,
        _ => {
            let mut s = 0.0;
            for (p, &g) in predictions.iter().zip(grades) {
                s += sq(round_grade(p.grade_continuous.expect("reg head"))? as f64, g);
            }
            Some(s / n)
        }
    };
    Ok(QuantEval {
        loss: loss / n,
        accuracy: correct as f64 / n,
        mse,
        mse_rounded,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_network, desk_cnn};

    #[test]
    fn rounding_rule() {
        assert_eq!(round_grade(2.5).unwrap(), 3);
        assert_eq!(round_grade(1.49).unwrap(), 1);
        assert_eq!(round_grade(-0.3).unwrap(), 0);
        assert_eq!(round_grade(-0.5).unwrap(), 0);
        assert_eq!(round_grade(4.7).unwrap(), 4);
        assert!(round_grade(f64::NAN).is_err());
    }

    #[test]
    fn ties_pick_lowest_grade() {
        let p = from_outputs(Mode::Clsf, Some(&[0.2; 5]), None).unwrap();
        assert_eq!(p.grade_discrete, 0);
        let p = from_outputs(Mode::Clsf, Some(&[0.1, 0.3, 0.1, 0.3, 0.2]), None).unwrap();
        assert_eq!(p.grade_discrete, 1);
    }

    #[test]
    fn regression_only_gets_one_hot() {
        let p = from_outputs(Mode::Reg, None, Some(7.5)).unwrap();
        assert_eq!(p.grade_discrete, 4);
        assert_eq!(p.probs, [0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.grade_continuous, Some(6.0));
        assert!(p.out_of_range);
    }

    #[test]
    fn ordinal_output_is_affine_expected_grade() {
        let mut net = build_network::<f32>(&desk_cnn(Mode::Ordinal), 4).unwrap();
        for p in net.params_mut() {
            if p.name.ends_with("scale_w") {
                p.value.data_mut()[0] = 1.5;
            } else if p.name.ends_with("scale_b") {
                p.value.data_mut()[0] = -0.25;
            }
        }
        let knee = GrayImage::from_fn(300, 200, |x, y| ((x * 7 + y * 3) % 251) as u8);
        let p = predict(&net, &knee).unwrap();
        let e: f64 = p.probs.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
        let expected = (1.5 * e - 0.25).clamp(-1.0, 6.0);
        assert!((p.grade_continuous.unwrap() - expected).abs() < 1e-5);
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
        assert_eq!(p.grade_discrete as usize, argmax(&p.probs));
        assert_eq!(p, predict(&net, &knee).unwrap());
    }

    #[test]
    fn wrong_extents_rejected() {
        let net = build_network::<f32>(&desk_cnn(Mode::Clsf), 1).unwrap();
        let knee = GrayImage::filled(200, 300, 0);
        assert!(matches!(predict(&net, &knee), Err(QuantifyError::InputSize { .. })));
    }
}
