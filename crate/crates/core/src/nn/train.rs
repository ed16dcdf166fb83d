use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_bce, loss_cce, loss_mse};
use super::network::{Network, Outputs, Phase};
use super::optim::Optimizer;
use super::spec::HeadLoss;
use super::{NnError, Result};
use crate::tensor::{Scalar, Tensor};

/// Supervision for one batch. Each head reads the field matching its loss.
#[derive(Debug, Clone, Copy, Default)]
pub struct Targets<'a, T> {
    /// `[N, 1, H, W]` masks with values in {0, 1}.
    pub masks: Option<&'a Tensor<T>>,
    /// Integer grades for classification heads.
    pub labels: Option<&'a [usize]>,
    /// Real-valued grades for regression heads.
    pub grades: Option<&'a [f64]>,
}

/// Weight of each head's loss in the total objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub weights: Vec<(String, f64)>,
}

impl LossSpec {
    pub fn single(head: &str) -> Self {
        Self {
            weights: vec![(head.to_string(), 1.0)],
        }
    }

    /// `(1 - w_reg)` on `clsf`, `w_reg` on `reg`.
    pub fn joint(w_reg: f64) -> Self {
        Self {
            weights: vec![("clsf".into(), 1.0 - w_reg), ("reg".into(), w_reg)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    /// Weighted data loss plus the L2 term.
    pub total: f64,
    pub data: f64,
    pub l2: f64,
    /// Unweighted loss per head.
    pub components: Vec<(String, f64)>,
}

impl LossReport {
    pub fn component(&self, head: &str) -> Option<f64> {
        self.components.iter().find(|(n, _)| n == head).map(|&(_, v)| v)
    }
}

/// Weighted data loss and per-head output gradients.
pub fn head_losses<T: Scalar>(
    net: &Network<T>,
    outputs: &Outputs<T>,
    targets: &Targets<'_, T>,
    loss: &LossSpec,
) -> Result<(f64, Vec<(String, f64)>, Vec<(String, Tensor<T>)>)> {
    let mut data = 0.0;
    let mut components = Vec::new();
    let mut grads = Vec::new();
    for (head, w) in &loss.weights {
        let spec = net.spec().head(head).ok_or_else(|| NnError::UnknownHead(head.clone()))?;
        let out = outputs.get(head).ok_or_else(|| NnError::UnknownHead(head.clone()))?;
        let missing = || NnError::MissingTarget(head.clone());
        let lg = match spec.loss {
            HeadLoss::Bce => loss_bce(out, targets.masks.ok_or_else(missing)?)?,
            HeadLoss::Cce => loss_cce(out, targets.labels.ok_or_else(missing)?)?,
            HeadLoss::Mse => loss_mse(out, targets.grades.ok_or_else(missing)?)?,
        };
        data += w * lg.value;
        components.push((head.clone(), lg.value));
        let wt = T::from_f64(*w);
        grads.push((head.clone(), lg.grad.map(|g| g * wt)));
    }
    Ok((data, components, grads))
}

/// One forward/backward/update cycle in training mode.
pub fn train_step<T: Scalar>(
    net: &mut Network<T>,
    inputs: &Tensor<T>,
    targets: &Targets<'_, T>,
    loss: &LossSpec,
    opt: &mut Optimizer<T>,
) -> Result<LossReport> {
    let outputs = net.forward(inputs, Phase::Train)?;
    let (data, components, grads) = head_losses(net, &outputs, targets, loss)?;
    let l2 = net.l2_penalty();
    let total = data + l2;
    if !total.is_finite() {
        return Err(NnError::NonFinite {
            layer: net.first_non_finite().unwrap_or("loss").to_string(),
            loss: total,
        });
    }
    let named: Vec<(&str, Tensor<T>)> = grads.iter().map(|(n, g)| (n.as_str(), g.clone())).collect();
    net.backward(&named)?;
    net.add_l2_grads();
    if opt.slot_a.len() != net.params().len() {
        return Err(NnError::LengthMismatch {
            what: "optimizer slots",
            expected: net.params().len(),
            found: opt.slot_a.len(),
        });
    }
    for (i, p) in net.params_mut().iter_mut().enumerate() {
        opt.update(i, p.value.data_mut(), p.grad.data());
    }
    opt.finish_step();
    Ok(LossReport {
        total,
        data,
        l2,
        components,
    })
}

/// Loss of a batch in inference mode, without updating anything.
pub fn eval_loss<T: Scalar>(
    net: &Network<T>,
    inputs: &Tensor<T>,
    targets: &Targets<'_, T>,
    loss: &LossSpec,
) -> Result<LossReport> {
    let outputs = net.predict(inputs)?;
    let (data, components, _) = head_losses(net, &outputs, targets, loss)?;
    let l2 = net.l2_penalty();
    Ok(LossReport {
        total: data + l2,
        data,
        l2,
        components,
    })
}

/// Create an optimiser sized for `net`.
pub fn optimizer_for<T: Scalar>(net: &Network<T>, config: super::OptimizerConfig) -> Result<Optimizer<T>> {
    let sizes: Vec<usize> = net.params().iter().map(|p| p.value.len()).collect();
    Optimizer::new(config, &sizes)
}

/// Summary of one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean total loss over the epoch's batches.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Classification accuracy, or pixel accuracy at 0.5 for mask heads.
    pub val_accuracy: Option<f64>,
    /// Mean squared error of the regression head.
    pub val_mse: Option<f64>,
}

/// Shuffled mini-batches of `0..n` for one epoch. The order depends only on
/// `(seed, epoch)`.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    order.shuffle(&mut rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{HeadSource, HeadSpec, LayerSpec, NetworkSpec};
    use crate::nn::{build_network, OptimizerConfig};

    fn linear() -> NetworkSpec {
        NetworkSpec {
            name: "linear".into(),
            input_shape: [1, 2, 2],
            trunk: vec![LayerSpec::flatten("flat"), LayerSpec::dense("fc", 4).with_l2(0.01)],
            heads: vec![HeadSpec {
                name: "clsf".into(),
                source: HeadSource::Trunk,
                loss: HeadLoss::Cce,
                layers: vec![LayerSpec::softmax_dense("out", 5)],
            }],
        }
    }

    fn batch() -> (Tensor<f64>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..8 {
            let c = i % 2;
            let s = if c == 0 { 1.0 } else { -1.0 };
            x.extend([s, 0.5 * s, -0.2 * s, 0.1 * (i as f64)]);
            y.push(c * 3);
        }
        (Tensor::new(&[8, 1, 2, 2], x).unwrap(), y)
    }

    #[test]
    fn batches_partition_indices() {
        let b = epoch_batches(10, 4, 7, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(b, epoch_batches(10, 4, 7, 0));
        assert_ne!(b, epoch_batches(10, 4, 7, 1));
    }

    #[test]
    fn zero_lr_keeps_params() {
        let mut net = build_network::<f64>(&linear(), 1).unwrap();
        let before = net.params().to_vec();
        let mut opt = optimizer_for(&net, OptimizerConfig::adam().with_lr(0.0)).unwrap();
        let (x, y) = batch();
        let t = Targets {
            labels: Some(&y),
            ..Default::default()
        };
        let r = train_step(&mut net, &x, &t, &LossSpec::single("clsf"), &mut opt).unwrap();
        assert!(r.total.is_finite());
        let after: Vec<_> = net.params().iter().map(|p| p.value.clone()).collect();
        assert_eq!(before.iter().map(|p| p.value.clone()).collect::<Vec<_>>(), after);
    }

    #[test]
    fn l2_term_matches_direct_sum() {
        let net = build_network::<f64>(&linear(), 2).unwrap();
        let w = net.param("fc.weight").unwrap();
        let direct: f64 = 0.01 * w.value.data().iter().map(|v| v * v).sum::<f64>();
        let (x, y) = batch();
        let t = Targets {
            labels: Some(&y),
            ..Default::default()
        };
        let r = eval_loss(&net, &x, &t, &LossSpec::single("clsf")).unwrap();
        assert!((r.l2 - direct).abs() < 1e-15);
        assert!((r.total - r.data - direct).abs() < 1e-12);
    }

    #[test]
    fn training_reduces_cce() {
        let mut net = build_network::<f64>(&linear(), 3).unwrap();
        let mut opt = optimizer_for(&net, OptimizerConfig::adam().with_lr(0.01)).unwrap();
        let (x, y) = batch();
        let t = Targets {
            labels: Some(&y),
            ..Default::default()
        };
        let spec = LossSpec::single("clsf");
        let first = train_step(&mut net, &x, &t, &spec, &mut opt).unwrap().data;
        let mut last = first;
        for _ in 0..49 {
            last = train_step(&mut net, &x, &t, &spec, &mut opt).unwrap().data;
        }
        assert!(last < first);
    }

    #[test]
    fn missing_target_is_reported() {
        let net = build_network::<f64>(&linear(), 3).unwrap();
        let (x, _) = batch();
        let err = eval_loss(&net, &x, &Targets::default(), &LossSpec::single("clsf")).unwrap_err();
        assert!(matches!(err, NnError::MissingTarget(h) if h == "clsf"));
    }

    #[test]
    fn non_finite_names_layer() {
        let mut net = build_network::<f64>(&linear(), 3).unwrap();
        net.params_mut()[0].value.data_mut()[0] = f64::NAN;
        let mut opt = optimizer_for(&net, OptimizerConfig::adam()).unwrap();
        let (x, y) = batch();
        let t = Targets {
            labels: Some(&y),
            ..Default::default()
        };
        match train_step(&mut net, &x, &t, &LossSpec::single("clsf"), &mut opt) {
            Err(NnError::NonFinite { layer, .. }) => assert_eq!(layer, "fc"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
