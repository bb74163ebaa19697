//! Cross-entropy loss, exact gradients and Adam training.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ForwardTrace, NetError, NetParams, PolicyNet};
use crate::dataset::DataPoint;
use crate::num::{ln, sqrt};

/// `−log π(y | x)` for one data point, with the trace it came from.
pub fn sample_loss(net: &PolicyNet, point: &DataPoint) -> Result<(f64, ForwardTrace), NetError> {
    let trace = net.forward_auto(&point.candidates, &point.tree)?;
    let n = trace.logits.len();
    if point.label >= n {
        return Err(NetError::LabelOutOfRange { label: point.label, len: n });
    }
    // log-sum-exp form keeps the loss finite when the probability underflows
    let max = trace.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + ln(trace.logits.iter().map(|&l| crate::num::exp(l - max)).sum::<f64>());
    Ok(((lse - trace.logits[point.label]).max(0.0), trace))
}

/// Mean negative log-likelihood over `batch`; `0` for an empty batch.
pub fn loss(net: &PolicyNet, batch: &[DataPoint]) -> Result<f64, NetError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in batch {
        total += sample_loss(net, p)?.0;
    }
    Ok(total / batch.len() as f64)
}

fn accumulate_layer(grad: &mut super::Dense, dz: &[f64], input: &[f64]) {
    for (r, &d) in dz.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grad.b[r] += d;
        let row = &mut grad.w[r * grad.inp..(r + 1) * grad.inp];
        for (w, &x) in row.iter_mut().zip(input) {
            *w += d * x;
        }
    }
}

fn back_through(layer: &super::Dense, dz: &[f64]) -> Vec<f64> {
    let mut da = vec![0.0; layer.inp];
    for (r, &d) in dz.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &layer.w[r * layer.inp..(r + 1) * layer.inp];
        for (a, &w) in da.iter_mut().zip(row) {
            *a += d * w;
        }
    }
    da
}

/// Loss and exact gradient of one data point, added into `grads` with
/// weight `scale`.
pub fn backward_into(net: &PolicyNet, point: &DataPoint, scale: f64, grads: &mut NetParams) -> Result<f64, NetError> {
    let (loss, trace) = sample_loss(net, point)?;
    let layers = &net.params.candidate;
    let n_layers = layers.len();
    let gates = trace.gates.as_deref();
    let mut dgate = vec![0.0; if gates.is_some() { net.spec.gate_dim() } else { 0 }];
    let offsets: Vec<usize> = layers
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.out;
            Some(o)
        })
        .collect();

    for (i, (tr, col)) in trace.candidates.iter().zip(&point.candidates.columns).enumerate() {
        let target = if i == point.label { 1.0 } else { 0.0 };
        let dlogit = scale * (trace.probabilities[i] - target);
        if dlogit == 0.0 {
            continue;
        }
        let width = layers[n_layers - 1].out as f64;
        let mut dout = vec![dlogit / width; layers[n_layers - 1].out];
        for l in (0..n_layers).rev() {
            let layer = &layers[l];
            let off = offsets[l];
            let hidden = l + 1 < n_layers;
            let mut dz = dout;
            for (r, d) in dz.iter_mut().enumerate() {
                let z = tr.pre[l][r];
                let act = if hidden { z.max(0.0) } else { z };
                if let Some(g) = gates {
                    dgate[off + r] += *d * act;
                    *d *= g[off + r];
                }
                if hidden && z <= 0.0 {
                    *d = 0.0;
                }
            }
            let input: &[f64] = if l == 0 { col } else { &tr.out[l - 1] };
            accumulate_layer(&mut grads.candidate[l], &dz, input);
            if l > 0 {
                dout = back_through(layer, &dz);
            } else {
                dout = Vec::new();
            }
        }
    }

    if let Some(g) = gates {
        let tree = &net.params.tree;
        let last = tree.len() - 1;
        let mut dz: Vec<f64> = dgate.iter().zip(g).map(|(d, &gv)| d * gv * (1.0 - gv)).collect();
        for l in (0..=last).rev() {
            let input: Vec<f64> = if l == 0 {
                point.tree.values.clone()
            } else {
                trace.tree_pre[l - 1].iter().map(|&z| z.max(0.0)).collect()
            };
            accumulate_layer(&mut grads.tree[l], &dz, &input);
            if l > 0 {
                let da = back_through(&tree[l], &dz);
                dz = da.iter().zip(&trace.tree_pre[l - 1]).map(|(&d, &z)| if z > 0.0 { d } else { 0.0 }).collect();
            }
        }
    }
    Ok(loss)
}

/// Mean loss over `batch` and its exact gradient.
pub fn backward(net: &PolicyNet, batch: &[DataPoint]) -> Result<(f64, NetParams), NetError> {
    let mut grads = NetParams::zeros_like(&net.params);
    if batch.is_empty() {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for p in batch {
        total += backward_into(net, p, scale, &mut grads)?;
    }
    Ok((total * scale, grads))
}

/// Fraction of points whose label ranks among the `k` highest logits; ties
/// go to the lower candidate position.
pub fn topk_accuracy(net: &PolicyNet, data: &[DataPoint], k: usize) -> Result<f64, NetError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for p in data {
        let logits = net.forward_auto(&p.candidates, &p.tree)?.logits;
        if p.label >= logits.len() {
            return Err(NetError::LabelOutOfRange { label: p.label, len: logits.len() });
        }
        let ly = logits[p.label];
        let rank = logits
            .iter()
            .enumerate()
            .filter(|&(j, &l)| l > ly || (l == ly && j < p.label))
            .count();
        if rank < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// 1-indexed epochs after which the rate is multiplied by `gamma`.
    pub milestones: Vec<usize>,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            lr: 0.01,
            batch_size: 32,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            milestones: vec![20, 30],
            gamma: 0.1,
            seed: 0,
        }
    }
}

/// Learning rate in effect during 1-indexed `epoch`.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    let drops = cfg.milestones.iter().filter(|&&m| epoch > m).count();
    let mut lr = cfg.lr;
    for _ in 0..drops {
        lr *= cfg.gamma;
    }
    lr
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    /// One Adam update with coupled L2 weight decay.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
        for i in 0..params.len() {
            let g = grads[i] + cfg.weight_decay * params[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (sqrt(v_hat) + cfg.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub valid_top1: Option<f64>,
    pub valid_top5: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub curves: Vec<EpochRecord>,
    pub optimizer: AdamState,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("loss diverged in epoch {epoch}")]
    Diverged { epoch: usize, curves: Vec<EpochRecord> },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Trains `net` in place. Deterministic for a given config seed.
pub fn train(
    net: &mut PolicyNet,
    train_set: &[DataPoint],
    valid_set: &[DataPoint],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if !(cfg.lr >= 0.0) || cfg.batch_size == 0 {
        return Err(TrainError::Config("learning rate must be nonnegative and batch size positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut adam = AdamState::new(net.param_count());
    let mut curves = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let lr = lr_at_epoch(cfg, epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = NetParams::zeros_like(&net.params);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                epoch_loss += backward_into(net, &train_set[i], scale, &mut grads)?;
            }
            let mut flat = net.params.flat();
            adam.update(&mut flat, &grads.flat(), lr, cfg);
            net.params.set_flat(&flat)?;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let record = if valid_set.is_empty() {
            EpochRecord { epoch, lr, train_loss, valid_loss: None, valid_top1: None, valid_top5: None }
        } else {
            EpochRecord {
                epoch,
                lr,
                train_loss,
                valid_loss: Some(loss(net, valid_set)?),
                valid_top1: Some(topk_accuracy(net, valid_set, 1)?),
                valid_top5: Some(topk_accuracy(net, valid_set, 5)?),
            }
        };
        curves.push(record);
        if !train_loss.is_finite() || !net.params.is_finite() {
            return Err(TrainError::Diverged { epoch, curves });
        }
    }
    Ok(TrainOutcome { curves, optimizer: adam })
}
