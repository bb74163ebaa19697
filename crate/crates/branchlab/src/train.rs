//! Imitation training on assembled splits.

use std::fmt::Write as _;

use branchlab_core::dataset::{DataPoint, SplitName};
use branchlab_core::neural::{topk_accuracy, train, NetError, NetSpec, PolicyNet, TrainConfig, TrainError};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::collect::Assembled;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub spec: NetSpec,
    pub counts: Vec<(SplitName, usize)>,
    pub final_train_loss: f64,
    pub valid_top1: Option<f64>,
    pub valid_top5: Option<f64>,
    pub test_top1: Option<f64>,
    pub test_top5: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainPipelineError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

fn accuracy(net: &PolicyNet, data: &[DataPoint], k: usize) -> Result<Option<f64>, NetError> {
    if data.is_empty() {
        return Ok(None);
    }
    topk_accuracy(net, data, k).map(Some)
}

/// Trains a fresh network on the train split, tracking the validation split,
/// and scores it on the test split when present.
pub fn train_policy(
    data: &Assembled,
    spec: NetSpec,
    init_seed: u64,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, TrainSummary), TrainPipelineError> {
    let mut net = PolicyNet::new(spec, init_seed)?;
    let outcome = train(&mut net, data.get(SplitName::Train), data.get(SplitName::Valid), cfg)?;
    let last = outcome.curves.last();
    let test = data.get(SplitName::Test);
    let summary = TrainSummary {
        spec,
        counts: SplitName::ALL.iter().map(|&s| (s, data.get(s).len())).collect(),
        final_train_loss: last.map_or(f64::NAN, |r| r.train_loss),
        valid_top1: last.and_then(|r| r.valid_top1),
        valid_top5: last.and_then(|r| r.valid_top5),
        test_top1: accuracy(&net, test, 1)?,
        test_top5: accuracy(&net, test, 5)?,
    };
    let mut ckpt = Checkpoint::new(&net);
    ckpt.optimizer = Some(outcome.optimizer);
    ckpt.train_config = Some(cfg.clone());
    ckpt.curves = outcome.curves;
    Ok((ckpt, summary))
}

/// `epoch,lr,train_loss,valid_loss,valid_top1,valid_top5`.
pub fn curves_csv(ckpt: &Checkpoint) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut out = String::from("epoch,lr,train_loss,valid_loss,valid_top1,valid_top5\n");
    for r in &ckpt.curves {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            r.lr,
            r.train_loss,
            opt(r.valid_loss),
            opt(r.valid_top1),
            opt(r.valid_top5)
        );
    }
    out
}
