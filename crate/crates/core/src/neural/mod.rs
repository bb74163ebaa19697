//! NoTree and TreeGate branching policies.
//!
//! Both share the candidate path: each 25-feature column goes through dense
//! layers of width `h, h/2, …, INF` with shared weights, so the candidate set
//! acts as a batch dimension. Hidden layers use ReLU; the final `INF` layer is
//! linear and is mean-pooled into one logit per candidate. TreeGate adds a
//! tree path `61 → h → … → h → H` ending in a sigmoid whose output gates every
//! candidate layer's (post-activation) output, chunk by chunk.

mod train;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{CandidateMatrix, TreeState, CANDIDATE_DIM, TREE_DIM};
use crate::num::{exp, sqrt};

pub use train::{
    backward, backward_into, loss, lr_at_epoch, sample_loss, topk_accuracy, train, AdamState, EpochRecord, TrainConfig, TrainError,
    TrainOutcome,
};

/// Width of the last candidate layer.
pub const INF: usize = 8;
pub const HIDDEN_GRID: [usize; 4] = [32, 64, 128, 256];
pub const DEPTH_GRID: [usize; 3] = [2, 3, 5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    NoTree,
    TreeGate,
}

impl NetKind {
    pub fn uses_tree(self) -> bool {
        self == NetKind::TreeGate
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("tree state required by TreeGate")]
    TreeMissing,
    #[error("NoTree does not take a tree state")]
    TreeUnexpected,
    #[error("tree state has {0} entries, expected 61")]
    TreeShape(usize),
    #[error("label {label} outside candidate set of size {len}")]
    LabelOutOfRange { label: usize, len: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub kind: NetKind,
    pub hidden: usize,
    /// Tree-path depth; ignored by NoTree.
    pub depth: usize,
}

impl NetSpec {
    pub fn new(kind: NetKind, hidden: usize, depth: usize) -> Result<Self, NetError> {
        let spec = NetSpec { kind, hidden, depth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let h = self.hidden;
        if h < INF || !h.is_multiple_of(INF) || !(h / INF).is_power_of_two() {
            return Err(NetError::InvalidSpec(alloc::format!(
                "hidden size {h} does not halve down to {INF}"
            )));
        }
        if self.kind.uses_tree() && self.depth == 0 {
            return Err(NetError::InvalidSpec("tree depth must be at least 1".into()));
        }
        Ok(())
    }

    /// `[h, h/2, …, INF]`.
    pub fn candidate_layers(&self) -> Vec<usize> {
        let mut sizes = vec![self.hidden];
        while *sizes.last().unwrap() > INF {
            let next = sizes.last().unwrap() / 2;
            sizes.push(next);
        }
        sizes
    }

    /// Gate vector length `H`, the sum of candidate layer widths.
    pub fn gate_dim(&self) -> usize {
        self.candidate_layers().iter().sum()
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        let mut fan_in = CANDIDATE_DIM;
        for s in self.candidate_layers() {
            n += fan_in * s + s;
            fan_in = s;
        }
        if self.kind.uses_tree() {
            let (h, d, g) = (self.hidden, self.depth, self.gate_dim());
            n += TREE_DIM * h + h + (d - 1) * (h * h + h) + h * g + g;
        }
        n
    }
}

/// Dense layer `y = W x + b` with `W` row-major `out × inp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inp: usize,
    pub out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(inp: usize, out: usize) -> Self {
        Dense { inp, out, w: vec![0.0; inp * out], b: vec![0.0; out] }
    }

    fn uniform<R: Rng>(inp: usize, out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / sqrt(inp as f64);
        let mut d = Dense::zeros(inp, out);
        for v in d.w.iter_mut().chain(d.b.iter_mut()) {
            *v = rng.gen_range(-bound..bound);
        }
        d
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inp);
        (0..self.out)
            .map(|r| {
                let row = &self.w[r * self.inp..(r + 1) * self.inp];
                self.b[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Candidate-path and tree-path layers. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub candidate: Vec<Dense>,
    pub tree: Vec<Dense>,
}

impl NetParams {
    pub fn zeros_like(other: &NetParams) -> Self {
        let z = |ls: &[Dense]| ls.iter().map(|l| Dense::zeros(l.inp, l.out)).collect();
        NetParams { candidate: z(&other.candidate), tree: z(&other.tree) }
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.candidate.iter().chain(self.tree.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.candidate.iter_mut().chain(self.tree.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.layers().map(Dense::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for l in self.layers() {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<(), NetError> {
        if values.len() != self.len() {
            return Err(NetError::ParamLength { expected: self.len(), got: values.len() });
        }
        let mut i = 0;
        for l in self.layers_mut() {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = values[i];
                i += 1;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub spec: NetSpec,
    pub seed: u64,
    pub params: NetParams,
}

/// Per-candidate activations of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateTrace {
    /// Pre-activation of each candidate layer.
    pub pre: Vec<Vec<f64>>,
    /// Gated output of each candidate layer.
    pub out: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub candidates: Vec<CandidateTrace>,
    /// Tree-path pre-activations (TreeGate only).
    pub tree_pre: Vec<Vec<f64>>,
    /// Gate vector `g` of length `H`; `None` for NoTree.
    pub gates: Option<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Numerically stable softmax. The normalizer is summed in sorted order so
/// that permuting the logits permutes the result bit for bit.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| exp(l - max)).collect();
    let mut sorted = e.clone();
    sorted.sort_by(f64::total_cmp);
    let s: f64 = sorted.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl PolicyNet {
    /// Uniform fan-in initialization, `U(−1/√fan_in, 1/√fan_in)`.
    pub fn new(spec: NetSpec, seed: u64) -> Result<Self, NetError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut candidate = Vec::new();
        let mut fan_in = CANDIDATE_DIM;
        for s in spec.candidate_layers() {
            candidate.push(Dense::uniform(fan_in, s, &mut rng));
            fan_in = s;
        }
        let mut tree = Vec::new();
        if spec.kind.uses_tree() {
            let h = spec.hidden;
            tree.push(Dense::uniform(TREE_DIM, h, &mut rng));
            for _ in 1..spec.depth {
                tree.push(Dense::uniform(h, h, &mut rng));
            }
            tree.push(Dense::uniform(h, spec.gate_dim(), &mut rng));
        }
        Ok(PolicyNet { spec, seed, params: NetParams { candidate, tree } })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Checks that layer shapes match the spec.
    pub fn check_shapes(&self) -> Result<(), NetError> {
        let fresh = PolicyNet::new(self.spec, 0)?;
        let shape = |ls: &[Dense]| ls.iter().map(|l| (l.inp, l.out, l.w.len(), l.b.len())).collect::<Vec<_>>();
        if shape(&fresh.params.candidate) != shape(&self.params.candidate)
            || shape(&fresh.params.tree) != shape(&self.params.tree)
        {
            return Err(NetError::InvalidSpec("layer shapes do not match the spec".into()));
        }
        Ok(())
    }

    fn gates(&self, tree: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut pre = Vec::with_capacity(self.params.tree.len());
        let mut a = tree.to_vec();
        let last = self.params.tree.len() - 1;
        for (i, layer) in self.params.tree.iter().enumerate() {
            let z = layer.apply(&a);
            a = z.clone();
            if i < last {
                relu(&mut a);
            }
            pre.push(z);
        }
        let g = pre[last].iter().map(|&z| sigmoid(z)).collect();
        (pre, g)
    }

    fn candidate_pass(&self, columns: &[[f64; CANDIDATE_DIM]], gates: Option<&[f64]>) -> (Vec<CandidateTrace>, Vec<f64>) {
        let n_layers = self.params.candidate.len();
        let mut traces = Vec::with_capacity(columns.len());
        let mut logits = Vec::with_capacity(columns.len());
        for col in columns {
            let mut a: Vec<f64> = col.to_vec();
            let mut tr = CandidateTrace { pre: Vec::with_capacity(n_layers), out: Vec::with_capacity(n_layers) };
            let mut offset = 0;
            for (l, layer) in self.params.candidate.iter().enumerate() {
                let z = layer.apply(&a);
                a = z.clone();
                if l + 1 < n_layers {
                    relu(&mut a);
                }
                if let Some(g) = gates {
                    for (v, gv) in a.iter_mut().zip(&g[offset..offset + layer.out]) {
                        *v *= gv;
                    }
                }
                offset += layer.out;
                tr.pre.push(z);
                tr.out.push(a.clone());
            }
            logits.push(a.iter().sum::<f64>() / a.len() as f64);
            traces.push(tr);
        }
        (traces, logits)
    }

    pub fn forward(&self, c: &CandidateMatrix, tree: Option<&TreeState>) -> Result<ForwardTrace, NetError> {
        if c.is_empty() {
            return Err(NetError::NoCandidates);
        }
        let (tree_pre, gates) = match (self.spec.kind, tree) {
            (NetKind::TreeGate, Some(t)) => {
                if t.values.len() != TREE_DIM {
                    return Err(NetError::TreeShape(t.values.len()));
                }
                let (pre, g) = self.gates(&t.values);
                (pre, Some(g))
            }
            (NetKind::TreeGate, None) => return Err(NetError::TreeMissing),
            (NetKind::NoTree, Some(_)) => return Err(NetError::TreeUnexpected),
            (NetKind::NoTree, None) => (Vec::new(), None),
        };
        let (candidates, logits) = self.candidate_pass(&c.columns, gates.as_deref());
        let probabilities = softmax(&logits);
        Ok(ForwardTrace { candidates, tree_pre, gates, logits, probabilities })
    }

    /// Candidate path with every gate forced to 1, bypassing the tree path.
    pub fn forward_unit_gates(&self, c: &CandidateMatrix) -> Result<ForwardTrace, NetError> {
        if c.is_empty() {
            return Err(NetError::NoCandidates);
        }
        let ones = vec![1.0; self.spec.gate_dim()];
        let (candidates, logits) = self.candidate_pass(&c.columns, Some(&ones));
        let probabilities = softmax(&logits);
        Ok(ForwardTrace { candidates, tree_pre: Vec::new(), gates: Some(ones), logits, probabilities })
    }

    /// Forward pass feeding the tree state only when the architecture uses it.
    pub fn forward_auto(&self, c: &CandidateMatrix, tree: &TreeState) -> Result<ForwardTrace, NetError> {
        self.forward(c, self.spec.kind.uses_tree().then_some(tree))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[[f64; CANDIDATE_DIM]]) -> CandidateMatrix {
        CandidateMatrix { columns: cols.to_vec(), candidates: (0..cols.len()).collect(), step: 0 }
    }

    #[test]
    fn layer_schedule() {
        let s = NetSpec::new(NetKind::TreeGate, 128, 2).unwrap();
        assert_eq!(s.candidate_layers(), vec![128, 64, 32, 16, 8]);
        assert_eq!(s.gate_dim(), 248);
        let s = NetSpec::new(NetKind::NoTree, 64, 0).unwrap();
        assert_eq!(s.candidate_layers(), vec![64, 32, 16, 8]);
        assert_eq!(s.gate_dim(), 120);
        assert!(NetSpec::new(NetKind::NoTree, 48, 0).is_err());
        assert!(NetSpec::new(NetKind::TreeGate, 32, 0).is_err());
    }

    #[test]
    fn param_count_matches_shapes() {
        for h in HIDDEN_GRID {
            for d in DEPTH_GRID {
                for kind in [NetKind::NoTree, NetKind::TreeGate] {
                    let spec = NetSpec::new(kind, h, d).unwrap();
                    let net = PolicyNet::new(spec, 1).unwrap();
                    assert_eq!(net.param_count(), spec.param_count());
                }
            }
        }
    }

    #[test]
    fn single_candidate_is_certain() {
        let net = PolicyNet::new(NetSpec::new(NetKind::NoTree, 32, 0).unwrap(), 3).unwrap();
        let t = net.forward(&matrix(&[[0.3; CANDIDATE_DIM]]), None).unwrap();
        assert_eq!(t.probabilities, vec![1.0]);
    }

    #[test]
    fn duplicate_columns_share_probability() {
        let net = PolicyNet::new(NetSpec::new(NetKind::NoTree, 32, 0).unwrap(), 4).unwrap();
        let mut b = [0.0; CANDIDATE_DIM];
        b[3] = 1.0;
        let t = net.forward(&matrix(&[[0.2; CANDIDATE_DIM], b, [0.2; CANDIDATE_DIM]]), None).unwrap();
        assert_eq!(t.probabilities[0], t.probabilities[2]);
        assert!((t.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tree_argument_checked() {
        let tg = PolicyNet::new(NetSpec::new(NetKind::TreeGate, 32, 2).unwrap(), 0).unwrap();
        let c = matrix(&[[0.0; CANDIDATE_DIM]]);
        assert_eq!(tg.forward(&c, None).unwrap_err(), NetError::TreeMissing);
        let short = TreeState { values: vec![0.0; 10], step: 0 };
        assert_eq!(tg.forward(&c, Some(&short)).unwrap_err(), NetError::TreeShape(10));
        let nt = PolicyNet::new(NetSpec::new(NetKind::NoTree, 32, 0).unwrap(), 0).unwrap();
        let tree = TreeState { values: vec![0.0; TREE_DIM], step: 0 };
        assert_eq!(nt.forward(&c, Some(&tree)).unwrap_err(), NetError::TreeUnexpected);
        assert_eq!(nt.forward(&matrix(&[]), None).unwrap_err(), NetError::NoCandidates);
    }

    #[test]
    fn gates_lie_in_open_interval() {
        let tg = PolicyNet::new(NetSpec::new(NetKind::TreeGate, 32, 3).unwrap(), 9).unwrap();
        let tree = TreeState { values: (0..TREE_DIM).map(|i| i as f64 / 61.0).collect(), step: 0 };
        let t = tg.forward(&matrix(&[[0.5; CANDIDATE_DIM]; 3]), Some(&tree)).unwrap();
        let g = t.gates.unwrap();
        assert_eq!(g.len(), 56);
        assert!(g.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn flat_roundtrip() {
        let mut net = PolicyNet::new(NetSpec::new(NetKind::TreeGate, 32, 2).unwrap(), 5).unwrap();
        let flat = net.params.flat();
        let mut doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        net.params.set_flat(&doubled).unwrap();
        assert_eq!(net.params.flat(), doubled);
        doubled.pop();
        assert!(net.params.set_flat(&doubled).is_err());
    }
}
