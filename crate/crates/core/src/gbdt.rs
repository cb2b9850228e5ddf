//! Multiclass gradient-boosted decision trees.
//!
//! Softmax boosting: every round fits one regression tree per class to the
//! gradient of the multiclass log-loss, with Newton leaf values
//! `-Σg / (Σh + λ)` scaled by the learning rate. Splits are found by exact
//! greedy search over each feature's sorted unique values. A split sends
//! `x <= threshold` left, with the threshold halfway between the two
//! adjacent training values it separates, so a strictly increasing
//! transform of a column partitions the training rows identically.
//!
//! A split is taken at zero gain (XOR-like parity needs it at the root);
//! with `λ > 0` splitting a pure node always has negative gain.
//!
//! If a round would raise the training loss, its trees are shrunk by
//! halving until it does not, so the recorded loss curve never increases.

use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAGIC: [u8; 4] = *b"PLGB";
pub const FORMAT_VERSION: u16 = 1;
const PRIOR_FLOOR: f64 = 1e-6;
const HESS_FLOOR: f64 = 1e-16;
const MAX_HALVINGS: u32 = 40;

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("input has {got} features, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("model format: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
    feature_mask: Vec<usize>,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
        feature_mask: Vec<usize>,
    ) -> Result<Self, GbdtError> {
        let err = |m: String| Err(GbdtError::Dataset(m));
        if rows.is_empty() {
            return err("no rows".into());
        }
        if rows.len() != labels.len() {
            return err(format!("{} rows but {} labels", rows.len(), labels.len()));
        }
        if n_classes == 0 {
            return err("n_classes must be at least 1".into());
        }
        let dim = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return err(format!("row {i} has {} features, expected {dim}", rows[i].len()));
        }
        if let Some(i) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return err(format!("row {i} has a non-finite feature"));
        }
        if let Some(&c) = labels.iter().find(|&&c| c >= n_classes) {
            return err(format!("class {c} out of range for {n_classes} classes"));
        }
        if let Some(&f) = feature_mask.iter().find(|&&f| f >= dim) {
            return err(format!("mask column {f} out of range for {dim} features"));
        }
        Ok(Dataset { rows, labels, n_classes, feature_mask })
    }

    /// Dataset over every column.
    pub fn unmasked(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self, GbdtError> {
        let dim = rows.first().map_or(0, Vec::len);
        Self::new(rows, labels, n_classes, (0..dim).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_mask(&self) -> &[usize] {
        &self.feature_mask
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub subsample: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { n_rounds: 200, max_depth: 3, learning_rate: 0.1, min_leaf: 5, subsample: 1.0, lambda: 1.0, seed: 0 }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let err = |m: &str| Err(GbdtError::Params(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return err("learning_rate must be in (0, 1]");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return err("subsample must be in (0, 1]");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return err("lambda must be non-negative");
        }
        if self.min_leaf == 0 {
            return err("min_leaf must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Nodes in creation order; the root is node 0 and children always follow
/// their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn constant(value: f64) -> Self {
        Tree { nodes: vec![Node::Leaf { value }] }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn scale(&mut self, k: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= k;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    n_classes: usize,
    n_features: usize,
    base_scores: Vec<f64>,
    feature_mask: Vec<usize>,
    /// `trees[round][class]`, leaf values already include the learning rate.
    trees: Vec<Vec<Tree>>,
    params: TrainParams,
    loss_curve: Vec<f64>,
}

impl GbdtModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn params(&self) -> &TrainParams {
        &self.params
    }

    pub fn feature_mask(&self) -> &[usize] {
        &self.feature_mask
    }

    pub fn base_scores(&self) -> &[f64] {
        &self.base_scores
    }

    pub fn trees(&self) -> &[Vec<Tree>] {
        &self.trees
    }

    /// Training loss before the first round and after every round.
    pub fn loss_curve(&self) -> &[f64] {
        &self.loss_curve
    }

    /// Model with only class log-priors and no trees.
    pub fn from_priors(counts: &[usize], n_features: usize, params: TrainParams) -> Self {
        let total: usize = counts.iter().sum();
        let base_scores = counts
            .iter()
            .map(|&c| (c as f64 / total.max(1) as f64).max(PRIOR_FLOOR).ln())
            .collect();
        GbdtModel {
            n_classes: counts.len(),
            n_features,
            base_scores,
            feature_mask: (0..n_features).collect(),
            trees: Vec::new(),
            params,
            loss_curve: Vec::new(),
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), GbdtError> {
        if v.len() != self.n_features {
            return Err(GbdtError::Dimension { expected: self.n_features, got: v.len() });
        }
        Ok(())
    }

    pub fn raw_scores(&self, v: &[f64]) -> Result<Vec<f64>, GbdtError> {
        self.check_dim(v)?;
        let mut scores = self.base_scores.clone();
        for round in &self.trees {
            for (s, tree) in scores.iter_mut().zip(round) {
                *s += tree.predict(v);
            }
        }
        Ok(scores)
    }

    pub fn predict_proba(&self, v: &[f64]) -> Result<Vec<f64>, GbdtError> {
        let mut s = self.raw_scores(v)?;
        softmax_in_place(&mut s);
        Ok(s)
    }

    /// Argmax of [`predict_proba`](Self::predict_proba); ties go to the lowest index.
    pub fn predict_class(&self, v: &[f64]) -> Result<usize, GbdtError> {
        let p = self.predict_proba(v)?;
        Ok(argmax(&p))
    }
}

/// A value in `[lo, hi)` that splits the two; `lo` when they are adjacent floats.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi { m } else { lo }
}

/// Gains equal up to summation rounding count as ties, so the earlier
/// candidate (lower feature, then lower threshold) keeps its place.
const GAIN_TIE_REL: f64 = 1e-9;

fn beats(gain: f64, best: Option<Candidate>) -> bool {
    match best {
        None => gain >= 0.0,
        Some(b) => gain > b.gain + GAIN_TIE_REL * b.gain.abs(),
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in s.iter_mut() {
        *v /= sum;
    }
}

fn mean_log_loss(scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, &y)| {
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - s[y]
        })
        .sum();
    total / labels.len() as f64
}

/// Per-leaf accumulator used while scanning a feature.
#[derive(Clone, Copy)]
struct Scan {
    g: f64,
    h: f64,
    n: usize,
    last: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy)]
struct OpenLeaf {
    node: usize,
    g: f64,
    h: f64,
    n: usize,
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    /// Presorted row order for each usable feature.
    orders: &'a [(usize, Vec<u32>)],
    params: &'a TrainParams,
}

impl TreeBuilder<'_> {
    fn build(&self, grad: &[f64], hess: &[f64], in_bag: &[bool]) -> Tree {
        let lambda = self.params.lambda;
        let eta = self.params.learning_rate;
        let n = self.data.len();
        const OFF: usize = usize::MAX;

        let mut slot = vec![OFF; n];
        let (mut g0, mut h0, mut n0) = (0.0, 0.0, 0);
        for i in 0..n {
            if in_bag[i] {
                slot[i] = 0;
                g0 += grad[i];
                h0 += hess[i];
                n0 += 1;
            }
        }
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut open = vec![OpenLeaf { node: 0, g: g0, h: h0, n: n0 }];
        let mut finished: Vec<OpenLeaf> = Vec::new();

        for _depth in 0..self.params.max_depth {
            if open.is_empty() {
                break;
            }
            let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
            let mut scans = vec![Scan { g: 0.0, h: 0.0, n: 0, last: f64::NAN }; open.len()];
            for (feature, order) in self.orders {
                scans.iter_mut().for_each(|s| *s = Scan { g: 0.0, h: 0.0, n: 0, last: f64::NAN });
                for &row in order {
                    let row = row as usize;
                    let s = slot[row];
                    if s == OFF {
                        continue;
                    }
                    let x = self.data.rows[row][*feature];
                    let sc = &mut scans[s];
                    if sc.n > 0 && x > sc.last {
                        let leaf = &open[s];
                        let (nl, nr) = (sc.n, leaf.n - sc.n);
                        if nl >= self.params.min_leaf && nr >= self.params.min_leaf {
                            let (gr, hr) = (leaf.g - sc.g, leaf.h - sc.h);
                            let gain = sc.g * sc.g / (sc.h + lambda) + gr * gr / (hr + lambda)
                                - leaf.g * leaf.g / (leaf.h + lambda);
                            if beats(gain, best[s]) {
                                best[s] = Some(Candidate { gain, feature: *feature, threshold: midpoint(sc.last, x) });
                            }
                        }
                    }
                    sc.g += grad[row];
                    sc.h += hess[row];
                    sc.n += 1;
                    sc.last = x;
                }
            }

            // Map old slot -> (left slot, right slot) in the next level.
            let mut next_open = Vec::new();
            let mut route: Vec<Option<(Candidate, usize)>> = vec![None; open.len()];
            for (s, leaf) in open.iter().enumerate() {
                match best[s] {
                    Some(c) => {
                        let left = nodes.len();
                        nodes.push(Node::Leaf { value: 0.0 });
                        nodes.push(Node::Leaf { value: 0.0 });
                        nodes[leaf.node] =
                            Node::Split { feature: c.feature, threshold: c.threshold, left, right: left + 1 };
                        route[s] = Some((c, next_open.len()));
                        next_open.push(OpenLeaf { node: left, g: 0.0, h: 0.0, n: 0 });
                        next_open.push(OpenLeaf { node: left + 1, g: 0.0, h: 0.0, n: 0 });
                    }
                    None => finished.push(*leaf),
                }
            }
            for i in 0..n {
                let s = slot[i];
                if s == OFF {
                    continue;
                }
                match route[s] {
                    Some((c, base)) => {
                        let child = if self.data.rows[i][c.feature] <= c.threshold { base } else { base + 1 };
                        slot[i] = child;
                        let leaf = &mut next_open[child];
                        leaf.g += grad[i];
                        leaf.h += hess[i];
                        leaf.n += 1;
                    }
                    None => slot[i] = OFF,
                }
            }
            open = next_open;
        }
        finished.extend(open);
        for leaf in finished {
            nodes[leaf.node] = Node::Leaf { value: -leaf.g / (leaf.h + lambda) * eta };
        }
        Tree { nodes }
    }
}

/// Fit a softmax GBDT. Deterministic for a fixed `params.seed`.
pub fn train(data: &Dataset, params: &TrainParams) -> Result<GbdtModel, GbdtError> {
    params.validate()?;
    let n = data.len();
    let k = data.n_classes;
    let mut counts = vec![0usize; k];
    for &y in &data.labels {
        counts[y] += 1;
    }
    let mut model = GbdtModel::from_priors(&counts, data.n_features(), *params);
    model.feature_mask = data.feature_mask.clone();

    // Constant columns can never split; leave them out of the scan.
    let orders: Vec<(usize, Vec<u32>)> = data
        .feature_mask
        .iter()
        .filter(|&&f| data.rows.iter().any(|r| r[f] != data.rows[0][f]))
        .map(|&f| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| data.rows[a as usize][f].total_cmp(&data.rows[b as usize][f]).then(a.cmp(&b)));
            (f, order)
        })
        .collect();
    let builder = TreeBuilder { data, orders: &orders, params };

    let mut scores: Vec<Vec<f64>> = vec![model.base_scores.clone(); n];
    let mut loss = mean_log_loss(&scores, &data.labels);
    model.loss_curve.push(loss);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut probs = vec![vec![0.0; k]; n];
    for _round in 0..params.n_rounds {
        let in_bag = if params.subsample < 1.0 {
            let take = ((n as f64 * params.subsample).round() as usize).clamp(1, n);
            let mut mask = vec![false; n];
            for i in sample(&mut rng, n, take) {
                mask[i] = true;
            }
            mask
        } else {
            vec![true; n]
        };
        for (p, s) in probs.iter_mut().zip(&scores) {
            p.copy_from_slice(s);
            softmax_in_place(p);
        }
        let mut round_trees = Vec::with_capacity(k);
        for c in 0..k {
            for i in 0..n {
                let p = probs[i][c];
                let y = if data.labels[i] == c { 1.0 } else { 0.0 };
                grad[i] = p - y;
                hess[i] = (p * (1.0 - p)).max(HESS_FLOOR);
            }
            round_trees.push(if k == 1 { Tree::constant(0.0) } else { builder.build(&grad, &hess, &in_bag) });
        }

        let deltas: Vec<Vec<f64>> =
            data.rows.iter().map(|r| round_trees.iter().map(|t| t.predict(r)).collect()).collect();
        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let trial: Vec<Vec<f64>> = scores
                .iter()
                .zip(&deltas)
                .map(|(s, d)| s.iter().zip(d).map(|(a, b)| a + step * b).collect())
                .collect();
            let trial_loss = mean_log_loss(&trial, &data.labels);
            if trial_loss <= loss {
                scores = trial;
                loss = trial_loss;
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                step = 0.0;
                break;
            }
            step *= 0.5;
        }
        if step != 1.0 {
            round_trees.iter_mut().for_each(|t| t.scale(step));
        }
        model.trees.push(round_trees);
        model.loss_curve.push(loss);
    }
    Ok(model)
}

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.0.write_all(&[v])
    }
    fn u16(&mut self, v: u16) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u32(&mut self, v: usize) -> std::io::Result<()> {
        self.0.write_all(&(v as u32).to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
}

struct In<R: Read>(R);

impl<R: Read> In<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], GbdtError> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => GbdtError::Format("truncated model stream".into()),
            _ => GbdtError::Io(e),
        })?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8, GbdtError> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16, GbdtError> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }
    fn u32(&mut self) -> Result<usize, GbdtError> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }
    fn u64(&mut self) -> Result<u64, GbdtError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64, GbdtError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    /// Length prefix, bounded so a corrupt header cannot trigger a huge allocation.
    fn len(&mut self, limit: usize, what: &str) -> Result<usize, GbdtError> {
        let n = self.u32()?;
        if n > limit {
            return Err(GbdtError::Format(format!("{what} count {n} exceeds {limit}")));
        }
        Ok(n)
    }
}

const LIMIT: usize = 1 << 24;

/// Binary model format, little-endian:
///
/// ```text
/// "PLGB" u16:version
/// u32:n_classes u32:n_features
/// u32:n_rounds u32:max_depth f64:learning_rate u32:min_leaf f64:subsample f64:lambda u64:seed
/// u32:mask_len  u32*:mask
/// f64*n_classes: base scores
/// u32:curve_len f64*:loss curve
/// u32:rounds, then per round and class: u32:node_count, nodes as
///     u8:0 f64:value                                   (leaf)
///     u8:1 u32:feature f64:threshold u32:left u32:right  (split)
/// ```
pub fn save_model<W: Write>(m: &GbdtModel, w: W) -> Result<(), GbdtError> {
    let mut o = Out(w);
    o.0.write_all(&MAGIC)?;
    o.u16(FORMAT_VERSION)?;
    o.u32(m.n_classes)?;
    o.u32(m.n_features)?;
    let p = &m.params;
    o.u32(p.n_rounds)?;
    o.u32(p.max_depth)?;
    o.f64(p.learning_rate)?;
    o.u32(p.min_leaf)?;
    o.f64(p.subsample)?;
    o.f64(p.lambda)?;
    o.u64(p.seed)?;
    o.u32(m.feature_mask.len())?;
    for &f in &m.feature_mask {
        o.u32(f)?;
    }
    for &b in &m.base_scores {
        o.f64(b)?;
    }
    o.u32(m.loss_curve.len())?;
    for &l in &m.loss_curve {
        o.f64(l)?;
    }
    o.u32(m.trees.len())?;
    for round in &m.trees {
        for tree in round {
            o.u32(tree.nodes.len())?;
            for node in &tree.nodes {
                match *node {
                    Node::Leaf { value } => {
                        o.u8(0)?;
                        o.f64(value)?;
                    }
                    Node::Split { feature, threshold, left, right } => {
                        o.u8(1)?;
                        o.u32(feature)?;
                        o.f64(threshold)?;
                        o.u32(left)?;
                        o.u32(right)?;
                    }
                }
            }
        }
    }
    o.0.flush()?;
    Ok(())
}

pub fn load_model<R: Read>(r: R) -> Result<GbdtModel, GbdtError> {
    let mut i = In(r);
    let magic: [u8; 4] = i.bytes()?;
    if magic != MAGIC {
        return Err(GbdtError::Format("bad magic bytes".into()));
    }
    let version = i.u16()?;
    if version != FORMAT_VERSION {
        return Err(GbdtError::Format(format!("unsupported version {version}, expected {FORMAT_VERSION}")));
    }
    let n_classes = i.len(1 << 16, "class")?;
    let n_features = i.len(LIMIT, "feature")?;
    if n_classes == 0 {
        return Err(GbdtError::Format("zero classes".into()));
    }
    let params = TrainParams {
        n_rounds: i.u32()?,
        max_depth: i.u32()?,
        learning_rate: i.f64()?,
        min_leaf: i.u32()?,
        subsample: i.f64()?,
        lambda: i.f64()?,
        seed: i.u64()?,
    };
    let mask_len = i.len(LIMIT, "mask")?;
    let feature_mask = (0..mask_len).map(|_| i.u32()).collect::<Result<Vec<_>, _>>()?;
    if feature_mask.iter().any(|&f| f >= n_features) {
        return Err(GbdtError::Format("mask column out of range".into()));
    }
    let base_scores = (0..n_classes).map(|_| i.f64()).collect::<Result<Vec<_>, _>>()?;
    let curve_len = i.len(LIMIT, "loss curve")?;
    let loss_curve = (0..curve_len).map(|_| i.f64()).collect::<Result<Vec<_>, _>>()?;
    let rounds = i.len(LIMIT, "round")?;
    let mut trees = Vec::with_capacity(rounds.min(4096));
    for _ in 0..rounds {
        let mut round = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let count = i.len(LIMIT, "node")?;
            if count == 0 {
                return Err(GbdtError::Format("empty tree".into()));
            }
            let mut nodes = Vec::with_capacity(count.min(4096));
            for idx in 0..count {
                nodes.push(match i.u8()? {
                    0 => Node::Leaf { value: i.f64()? },
                    1 => {
                        let (feature, threshold, left, right) = (i.u32()?, i.f64()?, i.u32()?, i.u32()?);
                        if feature >= n_features || left <= idx || right <= idx || left >= count || right >= count {
                            return Err(GbdtError::Format(format!("invalid split node {idx}")));
                        }
                        Node::Split { feature, threshold, left, right }
                    }
                    t => return Err(GbdtError::Format(format!("unknown node tag {t}"))),
                });
            }
            round.push(Tree { nodes });
        }
        trees.push(round);
    }
    let mut trailing = [0u8; 1];
    if i.0.read(&mut trailing)? != 0 {
        return Err(GbdtError::Format("trailing bytes after model".into()));
    }
    Ok(GbdtModel { n_classes, n_features, base_scores, feature_mask, trees, params, loss_curve })
}
