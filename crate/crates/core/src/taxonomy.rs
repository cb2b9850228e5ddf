//! The movement-taxonomy cascade.
//!
//! Six binary GBDT nodes: layer (XY vs Z), axial (X vs Y), one direction
//! node per axis, header (printing vs positioning) and speed (slow vs fast).
//! A frame is routed layer → axial → direction, while header and speed are
//! always evaluated, so at most five nodes run per frame and a label never
//! carries a direction inconsistent with its axis.

use std::fmt::{self, Write as _};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureConfig, FeatureLayout, FeatureVector, MfccConfig};
use crate::gbdt::{self, Dataset, GbdtError, GbdtModel, TrainParams};
use crate::gcode::{Axis, Direction, Header, MovementLabel, Plane, SpeedClass};

const MAGIC: [u8; 4] = *b"PLCS";
pub const CASCADE_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("{node} missing class {class}")]
    MissingClass { node: NodeKind, class: &'static str },
    #[error("{0} frames but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("feature vector has {got} values, cascade expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid cascade parameters: {0}")]
    Params(String),
    #[error("cascade file: {0}")]
    Format(String),
    #[error("{node}: {source}")]
    Node { node: NodeKind, source: GbdtError },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Layer,
    Axial,
    DirX,
    DirY,
    Header,
    Speed,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] =
        [NodeKind::Layer, NodeKind::Axial, NodeKind::DirX, NodeKind::DirY, NodeKind::Header, NodeKind::Speed];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Layer => "layer",
            NodeKind::Axial => "axial",
            NodeKind::DirX => "dir_x",
            NodeKind::DirY => "dir_y",
            NodeKind::Header => "header",
            NodeKind::Speed => "speed",
        }
    }

    pub fn class_names(self) -> [&'static str; 2] {
        match self {
            NodeKind::Layer => ["XY", "Z"],
            NodeKind::Axial => ["X", "Y"],
            NodeKind::DirX => ["XLeft", "XRight"],
            NodeKind::DirY => ["YUp", "YDown"],
            NodeKind::Header => ["Printing", "Positioning"],
            NodeKind::Speed => ["Slow", "Fast"],
        }
    }

    /// Class index of a ground-truth label at this node, or `None` when the
    /// node does not apply to it.
    pub fn target(self, l: &MovementLabel) -> Option<usize> {
        match self {
            NodeKind::Layer => Some(usize::from(l.plane() == Plane::Z)),
            NodeKind::Axial => l.axis().map(|a| usize::from(a == Axis::Y)),
            NodeKind::DirX => match l.direction() {
                Some(Direction::XLeft) => Some(0),
                Some(Direction::XRight) => Some(1),
                _ => None,
            },
            NodeKind::DirY => match l.direction() {
                Some(Direction::YUp) => Some(0),
                Some(Direction::YDown) => Some(1),
                _ => None,
            },
            NodeKind::Header => Some(usize::from(l.header() == Header::Positioning)),
            NodeKind::Speed => Some(usize::from(l.speed() == SpeedClass::Fast)),
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn from_index(i: u8) -> Option<Self> {
        NodeKind::ALL.get(i as usize).copied()
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Acoustic,
    Magnetic,
    Both,
}

impl FeatureSet {
    pub fn columns(self, layout: FeatureLayout) -> Vec<usize> {
        match self {
            FeatureSet::Acoustic => layout.acoustic(),
            FeatureSet::Magnetic => layout.magnetic(),
            FeatureSet::Both => layout.all(),
        }
    }

    fn code(self) -> u8 {
        match self {
            FeatureSet::Acoustic => 0,
            FeatureSet::Magnetic => 1,
            FeatureSet::Both => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        [FeatureSet::Acoustic, FeatureSet::Magnetic, FeatureSet::Both].get(c as usize).copied()
    }
}

/// Which channel each node trains on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeFeatures {
    pub layer: FeatureSet,
    pub axial: FeatureSet,
    pub dir_x: FeatureSet,
    pub dir_y: FeatureSet,
    pub header: FeatureSet,
    pub speed: FeatureSet,
}

impl Default for NodeFeatures {
    fn default() -> Self {
        NodeFeatures {
            layer: FeatureSet::Both,
            axial: FeatureSet::Magnetic,
            dir_x: FeatureSet::Magnetic,
            dir_y: FeatureSet::Magnetic,
            header: FeatureSet::Acoustic,
            speed: FeatureSet::Acoustic,
        }
    }
}

impl NodeFeatures {
    pub fn get(&self, node: NodeKind) -> FeatureSet {
        match node {
            NodeKind::Layer => self.layer,
            NodeKind::Axial => self.axial,
            NodeKind::DirX => self.dir_x,
            NodeKind::DirY => self.dir_y,
            NodeKind::Header => self.header,
            NodeKind::Speed => self.speed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeParams {
    pub gbdt: TrainParams,
    /// Share of each node's frames used for training; the rest is held out.
    pub train_fraction: f64,
    pub features: NodeFeatures,
}

impl Default for CascadeParams {
    fn default() -> Self {
        CascadeParams { gbdt: TrainParams::default(), train_fraction: 0.25, features: NodeFeatures::default() }
    }
}

/// 2×2 confusion counts, `counts[truth][predicted]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub counts: [[u64; 2]; 2],
}

impl Confusion {
    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Correct over total; 1.0 when empty.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 1.0,
            t => self.correct() as f64 / t as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNode {
    pub kind: NodeKind,
    pub features: FeatureSet,
    pub model: GbdtModel,
    pub n_train: usize,
    pub n_test: usize,
    /// Held-out confusion counts.
    pub held_out: Confusion,
}

impl TrainedNode {
    pub fn accuracy(&self) -> f64 {
        self.held_out.accuracy()
    }

    fn predict(&self, v: &[f64]) -> usize {
        self.model.predict_class(v).expect("dimension checked by cascade")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub feature_config: FeatureConfig,
    pub train_fraction: f64,
    nodes: Vec<TrainedNode>,
}

impl CascadeModel {
    pub fn node(&self, kind: NodeKind) -> &TrainedNode {
        &self.nodes[kind.index()]
    }

    pub fn nodes(&self) -> &[TrainedNode] {
        &self.nodes
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(self.feature_config.mfcc.n_coeffs)
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.nodes.iter().map(TrainedNode::accuracy).sum::<f64>() / self.nodes.len() as f64
    }

    fn check(&self, v: &FeatureVector) -> Result<(), CascadeError> {
        let expected = self.layout().dimension();
        if v.values.len() != expected {
            return Err(CascadeError::Dimension { expected, got: v.values.len() });
        }
        Ok(())
    }

    /// Label a frame and list the nodes consulted, in order.
    pub fn route(&self, v: &FeatureVector) -> Result<(MovementLabel, Vec<NodeKind>), CascadeError> {
        self.check(v)?;
        let x = &v.values;
        let mut visited = vec![NodeKind::Layer];
        let is_z = self.node(NodeKind::Layer).predict(x) == 1;
        let direction = if is_z {
            None
        } else {
            visited.push(NodeKind::Axial);
            let (node, options) = if self.node(NodeKind::Axial).predict(x) == 0 {
                (NodeKind::DirX, [Direction::XLeft, Direction::XRight])
            } else {
                (NodeKind::DirY, [Direction::YUp, Direction::YDown])
            };
            visited.push(node);
            Some(options[self.node(node).predict(x)])
        };
        visited.extend([NodeKind::Header, NodeKind::Speed]);
        let header = [Header::Printing, Header::Positioning][self.node(NodeKind::Header).predict(x)];
        let speed = [SpeedClass::Slow, SpeedClass::Fast][self.node(NodeKind::Speed).predict(x)];
        let label = match direction {
            Some(d) => MovementLabel::xy(d, header, speed),
            None => MovementLabel::z(header, speed),
        };
        Ok((label, visited))
    }

    pub fn classify_frame(&self, v: &FeatureVector) -> Result<MovementLabel, CascadeError> {
        Ok(self.route(v)?.0)
    }

    pub fn classify_frames(&self, vs: &[FeatureVector]) -> Result<Vec<MovementLabel>, CascadeError> {
        vs.par_iter().map(|v| self.classify_frame(v)).collect()
    }
}

fn stratified_split(indices: &[usize], targets: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in 0..2 {
        let mut members: Vec<usize> =
            indices.iter().zip(targets).filter(|(_, &t)| t == class).map(|(&i, _)| i).collect();
        members.shuffle(&mut rng);
        let mut take = (members.len() as f64 * fraction).round() as usize;
        take = take.clamp(1, members.len());
        if take == members.len() && members.len() > 1 {
            take -= 1;
        }
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn train_node(
    kind: NodeKind,
    vectors: &[FeatureVector],
    labels: &[MovementLabel],
    layout: FeatureLayout,
    params: &CascadeParams,
) -> Result<TrainedNode, CascadeError> {
    let (indices, targets): (Vec<usize>, Vec<usize>) =
        labels.iter().enumerate().filter_map(|(i, l)| kind.target(l).map(|t| (i, t))).unzip();
    for class in 0..2 {
        if !targets.contains(&class) {
            return Err(CascadeError::MissingClass { node: kind, class: kind.class_names()[class] });
        }
    }
    let split_seed = params.gbdt.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(kind.index() as u64 + 1));
    let (train, test) = stratified_split(&indices, &targets, params.train_fraction, split_seed);
    let features = params.features.get(kind);
    let data = Dataset::new(
        train.iter().map(|&i| vectors[i].values.clone()).collect(),
        train.iter().map(|&i| kind.target(&labels[i]).expect("relevant")).collect(),
        2,
        features.columns(layout),
    )
    .map_err(|source| CascadeError::Node { node: kind, source })?;
    let model = gbdt::train(&data, &params.gbdt).map_err(|source| CascadeError::Node { node: kind, source })?;
    let mut held_out = Confusion::default();
    for &i in &test {
        let truth = kind.target(&labels[i]).expect("relevant");
        let pred = model.predict_class(&vectors[i].values).map_err(|source| CascadeError::Node { node: kind, source })?;
        held_out.record(truth, pred);
    }
    Ok(TrainedNode { kind, features, model, n_train: train.len(), n_test: test.len(), held_out })
}

/// Train all six nodes, each on the frames it applies to.
pub fn train_cascade(
    vectors: &[FeatureVector],
    labels: &[MovementLabel],
    feature_config: FeatureConfig,
    params: &CascadeParams,
) -> Result<CascadeModel, CascadeError> {
    if vectors.len() != labels.len() {
        return Err(CascadeError::LengthMismatch(vectors.len(), labels.len()));
    }
    if !(params.train_fraction > 0.0 && params.train_fraction < 1.0) {
        return Err(CascadeError::Params(format!("train_fraction {} must be in (0, 1)", params.train_fraction)));
    }
    let layout = FeatureLayout::new(feature_config.mfcc.n_coeffs);
    if let Some(v) = vectors.iter().find(|v| v.values.len() != layout.dimension()) {
        return Err(CascadeError::Dimension { expected: layout.dimension(), got: v.values.len() });
    }
    let nodes = NodeKind::ALL
        .par_iter()
        .map(|&k| train_node(k, vectors, labels, layout, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CascadeModel { feature_config, train_fraction: params.train_fraction, nodes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeEvaluation {
    pub kind: NodeKind,
    pub confusion: Confusion,
}

impl NodeEvaluation {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub nodes: Vec<NodeEvaluation>,
    /// Frames whose full cascade label matched exactly.
    pub exact_matches: u64,
    pub frames: u64,
}

impl EvaluationReport {
    /// Build a report from per-node predictions made independently at every
    /// node, plus full-label predictions.
    pub fn from_predictions(
        truth: &[MovementLabel],
        node_predictions: &[[usize; 6]],
        full: &[MovementLabel],
    ) -> Self {
        let mut nodes: Vec<NodeEvaluation> =
            NodeKind::ALL.iter().map(|&kind| NodeEvaluation { kind, confusion: Confusion::default() }).collect();
        for (t, preds) in truth.iter().zip(node_predictions) {
            for (eval, &p) in nodes.iter_mut().zip(preds) {
                if let Some(target) = eval.kind.target(t) {
                    eval.confusion.record(target, p);
                }
            }
        }
        let exact_matches = truth.iter().zip(full).filter(|(a, b)| a == b).count() as u64;
        EvaluationReport { nodes, exact_matches, frames: truth.len() as u64 }
    }

    pub fn macro_mean(&self) -> f64 {
        self.nodes.iter().map(NodeEvaluation::accuracy).sum::<f64>() / self.nodes.len() as f64
    }

    pub fn node(&self, kind: NodeKind) -> &NodeEvaluation {
        &self.nodes[kind.index()]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,class_0,class_1,tp_00,fn_01,fp_10,tn_11,correct,total,accuracy\n");
        for n in &self.nodes {
            let [a, b] = n.kind.class_names();
            let c = n.confusion.counts;
            let _ = writeln!(
                out,
                "{},{a},{b},{},{},{},{},{},{},{:.6}",
                n.kind,
                c[0][0],
                c[0][1],
                c[1][0],
                c[1][1],
                n.confusion.correct(),
                n.confusion.total(),
                n.accuracy()
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>9} {:>8}  confusion (rows = truth)", "node", "accuracy", "frames");
        for n in &self.nodes {
            let [a, b] = n.kind.class_names();
            let c = n.confusion.counts;
            let _ = writeln!(
                out,
                "{:<8} {:>8.2}% {:>8}  {a}->[{} {}] {b}->[{} {}]",
                n.kind.name(),
                100.0 * n.accuracy(),
                n.confusion.total(),
                c[0][0],
                c[0][1],
                c[1][0],
                c[1][1]
            );
        }
        let _ = writeln!(out, "macro mean {:.2}%", 100.0 * self.macro_mean());
        let _ = writeln!(out, "exact label matches {}/{}", self.exact_matches, self.frames);
        out
    }
}

/// Per-node accuracy of every node on its relevant frames, plus full-label accuracy.
pub fn evaluate_cascade(
    c: &CascadeModel,
    vectors: &[FeatureVector],
    labels: &[MovementLabel],
) -> Result<EvaluationReport, CascadeError> {
    if vectors.len() != labels.len() {
        return Err(CascadeError::LengthMismatch(vectors.len(), labels.len()));
    }
    let per_frame: Vec<([usize; 6], MovementLabel)> = vectors
        .par_iter()
        .map(|v| {
            c.check(v)?;
            let mut preds = [0usize; 6];
            for (p, node) in preds.iter_mut().zip(c.nodes()) {
                *p = node.predict(&v.values);
            }
            Ok((preds, c.classify_frame(v)?))
        })
        .collect::<Result<_, CascadeError>>()?;
    let (preds, full): (Vec<_>, Vec<_>) = per_frame.into_iter().unzip();
    Ok(EvaluationReport::from_predictions(labels, &preds, &full))
}

/// Training-time summary of held-out accuracies.
pub fn training_report(c: &CascadeModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:<9} {:>7} {:>7} {:>9}", "node", "features", "train", "test", "accuracy");
    for n in c.nodes() {
        let _ = writeln!(
            out,
            "{:<8} {:<9} {:>7} {:>7} {:>8.2}%",
            n.kind.name(),
            format!("{:?}", n.features).to_lowercase(),
            n.n_train,
            n.n_test,
            100.0 * n.accuracy()
        );
    }
    let _ = writeln!(out, "mean     {:>35.2}%", 100.0 * c.mean_accuracy());
    out
}

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    w.write_all(&(v as u32).to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

/// Cascade container, little-endian:
///
/// ```text
/// "PLCS" u16:version
/// feature config: u32:n_mels u32:n_coeffs f64:fmin u8:has_fmax f64:fmax f64:log_floor
///                 f64:magnetic_sigma f64:frame_ms
/// f64:train_fraction
/// 6 × node: u8:kind u8:feature_set u32:n_train u32:n_test u64×4:confusion
///           u64:model_len model bytes (gbdt format)
/// ```
pub fn save_cascade<W: Write>(c: &CascadeModel, mut w: W) -> Result<(), CascadeError> {
    w.write_all(&MAGIC)?;
    w.write_all(&CASCADE_VERSION.to_le_bytes())?;
    let f = &c.feature_config;
    put_u32(&mut w, f.mfcc.n_mels)?;
    put_u32(&mut w, f.mfcc.n_coeffs)?;
    put_f64(&mut w, f.mfcc.fmin)?;
    w.write_all(&[u8::from(f.mfcc.fmax.is_some())])?;
    put_f64(&mut w, f.mfcc.fmax.unwrap_or(0.0))?;
    put_f64(&mut w, f.mfcc.log_floor)?;
    put_f64(&mut w, f.magnetic_sigma)?;
    put_f64(&mut w, f.frame_ms)?;
    put_f64(&mut w, c.train_fraction)?;
    for node in &c.nodes {
        w.write_all(&[node.kind.index() as u8, node.features.code()])?;
        put_u32(&mut w, node.n_train)?;
        put_u32(&mut w, node.n_test)?;
        for v in node.held_out.counts.iter().flatten() {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut bytes = Vec::new();
        gbdt::save_model(&node.model, &mut bytes).map_err(|source| CascadeError::Node { node: node.kind, source })?;
        w.write_all(&(bytes.len() as u64).to_le_bytes())?;
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_cascade<R: Read>(mut r: R) -> Result<CascadeModel, CascadeError> {
    let mut take = |n: usize| -> Result<Vec<u8>, CascadeError> {
        let mut b = vec![0u8; n];
        r.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => CascadeError::Format("truncated cascade file".into()),
            _ => CascadeError::Io(e),
        })?;
        Ok(b)
    };
    let u32_ = |b: Vec<u8>| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    let f64_ = |b: Vec<u8>| f64::from_le_bytes(b.try_into().expect("8 bytes"));
    let u64_ = |b: Vec<u8>| u64::from_le_bytes(b.try_into().expect("8 bytes"));

    if take(4)? != MAGIC {
        return Err(CascadeError::Format("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes"));
    if version != CASCADE_VERSION {
        return Err(CascadeError::Format(format!("unsupported version {version}")));
    }
    let n_mels = u32_(take(4)?);
    let n_coeffs = u32_(take(4)?);
    let fmin = f64_(take(8)?);
    let has_fmax = take(1)?[0] != 0;
    let fmax = f64_(take(8)?);
    let log_floor = f64_(take(8)?);
    let magnetic_sigma = f64_(take(8)?);
    let frame_ms = f64_(take(8)?);
    let train_fraction = f64_(take(8)?);
    let feature_config = FeatureConfig {
        mfcc: MfccConfig { n_mels, n_coeffs, fmin, fmax: has_fmax.then_some(fmax), log_floor },
        magnetic_sigma,
        frame_ms,
    };
    let dim = FeatureLayout::new(n_coeffs).dimension();
    let mut nodes = Vec::with_capacity(6);
    for expected in NodeKind::ALL {
        let head = take(2)?;
        let kind = NodeKind::from_index(head[0]).filter(|k| *k == expected);
        let features = FeatureSet::from_code(head[1]);
        let (Some(kind), Some(features)) = (kind, features) else {
            return Err(CascadeError::Format(format!("bad header for node {expected}")));
        };
        let n_train = u32_(take(4)?);
        let n_test = u32_(take(4)?);
        let mut held_out = Confusion::default();
        for v in held_out.counts.iter_mut().flatten() {
            *v = u64_(take(8)?);
        }
        let len = u64_(take(8)?);
        if len > 1 << 32 {
            return Err(CascadeError::Format(format!("node {kind} model length {len} is implausible")));
        }
        let model =
            gbdt::load_model(&take(len as usize)?[..]).map_err(|source| CascadeError::Node { node: kind, source })?;
        if model.n_features() != dim || model.n_classes() != 2 {
            return Err(CascadeError::Format(format!("node {kind} model shape does not match the feature layout")));
        }
        nodes.push(TrainedNode { kind, features, model, n_train, n_test, held_out });
    }
    Ok(CascadeModel { feature_config, train_fraction, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_follow_taxonomy() {
        let l = MovementLabel::xy(Direction::YDown, Header::Printing, SpeedClass::Fast);
        assert_eq!(NodeKind::Layer.target(&l), Some(0));
        assert_eq!(NodeKind::Axial.target(&l), Some(1));
        assert_eq!(NodeKind::DirX.target(&l), None);
        assert_eq!(NodeKind::DirY.target(&l), Some(1));
        assert_eq!(NodeKind::Header.target(&l), Some(0));
        assert_eq!(NodeKind::Speed.target(&l), Some(1));
        let z = MovementLabel::z(Header::Positioning, SpeedClass::Slow);
        assert_eq!(NodeKind::Layer.target(&z), Some(1));
        assert_eq!(NodeKind::Axial.target(&z), None);
    }

    #[test]
    fn confusion_arithmetic() {
        let mut c = Confusion::default();
        for _ in 0..99 {
            c.record(1, 1);
        }
        c.record(1, 0);
        assert_eq!(c.accuracy(), 0.99);
        assert_eq!(Confusion::default().accuracy(), 1.0);
    }

    #[test]
    fn split_keeps_both_classes_in_train() {
        let idx: Vec<usize> = (0..40).collect();
        let targets: Vec<usize> = (0..40).map(|i| usize::from(i < 4)).collect();
        let (train, test) = stratified_split(&idx, &targets, 0.25, 3);
        assert_eq!(train.len() + test.len(), 40);
        assert_eq!(train.iter().filter(|&&i| i < 4).count(), 1);
        assert_eq!(train.len(), 10);
        let (train2, _) = stratified_split(&idx, &targets, 0.25, 3);
        assert_eq!(train, train2);
    }

    #[test]
    fn perfect_predictions_report_all_ones() {
        let truth = vec![
            MovementLabel::xy(Direction::XLeft, Header::Printing, SpeedClass::Slow),
            MovementLabel::z(Header::Positioning, SpeedClass::Fast),
        ];
        let preds = vec![[0, 0, 0, 0, 0, 0], [1, 0, 0, 0, 1, 1]];
        let report = EvaluationReport::from_predictions(&truth, &preds, &truth);
        assert!(report.nodes.iter().all(|n| n.accuracy() == 1.0));
        assert_eq!(report.macro_mean(), 1.0);
        assert_eq!(report.exact_matches, 2);
        assert_eq!(report.node(NodeKind::DirY).confusion.total(), 0);
        assert!(report.to_csv().lines().count() == 7);
    }
}
