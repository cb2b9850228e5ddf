//! From per-frame labels back to a toolpath, and scoring against the original.
//!
//! Labels are smoothed with a sliding majority vote, collapsed into runs,
//! and each run becomes one straight move whose length is feed × duration.
//! Mean Tendency Error (MTE) is the mean relative length error over
//! segments matched in order on their geometry; anything left unmatched on
//! either side counts as a 100% error.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gcode::{Direction, Header, MotionSegment, MovementLabel, Plane, SpeedClass, Toolpath, Vec3};
use crate::taxonomy::EvaluationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("original toolpath is empty")]
    EmptyOriginal,
    #[error("smoothing window must be odd and positive, got {0}")]
    Window(usize),
    #[error("invalid reconstruction config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub frame_ms: f64,
    /// Majority-vote window in frames; 1 disables smoothing.
    pub window: usize,
    /// Feed (mm/min) assigned to runs classified slow.
    pub slow_feed: f64,
    /// Feed (mm/min) assigned to runs classified fast.
    pub fast_feed: f64,
    /// Height of one Z run, mm.
    pub layer_height: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig { frame_ms: 100.0, window: 3, slow_feed: 600.0, fast_feed: 3000.0, layer_height: 0.2 }
    }
}

impl ReconstructConfig {
    pub fn validate(&self) -> Result<(), ReconstructError> {
        if self.window.is_multiple_of(2) {
            return Err(ReconstructError::Window(self.window));
        }
        for (name, v) in [
            ("frame_ms", self.frame_ms),
            ("slow_feed", self.slow_feed),
            ("fast_feed", self.fast_feed),
            ("layer_height", self.layer_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ReconstructError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn feed_for(&self, speed: SpeedClass) -> f64 {
        match speed {
            SpeedClass::Slow => self.slow_feed,
            SpeedClass::Fast => self.fast_feed,
        }
    }
}

/// Sliding-window majority vote. The first and last `window / 2` labels are
/// kept as is. An interior label takes whichever label holds a strict
/// majority of its window; with no majority it takes its left neighbour's
/// label, so a lone frame between two different runs joins the earlier one.
pub fn smooth_labels(labels: &[MovementLabel], window: usize) -> Result<Vec<MovementLabel>, ReconstructError> {
    if window.is_multiple_of(2) {
        return Err(ReconstructError::Window(window));
    }
    let half = window / 2;
    let mut out = labels.to_vec();
    if labels.len() < window {
        return Ok(out);
    }
    let mut counts: HashMap<MovementLabel, usize> = HashMap::new();
    for i in half..labels.len() - half {
        counts.clear();
        for l in &labels[i - half..=i + half] {
            *counts.entry(*l).or_default() += 1;
        }
        out[i] = match counts.iter().find(|(_, &c)| c > half) {
            Some((l, _)) => *l,
            None if counts.len() == window => labels[i - 1],
            None => labels[i],
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedSegment {
    pub label: MovementLabel,
    pub first_frame: usize,
    pub n_frames: usize,
    /// Seconds.
    pub duration: f64,
    /// mm/min.
    pub inferred_feed: f64,
    /// mm.
    pub inferred_length: f64,
}

/// Collapse maximal runs of equal plane, direction and header into segments.
/// The run's speed is the majority speed over its frames (ties go slow).
/// XY runs take their feed from the class map; Z runs are one layer high and
/// their feed is whatever covers that height in the run's duration.
pub fn segment_labels(labels: &[MovementLabel], cfg: &ReconstructConfig) -> Vec<PredictedSegment> {
    let mut segs = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let key = labels[start].run_key();
        let end = labels[start..].iter().position(|l| l.run_key() != key).map_or(labels.len(), |p| start + p);
        let run = &labels[start..end];
        let fast = run.iter().filter(|l| l.speed() == SpeedClass::Fast).count();
        let speed = if 2 * fast > run.len() { SpeedClass::Fast } else { SpeedClass::Slow };
        let label = run[0].with_speed(speed);
        let duration = run.len() as f64 * cfg.frame_ms / 1000.0;
        let (inferred_feed, inferred_length) = match label.plane() {
            Plane::XY => {
                let feed = cfg.feed_for(speed);
                (feed, feed * duration / 60.0)
            }
            Plane::Z => (cfg.layer_height * 60.0 / duration, cfg.layer_height),
        };
        segs.push(PredictedSegment {
            label,
            first_frame: start,
            n_frames: run.len(),
            duration,
            inferred_feed,
            inferred_length,
        });
        start = end;
    }
    segs
}

/// Chain segments head to tail from `start`. Z runs move up.
pub fn segments_to_toolpath(segs: &[PredictedSegment], start: Vec3) -> Toolpath {
    let mut path = Toolpath::new(start);
    let mut pos = start;
    let mut layer = 0u32;
    for s in segs {
        let unit = s.label.direction().map_or(Vec3::new(0.0, 0.0, 1.0), Direction::unit);
        let end = pos + unit * s.inferred_length;
        if s.label.plane() == Plane::Z {
            layer += 1;
        }
        path.segments.push(MotionSegment {
            start: pos,
            end,
            feed: s.inferred_feed,
            extruding: s.label.header() == Header::Printing,
            layer,
            label: s.label,
        });
        pos = end;
    }
    path
}

/// Smooth, segment and chain in one go.
pub fn labels_to_toolpath(
    labels: &[MovementLabel],
    start: Vec3,
    cfg: &ReconstructConfig,
) -> Result<(Vec<PredictedSegment>, Toolpath), ReconstructError> {
    cfg.validate()?;
    let smoothed = smooth_labels(labels, cfg.window)?;
    let segs = segment_labels(&smoothed, cfg);
    let path = segments_to_toolpath(&segs, start);
    Ok((segs, path))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub original: usize,
    pub reconstructed: usize,
    pub original_length: f64,
    pub reconstructed_length: f64,
}

impl MatchedPair {
    pub fn relative_error(&self) -> f64 {
        (self.reconstructed_length - self.original_length).abs() / self.original_length
    }

    pub fn signed_error(&self) -> f64 {
        (self.reconstructed_length - self.original_length) / self.original_length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MteBreakdown {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_original: Vec<usize>,
    pub unmatched_reconstructed: Vec<usize>,
    /// Stroke lengths in mm, in order.
    pub original_lengths: Vec<f64>,
    pub reconstructed_lengths: Vec<f64>,
    /// Mean relative length error over all entries, percent.
    pub mte_percent: f64,
    /// Same errors weighted by segment length, percent.
    pub length_weighted_percent: f64,
    /// Mean signed relative error over matched pairs, percent.
    pub signed_percent: f64,
}

impl MteBreakdown {
    pub fn entries(&self) -> usize {
        self.pairs.len() + self.unmatched_original.len() + self.unmatched_reconstructed.len()
    }
}

/// Lengths are compared at the 1 µm resolution G-code is emitted with.
fn quantize(mm: f64) -> f64 {
    (mm * 1000.0).round() / 1000.0
}

type GeometryKey = (Plane, Option<Direction>);

/// Maximal runs of consecutive segments sharing plane and direction, as
/// (key, total length). A header change mid-line does not break a stroke.
fn strokes(t: &Toolpath) -> Vec<(GeometryKey, f64)> {
    let mut out: Vec<(GeometryKey, f64)> = Vec::new();
    for s in &t.segments {
        let key = s.label.geometry_key();
        match out.last_mut() {
            Some((k, len)) if *k == key => *len += s.length(),
            _ => out.push((key, s.length())),
        }
    }
    out.into_iter().map(|(k, len)| (k, quantize(len))).collect()
}

/// Align strokes in order on (plane, axis, direction) and score lengths.
///
/// Consecutive segments with the same geometry are first merged into one
/// stroke on each side; indices in the result refer to strokes. For each
/// original stroke the reconstructed strokes are scanned forward from the
/// last match; reconstructed strokes skipped over are unmatched, and an
/// original stroke with no forward match is unmatched.
pub fn mte_breakdown(reconstructed: &Toolpath, original: &Toolpath) -> Result<MteBreakdown, ReconstructError> {
    if original.is_empty() {
        return Err(ReconstructError::EmptyOriginal);
    }
    let orig = strokes(original);
    let rec = strokes(reconstructed);
    let mut pairs = Vec::new();
    let mut unmatched_original = Vec::new();
    let mut unmatched_reconstructed = Vec::new();
    let mut j = 0;
    for (i, &(key, len)) in orig.iter().enumerate() {
        match rec[j..].iter().position(|r| r.0 == key) {
            Some(off) => {
                unmatched_reconstructed.extend(j..j + off);
                let k = j + off;
                pairs.push(MatchedPair {
                    original: i,
                    reconstructed: k,
                    original_length: len,
                    reconstructed_length: rec[k].1,
                });
                j = k + 1;
            }
            None => unmatched_original.push(i),
        }
    }
    unmatched_reconstructed.extend(j..rec.len());

    let entries = (pairs.len() + unmatched_original.len() + unmatched_reconstructed.len()) as f64;
    let err_sum: f64 = pairs.iter().map(MatchedPair::relative_error).sum::<f64>()
        + (unmatched_original.len() + unmatched_reconstructed.len()) as f64;
    let mte_percent = 100.0 * err_sum / entries;

    let mut w_err = 0.0;
    let mut w_sum = 0.0;
    for p in &pairs {
        w_err += (p.reconstructed_length - p.original_length).abs();
        w_sum += p.original_length;
    }
    for len in unmatched_original.iter().map(|&i| orig[i].1).chain(unmatched_reconstructed.iter().map(|&k| rec[k].1)) {
        w_err += len;
        w_sum += len;
    }
    let length_weighted_percent = if w_sum > 0.0 { 100.0 * w_err / w_sum } else { 0.0 };
    let signed_percent = if pairs.is_empty() {
        0.0
    } else {
        100.0 * pairs.iter().map(MatchedPair::signed_error).sum::<f64>() / pairs.len() as f64
    };
    Ok(MteBreakdown {
        pairs,
        unmatched_original,
        unmatched_reconstructed,
        original_lengths: orig.iter().map(|s| s.1).collect(),
        reconstructed_lengths: rec.iter().map(|s| s.1).collect(),
        mte_percent,
        length_weighted_percent,
        signed_percent,
    })
}

pub fn mean_tendency_error(reconstructed: &Toolpath, original: &Toolpath) -> Result<f64, ReconstructError> {
    Ok(mte_breakdown(reconstructed, original)?.mte_percent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Original,
    Reconstructed,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Original => "original",
            Source::Reconstructed => "reconstructed",
        }
    }
}

/// XY projection of one layer of one toolpath.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub source: Source,
    pub layer: u32,
    pub points: Vec<[f64; 2]>,
}

fn layer_polylines(t: &Toolpath, source: Source) -> Vec<Polyline> {
    let mut out: Vec<Polyline> = Vec::new();
    for s in t.segments.iter().filter(|s| s.label.plane() == Plane::XY) {
        let contiguous = out.last().is_some_and(|p| p.layer == s.layer);
        if !contiguous {
            out.push(Polyline { source, layer: s.layer, points: vec![[s.start.x, s.start.y]] });
        }
        out.last_mut().expect("pushed above").points.push([s.end.x, s.end.y]);
    }
    out
}

/// Per-layer XY polylines for both toolpaths, original first.
pub fn compare_overlay(reconstructed: &Toolpath, original: &Toolpath) -> Vec<Polyline> {
    let mut lines = layer_polylines(original, Source::Original);
    lines.extend(layer_polylines(reconstructed, Source::Reconstructed));
    lines
}

pub fn overlay_csv(lines: &[Polyline]) -> String {
    let mut out = String::from("source,layer,point,x,y\n");
    for l in lines {
        for (i, [x, y]) in l.points.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{:.4},{:.4}", l.source.name(), l.layer, i, x, y);
        }
    }
    out
}

pub fn overlay_svg(lines: &[Polyline]) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 20.0;
    let pts = lines.iter().flat_map(|l| l.points.iter());
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for [x, y] in pts {
        x0 = x0.min(*x);
        y0 = y0.min(*y);
        x1 = x1.max(*x);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for l in lines {
        let (color, dash) = match l.source {
            Source::Original => ("#1f77b4", ""),
            Source::Reconstructed => ("#d62728", r#" stroke-dasharray="6 3""#),
        };
        let points: Vec<String> = l
            .points
            .iter()
            .map(|[x, y]| format!("{:.2},{:.2}", MARGIN + (x - x0) * scale, SIZE - MARGIN - (y - y0) * scale))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="{} layer-{}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            l.source.name(),
            l.layer,
            points.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub reconstructed: Toolpath,
    pub segments: Vec<PredictedSegment>,
    /// Present when an original toolpath was supplied.
    pub mte: Option<MteBreakdown>,
    /// Per-node accuracies, when ground-truth labels were supplied.
    pub evaluation: Option<EvaluationReport>,
    pub overlay: Vec<Polyline>,
}

impl ReconstructionReport {
    pub fn build(
        labels: &[MovementLabel],
        start: Vec3,
        cfg: &ReconstructConfig,
        original: Option<&Toolpath>,
        evaluation: Option<EvaluationReport>,
    ) -> Result<Self, ReconstructError> {
        let (segments, reconstructed) = labels_to_toolpath(labels, start, cfg)?;
        let mte = original.map(|o| mte_breakdown(&reconstructed, o)).transpose()?;
        let overlay = match original {
            Some(o) => compare_overlay(&reconstructed, o),
            None => layer_polylines(&reconstructed, Source::Reconstructed),
        };
        Ok(ReconstructionReport { reconstructed, segments, mte, evaluation, overlay })
    }

    pub fn mte_percent(&self) -> Option<f64> {
        self.mte.as_ref().map(|m| m.mte_percent)
    }

    /// One row per original stroke and per unmatched reconstructed stroke.
    pub fn segments_csv(&self) -> String {
        let mut out = String::from("kind,original_index,reconstructed_index,original_mm,reconstructed_mm,relative_error\n");
        let Some(m) = &self.mte else { return out };
        for p in &m.pairs {
            let _ = writeln!(
                out,
                "matched,{},{},{:.4},{:.4},{:.6}",
                p.original,
                p.reconstructed,
                p.original_length,
                p.reconstructed_length,
                p.relative_error()
            );
        }
        for &i in &m.unmatched_original {
            let _ = writeln!(out, "missing,{i},,{:.4},,1.000000", m.original_lengths[i]);
        }
        for &k in &m.unmatched_reconstructed {
            let _ = writeln!(out, "spurious,,{k},,{:.4},1.000000", m.reconstructed_lengths[k]);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "reconstructed {} segments, {:.2} s",
            self.reconstructed.len(),
            self.reconstructed.duration()
        );
        for s in &self.segments {
            let _ = writeln!(
                out,
                "  {:<32} frames {:>4}  {:>7.3} mm @ {:>6.0} mm/min",
                s.label.to_string(),
                s.n_frames,
                s.inferred_length,
                s.inferred_feed
            );
        }
        if let Some(m) = &self.mte {
            let _ = writeln!(
                out,
                "MTE {:.2}% (length-weighted {:.2}%, signed {:+.2}%), {} matched, {} missing, {} spurious",
                m.mte_percent,
                m.length_weighted_percent,
                m.signed_percent,
                m.pairs.len(),
                m.unmatched_original.len(),
                m.unmatched_reconstructed.len()
            );
        }
        if let Some(e) = &self.evaluation {
            out.push_str(&e.to_text());
        }
        out
    }
}
