//! Sensor log interchange and frame alignment.
//!
//! The log is a CSV with the exact header `time_s,ax,bx_uT,by_uT,bz_uT`.
//! Rows come at the acoustic rate; the magnetometer columns hold their last
//! sample between magnetometer ticks.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::features::Frame;
use crate::gcode::{Direction, Header, MovementLabel, SpeedClass};

pub const CSV_HEADER: &str = "time_s,ax,bx_uT,by_uT,bz_uT";
const COLUMNS: [&str; 5] = ["time_s", "ax", "bx_uT", "by_uT", "bz_uT"];

pub const DEFAULT_ACOUSTIC_RATE: f64 = 8000.0;
pub const DEFAULT_MAGNETIC_RATE: f64 = 100.0;
pub const DEFAULT_FRAME_MS: f64 = 100.0;
const MIN_ACOUSTIC_RATE: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: timestamp {time} does not increase")]
    NonMonotone { row: usize, time: f64 },
    #[error("invalid rate: {0}")]
    InvalidRate(String),
    #[error("frame of {frame_ms} ms holds {samples} magnetic samples; at least 2 are required")]
    FrameTooShort { frame_ms: f64, samples: usize },
}

/// Time-aligned acoustic and magnetometer recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    /// Linear acoustic amplitude.
    pub acoustic: Vec<f64>,
    pub acoustic_rate: f64,
    /// (bx, by, bz) in µT.
    pub magnetic: Vec<[f64; 3]>,
    pub magnetic_rate: f64,
    pub start_time: f64,
}

impl SensorTrace {
    pub fn empty(acoustic_rate: f64, magnetic_rate: f64) -> Self {
        SensorTrace { acoustic: Vec::new(), acoustic_rate, magnetic: Vec::new(), magnetic_rate, start_time: 0.0 }
    }

    pub fn duration(&self) -> f64 {
        self.acoustic.len() as f64 / self.acoustic_rate
    }

    /// Acoustic gain in dB, `20·log10(|x| + 1e-12)`.
    pub fn gain_db(&self) -> Vec<f64> {
        self.acoustic.iter().map(|x| 20.0 * (x.abs() + 1e-12).log10()).collect()
    }

    /// Magnetometer sample held at acoustic row `row`.
    fn magnetic_at_row(&self, row: usize) -> [f64; 3] {
        let k = held_index(row, self.acoustic_rate, self.magnetic_rate);
        self.magnetic[k.min(self.magnetic.len() - 1)]
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        check_rates(self.acoustic_rate, self.magnetic_rate)?;
        let expected = magnetic_len_for(self.acoustic.len(), self.acoustic_rate, self.magnetic_rate);
        if self.magnetic.len().abs_diff(expected) > 1 {
            return Err(IngestError::Schema(format!(
                "{} magnetic samples for {} acoustic samples, expected {expected}",
                self.magnetic.len(),
                self.acoustic.len()
            )));
        }
        Ok(())
    }
}

fn check_rates(acoustic_rate: f64, magnetic_rate: f64) -> Result<(), IngestError> {
    if !(acoustic_rate >= MIN_ACOUSTIC_RATE && acoustic_rate.is_finite()) {
        return Err(IngestError::InvalidRate(format!("acoustic rate {acoustic_rate} Hz is below {MIN_ACOUSTIC_RATE} Hz")));
    }
    if !(magnetic_rate > 0.0 && magnetic_rate <= acoustic_rate) {
        return Err(IngestError::InvalidRate(format!("magnetic rate {magnetic_rate} Hz must be in (0, acoustic rate]")));
    }
    Ok(())
}

fn held_index(row: usize, acoustic_rate: f64, magnetic_rate: f64) -> usize {
    (row as f64 * magnetic_rate / acoustic_rate + 1e-9).floor() as usize
}

/// Number of magnetometer samples covering `n_acoustic` acoustic rows.
pub fn magnetic_len_for(n_acoustic: usize, acoustic_rate: f64, magnetic_rate: f64) -> usize {
    if n_acoustic == 0 {
        0
    } else {
        held_index(n_acoustic - 1, acoustic_rate, magnetic_rate) + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvOptions {
    /// Nominal acoustic rate; inferred from the median row spacing when `None`.
    pub acoustic_rate: Option<f64>,
    pub magnetic_rate: f64,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { acoustic_rate: None, magnetic_rate: DEFAULT_MAGNETIC_RATE }
    }
}

pub fn write_sensor_csv<W: Write>(trace: &SensorTrace, mut out: W) -> Result<(), IngestError> {
    writeln!(out, "{CSV_HEADER}")?;
    if trace.acoustic.is_empty() {
        return Ok(());
    }
    if trace.magnetic.is_empty() {
        return Err(IngestError::Schema("acoustic samples without magnetometer samples".into()));
    }
    for (i, &ax) in trace.acoustic.iter().enumerate() {
        let t = trace.start_time + i as f64 / trace.acoustic_rate;
        let [bx, by, bz] = trace.magnetic_at_row(i);
        writeln!(out, "{t},{ax},{bx},{by},{bz}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sensor_csv<R: BufRead>(input: R, opts: CsvOptions) -> Result<SensorTrace, IngestError> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.ok_or_else(|| IngestError::Schema("empty file".into()))?;
    let names: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
    let mut index = [0usize; 5];
    for (slot, col) in index.iter_mut().zip(COLUMNS) {
        *slot = names
            .iter()
            .position(|n| *n == col)
            .ok_or_else(|| IngestError::Schema(format!("missing column {col:?}")))?;
    }

    let mut rows: Vec<[f64; 5]> = Vec::new();
    for (i, line) in lines.enumerate() {
        let row_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let mut vals = [0.0; 5];
        for (v, &col) in vals.iter_mut().zip(&index) {
            let raw = fields
                .get(col)
                .ok_or_else(|| IngestError::Row { row: row_no, message: format!("expected {} fields", names.len()) })?;
            *v = raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::Row { row: row_no, message: format!("bad number {raw:?}") })?;
        }
        if let Some(prev) = rows.last() {
            if vals[0] <= prev[0] {
                return Err(IngestError::NonMonotone { row: row_no, time: vals[0] });
            }
        }
        rows.push(vals);
    }

    let acoustic_rate = match opts.acoustic_rate {
        Some(r) => r,
        None if rows.len() >= 2 => infer_rate(&rows),
        None => DEFAULT_ACOUSTIC_RATE,
    };
    check_rates(acoustic_rate, opts.magnetic_rate)?;
    if rows.is_empty() {
        return Ok(SensorTrace::empty(acoustic_rate, opts.magnetic_rate));
    }

    let t0 = rows[0][0];
    let span = rows[rows.len() - 1][0] - t0;
    let n = (span * acoustic_rate).round() as usize + 1;
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();

    let mut interp = Interpolator::new(&times);
    let acoustic = (0..n).map(|i| interp.at(t0 + i as f64 / acoustic_rate, |j| rows[j][1])).collect();

    let n_mag = magnetic_len_for(n, acoustic_rate, opts.magnetic_rate);
    let mut interp = Interpolator::new(&times);
    let magnetic = (0..n_mag)
        .map(|k| {
            let t = t0 + k as f64 / opts.magnetic_rate;
            let j = interp.locate(t);
            [interp.blend(j, t, |r| rows[r][2]), interp.blend(j, t, |r| rows[r][3]), interp.blend(j, t, |r| rows[r][4])]
        })
        .collect();

    Ok(SensorTrace { acoustic, acoustic_rate, magnetic, magnetic_rate: opts.magnetic_rate, start_time: t0 })
}

fn infer_rate(rows: &[[f64; 5]]) -> f64 {
    let mut dts: Vec<f64> = rows.windows(2).map(|w| w[1][0] - w[0][0]).collect();
    dts.sort_by(f64::total_cmp);
    (1.0 / dts[dts.len() / 2]).round()
}

/// Linear interpolation over monotone sample times, walking forward.
struct Interpolator<'a> {
    times: &'a [f64],
    cursor: usize,
}

impl<'a> Interpolator<'a> {
    fn new(times: &'a [f64]) -> Self {
        Interpolator { times, cursor: 0 }
    }

    /// Index `j` with `times[j] <= t < times[j + 1]`, clamped to the ends.
    fn locate(&mut self, t: f64) -> usize {
        while self.cursor + 1 < self.times.len() && self.times[self.cursor + 1] <= t {
            self.cursor += 1;
        }
        self.cursor
    }

    fn blend(&self, j: usize, t: f64, value: impl Fn(usize) -> f64) -> f64 {
        if j + 1 >= self.times.len() || t <= self.times[j] {
            return value(j);
        }
        let (ta, tb) = (self.times[j], self.times[j + 1]);
        let w = (t - ta) / (tb - ta);
        let (a, b) = (value(j), value(j + 1));
        if w == 0.0 || a == b {
            a
        } else {
            a + (b - a) * w
        }
    }

    fn at(&mut self, t: f64, value: impl Fn(usize) -> f64) -> f64 {
        let j = self.locate(t);
        self.blend(j, t, value)
    }
}

/// Cut a trace into consecutive frames of `frame_ms` milliseconds.
///
/// Each frame holds `⌊acoustic_rate·frame_ms/1000⌋` acoustic samples and
/// `⌊magnetic_rate·frame_ms/1000⌋` magnetometer samples. A trailing partial
/// frame is dropped.
pub fn align_channels(trace: &SensorTrace, frame_ms: f64) -> Result<Vec<Frame>, IngestError> {
    if !(frame_ms > 0.0 && frame_ms.is_finite()) {
        return Err(IngestError::InvalidRate(format!("frame length {frame_ms} ms must be positive")));
    }
    let plan = FramePlan::new(trace.acoustic_rate, trace.magnetic_rate, frame_ms)?;
    let n_frames = plan.frame_count(trace.acoustic.len(), trace.magnetic.len());
    Ok((0..n_frames)
        .map(|i| {
            let (a, m) = plan.starts(i);
            Frame {
                index: i,
                start_time: trace.start_time + a as f64 / trace.acoustic_rate,
                acoustic: trace.acoustic[a..a + plan.acoustic_len].to_vec(),
                magnetic: trace.magnetic[m..m + plan.magnetic_len].to_vec(),
                acoustic_rate: trace.acoustic_rate,
            }
        })
        .collect())
}

/// Sample bookkeeping shared by framing and frame labeling.
#[derive(Debug, Clone, Copy)]
pub struct FramePlan {
    acoustic_rate: f64,
    magnetic_rate: f64,
    frame_s: f64,
    pub acoustic_len: usize,
    pub magnetic_len: usize,
}

impl FramePlan {
    pub fn new(acoustic_rate: f64, magnetic_rate: f64, frame_ms: f64) -> Result<Self, IngestError> {
        let frame_s = frame_ms / 1000.0;
        let acoustic_len = (acoustic_rate * frame_s + 1e-9).floor() as usize;
        let magnetic_len = (magnetic_rate * frame_s + 1e-9).floor() as usize;
        if magnetic_len < 2 {
            return Err(IngestError::FrameTooShort { frame_ms, samples: magnetic_len });
        }
        if acoustic_len < 2 {
            return Err(IngestError::InvalidRate(format!("frame of {frame_ms} ms holds fewer than 2 acoustic samples")));
        }
        Ok(FramePlan { acoustic_rate, magnetic_rate, frame_s, acoustic_len, magnetic_len })
    }

    /// First acoustic and magnetic sample index of frame `i`.
    pub fn starts(&self, i: usize) -> (usize, usize) {
        let t = i as f64 * self.frame_s;
        ((t * self.acoustic_rate + 1e-9).floor() as usize, (t * self.magnetic_rate + 1e-9).floor() as usize)
    }

    pub fn frame_count(&self, n_acoustic: usize, n_magnetic: usize) -> usize {
        let duration = n_acoustic as f64 / self.acoustic_rate;
        let mut n = (duration / self.frame_s + 1e-9).floor() as usize;
        while n > 0 {
            let (a, m) = self.starts(n - 1);
            if a + self.acoustic_len <= n_acoustic && m + self.magnetic_len <= n_magnetic {
                break;
            }
            n -= 1;
        }
        n
    }
}

pub const LABEL_CSV_HEADER: &str = "frame_idx,plane,axis,direction,header,speed";

/// One row per frame; axis and direction are `-` for Z movements.
pub fn write_labels_csv<W: Write>(labels: &[MovementLabel], mut out: W) -> Result<(), IngestError> {
    writeln!(out, "{LABEL_CSV_HEADER}")?;
    for (i, l) in labels.iter().enumerate() {
        let axis = l.axis().map_or("-".to_string(), |a| format!("{a:?}"));
        let dir = l.direction().map_or("-".to_string(), |d| format!("{d:?}"));
        writeln!(out, "{i},{:?},{axis},{dir},{:?},{:?}", l.plane(), l.header(), l.speed())?;
    }
    out.flush()?;
    Ok(())
}

fn parse_label(fields: &[&str]) -> Result<MovementLabel, String> {
    let header = match fields[4] {
        "Printing" => Header::Printing,
        "Positioning" => Header::Positioning,
        h => return Err(format!("unknown header {h:?}")),
    };
    let speed = match fields[5] {
        "Slow" => SpeedClass::Slow,
        "Fast" => SpeedClass::Fast,
        s => return Err(format!("unknown speed {s:?}")),
    };
    match (fields[1], fields[2], fields[3]) {
        ("Z", "-", "-") => Ok(MovementLabel::z(header, speed)),
        ("XY", axis, dir) => {
            let d = Direction::ALL
                .into_iter()
                .find(|d| format!("{d:?}") == dir)
                .ok_or_else(|| format!("unknown direction {dir:?}"))?;
            if format!("{:?}", d.axis()) != axis {
                return Err(format!("direction {dir} does not lie on axis {axis:?}"));
            }
            Ok(MovementLabel::xy(d, header, speed))
        }
        (p, a, d) => Err(format!("inconsistent plane/axis/direction {p},{a},{d}")),
    }
}

/// Reads what [`write_labels_csv`] writes. Frame indices must run 0, 1, 2, ...
pub fn read_labels_csv<R: BufRead>(input: R) -> Result<Vec<MovementLabel>, IngestError> {
    let mut lines = input.lines();
    let head = lines.next().transpose()?.unwrap_or_default();
    if head.trim_end() != LABEL_CSV_HEADER {
        return Err(IngestError::Schema(format!("expected header {LABEL_CSV_HEADER:?}, found {:?}", head.trim_end())));
    }
    let mut labels = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let row = n + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 6 {
            return Err(IngestError::Row { row, message: format!("expected 6 fields, found {}", fields.len()) });
        }
        if fields[0].parse::<usize>().ok() != Some(labels.len()) {
            return Err(IngestError::Row { row, message: format!("frame index {:?} out of sequence", fields[0]) });
        }
        labels.push(parse_label(&fields).map_err(|message| IngestError::Row { row, message })?);
    }
    Ok(labels)
}
