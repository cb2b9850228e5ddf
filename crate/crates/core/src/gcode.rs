//! Motion G-code: parsing, modal interpretation into labeled motion
//! segments, and deterministic emission.
//!
//! The supported dialect is deliberately small: `G0`/`G1` linear moves,
//! `G28` homing, and the `G90`/`G21` mode words (absolute, millimeters),
//! which are accepted as no-ops. `M` and `T` words are carried through as
//! pass-through records. Anything else in the `G` space is rejected.

use std::fmt;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Feed rate (mm/min) separating [`SpeedClass::Slow`] from [`SpeedClass::Fast`].
pub const DEFAULT_SPEED_BOUNDARY: f64 = 2400.0;

/// Filament millimeters emitted per millimeter of extruding travel.
pub const EXTRUSION_PER_MM: f64 = 0.033;

const CONTIGUITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GcodeError {
    #[error("line {line}: malformed number {text:?} for word {word}")]
    MalformedNumber { line: usize, word: char, text: String },
    #[error("line {line}: unknown G-word G{code}")]
    UnknownGWord { line: usize, code: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: no feed rate established")]
    NoFeedRate { line: usize },
    #[error("zero-length displacement cannot be classified")]
    ZeroDisplacement,
}

/// A point or displacement in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn max_abs_diff(self, other: Vec3) -> f64 {
        let d = self - other;
        d.x.abs().max(d.y.abs()).max(d.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opcode {
    G0,
    G1,
    G28,
    /// Comments, mode words, and M/T codes carried through untouched.
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GCommand {
    pub opcode: Opcode,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub e: Option<f64>,
    pub f: Option<f64>,
    /// 1-based source line.
    pub line: usize,
    /// Source text of pass-through records (comment text for comment-only lines).
    pub text: String,
}

impl GCommand {
    fn new(opcode: Opcode, line: usize) -> Self {
        GCommand { opcode, x: None, y: None, z: None, e: None, f: None, line, text: String::new() }
    }

    pub fn is_motion(&self) -> bool {
        matches!(self.opcode, Opcode::G0 | Opcode::G1 | Opcode::G28)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Plane {
    Z,
    XY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    XLeft,
    XRight,
    YUp,
    YDown,
}

impl Direction {
    pub const ALL: [Direction; 4] =
        [Direction::XLeft, Direction::XRight, Direction::YUp, Direction::YDown];

    pub fn axis(self) -> Axis {
        match self {
            Direction::XLeft | Direction::XRight => Axis::X,
            Direction::YUp | Direction::YDown => Axis::Y,
        }
    }

    /// Unit vector of travel in bed coordinates.
    pub fn unit(self) -> Vec3 {
        match self {
            Direction::XLeft => Vec3::new(-1.0, 0.0, 0.0),
            Direction::XRight => Vec3::new(1.0, 0.0, 0.0),
            Direction::YUp => Vec3::new(0.0, 1.0, 0.0),
            Direction::YDown => Vec3::new(0.0, -1.0, 0.0),
        }
    }

    /// +1 for XRight/YUp, -1 for XLeft/YDown.
    pub fn sign(self) -> f64 {
        match self {
            Direction::XRight | Direction::YUp => 1.0,
            Direction::XLeft | Direction::YDown => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Header {
    Printing,
    Positioning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpeedClass {
    Slow,
    Fast,
}

impl SpeedClass {
    pub fn from_feed(feed: f64, boundary: f64) -> Self {
        if feed < boundary {
            SpeedClass::Slow
        } else {
            SpeedClass::Fast
        }
    }
}

/// One node path through the movement taxonomy.
///
/// Axis and direction exist only for XY-plane movements; the constructors
/// are the only way to build a label, so that invariant always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MovementLabel {
    plane: Plane,
    direction: Option<Direction>,
    header: Header,
    speed: SpeedClass,
}

impl MovementLabel {
    pub fn xy(direction: Direction, header: Header, speed: SpeedClass) -> Self {
        MovementLabel { plane: Plane::XY, direction: Some(direction), header, speed }
    }

    pub fn z(header: Header, speed: SpeedClass) -> Self {
        MovementLabel { plane: Plane::Z, direction: None, header, speed }
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn axis(&self) -> Option<Axis> {
        self.direction.map(Direction::axis)
    }

    pub fn direction(&self) -> Option<Direction> {
        self.direction
    }

    pub fn header(&self) -> Header {
        self.header
    }

    pub fn speed(&self) -> SpeedClass {
        self.speed
    }

    pub fn with_speed(self, speed: SpeedClass) -> Self {
        MovementLabel { speed, ..self }
    }

    /// The geometric part of the label: plane, axis, and direction.
    pub fn geometry_key(&self) -> (Plane, Option<Direction>) {
        (self.plane, self.direction)
    }

    /// Everything except speed; segments are runs of equal run keys.
    pub fn run_key(&self) -> (Plane, Option<Direction>, Header) {
        (self.plane, self.direction, self.header)
    }
}

impl fmt::Display for MovementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.direction {
            Some(d) => write!(f, "XY/{:?}/{:?}/{:?}", d, self.header, self.speed),
            None => write!(f, "Z/{:?}/{:?}", self.header, self.speed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSegment {
    pub start: Vec3,
    pub end: Vec3,
    /// mm/min
    pub feed: f64,
    pub extruding: bool,
    pub layer: u32,
    pub label: MovementLabel,
}

impl MotionSegment {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    /// Travel time in seconds.
    pub fn duration(&self) -> f64 {
        self.length() / self.feed * 60.0
    }

    pub fn displacement(&self) -> Vec3 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Toolpath {
    pub segments: Vec<MotionSegment>,
    pub origin: Vec3,
}

impl Toolpath {
    pub fn new(origin: Vec3) -> Self {
        Toolpath { segments: Vec::new(), origin }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// Kinematic duration in seconds.
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(MotionSegment::duration).sum()
    }

    pub fn is_contiguous(&self) -> bool {
        let mut at = self.origin;
        for s in &self.segments {
            if s.start.max_abs_diff(at) > CONTIGUITY_TOL {
                return false;
            }
            at = s.end;
        }
        true
    }

    pub fn end_position(&self) -> Vec3 {
        self.segments.last().map_or(self.origin, |s| s.end)
    }
}

/// Label a displacement. Exact |dx| == |dy| ties go to X.
pub fn classify_displacement(
    delta: Vec3,
    feed: f64,
    extruding: bool,
    speed_boundary: f64,
) -> Result<MovementLabel, GcodeError> {
    let (ax, ay, az) = (delta.x.abs(), delta.y.abs(), delta.z.abs());
    if ax == 0.0 && ay == 0.0 && az == 0.0 {
        return Err(GcodeError::ZeroDisplacement);
    }
    let header = if extruding { Header::Printing } else { Header::Positioning };
    let speed = SpeedClass::from_feed(feed, speed_boundary);
    if az > ax.max(ay) {
        return Ok(MovementLabel::z(header, speed));
    }
    let direction = if ax >= ay {
        if delta.x < 0.0 {
            Direction::XLeft
        } else {
            Direction::XRight
        }
    } else if delta.y > 0.0 {
        Direction::YUp
    } else {
        Direction::YDown
    };
    Ok(MovementLabel::xy(direction, header, speed))
}

pub fn classify_segment(s: &MotionSegment, speed_boundary: f64) -> Result<MovementLabel, GcodeError> {
    classify_displacement(s.displacement(), s.feed, s.extruding, speed_boundary)
}

pub fn parse_gcode(text: &str) -> Result<Vec<GCommand>, GcodeError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw.trim_end_matches('\r');
        let (code, comment) = strip_comments(raw, line_no)?;
        let code = code.trim();
        if code.is_empty() {
            if let Some(c) = comment {
                let mut cmd = GCommand::new(Opcode::Other, line_no);
                cmd.text = c;
                out.push(cmd);
            }
            continue;
        }
        out.push(parse_line(code, raw.trim(), line_no)?);
    }
    Ok(out)
}

/// Splits a line into code and the concatenated comment text.
fn strip_comments(raw: &str, line: usize) -> Result<(String, Option<String>), GcodeError> {
    let mut code = String::with_capacity(raw.len());
    let mut comment = String::new();
    let mut has_comment = false;
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                has_comment = true;
                comment.push_str(chars.as_str().trim());
                break;
            }
            '(' => {
                has_comment = true;
                let mut closed = false;
                for c in chars.by_ref() {
                    if c == ')' {
                        closed = true;
                        break;
                    }
                    comment.push(c);
                }
                if !closed {
                    return Err(GcodeError::Invalid { line, message: "unterminated '(' comment".into() });
                }
                code.push(' ');
            }
            // checksum suffix
            '*' => break,
            _ => code.push(c),
        }
    }
    Ok((code, has_comment.then(|| comment.trim().to_string())))
}

fn tokenize(code: &str) -> Vec<(char, String)> {
    let mut words = Vec::new();
    let mut chars = code.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        let letter = c.to_ascii_uppercase();
        let mut num = String::new();
        while let Some(&n) = chars.peek() {
            if n.is_whitespace() || (n.is_ascii_alphabetic() && !num.is_empty()) {
                break;
            }
            if n.is_ascii_alphabetic() && num.is_empty() {
                // "Xabc": keep the garbage so the caller can report it.
                while let Some(&g) = chars.peek() {
                    if g.is_whitespace() {
                        break;
                    }
                    num.push(g);
                    chars.next();
                }
                break;
            }
            num.push(n);
            chars.next();
        }
        words.push((letter, num));
    }
    words
}

fn parse_number(word: char, text: &str, line: usize) -> Result<f64, GcodeError> {
    let ok = !text.is_empty()
        && text.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | '+' | '-'));
    let value = if ok { text.parse::<f64>().ok() } else { None };
    match value {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(GcodeError::MalformedNumber { line, word, text: text.to_string() }),
    }
}

fn parse_line(code: &str, raw: &str, line: usize) -> Result<GCommand, GcodeError> {
    let words = tokenize(code);
    let mut iter = words.into_iter().filter(|(w, _)| *w != 'N').peekable();
    let Some((letter, number)) = iter.next() else {
        return Err(GcodeError::Invalid { line, message: "empty command".into() });
    };
    let opcode = match letter {
        'G' => {
            let v = parse_number('G', &number, line)?;
            if v == 0.0 {
                Opcode::G0
            } else if v == 1.0 {
                Opcode::G1
            } else if v == 28.0 {
                Opcode::G28
            } else if v == 90.0 || v == 21.0 {
                Opcode::Other
            } else if v == 91.0 {
                return Err(GcodeError::Invalid { line, message: "relative positioning (G91) is not supported".into() });
            } else if v == 20.0 {
                return Err(GcodeError::Invalid { line, message: "inch units (G20) are not supported".into() });
            } else {
                return Err(GcodeError::UnknownGWord { line, code: number });
            }
        }
        'M' | 'T' => {
            parse_number(letter, &number, line)?;
            let mut cmd = GCommand::new(Opcode::Other, line);
            cmd.text = raw.to_string();
            return Ok(cmd);
        }
        other => {
            return Err(GcodeError::Invalid { line, message: format!("expected G or M word, found {other}") })
        }
    };
    let mut cmd = GCommand::new(opcode, line);
    if opcode == Opcode::Other {
        cmd.text = raw.to_string();
        return Ok(cmd);
    }
    for (w, num) in iter {
        if opcode == Opcode::G28 && num.is_empty() && matches!(w, 'X' | 'Y' | 'Z') {
            set_axis(&mut cmd, w, 0.0);
            continue;
        }
        let v = parse_number(w, &num, line)?;
        match w {
            'X' | 'Y' | 'Z' => set_axis(&mut cmd, w, v),
            'E' => cmd.e = Some(v),
            'F' => {
                if v <= 0.0 {
                    return Err(GcodeError::Invalid { line, message: format!("feed rate must be positive, got {v}") });
                }
                cmd.f = Some(v)
            }
            other => {
                return Err(GcodeError::Invalid { line, message: format!("unsupported parameter {other}") })
            }
        }
    }
    if opcode != Opcode::G28
        && cmd.x.is_none()
        && cmd.y.is_none()
        && cmd.z.is_none()
        && cmd.e.is_none()
        && cmd.f.is_none()
    {
        return Err(GcodeError::Invalid { line, message: "motion command without parameters".into() });
    }
    Ok(cmd)
}

fn set_axis(cmd: &mut GCommand, w: char, v: f64) {
    match w {
        'X' => cmd.x = Some(v),
        'Y' => cmd.y = Some(v),
        _ => cmd.z = Some(v),
    }
}

/// Interpret parsed commands under absolute modal semantics.
///
/// Missing coordinates inherit the previous position and a missing `F`
/// inherits the previous feed. `G28` homes the named axes (all, if none are
/// named) to zero and appears as a non-extruding segment.
pub fn to_toolpath(commands: &[GCommand], start: Vec3, speed_boundary: f64) -> Result<Toolpath, GcodeError> {
    let mut path = Toolpath::new(start);
    let mut pos = start;
    let mut feed: Option<f64> = None;
    let mut e_pos = 0.0;
    let mut layer = 0u32;
    let mut max_z = start.z;

    for cmd in commands.iter().filter(|c| c.is_motion()) {
        if let Some(f) = cmd.f {
            feed = Some(f);
        }
        let target = if cmd.opcode == Opcode::G28 {
            if cmd.x.is_none() && cmd.y.is_none() && cmd.z.is_none() {
                Vec3::ZERO
            } else {
                Vec3::new(
                    cmd.x.map_or(pos.x, |_| 0.0),
                    cmd.y.map_or(pos.y, |_| 0.0),
                    cmd.z.map_or(pos.z, |_| 0.0),
                )
            }
        } else {
            Vec3::new(cmd.x.unwrap_or(pos.x), cmd.y.unwrap_or(pos.y), cmd.z.unwrap_or(pos.z))
        };
        let extruding = match cmd.e {
            Some(e) if cmd.opcode != Opcode::G28 => {
                let grew = e > e_pos;
                e_pos = e;
                grew
            }
            _ => false,
        };
        if target == pos {
            continue;
        }
        let feed = feed.ok_or(GcodeError::NoFeedRate { line: cmd.line })?;
        if target.z > max_z + CONTIGUITY_TOL {
            layer += 1;
            max_z = target.z;
        }
        let label = classify_displacement(target - pos, feed, extruding, speed_boundary)?;
        path.segments.push(MotionSegment { start: pos, end: target, feed, extruding, layer, label });
        pos = target;
    }
    Ok(path)
}

/// Reads the `; origin X.. Y.. Z..` header written by [`emit_gcode`].
pub fn origin_hint(commands: &[GCommand]) -> Option<Vec3> {
    commands.iter().filter(|c| c.opcode == Opcode::Other).find_map(|c| {
        let rest = c.text.strip_prefix("origin")?;
        let mut p = Vec3::ZERO;
        let mut seen = 0;
        for tok in rest.split_whitespace() {
            let (axis, num) = tok.split_at(1);
            let v: f64 = num.parse().ok()?;
            match axis {
                "X" => p.x = v,
                "Y" => p.y = v,
                "Z" => p.z = v,
                _ => return None,
            }
            seen += 1;
        }
        (seen == 3).then_some(p)
    })
}

/// Render a toolpath as absolute `G1` moves.
///
/// Coordinates carry three decimals, `F` is an integer and `E` is
/// accumulated over extruding segments. Output is byte-for-byte
/// deterministic.
pub fn emit_gcode(t: &Toolpath) -> String {
    let mut out = String::new();
    out.push_str("; printleak toolpath\n");
    let _ = writeln!(out, "; origin X{:.3} Y{:.3} Z{:.3}", t.origin.x, t.origin.y, t.origin.z);
    out.push_str("G90\nG21\nM82\n");
    let mut e_total = 0.0_f64;
    let mut e_printed = 0.0_f64;
    for s in &t.segments {
        let _ = write!(out, "G1 X{:.3} Y{:.3} Z{:.3}", s.end.x, s.end.y, s.end.z);
        if s.extruding {
            e_total += s.length() * EXTRUSION_PER_MM;
            let mut e = (e_total * 1e5).round() / 1e5;
            if e <= e_printed {
                e = e_printed + 1e-5;
            }
            e_printed = e;
            let _ = write!(out, " E{e:.5}");
        }
        let _ = writeln!(out, " F{}", s.feed.round() as i64);
    }
    out.push_str("M400\n; end of toolpath\n");
    out
}

/// The 10 mm square used for reconstruction experiments: three layers of
/// four printed sides at 600 mm/min, joined by 0.2 mm layer changes at
/// 60 mm/min, starting at (0, 0, 0.2).
pub fn square_gcode() -> String {
    let mut g = String::new();
    g.push_str("; 10 mm calibration square, three layers\n");
    g.push_str("; origin X0.000 Y0.000 Z0.200\n");
    g.push_str("G90\nG21\nM82\n");
    let mut e = 0.0;
    for layer in 0..3 {
        if layer > 0 {
            let _ = writeln!(g, "G1 Z{:.1} F60 ; layer change", 0.2 * (layer as f64 + 1.0));
        }
        for (x, y) in [(10, 0), (10, 10), (0, 10), (0, 0)] {
            e += 10.0 * EXTRUSION_PER_MM;
            let _ = writeln!(g, "G1 X{x} Y{y} E{e:.4} F600");
        }
    }
    g.push_str("M400\n");
    g
}
