use crate::error::{Error, Result};
use crate::rng::seeded;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul};
use std::path::Path;

/// Six-DOF pose: rotations in degrees about x, y, z and translations in mm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidPose {
    pub rot: [f64; 3],
    pub trans: [f64; 3],
}

impl RigidPose {
    pub const IDENTITY: RigidPose = RigidPose {
        rot: [0.0; 3],
        trans: [0.0; 3],
    };

    pub fn new(rot: [f64; 3], trans: [f64; 3]) -> Self {
        Self { rot, trans }
    }

    pub fn is_identity(&self) -> bool {
        self.rot.iter().chain(&self.trans).all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.rot.iter().chain(&self.trans).all(|v| v.is_finite())
    }

    /// Bit pattern used to group lines that share a pose exactly.
    pub(crate) fn key(&self) -> [u64; 6] {
        let mut k = [0u64; 6];
        for (i, v) in self.rot.iter().chain(&self.trans).enumerate() {
            // Fold -0.0 onto 0.0.
            k[i] = (v + 0.0).to_bits();
        }
        k
    }
}

impl Add for RigidPose {
    type Output = RigidPose;

    fn add(self, o: RigidPose) -> RigidPose {
        RigidPose {
            rot: std::array::from_fn(|i| self.rot[i] + o.rot[i]),
            trans: std::array::from_fn(|i| self.trans[i] + o.trans[i]),
        }
    }
}

impl Mul<f64> for RigidPose {
    type Output = RigidPose;

    fn mul(self, w: f64) -> RigidPose {
        RigidPose {
            rot: self.rot.map(|v| v * w),
            trans: self.trans.map(|v| v * w),
        }
    }
}

/// Additive pose change centred on a phase-encode line (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionEvent {
    pub line: usize,
    pub delta: RigidPose,
}

/// Motion severity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum MotionClass {
    None = 0,
    Mild = 1,
    Severe = 2,
}

impl MotionClass {
    pub const ALL: [MotionClass; 3] = [MotionClass::None, MotionClass::Mild, MotionClass::Severe];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl TryFrom<u8> for MotionClass {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(MotionClass::None),
            1 => Ok(MotionClass::Mild),
            2 => Ok(MotionClass::Severe),
            _ => Err(Error::Argument(format!("motion class must be 0, 1 or 2, got {v}"))),
        }
    }
}

impl TryFrom<usize> for MotionClass {
    type Error = Error;

    fn try_from(v: usize) -> Result<Self> {
        u8::try_from(v)
            .map_err(|_| Error::Argument(format!("motion class must be 0, 1 or 2, got {v}")))
            .and_then(MotionClass::try_from)
    }
}

impl From<MotionClass> for u8 {
    fn from(c: MotionClass) -> u8 {
        c as u8
    }
}

/// Half-open magnitude interval `(lo, hi]` for rotations (deg) and translations (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRange {
    pub rot: (f64, f64),
    pub trans: (f64, f64),
}

/// Where motion events happen and how large they are per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionProfile {
    /// Event positions on an axis of `reference_lines` phase-encode lines.
    pub event_lines: Vec<f64>,
    pub reference_lines: f64,
    pub mild: ClassRange,
    pub severe: ClassRange,
}

impl Default for MotionProfile {
    fn default() -> Self {
        Self {
            event_lines: vec![93.0, 118.0, 163.0, 238.0],
            reference_lines: 256.0,
            mild: ClassRange {
                rot: (0.0, 1.0),
                trans: (0.0, 1.0),
            },
            severe: ClassRange {
                rot: (3.0, 4.0),
                trans: (3.0, 4.0),
            },
        }
    }
}

impl MotionProfile {
    pub fn validate(&self) -> Result<()> {
        if self.event_lines.is_empty() || !(self.reference_lines > 0.0) {
            return Err(Error::Argument("motion profile needs event lines and a positive reference".into()));
        }
        if self.event_lines.iter().any(|&l| !(0.0..self.reference_lines).contains(&l)) {
            return Err(Error::Argument("event lines must lie in [0, reference_lines)".into()));
        }
        for r in [self.mild, self.severe] {
            for (lo, hi) in [r.rot, r.trans] {
                if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                    return Err(Error::Argument(format!("bad magnitude range ({lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }

    /// Event lines rescaled to an axis of `n_lines` lines, sorted.
    pub fn lines_for(&self, n_lines: usize) -> Vec<usize> {
        let mut lines: Vec<usize> = self
            .event_lines
            .iter()
            .map(|&l| {
                let scaled = (l * n_lines as f64 / self.reference_lines).round();
                (scaled.max(0.0) as usize).min(n_lines - 1)
            })
            .collect();
        lines.sort_unstable();
        lines
    }
}

/// Events for `class` on an axis of `n_lines`, using the default profile.
pub fn sample_events(class: MotionClass, n_lines: usize, seed: u64) -> Result<Vec<MotionEvent>> {
    sample_events_with(&MotionProfile::default(), class, n_lines, seed)
}

/// Each of the six delta components gets an independent magnitude drawn
/// uniformly from the class range `(lo, hi]` and a uniform random sign.
/// Draw order is fixed: per event, rotations x..z then translations x..z.
pub fn sample_events_with(
    profile: &MotionProfile,
    class: MotionClass,
    n_lines: usize,
    seed: u64,
) -> Result<Vec<MotionEvent>> {
    if n_lines < 4 {
        return Err(Error::Argument(format!("need at least 4 phase-encode lines, got {n_lines}")));
    }
    profile.validate()?;
    let range = match class {
        MotionClass::None => return Ok(Vec::new()),
        MotionClass::Mild => profile.mild,
        MotionClass::Severe => profile.severe,
    };
    let mut rng = seeded(seed);
    let mut draw = |(lo, hi): (f64, f64)| {
        // gen::<f64>() is in [0, 1), so hi - u * (hi - lo) is in (lo, hi].
        let u: f64 = rng.gen();
        let magnitude = hi - u * (hi - lo);
        if rng.gen::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    };
    Ok(profile
        .lines_for(n_lines)
        .into_iter()
        .map(|line| {
            let rot = std::array::from_fn(|_| draw(range.rot));
            let trans = std::array::from_fn(|_| draw(range.trans));
            MotionEvent {
                line,
                delta: RigidPose { rot, trans },
            }
        })
        .collect())
}

/// One pose per phase-encode line.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionCurve {
    pub poses: Vec<RigidPose>,
    pub ramp_width: usize,
    pub events: Vec<MotionEvent>,
}

impl MotionCurve {
    pub fn identity(n_lines: usize) -> Self {
        Self {
            poses: vec![RigidPose::IDENTITY; n_lines],
            ramp_width: 1,
            events: Vec::new(),
        }
    }

    pub fn constant(pose: RigidPose, n_lines: usize) -> Self {
        Self {
            poses: vec![pose; n_lines],
            ramp_width: 1,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Number of distinct poses (exact equality).
    pub fn distinct_poses(&self) -> usize {
        self.poses.iter().map(RigidPose::key).collect::<BTreeSet<_>>().len()
    }

    pub fn to_file(&self) -> CurveFile {
        CurveFile {
            n_lines: self.poses.len(),
            ramp_width: self.ramp_width,
            events: self
                .events
                .iter()
                .map(|e| EventRecord {
                    line: e.line,
                    rot: e.delta.rot,
                    trans: e.delta.trans,
                })
                .collect(),
        }
    }
}

/// Ramp weight of an event at line `k`: 0 up to `line - ceil(r/2)`, 1 from
/// `line + floor(r/2)`, linear in between.
fn ramp_weight(k: usize, line: usize, ramp_width: usize) -> f64 {
    let lo = line as f64 - ramp_width.div_ceil(2) as f64;
    ((k as f64 - lo) / ramp_width as f64).clamp(0.0, 1.0)
}

/// Cumulative pose schedule: each event's delta is blended in linearly
/// over `ramp_width` lines and stays applied afterwards.
pub fn build_curve(events: &[MotionEvent], n_lines: usize, ramp_width: usize) -> Result<MotionCurve> {
    if ramp_width == 0 {
        return Err(Error::Argument("ramp width must be at least 1".into()));
    }
    for e in events {
        if e.line >= n_lines {
            return Err(Error::Argument(format!("event line {} outside 0..{n_lines}", e.line)));
        }
        if !e.delta.is_finite() {
            return Err(Error::Argument(format!("event at line {} has a non-finite delta", e.line)));
        }
    }
    for w in events.windows(2) {
        if w[1].line <= w[0].line {
            return Err(Error::Argument(format!(
                "events must be strictly increasing by line ({} then {})",
                w[0].line, w[1].line
            )));
        }
        if w[1].line - w[0].line <= ramp_width {
            return Err(Error::Argument(format!(
                "ramps of width {ramp_width} at lines {} and {} overlap",
                w[0].line, w[1].line
            )));
        }
    }
    let poses = (0..n_lines)
        .map(|k| {
            events.iter().fold(RigidPose::IDENTITY, |acc, e| {
                let w = ramp_weight(k, e.line, ramp_width);
                if w == 0.0 {
                    acc
                } else if w == 1.0 {
                    acc + e.delta
                } else {
                    acc + e.delta * w
                }
            })
        })
        .collect();
    Ok(MotionCurve {
        poses,
        ramp_width,
        events: events.to_vec(),
    })
}

/// Shuffle subjects by `seed` and deal classes so counts differ by at most
/// one, remainders going to the lower classes.
pub fn assign_balanced_classes(subject_ids: &[String], seed: u64) -> Result<BTreeMap<String, MotionClass>> {
    if subject_ids.is_empty() {
        return Err(Error::Argument("no subjects to assign".into()));
    }
    let unique: BTreeSet<&String> = subject_ids.iter().collect();
    if unique.len() != subject_ids.len() {
        return Err(Error::Argument("subject ids must be unique".into()));
    }
    let n = subject_ids.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let base = n / 3;
    let rem = n % 3;
    let counts = [base + usize::from(rem > 0), base + usize::from(rem > 1), base];
    let mut out = BTreeMap::new();
    let mut pos = 0;
    for (class, &count) in MotionClass::ALL.iter().zip(&counts) {
        for &i in &order[pos..pos + count] {
            out.insert(subject_ids[i].clone(), *class);
        }
        pos += count;
    }
    Ok(out)
}

/// Serialized motion curve: enough to rebuild the schedule exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub n_lines: usize,
    pub ramp_width: usize,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub line: usize,
    pub rot: [f64; 3],
    pub trans: [f64; 3],
}

impl CurveFile {
    pub fn to_curve(&self) -> Result<MotionCurve> {
        let events: Vec<MotionEvent> = self
            .events
            .iter()
            .map(|e| MotionEvent {
                line: e.line,
                delta: RigidPose::new(e.rot, e.trans),
            })
            .collect();
        build_curve(&events, self.n_lines, self.ramp_width)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
