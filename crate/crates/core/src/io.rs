//! On-disk formats: correspondence and pose documents (JSON) and sweep tables
//! (comma-separated). Every float is written with 17 significant digits so a
//! write/read cycle is lossless.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::metrics::Pose;
use crate::pose::{CorrespondenceSet, Intrinsics, RelativePoseEstimate};
use crate::so3::{rotation_deviation, Mat3, Rotation, Vec3};
use crate::synth::{SweepKind, SweepRecord, SweepReport};

/// Rotations read from disk must be this close to SO(3) to be taken as-is.
pub const ROTATION_READ_TOLERANCE: f64 = 1e-6;
/// Up to this deviation a rotation is projected back onto SO(3) with a warning.
pub const ROTATION_REPAIR_TOLERANCE: f64 = 1e-3;

/// Formats a float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Pretty JSON whose numbers carry 17 significant digits.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with exact floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON output is UTF-8")
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        Error::InvalidInput(format!("{origin}: line {}, column {}: {e}", e.line(), e.column()))
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: io::Error| Error::InvalidInput(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceFile {
    pub intrinsics1: Intrinsics,
    pub intrinsics2: Intrinsics,
    pub matches: Vec<[f64; 4]>,
}

impl CorrespondenceFile {
    pub fn from_set(set: &CorrespondenceSet) -> Self {
        CorrespondenceFile { intrinsics1: set.intrinsics1, intrinsics2: set.intrinsics2, matches: set.to_matches() }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let file: CorrespondenceFile = parse_json(text, origin)?;
        file.to_set().map_err(|e| Error::InvalidInput(format!("{origin}: {e}")))?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn to_set(&self) -> Result<CorrespondenceSet> {
        CorrespondenceSet::from_pixels(self.intrinsics1, self.intrinsics2, &self.matches)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// A relative pose on disk. `rotation` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFile {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// How the solver was started: `prior`, `prior-with-fallback` or `default-axes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initialization: Option<String>,
}

impl PoseFile {
    pub fn from_pose(rotation: &Rotation, translation: &Vec3) -> Self {
        PoseFile {
            rotation: rotation.to_row_major(),
            translation: [translation.x, translation.y, translation.z],
            axis: None,
            metric: None,
            converged: None,
            initialization: None,
        }
    }

    pub fn from_estimate(est: &RelativePoseEstimate) -> Self {
        PoseFile {
            axis: Some(est.axis.index() as u8),
            metric: Some(est.metric),
            ..Self::from_pose(&est.rotation, &est.t_dir)
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let file: PoseFile = parse_json(text, origin)?;
        if !file.rotation.iter().chain(&file.translation).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("{origin}: pose contains non-finite numbers")));
        }
        if let Some(a) = file.axis {
            if !(1..=3).contains(&a) {
                return Err(Error::InvalidInput(format!("{origin}: axis must be 1, 2 or 3, got {a}")));
            }
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    /// Validated pose; the second value is a warning when the rotation had to
    /// be re-orthonormalized.
    pub fn to_pose(&self) -> Result<(Pose, Option<String>)> {
        let m = Mat3::from_row_slice(&self.rotation);
        let deviation = rotation_deviation(&m);
        let (rotation, warning) = if deviation <= ROTATION_READ_TOLERANCE {
            (Rotation::from_matrix_unchecked(m), None)
        } else if deviation <= ROTATION_REPAIR_TOLERANCE {
            let warning = format!("rotation deviates from SO(3) by {deviation:e}; re-orthonormalized");
            (Rotation::nearest(&m)?, Some(warning))
        } else {
            return Err(Error::InvalidRotation { deviation });
        };
        let t = Vec3::from_row_slice(&self.translation);
        Ok((Pose { rotation, translation: t }, warning))
    }
}

/// Pose files named by `path`: the file itself, or every `*.json` inside a
/// directory in file-name order.
pub fn pose_paths(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

impl SweepReport {
    pub fn csv_header(kind: SweepKind) -> String {
        format!("{},mean_eps_r_deg,mean_eps_t_deg,failures,pairs", kind.parameter_name())
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header(self.kind);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_f64(r.parameter),
                format_f64(r.mean_eps_r),
                format_f64(r.mean_eps_t),
                r.failures,
                r.pairs
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::InvalidInput("empty sweep report".into()))?;
        let kind = [SweepKind::Noise, SweepKind::Mismatch]
            .into_iter()
            .find(|&k| header == Self::csv_header(k))
            .ok_or_else(|| Error::InvalidInput(format!("line 1: unrecognized header {header:?}")))?;
        let mut records = Vec::new();
        for (n, line) in lines {
            let bad = |what: &str| Error::InvalidInput(format!("line {}: {what}", n + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad count {s:?}")));
            records.push(SweepRecord {
                parameter: float(fields[0])?,
                mean_eps_r: float(fields[1])?,
                mean_eps_t: float(fields[2])?,
                failures: int(fields[3])?,
                pairs: int(fields[4])?,
            });
        }
        Ok(SweepReport { kind, records })
    }
}
