//! SELD annotation files.
//!
//! One row per active event per label frame:
//!
//! ```text
//! frame,class,source,azimuth,elevation[,distance]
//! ```
//!
//! Frames are 100 ms label frames. Rows are only present while an event is
//! sounding, so a hole in a `(class, source)` run is silence.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::DoA;

/// Length of one label frame.
pub const LABEL_PERIOD_MS: u32 = 100;
/// Label frames in a standard 60 s clip.
pub const DEFAULT_DURATION_FRAMES: u32 = 600;
/// Maximum number of simultaneously active events.
pub const MAX_POLYPHONY: usize = 3;
pub const NUM_CLASSES: usize = 13;

/// Human-readable class names, indexed by class id.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "female speech",
    "male speech",
    "clapping",
    "telephone",
    "laughter",
    "domestic appliance",
    "footsteps",
    "door",
    "music",
    "musical instrument",
    "water tap",
    "bell",
    "knock",
];

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invalid {field}: {message}")]
    Validation {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<MetadataError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One of the 13 sound event classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ClassId(u8);

impl ClassId {
    pub fn new(id: u32) -> Option<Self> {
        (id < NUM_CLASSES as u32).then_some(ClassId(id as u8))
    }

    pub fn all() -> impl Iterator<Item = ClassId> {
        (0..NUM_CLASSES as u8).map(ClassId)
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn name(self) -> &'static str {
        CLASS_NAMES[self.index()]
    }

    /// Directory name used in asset trees: lowercase, underscores for spaces.
    pub fn dir_name(self) -> String {
        self.name().replace(' ', "_")
    }

    /// Accepts either the display name or the directory name.
    pub fn from_name(name: &str) -> Option<Self> {
        let wanted = name.trim().to_ascii_lowercase().replace('_', " ");
        CLASS_NAMES
            .iter()
            .position(|n| *n == wanted)
            .map(|i| ClassId(i as u8))
    }
}

impl TryFrom<u8> for ClassId {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        ClassId::new(u32::from(value)).ok_or_else(|| format!("class id {value} out of range 0..12"))
    }
}

impl From<ClassId> for u8 {
    fn from(c: ClassId) -> u8 {
        c.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventAnnotation {
    pub frame: u32,
    pub class: ClassId,
    pub source: u32,
    pub doa: DoA,
    /// Passed through untouched, in whatever unit the input used.
    pub distance: Option<f64>,
}

/// A parsed annotation file.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneMetadata {
    pub clip_id: String,
    pub annotations: Vec<EventAnnotation>,
    /// Clip length in label frames; at least one past the last annotated frame.
    pub duration_frames: u32,
}

impl SceneMetadata {
    /// Wraps annotations, setting the duration to just cover them.
    pub fn new(clip_id: impl Into<String>, annotations: Vec<EventAnnotation>) -> Self {
        let duration_frames = annotations.iter().map(|a| a.frame + 1).max().unwrap_or(0);
        SceneMetadata {
            clip_id: clip_id.into(),
            annotations,
            duration_frames,
        }
    }

    pub fn with_duration(mut self, duration_frames: u32) -> Self {
        self.duration_frames = self.duration_frames.max(duration_frames);
        self
    }

    pub fn duration_seconds(&self) -> f64 {
        f64::from(self.duration_frames) * f64::from(LABEL_PERIOD_MS) / 1000.0
    }

    /// Classes that occur at least once, in id order.
    pub fn classes(&self) -> Vec<ClassId> {
        let mut seen: Vec<ClassId> = self.annotations.iter().map(|a| a.class).collect();
        seen.sort();
        seen.dedup();
        seen
    }
}

/// One sample of an [`EventTrack`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrackSample {
    pub frame: u32,
    pub doa: DoA,
    pub distance: Option<f64>,
}

/// A gap-free run of annotations for one `(class, source)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct EventTrack {
    pub class: ClassId,
    pub source: u32,
    /// Consecutive label frames, strictly increasing by one.
    pub samples: Vec<TrackSample>,
}

impl EventTrack {
    pub fn first_frame(&self) -> u32 {
        self.samples[0].frame
    }

    pub fn last_frame(&self) -> u32 {
        self.samples[self.samples.len() - 1].frame
    }
}

/// Parses an annotation stream.
///
/// ```
/// use panoseld::metadata::parse_metadata;
///
/// let scene = parse_metadata("10,3,0,45,-10,150\n".as_bytes(), "demo").unwrap();
/// let row = &scene.annotations[0];
/// assert_eq!((row.frame, row.class.index(), row.source), (10, 3, 0));
/// assert_eq!(row.distance, Some(150.0));
/// assert_eq!(scene.duration_frames, 11);
/// ```
pub fn parse_metadata<R: BufRead>(input: R, clip_id: &str) -> Result<SceneMetadata, MetadataError> {
    parse_metadata_with(input, clip_id, &ParseOptions::default())
}

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    /// Accept repeated `(frame, class, source)` keys, as system output that
    /// does not track sources may contain.
    pub allow_duplicate_keys: bool,
}

pub fn parse_metadata_with<R: BufRead>(
    input: R,
    clip_id: &str,
    opts: &ParseOptions,
) -> Result<SceneMetadata, MetadataError> {
    let mut annotations = Vec::new();
    let mut keys = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        // a BOM may precede the first row
        let line = line.trim_start_matches('\u{feff}');
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(line, line_no)?;
        if !opts.allow_duplicate_keys && !keys.insert((row.frame, row.class, row.source)) {
            return Err(MetadataError::Validation {
                line: line_no,
                field: "row",
                message: format!(
                    "duplicate (frame {}, class {}, source {})",
                    row.frame,
                    row.class.index(),
                    row.source
                ),
            });
        }
        annotations.push(row);
    }
    Ok(SceneMetadata::new(clip_id, annotations))
}

pub fn parse_metadata_str(input: &str, clip_id: &str) -> Result<SceneMetadata, MetadataError> {
    parse_metadata(input.as_bytes(), clip_id)
}

/// Reads a file; the clip id is the file stem.
pub fn read_metadata_file(path: &Path) -> Result<SceneMetadata, MetadataError> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let attach = |e: MetadataError| MetadataError::File {
        path: path.display().to_string(),
        source: Box::new(e),
    };
    let file = std::fs::File::open(path).map_err(|e| attach(e.into()))?;
    parse_metadata(std::io::BufReader::new(file), &stem).map_err(attach)
}

fn parse_row(line: &str, line_no: usize) -> Result<EventAnnotation, MetadataError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 5 && fields.len() != 6 {
        return Err(MetadataError::Parse {
            line: line_no,
            message: format!("expected 5 or 6 columns, found {}", fields.len()),
        });
    }
    let int = |i: usize, name: &str| -> Result<u32, MetadataError> {
        fields[i].parse::<u32>().map_err(|_| MetadataError::Parse {
            line: line_no,
            message: format!("{name} {:?} is not a non-negative integer", fields[i]),
        })
    };
    let real = |i: usize, name: &str| -> Result<f64, MetadataError> {
        match fields[i].parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(MetadataError::Parse {
                line: line_no,
                message: format!("{name} {:?} is not a number", fields[i]),
            }),
        }
    };
    let invalid = |field: &'static str, message: String| MetadataError::Validation {
        line: line_no,
        field,
        message,
    };

    let frame = int(0, "frame")?;
    let class_raw = int(1, "class")?;
    let source = int(2, "source")?;
    let mut azimuth = real(3, "azimuth")?;
    let elevation = real(4, "elevation")?;
    let distance = if fields.len() == 6 {
        Some(real(5, "distance")?)
    } else {
        None
    };

    let class = ClassId::new(class_raw)
        .ok_or_else(|| invalid("class", format!("{class_raw} not in 0..12")))?;
    if azimuth == 180.0 {
        log::warn!("line {line_no}: azimuth 180 normalized to -180");
        azimuth = -180.0;
    }
    if !(-180.0..180.0).contains(&azimuth) {
        return Err(invalid("azimuth", format!("{azimuth} not in [-180, 180)")));
    }
    if !(-90.0..=90.0).contains(&elevation) {
        return Err(invalid(
            "elevation",
            format!("{elevation} not in [-90, 90]"),
        ));
    }
    if let Some(d) = distance {
        if d < 0.0 {
            return Err(invalid("distance", format!("{d} is negative")));
        }
    }
    let doa = DoA::new(azimuth, elevation).map_err(|e| invalid("elevation", e.to_string()))?;
    Ok(EventAnnotation {
        frame,
        class,
        source,
        doa,
        distance,
    })
}

/// Serializes a scene in the same column layout [`parse_metadata`] reads.
///
/// Rows with a distance get six columns, rows without get five. Reals are
/// written in shortest round-trip form.
pub fn write_metadata(scene: &SceneMetadata) -> String {
    let mut out = String::new();
    for a in &scene.annotations {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            a.frame,
            a.class.index(),
            a.source,
            a.doa.azimuth_deg(),
            a.doa.elevation_deg()
        );
        if let Some(d) = a.distance {
            let _ = write!(out, ",{d}");
        }
        out.push('\n');
    }
    out
}

/// Frames where more than `max_polyphony` distinct `(class, source)` pairs
/// are active, as `(frame, count)` in frame order.
pub fn validate_polyphony(scene: &SceneMetadata, max_polyphony: usize) -> Vec<(u32, usize)> {
    let mut per_frame: BTreeMap<u32, HashSet<(ClassId, u32)>> = BTreeMap::new();
    for a in &scene.annotations {
        per_frame
            .entry(a.frame)
            .or_default()
            .insert((a.class, a.source));
    }
    per_frame
        .into_iter()
        .filter(|(_, active)| active.len() > max_polyphony)
        .map(|(frame, active)| (frame, active.len()))
        .collect()
}

/// Groups annotations into gap-free tracks.
///
/// Tracks are ordered by `(class, source, first frame)`.
pub fn build_tracks(scene: &SceneMetadata) -> Vec<EventTrack> {
    let mut by_pair: BTreeMap<(ClassId, u32), Vec<&EventAnnotation>> = BTreeMap::new();
    for a in &scene.annotations {
        by_pair.entry((a.class, a.source)).or_default().push(a);
    }
    let mut tracks = Vec::new();
    for ((class, source), mut rows) in by_pair {
        rows.sort_by_key(|a| a.frame);
        let mut current: Option<EventTrack> = None;
        for a in rows {
            let sample = TrackSample {
                frame: a.frame,
                doa: a.doa,
                distance: a.distance,
            };
            match current.as_mut() {
                Some(t) if t.last_frame() + 1 == a.frame => t.samples.push(sample),
                _ => {
                    tracks.extend(current.take());
                    current = Some(EventTrack {
                        class,
                        source,
                        samples: vec![sample],
                    });
                }
            }
        }
        tracks.extend(current);
    }
    tracks
}
