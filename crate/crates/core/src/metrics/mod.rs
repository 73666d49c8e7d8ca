//! SELD metrics: location-aware error rate and F-score (ER and F within an
//! angular threshold), class-aware localization error (LE) and
//! localization recall (LR).
//!
//! Matching happens per 100 ms label frame and per class. Inside one
//! `(frame, class)` cell, references and predictions are paired one-to-one
//! to minimize the summed angular distance; source ids are ignored.
//!
//! For each cell:
//!
//! * a pair within the threshold is a location-aware true positive;
//! * a pair beyond it counts as one false positive and one false negative;
//! * leftover predictions are false positives, leftover references false
//!   negatives;
//! * every pair, whatever its distance, is a class-aware true positive and
//!   contributes its distance to LE.
//!
//! Per frame, `S = min(FP, FN)`, `D = max(0, FN - FP)`, `I = max(0, FP - FN)`.
//! Then `ER = (ΣS + ΣD + ΣI) / N_ref`, `F = 2·TP / (2·TP + FP + FN)`,
//! `LE = mean pair distance`, `LR = TP_class / N_ref`.

mod hungarian;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angular_distance, DoA};
use crate::metadata::{
    parse_metadata_with, ClassId, MetadataError, ParseOptions, SceneMetadata, NUM_CLASSES,
};

pub use hungarian::hungarian;

pub const DEFAULT_THRESHOLD_DEG: f64 = 20.0;

/// System output. Same rows as an annotation file; source ids may repeat.
pub type FramePredictions = SceneMetadata;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{role} file {path}: {source}")]
    Parse {
        role: &'static str,
        path: PathBuf,
        #[source]
        source: MetadataError,
    },
    #[error("{0} does not exist")]
    Missing(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("reference is a {0} but prediction is not")]
    KindMismatch(&'static str),
}

/// Pairing within one `(frame, class)` cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchCell {
    /// `(ref index, pred index, angular distance in degrees)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_refs: Vec<usize>,
    pub unmatched_preds: Vec<usize>,
}

impl MatchCell {
    pub fn total_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }
}

/// Optimal one-to-one pairing of references and predictions.
///
/// ```
/// use panoseld::geometry::DoA;
/// use panoseld::metrics::match_frame;
///
/// let d = |az| DoA::new(az, 0.0).unwrap();
/// let cell = match_frame(&[d(0.0), d(90.0)], &[d(88.0), d(2.0)]);
/// assert_eq!(cell.pairs.len(), 2);
/// assert!((cell.total_distance() - 4.0).abs() < 1e-9);
/// ```
pub fn match_frame(refs: &[DoA], preds: &[DoA]) -> MatchCell {
    let cost: Vec<Vec<f64>> = refs
        .iter()
        .map(|r| preds.iter().map(|p| angular_distance(*r, *p)).collect())
        .collect();
    let assignment = if preds.is_empty() {
        vec![None; refs.len()]
    } else {
        hungarian(&cost)
    };
    let mut cell = MatchCell::default();
    let mut pred_used = vec![false; preds.len()];
    for (r, a) in assignment.into_iter().enumerate() {
        match a {
            Some(p) => {
                pred_used[p] = true;
                cell.pairs.push((r, p, cost[r][p]));
            }
            None => cell.unmatched_refs.push(r),
        }
    }
    cell.unmatched_preds = (0..preds.len()).filter(|&p| !pred_used[p]).collect();
    cell
}

/// Raw, additive counts. Reports for several files pool by summing these.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp_loc: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp_class: u64,
    pub n_ref: u64,
    pub n_pred: u64,
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
    /// Sum of pair distances over class-aware true positives, degrees.
    pub le_sum_deg: f64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.tp_loc += o.tp_loc;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tp_class += o.tp_class;
        self.n_ref += o.n_ref;
        self.n_pred += o.n_pred;
        self.substitutions += o.substitutions;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
        self.le_sum_deg += o.le_sum_deg;
    }

    fn add_frame_errors(&mut self, fp: u64, fn_: u64) {
        self.substitutions += fp.min(fn_);
        self.deletions += fn_.saturating_sub(fp);
        self.insertions += fp.saturating_sub(fn_);
    }

    pub fn is_active(&self) -> bool {
        self.n_ref > 0 || self.n_pred > 0
    }

    /// `(S + D + I) / N_ref`. With no references the denominator is taken
    /// as 1, so an empty reference scores 0 unless something was predicted.
    pub fn error_rate(&self) -> f64 {
        let errors = (self.substitutions + self.deletions + self.insertions) as f64;
        errors / self.n_ref.max(1) as f64
    }

    /// Location-aware F-score; 1 when there was nothing to find and nothing
    /// was found.
    pub fn f_score(&self) -> f64 {
        let denom = 2 * self.tp_loc + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp_loc) as f64 / denom as f64
        }
    }

    /// Mean class-aware pair distance; `None` without any pairs.
    pub fn localization_error(&self) -> Option<f64> {
        (self.tp_class > 0).then(|| self.le_sum_deg / self.tp_class as f64)
    }

    /// 1 when there are no references.
    pub fn localization_recall(&self) -> f64 {
        if self.n_ref == 0 {
            1.0
        } else {
            self.tp_class as f64 / self.n_ref as f64
        }
    }
}

/// Accumulated counts, per class and overall.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreCounts {
    pub per_class: [Counts; NUM_CLASSES],
    pub overall: Counts,
    pub warnings: Vec<String>,
}

impl ScoreCounts {
    pub fn merge(&mut self, other: &ScoreCounts) {
        for (a, b) in self.per_class.iter_mut().zip(&other.per_class) {
            a.add(b);
        }
        self.overall.add(&other.overall);
        self.warnings.extend(other.warnings.iter().cloned());
    }

    pub fn report(&self, threshold_deg: f64) -> MetricsReport {
        let per_class: Vec<ClassMetrics> = ClassId::all()
            .map(|c| ClassMetrics {
                class_id: c,
                class_name: c.name().to_owned(),
                metrics: Metrics::from_counts(&self.per_class[c.index()]),
            })
            .collect();
        let active: Vec<&Metrics> = per_class
            .iter()
            .map(|c| &c.metrics)
            .filter(|m| m.counts.is_active())
            .collect();
        let macro_avg = if active.is_empty() {
            MacroMetrics {
                f: 1.0,
                le_deg: None,
                lr: 1.0,
                classes: 0,
            }
        } else {
            let n = active.len() as f64;
            let les: Vec<f64> = active.iter().filter_map(|m| m.le_deg).collect();
            MacroMetrics {
                f: active.iter().map(|m| m.f).sum::<f64>() / n,
                le_deg: (!les.is_empty()).then(|| les.iter().sum::<f64>() / les.len() as f64),
                lr: active.iter().map(|m| m.lr).sum::<f64>() / n,
                classes: active.len(),
            }
        };
        MetricsReport {
            threshold_deg,
            overall: Metrics::from_counts(&self.overall),
            macro_avg,
            per_class,
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub er: f64,
    pub f: f64,
    pub le_deg: Option<f64>,
    pub lr: f64,
    pub counts: Counts,
}

impl Metrics {
    pub fn from_counts(c: &Counts) -> Self {
        Metrics {
            er: c.error_rate(),
            f: c.f_score(),
            le_deg: c.localization_error(),
            lr: c.localization_recall(),
            counts: *c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: ClassId,
    pub class_name: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Averages over classes that appear in the reference or the prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub f: f64,
    /// Skips classes without any pairs.
    pub le_deg: Option<f64>,
    pub lr: f64,
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold_deg: f64,
    /// Micro aggregate: all counts pooled.
    pub overall: Metrics,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    pub per_class: Vec<ClassMetrics>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn class(&self, class: ClassId) -> &Metrics {
        &self.per_class[class.index()].metrics
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Per-class table followed by the headline line: micro ER, macro F/LE/LR.
    pub fn to_table(&self) -> String {
        let pct = |v: f64| format!("{:.1}", v * 100.0);
        let le = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        let mut out = String::new();
        let t = self.threshold_deg;
        let _ = writeln!(
            out,
            "{:<20} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "class",
            format!("ER{t}"),
            format!("F{t}"),
            "LE",
            "LR",
            "N_ref"
        );
        for c in &self.per_class {
            let m = &c.metrics;
            let _ = writeln!(
                out,
                "{:<20} {:>8.2} {:>8} {:>8} {:>8} {:>8}",
                c.class_name,
                m.er,
                pct(m.f),
                le(m.le_deg),
                pct(m.lr),
                m.counts.n_ref
            );
        }
        let _ = writeln!(
            out,
            "{:<20} {:>8.2} {:>8} {:>8} {:>8} {:>8}",
            "overall (micro)",
            self.overall.er,
            pct(self.overall.f),
            le(self.overall.le_deg),
            pct(self.overall.lr),
            self.overall.counts.n_ref
        );
        let _ = writeln!(
            out,
            "headline: ER {:.2} (micro) | F {}% LE {} LR {}% (macro over {} classes)",
            self.overall.er,
            pct(self.macro_avg.f),
            le(self.macro_avg.le_deg),
            pct(self.macro_avg.lr),
            self.macro_avg.classes
        );
        out
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

type Cells = BTreeMap<u32, [Vec<DoA>; NUM_CLASSES]>;

fn group(scene: &SceneMetadata) -> Cells {
    let mut cells: Cells = BTreeMap::new();
    for a in &scene.annotations {
        cells.entry(a.frame).or_default()[a.class.index()].push(a.doa);
    }
    cells
}

/// Raw counts for one reference/prediction pair.
pub fn score_counts(
    refs: &SceneMetadata,
    preds: &FramePredictions,
    threshold_deg: f64,
) -> ScoreCounts {
    let ref_cells = group(refs);
    let pred_cells = group(preds);
    let mut out = ScoreCounts::default();

    let beyond = preds
        .annotations
        .iter()
        .filter(|a| a.frame >= refs.duration_frames)
        .count();
    if beyond > 0 {
        let msg = format!(
            "{}: {beyond} predicted rows at or beyond reference duration ({} frames); scored as insertions",
            refs.clip_id, refs.duration_frames
        );
        log::warn!("{msg}");
        out.warnings.push(msg);
    }

    let empty: [Vec<DoA>; NUM_CLASSES] = Default::default();
    let mut frames: Vec<u32> = ref_cells.keys().chain(pred_cells.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    for frame in frames {
        let r = ref_cells.get(&frame).unwrap_or(&empty);
        let p = pred_cells.get(&frame).unwrap_or(&empty);
        let (mut frame_fp, mut frame_fn) = (0, 0);
        for class in 0..NUM_CLASSES {
            if r[class].is_empty() && p[class].is_empty() {
                continue;
            }
            let cell = match_frame(&r[class], &p[class]);
            let c = &mut out.per_class[class];
            let within = cell.pairs.iter().filter(|x| x.2 <= threshold_deg).count() as u64;
            let outside = cell.pairs.len() as u64 - within;
            let fp = cell.unmatched_preds.len() as u64 + outside;
            let fn_ = cell.unmatched_refs.len() as u64 + outside;
            c.tp_loc += within;
            c.fp += fp;
            c.fn_ += fn_;
            c.tp_class += cell.pairs.len() as u64;
            c.le_sum_deg += cell.total_distance();
            c.n_ref += r[class].len() as u64;
            c.n_pred += p[class].len() as u64;
            c.add_frame_errors(fp, fn_);
            frame_fp += fp;
            frame_fn += fn_;
        }
        out.overall.add_frame_errors(frame_fp, frame_fn);
    }

    // pooled in class order; S/D/I for the overall row come from whole frames
    let (s, d, i) = (
        out.overall.substitutions,
        out.overall.deletions,
        out.overall.insertions,
    );
    let mut overall = Counts::default();
    for c in &out.per_class {
        overall.add(c);
    }
    overall.substitutions = s;
    overall.deletions = d;
    overall.insertions = i;
    out.overall = overall;
    out
}

/// Scores predictions against references.
pub fn score(refs: &SceneMetadata, preds: &FramePredictions, threshold_deg: f64) -> MetricsReport {
    score_counts(refs, preds, threshold_deg).report(threshold_deg)
}

fn read_scene(
    path: &Path,
    role: &'static str,
    strict: bool,
) -> Result<SceneMetadata, MetricsError> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            MetricsError::Missing(path.to_owned())
        } else {
            MetricsError::Io {
                path: path.to_owned(),
                source,
            }
        }
    })?;
    let opts = ParseOptions {
        allow_duplicate_keys: !strict,
    };
    parse_metadata_with(std::io::BufReader::new(file), &stem, &opts).map_err(|source| {
        MetricsError::Parse {
            role,
            path: path.to_owned(),
            source,
        }
    })
}

fn csv_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, MetricsError> {
    let entries = std::fs::read_dir(dir).map_err(|source| MetricsError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut out = BTreeMap::new();
    for e in entries {
        let e = e.map_err(|source| MetricsError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let path = e.path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("csv"))
        {
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            out.insert(stem, path);
        }
    }
    Ok(out)
}

/// Scores one file against another, or every same-named pair of `.csv`
/// files in two directories. Unpaired names produce warnings; counts are
/// pooled over the pairs that exist.
///
/// References are parsed strictly; predictions may repeat
/// `(frame, class, source)` keys.
pub fn score_files(
    ref_path: &Path,
    pred_path: &Path,
    threshold_deg: f64,
) -> Result<MetricsReport, MetricsError> {
    for p in [ref_path, pred_path] {
        if !p.exists() {
            return Err(MetricsError::Missing(p.to_owned()));
        }
    }
    if !ref_path.is_dir() {
        if pred_path.is_dir() {
            return Err(MetricsError::KindMismatch("file"));
        }
        let refs = read_scene(ref_path, "reference", true)?;
        let preds = read_scene(pred_path, "prediction", false)?;
        return Ok(score(&refs, &preds, threshold_deg));
    }
    if !pred_path.is_dir() {
        return Err(MetricsError::KindMismatch("directory"));
    }
    let refs = csv_files(ref_path)?;
    let preds = csv_files(pred_path)?;
    let mut total = ScoreCounts::default();
    for (stem, rp) in &refs {
        match preds.get(stem) {
            Some(pp) => {
                let r = read_scene(rp, "reference", true)?;
                let p = read_scene(pp, "prediction", false)?;
                total.merge(&score_counts(&r, &p, threshold_deg));
            }
            None => {
                let msg = format!("no prediction for reference {stem}");
                log::warn!("{msg}");
                total.warnings.push(msg);
            }
        }
    }
    for stem in preds.keys().filter(|s| !refs.contains_key(*s)) {
        let msg = format!("no reference for prediction {stem}");
        log::warn!("{msg}");
        total.warnings.push(msg);
    }
    Ok(total.report(threshold_deg))
}
