//! Batch orchestration behind the `generate`, `verify` and `score` commands.
//!
//! A batch is driven by one TOML file:
//!
//! ```toml
//! metadata_dir = "metadata"      # *.csv annotation files, one per clip
//! tiles_root = "assets/tiles"
//! backgrounds_root = "assets/backgrounds"
//! output_dir = "out"
//! seed = 2024
//! workers = 4
//! # optional, shown with defaults
//! fps = 30.0
//! width = 1920
//! height = 960
//! tile_size = 50
//! marker_mode = false
//! output_format = "video"        # or "png"
//! min_duration_frames = 600
//! # audio_dir = "foa"            # <stem>.wav muxed into <stem>.mp4
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::{AssetError, AssetLibrary, LoadOptions, DEFAULT_FRAME_CAP};
use crate::external::{CommandTemplate, DEFAULT_DECODER, DEFAULT_ENCODER, DEFAULT_MUXER};
use crate::metadata::{
    read_metadata_file, validate_polyphony, EventAnnotation, MetadataError, SceneMetadata,
    DEFAULT_DURATION_FRAMES, LABEL_PERIOD_MS, MAX_POLYPHONY,
};
use crate::metrics::{
    score_counts, score_files, MetricsError, MetricsReport, ScoreCounts, DEFAULT_THRESHOLD_DEG,
};
use crate::renderer::{
    plan_render, recover_markers, render_clip, EncoderSink, PngDirSink, RenderConfig, RenderError,
    DEFAULT_FPS,
};
use crate::seeding::clip_seed;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Assets(#[from] AssetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// Raw frames piped into the encoder command.
    #[default]
    Video,
    /// Numbered PNG frames, one directory per clip.
    Png,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub metadata_dir: PathBuf,
    pub tiles_root: PathBuf,
    pub backgrounds_root: PathBuf,
    pub output_dir: PathBuf,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub tile_size: u32,
    pub seed: u64,
    pub workers: usize,
    pub marker_mode: bool,
    pub output_format: OutputFormat,
    /// Clips shorter than this (in label frames) are padded to it.
    pub min_duration_frames: u32,
    pub frame_cap: usize,
    pub encoder: CommandTemplate,
    pub decoder: CommandTemplate,
    pub muxer: CommandTemplate,
    pub audio_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            metadata_dir: "metadata".into(),
            tiles_root: "assets/tiles".into(),
            backgrounds_root: "assets/backgrounds".into(),
            output_dir: "out".into(),
            fps: DEFAULT_FPS,
            width: crate::assets::DEFAULT_WIDTH,
            height: crate::assets::DEFAULT_HEIGHT,
            tile_size: crate::assets::DEFAULT_TILE_SIZE,
            seed: 0,
            workers: 1,
            marker_mode: false,
            output_format: OutputFormat::Video,
            min_duration_frames: DEFAULT_DURATION_FRAMES,
            frame_cap: DEFAULT_FRAME_CAP,
            encoder: CommandTemplate::parse(DEFAULT_ENCODER),
            decoder: CommandTemplate::parse(DEFAULT_DECODER),
            muxer: CommandTemplate::parse(DEFAULT_MUXER),
            audio_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|message| PipelineError::Config {
            path: path.to_owned(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.metadata_dir,
            &mut cfg.tiles_root,
            &mut cfg.backgrounds_root,
            &mut cfg.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(a) = cfg.audio_dir.as_mut() {
            if a.is_relative() {
                *a = base.join(&*a);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.workers == 0 {
            return Err(PipelineError::Invalid("workers must be at least 1".into()));
        }
        self.render_config(0)
            .validate()
            .map_err(|e| PipelineError::Invalid(e.to_string()))
    }

    pub fn render_config(&self, seed: u64) -> RenderConfig {
        RenderConfig {
            fps: self.fps,
            width: self.width,
            height: self.height,
            tile_size: self.tile_size,
            marker_mode: self.marker_mode,
            seed,
        }
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            tile_size: self.tile_size,
            background_width: self.width,
            background_height: self.height,
            frame_cap: self.frame_cap,
            decode_fps: self.fps,
            decoder: (!self.decoder.is_empty()).then(|| self.decoder.clone()),
        }
    }

    /// `*.csv` files in the metadata directory, sorted by name.
    pub fn metadata_files(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let io = |source| PipelineError::Io {
            path: self.metadata_dir.clone(),
            source,
        };
        let mut files = Vec::new();
        for entry in std::fs::read_dir(&self.metadata_dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.is_file()
                && path
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
            {
                files.push(path);
            }
        }
        files.sort();
        Ok(files)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClipStatus {
    Ok,
    /// Rendered, but the audio mux failed.
    VideoOnly(String),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipReport {
    pub clip_id: String,
    pub status: ClipStatus,
    pub frames: u64,
    pub wall_ms: u128,
    pub output: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl fmt::Display for ClipReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (status, detail) = match &self.status {
            ClipStatus::Ok => ("ok", None),
            ClipStatus::VideoOnly(w) => ("video-only", Some(w)),
            ClipStatus::Failed(e) => ("failed", Some(e)),
        };
        write!(
            f,
            "clip={} status={status} frames={} wall_ms={}",
            self.clip_id, self.frames, self.wall_ms
        )?;
        if let Some(d) = detail {
            write!(f, " detail={d:?}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchSummary {
    /// In clip-name order.
    pub clips: Vec<ClipReport>,
}

impl BatchSummary {
    pub fn failed(&self) -> usize {
        self.clips
            .iter()
            .filter(|c| matches!(c.status, ClipStatus::Failed(_)))
            .count()
    }

    pub fn all_succeeded(&self) -> bool {
        self.failed() == 0
    }
}

#[derive(Debug, Error)]
enum ClipError {
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error("polyphony above {MAX_POLYPHONY} at frames {0:?}")]
    Polyphony(Vec<(u32, usize)>),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Runs `job` over `items` on `workers` threads; results keep item order.
fn run_pool<T: Sync, R: Send>(items: &[T], workers: usize, job: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = job(item);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(Option::unwrap)
        .collect()
}

fn load_scene(path: &Path, config: &PipelineConfig) -> Result<SceneMetadata, ClipError> {
    let scene = read_metadata_file(path)?;
    let violations = validate_polyphony(&scene, MAX_POLYPHONY);
    if !violations.is_empty() {
        return Err(ClipError::Polyphony(violations));
    }
    Ok(scene.with_duration(config.min_duration_frames))
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Renders every clip in the metadata directory.
///
/// Clip failures are recorded in the summary and do not stop the batch.
/// `on_clip` is called once per finished clip, from the worker that ran it.
pub fn generate(
    config: &PipelineConfig,
    on_clip: &(dyn Fn(&ClipReport) + Sync),
) -> Result<BatchSummary, PipelineError> {
    config.validate()?;
    let files = config.metadata_files()?;
    let library = if config.marker_mode {
        AssetLibrary::default()
    } else {
        let lib = AssetLibrary::load(
            &config.tiles_root,
            &config.backgrounds_root,
            &config.load_options(),
        )?;
        log::info!("asset library:\n{}", lib.report);
        lib
    };
    std::fs::create_dir_all(&config.output_dir).map_err(|source| PipelineError::Io {
        path: config.output_dir.clone(),
        source,
    })?;

    let clips = run_pool(&files, config.workers, |path| {
        let started = Instant::now();
        let clip_id = stem_of(path);
        let mut report = ClipReport {
            clip_id: clip_id.clone(),
            status: ClipStatus::Ok,
            frames: 0,
            wall_ms: 0,
            output: None,
            manifest: None,
        };
        match generate_clip(path, &clip_id, config, &library, &mut report) {
            Ok(()) => {}
            Err(e) => report.status = ClipStatus::Failed(e.to_string()),
        }
        report.wall_ms = started.elapsed().as_millis();
        on_clip(&report);
        report
    });
    Ok(BatchSummary { clips })
}

fn generate_clip(
    path: &Path,
    clip_id: &str,
    config: &PipelineConfig,
    library: &AssetLibrary,
    report: &mut ClipReport,
) -> Result<(), ClipError> {
    let scene = load_scene(path, config)?;
    let seed = clip_seed(config.seed, clip_id);
    let plan = plan_render(&scene, library, &config.render_config(seed))?;

    let manifest = match config.output_format {
        OutputFormat::Png => {
            let dir = config.output_dir.join(clip_id);
            if dir.exists() {
                std::fs::remove_dir_all(&dir)?;
            }
            let mut sink = PngDirSink::create(&dir)?;
            let m = render_clip(&plan, &mut sink)?;
            report.output = Some(dir);
            m
        }
        OutputFormat::Video => {
            let video = config.output_dir.join(format!("{clip_id}.mp4"));
            let mut sink =
                EncoderSink::spawn(&config.encoder, plan.width, plan.height, plan.fps, &video)?;
            let m = render_clip(&plan, &mut sink)?;
            report.output = Some(video.clone());
            if let Some(audio_dir) = &config.audio_dir {
                let wav = audio_dir.join(format!("{clip_id}.wav"));
                if wav.exists() {
                    if let Err(e) = mux_audio(&config.muxer, &video, &wav) {
                        log::warn!("{clip_id}: audio mux failed, keeping video only: {e}");
                        report.status = ClipStatus::VideoOnly(e);
                    }
                } else {
                    log::warn!("{clip_id}: no audio file {}", wav.display());
                }
            }
            m
        }
    };
    report.frames = manifest.frame_count;
    let manifest_path = config.output_dir.join(format!("{clip_id}.json"));
    std::fs::write(&manifest_path, manifest.to_json())?;
    report.manifest = Some(manifest_path);
    Ok(())
}

/// Muxes `audio` into `video` in place. The audio stream is copied as is.
pub fn mux_audio(template: &CommandTemplate, video: &Path, audio: &Path) -> Result<(), String> {
    let tmp = video.with_extension("mux.mp4");
    let vars = HashMap::from([
        ("video", video.display().to_string()),
        ("audio", audio.display().to_string()),
        ("output", tmp.display().to_string()),
    ]);
    let mut cmd = template.command(&vars).ok_or("empty mux command")?;
    let status = cmd
        .status()
        .map_err(|e| format!("failed to start {}: {e}", template.program()))?;
    if !status.success() {
        let _ = std::fs::remove_file(&tmp);
        return Err(format!("{} exited with {status}", template.program()));
    }
    std::fs::rename(&tmp, video).map_err(|e| e.to_string())
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub report: MetricsReport,
    /// `(clip id, error)` for clips that could not be checked.
    pub failures: Vec<(String, String)>,
}

/// Converts per-frame marker detections back to annotations on the label
/// timebase: each label frame takes the detections of the video frame
/// nearest to it in time.
fn recovered_scene(
    scene: &SceneMetadata,
    config: &PipelineConfig,
) -> Result<SceneMetadata, ClipError> {
    let empty = AssetLibrary::default();
    let render_cfg = RenderConfig {
        marker_mode: true,
        ..config.render_config(clip_seed(config.seed, &scene.clip_id))
    };
    let plan = plan_render(scene, &empty, &render_cfg)?;
    let frames_per_label = plan.fps * f64::from(LABEL_PERIOD_MS) / 1000.0;
    let mut wanted: HashMap<u64, Vec<u32>> = HashMap::new();
    for k in 0..scene.duration_frames {
        let v = (f64::from(k) * frames_per_label).round() as u64;
        if v < plan.frame_count {
            wanted.entry(v).or_default().push(k);
        }
    }
    let mut recovered = Vec::new();
    let mut index = 0u64;
    let mut sink = |frame: &RgbImage| -> std::io::Result<()> {
        if let Some(labels) = wanted.get(&index) {
            for m in recover_markers(frame, &plan, index) {
                for &k in labels {
                    recovered.push(EventAnnotation {
                        frame: k,
                        class: m.class,
                        source: m.source,
                        doa: m.doa,
                        distance: None,
                    });
                }
            }
        }
        index += 1;
        Ok(())
    };
    render_clip(&plan, &mut sink)?;
    let mut preds = SceneMetadata::new(scene.clip_id.clone(), recovered);
    preds.duration_frames = scene.duration_frames;
    Ok(preds)
}

/// Marker-mode render, read back, and score against the annotations.
pub fn verify_scene(scene: &SceneMetadata, config: &PipelineConfig) -> Result<ScoreCounts, String> {
    let preds = recovered_scene(scene, config).map_err(|e| e.to_string())?;
    Ok(score_counts(scene, &preds, DEFAULT_THRESHOLD_DEG))
}

/// Checks render alignment for every clip: each is rendered in marker mode,
/// the markers are located and inverse-projected, and the result is scored
/// against the source annotations. Counts are pooled over clips.
pub fn verify(config: &PipelineConfig) -> Result<VerifyOutcome, PipelineError> {
    config.validate()?;
    let files = config.metadata_files()?;
    let results = run_pool(&files, config.workers, |path| {
        let clip_id = stem_of(path);
        let scene = load_scene(path, config).map_err(|e| e.to_string())?;
        let counts = verify_scene(&scene, config)?;
        log::info!("verified {clip_id}");
        Ok::<_, String>(counts)
    });
    let mut total = ScoreCounts::default();
    let mut failures = Vec::new();
    for (path, r) in files.iter().zip(results) {
        match r {
            Ok(c) => total.merge(&c),
            Err(e) => failures.push((stem_of(path), e)),
        }
    }
    Ok(VerifyOutcome {
        report: total.report(DEFAULT_THRESHOLD_DEG),
        failures,
    })
}

/// Scores prediction files against references and optionally writes the
/// JSON report.
pub fn score_cmd(
    ref_path: &Path,
    pred_path: &Path,
    threshold_deg: f64,
    report_path: Option<&Path>,
) -> Result<MetricsReport, ScoreCmdError> {
    let report = score_files(ref_path, pred_path, threshold_deg)?;
    if let Some(out) = report_path {
        std::fs::write(out, report.to_json()).map_err(|source| ScoreCmdError::Write {
            path: out.to_owned(),
            source,
        })?;
    }
    Ok(report)
}

#[derive(Debug, Error)]
pub enum ScoreCmdError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
