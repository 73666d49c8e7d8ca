//! Frame compositing.
//!
//! A [`RenderPlan`] fixes every random choice for a clip (background, one
//! tile per track, stacking order). Rendering is then a pure function of the
//! plan and the video frame index.
//!
//! Tiles are anchored by their center: a tile of size `s` whose center
//! projects to integer pixel `(cx, cy)` covers columns `[cx - s/2, cx + s/2)`
//! (wrapping around the seam) and rows `[cy - s/2, cy + s/2)` (clipped at the
//! top and bottom).

mod markers;
mod sink;

use std::collections::HashMap;

use image::{Rgb, RgbImage, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::{
    select_background, select_tile, AssetError, AssetLibrary, AssetTile, Background,
};
use crate::geometry::{
    doa_to_pixel, interpolate_track, track_doa_at, video_frame_to_label_position,
};
use crate::metadata::{build_tracks, ClassId, EventTrack, SceneMetadata, LABEL_PERIOD_MS};
use crate::seeding::{background_rng, track_rng};

pub use markers::{marker_color, recover_markers, RecoveredMarker};
pub use sink::{EncoderSink, FrameSink, NullSink, PngDirSink};

pub const DEFAULT_FPS: f64 = 30.0;
pub const TOOL_VERSION: &str = concat!("panoseld ", env!("CARGO_PKG_VERSION"));
pub const MARKER_BACKGROUND_ID: &str = "marker:black";
pub const MARKER_ASSET_ID: &str = "marker";

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("invalid render settings: {0}")]
    Config(String),
    #[error("manifest does not match scene: {0}")]
    ManifestMismatch(String),
    #[error("frame sink failed after {frames_emitted} frames: {source}")]
    Sink {
        frames_emitted: u64,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderConfig {
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub tile_size: u32,
    pub marker_mode: bool,
    /// Already mixed with the clip name; see [`crate::seeding::clip_seed`].
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            fps: DEFAULT_FPS,
            width: crate::assets::DEFAULT_WIDTH,
            height: crate::assets::DEFAULT_HEIGHT,
            tile_size: crate::assets::DEFAULT_TILE_SIZE,
            marker_mode: false,
            seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(RenderError::Config(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        if self.tile_size == 0 || !self.tile_size.is_multiple_of(2) {
            return Err(RenderError::Config(format!(
                "tile size must be even, got {}",
                self.tile_size
            )));
        }
        if self.tile_size >= self.width.min(self.height) / 2 {
            return Err(RenderError::Config(format!(
                "tile size {} must be below half of min({}, {})",
                self.tile_size, self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PlannedTrack<'a> {
    pub track: EventTrack,
    /// `None` in marker mode.
    pub tile: Option<&'a AssetTile>,
    pub asset_id: String,
    /// Higher draws later, i.e. on top.
    pub z_order: u32,
    pub first_video_frame: Option<u64>,
    pub last_video_frame: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RenderPlan<'a> {
    pub clip_id: String,
    pub seed: u64,
    pub background_id: String,
    /// `None` in marker mode, where the canvas starts black.
    pub background: Option<&'a Background>,
    /// Sorted by ascending `z_order`.
    pub tracks: Vec<PlannedTrack<'a>>,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub tile_size: u32,
    pub marker_mode: bool,
    pub frame_count: u64,
}

impl RenderPlan<'_> {
    /// Position of a video frame on the label timebase, in label frames.
    pub fn label_position(&self, video_frame: u64) -> f64 {
        video_frame_to_label_position(video_frame, self.fps, LABEL_PERIOD_MS)
    }
}

/// `ceil(duration · fps)`, tolerant of float noise in the product.
pub fn frame_count(duration_frames: u32, fps: f64) -> u64 {
    let exact = f64::from(duration_frames) * f64::from(LABEL_PERIOD_MS) * fps / 1000.0;
    (exact - 1e-9).ceil().max(0.0) as u64
}

fn video_span(track: &EventTrack, fps: f64) -> (Option<u64>, Option<u64>) {
    let frames = interpolate_track(track, LABEL_PERIOD_MS, fps);
    (frames.first().map(|f| f.0), frames.last().map(|f| f.0))
}

/// Sorts tracks into stacking order: later onset on top, ties by source
/// then class.
fn stacking_order(tracks: &[EventTrack]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..tracks.len()).collect();
    order.sort_by_key(|&i| (tracks[i].first_frame(), tracks[i].source, tracks[i].class));
    order
}

/// Chooses background and tiles for a scene.
///
/// Fails before anything is drawn if a class in the scene has no tiles. In
/// marker mode the library is not consulted.
pub fn plan_render<'a>(
    scene: &SceneMetadata,
    library: &'a AssetLibrary,
    config: &RenderConfig,
) -> Result<RenderPlan<'a>, RenderError> {
    config.validate()?;
    let tracks = build_tracks(scene);

    // ordinal of each track among the tracks of its (class, source)
    let mut ordinals: HashMap<(ClassId, u32), u32> = HashMap::new();
    let mut chosen: Vec<(Option<&'a AssetTile>, String)> = Vec::with_capacity(tracks.len());
    for t in &tracks {
        let ordinal = ordinals.entry((t.class, t.source)).or_insert(0);
        if config.marker_mode {
            chosen.push((None, MARKER_ASSET_ID.to_owned()));
        } else {
            let mut rng = track_rng(config.seed, t.class, t.source, *ordinal);
            let tile = select_tile(library, t.class, &mut rng, &scene.clip_id)?;
            chosen.push((Some(tile), tile.asset_id.clone()));
        }
        *ordinal += 1;
    }

    let (background, background_id) = if config.marker_mode {
        (None, MARKER_BACKGROUND_ID.to_owned())
    } else {
        if library.backgrounds.is_empty() {
            return Err(AssetError::NoBackgrounds(Default::default()).into());
        }
        let bg = select_background(library, &mut background_rng(config.seed));
        (Some(bg), bg.background_id.clone())
    };

    let order = stacking_order(&tracks);
    let mut slots: Vec<Option<(EventTrack, Option<&'a AssetTile>, String)>> = tracks
        .into_iter()
        .zip(chosen)
        .map(|(t, (tile, id))| Some((t, tile, id)))
        .collect();
    let planned = order
        .into_iter()
        .enumerate()
        .map(|(z, i)| {
            let (track, tile, asset_id) = slots[i].take().unwrap();
            let (first_video_frame, last_video_frame) = video_span(&track, config.fps);
            PlannedTrack {
                track,
                tile,
                asset_id,
                z_order: z as u32,
                first_video_frame,
                last_video_frame,
            }
        })
        .collect();

    Ok(RenderPlan {
        clip_id: scene.clip_id.clone(),
        seed: config.seed,
        background_id,
        background,
        tracks: planned,
        fps: config.fps,
        width: config.width,
        height: config.height,
        tile_size: config.tile_size,
        marker_mode: config.marker_mode,
        frame_count: frame_count(scene.duration_frames, config.fps),
    })
}

/// Renders one frame into a fresh buffer.
pub fn render_frame(plan: &RenderPlan<'_>, video_frame: u64) -> RgbImage {
    let mut canvas = RgbImage::new(plan.width, plan.height);
    render_frame_into(plan, video_frame, &mut canvas);
    canvas
}

/// Renders one frame into `canvas`, which must be `width`×`height`.
pub fn render_frame_into(plan: &RenderPlan<'_>, video_frame: u64, canvas: &mut RgbImage) {
    assert_eq!(
        canvas.dimensions(),
        (plan.width, plan.height),
        "canvas size"
    );
    match plan.background {
        Some(bg) if bg.raster.dimensions() == canvas.dimensions() => {
            canvas.copy_from_slice(bg.raster.as_raw());
        }
        Some(bg) => {
            let resized = crate::assets::resize_rgb(&bg.raster, plan.width, plan.height);
            canvas.copy_from_slice(resized.as_raw());
        }
        None => canvas.fill(0),
    }

    let pos = plan.label_position(video_frame);
    for pt in &plan.tracks {
        let Some(doa) = track_doa_at(&pt.track, pos) else {
            continue;
        };
        let (cx, cy) = doa_to_pixel(doa, plan.width, plan.height).rounded();
        if plan.marker_mode {
            let color = marker_color(pt.track.class, pt.track.source);
            fill_square(canvas, cx, cy, plan.tile_size, color);
        } else if let Some(tile) = pt.tile {
            let since_onset =
                (pos - f64::from(pt.track.first_frame())) * f64::from(LABEL_PERIOD_MS) / 1000.0;
            blit_tile(canvas, tile.frame_at(since_onset), cx, cy);
        }
    }
}

/// Spans of the wrapped column range `[start, start + len)` as
/// `(canvas_x, offset_into_tile, length)`.
fn column_spans(start: i64, len: u32, width: u32) -> impl Iterator<Item = (u32, u32, u32)> {
    let w = i64::from(width);
    let x0 = start.rem_euclid(w);
    let first = (w - x0).min(i64::from(len));
    let rest = i64::from(len) - first;
    [(x0 as u32, 0, first as u32), (0, first as u32, rest as u32)]
        .into_iter()
        .filter(|s| s.2 > 0)
}

fn row_range(cy: i64, size: u32, height: u32) -> impl Iterator<Item = (u32, u32)> {
    let half = i64::from(size / 2);
    let top = cy - half;
    (0..size).filter_map(move |dy| {
        let y = top + i64::from(dy);
        (0..i64::from(height))
            .contains(&y)
            .then_some((y as u32, dy))
    })
}

/// Source-over composite of `tile` centered on `(cx, cy)`.
pub fn blit_tile(canvas: &mut RgbImage, tile: &RgbaImage, cx: i64, cy: i64) {
    let size = tile.width();
    let (width, height) = canvas.dimensions();
    let half = i64::from(size / 2);
    let stride = width as usize * 3;
    let tile_stride = size as usize * 4;
    let spans: Vec<_> = column_spans(cx - half, size, width).collect();
    let dst = &mut **canvas;
    let src = tile.as_raw();
    for (y, ty) in row_range(cy, tile.height(), height) {
        for &(x, tx, len) in &spans {
            let d = &mut dst[y as usize * stride + x as usize * 3..][..len as usize * 3];
            let s = &src[ty as usize * tile_stride + tx as usize * 4..][..len as usize * 4];
            for (dp, sp) in d.chunks_exact_mut(3).zip(s.chunks_exact(4)) {
                blend(dp, sp);
            }
        }
    }
}

#[inline]
fn blend(dst: &mut [u8], src: &[u8]) {
    let a = u32::from(src[3]);
    match a {
        255 => dst.copy_from_slice(&src[..3]),
        0 => {}
        _ => {
            for c in 0..3 {
                let v = u32::from(src[c]) * a + u32::from(dst[c]) * (255 - a);
                dst[c] = ((v + 127) / 255) as u8;
            }
        }
    }
}

/// Opaque square of `size` centered on `(cx, cy)`.
pub fn fill_square(canvas: &mut RgbImage, cx: i64, cy: i64, size: u32, color: [u8; 3]) {
    let (width, height) = canvas.dimensions();
    let half = i64::from(size / 2);
    let spans: Vec<_> = column_spans(cx - half, size, width).collect();
    for (y, _) in row_range(cy, size, height) {
        for &(x, _, len) in &spans {
            for xx in x..x + len {
                canvas.put_pixel(xx, y, Rgb(color));
            }
        }
    }
}

/// Streams every frame of the clip into `sink` and returns its manifest.
pub fn render_clip<S: FrameSink + ?Sized>(
    plan: &RenderPlan<'_>,
    sink: &mut S,
) -> Result<Manifest, RenderError> {
    let mut canvas = RgbImage::new(plan.width, plan.height);
    for i in 0..plan.frame_count {
        render_frame_into(plan, i, &mut canvas);
        sink.consume(&canvas).map_err(|source| RenderError::Sink {
            frames_emitted: i,
            source,
        })?;
    }
    sink.finish().map_err(|source| RenderError::Sink {
        frames_emitted: plan.frame_count,
        source,
    })?;
    Ok(Manifest::from_plan(plan))
}

/// Per-clip provenance record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub clip_id: String,
    pub seed: u64,
    pub background_id: String,
    pub video_fps: f64,
    pub width: u32,
    pub height: u32,
    pub tile_size: u32,
    pub marker_mode: bool,
    pub label_period_ms: u32,
    pub frame_count: u64,
    pub tool_version: String,
    pub events: Vec<ManifestEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEvent {
    pub class_id: ClassId,
    pub class_name: String,
    pub source_id: u32,
    pub asset_id: String,
    pub first_label_frame: u32,
    pub last_label_frame: u32,
    pub first_video_frame: Option<u64>,
    pub last_video_frame: Option<u64>,
    pub z_order: u32,
}

impl Manifest {
    pub fn from_plan(plan: &RenderPlan<'_>) -> Self {
        Manifest {
            clip_id: plan.clip_id.clone(),
            seed: plan.seed,
            background_id: plan.background_id.clone(),
            video_fps: plan.fps,
            width: plan.width,
            height: plan.height,
            tile_size: plan.tile_size,
            marker_mode: plan.marker_mode,
            label_period_ms: LABEL_PERIOD_MS,
            frame_count: plan.frame_count,
            tool_version: TOOL_VERSION.to_owned(),
            events: plan
                .tracks
                .iter()
                .map(|pt| ManifestEvent {
                    class_id: pt.track.class,
                    class_name: pt.track.class.name().to_owned(),
                    source_id: pt.track.source,
                    asset_id: pt.asset_id.clone(),
                    first_label_frame: pt.track.first_frame(),
                    last_label_frame: pt.track.last_frame(),
                    first_video_frame: pt.first_video_frame,
                    last_video_frame: pt.last_video_frame,
                    z_order: pt.z_order,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Rebuilds a plan from a manifest, using the recorded asset choices rather
/// than re-drawing them.
pub fn plan_from_manifest<'a>(
    manifest: &Manifest,
    scene: &SceneMetadata,
    library: &'a AssetLibrary,
) -> Result<RenderPlan<'a>, RenderError> {
    let mismatch = |m: String| RenderError::ManifestMismatch(m);
    let mut pool: Vec<Option<EventTrack>> = build_tracks(scene).into_iter().map(Some).collect();
    if pool.len() != manifest.events.len() {
        return Err(mismatch(format!(
            "{} tracks in scene, {} events in manifest",
            pool.len(),
            manifest.events.len()
        )));
    }
    let fps = manifest.video_fps;
    let mut tracks = Vec::with_capacity(pool.len());
    for ev in &manifest.events {
        let slot = pool.iter_mut().find(|t| {
            t.as_ref().is_some_and(|t| {
                t.class == ev.class_id
                    && t.source == ev.source_id
                    && t.first_frame() == ev.first_label_frame
            })
        });
        let track = slot.and_then(Option::take).ok_or_else(|| {
            mismatch(format!(
                "no track for class {} source {} at frame {}",
                ev.class_id.index(),
                ev.source_id,
                ev.first_label_frame
            ))
        })?;
        let tile = if manifest.marker_mode {
            None
        } else {
            Some(
                library
                    .tile_by_id(&ev.asset_id)
                    .ok_or_else(|| mismatch(format!("asset {} not in library", ev.asset_id)))?,
            )
        };
        let (first_video_frame, last_video_frame) = video_span(&track, fps);
        tracks.push(PlannedTrack {
            track,
            tile,
            asset_id: ev.asset_id.clone(),
            z_order: ev.z_order,
            first_video_frame,
            last_video_frame,
        });
    }
    tracks.sort_by_key(|t| t.z_order);
    let background = if manifest.marker_mode {
        None
    } else {
        Some(
            library
                .background_by_id(&manifest.background_id)
                .ok_or_else(|| {
                    mismatch(format!(
                        "background {} not in library",
                        manifest.background_id
                    ))
                })?,
        )
    };
    let config = RenderConfig {
        fps,
        width: manifest.width,
        height: manifest.height,
        tile_size: manifest.tile_size,
        marker_mode: manifest.marker_mode,
        seed: manifest.seed,
    };
    config.validate()?;
    Ok(RenderPlan {
        clip_id: manifest.clip_id.clone(),
        seed: manifest.seed,
        background_id: manifest.background_id.clone(),
        background,
        tracks,
        fps,
        width: manifest.width,
        height: manifest.height,
        tile_size: manifest.tile_size,
        marker_mode: manifest.marker_mode,
        frame_count: manifest.frame_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{solid_background, solid_tile, LoadReport};
    use crate::geometry::DoA;
    use crate::metadata::EventAnnotation;
    use std::collections::BTreeMap;

    fn ann(frame: u32, class: u32, source: u32, az: f64, el: f64) -> EventAnnotation {
        EventAnnotation {
            frame,
            class: ClassId::new(class).unwrap(),
            source,
            doa: DoA::new(az, el).unwrap(),
            distance: None,
        }
    }

    fn library() -> AssetLibrary {
        let tiles = ClassId::all()
            .map(|c| {
                let ts = (0..3)
                    .map(|i| AssetTile {
                        class: c,
                        asset_id: format!("{}/{i}.png", c.dir_name()),
                        frames: vec![solid_tile(50, [200, 10 * i as u8, c.index() as u8, 255])],
                        native_fps: 1.0,
                    })
                    .collect();
                (c, ts)
            })
            .collect::<BTreeMap<_, _>>();
        AssetLibrary {
            tiles,
            backgrounds: vec![
                Background {
                    background_id: "grey.png".into(),
                    raster: solid_background(1920, 960, [90, 90, 90]),
                },
                Background {
                    background_id: "blue.png".into(),
                    raster: solid_background(1920, 960, [0, 0, 120]),
                },
            ],
            report: LoadReport::default(),
        }
    }

    fn scene(rows: Vec<EventAnnotation>) -> SceneMetadata {
        SceneMetadata::new("clip", rows).with_duration(10)
    }

    #[test]
    fn column_spans_split_at_seam() {
        let spans: Vec<_> = column_spans(-25, 50, 1920).collect();
        assert_eq!(spans, vec![(1895, 0, 25), (0, 25, 25)]);
        let spans: Vec<_> = column_spans(935, 50, 1920).collect();
        assert_eq!(spans, vec![(935, 0, 50)]);
    }

    #[test]
    fn empty_scene_plans_background_only() {
        let lib = library();
        let plan = plan_render(&scene(vec![]), &lib, &RenderConfig::default()).unwrap();
        assert!(plan.tracks.is_empty());
        assert!(plan.background.is_some());
        assert_eq!(plan.frame_count, 30);
        let frame = render_frame(&plan, 0);
        assert_eq!(frame.as_raw(), plan.background.unwrap().raster.as_raw());
    }

    #[test]
    fn overlapping_events_get_distinct_z() {
        let rows = (0..5)
            .flat_map(|f| {
                [
                    ann(f, 0, 0, 0.0, 0.0),
                    ann(f + 1, 3, 0, 10.0, 0.0),
                    ann(f + 2, 3, 1, 20.0, 0.0),
                ]
            })
            .collect();
        let lib = library();
        let plan = plan_render(&scene(rows), &lib, &RenderConfig::default()).unwrap();
        let z: Vec<u32> = plan.tracks.iter().map(|t| t.z_order).collect();
        assert_eq!(z, vec![0, 1, 2]);
        // later onset on top
        let onsets: Vec<u32> = plan.tracks.iter().map(|t| t.track.first_frame()).collect();
        assert_eq!(onsets, vec![0, 1, 2]);
    }

    #[test]
    fn planning_is_deterministic() {
        let rows = (0..8).map(|f| ann(f, 5, 0, 0.0, 0.0)).collect::<Vec<_>>();
        let lib = library();
        let cfg = RenderConfig {
            seed: 1234,
            ..RenderConfig::default()
        };
        let a = Manifest::from_plan(&plan_render(&scene(rows.clone()), &lib, &cfg).unwrap());
        let b = Manifest::from_plan(&plan_render(&scene(rows), &lib, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn missing_class_fails_at_plan_time() {
        let mut lib = library();
        lib.tiles.remove(&ClassId::new(7).unwrap());
        let err = plan_render(
            &scene(vec![ann(0, 7, 0, 0.0, 0.0)]),
            &lib,
            &RenderConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            RenderError::Asset(AssetError::EmptyClass { .. })
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let lib = library();
        for cfg in [
            RenderConfig {
                fps: 0.0,
                ..RenderConfig::default()
            },
            RenderConfig {
                tile_size: 51,
                ..RenderConfig::default()
            },
            RenderConfig {
                tile_size: 480,
                ..RenderConfig::default()
            },
        ] {
            assert!(matches!(
                plan_render(&scene(vec![]), &lib, &cfg),
                Err(RenderError::Config(_))
            ));
        }
    }

    #[test]
    fn translucent_tile_blends() {
        let mut canvas = solid_background(100, 100, [0, 0, 0]);
        blit_tile(&mut canvas, &solid_tile(10, [255, 255, 255, 128]), 50, 50);
        assert_eq!(canvas.get_pixel(50, 50).0, [128, 128, 128]);
        assert_eq!(canvas.get_pixel(44, 50).0, [0, 0, 0]);
        blit_tile(&mut canvas, &solid_tile(10, [255, 0, 0, 0]), 50, 50);
        assert_eq!(canvas.get_pixel(50, 50).0, [128, 128, 128]);
    }

    #[test]
    fn vertical_clipping_at_top() {
        let mut canvas = solid_background(200, 100, [0, 0, 0]);
        fill_square(&mut canvas, 100, 3, 10, [9, 9, 9]);
        let rows: Vec<u32> = (0..100)
            .filter(|&y| canvas.get_pixel(100, y).0 == [9, 9, 9])
            .collect();
        assert_eq!(rows, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn animated_tile_advances_from_onset() {
        let mut lib = library();
        let c = ClassId::new(3).unwrap();
        lib.tiles.insert(
            c,
            vec![AssetTile {
                class: c,
                asset_id: "telephone/ring.gif".into(),
                frames: (0..3)
                    .map(|i| solid_tile(50, [i * 100, 0, 0, 255]))
                    .collect(),
                native_fps: 10.0,
            }],
        );
        // onset at label frame 2 = 0.2 s
        let rows = (2..8).map(|f| ann(f, 3, 0, 0.0, 0.0)).collect();
        let plan = plan_render(&scene(rows), &lib, &RenderConfig::default()).unwrap();
        let red_at = |video_frame| render_frame(&plan, video_frame).get_pixel(960, 480).0[0];
        assert_eq!(red_at(6), 0); // t = 0.2 s, 0 s after onset
        assert_eq!(red_at(9), 100); // 0.1 s after onset
        assert_eq!(red_at(12), 200);
        assert_eq!(red_at(15), 0); // looped
    }

    #[test]
    fn sink_failure_reports_progress() {
        let lib = library();
        let plan = plan_render(&scene(vec![]), &lib, &RenderConfig::default()).unwrap();
        let mut n = 0;
        let mut failing = |_: &RgbImage| {
            n += 1;
            if n > 4 {
                Err(std::io::Error::other("encoder died"))
            } else {
                Ok(())
            }
        };
        match render_clip(&plan, &mut failing) {
            Err(RenderError::Sink { frames_emitted, .. }) => assert_eq!(frames_emitted, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn frame_count_rounds_up() {
        assert_eq!(frame_count(600, 30.0), 1800);
        assert_eq!(frame_count(1, 25.0), 3);
        assert_eq!(frame_count(3, 29.97), 9);
        assert_eq!(frame_count(0, 30.0), 0);
    }
}
