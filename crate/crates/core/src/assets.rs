//! Tile and background library.
//!
//! Layout on disk:
//!
//! ```text
//! tiles_root/<class_dir>/<file>      e.g. tiles_root/knock/k1.png
//! tiles_root/classes.toml            optional per-file class overrides
//! backgrounds_root/<file>
//! ```
//!
//! Class directories use [`ClassId::dir_name`]. Stills (PNG, JPEG) become
//! one-frame tiles, animated GIFs are decoded in-process, and other video
//! containers go through an external decoder that emits raw RGBA frames.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::Stdio;

use image::{AnimationDecoder, Rgb, RgbImage, Rgba, RgbaImage};
use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::external::{CommandTemplate, DEFAULT_DECODER};
use crate::metadata::ClassId;

pub const DEFAULT_TILE_SIZE: u32 = 50;
pub const DEFAULT_WIDTH: u32 = 1920;
pub const DEFAULT_HEIGHT: u32 = 960;
/// 30 s at 30 fps.
pub const DEFAULT_FRAME_CAP: usize = 900;
pub const OVERRIDES_FILE: &str = "classes.toml";

const STILL_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];
const VIDEO_EXTENSIONS: &[&str] = &["mp4", "mov", "m4v", "webm", "mkv", "avi"];

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("unknown class directory {0:?}")]
    UnknownClass(String),
    #[error("no usable background images under {0}")]
    NoBackgrounds(PathBuf),
    #[error("no tiles for class {class} (needed by clip {clip})")]
    EmptyClass { class: ClassId, clip: String },
    #[error("{path}: {message}")]
    Overrides { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AssetError + '_ {
    move |source| AssetError::Io {
        path: path.to_owned(),
        source,
    }
}

/// A visual stand-in for one sound class.
#[derive(Clone, Debug, PartialEq)]
pub struct AssetTile {
    pub class: ClassId,
    /// Path relative to the tiles root, with `/` separators.
    pub asset_id: String,
    /// Square frames of the library's tile size; one frame for stills.
    pub frames: Vec<RgbaImage>,
    /// 1 for stills.
    pub native_fps: f64,
}

impl AssetTile {
    /// Frame to show `seconds_since_onset` after the event started. Loops.
    pub fn frame_at(&self, seconds_since_onset: f64) -> &RgbaImage {
        if self.frames.len() == 1 {
            return &self.frames[0];
        }
        // nudge so exact frame boundaries do not floor to the previous frame
        let idx = (seconds_since_onset.max(0.0) * self.native_fps + 1e-9).floor() as usize;
        &self.frames[idx % self.frames.len()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Background {
    pub background_id: String,
    pub raster: RgbImage,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub tiles_per_class: BTreeMap<ClassId, usize>,
    pub backgrounds: usize,
    pub skipped: Vec<(String, String)>,
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tiles:")?;
        for class in ClassId::all() {
            let n = self.tiles_per_class.get(&class).copied().unwrap_or(0);
            writeln!(f, "  {:<20} {n}", class.dir_name())?;
        }
        writeln!(f, "backgrounds: {}", self.backgrounds)?;
        if !self.skipped.is_empty() {
            writeln!(f, "skipped:")?;
            for (path, reason) in &self.skipped {
                writeln!(f, "  {path}: {reason}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub tile_size: u32,
    pub background_width: u32,
    pub background_height: u32,
    pub frame_cap: usize,
    /// Rate at which the external decoder is asked to emit frames.
    pub decode_fps: f64,
    pub decoder: Option<CommandTemplate>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            tile_size: DEFAULT_TILE_SIZE,
            background_width: DEFAULT_WIDTH,
            background_height: DEFAULT_HEIGHT,
            frame_cap: DEFAULT_FRAME_CAP,
            decode_fps: 30.0,
            decoder: Some(CommandTemplate::parse(DEFAULT_DECODER)),
        }
    }
}

/// Immutable after load.
#[derive(Clone, Debug, Default)]
pub struct AssetLibrary {
    pub tiles: BTreeMap<ClassId, Vec<AssetTile>>,
    pub backgrounds: Vec<Background>,
    pub report: LoadReport,
}

/// Loads a library with default sizes (50×50 tiles, 1920×960 backgrounds).
pub fn load_library(
    tiles_root: &Path,
    backgrounds_root: &Path,
) -> Result<AssetLibrary, AssetError> {
    AssetLibrary::load(tiles_root, backgrounds_root, &LoadOptions::default())
}

impl AssetLibrary {
    pub fn load(
        tiles_root: &Path,
        backgrounds_root: &Path,
        opts: &LoadOptions,
    ) -> Result<Self, AssetError> {
        let mut lib = AssetLibrary::default();
        let overrides = read_overrides(tiles_root)?;

        let mut candidates: Vec<(String, PathBuf, ClassId)> = Vec::new();
        for entry in sorted_entries(tiles_root)? {
            let name = entry.file_name().unwrap().to_string_lossy().into_owned();
            if entry.is_dir() {
                let class = ClassId::from_name(&name)
                    .filter(|c| c.dir_name() == name || c.name() == name)
                    .ok_or_else(|| AssetError::UnknownClass(name.clone()))?;
                for file in sorted_entries(&entry)? {
                    let rel = format!("{name}/{}", file.file_name().unwrap().to_string_lossy());
                    if file.is_dir() {
                        lib.report.skipped.push((rel, "nested directory".into()));
                        continue;
                    }
                    let class = overrides.get(&rel).copied().unwrap_or(class);
                    candidates.push((rel, file, class));
                }
            } else if name == OVERRIDES_FILE {
                continue;
            } else if let Some(&class) = overrides.get(&name) {
                candidates.push((name, entry, class));
            } else {
                lib.report
                    .skipped
                    .push((name, "not inside a class directory".into()));
            }
        }

        for (rel, path, class) in candidates {
            match decode_tile(&path, opts) {
                Ok((frames, native_fps)) => {
                    *lib.report.tiles_per_class.entry(class).or_default() += 1;
                    lib.tiles.entry(class).or_default().push(AssetTile {
                        class,
                        asset_id: rel,
                        frames,
                        native_fps,
                    });
                }
                Err(reason) => {
                    log::warn!("skipping tile {rel}: {reason}");
                    lib.report.skipped.push((rel, reason));
                }
            }
        }

        for path in sorted_entries(backgrounds_root)? {
            if path.is_dir() {
                continue;
            }
            let rel = path.file_name().unwrap().to_string_lossy().into_owned();
            match image::open(&path) {
                Ok(img) => {
                    let rgb = img.to_rgb8();
                    let raster =
                        if rgb.dimensions() == (opts.background_width, opts.background_height) {
                            rgb
                        } else {
                            resize_rgb(&rgb, opts.background_width, opts.background_height)
                        };
                    lib.backgrounds.push(Background {
                        background_id: rel,
                        raster,
                    });
                }
                Err(e) => {
                    log::warn!("skipping background {rel}: {e}");
                    lib.report
                        .skipped
                        .push((format!("backgrounds/{rel}"), e.to_string()));
                }
            }
        }
        lib.report.backgrounds = lib.backgrounds.len();
        if lib.backgrounds.is_empty() {
            return Err(AssetError::NoBackgrounds(backgrounds_root.to_owned()));
        }
        Ok(lib)
    }

    pub fn tiles_for(&self, class: ClassId) -> &[AssetTile] {
        self.tiles.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tile_by_id(&self, asset_id: &str) -> Option<&AssetTile> {
        self.tiles
            .values()
            .flatten()
            .find(|t| t.asset_id == asset_id)
    }

    pub fn background_by_id(&self, background_id: &str) -> Option<&Background> {
        self.backgrounds
            .iter()
            .find(|b| b.background_id == background_id)
    }
}

/// Uniform draw over the tiles of `class`.
pub fn select_tile<'a, R: Rng + ?Sized>(
    library: &'a AssetLibrary,
    class: ClassId,
    rng: &mut R,
    clip_id: &str,
) -> Result<&'a AssetTile, AssetError> {
    let tiles = library.tiles_for(class);
    if tiles.is_empty() {
        return Err(AssetError::EmptyClass {
            class,
            clip: clip_id.to_owned(),
        });
    }
    Ok(&tiles[rng.random_range(0..tiles.len())])
}

/// Uniform draw over the backgrounds. Panics on an empty library, which
/// [`AssetLibrary::load`] never returns.
pub fn select_background<'a, R: Rng + ?Sized>(
    library: &'a AssetLibrary,
    rng: &mut R,
) -> &'a Background {
    &library.backgrounds[rng.random_range(0..library.backgrounds.len())]
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, AssetError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        if entry.file_name().to_string_lossy().starts_with('.') {
            continue;
        }
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

#[derive(Deserialize)]
struct OverridesFile {
    #[serde(default)]
    overrides: BTreeMap<String, String>,
}

fn read_overrides(tiles_root: &Path) -> Result<HashMap<String, ClassId>, AssetError> {
    let path = tiles_root.join(OVERRIDES_FILE);
    if !path.exists() {
        return Ok(HashMap::new());
    }
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let parsed: OverridesFile = toml::from_str(&text).map_err(|e| AssetError::Overrides {
        path: path.clone(),
        message: e.to_string(),
    })?;
    parsed
        .overrides
        .into_iter()
        .map(|(file, class)| {
            ClassId::from_name(&class)
                .map(|c| (file, c))
                .ok_or_else(|| AssetError::Overrides {
                    path: path.clone(),
                    message: format!("unknown class {class:?}"),
                })
        })
        .collect()
}

fn extension(path: &Path) -> String {
    path.extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default()
}

fn decode_tile(path: &Path, opts: &LoadOptions) -> Result<(Vec<RgbaImage>, f64), String> {
    let ext = extension(path);
    let size = opts.tile_size;
    let fit = |img: RgbaImage| {
        if img.dimensions() == (size, size) {
            img
        } else {
            resize_rgba(&img, size, size)
        }
    };
    if STILL_EXTENSIONS.contains(&ext.as_str()) {
        let img = image::open(path).map_err(|e| e.to_string())?;
        Ok((vec![fit(img.to_rgba8())], 1.0))
    } else if ext == "gif" {
        decode_gif(path, opts.frame_cap)
            .map(|(frames, fps)| (frames.into_iter().map(fit).collect(), fps))
    } else if VIDEO_EXTENSIONS.contains(&ext.as_str()) {
        let decoder = opts
            .decoder
            .as_ref()
            .ok_or_else(|| "no video decoder configured".to_string())?;
        let frames = decode_external(decoder, path, size, opts.decode_fps, opts.frame_cap)?;
        Ok((frames, opts.decode_fps))
    } else {
        Err(format!("unsupported file type {ext:?}"))
    }
}

fn decode_gif(path: &Path, cap: usize) -> Result<(Vec<RgbaImage>, f64), String> {
    let file = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| e.to_string())?);
    let decoder = image::codecs::gif::GifDecoder::new(file).map_err(|e| e.to_string())?;
    let mut frames = Vec::new();
    let mut total_ms = 0.0;
    for frame in decoder.into_frames().take(cap) {
        let frame = frame.map_err(|e| e.to_string())?;
        let (num, den) = frame.delay().numer_denom_ms();
        total_ms += f64::from(num) / f64::from(den.max(1));
        frames.push(frame.into_buffer());
    }
    if frames.is_empty() {
        return Err("no frames".into());
    }
    let fps = if frames.len() == 1 {
        1.0
    } else if total_ms > 0.0 {
        frames.len() as f64 * 1000.0 / total_ms
    } else {
        // browsers treat zero delay as 100 ms
        10.0
    };
    Ok((frames, fps))
}

/// Runs the decoder and reads raw `size`×`size` RGBA frames from its stdout.
fn decode_external(
    template: &CommandTemplate,
    path: &Path,
    size: u32,
    fps: f64,
    cap: usize,
) -> Result<Vec<RgbaImage>, String> {
    let vars = HashMap::from([
        ("input", path.display().to_string()),
        ("size", size.to_string()),
        ("fps", fps.to_string()),
    ]);
    let mut cmd = template.command(&vars).ok_or("empty decoder command")?;
    let mut child = cmd
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("failed to start {}: {e}", template.program()))?;
    let mut stdout = child.stdout.take().unwrap();
    let frame_bytes = (size * size * 4) as usize;
    let mut frames = Vec::new();
    let mut buf = vec![0u8; frame_bytes];
    while frames.len() < cap {
        match read_full(&mut stdout, &mut buf) {
            Ok(true) => frames.push(RgbaImage::from_raw(size, size, buf.clone()).unwrap()),
            Ok(false) => break,
            Err(e) => return Err(e.to_string()),
        }
    }
    drop(stdout);
    if frames.len() >= cap {
        let _ = child.kill();
    }
    let status = child.wait().map_err(|e| e.to_string())?;
    if frames.is_empty() {
        return Err(format!("decoder produced no frames ({status})"));
    }
    if frames.len() < cap && !status.success() {
        return Err(format!("decoder failed ({status})"));
    }
    Ok(frames)
}

/// Fills `buf` completely; `Ok(false)` on clean EOF before the first byte.
/// A trailing partial frame is dropped.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => return Ok(false),
            n => filled += n,
        }
    }
    Ok(true)
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
fn resample<const C: usize>(src: &[u8], sw: u32, sh: u32, dw: u32, dh: u32) -> Vec<u8> {
    let axis = |d: u32, s: u32, dst_len: u32| -> (usize, usize, f32) {
        let pos = ((d as f64 + 0.5) * s as f64 / dst_len as f64 - 0.5).max(0.0);
        let i0 = (pos.floor() as u32).min(s - 1);
        let i1 = (i0 + 1).min(s - 1);
        let frac = (pos - f64::from(i0)).clamp(0.0, 1.0) as f32;
        (i0 as usize, i1 as usize, frac)
    };
    let cols: Vec<_> = (0..dw).map(|x| axis(x, sw, dw)).collect();
    let mut out = Vec::with_capacity((dw * dh) as usize * C);
    let stride = sw as usize * C;
    for y in 0..dh {
        let (y0, y1, fy) = axis(y, sh, dh);
        for &(x0, x1, fx) in &cols {
            for c in 0..C {
                let p = |yy: usize, xx: usize| f32::from(src[yy * stride + xx * C + c]);
                let top = p(y0, x0) + (p(y0, x1) - p(y0, x0)) * fx;
                let bot = p(y1, x0) + (p(y1, x1) - p(y1, x0)) * fx;
                let v = top + (bot - top) * fy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// Resizes an RGBA raster; alpha is treated like any other channel.
pub fn resize_rgba(src: &RgbaImage, dst_w: u32, dst_h: u32) -> RgbaImage {
    let data = resample::<4>(src.as_raw(), src.width(), src.height(), dst_w, dst_h);
    RgbaImage::from_raw(dst_w, dst_h, data).unwrap()
}

pub fn resize_rgb(src: &RgbImage, dst_w: u32, dst_h: u32) -> RgbImage {
    let data = resample::<3>(src.as_raw(), src.width(), src.height(), dst_w, dst_h);
    RgbImage::from_raw(dst_w, dst_h, data).unwrap()
}

/// Solid square, used by tests and fixtures.
pub fn solid_tile(size: u32, color: [u8; 4]) -> RgbaImage {
    RgbaImage::from_pixel(size, size, Rgba(color))
}

pub fn solid_background(width: u32, height: u32, color: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(width, height, Rgb(color))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tile(class: u32, id: &str) -> AssetTile {
        AssetTile {
            class: ClassId::new(class).unwrap(),
            asset_id: id.into(),
            frames: vec![solid_tile(50, [1, 2, 3, 255])],
            native_fps: 1.0,
        }
    }

    fn library(n_tiles: usize, n_backgrounds: usize) -> AssetLibrary {
        let class = ClassId::new(0).unwrap();
        AssetLibrary {
            tiles: BTreeMap::from([(
                class,
                (0..n_tiles).map(|i| tile(0, &format!("t{i}"))).collect(),
            )]),
            backgrounds: (0..n_backgrounds)
                .map(|i| Background {
                    background_id: format!("b{i}"),
                    raster: solid_background(4, 2, [0, 0, 0]),
                })
                .collect(),
            report: LoadReport::default(),
        }
    }

    #[test]
    fn identity_resize_is_byte_identical() {
        let mut img = RgbaImage::new(50, 50);
        for (i, p) in img.pixels_mut().enumerate() {
            *p = Rgba([
                (i % 251) as u8,
                (i % 13) as u8,
                (i % 7) as u8,
                (i % 256) as u8,
            ]);
        }
        assert_eq!(resize_rgba(&img, 50, 50), img);
    }

    #[test]
    fn constant_color_survives_downscale() {
        let img = solid_tile(100, [10, 200, 30, 128]);
        let out = resize_rgba(&img, 50, 50);
        assert_eq!(out.dimensions(), (50, 50));
        assert!(out.pixels().all(|p| p.0 == [10, 200, 30, 128]));
    }

    #[test]
    fn two_pixel_upscale_is_monotone_gradient() {
        // centers of the 4 outputs land at source x = -0.25, 0.25, 0.75, 1.25
        let src = RgbImage::from_raw(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let out = resize_rgb(&src, 4, 1);
        let row: Vec<u8> = out.pixels().map(|p| p.0[0]).collect();
        assert_eq!(row, vec![0, 64, 191, 255]);
    }

    #[test]
    fn alpha_resampled_like_color() {
        let src = RgbaImage::from_raw(2, 1, vec![0, 0, 0, 0, 255, 255, 255, 255]).unwrap();
        let out = resize_rgba(&src, 4, 1);
        for p in out.pixels() {
            assert_eq!(p.0[0], p.0[3]);
        }
    }

    #[test]
    fn single_tile_always_selected() {
        let lib = library(1, 1);
        let class = ClassId::new(0).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(
                select_tile(&lib, class, &mut rng, "c").unwrap().asset_id,
                "t0"
            );
            assert_eq!(select_background(&lib, &mut rng).background_id, "b0");
        }
    }

    #[test]
    fn selection_is_deterministic() {
        let lib = library(5, 3);
        let class = ClassId::new(0).unwrap();
        let pick = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = select_tile(&lib, class, &mut rng, "c")
                .unwrap()
                .asset_id
                .clone();
            let b = select_background(&lib, &mut rng).background_id.clone();
            (t, b)
        };
        assert_eq!(pick(42), pick(42));
    }

    #[test]
    fn empty_class_is_an_error() {
        let lib = library(1, 1);
        let err = select_tile(
            &lib,
            ClassId::new(5).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(0),
            "clip7",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("domestic appliance") && msg.contains("clip7"),
            "{msg}"
        );
    }

    // multinomial: each count ~ Binomial(n, 1/k); 4 sigma band
    fn assert_uniform(counts: &[usize], n: usize) {
        let k = counts.len() as f64;
        let p = 1.0 / k;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in counts {
            assert!((c as f64 - mean).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn tile_selection_is_uniform() {
        let lib = library(4, 1);
        let class = ClassId::new(0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let t = select_tile(&lib, class, &mut rng, "c").unwrap();
            counts[t.asset_id[1..].parse::<usize>().unwrap()] += 1;
        }
        assert_uniform(&counts, 10_000);
    }

    #[test]
    fn background_selection_is_uniform() {
        let lib = library(1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 3];
        for _ in 0..3_000 {
            let b = select_background(&lib, &mut rng);
            counts[b.background_id[1..].parse::<usize>().unwrap()] += 1;
        }
        assert_uniform(&counts, 3_000);
    }

    #[test]
    fn looping_frame_index() {
        let mut t = tile(0, "v");
        t.frames = (0..4).map(|i| solid_tile(50, [i, 0, 0, 255])).collect();
        t.native_fps = 10.0;
        assert_eq!(t.frame_at(0.0).get_pixel(0, 0).0[0], 0);
        assert_eq!(t.frame_at(0.25).get_pixel(0, 0).0[0], 2);
        assert_eq!(t.frame_at(0.45).get_pixel(0, 0).0[0], 0);
    }
}
