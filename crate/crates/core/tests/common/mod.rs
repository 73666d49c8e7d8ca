#![allow(dead_code)]

use std::path::Path;

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use panoseld::geometry::DoA;
use panoseld::metadata::{write_metadata, ClassId, EventAnnotation, SceneMetadata};
use panoseld::pipeline::{OutputFormat, PipelineConfig};

pub fn doa(az: f64, el: f64) -> DoA {
    DoA::new(az, el).unwrap()
}

pub fn ann(frame: u32, class: u32, source: u32, az: f64, el: f64) -> EventAnnotation {
    EventAnnotation {
        frame,
        class: ClassId::new(class).unwrap(),
        source,
        doa: doa(az, el),
        distance: None,
    }
}

/// Writes a PNG tile per listed class (two variants each) and one background.
pub fn write_asset_tree(root: &Path, classes: &[u32]) {
    let tiles = root.join("tiles");
    for &c in classes {
        let class = ClassId::new(c).unwrap();
        let dir = tiles.join(class.dir_name());
        std::fs::create_dir_all(&dir).unwrap();
        for v in 0..2u8 {
            let img = RgbaImage::from_fn(80, 80, |x, y| {
                Rgba([c as u8 * 19, v * 120, ((x + y) % 256) as u8, 255])
            });
            img.save(dir.join(format!("tile{v}.png"))).unwrap();
        }
    }
    let bgs = root.join("backgrounds");
    std::fs::create_dir_all(&bgs).unwrap();
    RgbImage::from_fn(960, 480, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, 60]))
        .save(bgs.join("room.png"))
        .unwrap();
    RgbImage::from_pixel(1920, 960, Rgb([20, 90, 30]))
        .save(bgs.join("park.png"))
        .unwrap();
}

pub fn write_scene(dir: &Path, stem: &str, rows: Vec<EventAnnotation>) {
    std::fs::create_dir_all(dir).unwrap();
    let text = write_metadata(&SceneMetadata::new(stem, rows));
    std::fs::write(dir.join(format!("{stem}.csv")), text).unwrap();
}

/// Config writing PNG frames, short clips.
pub fn png_config(root: &Path, seed: u64) -> PipelineConfig {
    PipelineConfig {
        metadata_dir: root.join("metadata"),
        tiles_root: root.join("assets/tiles"),
        backgrounds_root: root.join("assets/backgrounds"),
        output_dir: root.join("out"),
        seed,
        output_format: OutputFormat::Png,
        min_duration_frames: 0,
        ..PipelineConfig::default()
    }
}

/// Scene of `frames` label frames with three tracks that never overlap on
/// screen: one crossing the azimuth seam, one climbing towards the zenith,
/// one sweeping across the lower front.
pub fn alignment_scene(frames: u32) -> SceneMetadata {
    let mut rows = Vec::new();
    for k in 0..frames {
        let s = f64::from(k) / f64::from(frames.max(2) - 1);
        rows.push(ann(k, 0, 0, 150.0 + 60.0 * s, 10.0));
        rows.push(ann(k, 6, 0, 0.0, 30.0 + 59.5 * s));
        rows.push(ann(k, 11, 1, -60.0 + 120.0 * s, -30.0));
    }
    SceneMetadata::new("alignment", rows)
}
