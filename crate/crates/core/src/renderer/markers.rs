//! Marker mode: each event drawn as a flat patch of a color unique to its
//! `(class, source)`, on black, so rendered positions can be read back.

use image::{Rgb, RgbImage};

use super::RenderPlan;
use crate::geometry::{pixel_to_doa, track_doa_at, DoA, PixelPos};
use crate::metadata::ClassId;

/// One saturated hue per class, roughly evenly spaced around the wheel.
const CLASS_HUES: [[u8; 3]; 13] = [
    [255, 0, 0],
    [255, 118, 0],
    [255, 235, 0],
    [157, 255, 0],
    [39, 255, 0],
    [0, 255, 78],
    [0, 255, 196],
    [0, 196, 255],
    [0, 78, 255],
    [39, 0, 255],
    [157, 0, 255],
    [255, 0, 235],
    [255, 0, 118],
];

/// Brightness steps indexed by `source % 3`.
const SOURCE_LEVELS: [u16; 3] = [255, 170, 110];

/// Marker color of a `(class, source)` pair. Sources congruent mod 3 share a
/// color, which is harmless while polyphony stays at or below three.
pub fn marker_color(class: ClassId, source: u32) -> [u8; 3] {
    let level = SOURCE_LEVELS[(source % 3) as usize];
    CLASS_HUES[class.index()].map(|c| ((u16::from(c) * level + 127) / 255) as u8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredMarker {
    pub class: ClassId,
    pub source: u32,
    pub doa: DoA,
    pub pixel_count: usize,
}

#[derive(Default, Clone)]
struct Accum {
    count: usize,
    cos: f64,
    sin: f64,
    sum_y: f64,
    min_y: u32,
    max_y: u32,
}

/// Locates the markers expected at `video_frame` and inverse-projects their
/// centers. Markers hidden entirely behind others are left out.
///
/// The horizontal center is a circular mean, so patches split by the seam
/// come back whole. A patch clipped at the top or bottom edge is located by
/// its unclipped edge instead of its centroid.
pub fn recover_markers(
    frame: &RgbImage,
    plan: &RenderPlan<'_>,
    video_frame: u64,
) -> Vec<RecoveredMarker> {
    let pos = plan.label_position(video_frame);
    let mut expected: Vec<(ClassId, u32, [u8; 3])> = Vec::new();
    for pt in &plan.tracks {
        if track_doa_at(&pt.track, pos).is_some() {
            let key = (pt.track.class, pt.track.source);
            if !expected.iter().any(|e| (e.0, e.1) == key) {
                expected.push((key.0, key.1, marker_color(key.0, key.1)));
            }
        }
    }
    if expected.is_empty() {
        return Vec::new();
    }

    let width = frame.width();
    let height = frame.height();
    let mut acc = vec![
        Accum {
            min_y: u32::MAX,
            ..Accum::default()
        };
        expected.len()
    ];
    let step = std::f64::consts::TAU / f64::from(width);
    for (y, row) in frame.rows().enumerate() {
        for (x, Rgb(px)) in row.enumerate() {
            if *px == [0, 0, 0] {
                continue;
            }
            if let Some(i) = expected.iter().position(|e| e.2 == *px) {
                let a = &mut acc[i];
                let theta = (x as f64 + 0.5) * step;
                a.count += 1;
                a.cos += theta.cos();
                a.sin += theta.sin();
                a.sum_y += y as f64 + 0.5;
                a.min_y = a.min_y.min(y as u32);
                a.max_y = a.max_y.max(y as u32);
            }
        }
    }

    let half = f64::from(plan.tile_size / 2);
    expected
        .into_iter()
        .zip(acc)
        .filter(|(_, a)| a.count > 0)
        .map(|((class, source, _), a)| {
            let x = a.sin.atan2(a.cos).rem_euclid(std::f64::consts::TAU) / step;
            let touches_top = a.min_y == 0;
            let touches_bottom = a.max_y == height - 1;
            let y = match (touches_top, touches_bottom) {
                (true, false) => f64::from(a.max_y) + 1.0 - half,
                (false, true) => f64::from(a.min_y) + half,
                _ => a.sum_y / a.count as f64,
            };
            let doa = pixel_to_doa(PixelPos {
                x,
                y,
                width,
                height,
            });
            RecoveredMarker {
                class,
                source,
                doa,
                pixel_count: a.count,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn colors_are_injective_and_never_black() {
        let mut seen = HashSet::new();
        for class in ClassId::all() {
            for source in 0..3 {
                let c = marker_color(class, source);
                assert_ne!(c, [0, 0, 0]);
                assert!(seen.insert(c), "{class:?} {source} collides");
            }
        }
        assert_eq!(seen.len(), 39);
    }
}
