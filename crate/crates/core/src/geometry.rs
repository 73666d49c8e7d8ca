//! Spherical and equirectangular geometry.
//!
//! Directions of arrival use the DCASE convention: azimuth in degrees,
//! positive towards the listener's left, in `[-180, 180)`; elevation in
//! degrees, positive upwards, in `[-90, 90]`.
//!
//! The panorama maps azimuth linearly onto `x` (azimuth 0 at the horizontal
//! center, positive azimuth to the left) and elevation linearly onto `y`
//! (zenith on row 0). [`doa_to_pixel`] is the only place this convention is
//! written down; everything else goes through it or its inverse.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metadata::EventTrack;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("elevation {0}° outside [-90, 90]")]
    Elevation(f64),
    #[error("non-finite angle (azimuth {azimuth}, elevation {elevation})")]
    NonFinite { azimuth: f64, elevation: f64 },
}

/// A direction of arrival on the unit sphere, in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoA {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl DoA {
    /// Builds a direction, folding the azimuth into `[-180, 180)`.
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self, GeometryError> {
        if !azimuth_deg.is_finite() || !elevation_deg.is_finite() {
            return Err(GeometryError::NonFinite {
                azimuth: azimuth_deg,
                elevation: elevation_deg,
            });
        }
        if !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(GeometryError::Elevation(elevation_deg));
        }
        Ok(DoA {
            azimuth_deg: normalize_azimuth(azimuth_deg),
            elevation_deg,
        })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    /// Cartesian unit vector: x forward, y left, z up.
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }

    /// Inverse of [`DoA::to_unit_vector`]. The input need not be normalized.
    /// At the poles the azimuth is degenerate and reported as 0.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let [x, y, z] = v.map(|c| c / norm);
        let horizontal = x.hypot(y);
        let elevation = z.atan2(horizontal).to_degrees().clamp(-90.0, 90.0);
        let azimuth = if horizontal < 1e-12 {
            0.0
        } else {
            y.atan2(x).to_degrees()
        };
        DoA {
            azimuth_deg: normalize_azimuth(azimuth),
            elevation_deg: elevation,
        }
    }

    /// Rotates about the vertical axis.
    pub fn rotated(&self, delta_azimuth_deg: f64) -> Self {
        DoA {
            azimuth_deg: normalize_azimuth(self.azimuth_deg + delta_azimuth_deg),
            elevation_deg: self.elevation_deg,
        }
    }
}

/// Folds any finite azimuth into `[-180, 180)`.
pub fn normalize_azimuth(azimuth_deg: f64) -> f64 {
    let folded = (azimuth_deg + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if folded >= 180.0 {
        folded - 360.0
    } else {
        folded
    }
}

/// A position on a `width`×`height` panorama. `x` wraps, `y` does not.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelPos {
    pub x: f64,
    pub y: f64,
    pub width: u32,
    pub height: u32,
}

impl PixelPos {
    /// Nearest integer pixel, with `x` wrapped back into `[0, width)`.
    pub fn rounded(&self) -> (i64, i64) {
        let x = wrap_x(self.x.round(), self.width) as i64;
        (x, self.y.round() as i64)
    }

    /// Same position snapped to the integer pixel grid.
    pub fn snapped(&self) -> PixelPos {
        let (x, y) = self.rounded();
        PixelPos {
            x: x as f64,
            y: y as f64,
            ..*self
        }
    }
}

/// `x mod width`, always non-negative.
pub fn wrap_x(x: f64, width: u32) -> f64 {
    let w = f64::from(width);
    let r = x.rem_euclid(w);
    if r >= w {
        0.0
    } else {
        r
    }
}

/// Projects a direction onto the equirectangular canvas.
///
/// ```
/// use panoseld::geometry::{doa_to_pixel, DoA};
///
/// let p = doa_to_pixel(DoA::new(90.0, 0.0).unwrap(), 1920, 960);
/// assert_eq!((p.x, p.y), (480.0, 480.0));
/// ```
pub fn doa_to_pixel(doa: DoA, width: u32, height: u32) -> PixelPos {
    let w = f64::from(width);
    let h = f64::from(height);
    PixelPos {
        x: wrap_x(w * (0.5 - doa.azimuth_deg / 360.0), width),
        y: h * (0.5 - doa.elevation_deg / 180.0),
        width,
        height,
    }
}

/// Algebraic inverse of [`doa_to_pixel`].
///
/// Rows 0 and `height` are the poles, where azimuth is degenerate; there the
/// returned azimuth is 0.
pub fn pixel_to_doa(pos: PixelPos) -> DoA {
    let w = f64::from(pos.width);
    let h = f64::from(pos.height);
    let elevation = (180.0 * (0.5 - pos.y / h)).clamp(-90.0, 90.0);
    let azimuth = if elevation.abs() == 90.0 {
        0.0
    } else {
        360.0 * (0.5 - wrap_x(pos.x, pos.width) / w)
    };
    DoA {
        azimuth_deg: normalize_azimuth(azimuth),
        elevation_deg: elevation,
    }
}

/// Great-circle angle between two directions, in degrees.
///
/// Same value as `acos(sin ea sin eb + cos ea cos eb cos Δaz)`, computed as an
/// `atan2` so that nearly equal and nearly opposite directions keep full
/// precision.
pub fn angular_distance(a: DoA, b: DoA) -> f64 {
    let (ea, eb) = (a.elevation_deg.to_radians(), b.elevation_deg.to_radians());
    let daz = (a.azimuth_deg - b.azimuth_deg).to_radians();
    let (sa, ca) = ea.sin_cos();
    let (sb, cb) = eb.sin_cos();
    let (sd, cd) = daz.sin_cos();
    let cos = sa * sb + ca * cb * cd;
    let sin = (cb * sd).hypot(ca * sb - sa * cb * cd);
    sin.atan2(cos).to_degrees()
}

/// Spherical linear interpolation between two directions, `t` in `[0, 1]`.
///
/// Follows the shorter arc. For (near-)antipodal inputs the arc is not
/// unique and the start direction is returned until `t` reaches 1.
pub fn slerp(a: DoA, b: DoA, t: f64) -> DoA {
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    let va = a.to_unit_vector();
    let vb = b.to_unit_vector();
    let dot = (va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]).clamp(-1.0, 1.0);
    let omega = dot.acos();
    let sin_omega = omega.sin();
    if sin_omega.abs() < 1e-12 {
        return a;
    }
    let wa = ((1.0 - t) * omega).sin() / sin_omega;
    let wb = (t * omega).sin() / sin_omega;
    DoA::from_vector([
        wa * va[0] + wb * vb[0],
        wa * va[1] + wb * vb[1],
        wa * va[2] + wb * vb[2],
    ])
}

/// Converts a video frame index to a position on the label timebase,
/// measured in (fractional) label frames.
pub fn video_frame_to_label_position(
    video_frame: u64,
    video_fps: f64,
    label_period_ms: u32,
) -> f64 {
    (video_frame as f64 * 1000.0) / (video_fps * f64::from(label_period_ms))
}

/// Direction of `track` at `label_pos` (in label frames), or `None` when the
/// track is silent there.
///
/// A track covers `[first_frame, last_frame + 1)`. Between two consecutive
/// samples the direction is slerped; during the last label period it holds
/// the last sample. Nothing is extrapolated.
pub fn track_doa_at(track: &EventTrack, label_pos: f64) -> Option<DoA> {
    let first = track.samples.first()?;
    let last = track.samples.last()?;
    let start = f64::from(first.frame);
    let end = f64::from(last.frame) + 1.0;
    if !(start..end).contains(&label_pos) {
        return None;
    }
    let offset = label_pos - start;
    let k = (offset.floor() as usize).min(track.samples.len() - 1);
    let frac = offset - k as f64;
    match track.samples.get(k + 1) {
        Some(next) => Some(slerp(track.samples[k].doa, next.doa, frac)),
        None => Some(track.samples[k].doa),
    }
}

/// Samples `track` at every video frame that falls inside it.
///
/// ```
/// use panoseld::geometry::{interpolate_track, DoA};
/// use panoseld::metadata::{ClassId, EventTrack, TrackSample};
///
/// let sample = |frame, az| TrackSample { frame, doa: DoA::new(az, 0.0).unwrap(), distance: None };
/// let track = EventTrack {
///     class: ClassId::new(0).unwrap(),
///     source: 0,
///     samples: vec![sample(0, 0.0), sample(1, 10.0)],
/// };
/// let frames = interpolate_track(&track, 100, 30.0);
/// // two label frames = 200 ms = 6 video frames at 30 fps
/// assert_eq!(frames.len(), 6);
/// assert!((frames[1].1.azimuth_deg() - 10.0 / 3.0).abs() < 1e-9);
/// ```
pub fn interpolate_track(
    track: &EventTrack,
    label_period_ms: u32,
    video_fps: f64,
) -> Vec<(u64, DoA)> {
    let (Some(first), Some(last)) = (track.samples.first(), track.samples.last()) else {
        return Vec::new();
    };
    let frames_per_label = video_fps * f64::from(label_period_ms) / 1000.0;
    let lo = (f64::from(first.frame) * frames_per_label).floor().max(0.0) as u64;
    let hi = ((f64::from(last.frame) + 1.0) * frames_per_label).ceil() as u64;
    (lo..=hi)
        .filter_map(|i| {
            let pos = video_frame_to_label_position(i, video_fps, label_period_ms);
            track_doa_at(track, pos).map(|d| (i, d))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::{ClassId, TrackSample};

    fn d(az: f64, el: f64) -> DoA {
        DoA::new(az, el).unwrap()
    }

    fn dot_oracle(a: DoA, b: DoA) -> f64 {
        let (u, v) = (a.to_unit_vector(), b.to_unit_vector());
        (u[0] * v[0] + u[1] * v[1] + u[2] * v[2])
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees()
    }

    fn track(samples: &[(u32, f64, f64)]) -> EventTrack {
        EventTrack {
            class: ClassId::new(2).unwrap(),
            source: 0,
            samples: samples
                .iter()
                .map(|&(frame, az, el)| TrackSample {
                    frame,
                    doa: d(az, el),
                    distance: None,
                })
                .collect(),
        }
    }

    #[test]
    fn azimuth_normalization() {
        assert_eq!(d(180.0, 0.0).azimuth_deg(), -180.0);
        assert_eq!(d(-180.0, 0.0).azimuth_deg(), -180.0);
        assert_eq!(d(540.0, 0.0).azimuth_deg(), -180.0);
        assert_eq!(d(-190.0, 0.0).azimuth_deg(), 170.0);
        assert!(normalize_azimuth(-1e-17) < 180.0);
        assert!(DoA::new(0.0, 90.5).is_err());
        assert!(DoA::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let p = doa_to_pixel(d(0.0, 0.0), 1920, 960);
        assert_eq!((p.x, p.y), (960.0, 480.0));
        let p = doa_to_pixel(d(90.0, 0.0), 1920, 960);
        assert_eq!((p.x, p.y), (480.0, 480.0));
        let p = doa_to_pixel(d(-180.0, 0.0), 1920, 960);
        assert_eq!((p.x, p.y), (0.0, 480.0));
        let p = doa_to_pixel(d(0.0, 90.0), 1920, 960);
        assert_eq!((p.x, p.y), (960.0, 0.0));
        let p = doa_to_pixel(d(0.0, -90.0), 1920, 960);
        assert_eq!(p.y, 960.0);
    }

    #[test]
    fn inverse_examples() {
        let pos = |x, y| PixelPos {
            x,
            y,
            width: 1920,
            height: 960,
        };
        assert_eq!(pixel_to_doa(pos(960.0, 480.0)), d(0.0, 0.0));
        assert_eq!(pixel_to_doa(pos(0.0, 480.0)), d(-180.0, 0.0));
        assert_eq!(pixel_to_doa(pos(1920.0, 480.0)), d(-180.0, 0.0));
        assert_eq!(pixel_to_doa(pos(123.0, 0.0)), d(0.0, 90.0));
        assert_eq!(pixel_to_doa(pos(123.0, 960.0)), d(0.0, -90.0));
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_x(1920.0, 1920), 0.0);
        assert_eq!(wrap_x(-10.0, 1920), 1910.0);
        assert_eq!(wrap_x(960.5, 1920), 960.5);
        assert!(wrap_x(-1e-14, 1920) < 1920.0);
    }

    #[test]
    fn rounded_pixel_wraps_at_seam() {
        let p = PixelPos {
            x: 1919.7,
            y: 3.2,
            width: 1920,
            height: 960,
        };
        assert_eq!(p.rounded(), (0, 3));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(angular_distance(d(12.0, 34.0), d(12.0, 34.0)), 0.0);
        assert!((angular_distance(d(0.0, 0.0), d(180.0, 0.0)) - 180.0).abs() < 1e-12);
        let oracle = dot_oracle(d(0.0, 45.0), d(180.0, 45.0));
        assert!((oracle - 90.0).abs() < 1e-9);
        assert!((angular_distance(d(0.0, 45.0), d(180.0, 45.0)) - oracle).abs() < 1e-9);
    }

    #[test]
    fn pole_has_zero_azimuth() {
        let up = DoA::from_vector([0.0, 0.0, 2.0]);
        assert_eq!((up.azimuth_deg(), up.elevation_deg()), (0.0, 90.0));
    }

    #[test]
    fn interpolation_midpoint_on_equator() {
        let t = track(&[(0, 0.0, 0.0), (1, 10.0, 0.0)]);
        let mid = track_doa_at(&t, 0.5).unwrap();
        assert!((mid.azimuth_deg() - 5.0).abs() < 1e-9);
        assert!(mid.elevation_deg().abs() < 1e-9);
        // holds the last sample for one label period, then stops
        assert_eq!(track_doa_at(&t, 1.9), Some(d(10.0, 0.0)));
        assert_eq!(track_doa_at(&t, 2.0), None);
        assert_eq!(track_doa_at(&t, -0.1), None);
    }

    #[test]
    fn constant_track_is_constant() {
        let t = track(&[(4, 33.0, -12.0), (5, 33.0, -12.0), (6, 33.0, -12.0)]);
        let frames = interpolate_track(&t, 100, 30.0);
        assert_eq!(frames.first().unwrap().0, 12);
        assert_eq!(frames.len(), 9);
        for (_, doa) in frames {
            assert!(angular_distance(doa, d(33.0, -12.0)) < 1e-9);
        }
    }

    #[test]
    fn single_sample_track_lasts_one_period() {
        let t = track(&[(10, 45.0, 0.0)]);
        let frames = interpolate_track(&t, 100, 30.0);
        let idx: Vec<u64> = frames.iter().map(|f| f.0).collect();
        assert_eq!(idx, vec![30, 31, 32]);
    }

    #[test]
    fn seam_crossing_takes_short_arc() {
        let t = track(&[(0, 170.0, 0.0), (1, -170.0, 0.0)]);
        for (_, doa) in interpolate_track(&t, 100, 30.0) {
            assert!(doa.azimuth_deg().abs() >= 170.0 - 1e-9, "{doa:?}");
        }
        let mid = track_doa_at(&t, 0.5).unwrap();
        assert!((mid.azimuth_deg().abs() - 180.0).abs() < 1e-9);
    }
}
