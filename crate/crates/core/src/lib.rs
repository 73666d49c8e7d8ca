//! Synthetic 360° video for sound event localization and detection.
//!
//! Given frame-indexed SELD annotations (class, source, azimuth, elevation
//! every 100 ms), this crate renders equirectangular videos in which a
//! class-matched tile sits exactly where each annotated sound is, and scores
//! SELD output (or the rendered alignment itself) with the standard
//! location-aware and class-aware metrics.
//!
//! * [`metadata`]: annotation files and event tracks
//! * [`geometry`]: projection, great-circle distance, interpolation
//! * [`assets`]: tile and background library
//! * [`renderer`]: planning, compositing, frame sinks, manifests
//! * [`metrics`]: ER, F, LE, LR with optimal matching
//! * [`pipeline`]: batch `generate`, `verify`, `score`
//!
//! The guide under `book/` walks through each piece; its code samples are
//! compiled as doc-tests of this crate.

pub mod assets;
pub mod external;
pub mod geometry;
pub mod metadata;
pub mod metrics;
pub mod pipeline;
pub mod renderer;
pub mod seeding;

pub use geometry::DoA;
pub use metadata::{ClassId, EventAnnotation, EventTrack, SceneMetadata};
pub use metrics::MetricsReport;

#[cfg(doctest)]
mod book {
    macro_rules! chapters {
        ($($name:ident),* $(,)?) => {
            $(
                #[doc = include_str!(concat!("../../../book/src/", stringify!($name), ".md"))]
                mod $name {}
            )*
        };
    }

    chapters!(
        introduction,
        annotations,
        projection,
        interpolation,
        assets,
        rendering,
        metrics,
        pipeline,
        formats
    );
}
