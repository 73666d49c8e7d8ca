//! Frame consumers.

use std::collections::HashMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Stdio};

use image::RgbImage;

use crate::external::CommandTemplate;

/// Receives frames strictly in order.
pub trait FrameSink {
    fn consume(&mut self, frame: &RgbImage) -> io::Result<()>;

    /// Called once after the last frame.
    fn finish(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&RgbImage) -> io::Result<()>> FrameSink for F {
    fn consume(&mut self, frame: &RgbImage) -> io::Result<()> {
        self(frame)
    }
}

/// Discards frames, counting them.
#[derive(Debug, Default)]
pub struct NullSink {
    pub frames: u64,
}

impl FrameSink for NullSink {
    fn consume(&mut self, _frame: &RgbImage) -> io::Result<()> {
        self.frames += 1;
        Ok(())
    }
}

/// Writes `frame_000000.png`, `frame_000001.png`, ... into a directory.
#[derive(Debug)]
pub struct PngDirSink {
    dir: PathBuf,
    next: u64,
}

impl PngDirSink {
    pub fn create(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(PngDirSink {
            dir: dir.to_owned(),
            next: 0,
        })
    }

    pub fn frame_path(dir: &Path, index: u64) -> PathBuf {
        dir.join(format!("frame_{index:06}.png"))
    }
}

impl FrameSink for PngDirSink {
    fn consume(&mut self, frame: &RgbImage) -> io::Result<()> {
        let path = Self::frame_path(&self.dir, self.next);
        frame
            .save_with_format(&path, image::ImageFormat::Png)
            .map_err(io::Error::other)?;
        self.next += 1;
        Ok(())
    }
}

/// Pipes raw RGB24 frames into an external encoder's stdin.
///
/// The template may use `{width}`, `{height}`, `{fps}` and `{output}`.
pub struct EncoderSink {
    child: Child,
    stdin: Option<ChildStdin>,
    program: String,
}

impl EncoderSink {
    pub fn spawn(
        template: &CommandTemplate,
        width: u32,
        height: u32,
        fps: f64,
        output: &Path,
    ) -> io::Result<Self> {
        let vars = HashMap::from([
            ("width", width.to_string()),
            ("height", height.to_string()),
            ("fps", fps.to_string()),
            ("output", output.display().to_string()),
        ]);
        let mut cmd = template
            .command(&vars)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty encoder command"))?;
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| {
                io::Error::new(
                    e.kind(),
                    format!("failed to start encoder {}: {e}", template.program()),
                )
            })?;
        let stdin = child.stdin.take();
        Ok(EncoderSink {
            child,
            stdin,
            program: template.program().to_owned(),
        })
    }
}

impl FrameSink for EncoderSink {
    fn consume(&mut self, frame: &RgbImage) -> io::Result<()> {
        match self.stdin.as_mut() {
            Some(stdin) => stdin.write_all(frame.as_raw()),
            None => Err(io::Error::new(
                io::ErrorKind::BrokenPipe,
                "encoder input already closed",
            )),
        }
    }

    fn finish(&mut self) -> io::Result<()> {
        if let Some(mut stdin) = self.stdin.take() {
            stdin.flush()?;
        }
        let status = self.child.wait()?;
        if status.success() {
            Ok(())
        } else {
            Err(io::Error::other(format!(
                "encoder {} exited with {status}",
                self.program
            )))
        }
    }
}

impl Drop for EncoderSink {
    fn drop(&mut self) {
        if self.stdin.take().is_some() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
