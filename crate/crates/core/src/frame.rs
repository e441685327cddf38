//! Video frames and frame ingestion.
//!
//! Frames are stored as 8-bit grayscale or RGB planes. A directory of image
//! files (PNG or binary PGM/PPM) is read in lexicographic order, which is
//! taken as temporal order. Video container decoding is out of scope; callers
//! supply extracted frames.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One video frame, 8-bit samples, row-major, `channels` interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Format(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "frame data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Grayscale intensity in [0, 1] at (x, y). RGB uses the BT.601 luma weights.
    #[inline]
    pub fn luma(&self, x: usize, y: usize) -> f64 {
        let idx = (y * self.width + x) * self.channels;
        if self.channels == 1 {
            self.data[idx] as f64 / 255.0
        } else {
            let r = self.data[idx] as f64;
            let g = self.data[idx + 1] as f64;
            let b = self.data[idx + 2] as f64;
            (0.299 * r + 0.587 * g + 0.114 * b) / 255.0
        }
    }

    /// Whole frame as a row-major grayscale plane in [0, 1].
    pub fn to_gray(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.luma(x, y));
            }
        }
        out
    }
}

/// An ordered sequence of equally sized frames.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    pub frame_rate: Option<f64>,
}

impl FrameSequence {
    /// Builds a sequence, enforcing that all frames share dimensions and that
    /// at least one frame is present.
    pub fn new(frames: Vec<Frame>, frame_rate: Option<f64>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Format("frame sequence must hold at least one frame".into()))?;
        let (w, h, c) = (first.width, first.height, first.channels);
        for (i, f) in frames.iter().enumerate() {
            if f.width != w || f.height != h || f.channels != c {
                return Err(Error::Shape(format!(
                    "frame {i} is {}x{}x{}, expected {w}x{h}x{c}",
                    f.width, f.height, f.channels
                )));
            }
        }
        Ok(Self { frames, frame_rate })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
}

/// Lists the image files of a video directory in lexicographic order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Reads a directory of PNG/PGM/PPM files as one video.
pub fn read_frame_dir(dir: &Path) -> Result<FrameSequence> {
    let files = list_frame_files(dir)?;
    if files.is_empty() {
        return Err(Error::Format(format!(
            "no frame files (png/pgm/ppm) in {}",
            dir.display()
        )));
    }
    let mut frames = Vec::with_capacity(files.len());
    for f in &files {
        frames.push(read_frame_file(f)?);
    }
    FrameSequence::new(frames, None)
}

/// Decodes one image file into a `Frame`, preserving gray vs RGB.
pub fn read_frame_file(path: &Path) -> Result<Frame> {
    let img = image::open(path)?;
    let frame = match img {
        image::DynamicImage::ImageLuma8(buf) => Frame::new(
            buf.width() as usize,
            buf.height() as usize,
            1,
            buf.into_raw(),
        )?,
        other => {
            let rgb = other.to_rgb8();
            Frame::new(rgb.width() as usize, rgb.height() as usize, 3, rgb.into_raw())?
        }
    };
    Ok(frame)
}

/// Writes a grayscale frame as PNG.
pub fn write_gray_png(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let buf: image::GrayImage =
        image::ImageBuffer::from_raw(width as u32, height as u32, data.to_vec())
            .ok_or_else(|| Error::Shape("pixel buffer does not match dimensions".into()))?;
    buf.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mixed_dimensions() {
        let a = Frame::new(4, 4, 1, vec![0; 16]).unwrap();
        let b = Frame::new(5, 4, 1, vec![0; 20]).unwrap();
        assert!(FrameSequence::new(vec![a, b], None).is_err());
    }

    #[test]
    fn rejects_empty_sequence() {
        assert!(FrameSequence::new(vec![], None).is_err());
    }

    #[test]
    fn luma_matches_gray_plane() {
        let f = Frame::new(2, 2, 1, vec![0, 51, 102, 255]).unwrap();
        let g = f.to_gray();
        assert_eq!(g[1], 51.0 / 255.0);
        assert_eq!(g[3], 1.0);
    }

    #[test]
    fn frame_dir_roundtrip_is_lexicographic() {
        let dir = tempfile::tempdir().unwrap();
        // Written out of order on purpose; read order must follow names.
        for (name, v) in [("frame_00002.png", 2u8), ("frame_00000.png", 0), ("frame_00001.png", 1)]
        {
            write_gray_png(&dir.path().join(name), 2, 2, &[v; 4]).unwrap();
        }
        let seq = read_frame_dir(dir.path()).unwrap();
        assert_eq!(seq.len(), 3);
        for i in 0..3 {
            assert_eq!(seq.frame(i).data[0], i as u8);
        }
    }
}
