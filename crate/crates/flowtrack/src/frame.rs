//! Video frames: 8-bit images with 1 or 3 interleaved channels.

use crate::error::{Error, Result};

/// A single video frame. `data` is row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
    /// Frame number within its sequence.
    pub index: usize,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
        index: usize,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        if width == 0 || height == 0 {
            return Err(Error::FrameTooSmall(width, height, 1));
        }
        if data.len() != width * height * channels {
            return Err(Error::BadFrameData {
                width,
                height,
                channels,
                got: data.len(),
            });
        }
        Ok(Frame {
            width,
            height,
            channels,
            data,
            index,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Frame::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
            0,
        )
    }

    /// Converts to a single-channel frame using the BT.601 luma weights,
    /// rounding to the nearest integer. Single-channel input passes through.
    pub fn to_grayscale(&self) -> Result<Frame> {
        match self.channels {
            1 => Ok(self.clone()),
            3 => {
                let mut out = Vec::with_capacity(self.width * self.height);
                for px in self.data.chunks_exact(3) {
                    let luma = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
                    out.push(luma.round().min(255.0) as u8);
                }
                Frame::new(self.width, self.height, 1, out, self.index)
            }
            c => Err(Error::UnsupportedChannels(c)),
        }
    }

    /// Raw sample at `(x, y)` for `channel`; caller guarantees bounds.
    #[inline]
    pub fn sample(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + channel]
    }

    #[inline]
    pub fn sample_mut(&mut self, x: usize, y: usize, channel: usize) -> &mut u8 {
        &mut self.data[(y * self.width + x) * self.channels + channel]
    }
}
