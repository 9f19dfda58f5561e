//! Coarse-to-fine image pyramid: 3x3 binomial blur followed by decimation
//! by 2 (floor dimensions) per level.

use crate::error::{Error, Result};
use crate::frame::Frame;

use super::FlowConfig;

/// Coarsest pyramid level keeps both sides at least this large.
pub const MIN_COARSE_SIDE: usize = 16;

/// Number of levels that keep the coarsest side >= MIN_COARSE_SIDE.
pub fn auto_levels(width: usize, height: usize) -> usize {
    let mut levels = 1;
    while (width >> levels).min(height >> levels) >= MIN_COARSE_SIDE {
        levels += 1;
    }
    levels
}

/// Builds the pyramid for a single-channel frame. Level 0 is the input
/// itself. A requested level count that the frame cannot support is reduced,
/// never an error.
pub fn build_pyramid(frame: &Frame, cfg: &FlowConfig) -> Result<Vec<Frame>> {
    if frame.channels != 1 {
        return Err(Error::UnsupportedChannels(frame.channels));
    }
    if frame.width < cfg.patch_size || frame.height < cfg.patch_size {
        return Err(Error::FrameTooSmall(
            frame.width,
            frame.height,
            cfg.patch_size,
        ));
    }
    let max_levels = auto_levels(frame.width, frame.height);
    let levels = cfg
        .pyramid_levels
        .unwrap_or(max_levels)
        .clamp(1, max_levels);

    let mut out = Vec::with_capacity(levels);
    out.push(frame.clone());
    for _ in 1..levels {
        let prev = out.last().unwrap();
        out.push(blur_decimate(prev));
    }
    Ok(out)
}

/// 3x3 binomial ([1 2 1]^2 / 16) blur with clamped borders, then every
/// second pixel. Integer arithmetic with round-to-nearest keeps constant
/// frames exactly constant.
fn blur_decimate(f: &Frame) -> Frame {
    let (w, h) = (f.width, f.height);
    let mut rows: Vec<u16> = vec![0; w * h];
    for y in 0..h {
        let src = &f.data[y * w..(y + 1) * w];
        let dst = &mut rows[y * w..(y + 1) * w];
        for x in 0..w {
            let l = src[x.saturating_sub(1)] as u16;
            let c = src[x] as u16;
            let r = src[(x + 1).min(w - 1)] as u16;
            dst[x] = l + 2 * c + r;
        }
    }
    let (ow, oh) = (w / 2, h / 2);
    let mut data = Vec::with_capacity(ow * oh);
    for oy in 0..oh {
        let y = oy * 2;
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for ox in 0..ow {
            let x = ox * 2;
            let sum =
                rows[up * w + x] as u32 + 2 * rows[y * w + x] as u32 + rows[down * w + x] as u32;
            data.push(((sum + 8) >> 4) as u8);
        }
    }
    Frame {
        width: ow,
        height: oh,
        channels: 1,
        data,
        index: f.index,
    }
}

/// Single-channel image with f32 samples, used by the estimator.
#[derive(Debug, Clone)]
pub(crate) struct GrayF32 {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f32>,
}

impl GrayF32 {
    pub fn from_frame(f: &Frame) -> Self {
        debug_assert_eq!(f.channels, 1);
        GrayF32 {
            w: f.width,
            h: f.height,
            data: f.data.iter().map(|&v| v as f32).collect(),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }
}
