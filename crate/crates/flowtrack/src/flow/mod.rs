//! Dense optical-flow estimation between consecutive frames.
//!
//! The field `(u, v)` is the forward displacement of content anchored at the
//! earlier frame's pixels: whatever sits at `(x, y)` in the earlier frame is
//! found at `(x + u(x,y), y + v(x,y))` in the later one. Moving a region by
//! the aggregated flow therefore moves it *with* the content.

mod estimator;
mod pyramid;

pub use pyramid::{auto_levels, build_pyramid};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::Roi;
use pyramid::GrayF32;

/// Estimator settings. The pyramid downscales by 2 per level; patches of
/// `patch_size` pixels are placed every `patch_stride` pixels.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Pyramid depth; `None` selects as many levels as leave the coarsest
    /// side at least 16 px.
    pub pyramid_levels: Option<usize>,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub iterations_per_level: usize,
    /// Nonnegative weight of the smoothness pass; scales the radius of the
    /// weighted-median regularization. Zero disables it.
    pub smoothness_weight: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            pyramid_levels: None,
            patch_size: 8,
            patch_stride: 4,
            iterations_per_level: 8,
            smoothness_weight: 1.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 2 {
            return Err(Error::InvalidConfig("patch_size must be at least 2".into()));
        }
        if self.patch_stride == 0 || self.patch_stride > self.patch_size {
            return Err(Error::InvalidConfig(
                "patch_stride must be in 1..=patch_size".into(),
            ));
        }
        if self.pyramid_levels == Some(0) {
            return Err(Error::InvalidConfig(
                "pyramid_levels must be at least 1".into(),
            ));
        }
        if self.iterations_per_level == 0 {
            return Err(Error::InvalidConfig(
                "iterations_per_level must be at least 1".into(),
            ));
        }
        if !self.smoothness_weight.is_finite() || self.smoothness_weight < 0.0 {
            return Err(Error::InvalidConfig(
                "smoothness_weight must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pixel displacement field with the same spatial size as its frames.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let k = y * self.width + x;
        (self.u[k], self.v[k])
    }

    /// Bilinear sample at continuous pixel coordinates, clamped to bounds.
    pub(crate) fn bilinear(&self, x: f32, y: f32) -> (f32, f32) {
        let x = x.clamp(0.0, (self.width - 1) as f32);
        let y = y.clamp(0.0, (self.height - 1) as f32);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = x - x0 as f32;
        let ay = y - y0 as f32;
        let lerp = |f: &[f32]| {
            let top = f[y0 * self.width + x0] * (1.0 - ax) + f[y0 * self.width + x1] * ax;
            let bot = f[y1 * self.width + x0] * (1.0 - ax) + f[y1 * self.width + x1] * ax;
            top * (1.0 - ay) + bot * ay
        };
        (lerp(&self.u), lerp(&self.v))
    }
}

/// Estimates the dense flow warping `prev` toward `next`. The frames must
/// have identical dimensions; an optional `init` field (full resolution)
/// warm-starts the coarsest pyramid level.
pub fn estimate_flow(
    prev: &Frame,
    next: &Frame,
    cfg: &FlowConfig,
    init: Option<&FlowField>,
) -> Result<FlowField> {
    cfg.validate()?;
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::DimensionMismatch(
            prev.width,
            prev.height,
            next.width,
            next.height,
        ));
    }
    if let Some(f) = init {
        if f.width != prev.width || f.height != prev.height {
            return Err(Error::DimensionMismatch(
                f.width,
                f.height,
                prev.width,
                prev.height,
            ));
        }
    }
    let prev_pyr = grayscale_pyramid(prev, cfg)?;
    let next_pyr = grayscale_pyramid(next, cfg)?;
    debug_assert_eq!(prev_pyr.len(), next_pyr.len());
    Ok(estimator::estimate(&prev_pyr, &next_pyr, cfg, init))
}

/// Precomputed grayscale pyramid of one frame, reusable across consecutive
/// flow estimates.
pub(crate) struct PreparedFrame {
    pub width: usize,
    pub height: usize,
    levels: Vec<GrayF32>,
}

pub(crate) fn prepare_frame(frame: &Frame, cfg: &FlowConfig) -> Result<PreparedFrame> {
    Ok(PreparedFrame {
        width: frame.width,
        height: frame.height,
        levels: grayscale_pyramid(frame, cfg)?,
    })
}

pub(crate) fn estimate_flow_prepared(
    prev: &PreparedFrame,
    next: &PreparedFrame,
    cfg: &FlowConfig,
) -> Result<FlowField> {
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::DimensionMismatch(
            prev.width,
            prev.height,
            next.width,
            next.height,
        ));
    }
    Ok(estimator::estimate(&prev.levels, &next.levels, cfg, None))
}

pub(crate) fn grayscale_pyramid(frame: &Frame, cfg: &FlowConfig) -> Result<Vec<GrayF32>> {
    let gray = frame.to_grayscale()?;
    let levels = build_pyramid(&gray, cfg)?;
    Ok(levels.iter().map(GrayF32::from_frame).collect())
}

/// Flow samples inside a ROI: every integer pixel `(x, y)` with
/// `x` in `[ceil(x_r), floor(x_r + w_r)]` and `y` likewise, clipped to the
/// frame. Returns the `u` values, `v` values, and sample coordinates.
pub fn sample_flow(field: &FlowField, r: &Roi) -> (Vec<f64>, Vec<f64>, Vec<(i64, i64)>) {
    if r.is_lost() {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    let x0 = (r.x.ceil() as i64).max(0);
    let x1 = ((r.x + r.w).floor() as i64).min(field.width as i64 - 1);
    let y0 = (r.y.ceil() as i64).max(0);
    let y1 = ((r.y + r.h).floor() as i64).min(field.height as i64 - 1);
    if x0 > x1 || y0 > y1 {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    let n = ((x1 - x0 + 1) * (y1 - y0 + 1)) as usize;
    let mut us = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (u, v) = field.at(x as usize, y as usize);
            us.push(u as f64);
            vs.push(v as f64);
            coords.push((x, y));
        }
    }
    (us, vs, coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_frame(w: usize, h: usize, seed: u64) -> Frame {
        let mut state = seed.max(1);
        let data = (0..w * h)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 24) as u8
            })
            .collect();
        Frame::new(w, h, 1, data, 0).unwrap()
    }

    fn cyclic_shift(f: &Frame, dx: i64, dy: i64) -> Frame {
        let (w, h) = (f.width as i64, f.height as i64);
        let mut data = vec![0u8; f.data.len()];
        for y in 0..h {
            for x in 0..w {
                let sx = (x - dx).rem_euclid(w) as usize;
                let sy = (y - dy).rem_euclid(h) as usize;
                data[(y * w + x) as usize] = f.data[sy * f.width + sx];
            }
        }
        Frame::new(f.width, f.height, 1, data, f.index + 1).unwrap()
    }

    fn central_median(field: &FlowField) -> (f64, f64) {
        let bx = field.width / 10;
        let by = field.height / 10;
        let mut us = Vec::new();
        let mut vs = Vec::new();
        for y in by..field.height - by {
            for x in bx..field.width - bx {
                let (u, v) = field.at(x, y);
                us.push(u as f64);
                vs.push(v as f64);
            }
        }
        us.sort_unstable_by(f64::total_cmp);
        vs.sort_unstable_by(f64::total_cmp);
        (us[us.len() / 2], vs[vs.len() / 2])
    }

    #[test]
    fn identical_frames_give_near_zero_flow() {
        let f = noise_frame(128, 96, 11);
        let field = estimate_flow(&f, &f, &FlowConfig::default(), None).unwrap();
        let (mu, mv) = central_median(&field);
        assert!(mu.abs() <= 0.1 && mv.abs() <= 0.1, "median ({mu}, {mv})");
        // 99th percentile magnitude stays small over the whole field.
        let mut mags: Vec<f32> = field
            .u
            .iter()
            .zip(&field.v)
            .map(|(u, v)| (u * u + v * v).sqrt())
            .collect();
        mags.sort_unstable_by(f32::total_cmp);
        let p99 = mags[(mags.len() as f64 * 0.99) as usize];
        assert!(p99 <= 0.5, "p99 = {p99}");
    }

    #[test]
    fn integer_translation_recovered() {
        let f = noise_frame(256, 256, 5);
        let g = cyclic_shift(&f, 3, 2);
        let field = estimate_flow(&f, &g, &FlowConfig::default(), None).unwrap();
        let (mu, mv) = central_median(&field);
        assert!(
            (mu - 3.0).abs() <= 0.25 && (mv - 2.0).abs() <= 0.25,
            "median ({mu}, {mv})"
        );
    }

    #[test]
    fn constant_frames_give_zero_field() {
        let f = Frame::filled(64, 64, 1, 90).unwrap();
        let field = estimate_flow(&f, &f, &FlowConfig::default(), None).unwrap();
        assert!(field.u.iter().all(|&u| u == 0.0));
        assert!(field.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Frame::filled(64, 64, 1, 0).unwrap();
        let b = Frame::filled(64, 48, 1, 0).unwrap();
        assert!(matches!(
            estimate_flow(&a, &b, &FlowConfig::default(), None),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn init_dimension_mismatch_rejected() {
        let a = Frame::filled(64, 64, 1, 0).unwrap();
        let init = FlowField::zeros(32, 32);
        assert!(matches!(
            estimate_flow(&a, &a, &FlowConfig::default(), Some(&init)),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn bad_configs_rejected() {
        for cfg in [
            FlowConfig {
                patch_stride: 0,
                ..FlowConfig::default()
            },
            FlowConfig {
                patch_stride: 9,
                ..FlowConfig::default()
            },
            FlowConfig {
                pyramid_levels: Some(0),
                ..FlowConfig::default()
            },
            FlowConfig {
                iterations_per_level: 0,
                ..FlowConfig::default()
            },
            FlowConfig {
                smoothness_weight: -1.0,
                ..FlowConfig::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn sample_flow_inclusive_window() {
        let field = FlowField::zeros(480, 360);
        let r = Roi::new(1, 0.0, 0.0, 2.0, 2.0).unwrap();
        let (us, _, coords) = sample_flow(&field, &r);
        assert_eq!(us.len(), 9);
        assert!(coords
            .iter()
            .all(|&(x, y)| (0..=2).contains(&x) && (0..=2).contains(&y)));
    }

    #[test]
    fn sample_flow_outside_frame_is_empty() {
        let field = FlowField::zeros(100, 100);
        let r = Roi::new(1, 200.0, 200.0, 10.0, 10.0).unwrap();
        let (us, vs, coords) = sample_flow(&field, &r);
        assert!(us.is_empty() && vs.is_empty() && coords.is_empty());
    }

    #[test]
    fn sample_flow_clips_to_frame() {
        let field = FlowField::zeros(100, 100);
        let r = Roi::new(1, -1.5, 0.0, 3.0, 1.0).unwrap();
        let (_, _, coords) = sample_flow(&field, &r);
        let expect: Vec<(i64, i64)> = vec![(0, 0), (1, 0), (0, 1), (1, 1)];
        assert_eq!(coords, expect);
    }
}
