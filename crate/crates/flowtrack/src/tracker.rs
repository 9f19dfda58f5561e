//! Per-ROI aggregation of the dense flow field and frame-to-frame updates.
//!
//! Two shape-preserving aggregations are provided: the component-wise median
//! (a pure translation) and an axis-separable affine fit (translation plus
//! anisotropic scaling about the frame origin). Once a ROI is lost it stays
//! lost for the rest of the sequence.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::flow::{estimate_flow, sample_flow, FlowConfig};
use crate::frame::Frame;
use crate::geometry::{roi_visible_fraction, Roi};

/// A constant per-ROI displacement in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub du: f64,
    pub dv: f64,
}

/// Parameters of the axis-separable affine flow `u = tau_x + sigma_x * x`,
/// `v = tau_y + sigma_y * y`. The `translation_only_*` flags mark axes where
/// degenerate coordinate spread forced a median-translation fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFlowParams {
    pub tau_x: f64,
    pub sigma_x: f64,
    pub tau_y: f64,
    pub sigma_y: f64,
    pub translation_only_x: bool,
    pub translation_only_y: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMethod {
    Median,
    Affine,
}

#[derive(Debug, Clone)]
pub struct TrackerConfig {
    pub method: AggregationMethod,
    /// A ROI whose visible area fraction drops below this is lost.
    pub min_visible_frac: f64,
    /// Fewer flow samples than this marks the ROI lost.
    pub min_samples: usize,
    /// A side shorter than this many pixels marks the ROI lost.
    pub min_roi_side: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            method: AggregationMethod::Median,
            min_visible_frac: 0.5,
            min_samples: 9,
            min_roi_side: 4.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_visible_frac > 0.0 && self.min_visible_frac <= 1.0) {
            return Err(Error::InvalidConfig(
                "min_visible_frac must be in (0, 1]".into(),
            ));
        }
        if self.min_roi_side < 0.0 || !self.min_roi_side.is_finite() {
            return Err(Error::InvalidConfig(
                "min_roi_side must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-frame ROI estimates for every declared id, NaN-filled once lost.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `frames[t]` holds one entry per declared ROI, in declaration order.
    pub frames: Vec<Vec<Roi>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn roi_ids(&self) -> Vec<u32> {
        self.frames
            .first()
            .map_or_else(Vec::new, |rois| rois.iter().map(|r| r.id).collect())
    }
}

/// Wall-clock timing of the tracking loop, for FPS reporting.
#[derive(Debug, Clone)]
pub struct TrackTiming {
    /// Seconds spent producing each frame's estimate (one entry per step).
    pub per_frame: Vec<f64>,
    pub total_seconds: f64,
}

impl TrackTiming {
    /// Frames processed per second of tracking time.
    pub fn fps(&self) -> Option<f64> {
        if self.per_frame.is_empty() || self.total_seconds <= 0.0 {
            None
        } else {
            Some(self.per_frame.len() as f64 / self.total_seconds)
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackResult {
    pub trajectory: Trajectory,
    pub timing: TrackTiming,
}

/// Component-wise median of the flow samples. The median of an even count
/// is the mean of the two middle order statistics.
pub fn median_aggregate(u_samples: &[f64], v_samples: &[f64]) -> Result<Displacement> {
    if u_samples.is_empty() || u_samples.len() != v_samples.len() {
        return Err(Error::NoSamples);
    }
    Ok(Displacement {
        du: median(u_samples),
        dv: median(v_samples),
    })
}

fn median(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Variance of coordinate spread below this triggers the translation-only
/// fallback for that axis.
const SPREAD_EPS: f64 = 1e-9;

/// Least-squares fit of the axis-separable affine flow over the sampled
/// window: two independent 1-D regressions, `u` against `x` and `v` against
/// `y`. Axes with degenerate coordinate spread fall back to a pure median
/// translation with `sigma = 0`.
pub fn affine_fit(
    u_samples: &[f64],
    v_samples: &[f64],
    coords: &[(i64, i64)],
) -> Result<AffineFlowParams> {
    let n = u_samples.len();
    if n == 0 || v_samples.len() != n || coords.len() != n {
        return Err(Error::NoSamples);
    }
    let fit_axis = |vals: &[f64], pick: &dyn Fn(&(i64, i64)) -> f64| -> (f64, f64, bool) {
        let nf = n as f64;
        let mean_c = coords.iter().map(pick).sum::<f64>() / nf;
        let mean_v = vals.iter().sum::<f64>() / nf;
        let mut scc = 0.0;
        let mut scv = 0.0;
        for (c, v) in coords.iter().zip(vals) {
            let dc = pick(c) - mean_c;
            scc += dc * dc;
            scv += dc * (v - mean_v);
        }
        if scc / nf < SPREAD_EPS {
            (median(vals), 0.0, true)
        } else {
            let sigma = scv / scc;
            (mean_v - sigma * mean_c, sigma, false)
        }
    };
    let (tau_x, sigma_x, fb_x) = fit_axis(u_samples, &|c| c.0 as f64);
    let (tau_y, sigma_y, fb_y) = fit_axis(v_samples, &|c| c.1 as f64);
    Ok(AffineFlowParams {
        tau_x,
        sigma_x,
        tau_y,
        sigma_y,
        translation_only_x: fb_x,
        translation_only_y: fb_y,
    })
}

/// Translation update: the ROI moves by the displacement, width and height
/// unchanged.
pub fn update_median(r: &Roi, d: &Displacement) -> Roi {
    Roi {
        id: r.id,
        x: r.x + d.du,
        y: r.y + d.dv,
        w: r.w,
        h: r.h,
    }
}

/// Affine update: scaling about the frame origin by `(1 + sigma)` per axis,
/// then translation by `tau`.
pub fn update_affine(r: &Roi, p: &AffineFlowParams) -> Roi {
    Roi {
        id: r.id,
        x: r.x + p.sigma_x * r.x + p.tau_x,
        y: r.y + p.sigma_y * r.y + p.tau_y,
        w: (1.0 + p.sigma_x) * r.w,
        h: (1.0 + p.sigma_y) * r.h,
    }
}

/// Advances every ROI by one frame: estimates the dense flow for the pair,
/// aggregates it per ROI, applies the configured update, then the loss rule.
/// Loss is data, not failure: lost ROIs come out as NaN entries.
pub fn step(
    prev: &Frame,
    next: &Frame,
    rois: &[Roi],
    cfg: &TrackerConfig,
    flow_cfg: &FlowConfig,
) -> Result<Vec<Roi>> {
    cfg.validate()?;
    let field = estimate_flow(prev, next, flow_cfg, None)?;
    let mut out = Vec::with_capacity(rois.len());
    for r in rois {
        out.push(step_roi(&field, r, cfg, next.width, next.height));
    }
    Ok(out)
}

fn step_roi(
    field: &crate::flow::FlowField,
    r: &Roi,
    cfg: &TrackerConfig,
    frame_w: usize,
    frame_h: usize,
) -> Roi {
    if r.is_lost() {
        return Roi::lost(r.id);
    }
    let (us, vs, coords) = sample_flow(field, r);
    if us.len() < cfg.min_samples.max(1) {
        return Roi::lost(r.id);
    }
    let updated = match cfg.method {
        AggregationMethod::Median => {
            let d = match median_aggregate(&us, &vs) {
                Ok(d) => d,
                Err(_) => return Roi::lost(r.id),
            };
            update_median(r, &d)
        }
        AggregationMethod::Affine => {
            let p = match affine_fit(&us, &vs, &coords) {
                Ok(p) => p,
                Err(_) => return Roi::lost(r.id),
            };
            // The ROI must not flip through zero size.
            if 1.0 + p.sigma_x <= 0.0 || 1.0 + p.sigma_y <= 0.0 {
                return Roi::lost(r.id);
            }
            update_affine(r, &p)
        }
    };
    if !updated.x.is_finite() || !updated.y.is_finite() {
        return Roi::lost(r.id);
    }
    if updated.w < cfg.min_roi_side || updated.h < cfg.min_roi_side {
        return Roi::lost(r.id);
    }
    if roi_visible_fraction(&updated, frame_w, frame_h) < cfg.min_visible_frac {
        return Roi::lost(r.id);
    }
    updated
}

/// Tracks the declared ROIs through a frame sequence. The first frame's
/// estimates equal the initial ROIs; each later frame is produced by
/// [`step`]. Initial ROIs must be live and fully inside the first frame.
pub fn track<I>(
    frames: I,
    initial: &[Roi],
    cfg: &TrackerConfig,
    flow_cfg: &FlowConfig,
) -> Result<TrackResult>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    cfg.validate()?;
    flow_cfg.validate()?;
    let mut iter = frames.into_iter();
    let first = iter.next().ok_or(Error::EmptyFrameSequence)??;
    validate_initial(initial, first.width, first.height)?;

    let mut frames_out: Vec<Vec<Roi>> = vec![initial.to_vec()];
    let mut per_frame = Vec::new();
    // Each frame's pyramid serves two consecutive flow estimates; build it
    // once.
    let mut prev = crate::flow::prepare_frame(&first, flow_cfg)?;
    for next in iter {
        let next = next?;
        let started = Instant::now();
        let next_prepared = crate::flow::prepare_frame(&next, flow_cfg)?;
        let field = crate::flow::estimate_flow_prepared(&prev, &next_prepared, flow_cfg)?;
        let current = frames_out.last().unwrap();
        let advanced: Vec<Roi> = current
            .iter()
            .map(|r| step_roi(&field, r, cfg, next_prepared.width, next_prepared.height))
            .collect();
        per_frame.push(started.elapsed().as_secs_f64());
        frames_out.push(advanced);
        prev = next_prepared;
    }
    let total_seconds = per_frame.iter().sum();
    Ok(TrackResult {
        trajectory: Trajectory { frames: frames_out },
        timing: TrackTiming {
            per_frame,
            total_seconds,
        },
    })
}

fn validate_initial(initial: &[Roi], frame_w: usize, frame_h: usize) -> Result<()> {
    for (index, r) in initial.iter().enumerate() {
        let reject = |reason: String| {
            Err(Error::InvalidInitialRoi {
                index,
                id: r.id,
                reason,
            })
        };
        if r.is_lost() {
            return reject("ROI is NaN".into());
        }
        if r.w <= 0.0 || r.h <= 0.0 {
            return reject(format!("sides must be positive (w={}, h={})", r.w, r.h));
        }
        if r.x < 0.0 || r.y < 0.0 || r.x + r.w > frame_w as f64 || r.y + r.h > frame_h as f64 {
            return reject(format!(
                "extends outside the {frame_w}x{frame_h} frame (x={}, y={}, w={}, h={})",
                r.x, r.y, r.w, r.h
            ));
        }
        if initial[..index].iter().any(|other| other.id == r.id) {
            return reject("duplicate id".into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_constant_samples() {
        let u = vec![2.0; 7];
        let v = vec![-1.0; 7];
        let d = median_aggregate(&u, &v).unwrap();
        assert_eq!((d.du, d.dv), (2.0, -1.0));
    }

    #[test]
    fn median_outlier_robust_even_count() {
        let u = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 100.0, 100.0];
        let v = vec![0.0; 10];
        let d = median_aggregate(&u, &v).unwrap();
        assert_eq!(d.du, 0.0);
    }

    #[test]
    fn median_middle_order_statistic() {
        let u = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let v = vec![0.0; 5];
        assert_eq!(median_aggregate(&u, &v).unwrap().du, 2.0);
    }

    #[test]
    fn median_rejects_empty() {
        assert!(matches!(median_aggregate(&[], &[]), Err(Error::NoSamples)));
    }

    #[test]
    fn affine_fit_exact_field() {
        // u(x, y) = 1 + 0.1 x, v = 0 over a small grid.
        let mut us = Vec::new();
        let mut vs = Vec::new();
        let mut coords = Vec::new();
        for y in 0..5i64 {
            for x in 0..5i64 {
                us.push(1.0 + 0.1 * x as f64);
                vs.push(0.0);
                coords.push((x, y));
            }
        }
        let p = affine_fit(&us, &vs, &coords).unwrap();
        assert!((p.tau_x - 1.0).abs() < 1e-12);
        assert!((p.sigma_x - 0.1).abs() < 1e-12);
        assert!(p.tau_y.abs() < 1e-12 && p.sigma_y.abs() < 1e-12);
        assert!(!p.translation_only_x && !p.translation_only_y);
    }

    #[test]
    fn affine_fit_constant_field() {
        let us = vec![3.5; 9];
        let vs = vec![-2.0; 9];
        let coords: Vec<(i64, i64)> = (0..3).flat_map(|y| (0..3).map(move |x| (x, y))).collect();
        let p = affine_fit(&us, &vs, &coords).unwrap();
        assert_eq!(
            (p.tau_x, p.sigma_x, p.tau_y, p.sigma_y),
            (3.5, 0.0, -2.0, 0.0)
        );
    }

    #[test]
    fn affine_fit_degenerate_spread_falls_back() {
        // All samples on one column: x-spread is zero.
        let us = vec![1.0, 2.0, 3.0];
        let vs = vec![0.5, 0.5, 0.5];
        let coords = vec![(4, 0), (4, 1), (4, 2)];
        let p = affine_fit(&us, &vs, &coords).unwrap();
        assert!(p.translation_only_x);
        assert_eq!(p.sigma_x, 0.0);
        assert_eq!(p.tau_x, 2.0); // median of u
        assert!(!p.translation_only_y);
    }

    #[test]
    fn update_median_direct() {
        let r = Roi::new(1, 10.0, 20.0, 30.0, 40.0).unwrap();
        let out = update_median(&r, &Displacement { du: 2.0, dv: -1.0 });
        assert_eq!((out.x, out.y, out.w, out.h), (12.0, 19.0, 30.0, 40.0));
    }

    #[test]
    fn update_median_composes() {
        let mut r = Roi::new(1, 0.0, 0.0, 10.0, 10.0).unwrap();
        for _ in 0..5 {
            r = update_median(&r, &Displacement { du: 3.0, dv: 0.0 });
        }
        assert_eq!((r.x, r.y, r.w, r.h), (15.0, 0.0, 10.0, 10.0));
    }

    #[test]
    fn update_affine_translation_form() {
        let r = Roi::new(1, 10.0, 10.0, 20.0, 20.0).unwrap();
        let p = AffineFlowParams {
            tau_x: 2.0,
            sigma_x: 0.0,
            tau_y: 3.0,
            sigma_y: 0.0,
            translation_only_x: false,
            translation_only_y: false,
        };
        let out = update_affine(&r, &p);
        assert_eq!((out.x, out.y, out.w, out.h), (12.0, 13.0, 20.0, 20.0));
    }

    #[test]
    fn update_affine_scaling_form() {
        let r = Roi::new(1, 10.0, 10.0, 20.0, 20.0).unwrap();
        let p = AffineFlowParams {
            tau_x: 0.0,
            sigma_x: 0.1,
            tau_y: 0.0,
            sigma_y: 0.0,
            translation_only_x: false,
            translation_only_y: false,
        };
        let out = update_affine(&r, &p);
        assert_eq!((out.x, out.y, out.w, out.h), (11.0, 10.0, 22.0, 20.0));
    }

    #[test]
    fn affine_fit_then_update_matches_pure_scaling() {
        // Flow u = 0.05 x sampled on the ROI window: the update must scale
        // every corner by exactly 1.05 about the origin.
        let r = Roi::new(1, 40.0, 60.0, 30.0, 20.0).unwrap();
        let mut us = Vec::new();
        let mut vs = Vec::new();
        let mut coords = Vec::new();
        for y in 60..=80i64 {
            for x in 40..=70i64 {
                us.push(0.05 * x as f64);
                vs.push(0.05 * y as f64);
                coords.push((x, y));
            }
        }
        let p = affine_fit(&us, &vs, &coords).unwrap();
        let out = update_affine(&r, &p);
        for (got, want) in [
            (out.x, 42.0),
            (out.y, 63.0),
            (out.x + out.w, (40.0 + 30.0) * 1.05),
            (out.y + out.h, (60.0 + 20.0) * 1.05),
        ] {
            assert!((got - want).abs() < 1e-6, "got {got}, want {want}");
        }
    }

    #[test]
    fn affine_and_median_agree_on_constant_field() {
        let us = vec![1.25; 25];
        let vs = vec![-0.5; 25];
        let coords: Vec<(i64, i64)> = (0..5).flat_map(|y| (0..5).map(move |x| (x, y))).collect();
        let r = Roi::new(1, 12.0, 8.0, 10.0, 6.0).unwrap();
        let m = update_median(&r, &median_aggregate(&us, &vs).unwrap());
        let a = update_affine(&r, &affine_fit(&us, &vs, &coords).unwrap());
        assert!((m.x - a.x).abs() < 1e-9);
        assert!((m.y - a.y).abs() < 1e-9);
        assert!((m.w - a.w).abs() < 1e-9);
        assert!((m.h - a.h).abs() < 1e-9);
    }

    #[test]
    fn track_single_frame_returns_initial() {
        let f = Frame::filled(64, 64, 1, 100).unwrap();
        let rois = vec![Roi::new(1, 10.0, 10.0, 20.0, 20.0).unwrap()];
        let result = track(
            vec![Ok(f)],
            &rois,
            &TrackerConfig::default(),
            &FlowConfig::default(),
        )
        .unwrap();
        assert_eq!(result.trajectory.len(), 1);
        let r = result.trajectory.frames[0][0];
        assert_eq!((r.x, r.y, r.w, r.h), (10.0, 10.0, 20.0, 20.0));
    }

    #[test]
    fn track_rejects_empty_sequence() {
        let rois = vec![Roi::new(1, 0.0, 0.0, 4.0, 4.0).unwrap()];
        let err = track(
            Vec::new(),
            &rois,
            &TrackerConfig::default(),
            &FlowConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyFrameSequence));
    }

    #[test]
    fn track_rejects_out_of_bounds_initial_roi_by_index() {
        let f = Frame::filled(64, 64, 1, 100).unwrap();
        let rois = vec![
            Roi::new(7, 1.0, 1.0, 10.0, 10.0).unwrap(),
            Roi::new(9, 60.0, 60.0, 10.0, 10.0).unwrap(),
        ];
        let err = track(
            vec![Ok(f)],
            &rois,
            &TrackerConfig::default(),
            &FlowConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::InvalidInitialRoi { index, id, .. } => {
                assert_eq!(index, 1);
                assert_eq!(id, 9);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn step_marks_outside_roi_lost() {
        let f = Frame::filled(64, 64, 1, 100).unwrap();
        let rois = vec![Roi::new(2, 100.0, 100.0, 10.0, 10.0).unwrap()];
        let out = step(
            &f,
            &f,
            &rois,
            &TrackerConfig::default(),
            &FlowConfig::default(),
        )
        .unwrap();
        assert!(out[0].is_lost());
        assert_eq!(out[0].id, 2);
    }

    #[test]
    fn lost_roi_stays_lost() {
        let f = Frame::filled(64, 64, 1, 100).unwrap();
        let rois = vec![Roi::lost(5)];
        let out = step(
            &f,
            &f,
            &rois,
            &TrackerConfig::default(),
            &FlowConfig::default(),
        )
        .unwrap();
        assert!(out[0].is_lost());
    }
}
