//! Synthetic benchmark: random projective motion with ground truth, injected
//! saturated reflections, and Jaccard/FPS scoring.
//!
//! Each generated frame `t >= 1` is the source warped by a cumulative
//! homography `H_t` composed of a *bounded* random pose (rotation, per-axis
//! scale, shear, and elation, all acting about the frame center and each
//! held within its configured bound for every frame) and a translation
//! random walk whose per-frame step is bounded. Reflections are painted
//! after warping, so they pollute the tracker input but never the ground
//! truth; they are drawn from a dedicated RNG stream so their count does not
//! perturb the motion draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::{jaccard, transform_quad, Homography, Point, Quad, Roi};
use crate::tracker::{TrackTiming, Trajectory};

/// Bounds of the per-frame random motion and the scenario shape.
#[derive(Debug, Clone)]
pub struct MotionBounds {
    /// Maximum displacement (pixels) induced at the frame border by the
    /// shear component, and at any corner by the elation component.
    pub max_shear: f64,
    /// Per-axis scale factor range; must contain 1.
    pub scale_range: (f64, f64),
    /// Maximum translation-walk step per frame, in pixels.
    pub max_translation_step: f64,
    /// Rotation bound in degrees (the protocol uses 0, 5, or 10).
    pub max_rotation_deg: f64,
    /// Saturated reflections painted per frame (the protocol uses 0, 10, 25).
    pub n_reflections: usize,
    pub n_frames: usize,
    pub n_rois: usize,
}

impl Default for MotionBounds {
    fn default() -> Self {
        MotionBounds {
            max_shear: 3.0,
            scale_range: (0.95, 1.05),
            max_translation_step: 3.0,
            max_rotation_deg: 0.0,
            n_reflections: 0,
            n_frames: 50,
            n_rois: 10,
        }
    }
}

impl MotionBounds {
    pub fn validate(&self) -> Result<()> {
        if self.max_shear < 0.0 || self.max_translation_step < 0.0 || self.max_rotation_deg < 0.0 {
            return Err(Error::InvalidConfig(
                "motion bounds must be nonnegative".into(),
            ));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "scale_range [{lo}, {hi}] must be positive and contain 1"
            )));
        }
        if self.n_frames == 0 {
            return Err(Error::InvalidConfig("n_frames must be at least 1".into()));
        }
        Ok(())
    }
}

/// Initial ROI side lengths are drawn uniformly from this range (pixels).
pub const ROI_SIDE_MIN: u32 = 24;
pub const ROI_SIDE_MAX: u32 = 80;

/// Reflection radii are drawn uniformly from this range (pixels).
pub const REFLECTION_RADIUS: (f64, f64) = (2.0, 12.0);

/// A saturated elliptical highlight.
#[derive(Debug, Clone, Copy)]
pub struct Reflection {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Reflection {
    pub fn contains_center(&self, px: f64, py: f64) -> bool {
        let dx = (px - self.cx) / self.rx;
        let dy = (py - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

/// Ground truth for one scenario: the cumulative homography and the per-ROI
/// quad for every frame. `homographies` is empty when the truth was read
/// back from a CSV file, which stores only the quads.
#[derive(Debug, Clone)]
pub struct ScenarioTruth {
    pub roi_ids: Vec<u32>,
    pub homographies: Vec<Homography>,
    /// `quads[t][k]` is the true location of ROI `k` in frame `t`.
    pub quads: Vec<Vec<Quad>>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub frames: Vec<Frame>,
    pub truth: ScenarioTruth,
    pub initial_rois: Vec<Roi>,
}

/// The about-center pose components of one transform draw.
struct PoseDraw {
    /// Shear * scale * rotation, conjugated to act about the frame center.
    linear: Homography,
    /// Elation conjugated to act about the frame center.
    elation: Homography,
}

fn frame_center(w: usize, h: usize) -> Point {
    Point::new(w as f64 / 2.0, h as f64 / 2.0)
}

fn sample_pose(bounds: &MotionBounds, w: usize, h: usize, rng: &mut impl Rng) -> PoseDraw {
    let center = frame_center(w, h);
    // Every component is drawn unconditionally so that scenarios with the
    // same seed stay frame-for-frame comparable across different bounds:
    // tightening one bound rescales that component without shifting the
    // draws behind any other.
    let theta = rng
        .random_range(-bounds.max_rotation_deg..=bounds.max_rotation_deg)
        .to_radians();
    let (lo, hi) = bounds.scale_range;
    let sx = rng.random_range(lo..=hi);
    let sy = rng.random_range(lo..=hi);

    // Shear: displacement at the frame border is linear in the coefficients,
    // so a direction draw rescaled to a magnitude draw hits the bound
    // exactly.
    let (mut kx, mut ky) = (0.0, 0.0);
    {
        let a: f64 = rng.random_range(-1.0..=1.0);
        let b: f64 = rng.random_range(-1.0..=1.0);
        let m = rng.random_range(0.0..=bounds.max_shear);
        let d0 = (a * h as f64 / 2.0).hypot(b * w as f64 / 2.0);
        if d0 > 1e-12 {
            kx = a * m / d0;
            ky = b * m / d0;
        }
    }

    // Elation: corner displacement is only approximately linear in the row
    // entries; rescale by fixed-point iteration and shrink until the bound
    // holds.
    let (mut g1, mut g2) = (0.0, 0.0);
    {
        let a: f64 = rng.random_range(-1.0..=1.0);
        let b: f64 = rng.random_range(-1.0..=1.0);
        let m = rng.random_range(0.0..=bounds.max_shear);
        let r2 = (w as f64 / 2.0).powi(2) + (h as f64 / 2.0).powi(2);
        let norm = (a * a + b * b).sqrt();
        if norm > 1e-12 && m > 0.0 {
            let mut s = m / (r2 * norm);
            for _ in 0..8 {
                let d = elation_corner_displacement(s * a, s * b, w, h);
                if d <= 1e-15 {
                    break;
                }
                s *= m / d;
            }
            while elation_corner_displacement(s * a, s * b, w, h) > m + 1e-9 {
                s *= 0.95;
            }
            g1 = s * a;
            g2 = s * b;
        }
    }

    let linear = Homography::shear(kx, ky)
        .compose(&Homography::scaling(sx, sy))
        .compose(&Homography::rotation(theta))
        .about(center);
    let elation = Homography::elation(g1, g2).about(center);
    PoseDraw { linear, elation }
}

/// Max displacement over the frame corners of a pure elation about the
/// center with bottom row `(g1, g2, 1)` in centered coordinates.
fn elation_corner_displacement(g1: f64, g2: f64, w: usize, h: usize) -> f64 {
    let hw = w as f64 / 2.0;
    let hh = h as f64 / 2.0;
    let mut worst = 0.0f64;
    for (qx, qy) in [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)] {
        let s = 1.0 + g1 * qx + g2 * qy;
        if s.abs() < 1e-9 {
            return f64::INFINITY;
        }
        let dx = qx / s - qx;
        let dy = qy / s - qy;
        worst = worst.max(dx.hypot(dy));
    }
    worst
}

/// Uniform draw from the disc of radius `max_translation_step`.
fn sample_step(bounds: &MotionBounds, rng: &mut impl Rng) -> (f64, f64) {
    loop {
        let x: f64 = rng.random_range(-1.0..=1.0);
        let y: f64 = rng.random_range(-1.0..=1.0);
        if x * x + y * y <= 1.0 {
            return (
                x * bounds.max_translation_step,
                y * bounds.max_translation_step,
            );
        }
    }
}

fn compose_transform(pose: &PoseDraw, translation: (f64, f64)) -> Homography {
    pose.elation
        .compose(&Homography::translation(translation.0, translation.1))
        .compose(&pose.linear)
}

/// Draws one bounded random projective transform for a `w x h` frame:
/// rotation, anisotropic scale, shear, translation, and elation are applied
/// in that order, all but the translation acting about the frame center.
pub fn sample_transform(
    bounds: &MotionBounds,
    frame_w: usize,
    frame_h: usize,
    rng: &mut impl Rng,
) -> Homography {
    let pose = sample_pose(bounds, frame_w, frame_h, rng);
    let step = sample_step(bounds, rng);
    compose_transform(&pose, step)
}

/// Inverse-warps a frame: each output pixel samples the source at the
/// inverse image of its center, with bilinear interpolation; samples outside
/// the source are black.
pub fn warp_frame(f: &Frame, h: &Homography) -> Frame {
    if h == &Homography::identity() {
        return f.clone();
    }
    let inv = raw_inverse(h.matrix());
    let (w, ht, c) = (f.width, f.height, f.channels);
    let mut data = vec![0u8; w * ht * c];
    let max_x = (w - 1) as f64;
    let max_y = (ht - 1) as f64;
    for y in 0..ht {
        let oy = y as f64 + 0.5;
        for x in 0..w {
            let ox = x as f64 + 0.5;
            let s = inv[2][0] * ox + inv[2][1] * oy + inv[2][2];
            if s.abs() < 1e-12 {
                continue;
            }
            let sx = (inv[0][0] * ox + inv[0][1] * oy + inv[0][2]) / s - 0.5;
            let sy = (inv[1][0] * ox + inv[1][1] * oy + inv[1][2]) / s - 0.5;
            if !(0.0..=max_x).contains(&sx) || !(0.0..=max_y).contains(&sy) {
                continue;
            }
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(ht - 1);
            let ax = sx - x0 as f64;
            let ay = sy - y0 as f64;
            let out = (y * w + x) * c;
            for ch in 0..c {
                let p00 = f.sample(x0, y0, ch) as f64;
                let p10 = f.sample(x1, y0, ch) as f64;
                let p01 = f.sample(x0, y1, ch) as f64;
                let p11 = f.sample(x1, y1, ch) as f64;
                let top = p00 * (1.0 - ax) + p10 * ax;
                let bot = p01 * (1.0 - ax) + p11 * ax;
                data[out + ch] = (top * (1.0 - ay) + bot * ay).round() as u8;
            }
        }
    }
    Frame {
        width: w,
        height: ht,
        channels: c,
        data,
        index: f.index,
    }
}

/// Unchecked adjugate inverse; the homography type guarantees a usable
/// determinant at construction.
fn raw_inverse(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
        ],
    ]
}

/// Draws `n` reflection ellipses: centers uniform over the frame, radii
/// uniform in [`REFLECTION_RADIUS`].
pub fn sample_reflections(
    n: usize,
    frame_w: usize,
    frame_h: usize,
    rng: &mut impl Rng,
) -> Vec<Reflection> {
    (0..n)
        .map(|_| Reflection {
            cx: rng.random_range(0.0..frame_w as f64),
            cy: rng.random_range(0.0..frame_h as f64),
            rx: rng.random_range(REFLECTION_RADIUS.0..=REFLECTION_RADIUS.1),
            ry: rng.random_range(REFLECTION_RADIUS.0..=REFLECTION_RADIUS.1),
        })
        .collect()
}

/// Saturates every pixel whose center lies inside one of `n` random
/// ellipses (value 255 in every channel).
pub fn add_reflections(f: &Frame, n: usize, rng: &mut impl Rng) -> Frame {
    let mut out = f.clone();
    for r in sample_reflections(n, f.width, f.height, rng) {
        paint_reflection(&mut out, &r);
    }
    out
}

pub fn paint_reflection(f: &mut Frame, r: &Reflection) {
    let x0 = ((r.cx - r.rx - 0.5).floor().max(0.0)) as usize;
    let x1 = ((r.cx + r.rx).ceil().min((f.width - 1) as f64)) as usize;
    let y0 = ((r.cy - r.ry - 0.5).floor().max(0.0)) as usize;
    let y1 = ((r.cy + r.ry).ceil().min((f.height - 1) as f64)) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            if r.contains_center(x as f64 + 0.5, y as f64 + 0.5) {
                for ch in 0..f.channels {
                    *f.sample_mut(x, y, ch) = 255;
                }
            }
        }
    }
}

/// Generates one scenario: random initial ROIs, per-frame bounded-pose
/// motion with a translation walk, reflections on every frame after the
/// first, and exact ground-truth quads.
pub fn generate_scenario(
    source: &Frame,
    bounds: &MotionBounds,
    rng: &mut impl Rng,
) -> Result<Scenario> {
    bounds.validate()?;
    let (w, h) = (source.width, source.height);

    let mut initial_rois: Vec<Roi> = Vec::with_capacity(bounds.n_rois);
    let mut attempts = 0usize;
    while initial_rois.len() < bounds.n_rois {
        attempts += 1;
        if attempts > 1000 {
            return Err(Error::RoiPlacement {
                requested: bounds.n_rois,
                placed: initial_rois.len(),
                attempts: attempts - 1,
                constraint: format!(
                    "sides in [{ROI_SIDE_MIN}, {ROI_SIDE_MAX}] px must fit inside {w}x{h}"
                ),
            });
        }
        let rw = rng.random_range(ROI_SIDE_MIN..=ROI_SIDE_MAX) as usize;
        let rh = rng.random_range(ROI_SIDE_MIN..=ROI_SIDE_MAX) as usize;
        if rw > w || rh > h {
            continue;
        }
        let x = rng.random_range(0..=(w - rw)) as f64;
        let y = rng.random_range(0..=(h - rh)) as f64;
        let id = initial_rois.len() as u32 + 1;
        initial_rois.push(Roi::new(id, x, y, rw as f64, rh as f64)?);
    }

    // Reflections draw from a forked stream so their count cannot perturb
    // the motion or placement draws.
    let mut refl_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());

    let initial_quads: Vec<Quad> = initial_rois
        .iter()
        .map(Quad::from_roi)
        .collect::<Result<_>>()?;

    let mut frames = Vec::with_capacity(bounds.n_frames);
    let mut homographies = Vec::with_capacity(bounds.n_frames);
    let mut quads = Vec::with_capacity(bounds.n_frames);

    let mut first = source.clone();
    first.index = 0;
    frames.push(first);
    homographies.push(Homography::identity());
    quads.push(initial_quads.clone());

    let mut walk = (0.0f64, 0.0f64);
    for t in 1..bounds.n_frames {
        let pose = sample_pose(bounds, w, h, rng);
        let step = sample_step(bounds, rng);
        walk.0 += step.0;
        walk.1 += step.1;
        let h_t = compose_transform(&pose, walk);

        let mut frame = warp_frame(source, &h_t);
        frame = add_reflections(&frame, bounds.n_reflections, &mut refl_rng);
        frame.index = t;
        frames.push(frame);

        let frame_quads = initial_quads
            .iter()
            .map(|q| transform_quad(&h_t, q))
            .collect::<Result<Vec<_>>>()?;
        homographies.push(h_t);
        quads.push(frame_quads);
    }

    Ok(Scenario {
        frames,
        truth: ScenarioTruth {
            roi_ids: initial_rois.iter().map(|r| r.id).collect(),
            homographies,
            quads,
        },
        initial_rois,
    })
}

/// One scored trajectory entry; `jaccard` is NaN when the estimate was lost.
#[derive(Debug, Clone, Copy)]
pub struct JaccardRow {
    pub frame: usize,
    pub id: u32,
    pub jaccard: f64,
}

/// Summary statistics over all (frame, ROI) entries. Lost entries score 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub frames: usize,
    pub rois: usize,
    pub jaccard_q25: f64,
    pub jaccard_q50: f64,
    pub jaccard_q75: f64,
    pub jaccard_mean: f64,
    /// Fraction of entries with Jaccard >= 0.85.
    pub frac_ge_085: f64,
    pub lost_entries: usize,
    /// Frames processed per second of tracking time, when timing is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<JaccardRow>,
    pub summary: EvalSummary,
}

/// Scores a trajectory against ground truth, frame by frame and ROI by ROI.
pub fn evaluate(
    traj: &Trajectory,
    truth: &ScenarioTruth,
    timing: Option<&TrackTiming>,
) -> Result<EvalReport> {
    if traj.len() != truth.quads.len() {
        return Err(Error::TruthMismatch(format!(
            "trajectory has {} frames, truth has {}",
            traj.len(),
            truth.quads.len()
        )));
    }
    if traj.roi_ids() != truth.roi_ids {
        return Err(Error::TruthMismatch(format!(
            "ROI ids differ: trajectory {:?}, truth {:?}",
            traj.roi_ids(),
            truth.roi_ids
        )));
    }
    let mut rows = Vec::with_capacity(traj.len() * truth.roi_ids.len());
    for (t, (rois, frame_quads)) in traj.frames.iter().zip(&truth.quads).enumerate() {
        if rois.len() != frame_quads.len() {
            return Err(Error::TruthMismatch(format!(
                "frame {t} has {} estimates but {} truth quads",
                rois.len(),
                frame_quads.len()
            )));
        }
        for (r, q) in rois.iter().zip(frame_quads) {
            rows.push(JaccardRow {
                frame: t,
                id: r.id,
                jaccard: jaccard(q, r),
            });
        }
    }
    let summary = summarize(&rows, traj.len(), truth.roi_ids.len(), timing);
    Ok(EvalReport { rows, summary })
}

fn summarize(
    rows: &[JaccardRow],
    frames: usize,
    rois: usize,
    timing: Option<&TrackTiming>,
) -> EvalSummary {
    let scores: Vec<f64> = rows
        .iter()
        .map(|r| if r.jaccard.is_nan() { 0.0 } else { r.jaccard })
        .collect();
    let lost_entries = rows.iter().filter(|r| r.jaccard.is_nan()).count();
    let ge = scores.iter().filter(|&&s| s >= 0.85).count();
    let mean = if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    EvalSummary {
        frames,
        rois,
        jaccard_q25: quantile(&scores, 0.25),
        jaccard_q50: quantile(&scores, 0.50),
        jaccard_q75: quantile(&scores, 0.75),
        jaccard_mean: mean,
        frac_ge_085: if scores.is_empty() {
            0.0
        } else {
            ge as f64 / scores.len() as f64
        },
        lost_entries,
        fps: timing.and_then(TrackTiming::fps),
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
