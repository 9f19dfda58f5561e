//! Geometric primitives: rectangular ROIs, quadrilaterals, homographies, and
//! the rasterized Jaccard index used to score tracking results.
//!
//! Rasterization rule: pixel `(i, j)` belongs to a shape iff its center
//! `(i + 0.5, j + 0.5)` lies inside it. Rectangles cover the half-open region
//! `[x, x+w) x [y, y+h)`; quadrilaterals use the even-odd rule. All values are
//! immutable after construction and every operation here is a pure function.

use crate::error::{Error, Result};

/// A point in frame coordinates (origin at the left-top corner, y down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// An axis-parallel rectangular region of interest.
///
/// `(x, y)` is the left-top corner in continuous pixel coordinates; `w` and
/// `h` are the width and height. A lost ROI carries `NaN` in all four
/// geometry fields while keeping its id.
#[derive(Debug, Clone, Copy)]
pub struct Roi {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Roi {
    /// A live ROI. Rejects non-finite coordinates and non-positive sides.
    pub fn new(id: u32, x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidRoi {
                id,
                reason: "coordinates must be finite".into(),
            });
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidRoi {
                id,
                reason: format!("sides must be positive (got w={w}, h={h})"),
            });
        }
        Ok(Roi { id, x, y, w, h })
    }

    /// The permanently-lost marker: all geometry fields NaN, id preserved.
    pub fn lost(id: u32) -> Self {
        Roi {
            id,
            x: f64::NAN,
            y: f64::NAN,
            w: f64::NAN,
            h: f64::NAN,
        }
    }

    pub fn is_lost(&self) -> bool {
        self.x.is_nan() || self.y.is_nan() || self.w.is_nan() || self.h.is_nan()
    }

    /// Pixel-center membership under the half-open rectangle rule.
    pub fn contains_center(&self, cx: f64, cy: f64) -> bool {
        cx >= self.x && cx < self.x + self.w && cy >= self.y && cy < self.y + self.h
    }

    /// Corners in left-top, right-top, right-bottom, left-bottom order.
    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x, self.y),
            Point::new(self.x + self.w, self.y),
            Point::new(self.x + self.w, self.y + self.h),
            Point::new(self.x, self.y + self.h),
        ]
    }
}

/// A simple (non-self-intersecting) quadrilateral, corner order preserved
/// from the rectangle it images: left-top, right-top, right-bottom,
/// left-bottom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    corners: [Point; 4],
}

impl Quad {
    /// Validates simplicity by pairwise edge-intersection tests and rejects
    /// degenerate (zero-length edge or near-zero area) polygons.
    pub fn new(corners: [Point; 4]) -> Result<Self> {
        for p in &corners {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::DegenerateQuad {
                    reason: "non-finite corner".into(),
                });
            }
        }
        let e = |i: usize| (corners[i], corners[(i + 1) % 4]);
        for i in 0..4 {
            let (a, b) = e(i);
            if a == b {
                return Err(Error::DegenerateQuad {
                    reason: format!("zero-length edge at corner {i}"),
                });
            }
        }
        // Opposite edges of a simple quadrilateral must not cross.
        if segments_intersect(e(0), e(2)) || segments_intersect(e(1), e(3)) {
            return Err(Error::DegenerateQuad {
                reason: "self-intersecting corner order".into(),
            });
        }
        let area = polygon_area(&corners).abs();
        if area < 1e-9 {
            return Err(Error::DegenerateQuad {
                reason: format!("area {area:e} below threshold"),
            });
        }
        Ok(Quad { corners })
    }

    /// The rectangle reinterpreted as a quad (identity mapping of corners).
    pub fn from_roi(r: &Roi) -> Result<Self> {
        if r.is_lost() {
            return Err(Error::DegenerateQuad {
                reason: "lost ROI has no geometry".into(),
            });
        }
        Quad::new(r.corners())
    }

    pub fn corners(&self) -> &[Point; 4] {
        &self.corners
    }

    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let xs = self.corners.iter().map(|p| p.x);
        let ys = self.corners.iter().map(|p| p.y);
        (
            xs.clone().fold(f64::INFINITY, f64::min),
            ys.clone().fold(f64::INFINITY, f64::min),
            xs.fold(f64::NEG_INFINITY, f64::max),
            ys.fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// Pixel-center membership under the even-odd rule.
    pub fn contains_center(&self, cx: f64, cy: f64) -> bool {
        let mut inside = false;
        let c = &self.corners;
        let mut j = 3;
        for i in 0..4 {
            let (a, b) = (c[j], c[i]);
            if (a.y > cy) != (b.y > cy) {
                let x_cross = a.x + (b.x - a.x) * (cy - a.y) / (b.y - a.y);
                if cx < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

fn polygon_area(c: &[Point; 4]) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let a = c[i];
        let b = c[(i + 1) % 4];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Whether two closed segments share any point. Used on non-adjacent quad
/// edges, where any contact means the polygon is not simple.
fn segments_intersect(s1: (Point, Point), s2: (Point, Point)) -> bool {
    let (a, b) = s1;
    let (c, d) = s2;
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// A 3x3 projective transform of the plane, stored row-major and normalized
/// so the bottom-right entry is 1 whenever it is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

const DET_EPS: f64 = 1e-12;
const SCALE_EPS: f64 = 1e-12;

impl Homography {
    /// Builds from a raw matrix, normalizing and checking invertibility.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        let mut m = m;
        let s = m[2][2];
        if s.abs() > SCALE_EPS {
            for row in &mut m {
                for v in row {
                    *v /= s;
                }
            }
        }
        let det = det3(&m);
        if !det.is_finite() || det.abs() <= DET_EPS {
            return Err(Error::SingularHomography { det });
        }
        Ok(Homography { m })
    }

    pub fn identity() -> Self {
        Homography {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// Rotation about the origin by `theta` radians (y-down coordinates).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Homography {
            m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn scaling(sx: f64, sy: f64) -> Self {
        Homography {
            m: [[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Shear: x is displaced by `kx * y`, y by `ky * x`.
    pub fn shear(kx: f64, ky: f64) -> Self {
        Homography {
            m: [[1.0, kx, 0.0], [ky, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Elation: the purely projective component, bottom row `(g1, g2, 1)`.
    pub fn elation(g1: f64, g2: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [g1, g2, 1.0]],
        }
    }

    /// Conjugates `self` by a translation so it acts about `center`.
    pub fn about(self, center: Point) -> Self {
        Homography::translation(center.x, center.y)
            .compose(&self)
            .compose(&Homography::translation(-center.x, -center.y))
    }

    /// `self * other`: the transform applying `other` first, then `self`.
    pub fn compose(&self, other: &Homography) -> Homography {
        let a = &self.m;
        let b = &other.m;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        // Renormalize; composition of invertible maps stays invertible.
        let s = out[2][2];
        if s.abs() > SCALE_EPS {
            for row in &mut out {
                for v in row {
                    *v /= s;
                }
            }
        }
        Homography { m: out }
    }

    pub fn inverse(&self) -> Result<Homography> {
        let m = &self.m;
        let det = det3(m);
        if !det.is_finite() || det.abs() <= DET_EPS {
            return Err(Error::SingularHomography { det });
        }
        let inv = [
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
        ];
        Homography::new(inv)
    }

    /// Maps a point, dehomogenizing the image. Errors if the image lies at
    /// infinity (homogeneous scale below 1e-12 in magnitude).
    pub fn apply(&self, p: Point) -> Result<Point> {
        let m = &self.m;
        let s = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if s.abs() < SCALE_EPS {
            return Err(Error::PointAtInfinity);
        }
        Ok(Point::new(
            (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / s,
            (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / s,
        ))
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Maps each corner of `q`, preserving corner order.
pub fn transform_quad(h: &Homography, q: &Quad) -> Result<Quad> {
    let c = q.corners();
    let mapped = [
        h.apply(c[0])?,
        h.apply(c[1])?,
        h.apply(c[2])?,
        h.apply(c[3])?,
    ];
    Quad::new(mapped)
}

/// Rasterized Jaccard index (intersection over union) between a ground-truth
/// quadrilateral and an estimated rectangle, counting pixel centers inside
/// each shape over their joint integer bounding box.
///
/// A lost estimate yields `NaN`, which the evaluation harness scores as a
/// miss.
pub fn jaccard(truth: &Quad, estimate: &Roi) -> f64 {
    if estimate.is_lost() {
        return f64::NAN;
    }
    let (qx0, qy0, qx1, qy1) = truth.bounding_box();
    let x0 = qx0.min(estimate.x);
    let y0 = qy0.min(estimate.y);
    let x1 = qx1.max(estimate.x + estimate.w);
    let y1 = qy1.max(estimate.y + estimate.h);

    let i0 = (x0 - 0.5).floor() as i64;
    let i1 = (x1 - 0.5).ceil() as i64;
    let j0 = (y0 - 0.5).floor() as i64;
    let j1 = (y1 - 0.5).ceil() as i64;

    let mut inter: u64 = 0;
    let mut union: u64 = 0;
    for j in j0..=j1 {
        let cy = j as f64 + 0.5;
        for i in i0..=i1 {
            let cx = i as f64 + 0.5;
            let in_t = truth.contains_center(cx, cy);
            let in_e = estimate.contains_center(cx, cy);
            if in_t && in_e {
                inter += 1;
            }
            if in_t || in_e {
                union += 1;
            }
        }
    }
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

/// Fraction of the ROI's area lying inside the frame `[0, w) x [0, h)`,
/// by exact rectangle intersection.
pub fn roi_visible_fraction(r: &Roi, frame_w: usize, frame_h: usize) -> f64 {
    if r.is_lost() {
        return f64::NAN;
    }
    let ow = (r.x + r.w).min(frame_w as f64) - r.x.max(0.0);
    let oh = (r.y + r.h).min(frame_h as f64) - r.y.max(0.0);
    if ow <= 0.0 || oh <= 0.0 {
        return 0.0;
    }
    (ow * oh) / (r.w * r.h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_quad(x: f64, y: f64, w: f64, h: f64) -> Quad {
        Quad::from_roi(&Roi::new(0, x, y, w, h).unwrap()).unwrap()
    }

    #[test]
    fn jaccard_identical_rects() {
        let t = rect_quad(0.0, 0.0, 10.0, 10.0);
        let e = Roi::new(1, 0.0, 0.0, 10.0, 10.0).unwrap();
        assert_eq!(jaccard(&t, &e), 1.0);
    }

    #[test]
    fn jaccard_disjoint_rects() {
        let t = rect_quad(0.0, 0.0, 10.0, 10.0);
        let e = Roi::new(1, 20.0, 20.0, 10.0, 10.0).unwrap();
        assert_eq!(jaccard(&t, &e), 0.0);
    }

    #[test]
    fn jaccard_half_shifted() {
        // 10x10 rect against the same rect shifted by 5: 50 shared pixels of
        // 150 total.
        let t = rect_quad(0.0, 0.0, 10.0, 10.0);
        let e = Roi::new(1, 5.0, 0.0, 10.0, 10.0).unwrap();
        let j = jaccard(&t, &e);
        assert!((j - 50.0 / 150.0).abs() < 1e-15, "j = {j}");
    }

    #[test]
    fn jaccard_nan_for_lost_estimate() {
        let t = rect_quad(0.0, 0.0, 10.0, 10.0);
        assert!(jaccard(&t, &Roi::lost(3)).is_nan());
    }

    #[test]
    fn jaccard_one_iff_identical_pixel_sets() {
        // Different continuous coordinates, same rasterized set.
        let t = rect_quad(0.0, 0.0, 10.0, 10.0);
        let e = Roi::new(1, 0.2, 0.4, 9.9, 9.8).unwrap();
        assert_eq!(jaccard(&t, &e), 1.0);
    }

    #[test]
    fn quad_rejects_bowtie() {
        let corners = [
            Point::new(0.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(10.0, 0.0),
            Point::new(0.0, 10.0),
        ];
        assert!(Quad::new(corners).is_err());
    }

    #[test]
    fn quad_rejects_zero_area() {
        let corners = [
            Point::new(0.0, 0.0),
            Point::new(5.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(2.0, 0.0),
        ];
        assert!(Quad::new(corners).is_err());
    }

    #[test]
    fn apply_identity_and_translation() {
        let p = Point::new(7.5, 3.0);
        let id = Homography::identity();
        assert_eq!(id.apply(p).unwrap(), p);

        let t = Homography::translation(3.0, 2.0);
        let q = t.apply(Point::new(0.0, 0.0)).unwrap();
        assert_eq!((q.x, q.y), (3.0, 2.0));
    }

    #[test]
    fn apply_rejects_point_at_infinity() {
        let h = Homography::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        // The horizon line x = -1 maps the homogeneous scale to zero.
        assert!(matches!(
            h.apply(Point::new(-1.0, 5.0)),
            Err(Error::PointAtInfinity)
        ));
    }

    #[test]
    fn inverse_round_trip_random() {
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let h = Homography::new([
                [
                    1.0 + 0.2 * (next() - 0.5),
                    0.2 * (next() - 0.5),
                    40.0 * (next() - 0.5),
                ],
                [
                    0.2 * (next() - 0.5),
                    1.0 + 0.2 * (next() - 0.5),
                    40.0 * (next() - 0.5),
                ],
                [2e-4 * (next() - 0.5), 2e-4 * (next() - 0.5), 1.0],
            ])
            .unwrap();
            let inv = h.inverse().unwrap();
            let p = Point::new(500.0 * next(), 400.0 * next());
            let q = inv.apply(h.apply(p).unwrap()).unwrap();
            assert!((q.x - p.x).abs() < 1e-9 && (q.y - p.y).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_fixes_bottom_right() {
        let h = Homography::new([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(h.matrix()[2][2], 1.0);
        assert_eq!(h.matrix()[0][0], 1.0);
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(Homography::new([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn transform_quad_identity_and_scaling() {
        let q = rect_quad(10.0, 10.0, 20.0, 20.0);
        let id = Homography::identity();
        assert_eq!(transform_quad(&id, &q).unwrap(), q);

        let s = Homography::scaling(1.05, 1.05);
        let out = transform_quad(&s, &q).unwrap();
        let expect = [(10.5, 10.5), (31.5, 10.5), (31.5, 31.5), (10.5, 31.5)];
        for (p, (ex, ey)) in out.corners().iter().zip(expect) {
            assert!((p.x - ex).abs() < 1e-12 && (p.y - ey).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_preserves_collinearity() {
        let h =
            Homography::new([[1.1, 0.08, 5.0], [-0.05, 0.95, -3.0], [1e-4, -8e-5, 1.0]]).unwrap();
        let q = rect_quad(20.0, 30.0, 100.0, 60.0);
        // Three collinear points along the top edge.
        let pts = [
            Point::new(20.0, 30.0),
            Point::new(70.0, 30.0),
            Point::new(120.0, 30.0),
        ];
        let m: Vec<Point> = pts.iter().map(|p| h.apply(*p).unwrap()).collect();
        let cross = (m[1].x - m[0].x) * (m[2].y - m[0].y) - (m[1].y - m[0].y) * (m[2].x - m[0].x);
        assert!(cross.abs() < 1e-6, "cross = {cross}");
        // And the quad maps without degenerating.
        transform_quad(&h, &q).unwrap();
    }

    #[test]
    fn homography_group_property() {
        let h1 = Homography::rotation(0.1).about(Point::new(50.0, 40.0));
        let h2 =
            Homography::new([[1.02, 0.01, 3.0], [-0.02, 0.98, -1.0], [5e-5, 1e-5, 1.0]]).unwrap();
        let q = rect_quad(10.0, 20.0, 60.0, 40.0);
        let a = transform_quad(&h2, &transform_quad(&h1, &q).unwrap()).unwrap();
        let b = transform_quad(&h2.compose(&h1), &q).unwrap();
        for (p, q) in a.corners().iter().zip(b.corners()) {
            assert!((p.x - q.x).abs() < 1e-6 && (p.y - q.y).abs() < 1e-6);
        }
    }

    #[test]
    fn visible_fraction_of_lost_roi_is_nan() {
        assert!(roi_visible_fraction(&Roi::lost(1), 480, 360).is_nan());
    }

    #[test]
    fn visible_fraction_cases() {
        let r = Roi::new(1, 10.0, 10.0, 20.0, 20.0).unwrap();
        assert_eq!(roi_visible_fraction(&r, 480, 360), 1.0);

        let half = Roi::new(1, -10.0, 0.0, 20.0, 20.0).unwrap();
        assert_eq!(roi_visible_fraction(&half, 480, 360), 0.5);

        let out = Roi::new(1, -30.0, -30.0, 20.0, 20.0).unwrap();
        assert_eq!(roi_visible_fraction(&out, 480, 360), 0.0);
    }
}
