//! Patch-based coarse-to-fine flow estimator.
//!
//! Per pyramid level, a grid of square patches (stride < size, so patches
//! overlap) is matched from the earlier frame into the later one by
//! inverse-compositional refinement of a per-patch translation. Patch
//! displacements are regularized by a weighted-median filter over the grid
//! and densified to a per-pixel field by weighted overlap averaging at the
//! finest level.

use super::pyramid::GrayF32;
use super::{FlowConfig, FlowField};

/// Convergence threshold on the per-iteration update, in pixels.
const STEP_EPS: f32 = 0.01;

/// Per-level displacement grid (one entry per patch).
pub(crate) struct PatchGrid {
    xs: Vec<usize>,
    ys: Vec<usize>,
    du: Vec<f32>,
    dv: Vec<f32>,
    wgt: Vec<f32>,
    patch: usize,
}

fn grid_positions(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = extent - patch;
    let mut xs: Vec<usize> = (0..)
        .map(|k| k * stride)
        .take_while(|&x| x <= last)
        .collect();
    if *xs.last().unwrap() != last {
        xs.push(last);
    }
    xs
}

impl PatchGrid {
    fn center(&self, gx: usize, gy: usize) -> (f32, f32) {
        let half = self.patch as f32 / 2.0;
        (self.xs[gx] as f32 + half, self.ys[gy] as f32 + half)
    }

    /// Bilinear sample of the grid displacement at pixel coordinates,
    /// clamped to the grid extent.
    fn sample(&self, x: f32, y: f32) -> (f32, f32) {
        let half = self.patch as f32 / 2.0;
        let gx = locate(&self.xs, x - half);
        let gy = locate(&self.ys, y - half);
        let (i0, i1, ax) = gx;
        let (j0, j1, ay) = gy;
        let nx = self.xs.len();
        let idx = |i: usize, j: usize| j * nx + i;
        let lerp2 = |f: &[f32]| -> f32 {
            let top = f[idx(i0, j0)] * (1.0 - ax) + f[idx(i1, j0)] * ax;
            let bot = f[idx(i0, j1)] * (1.0 - ax) + f[idx(i1, j1)] * ax;
            top * (1.0 - ay) + bot * ay
        };
        (lerp2(&self.du), lerp2(&self.dv))
    }
}

/// Neighboring grid positions bracketing `x` (given in patch-origin units),
/// with the interpolation fraction.
fn locate(pos: &[usize], x: f32) -> (usize, usize, f32) {
    if x <= pos[0] as f32 {
        return (0, 0, 0.0);
    }
    let last = pos.len() - 1;
    if x >= pos[last] as f32 {
        return (last, last, 0.0);
    }
    let i1 = pos.partition_point(|&p| (p as f32) <= x);
    let i0 = i1 - 1;
    let span = (pos[i1] - pos[i0]) as f32;
    (i0, i1, (x - pos[i0] as f32) / span)
}

/// Runs the full coarse-to-fine estimate over grayscale pyramids
/// (index 0 = finest). `init` warm-starts the coarsest level.
pub(crate) fn estimate(
    prev_pyr: &[GrayF32],
    next_pyr: &[GrayF32],
    cfg: &FlowConfig,
    init: Option<&FlowField>,
) -> FlowField {
    let levels = prev_pyr.len();
    let mut coarser: Option<PatchGrid> = None;
    for lvl in (0..levels).rev() {
        let prev = &prev_pyr[lvl];
        let next = &next_pyr[lvl];
        let mut grid = match_level(
            prev,
            next,
            cfg,
            coarser.as_ref(),
            if lvl + 1 == levels {
                init.map(|f| (f, 1usize << lvl))
            } else {
                None
            },
        );
        let radius = (2.0 * cfg.smoothness_weight).round() as i64;
        if radius > 0 {
            regularize_grid(&mut grid, radius.min(6) as usize);
        }
        coarser = Some(grid);
    }
    densify(&coarser.unwrap(), prev_pyr[0].w, prev_pyr[0].h)
}

fn match_level(
    prev: &GrayF32,
    next: &GrayF32,
    cfg: &FlowConfig,
    coarser: Option<&PatchGrid>,
    init: Option<(&FlowField, usize)>,
) -> PatchGrid {
    let patch = cfg.patch_size.min(prev.w).min(prev.h);
    let xs = grid_positions(prev.w, patch, cfg.patch_stride);
    let ys = grid_positions(prev.h, patch, cfg.patch_stride);
    let (nx, ny) = (xs.len(), ys.len());
    let mut grid = PatchGrid {
        xs,
        ys,
        du: vec![0.0; nx * ny],
        dv: vec![0.0; nx * ny],
        wgt: vec![0.0; nx * ny],
        patch,
    };

    let (gx_img, gy_img) = gradients(prev);
    let area = patch * patch;
    let mut tmpl = vec![0.0f32; area];
    let mut tgx = vec![0.0f32; area];
    let mut tgy = vec![0.0f32; area];

    for gy in 0..ny {
        for gx in 0..nx {
            let (px, py) = (grid.xs[gx], grid.ys[gy]);
            for j in 0..patch {
                let row = (py + j) * prev.w + px;
                let dst = j * patch;
                tmpl[dst..dst + patch].copy_from_slice(&prev.data[row..row + patch]);
                tgx[dst..dst + patch].copy_from_slice(&gx_img[row..row + patch]);
                tgy[dst..dst + patch].copy_from_slice(&gy_img[row..row + patch]);
            }
            let (mut h11, mut h12, mut h22) = (0.0f32, 0.0f32, 0.0f32);
            for k in 0..area {
                h11 += tgx[k] * tgx[k];
                h12 += tgx[k] * tgy[k];
                h22 += tgy[k] * tgy[k];
            }
            let det = h11 * h22 - h12 * h12;

            let (cx, cy) = grid.center(gx, gy);
            let d0 = match (coarser, init) {
                (Some(c), _) => {
                    let (u, v) = c.sample(cx * 0.5, cy * 0.5);
                    (u * 2.0, v * 2.0)
                }
                (None, Some((f, scale))) => {
                    let s = scale as f32;
                    let (u, v) = f.bilinear(cx * s, cy * s);
                    (u / s, v / s)
                }
                (None, None) => (0.0, 0.0),
            };

            let mut d = d0;
            let (mut b1, mut b2, sse0) =
                patch_pass(next, &tmpl, &tgx, &tgy, px, py, patch, d.0, d.1);
            let mut best = (d, sse0);
            let mut best_sse = sse0;
            if det > 1e-12 {
                for _ in 0..cfg.iterations_per_level {
                    let s1 = (h22 * b1 - h12 * b2) / det;
                    let s2 = (h11 * b2 - h12 * b1) / det;
                    let lim = patch as f32;
                    let s1 = s1.clamp(-lim, lim);
                    let s2 = s2.clamp(-lim, lim);
                    d.0 = (d.0 - s1).clamp(-(next.w as f32), next.w as f32);
                    d.1 = (d.1 - s2).clamp(-(next.h as f32), next.h as f32);
                    let (nb1, nb2, sse) =
                        patch_pass(next, &tmpl, &tgx, &tgy, px, py, patch, d.0, d.1);
                    b1 = nb1;
                    b2 = nb2;
                    if sse < best_sse {
                        best = (d, sse);
                        best_sse = sse;
                    }
                    if s1 * s1 + s2 * s2 < STEP_EPS * STEP_EPS {
                        break;
                    }
                }
            }
            let mse = best.1 / area as f32;
            let g = gy * nx + gx;
            grid.du[g] = best.0 .0;
            grid.dv[g] = best.0 .1;
            grid.wgt[g] = 1.0 / (1.0 + mse);
        }
    }
    grid
}

/// Central-difference gradients with clamped borders.
fn gradients(img: &GrayF32) -> (Vec<f32>, Vec<f32>) {
    let (w, h) = (img.w, img.h);
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let xl = x.saturating_sub(1);
            let xr = (x + 1).min(w - 1);
            gx[row + x] = 0.5 * (img.at(xr, y) - img.at(xl, y));
        }
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        for x in 0..w {
            gy[row + x] = 0.5 * (img.at(x, yd) - img.at(x, yu));
        }
    }
    (gx, gy)
}

/// One residual sweep of a patch against `next` displaced by `(dx, dy)`:
/// returns the gradient-weighted residual sums and the SSE. Samples are
/// bilinear with coordinates clamped to the frame.
#[allow(clippy::too_many_arguments)]
fn patch_pass(
    next: &GrayF32,
    tmpl: &[f32],
    tgx: &[f32],
    tgy: &[f32],
    px: usize,
    py: usize,
    patch: usize,
    dx: f32,
    dy: f32,
) -> (f32, f32, f32) {
    let (w, h) = (next.w as isize, next.h as isize);
    let fx = px as f32 + dx;
    let fy = py as f32 + dy;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let ax = fx - x0;
    let ay = fy - y0;
    let (ix, iy) = (x0 as isize, y0 as isize);
    let w00 = (1.0 - ax) * (1.0 - ay);
    let w10 = ax * (1.0 - ay);
    let w01 = (1.0 - ax) * ay;
    let w11 = ax * ay;

    let mut b1 = 0.0f32;
    let mut b2 = 0.0f32;
    let mut sse = 0.0f32;
    let interior = ix >= 0 && iy >= 0 && (ix + patch as isize) < w && (iy + patch as isize) < h;
    if interior {
        for j in 0..patch {
            let base = (iy as usize + j) * next.w + ix as usize;
            let row0 = &next.data[base..base + patch + 1];
            let row1 = &next.data[base + next.w..base + next.w + patch + 1];
            let t = j * patch;
            for i in 0..patch {
                let s = w00 * row0[i] + w10 * row0[i + 1] + w01 * row1[i] + w11 * row1[i + 1];
                let r = s - tmpl[t + i];
                b1 += tgx[t + i] * r;
                b2 += tgy[t + i] * r;
                sse += r * r;
            }
        }
    } else {
        let cl = |v: isize, hi: isize| v.clamp(0, hi - 1) as usize;
        for j in 0..patch {
            let y0c = cl(iy + j as isize, h);
            let y1c = cl(iy + j as isize + 1, h);
            let t = j * patch;
            for i in 0..patch {
                let x0c = cl(ix + i as isize, w);
                let x1c = cl(ix + i as isize + 1, w);
                let s = w00 * next.at(x0c, y0c)
                    + w10 * next.at(x1c, y0c)
                    + w01 * next.at(x0c, y1c)
                    + w11 * next.at(x1c, y1c);
                let r = s - tmpl[t + i];
                b1 += tgx[t + i] * r;
                b2 += tgy[t + i] * r;
                sse += r * r;
            }
        }
    }
    (b1, b2, sse)
}

/// Weighted-median filter over the displacement grid. Each component is
/// replaced by the weighted median of its `(2r+1)^2` grid neighborhood,
/// weighted by patch reliability.
fn regularize_grid(grid: &mut PatchGrid, radius: usize) {
    let nx = grid.xs.len();
    let ny = grid.ys.len();
    let r = radius as i64;
    let mut out_u = grid.du.clone();
    let mut out_v = grid.dv.clone();
    let mut scratch: Vec<(f32, f32)> = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
    for gy in 0..ny as i64 {
        for gx in 0..nx as i64 {
            for (src, dst) in [(&grid.du, &mut out_u), (&grid.dv, &mut out_v)] {
                scratch.clear();
                let mut total = 0.0f32;
                for j in (gy - r).max(0)..=(gy + r).min(ny as i64 - 1) {
                    for i in (gx - r).max(0)..=(gx + r).min(nx as i64 - 1) {
                        let k = (j * nx as i64 + i) as usize;
                        scratch.push((src[k], grid.wgt[k]));
                        total += grid.wgt[k];
                    }
                }
                scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                let half = total * 0.5;
                let mut acc = 0.0f32;
                let mut val = scratch[scratch.len() - 1].0;
                for &(v, w) in &scratch {
                    acc += w;
                    if acc >= half {
                        val = v;
                        break;
                    }
                }
                dst[(gy * nx as i64 + gx) as usize] = val;
            }
        }
    }
    grid.du = out_u;
    grid.dv = out_v;
}

/// Per-pixel densification: every pixel averages the displacements of all
/// patches covering it, weighted by patch reliability. The grid covers the
/// whole frame, so every pixel receives positive weight.
fn densify(grid: &PatchGrid, w: usize, h: usize) -> FlowField {
    let mut wu = vec![0.0f32; w * h];
    let mut wv = vec![0.0f32; w * h];
    let mut ws = vec![0.0f32; w * h];
    let nx = grid.xs.len();
    for (g, (&du, &dv)) in grid.du.iter().zip(&grid.dv).enumerate() {
        let weight = grid.wgt[g];
        let px = grid.xs[g % nx];
        let py = grid.ys[g / nx];
        for j in 0..grid.patch {
            let row = (py + j) * w + px;
            for k in row..row + grid.patch {
                wu[k] += weight * du;
                wv[k] += weight * dv;
                ws[k] += weight;
            }
        }
    }
    let u = wu.iter().zip(&ws).map(|(a, s)| a / s).collect();
    let v = wv.iter().zip(&ws).map(|(a, s)| a / s).collect();
    FlowField {
        width: w,
        height: h,
        u,
        v,
    }
}
