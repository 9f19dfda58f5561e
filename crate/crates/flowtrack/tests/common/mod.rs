//! Shared helpers for the integration suites: deterministic texture
//! generators, frame constructions with known motion, and independent
//! oracles for the rasterized Jaccard index and the affine fit.

#![allow(dead_code)]

use flowtrack::{Frame, Point, Quad, Roi};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform white noise, single channel.
pub fn noise_frame(w: usize, h: usize, seed: u64) -> Frame {
    let mut r = rng(seed);
    let data = (0..w * h).map(|_| r.random::<u8>()).collect();
    Frame::new(w, h, 1, data, 0).unwrap()
}

/// White noise softened by a couple of 3x3 box passes; texture with enough
/// gradient structure for subpixel matching.
pub fn smooth_noise_frame(w: usize, h: usize, seed: u64) -> Frame {
    let mut f = noise_frame(w, h, seed);
    for _ in 0..2 {
        f = box_blur(&f);
    }
    f
}

fn box_blur(f: &Frame) -> Frame {
    let (w, h) = (f.width, f.height);
    let mut out = f.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0u32;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    acc += f.sample(sx, sy, 0) as u32;
                }
            }
            *out.sample_mut(x, y, 0) = (acc / 9) as u8;
        }
    }
    out
}

/// Multi-octave value noise in [0, 1]: random grids at decreasing spacing,
/// bilinearly interpolated and summed.
fn value_noise(w: usize, h: usize, seed: u64, octaves: &[(usize, f64)]) -> Vec<f64> {
    let mut out = vec![0.0f64; w * h];
    for (k, &(spacing, amplitude)) in octaves.iter().enumerate() {
        let gw = w / spacing + 2;
        let gh = h / spacing + 2;
        let mut r = rng(seed.wrapping_add(k as u64 * 7919));
        let grid: Vec<f64> = (0..gw * gh).map(|_| r.random::<f64>()).collect();
        for y in 0..h {
            let gy = y as f64 / spacing as f64;
            let j0 = gy.floor() as usize;
            let ay = gy - j0 as f64;
            for x in 0..w {
                let gx = x as f64 / spacing as f64;
                let i0 = gx.floor() as usize;
                let ax = gx - i0 as f64;
                let v00 = grid[j0 * gw + i0];
                let v10 = grid[j0 * gw + i0 + 1];
                let v01 = grid[(j0 + 1) * gw + i0];
                let v11 = grid[(j0 + 1) * gw + i0 + 1];
                let top = v00 * (1.0 - ax) + v10 * ax;
                let bot = v01 * (1.0 - ax) + v11 * ax;
                out[y * w + x] += amplitude * (top * (1.0 - ay) + bot * ay);
            }
        }
    }
    out
}

/// Deterministic textured source images standing in for real still frames:
/// octave noise with different scale mixes, palettes, and channel counts.
pub fn textured_source(kind: usize, w: usize, h: usize) -> Frame {
    let seed = 1000 + kind as u64;
    match kind % 4 {
        0 => {
            // Fine-grained tissue-like mottle, grayscale.
            let v = value_noise(w, h, seed, &[(32, 0.35), (16, 0.3), (8, 0.2), (4, 0.15)]);
            let data = v.iter().map(|&x| (40.0 + 180.0 * x) as u8).collect();
            Frame::new(w, h, 1, data, 0).unwrap()
        }
        1 => {
            // Reddish organic texture, RGB with per-channel variation.
            let base = value_noise(w, h, seed, &[(48, 0.4), (12, 0.35), (6, 0.25)]);
            let detail = value_noise(w, h, seed + 17, &[(8, 0.6), (4, 0.4)]);
            let mut data = Vec::with_capacity(w * h * 3);
            for (b, d) in base.iter().zip(&detail) {
                data.push((90.0 + 140.0 * b) as u8);
                data.push((40.0 + 110.0 * b + 40.0 * d) as u8);
                data.push((30.0 + 70.0 * d) as u8);
            }
            Frame::new(w, h, 3, data, 0).unwrap()
        }
        2 => {
            // Coarse blobs over fine grain, grayscale.
            let coarse = value_noise(w, h, seed, &[(64, 0.6), (24, 0.4)]);
            let fine = value_noise(w, h, seed + 5, &[(6, 0.7), (3, 0.3)]);
            let data = coarse
                .iter()
                .zip(&fine)
                .map(|(c, f)| (30.0 + 140.0 * c + 60.0 * f) as u8)
                .collect();
            Frame::new(w, h, 1, data, 0).unwrap()
        }
        _ => {
            // Banded texture warped by low-frequency noise, RGB.
            let warp = value_noise(w, h, seed, &[(40, 1.0)]);
            let grain = value_noise(w, h, seed + 3, &[(5, 1.0)]);
            let mut data = Vec::with_capacity(w * h * 3);
            for y in 0..h {
                for x in 0..w {
                    let k = y * w + x;
                    let band = ((x as f64 / 9.0 + 14.0 * warp[k]).sin() * 0.5 + 0.5) * 0.6
                        + 0.4 * grain[k];
                    data.push((50.0 + 170.0 * band) as u8);
                    data.push((35.0 + 120.0 * band) as u8);
                    data.push((60.0 + 90.0 * grain[k]) as u8);
                }
            }
            Frame::new(w, h, 3, data, 0).unwrap()
        }
    }
}

/// `next(x, y) = prev((x - dx) mod w, (y - dy) mod h)`: content moves by
/// exactly `(+dx, +dy)`.
pub fn cyclic_shift(f: &Frame, dx: i64, dy: i64) -> Frame {
    let (w, h, c) = (f.width as i64, f.height as i64, f.channels);
    let mut data = vec![0u8; f.data.len()];
    for y in 0..h {
        for x in 0..w {
            let sx = (x - dx).rem_euclid(w) as usize;
            let sy = (y - dy).rem_euclid(h) as usize;
            for ch in 0..c {
                data[((y * w + x) as usize) * c + ch] = f.data[(sy * f.width + sx) * c + ch];
            }
        }
    }
    Frame::new(f.width, f.height, c, data, f.index + 1).unwrap()
}

/// Independent rasterized-Jaccard oracle: a plain double loop over the joint
/// bounding box with its own membership tests (half-open rectangle, even-odd
/// polygon with edges walked in the opposite direction from the library).
pub fn jaccard_brute(truth: &Quad, estimate: &Roi) -> f64 {
    let corners = truth.corners();
    let rect = (estimate.x, estimate.y, estimate.w, estimate.h);

    let mut lo_x = rect.0;
    let mut hi_x = rect.0 + rect.2;
    let mut lo_y = rect.1;
    let mut hi_y = rect.1 + rect.3;
    for p in corners {
        lo_x = lo_x.min(p.x);
        hi_x = hi_x.max(p.x);
        lo_y = lo_y.min(p.y);
        hi_y = hi_y.max(p.y);
    }

    let in_rect = |cx: f64, cy: f64| {
        cx >= rect.0 && cx < rect.0 + rect.2 && cy >= rect.1 && cy < rect.1 + rect.3
    };
    let in_quad = |cx: f64, cy: f64| {
        let mut crossings = 0usize;
        for i in 0..4 {
            // Walk edges in reverse order relative to the library code.
            let a: Point = corners[(4 - i) % 4];
            let b: Point = corners[3 - i];
            if (a.y > cy) != (b.y > cy) {
                let t = (cy - a.y) / (b.y - a.y);
                if cx < a.x + t * (b.x - a.x) {
                    crossings += 1;
                }
            }
        }
        crossings % 2 == 1
    };

    let mut inter = 0u64;
    let mut union = 0u64;
    let i0 = (lo_x - 1.0).floor() as i64;
    let i1 = (hi_x + 1.0).ceil() as i64;
    let j0 = (lo_y - 1.0).floor() as i64;
    let j1 = (hi_y + 1.0).ceil() as i64;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let (cx, cy) = (i as f64 + 0.5, j as f64 + 0.5);
            let t = in_quad(cx, cy);
            let e = in_rect(cx, cy);
            if t && e {
                inter += 1;
            }
            if t || e {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Independent affine-fit oracle: assemble and solve the 2x2 normal
/// equations of `v = tau + sigma * c` by Cramer's rule, per axis. The
/// coordinates are shifted to the window origin before forming the system
/// (the raw products would otherwise lose ~1e-8 to cancellation for narrow
/// windows far from the origin); the intercept is shifted back exactly.
pub fn affine_fit_normal_equations(
    u: &[f64],
    v: &[f64],
    coords: &[(i64, i64)],
) -> (f64, f64, f64, f64) {
    let solve = |vals: &[f64], raw: Vec<f64>| -> (f64, f64) {
        let origin = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let cs: Vec<f64> = raw.iter().map(|c| c - origin).collect();
        let n = vals.len() as f64;
        let sc: f64 = cs.iter().sum();
        let scc: f64 = cs.iter().map(|c| c * c).sum();
        let sv: f64 = vals.iter().sum();
        let scv: f64 = cs.iter().zip(vals).map(|(c, v)| c * v).sum();
        let det = n * scc - sc * sc;
        let tau = (sv * scc - sc * scv) / det;
        let sigma = (n * scv - sc * sv) / det;
        (tau - sigma * origin, sigma)
    };
    let (tau_x, sigma_x) = solve(u, coords.iter().map(|c| c.0 as f64).collect());
    let (tau_y, sigma_y) = solve(v, coords.iter().map(|c| c.1 as f64).collect());
    (tau_x, sigma_x, tau_y, sigma_y)
}

/// Random simple quad: a rectangle with corners jittered inward/outward.
pub fn random_quad(r: &mut ChaCha8Rng) -> Quad {
    loop {
        let x: f64 = r.random_range(-20.0..120.0);
        let y: f64 = r.random_range(-20.0..120.0);
        let w: f64 = r.random_range(3.0..80.0);
        let h: f64 = r.random_range(3.0..80.0);
        let jitter = 0.25 * w.min(h);
        let mut corners = [
            Point::new(x, y),
            Point::new(x + w, y),
            Point::new(x + w, y + h),
            Point::new(x, y + h),
        ];
        for p in &mut corners {
            p.x += r.random_range(-jitter..jitter);
            p.y += r.random_range(-jitter..jitter);
        }
        if let Ok(q) = Quad::new(corners) {
            return q;
        }
    }
}

pub fn random_roi(r: &mut ChaCha8Rng, id: u32) -> Roi {
    Roi::new(
        id,
        r.random_range(-20.0..120.0),
        r.random_range(-20.0..120.0),
        r.random_range(0.5..80.0),
        r.random_range(0.5..80.0),
    )
    .unwrap()
}
