//! Dense pyramidal Lucas-Kanade optical flow.
//!
//! Coarse-to-fine estimation with a per-pixel least-squares solve over a
//! square window. Pixels whose structure tensor is ill-conditioned (minimum
//! eigenvalue below `eig_threshold`) carry zero flow, which also covers the
//! aperture-degenerate case of uniform images.

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Per-pixel displacement field in pixels/frame.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub width: usize,
    pub height: usize,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
            width,
            height,
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        let (u, v) = self.at(x, y);
        (u * u + v * v).sqrt()
    }
}

/// Lucas-Kanade tuning knobs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FlowParams {
    /// Side of the square least-squares window; must be odd.
    pub window: usize,
    pub pyramid_levels: usize,
    /// Warp-and-refine iterations per pyramid level.
    pub iterations: usize,
    /// Minimum eigenvalue (per window pixel) below which flow is zeroed.
    pub eig_threshold: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            window: 5,
            pyramid_levels: 3,
            iterations: 3,
            eig_threshold: 1e-4,
        }
    }
}

/// Flow from `prev` to `next`. RGB frames are converted to grayscale
/// internally.
pub fn compute_flow(prev: &Frame, next: &Frame, params: &FlowParams) -> Result<FlowField> {
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::Shape(format!(
            "flow inputs {}x{} vs {}x{}",
            prev.width, prev.height, next.width, next.height
        )));
    }
    compute_flow_gray(
        &prev.to_gray(),
        &next.to_gray(),
        prev.width,
        prev.height,
        params,
    )
}

/// Flow between two grayscale planes in [0, 1].
pub fn compute_flow_gray(
    prev: &[f64],
    next: &[f64],
    width: usize,
    height: usize,
    params: &FlowParams,
) -> Result<FlowField> {
    if prev.len() != width * height || next.len() != width * height {
        return Err(Error::Shape("plane length does not match dimensions".into()));
    }
    assert!(params.window % 2 == 1, "LK window must be odd");
    assert!(params.window >= 3, "LK window must be at least 3");

    let pyr_prev = build_pyramid(prev, width, height, params.pyramid_levels, params.window);
    let pyr_next = build_pyramid(next, width, height, params.pyramid_levels, params.window);
    let levels = pyr_prev.len();

    let mut flow = {
        let (_, w, h) = &pyr_prev[levels - 1];
        FlowField::zeros(*w, *h)
    };

    for level in (0..levels).rev() {
        let (prev_img, w, h) = &pyr_prev[level];
        let (next_img, _, _) = &pyr_next[level];
        if flow.width != *w || flow.height != *h {
            flow = upsample_flow(&flow, *w, *h);
        }
        refine_level(prev_img, next_img, *w, *h, params, &mut flow, level == 0);
    }
    Ok(flow)
}

/// Image pyramid: level 0 is full resolution, each further level is blurred
/// and halved. Levels too small for the window are not built.
fn build_pyramid(
    img: &[f64],
    width: usize,
    height: usize,
    max_levels: usize,
    window: usize,
) -> Vec<(Vec<f64>, usize, usize)> {
    let mut levels = vec![(img.to_vec(), width, height)];
    while levels.len() < max_levels.max(1) {
        let (cur, w, h) = levels.last().unwrap();
        let nw = (w + 1) / 2;
        let nh = (h + 1) / 2;
        if nw < 2 * window || nh < 2 * window {
            break;
        }
        let blurred = binomial_blur(cur, *w, *h);
        let mut down = Vec::with_capacity(nw * nh);
        for y in 0..nh {
            for x in 0..nw {
                let sx = (x * 2).min(w - 1);
                let sy = (y * 2).min(h - 1);
                down.push(blurred[sy * w + sx]);
            }
        }
        levels.push((down, nw, nh));
    }
    levels
}

/// Separable 3x3 binomial smoothing with replicated borders.
fn binomial_blur(img: &[f64], w: usize, h: usize) -> Vec<f64> {
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let xm = clamp(x as isize - 1, w);
            let xp = clamp(x as isize + 1, w);
            tmp[y * w + x] = 0.25 * img[y * w + xm] + 0.5 * img[y * w + x] + 0.25 * img[y * w + xp];
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let ym = clamp(y as isize - 1, h);
        let yp = clamp(y as isize + 1, h);
        for x in 0..w {
            out[y * w + x] =
                0.25 * tmp[ym * w + x] + 0.5 * tmp[y * w + x] + 0.25 * tmp[yp * w + x];
        }
    }
    out
}

fn upsample_flow(flow: &FlowField, nw: usize, nh: usize) -> FlowField {
    let mut out = FlowField::zeros(nw, nh);
    for y in 0..nh {
        for x in 0..nw {
            let sx = x as f64 * (flow.width.max(2) - 1) as f64 / (nw.max(2) - 1) as f64;
            let sy = y as f64 * (flow.height.max(2) - 1) as f64 / (nh.max(2) - 1) as f64;
            let i = y * nw + x;
            out.u[i] = 2.0 * bilinear(&flow.u, flow.width, flow.height, sx, sy);
            out.v[i] = 2.0 * bilinear(&flow.v, flow.width, flow.height, sx, sy);
        }
    }
    out
}

#[inline]
fn bilinear(img: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = img[y0 * w + x0] * (1.0 - fx) + img[y0 * w + x1] * fx;
    let bot = img[y1 * w + x0] * (1.0 - fx) + img[y1 * w + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

fn refine_level(
    prev: &[f64],
    next: &[f64],
    w: usize,
    h: usize,
    params: &FlowParams,
    flow: &mut FlowField,
    finest: bool,
) {
    let r = (params.window / 2) as isize;
    let win_area = (params.window * params.window) as f64;
    let clampx = |v: isize| v.clamp(0, w as isize - 1) as usize;
    let clampy = |v: isize| v.clamp(0, h as isize - 1) as usize;

    // Spatial gradients of the source frame (central differences).
    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            ix[i] = 0.5 * (prev[y * w + clampx(x as isize + 1)] - prev[y * w + clampx(x as isize - 1)]);
            iy[i] = 0.5 * (prev[clampy(y as isize + 1) * w + x] - prev[clampy(y as isize - 1) * w + x]);
        }
    }

    // Structure tensor sums per pixel; constant across iterations.
    let mut sxx = vec![0.0; w * h];
    let mut sxy = vec![0.0; w * h];
    let mut syy = vec![0.0; w * h];
    let mut min_eig = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for wy in -r..=r {
                for wx in -r..=r {
                    let px = clampx(x as isize + wx);
                    let py = clampy(y as isize + wy);
                    let gx = ix[py * w + px];
                    let gy = iy[py * w + px];
                    a += gx * gx;
                    b += gx * gy;
                    c += gy * gy;
                }
            }
            let i = y * w + x;
            sxx[i] = a;
            sxy[i] = b;
            syy[i] = c;
            let half_tr = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            min_eig[i] = (half_tr - disc) / win_area;
        }
    }

    let max_step = params.window as f64;
    for _ in 0..params.iterations {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if min_eig[i] < params.eig_threshold {
                    continue;
                }
                let (mut bx, mut by) = (0.0, 0.0);
                let (cu, cv) = (flow.u[i], flow.v[i]);
                for wy in -r..=r {
                    for wx in -r..=r {
                        let px = clampx(x as isize + wx);
                        let py = clampy(y as isize + wy);
                        let warped =
                            bilinear(next, w, h, px as f64 + cu, py as f64 + cv);
                        let it = warped - prev[py * w + px];
                        bx += ix[py * w + px] * it;
                        by += iy[py * w + px] * it;
                    }
                }
                let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
                if det.abs() < 1e-12 {
                    continue;
                }
                let du = ((-syy[i] * bx + sxy[i] * by) / det).clamp(-max_step, max_step);
                let dv = ((sxy[i] * bx - sxx[i] * by) / det).clamp(-max_step, max_step);
                flow.u[i] += du;
                flow.v[i] += dv;
            }
        }
    }

    if finest {
        for i in 0..w * h {
            if min_eig[i] < params.eig_threshold
                || !flow.u[i].is_finite()
                || !flow.v[i].is_finite()
            {
                flow.u[i] = 0.0;
                flow.v[i] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Smoothly textured test plane: band-limited noise that LK can latch on.
    fn textured_plane(w: usize, h: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut img: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
        for _ in 0..3 {
            img = binomial_blur(&img, w, h);
        }
        img
    }

    /// Same texture sampled at a sub-pixel offset (true translation oracle).
    fn translated(img: &[f64], w: usize, h: usize, dx: f64, dy: f64) -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                out[y * w + x] = bilinear(img, w, h, x as f64 - dx, y as f64 - dy);
            }
        }
        out
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let img = textured_plane(32, 32, 1);
        let f = compute_flow_gray(&img, &img, 32, 32, &FlowParams::default()).unwrap();
        assert!(f.u.iter().chain(f.v.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_images_give_zero_flow() {
        let a = vec![0.5; 32 * 32];
        let b = vec![0.5; 32 * 32];
        let f = compute_flow_gray(&a, &b, 32, 32, &FlowParams::default()).unwrap();
        assert!(f.u.iter().chain(f.v.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_unit_translation() {
        let w = 64;
        let h = 64;
        let prev = textured_plane(w, h, 7);
        let next = translated(&prev, w, h, 1.0, 0.0);
        let params = FlowParams::default();
        let f = compute_flow_gray(&prev, &next, w, h, &params).unwrap();
        // Mean flow over interior pixels with reliable structure.
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0);
        for y in 8..h - 8 {
            for x in 8..w - 8 {
                let (u, v) = f.at(x, y);
                if u != 0.0 || v != 0.0 {
                    su += u;
                    sv += v;
                    n += 1;
                }
            }
        }
        assert!(n > 500, "too few textured pixels: {n}");
        let mu = su / n as f64;
        let mv = sv / n as f64;
        assert!((mu - 1.0).abs() < 0.25, "mean u = {mu}");
        assert!(mv.abs() < 0.25, "mean v = {mv}");
    }

    #[test]
    fn forward_backward_consistency() {
        let w = 64;
        let h = 64;
        let prev = textured_plane(w, h, 11);
        let next = translated(&prev, w, h, 1.2, -0.7);
        let params = FlowParams::default();
        let fwd = compute_flow_gray(&prev, &next, w, h, &params).unwrap();
        let bwd = compute_flow_gray(&next, &prev, w, h, &params).unwrap();
        let (mut sum, mut n) = (0.0, 0);
        for y in 8..h - 8 {
            for x in 8..w - 8 {
                let (fu, fv) = fwd.at(x, y);
                let (bu, bv) = bwd.at(x, y);
                sum += ((fu + bu).powi(2) + (fv + bv).powi(2)).sqrt();
                n += 1;
            }
        }
        let mean_err = sum / n as f64;
        assert!(mean_err < 0.5, "mean fb error {mean_err}");
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let a = vec![0.0; 16];
        let b = vec![0.0; 20];
        assert!(compute_flow_gray(&a, &b, 4, 4, &FlowParams::default()).is_err());
    }

    #[test]
    fn all_outputs_finite() {
        let w = 40;
        let h = 40;
        let prev = textured_plane(w, h, 3);
        let next = textured_plane(w, h, 4); // unrelated frames, worst case
        let f = compute_flow_gray(&prev, &next, w, h, &FlowParams::default()).unwrap();
        assert!(f.u.iter().chain(f.v.iter()).all(|v| v.is_finite()));
    }
}
