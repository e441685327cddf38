//! Synthetic desk-scale datasets: textured squares moving over static
//! backgrounds, written as PNG frame directories in the standard
//! `<root>/<class>/<video>/frame_*.png` layout.
//!
//! Motion grammars are built from fold-distinct sub-events (horizontal,
//! vertical, and the two diagonals), so orientation histograms can tell them
//! apart but left/right or up/down reversals cannot leak extra signal. Walls
//! reflect the square, which preserves the folded orientation.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::frame::write_gray_png;
use crate::rng::RandomSeed;

/// What the two classes differ by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    /// Clean class-distinct motion (axis-aligned vs diagonal sub-events),
    /// shared background style.
    Motion,
    /// Both cues informative but imperfect: motion direction sets flipped for
    /// a fraction of videos, background palettes flipped for another.
    Mixed,
    /// Classes share the same sub-event multiset and differ only in order.
    Order,
    /// One constant sub-event per class; order carries no information.
    Constant,
}

impl std::str::FromStr for SynthMode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "motion" => Ok(Self::Motion),
            "mixed" => Ok(Self::Mixed),
            "order" => Ok(Self::Order),
            "constant" => Ok(Self::Constant),
            other => Err(crate::error::Error::Config(format!(
                "synth mode must be motion|mixed|order|constant, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub mode: SynthMode,
    pub classes: usize,
    pub videos_per_class: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            mode: SynthMode::Motion,
            classes: 2,
            videos_per_class: 40,
            width: 64,
            height: 64,
            frames: 60,
            seed: 0,
        }
    }
}

/// Fraction of mixed-mode videos whose motion grammar is swapped.
const MOTION_FLIP: f64 = 0.2;
/// Fraction of mixed-mode videos whose background palette is swapped.
const STATIC_FLIP: f64 = 0.3;

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Horizontal,
    Vertical,
    DiagPlus,
    DiagMinus,
}

impl EventKind {
    fn velocity(self, speed: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let s: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let d = speed / 2f64.sqrt();
        match self {
            EventKind::Horizontal => (s * speed, 0.0),
            EventKind::Vertical => (0.0, s * speed),
            EventKind::DiagPlus => (s * d, s * d),
            EventKind::DiagMinus => (s * d, -s * d),
        }
    }
}

/// Writes the dataset under `root`; classes are `class_a`, `class_b`, ...,
/// each holding `video_NNN` directories of PNG frames.
pub fn generate_dataset(root: &Path, cfg: &SynthConfig) -> Result<()> {
    assert!(cfg.classes >= 2 && cfg.classes <= 4, "2..=4 classes supported");
    let seed = RandomSeed(cfg.seed);
    for class in 0..cfg.classes {
        let class_name = class_name(class);
        let class_dir = root.join(&class_name);
        std::fs::create_dir_all(&class_dir)?;
        for v in 0..cfg.videos_per_class {
            let video_dir = class_dir.join(format!("video_{v:03}"));
            std::fs::create_dir_all(&video_dir)?;
            let mut rng = seed.stream(&format!("synth.{class_name}.video_{v:03}"));
            let frames = render_video(cfg, class, &mut rng);
            for (k, frame) in frames.iter().enumerate() {
                write_gray_png(
                    &video_dir.join(format!("frame_{k:05}.png")),
                    cfg.width,
                    cfg.height,
                    frame,
                )?;
            }
        }
    }
    Ok(())
}

pub fn class_name(class: usize) -> String {
    format!("class_{}", (b'a' + class as u8) as char)
}

/// Renders one video as raw grayscale planes.
fn render_video(cfg: &SynthConfig, class: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    let (w, h) = (cfg.width, cfg.height);
    let sq = ((w.min(h)) / 4).clamp(10, 20);

    // Background: smooth ramp plus gentle per-video noise, static over time.
    let palette = background_palette(cfg.mode, class, rng);
    let background = render_background(w, h, palette, rng);

    // Square texture tile, anchored to the square so it moves rigidly.
    let tile_side = sq + 1;
    let mut tile: Vec<f64> = (0..tile_side * tile_side)
        .map(|_| rng.gen_range(0.55..1.0))
        .collect();
    smooth_tile(&mut tile, tile_side);

    let events = video_events(cfg.mode, class, cfg.frames, rng);
    let speed = rng.gen_range(1.3..1.8);
    let margin = 1.0;
    let mut px = rng.gen_range(w as f64 * 0.3..w as f64 * 0.5);
    let mut py = rng.gen_range(h as f64 * 0.3..h as f64 * 0.5);

    let mut frames = Vec::with_capacity(cfg.frames);
    let mut frame_budget = cfg.frames;
    for (kind, dur) in events {
        let dur = dur.min(frame_budget);
        let (mut vx, mut vy) = kind.velocity(speed, rng);
        for _ in 0..dur {
            frames.push(draw_frame(&background, w, h, &tile, tile_side, sq, px, py));
            px += vx;
            py += vy;
            let hi_x = (w - sq) as f64 - margin;
            let hi_y = (h - sq) as f64 - margin;
            if px < margin {
                px = 2.0 * margin - px;
                vx = -vx;
            } else if px > hi_x {
                px = 2.0 * hi_x - px;
                vx = -vx;
            }
            if py < margin {
                py = 2.0 * margin - py;
                vy = -vy;
            } else if py > hi_y {
                py = 2.0 * hi_y - py;
                vy = -vy;
            }
        }
        frame_budget -= dur;
        if frame_budget == 0 {
            break;
        }
    }
    while frames.len() < cfg.frames {
        frames.push(draw_frame(&background, w, h, &tile, tile_side, sq, px, py));
    }
    frames
}

/// -1: no palette; 0/1: brighten the left/right half.
fn background_palette(mode: SynthMode, class: usize, rng: &mut ChaCha8Rng) -> i32 {
    match mode {
        SynthMode::Mixed => {
            let flipped = rng.gen::<f64>() < STATIC_FLIP;
            let palette = if flipped { 1 - (class as i32 % 2) } else { class as i32 % 2 };
            palette
        }
        _ => -1,
    }
}

fn render_background(w: usize, h: usize, palette: i32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut noise: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-0.03..0.03)).collect();
    smooth_tile(&mut noise, w); // w*h noise smoothed row-wise is close enough
    let mut bg = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let base = 0.16
                + 0.06 * ((x as f64 / w as f64) * std::f64::consts::TAU * 1.3).sin()
                + 0.05 * ((y as f64 / h as f64) * std::f64::consts::TAU * 1.7).cos();
            let pal = match palette {
                0 if x < w / 2 => 0.24,
                1 if x >= w / 2 => 0.24,
                _ => 0.0,
            };
            bg[y * w + x] = (base + pal + noise[y * w + x]).clamp(0.0, 0.5);
        }
    }
    bg
}

fn smooth_tile(tile: &mut [f64], width: usize) {
    let height = tile.len() / width;
    let src = tile.to_vec();
    for y in 0..height {
        for x in 0..width {
            let mut sum = 0.0;
            let mut n = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let sx = x as i64 + dx;
                    let sy = y as i64 + dy;
                    if sx >= 0 && sx < width as i64 && sy >= 0 && sy < height as i64 {
                        sum += src[sy as usize * width + sx as usize];
                        n += 1.0;
                    }
                }
            }
            tile[y * width + x] = sum / n;
        }
    }
}

fn video_events(
    mode: SynthMode,
    class: usize,
    total_frames: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(EventKind, usize)> {
    use EventKind::*;
    let axis = [Horizontal, Vertical];
    let diag = [DiagPlus, DiagMinus];
    let pick = |set: &[EventKind; 2], rng: &mut ChaCha8Rng| set[rng.gen_range(0..2)];
    let third = total_frames.div_ceil(3);
    match mode {
        SynthMode::Motion | SynthMode::Mixed => {
            let mut effective = class % 2;
            if mode == SynthMode::Mixed && rng.gen::<f64>() < MOTION_FLIP {
                effective = 1 - effective;
            }
            let set = if effective == 0 { axis } else { diag };
            (0..3).map(|_| (pick(&set, rng), third)).collect()
        }
        SynthMode::Order => {
            // Same multiset {H, H, V}; the order tells the classes apart.
            if class % 2 == 0 {
                vec![(Horizontal, third), (Horizontal, third), (Vertical, third)]
            } else {
                vec![(Vertical, third), (Horizontal, third), (Horizontal, third)]
            }
        }
        SynthMode::Constant => {
            let kind = if class % 2 == 0 { Horizontal } else { Vertical };
            vec![(kind, total_frames)]
        }
    }
}

fn draw_frame(
    background: &[f64],
    w: usize,
    h: usize,
    tile: &[f64],
    tile_side: usize,
    sq: usize,
    px: f64,
    py: f64,
) -> Vec<u8> {
    let mut img = background.to_vec();
    let x0 = px.floor().max(0.0) as usize;
    let y0 = py.floor().max(0.0) as usize;
    let x1 = ((px + sq as f64).ceil() as usize).min(w);
    let y1 = ((py + sq as f64).ceil() as usize).min(h);
    for y in y0..y1 {
        for x in x0..x1 {
            let tx = x as f64 - px;
            let ty = y as f64 - py;
            if tx >= 0.0 && tx < sq as f64 && ty >= 0.0 && ty < sq as f64 {
                img[y * w + x] = sample_tile(tile, tile_side, tx, ty);
            }
        }
    }
    img.iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

fn sample_tile(tile: &[f64], side: usize, x: f64, y: f64) -> f64 {
    let x0 = (x.floor() as usize).min(side - 1);
    let y0 = (y.floor() as usize).min(side - 1);
    let x1 = (x0 + 1).min(side - 1);
    let y1 = (y0 + 1).min(side - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = tile[y0 * side + x0] * (1.0 - fx) + tile[y0 * side + x1] * fx;
    let bot = tile[y1 * side + x0] * (1.0 - fx) + tile[y1 * side + x1] * fx;
    top * (1.0 - fy) + bot * fy
}
