use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mask::MaskBuffer;
use super::recipe::DegradationRecipe;
use crate::error::{Error, Result};
use crate::imaging::{ImageBuffer, SeededRng};

/// How crack pixels are painted into the image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrackFill {
    #[default]
    White,
    Black,
    /// Random light values in `[SPECKLE_MIN, 255]`.
    Speckle,
}

const SPECKLE_MIN: u8 = 170;
// Per-step heading perturbation (radians).
const HEADING_JITTER: f64 = 0.3;
const WIDTH_JITTER_PROBABILITY: f64 = 0.2;
// Short side at which `crack_step_length` applies unscaled.
const REFERENCE_SIDE: f64 = 256.0;

/// Sampled geometry of one crack, kept for the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrackDraw {
    pub start: [f64; 2],
    pub heading: f64,
    pub steps: u32,
    pub width: u32,
    pub branches: u32,
}

struct Walker<'a> {
    mask: &'a mut MaskBuffer,
    rng: &'a mut SeededRng,
    jitter: Normal<f64>,
    recipe: &'a DegradationRecipe,
    step: f64,
    branches: u32,
}

impl Walker<'_> {
    fn walk(&mut self, mut pos: [f64; 2], mut heading: f64, steps: u32, mut width: u32, branchable: bool) {
        let (w, h) = (self.mask.width() as f64, self.mask.height() as f64);
        let step = self.step;
        let widths = self.recipe.crack_width_range;
        for i in 0..steps {
            heading += self.jitter.sample(self.rng);
            let mut next = [pos[0] + step * heading.cos(), pos[1] + step * heading.sin()];
            // Bounce off the frame so cracks stay on the photo.
            if next[0] < 0.0 || next[0] > w {
                heading = PI - heading;
                next[0] = next[0].clamp(0.0, w);
            }
            if next[1] < 0.0 || next[1] > h {
                heading = -heading;
                next[1] = next[1].clamp(0.0, h);
            }
            if self.rng.random_bool(WIDTH_JITTER_PROBABILITY) {
                let up = self.rng.random_bool(0.5);
                width = if up { width + 1 } else { width.saturating_sub(1) };
                width = width.clamp(widths.0.max(1), widths.1.max(1));
            }
            stroke_segment(self.mask, pos, next, width as f64 / 2.0);
            if branchable && self.rng.random_bool(self.recipe.crack_branch_probability) {
                let side = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let turn = self.rng.random_range(PI / 6.0..PI / 3.0);
                let remaining = (steps - i) / 2;
                self.branches += 1;
                self.walk(next, heading + side * turn, remaining, width.saturating_sub(1).max(1), false);
            }
            pos = next;
        }
    }
}

/// Marks every pixel whose centre lies within `radius` of segment `a..b`.
fn stroke_segment(mask: &mut MaskBuffer, a: [f64; 2], b: [f64; 2], radius: f64) {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let x0 = ((a[0].min(b[0]) - radius).floor() as i64).max(0);
    let x1 = ((a[0].max(b[0]) + radius).ceil() as i64).min(w - 1);
    let y0 = ((a[1].min(b[1]) - radius).floor() as i64).max(0);
    let y1 = ((a[1].max(b[1]) + radius).ceil() as i64).min(h - 1);
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let r2 = radius * radius;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let t = if len2 > 0.0 {
                (((px - a[0]) * dx + (py - a[1]) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (cx, cy) = (a[0] + t * dx - px, a[1] + t * dy - py);
            if cx * cx + cy * cy <= r2 {
                mask.set(x as u32, y as u32, true);
            }
        }
    }
}

/// Random-walk crack mask: `crack_count` polylines with per-step heading and
/// width jitter and optional single-level branching. The step length scales
/// with the image's short side so crack length is proportional to the photo;
/// widths stay in pixels.
pub fn generate_crack_mask(
    width: u32,
    height: u32,
    recipe: &DegradationRecipe,
    rng: &mut SeededRng,
) -> Result<(MaskBuffer, Vec<CrackDraw>)> {
    if width < 8 || height < 8 {
        return Err(Error::param(format!("crack mask needs at least 8x8, got {width}x{height}")));
    }
    recipe.check_cracks()?;
    let mut mask = MaskBuffer::empty(width, height);
    let count = recipe.crack_count_range.sample(rng);
    let mut draws = Vec::with_capacity(count as usize);
    let jitter = Normal::new(0.0, HEADING_JITTER).expect("constant sigma");
    let mut walker = Walker {
        mask: &mut mask,
        rng,
        jitter,
        recipe,
        step: recipe.crack_step_length * width.min(height) as f64 / REFERENCE_SIDE,
        branches: 0,
    };
    for _ in 0..count {
        let start = [
            walker.rng.random_range(0.0..width as f64),
            walker.rng.random_range(0.0..height as f64),
        ];
        let heading = walker.rng.random_range(0.0..TAU);
        let steps = recipe.crack_walk_steps_range.sample(walker.rng);
        let crack_width = recipe.crack_width_range.sample(walker.rng);
        walker.branches = 0;
        walker.walk(start, heading, steps, crack_width, true);
        draws.push(CrackDraw {
            start,
            heading,
            steps,
            width: crack_width,
            branches: walker.branches,
        });
    }
    Ok((mask, draws))
}

/// Paints masked pixels with `fill`; unmasked pixels are copied bit-exactly.
pub fn apply_crack(
    img: &ImageBuffer,
    mask: &MaskBuffer,
    fill: CrackFill,
    rng: &mut SeededRng,
) -> Result<ImageBuffer> {
    mask.ensure_matches(img)?;
    let mut out = img.clone();
    let c = img.channels() as usize;
    for (i, on) in mask.iter().enumerate() {
        if !on {
            continue;
        }
        let v = match fill {
            CrackFill::White => 255,
            CrackFill::Black => 0,
            CrackFill::Speckle => rng.random_range(SPECKLE_MIN..=255),
        };
        out.data_mut()[i * c..(i + 1) * c].fill(v);
    }
    Ok(out)
}
