use super::StageParams;
use crate::degrade::MaskBuffer;
use crate::error::{Error, Result};
use crate::imaging::{clamp_u8, ImageBuffer};

// Jacobi iterations per unit of `steps` at full strength.
const ITERATIONS_PER_STEP: f64 = 50.0;
const CONVERGENCE_DELTA: f64 = 0.1;

fn neighbours(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// Classical mask fill: masked pixels are seeded layer by layer from the mask
/// boundary, then relaxed by Jacobi averaging of their 4-neighbours until the
/// largest update drops below 0.1 or `strength * steps * 50` iterations ran.
/// Pixels outside the mask are returned bit-exactly.
pub fn inpaint_reference(img: &ImageBuffer, mask: &MaskBuffer, params: &StageParams) -> Result<ImageBuffer> {
    mask.ensure_matches(img)?;
    if mask.is_empty() {
        return Ok(img.clone());
    }
    if mask.is_full() {
        return Err(Error::Input("mask covers the entire image; nothing to diffuse from".into()));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let c = img.channels() as usize;
    let holes: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(i, on)| on.then_some(i))
        .collect();
    let max_iterations = (params.strength * params.steps as f64 * ITERATIONS_PER_STEP).ceil() as usize;

    let mut out = img.clone();
    for ch in 0..c {
        let mut plane: Vec<f64> = img.data().iter().skip(ch).step_by(c).map(|&v| v as f64).collect();

        // Onion-peel seeding from the known region inward.
        let mut filled: Vec<bool> = mask.iter().map(|on| !on).collect();
        let mut pending = holes.clone();
        while !pending.is_empty() {
            let layer: Vec<(usize, f64)> = pending
                .iter()
                .filter_map(|&i| {
                    let (sum, n) = neighbours(i, w, h)
                        .filter(|&j| filled[j])
                        .fold((0.0, 0usize), |(s, n), j| (s + plane[j], n + 1));
                    (n > 0).then(|| (i, sum / n as f64))
                })
                .collect();
            debug_assert!(!layer.is_empty(), "a non-full mask always has a frontier");
            for &(i, v) in &layer {
                plane[i] = v;
                filled[i] = true;
            }
            pending.retain(|&i| !filled[i]);
        }

        let mut next = plane.clone();
        for _ in 0..max_iterations {
            let mut max_delta: f64 = 0.0;
            for &i in &holes {
                let (sum, n) = neighbours(i, w, h).fold((0.0, 0usize), |(s, n), j| (s + plane[j], n + 1));
                let v = sum / n as f64;
                max_delta = max_delta.max((v - plane[i]).abs());
                next[i] = v;
            }
            std::mem::swap(&mut plane, &mut next);
            if max_delta < CONVERGENCE_DELTA {
                break;
            }
        }

        for &i in &holes {
            out.data_mut()[i * c + ch] = clamp_u8(plane[i]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> StageParams {
        StageParams {
            steps: 30,
            ..StageParams::for_backend("reference-inpaint")
        }
    }

    #[test]
    fn empty_mask_is_identity() {
        let img = ImageBuffer::from_fn(10, 10, 3, |x, y, c| (x * 20 + y + c as u32) as u8).unwrap();
        assert_eq!(inpaint_reference(&img, &MaskBuffer::empty(10, 10), &params()).unwrap(), img);
    }

    #[test]
    fn constant_hole_restored() {
        let img = ImageBuffer::filled(32, 32, 1, 90).unwrap();
        let mask = MaskBuffer::from_fn(32, 32, |x, y| (12..20).contains(&x) && (12..20).contains(&y));
        let mut damaged = img.clone();
        for y in 12..20 {
            for x in 12..20 {
                damaged.set(x, y, 0, 255);
            }
        }
        let out = inpaint_reference(&damaged, &mask, &params()).unwrap();
        assert!(out.data().iter().all(|&v| v.abs_diff(90) <= 1));
    }

    #[test]
    fn linear_gradient_stripe_within_three_levels() {
        let grad = |x: u32| 10.0 + 3.5 * x as f64;
        let img = ImageBuffer::from_fn(64, 24, 1, |x, _, _| grad(x).round() as u8).unwrap();
        let mask = MaskBuffer::from_fn(64, 24, |x, _| (30..33).contains(&x));
        let mut damaged = img.clone();
        for y in 0..24 {
            for x in 30..33 {
                damaged.set(x, y, 0, 0);
            }
        }
        let out = inpaint_reference(&damaged, &mask, &params()).unwrap();
        for y in 0..24 {
            for x in 30..33 {
                let diff = (out.get(x, y, 0) as f64 - grad(x)).abs();
                assert!(diff <= 3.0, "({x},{y}): {} vs {}", out.get(x, y, 0), grad(x));
            }
        }
    }

    #[test]
    fn unmasked_pixels_untouched() {
        let img = ImageBuffer::from_fn(20, 16, 3, |x, y, c| ((x * 13) ^ (y * 7)) as u8 ^ (c * 40)).unwrap();
        let mask = MaskBuffer::from_fn(20, 16, |x, y| (x + 2 * y) % 5 == 0);
        let out = inpaint_reference(&img, &mask, &params()).unwrap();
        for y in 0..16 {
            for x in 0..20 {
                if !mask.is_set(x, y) {
                    for c in 0..3 {
                        assert_eq!(out.get(x, y, c), img.get(x, y, c));
                    }
                }
            }
        }
    }

    #[test]
    fn full_mask_and_shape_errors() {
        let img = ImageBuffer::filled(8, 8, 1, 1).unwrap();
        assert!(matches!(
            inpaint_reference(&img, &MaskBuffer::full(8, 8), &params()),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            inpaint_reference(&img, &MaskBuffer::empty(9, 8), &params()),
            Err(Error::Shape(_))
        ));
    }
}
