use rand_distr::{Distribution, Normal};

use super::{clamp_u8, ImageBuffer, SeededRng};
use crate::error::{Error, Result};

/// Adds i.i.d. `N(0, sigma^2)` noise to every sample, then rounds and clamps.
pub fn add_gaussian_noise(img: &ImageBuffer, sigma: f64, rng: &mut SeededRng) -> Result<ImageBuffer> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = clamp_u8(*v as f64 + normal.sample(rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_stats(sigma: f64, level: u8, seed: u64) -> (f64, f64) {
        let img = ImageBuffer::filled(256, 256, 1, level).unwrap();
        let out = add_gaussian_noise(&img, sigma, &mut SeededRng::new(seed)).unwrap();
        let diffs: Vec<f64> = out
            .data()
            .iter()
            .map(|&v| v as f64 - level as f64)
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn zero_sigma_is_identity() {
        let img = ImageBuffer::from_fn(5, 5, 3, |x, y, c| (x + y * 5 + c as u32) as u8).unwrap();
        assert_eq!(add_gaussian_noise(&img, 0.0, &mut SeededRng::new(1)).unwrap(), img);
    }

    #[test]
    fn residual_std_matches_sigma() {
        let (_, std) = residual_stats(10.0, 128, 9);
        assert!((9.0..=11.0).contains(&std), "std {std}");
    }

    #[test]
    fn residual_mean_is_unbiased_away_from_saturation() {
        for sigma in [1.0, 5.0, 15.0, 30.0] {
            let (mean, _) = residual_stats(sigma, 128, 3);
            assert!(mean.abs() <= 0.5, "sigma {sigma} mean {mean}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let img = ImageBuffer::filled(32, 32, 1, 100).unwrap();
        let a = add_gaussian_noise(&img, 12.0, &mut SeededRng::new(5)).unwrap();
        let b = add_gaussian_noise(&img, 12.0, &mut SeededRng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_sigma_rejected() {
        let img = ImageBuffer::filled(2, 2, 1, 0).unwrap();
        assert!(matches!(
            add_gaussian_noise(&img, -1.0, &mut SeededRng::new(0)),
            Err(Error::Param(_))
        ));
    }
}
