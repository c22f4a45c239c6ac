use super::StageParams;
use crate::error::Result;
use crate::imaging::{bilateral_filter, to_grayscale, ImageBuffer};

/// Gaussian MAD consistency constant.
const MAD_TO_SIGMA: f64 = 0.6745;
/// L2 norm of the 5-point Laplacian kernel, sqrt(4^2 + 4 * 1^2).
const LAPLACIAN_NORM: f64 = 4.47213595499958;

/// Linear map from `strength * steps` to bilateral settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiseSettings {
    pub sigma_spatial: f64,
    pub sigma_range: f64,
}

const SPATIAL_PER_BUDGET: f64 = 2.5;
const RANGE_PER_BUDGET: f64 = 100.0;
const MAX_SPATIAL: f64 = 8.0;

impl DenoiseSettings {
    /// `None` when the budget is zero (the stage is then an identity).
    pub fn from_params(params: &StageParams) -> Option<Self> {
        let budget = params.strength * params.steps as f64;
        (budget > 0.0).then(|| Self {
            sigma_spatial: (SPATIAL_PER_BUDGET * budget).min(MAX_SPATIAL),
            sigma_range: RANGE_PER_BUDGET * budget,
        })
    }
}

/// Noise level estimate: MAD of the 5-point Laplacian response over interior
/// pixels, converted to a Gaussian sigma and normalized by the kernel gain.
pub fn estimate_noise_sigma(img: &ImageBuffer) -> f64 {
    let gray = to_grayscale(img);
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    if w < 3 || h < 3 {
        return 0.0;
    }
    let d = gray.data();
    let mut responses = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let lap = 4.0 * d[i] as f64 - d[i - 1] as f64 - d[i + 1] as f64 - d[i - w] as f64 - d[i + w] as f64;
            responses.push(lap);
        }
    }
    let median = |v: &mut Vec<f64>| {
        let mid = v.len() / 2;
        *v.select_nth_unstable_by(mid, f64::total_cmp).1
    };
    let m = median(&mut responses);
    let mut dev: Vec<f64> = responses.iter().map(|r| (r - m).abs()).collect();
    median(&mut dev) / MAD_TO_SIGMA / LAPLACIAN_NORM
}

/// Sampler step count proportional to the estimated noise: `clamp(round(k * sigma), 10, 100)`.
pub fn auto_steps(sigma_hat: f64, steps_per_sigma: f64) -> u32 {
    (steps_per_sigma * sigma_hat).round().clamp(10.0, 100.0) as u32
}

/// Edge-preserving smoothing whose strength scales linearly with
/// `strength * steps`. With `extras.auto_steps = true` the step count is
/// derived from the estimated noise level (`extras.steps_per_sigma`, default 2).
pub fn denoise_reference(img: &ImageBuffer, params: &StageParams) -> Result<ImageBuffer> {
    let mut params = params.clone();
    if params.extra("auto_steps") == Some("true") {
        let k = params
            .extra("steps_per_sigma")
            .map(|v| v.parse::<f64>())
            .transpose()
            .map_err(|_| crate::Error::Param("extras.steps_per_sigma must be a number".into()))?
            .unwrap_or(2.0);
        params.steps = auto_steps(estimate_noise_sigma(img), k);
    }
    match DenoiseSettings::from_params(&params) {
        None => Ok(img.clone()),
        Some(s) => bilateral_filter(img, s.sigma_spatial, s.sigma_range),
    }
}
