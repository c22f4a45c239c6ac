use rand::Rng;
use serde::{Deserialize, Serialize};

use super::crack::{apply_crack, generate_crack_mask, CrackDraw};
use super::mask::MaskBuffer;
use super::recipe::DegradationRecipe;
use crate::error::Result;
use crate::imaging::{add_gaussian_noise, apply_blur, resize, resize_to, to_grayscale, Blur, ImageBuffer, SeededRng};

/// Every value sampled while degrading one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeDraws {
    pub seed: u64,
    pub blur: Option<Blur>,
    pub downscale_factor: Option<f64>,
    pub cracks: Vec<CrackDraw>,
    pub crack_coverage: f64,
    pub noise_sigma: f64,
}

/// The four cumulative degradation tiers of one source image.
#[derive(Clone, Debug)]
pub struct TierSet {
    /// Gray-scale.
    pub g: ImageBuffer,
    /// + blurring or down-scaling.
    pub gb: ImageBuffer,
    /// + crack.
    pub gbc: ImageBuffer,
    /// + noise.
    pub gbcn: ImageBuffer,
    pub crack_mask: MaskBuffer,
    pub draws: RecipeDraws,
}

fn draw_blur(recipe: &DegradationRecipe, rng: &mut SeededRng) -> Blur {
    let w = recipe.blur_kind_weights;
    let u: f64 = rng.random_range(0.0..1.0);
    if u < w.gaussian {
        Blur::Gaussian {
            sigma: recipe.gaussian_sigma_range.sample(rng),
        }
    } else if u < w.gaussian + w.median {
        Blur::Median {
            radius: recipe.median_radius_range.sample(rng),
        }
    } else {
        Blur::Bilateral {
            sigma_spatial: recipe.bilateral_spatial_sigma_range.sample(rng),
            sigma_range: recipe.bilateral_range_sigma_range.sample(rng),
        }
    }
}

/// Produces g, gb, gbc and gbcn; each tier is the previous one plus one degradation.
pub fn degrade_tiers(img: &ImageBuffer, recipe: &DegradationRecipe, rng: &mut SeededRng) -> Result<TierSet> {
    recipe.validate()?;
    let g = to_grayscale(img);

    let downscale = recipe.downscale_probability > 0.0 && rng.random_bool(recipe.downscale_probability);
    let downscale_factor = downscale.then(|| recipe.downscale_factor_range.sample(rng));
    let blur = (recipe.blur_enabled && (!downscale || recipe.blur_with_downscale)).then(|| draw_blur(recipe, rng));

    let mut gb = g.clone();
    if let Some(kind) = blur {
        gb = apply_blur(&gb, kind)?;
    }
    if let Some(factor) = downscale_factor {
        let small = resize(&gb, factor, recipe.resize_method)?;
        gb = resize_to(&small, g.width(), g.height(), recipe.resize_method)?;
    }

    let (crack_mask, cracks) = generate_crack_mask(g.width(), g.height(), recipe, rng)?;
    let gbc = apply_crack(&gb, &crack_mask, recipe.crack_fill, rng)?;

    let noise_sigma = recipe.noise_sigma_range.sample(rng);
    let gbcn = add_gaussian_noise(&gbc, noise_sigma, rng)?;

    let draws = RecipeDraws {
        seed: rng.seed(),
        blur,
        downscale_factor,
        cracks,
        crack_coverage: crack_mask.coverage(),
        noise_sigma,
    };
    Ok(TierSet {
        g,
        gb,
        gbc,
        gbcn,
        crack_mask,
        draws,
    })
}
