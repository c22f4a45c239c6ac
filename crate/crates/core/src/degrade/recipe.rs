use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::crack::CrackFill;
use crate::error::{Error, Result};
use crate::imaging::{ResizeMethod, SeededRng};

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span<T>(pub T, pub T);

impl Span<f64> {
    fn check(&self, name: &str, min: f64) -> Result<()> {
        let Span(lo, hi) = *self;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::param(format!("{name}: empty range [{lo}, {hi}]")));
        }
        if lo < min {
            return Err(Error::param(format!("{name}: lower bound {lo} below {min}")));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            rng.random_range(self.0..=self.1)
        }
    }
}

impl Span<u32> {
    fn check(&self, name: &str, min: u32) -> Result<()> {
        if self.0 > self.1 {
            return Err(Error::param(format!("{name}: empty range [{}, {}]", self.0, self.1)));
        }
        if self.0 < min {
            return Err(Error::param(format!("{name}: lower bound {} below {min}", self.0)));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut SeededRng) -> u32 {
        if self.0 == self.1 {
            self.0
        } else {
            rng.random_range(self.0..=self.1)
        }
    }
}

/// Relative frequency of each blur kind when a blur is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurWeights {
    pub gaussian: f64,
    pub median: f64,
    pub bilateral: f64,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Seeded parameter bundle that drives tier synthesis. Every range is
/// configuration, sampled uniformly per image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationRecipe {
    pub seed: u64,
    /// When false the blur step is the identity (downscaling may still apply).
    pub blur_enabled: bool,
    pub blur_kind_weights: BlurWeights,
    pub gaussian_sigma_range: Span<f64>,
    pub median_radius_range: Span<u32>,
    pub bilateral_spatial_sigma_range: Span<f64>,
    pub bilateral_range_sigma_range: Span<f64>,
    pub downscale_factor_range: Span<f64>,
    pub downscale_probability: f64,
    /// Apply a blur even when downscaling was drawn (ablation switch).
    pub blur_with_downscale: bool,
    pub resize_method: ResizeMethod,
    pub crack_count_range: Span<u32>,
    pub crack_walk_steps_range: Span<u32>,
    /// Length of one random-walk step in pixels for a 256-pixel short side;
    /// scaled proportionally for other sizes.
    pub crack_step_length: f64,
    pub crack_width_range: Span<u32>,
    pub crack_branch_probability: f64,
    pub crack_fill: CrackFill,
    pub noise_sigma_range: Span<f64>,
}

impl Default for DegradationRecipe {
    fn default() -> Self {
        Self {
            seed: 0,
            blur_enabled: true,
            blur_kind_weights: BlurWeights {
                gaussian: 0.4,
                median: 0.3,
                bilateral: 0.3,
            },
            gaussian_sigma_range: Span(0.8, 2.5),
            median_radius_range: Span(1, 2),
            bilateral_spatial_sigma_range: Span(1.0, 3.0),
            bilateral_range_sigma_range: Span(20.0, 60.0),
            downscale_factor_range: Span(0.25, 0.5),
            downscale_probability: 0.5,
            blur_with_downscale: false,
            resize_method: ResizeMethod::Bilinear,
            crack_count_range: Span(1, 4),
            crack_walk_steps_range: Span(30, 120),
            crack_step_length: 3.0,
            crack_width_range: Span(2, 6),
            crack_branch_probability: 0.04,
            crack_fill: CrackFill::White,
            noise_sigma_range: Span(5.0, 25.0),
        }
    }
}

impl DegradationRecipe {
    /// A recipe that changes nothing beyond the grayscale conversion.
    pub fn identity() -> Self {
        Self {
            blur_enabled: false,
            downscale_probability: 0.0,
            crack_count_range: Span(0, 0),
            noise_sigma_range: Span(0.0, 0.0),
            ..Self::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let recipe: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.blur_kind_weights;
        for (name, v) in [("gaussian", w.gaussian), ("median", w.median), ("bilateral", w.bilateral)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("blur weight `{name}` must be >= 0")));
            }
        }
        let total = w.gaussian + w.median + w.bilateral;
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::param(format!("blur weights must sum to 1, got {total}")));
        }
        self.gaussian_sigma_range.check("gaussian_sigma_range", f64::MIN_POSITIVE)?;
        self.median_radius_range.check("median_radius_range", 1)?;
        self.bilateral_spatial_sigma_range
            .check("bilateral_spatial_sigma_range", f64::MIN_POSITIVE)?;
        self.bilateral_range_sigma_range
            .check("bilateral_range_sigma_range", f64::MIN_POSITIVE)?;
        self.downscale_factor_range
            .check("downscale_factor_range", f64::MIN_POSITIVE)?;
        if self.downscale_factor_range.1 > 1.0 {
            return Err(Error::param("downscale_factor_range must lie in (0, 1]"));
        }
        check_probability("downscale_probability", self.downscale_probability)?;
        self.check_cracks()?;
        self.noise_sigma_range.check("noise_sigma_range", 0.0)?;
        Ok(())
    }

    pub(crate) fn check_cracks(&self) -> Result<()> {
        self.crack_count_range.check("crack_count_range", 0)?;
        self.crack_walk_steps_range.check("crack_walk_steps_range", 1)?;
        self.crack_width_range.check("crack_width_range", 1)?;
        if !(self.crack_step_length > 0.0 && self.crack_step_length.is_finite()) {
            return Err(Error::param("crack_step_length must be > 0"));
        }
        check_probability("crack_branch_probability", self.crack_branch_probability)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_recipe_is_valid_and_roundtrips() {
        let r = DegradationRecipe::default();
        r.validate().unwrap();
        let json = serde_json::to_string_pretty(&r).unwrap();
        let back: DegradationRecipe = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        DegradationRecipe::identity().validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let r: DegradationRecipe = serde_json::from_str(r#"{"seed": 42, "crack_count_range": [0, 0]}"#).unwrap();
        assert_eq!(r.seed, 42);
        assert_eq!(r.crack_count_range, Span(0, 0));
        assert_eq!(r.noise_sigma_range, Span(5.0, 25.0));
    }

    #[test]
    fn rejects_bad_ranges() {
        let mut r = DegradationRecipe::default();
        r.crack_width_range = Span(5, 2);
        assert!(matches!(r.validate(), Err(Error::Param(_))));

        let mut r = DegradationRecipe::default();
        r.blur_kind_weights.median = 0.9;
        assert!(r.validate().is_err());

        let mut r = DegradationRecipe::default();
        r.downscale_probability = 1.5;
        assert!(r.validate().is_err());

        let mut r = DegradationRecipe::default();
        r.downscale_factor_range = Span(0.5, 1.5);
        assert!(r.validate().is_err());
    }
}
