//! Synthetic old-photo degradation: four cumulative tiers per source image
//! (gray, +blur or downscale, +crack, +noise) with a ground-truth crack mask.

mod crack;
mod dataset;
mod mask;
mod recipe;
mod tiers;

pub use crack::{apply_crack, generate_crack_mask, CrackDraw, CrackFill};
pub use dataset::{build_dataset, list_source_images, Manifest, ManifestRecord, MANIFEST_FILE};
pub use mask::{pad_mask, MaskBuffer};
pub use recipe::{BlurWeights, DegradationRecipe, Span};
pub use tiers::{degrade_tiers, RecipeDraws, TierSet};
