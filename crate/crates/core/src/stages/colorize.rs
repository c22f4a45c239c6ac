use std::str::FromStr;

use super::StageParams;
use crate::error::{Error, Result};
use crate::imaging::{clamp_u8, gray_to_rgb, to_grayscale, ImageBuffer};

/// Fixed sepia toning matrix. On the gray axis the rows sum to 1.07, 0.74 and 0.43.
pub const SEPIA_MATRIX: [[f64; 3]; 3] = [
    [0.40, 0.50, 0.17],
    [0.25, 0.40, 0.09],
    [0.13, 0.22, 0.08],
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ColorizeMode {
    #[default]
    Neutral,
    Sepia,
}

impl FromStr for ColorizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(Self::Neutral),
            "sepia" => Ok(Self::Sepia),
            other => Err(Error::param(format!("unknown colorize mode `{other}`"))),
        }
    }
}

/// Deterministic tone mapping to RGB. The mode comes from `extras.mode`
/// (`neutral` by default, or `sepia`); colour input is first reduced to gray.
pub fn colorize_reference(img: &ImageBuffer, params: &StageParams) -> Result<ImageBuffer> {
    let mode: ColorizeMode = params.extra("mode").map(str::parse).transpose()?.unwrap_or_default();
    let gray = to_grayscale(img);
    match mode {
        ColorizeMode::Neutral => Ok(gray_to_rgb(&gray)),
        ColorizeMode::Sepia => {
            let data = gray
                .data()
                .iter()
                .flat_map(|&v| {
                    let v = v as f64;
                    SEPIA_MATRIX.map(|row| clamp_u8(row.iter().sum::<f64>() * v))
                })
                .collect();
            ImageBuffer::new(gray.width(), gray.height(), 3, data)
        }
    }
}
