use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

pub const MASK_ON: u8 = 255;

/// Single-channel binary raster: 255 marks damaged pixels to restore, 0 keeps.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MaskBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl MaskBuffer {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape(format!("mask must be at least 1x1, got {width}x{height}")));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::shape(format!(
                "mask data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v != 0 && v != MASK_ON) {
            return Err(Error::Input(format!("mask is not binary (found value {bad})")));
        }
        Ok(Self { width, height, data })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::from_fn(width, height, |_, _| false)
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::from_fn(width, height, |_, _| true)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(if f(x, y) { MASK_ON } else { 0 });
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn is_set(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize] == MASK_ON
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.data[y as usize * self.width as usize + x as usize] = if on { MASK_ON } else { 0 };
    }

    /// Flags in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.data.iter().map(|&v| v == MASK_ON)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == MASK_ON).count()
    }

    /// Fraction of pixels marked for restoration.
    pub fn coverage(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn is_full(&self) -> bool {
        self.data.iter().all(|&v| v == MASK_ON)
    }

    /// True when every pixel set in `other` is also set here.
    pub fn contains(&self, other: &MaskBuffer) -> bool {
        self.dimensions() == other.dimensions()
            && self.data.iter().zip(&other.data).all(|(&a, &b)| b == 0 || a == MASK_ON)
    }

    pub fn ensure_matches(&self, img: &ImageBuffer) -> Result<()> {
        if self.dimensions() == img.dimensions() {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "mask is {}x{} but image is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )))
        }
    }

    /// Gray view of the mask (0/255).
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer::new(self.width, self.height, 1, self.data.clone()).expect("mask dims are valid")
    }

    /// Accepts a single-channel (or gray-looking) image whose values are all 0 or 255.
    pub fn from_image(img: &ImageBuffer) -> Result<Self> {
        let gray = crate::imaging::to_grayscale(img);
        Self::new(gray.width(), gray.height(), gray.into_data())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_image(&ImageBuffer::load(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_image().save(path)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_image(&ImageBuffer::from_png_bytes(bytes)?)
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        self.to_image().to_png_bytes()
    }
}

impl fmt::Debug for MaskBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaskBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("count", &self.count())
            .finish()
    }
}

/// Dilation with a `(2r+1) x (2r+1)` square structuring element.
pub fn pad_mask(mask: &MaskBuffer, radius: u32) -> MaskBuffer {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width as usize, mask.height as usize);
    let r = radius as usize;
    // Separable: a square max is a row max followed by a column max.
    let mut rows = vec![0u8; w * h];
    for y in 0..h {
        let src = &mask.data[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            rows[y * w + x] = *src[lo..=hi].iter().max().unwrap();
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| rows[yy * w + x]).max().unwrap();
        }
    }
    MaskBuffer {
        width: mask.width,
        height: mask.height,
        data: out,
    }
}
