use std::fmt;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved 8-bit raster with 1 (gray) or 3 (RGB) channels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape(format!("image must be at least 1x1, got {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::shape(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::shape(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: u32,
        height: u32,
        channels: u8,
        mut f: impl FnMut(u32, u32, u8) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u8, v: u8) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    /// Same width, height and channel count.
    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.dimensions() == other.dimensions() && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &ImageBuffer) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Splits into one `f32` plane per channel.
    pub(crate) fn to_planes(&self) -> Vec<Vec<f32>> {
        let c = self.channels as usize;
        (0..c)
            .map(|ch| self.data.iter().skip(ch).step_by(c).map(|&v| v as f32).collect())
            .collect()
    }

    /// Inverse of [`to_planes`](Self::to_planes): rounds and clamps each sample.
    pub(crate) fn from_planes(width: u32, height: u32, planes: &[Vec<f32>]) -> Result<Self> {
        let c = planes.len();
        let n = width as usize * height as usize;
        let mut data = vec![0u8; n * c];
        for (ch, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                data[i * c + ch] = super::clamp_u8(v as f64);
            }
        }
        Self::new(width, height, c as u8, data)
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self> {
        let has_color = img.color().has_color();
        if has_color {
            let rgb = img.into_rgb8();
            let (w, h) = rgb.dimensions();
            Self::new(w, h, 3, rgb.into_raw())
        } else {
            let gray = img.into_luma8();
            let (w, h) = gray.dimensions();
            Self::new(w, h, 1, gray.into_raw())
        }
    }

    fn to_dynamic(&self) -> DynamicImage {
        match self.channels {
            1 => DynamicImage::ImageLuma8(
                GrayImage::from_raw(self.width, self.height, self.data.clone())
                    .expect("buffer length checked at construction"),
            ),
            _ => DynamicImage::ImageRgb8(
                RgbImage::from_raw(self.width, self.height, self.data.clone())
                    .expect("buffer length checked at construction"),
            ),
        }
    }

    /// Reads any supported raster file. Alpha is dropped and deeper samples
    /// are reduced to 8 bits.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory(&bytes)
            .map_err(|e| Error::Codec(format!("{}: {e}", path.display())))?;
        Self::from_dynamic(img)
    }

    /// Writes an 8-bit PNG (gray or RGB).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_png_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
        Self::from_dynamic(img)
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Cursor::new(Vec::new());
        self.to_dynamic().write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }
}

impl fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}
