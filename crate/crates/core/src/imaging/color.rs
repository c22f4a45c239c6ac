use super::{clamp_u8, ImageBuffer};

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// BT.601 luma of one RGB sample, rounded and clamped.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    clamp_u8(LUMA_R * r as f64 + LUMA_G * g as f64 + LUMA_B * b as f64)
}

/// Converts to a single channel. Gray input is returned unchanged.
pub fn to_grayscale(img: &ImageBuffer) -> ImageBuffer {
    if img.channels() == 1 {
        return img.clone();
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]))
        .collect();
    ImageBuffer::new(img.width(), img.height(), 1, data).expect("same dimensions")
}

/// Replicates a gray image into three equal channels. RGB input is returned unchanged.
pub fn gray_to_rgb(img: &ImageBuffer) -> ImageBuffer {
    if img.channels() == 3 {
        return img.clone();
    }
    let data = img.data().iter().flat_map(|&v| [v, v, v]).collect();
    ImageBuffer::new(img.width(), img.height(), 3, data).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_red_maps_to_76() {
        // round(0.299 * 255) = round(76.245)
        let img = ImageBuffer::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        assert_eq!(to_grayscale(&img).data(), &[76]);
    }

    #[test]
    fn gray_pixels_are_fixed_points() {
        for v in 0..=255u8 {
            assert_eq!(luma(v, v, v), v);
        }
    }

    #[test]
    fn keeps_dimensions() {
        let img = ImageBuffer::filled(512, 512, 3, 9).unwrap();
        let g = to_grayscale(&img);
        assert_eq!((g.width(), g.height(), g.channels()), (512, 512, 1));
    }

    proptest! {
        #[test]
        fn grayscale_is_idempotent(data in proptest::collection::vec(any::<u8>(), 4 * 3 * 3)) {
            let img = ImageBuffer::new(4, 3, 3, data).unwrap();
            let once = to_grayscale(&img);
            prop_assert_eq!(to_grayscale(&once), once.clone());
            prop_assert_eq!(to_grayscale(&gray_to_rgb(&once)), once);
        }
    }
}
