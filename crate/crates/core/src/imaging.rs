//! Pixel containers, color-space conversions and binary masks.

use std::path::Path;

use image::{GrayImage, Luma, RgbImage};

use crate::{Error, Result};

/// 8-bit RGB triple.
pub type Rgb = [u8; 3];

/// Row-major RGB raster. Always at least 1x1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: Rgb) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Rgb,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    /// Copies the `w`x`h` window whose top-left corner is (`x0`, `y0`).
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::InvalidParameter(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Luma plane used as the grayscale source for texture codes.
    pub fn luma(&self) -> Vec<u8> {
        self.pixels.iter().map(|&p| rgb_to_luma(p)).collect()
    }

    pub fn to_ycbcr(&self) -> Vec<PixelYCbCr> {
        self.pixels.iter().map(|&p| rgb_to_ycbcr(p)).collect()
    }

    /// Decodes any raster format the `image` crate was built with (PNG, PPM, JPEG).
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from(decoded.to_rgb8()))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        RgbImage::from(self)
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

impl From<RgbImage> for ImageRgb {
    fn from(img: RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        Self {
            width: w as usize,
            height: h as usize,
            pixels,
        }
    }
}

impl From<&ImageRgb> for RgbImage {
    fn from(img: &ImageRgb) -> Self {
        let raw = img.pixels.iter().flatten().copied().collect();
        RgbImage::from_raw(img.width as u32, img.height as u32, raw)
            .expect("buffer length matches dimensions")
    }
}

/// Full-range YCbCr pixel, each channel in [0, 255].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelYCbCr {
    pub y: u8,
    pub cb: u8,
    pub cr: u8,
}

impl PixelYCbCr {
    pub const fn new(y: u8, cb: u8, cr: u8) -> Self {
        Self { y, cb, cr }
    }

    #[inline]
    pub fn channels(self) -> [u8; 3] {
        [self.y, self.cb, self.cr]
    }
}

#[inline]
fn round_clamp(v: f64) -> u8 {
    // round half up, then clamp
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[inline]
fn luma_exact(p: Rgb) -> f64 {
    let [r, g, b] = p.map(f64::from);
    0.299 * r + 0.587 * g + 0.114 * b
}

/// BT.601 full-range (JPEG) conversion.
pub fn rgb_to_ycbcr(p: Rgb) -> PixelYCbCr {
    let [r, g, b] = p.map(f64::from);
    let y = luma_exact(p);
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    PixelYCbCr {
        y: round_clamp(y),
        cb: round_clamp(cb),
        cr: round_clamp(cr),
    }
}

#[inline]
pub fn rgb_to_luma(p: Rgb) -> u8 {
    round_clamp(luma_exact(p))
}

/// V channel of YUV, `0.877 * (R - Y)` with the integer luma of [`rgb_to_luma`].
#[inline]
pub fn rgb_to_yuv_v(p: Rgb) -> f64 {
    0.877 * (f64::from(p[0]) - f64::from(rgb_to_luma(p)))
}

/// Per-pixel fire decision, row-major, `true` = fire.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} bits supplied for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of pixels flagged as fire.
    pub fn fire_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.popcount() as f64 / self.bits.len() as f64
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Reads a ground-truth mask; any channel value >= 128 counts as fire.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let gray = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_luma8();
        let (w, h) = gray.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            bits: gray.pixels().map(|p| p.0[0] >= 128).collect(),
        })
    }

    /// Writes an 8-bit single-channel PNG, 0 = non-fire, 255 = fire.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let img = GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(x as usize, y as usize) {
                255
            } else {
                0
            }])
        });
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Pixel-wise intersection of two masks of equal size.
pub fn mask_and(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    if a.dims() != b.dims() {
        return Err(Error::dims(a.dims(), b.dims()));
    }
    Ok(BinaryMask {
        width: a.width,
        height: a.height,
        bits: a.bits.iter().zip(&b.bits).map(|(&x, &y)| x && y).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ycbcr_reference_points() {
        assert_eq!(rgb_to_ycbcr([0, 0, 0]), PixelYCbCr::new(0, 128, 128));
        assert_eq!(
            rgb_to_ycbcr([255, 255, 255]),
            PixelYCbCr::new(255, 128, 128)
        );
        // Y = 76.245, Cb = 84.97, Cr = 255.5 -> clamped
        assert_eq!(rgb_to_ycbcr([255, 0, 0]), PixelYCbCr::new(76, 85, 255));
    }

    #[test]
    fn luma_reference_points() {
        assert_eq!(rgb_to_luma([0, 0, 0]), 0);
        assert_eq!(rgb_to_luma([255, 255, 255]), 255);
        assert_eq!(rgb_to_luma([255, 0, 0]), 76);
    }

    #[test]
    fn yuv_v_reference_points() {
        assert_eq!(rgb_to_yuv_v([0, 0, 0]), 0.0);
        assert_eq!(rgb_to_yuv_v([255, 255, 255]), 0.0);
        assert!((rgb_to_yuv_v([255, 0, 0]) - 156.9).abs() <= 0.1);
    }

    #[test]
    fn gray_axis_has_neutral_chroma() {
        for v in 0..=255u8 {
            assert_eq!(rgb_to_ycbcr([v, v, v]), PixelYCbCr::new(v, 128, 128));
        }
    }

    #[test]
    fn mask_and_examples() {
        let t = BinaryMask::filled(3, 2, true);
        let f = BinaryMask::filled(3, 2, false);
        assert_eq!(mask_and(&t, &f).unwrap(), f);
        assert_eq!(mask_and(&t, &t).unwrap(), t);

        let a = BinaryMask::new(2, 1, vec![true, false]).unwrap();
        let b = BinaryMask::new(2, 1, vec![true, true]).unwrap();
        assert_eq!(mask_and(&a, &b).unwrap().bits(), &[true, false]);
    }

    #[test]
    fn mask_and_rejects_mismatched_dims() {
        let a = BinaryMask::filled(2, 2, true);
        let b = BinaryMask::filled(4, 1, true);
        assert!(matches!(
            mask_and(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn image_rejects_bad_shapes() {
        assert!(ImageRgb::new(0, 1, vec![]).is_err());
        assert!(ImageRgb::new(2, 2, vec![[0; 3]; 3]).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageRgb::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 80, 7]).unwrap();
        let p = dir.path().join("img.png");
        img.save_png(&p).unwrap();
        assert_eq!(ImageRgb::open(&p).unwrap(), img);

        let mask = BinaryMask::new(3, 1, vec![true, false, true]).unwrap();
        let mp = dir.path().join("mask.png");
        mask.save_png(&mp).unwrap();
        assert_eq!(BinaryMask::open(&mp).unwrap(), mask);
        let raw = image::open(&mp).unwrap();
        assert_eq!(raw.color(), image::ColorType::L8);
        assert_eq!(raw.to_luma8().into_raw(), vec![255, 0, 255]);
    }

    #[test]
    fn reads_binary_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.ppm");
        let mut data = b"P6\n2 1\n255\n".to_vec();
        data.extend_from_slice(&[255, 0, 0, 1, 2, 3]);
        std::fs::write(&p, data).unwrap();
        let img = ImageRgb::open(&p).unwrap();
        assert_eq!(img.pixels(), &[[255, 0, 0], [1, 2, 3]]);
    }

    fn mask_strategy(len: usize) -> impl Strategy<Value = BinaryMask> {
        proptest::collection::vec(any::<bool>(), len)
            .prop_map(move |bits| BinaryMask::new(len, 1, bits).unwrap())
    }

    proptest! {
        #[test]
        fn luma_is_monotone(r in 0u8..255, g in 0u8..255, b in 0u8..255, ch in 0usize..3) {
            let p = [r, g, b];
            let mut q = p;
            q[ch] += 1;
            prop_assert!(rgb_to_ycbcr(q).y >= rgb_to_ycbcr(p).y);
        }

        #[test]
        fn luma_matches_ycbcr(r: u8, g: u8, b: u8) {
            prop_assert_eq!(rgb_to_luma([r, g, b]), rgb_to_ycbcr([r, g, b]).y);
        }

        #[test]
        fn mask_and_algebra(
            (a, b, c) in (1usize..40).prop_flat_map(|n| (mask_strategy(n), mask_strategy(n), mask_strategy(n)))
        ) {
            let ab = mask_and(&a, &b).unwrap();
            prop_assert_eq!(&ab, &mask_and(&b, &a).unwrap());
            prop_assert_eq!(
                mask_and(&ab, &c).unwrap(),
                mask_and(&a, &mask_and(&b, &c).unwrap()).unwrap()
            );
            prop_assert_eq!(&mask_and(&a, &a).unwrap(), &a);
            prop_assert!(ab.popcount() <= a.popcount().min(b.popcount()));
        }
    }
}
