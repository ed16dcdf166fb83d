//! Classical raster operations on 8-bit grayscale images.
//!
//! Three raster types share the same row-major layout: [`GrayImage`]
//! (radiographs, templates, crops), [`FloatMap`] (gradients, heatmaps,
//! distance grids) and [`BinaryMask`] (annotations, thresholded maps).

mod components;
mod ops;
mod otsu;
mod pgm;
mod template;

pub use components::{connected_components, label_components, Component, Labeling};
pub use ops::{hflip, hist_equalize, histogram, resize, resize_map, resize_mask, sobel_horizontal, Interp};
pub use otsu::{binarize, otsu_binarize_map, otsu_threshold, otsu_threshold_hist, otsu_threshold_map, MapThreshold};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use template::{template_distance_map, window_distance};

use crate::geom::BBox;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("{width}x{height} raster needs {expected} values, found {found}")]
    DataLength {
        width: usize,
        height: usize,
        expected: usize,
        found: usize,
    },
    #[error("raster extents must be positive, found {0}x{1}")]
    ZeroExtent(usize, usize),
    #[error("{op}: needs at least {need_w}x{need_h}, found {found_w}x{found_h}")]
    TooSmall {
        op: &'static str,
        need_w: usize,
        need_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("{op}: raster sizes differ ({a_w}x{a_h} vs {b_w}x{b_h})")]
    SizeMismatch {
        op: &'static str,
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
    #[error("{0}: input has a single level")]
    Degenerate(&'static str),
    #[error("box {0} does not intersect the image")]
    OutOfBounds(BBox),
    #[error("pgm: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ImageError>;

fn check_len(width: usize, height: usize, found: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(ImageError::ZeroExtent(width, height));
    }
    if width * height != found {
        return Err(ImageError::DataLength {
            width,
            height,
            expected: width * height,
            found,
        });
    }
    Ok(())
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_len(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    /// # Panics
    /// If either extent is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "raster extents must be positive");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// # Panics
    /// If either extent is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut img = Self::filled(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                img.pixels[y * width + x] = f(x, y);
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Copy of the part of `bbox` that lies inside the image.
    pub fn crop(&self, bbox: BBox) -> Result<GrayImage> {
        let b = bbox
            .clamp_to(self.width, self.height)
            .ok_or(ImageError::OutOfBounds(bbox))?;
        let (x0, y0, w, h) = (b.x as usize, b.y as usize, b.w as usize, b.h as usize);
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            pixels.extend_from_slice(&self.row(y)[x0..x0 + w]);
        }
        Ok(GrayImage { width: w, height: h, pixels })
    }

    /// Write `patch` with its top-left corner at `(x, y)`, skipping pixels
    /// that fall outside.
    pub fn paste(&mut self, patch: &GrayImage, x: i64, y: i64) {
        for py in 0..patch.height {
            let ty = y + py as i64;
            if ty < 0 || ty >= self.height as i64 {
                continue;
            }
            for px in 0..patch.width {
                let tx = x + px as i64;
                if tx >= 0 && tx < self.width as i64 {
                    self.set(tx as usize, ty as usize, patch.get(px, py));
                }
            }
        }
    }

    /// Intensities scaled to `[0, 1]`.
    pub fn to_unit(&self) -> Vec<f32> {
        self.pixels.iter().map(|&p| p as f32 / 255.0).collect()
    }

    pub fn to_map(&self) -> FloatMap {
        FloatMap {
            width: self.width,
            height: self.height,
            data: self.pixels.iter().map(|&p| p as f64).collect(),
        }
    }
}

/// Real-valued raster.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FloatMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    /// # Panics
    /// If either extent is zero.
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "raster extents must be positive");
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Linear stretch of `[min, max]` onto `0..=255`; constant maps become 0.
    pub fn to_gray(&self) -> GrayImage {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let pixels = self
            .data
            .iter()
            .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// Boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_len(width, height, bits.len())?;
        Ok(Self { width, height, bits })
    }

    /// # Panics
    /// If either extent is zero.
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "raster extents must be positive");
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Set every pixel of `bbox` that lies inside the mask.
    pub fn fill_rect(&mut self, bbox: BBox) {
        if let Some(b) = bbox.clamp_to(self.width, self.height) {
            for y in b.y..b.bottom() {
                for x in b.x..b.right() {
                    self.set(x as usize, y as usize, true);
                }
            }
        }
    }

    /// 0.0 / 1.0 per pixel.
    pub fn to_unit(&self) -> Vec<f32> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn to_map(&self) -> FloatMap {
        FloatMap {
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

/// Stack same-sized images into an `[N, 1, H, W]` tensor, each image
/// shifted and scaled to zero mean and unit variance. Constant images map
/// to zeros.
pub fn standardized_batch<T: Scalar>(images: &[&GrayImage]) -> Result<Tensor<T>> {
    let first = images.first().ok_or(ImageError::ZeroExtent(0, 0))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(images.len() * w * h);
    for img in images {
        if (img.width(), img.height()) != (w, h) {
            return Err(ImageError::SizeMismatch {
                op: "standardized_batch",
                a_w: w,
                a_h: h,
                b_w: img.width(),
                b_h: img.height(),
            });
        }
        let n = img.pixels.len() as f64;
        let mean = img.pixels.iter().map(|&p| p as f64).sum::<f64>() / n;
        let var = img.pixels.iter().map(|&p| (p as f64 - mean).powi(2)).sum::<f64>() / n;
        let inv = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
        data.extend(img.pixels.iter().map(|&p| T::from_f64((p as f64 - mean) * inv)));
    }
    Ok(Tensor::new(&[images.len(), 1, h, w], data).expect("shape matches data"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks_length() {
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
        assert!(matches!(GrayImage::new(0, 2, vec![]), Err(ImageError::ZeroExtent(0, 2))));
        assert!(FloatMap::new(3, 1, vec![0.0; 3]).is_ok());
    }

    #[test]
    fn crop_clamps() {
        let img = GrayImage::from_fn(5, 4, |x, y| (10 * y + x) as u8);
        let c = img.crop(BBox::new(3, 2, 10, 10)).unwrap();
        assert_eq!((c.width(), c.height()), (2, 2));
        assert_eq!(c.pixels(), &[23, 24, 33, 34]);
        assert!(img.crop(BBox::new(5, 0, 3, 3)).is_err());
    }

    #[test]
    fn standardized_rows_have_unit_moments() {
        let a = GrayImage::from_fn(4, 3, |x, y| (x * 20 + y * 7) as u8);
        let b = GrayImage::filled(4, 3, 9);
        let t = standardized_batch::<f64>(&[&a, &b]).unwrap();
        assert_eq!(t.shape(), &[2, 1, 3, 4]);
        let (first, second) = t.data().split_at(12);
        let mean = first.iter().sum::<f64>() / 12.0;
        let var = first.iter().map(|v| v * v).sum::<f64>() / 12.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert!(second.iter().all(|&v| v == 0.0));
        assert!(standardized_batch::<f32>(&[&a, &GrayImage::filled(3, 3, 0)]).is_err());
    }

    #[test]
    fn fill_rect_counts() {
        let mut m = BinaryMask::empty(10, 10);
        m.fill_rect(BBox::new(8, 8, 5, 5));
        assert_eq!(m.count(), 4);
    }
}
