use super::{LocateError, Result};
use crate::geom::BBox;
use crate::imageproc::{resize, GrayImage, Interp};

/// Quantifier input: 200 rows by 300 columns.
pub const ROI_WIDTH: usize = 300;
pub const ROI_HEIGHT: usize = 200;

/// Crop `bbox` (clamped to the image) and resize it bilinearly to
/// `width x height`.
pub fn extract_roi(original: &GrayImage, bbox: BBox, width: usize, height: usize) -> Result<GrayImage> {
    let clamped = bbox
        .clamp_to(original.width(), original.height())
        .ok_or(LocateError::EmptyCrop(bbox))?;
    let crop = original.crop(clamped)?;
    Ok(resize(&crop, width, height, Interp::Bilinear)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_image_is_plain_resize() {
        let img = GrayImage::from_fn(60, 40, |x, y| (x * 3 + y) as u8);
        let roi = extract_roi(&img, BBox::new(0, 0, 60, 40), ROI_WIDTH, ROI_HEIGHT).unwrap();
        assert_eq!(roi, resize(&img, ROI_WIDTH, ROI_HEIGHT, Interp::Bilinear).unwrap());
    }

    #[test]
    fn overhanging_box_is_clamped() {
        let img = GrayImage::from_fn(60, 40, |x, y| (x * 3 + y) as u8);
        let roi = extract_roi(&img, BBox::new(40, 10, 50, 20), ROI_WIDTH, ROI_HEIGHT).unwrap();
        assert_eq!((roi.width(), roi.height()), (ROI_WIDTH, ROI_HEIGHT));
        assert!(extract_roi(&img, BBox::new(60, 0, 5, 5), 3, 2).is_err());
    }
}
