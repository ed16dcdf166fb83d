use super::{DataError, ManifestRecord, Result};
use crate::geom::{BBox, Side};
use crate::imageproc::BinaryMask;

/// Side of the square marked around each joint centre.
pub const CENTER_BOX: i64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// `CENTER_BOX` square about each annotated centre.
    Center,
    /// Annotated ROI, scaled from the original raster to the canvas.
    Roi,
}

/// Boxes a record contributes to its mask, at canvas scale.
pub fn mask_boxes(rec: &ManifestRecord, mode: MaskMode, canvas: (usize, usize)) -> Result<Vec<(Side, BBox)>> {
    Side::BOTH
        .iter()
        .map(|&side| {
            let k = rec.knee(side);
            let missing = |what| DataError::MissingAnnotation {
                image: rec.image.clone(),
                what,
            };
            let b = match mode {
                MaskMode::Center => {
                    let (x, y) = k.center.ok_or_else(|| missing("centre"))?;
                    BBox::centered(x, y, CENTER_BOX, CENTER_BOX)
                }
                MaskMode::Roi => k.roi.ok_or_else(|| missing("roi"))?.scale(
                    canvas.0 as f64 / rec.width as f64,
                    canvas.1 as f64 / rec.height as f64,
                ),
            };
            Ok((side, b))
        })
        .collect()
}

/// Mask of one record on a `canvas` raster; boxes are clamped at borders.
pub fn make_mask(rec: &ManifestRecord, mode: MaskMode, canvas: (usize, usize)) -> Result<BinaryMask> {
    let mut mask = BinaryMask::empty(canvas.0, canvas.1);
    for (_, b) in mask_boxes(rec, mode, canvas)? {
        mask.fill_rect(b);
    }
    Ok(mask)
}

/// Masks for every record that carries the needed annotation.
#[derive(Debug, Clone)]
pub struct MaskSet {
    /// `(record index, mask)`.
    pub masks: Vec<(usize, BinaryMask)>,
    /// `(record index, reason)` for records left out.
    pub skipped: Vec<(usize, String)>,
}

pub fn make_masks(records: &[ManifestRecord], mode: MaskMode, canvas: (usize, usize)) -> MaskSet {
    let mut set = MaskSet {
        masks: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, r) in records.iter().enumerate() {
        match make_mask(r, mode, canvas) {
            Ok(m) => set.masks.push((i, m)),
            Err(e) => {
                log::warn!("skipping mask for `{}`: {e}", r.image);
                set.skipped.push((i, e.to_string()));
            }
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::KneeAnnotation;
    use crate::imageproc::connected_components;

    fn rec(left: (f64, f64), right: (f64, f64)) -> ManifestRecord {
        ManifestRecord {
            image: "x.pgm".into(),
            width: 512,
            height: 512,
            left: KneeAnnotation {
                grade: Some(0),
                center: Some(left),
                roi: Some(BBox::new(300, 200, 160, 100)),
            },
            right: KneeAnnotation {
                grade: Some(0),
                center: Some(right),
                roi: Some(BBox::new(40, 200, 160, 100)),
            },
        }
    }

    #[test]
    fn center_boxes() {
        let m = make_mask(&rec((128.0, 128.0), (60.0, 60.0)), MaskMode::Center, (256, 256)).unwrap();
        assert_eq!(m.count(), 800);
        let m = make_mask(&rec((5.0, 5.0), (60.0, 60.0)), MaskMode::Center, (256, 256)).unwrap();
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert!(comps[1].area < 400);
    }

    #[test]
    fn roi_scaled_to_canvas() {
        let m = make_mask(&rec((1.0, 1.0), (1.0, 1.0)), MaskMode::Roi, (256, 256)).unwrap();
        let boxes: Vec<BBox> = connected_components(&m).iter().map(|c| c.bbox).collect();
        assert_eq!(boxes, vec![BBox::new(20, 100, 80, 50), BBox::new(150, 100, 80, 50)]);
    }

    #[test]
    fn missing_annotation_skips() {
        let mut r = rec((1.0, 1.0), (1.0, 1.0));
        r.left.roi = None;
        let set = make_masks(&[r], MaskMode::Roi, (256, 256));
        assert!(set.masks.is_empty());
        assert_eq!(set.skipped.len(), 1);
    }
}
