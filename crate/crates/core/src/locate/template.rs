use super::{region_about, Detection, KneeDetections, LocateError, Method, Result};
use crate::geom::{BBox, Side};
use crate::imageproc::{hist_equalize, resize, template_distance_map, GrayImage, Interp};

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateConfig {
    /// Window step in working pixels.
    pub stride: usize,
    /// Extracted region `(w, h)` in original pixels.
    pub region: (usize, usize),
    /// Working raster size relative to the original.
    pub downscale: f64,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            stride: 10,
            region: (700, 500),
            downscale: 0.1,
        }
    }
}

/// Downscale by `factor` (bilinear) and equalise.
pub fn preprocess_downscale(img: &GrayImage, factor: f64) -> Result<GrayImage> {
    let w = ((img.width() as f64 * factor).round() as usize).max(1);
    let h = ((img.height() as f64 * factor).round() as usize).max(1);
    Ok(hist_equalize(&resize(img, w, h, Interp::Bilinear)?))
}

/// Patches of `size` centred on the given points of a working raster.
pub fn extract_templates(samples: &[(&GrayImage, (f64, f64))], size: usize) -> Result<Vec<GrayImage>> {
    samples
        .iter()
        .map(|(img, (cx, cy))| {
            let b = BBox::centered(*cx, *cy, size as i64, size as i64).shift_inside(img.width(), img.height());
            Ok(img.crop(b)?)
        })
        .collect()
}

/// Best window of one half: `(x, y, distance)` of its top-left corner.
fn best_window(half: &GrayImage, templates: &[GrayImage], stride: usize) -> Result<(usize, usize, f64)> {
    let mut best: Option<crate::imageproc::FloatMap> = None;
    for t in templates {
        let d = template_distance_map(half, t, stride)?;
        best = Some(match best {
            None => d,
            Some(mut acc) => {
                for (a, &v) in acc.data_mut().iter_mut().zip(d.data()) {
                    *a = a.min(v);
                }
                acc
            }
        });
    }
    let map = best.ok_or_else(|| LocateError::InvalidInput("at least one template is required".into()))?;
    let (mut bi, mut bv) = (0, f64::INFINITY);
    for (i, &v) in map.data().iter().enumerate() {
        if v < bv {
            (bi, bv) = (i, v);
        }
    }
    Ok(((bi % map.width()) * stride, (bi / map.width()) * stride, bv))
}

/// Match templates on each half of a preprocessed image.
///
/// `original` is the `(w, h)` of the radiograph the working raster was
/// derived from; regions are placed and clamped there.
pub fn match_templates(
    img: &GrayImage,
    templates: &[GrayImage],
    original: (usize, usize),
    cfg: &TemplateConfig,
) -> Result<KneeDetections> {
    let first = templates
        .first()
        .ok_or_else(|| LocateError::InvalidInput("at least one template is required".into()))?;
    if templates.iter().any(|t| (t.width(), t.height()) != (first.width(), first.height())) {
        return Err(LocateError::InvalidInput("templates must share one size".into()));
    }
    let (tw, th) = (first.width(), first.height());
    let mid = img.width() / 2;
    let halves = [(0, mid), (mid, img.width() - mid)];
    if halves.iter().any(|&(_, w)| w < tw) || img.height() < th {
        return Err(LocateError::TooSmall {
            what: "image half",
            need_w: tw,
            need_h: th,
            found_w: mid,
            found_h: img.height(),
        });
    }
    let scale = (original.0 as f64 / img.width() as f64, original.1 as f64 / img.height() as f64);
    let mut dets = Vec::with_capacity(2);
    for (x0, w) in halves {
        let half = img.crop(BBox::new(x0 as i64, 0, w as i64, img.height() as i64))?;
        let (x, y, dist) = best_window(&half, templates, cfg.stride.max(1))?;
        let center = ((x0 + x) as f64 + tw as f64 / 2.0, y as f64 + th as f64 / 2.0);
        dets.push(Detection {
            side: Side::from_image_x(center.0, img.width()),
            center,
            bbox: region_about(center, scale, cfg.region, original)?,
            score: -dist,
            method: Method::Template,
        });
    }
    let right = dets.pop().expect("two halves");
    KneeDetections::from_pair(dets.pop().expect("two halves"), right)
}

/// Preprocess an original radiograph and match templates on it.
pub fn locate_templates(original: &GrayImage, templates: &[GrayImage], cfg: &TemplateConfig) -> Result<KneeDetections> {
    let work = preprocess_downscale(original, cfg.downscale)?;
    match_templates(&work, templates, (original.width(), original.height()), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 31 + y * 17 + (x * y) % 7) % 97) as u8)
    }

    #[test]
    fn planted_templates_found_on_both_sides() {
        let mut img = textured(120, 60);
        let plant = GrayImage::from_fn(20, 20, |x, y| if (x / 5 + y / 5) % 2 == 0 { 250 } else { 160 });
        img.paste(&plant, 20, 30);
        img.paste(&plant, 80, 10);
        let cfg = TemplateConfig::default();
        let d = match_templates(&img, &[plant], (1200, 600), &cfg).unwrap();
        assert_eq!(d.right.center, (30.0, 40.0));
        assert_eq!(d.left.center, (90.0, 20.0));
        assert_eq!(d.left.score, 0.0);
        assert_eq!(d.right.bbox, BBox::new(-50, 150, 700, 500).clamp_to(1200, 600).unwrap());
    }

    #[test]
    fn half_smaller_than_window() {
        let img = textured(30, 30);
        let t = GrayImage::filled(20, 20, 0);
        assert!(matches!(
            match_templates(&img, &[t], (30, 30), &TemplateConfig::default()),
            Err(LocateError::TooSmall { .. })
        ));
        assert!(match_templates(&img, &[], (30, 30), &TemplateConfig::default()).is_err());
    }
}
