use super::{Detection, KneeDetections, LocateError, Method, Result};
use crate::geom::{BBox, Side};
use crate::imageproc::{
    hist_equalize, label_components, otsu_binarize_map, resize, standardized_batch, FloatMap, GrayImage, ImageError, Interp,
};
use crate::nn::Network;

/// Fixed region cut around each up-scaled centre: the working raster maps
/// onto a `canvas`, and a `region` box (both `(w, h)`) is taken there.
/// Boxes are then expressed in original pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterRegion {
    pub canvas: (usize, usize),
    pub region: (usize, usize),
}

impl Default for CenterRegion {
    fn default() -> Self {
        Self {
            canvas: (2560, 2560),
            region: (640, 560),
        }
    }
}

/// Working raster fed to a localisation network: equalized, then resized
/// bilinearly to `size` (`(w, h)`).
pub fn fcn_input(img: &GrayImage, size: (usize, usize)) -> Result<GrayImage> {
    Ok(resize(&hist_equalize(img), size.0, size.1, Interp::Bilinear)?)
}

/// Preprocess, run inference and return the first head's map at input
/// resolution.
pub fn fcn_heatmap(img: &GrayImage, net: &Network<f32>) -> Result<FloatMap> {
    let [_, h, w] = net.spec().input_shape;
    let work = fcn_input(img, (w, h))?;
    let x = standardized_batch::<f32>(&[&work])?;
    let out = net.predict(&x)?;
    let (_, map) = out
        .heads
        .first()
        .ok_or_else(|| LocateError::InvalidInput("network has no heads".into()))?;
    if map.shape() != [1, 1, h, w] {
        return Err(LocateError::InvalidInput(format!(
            "heatmap shape {:?} does not match the {w}x{h} input",
            map.shape()
        )));
    }
    Ok(FloatMap::new(w, h, map.data().iter().map(|&v| v as f64).collect())?)
}

/// The two largest Otsu regions: `(bbox, centre, mean activation)` with
/// the centre in continuous coordinates (pixel `i` spans `[i, i + 1)`).
fn top_two(heatmap: &FloatMap) -> Result<[(BBox, (f64, f64), f64); 2]> {
    let failure = |found| LocateError::Failure {
        found,
        heatmap: Box::new(heatmap.clone()),
    };
    let mask = match otsu_binarize_map(heatmap) {
        Ok(m) => m,
        Err(ImageError::Degenerate(_)) => return Err(failure(0)),
        Err(e) => return Err(e.into()),
    };
    let lab = label_components(&mask);
    if lab.components.len() < 2 {
        return Err(failure(lab.components.len()));
    }
    let mut sums = [0.0f64; 2];
    for (&l, &v) in lab.labels.iter().zip(heatmap.data()) {
        if l == 1 || l == 2 {
            sums[l as usize - 1] += v;
        }
    }
    let pick = |i: usize| {
        let c = &lab.components[i];
        (c.bbox, (c.centroid.0 + 0.5, c.centroid.1 + 0.5), sums[i] / c.area as f64)
    };
    Ok([pick(0), pick(1)])
}

fn pair(dets: [Detection; 2]) -> Result<KneeDetections> {
    let [a, b] = dets;
    KneeDetections::from_pair(a, b)
}

/// Centres of the two largest regions, each with a fixed-size box.
pub fn localize_centers_from_heatmap(
    heatmap: &FloatMap,
    original: (usize, usize),
    region: &CenterRegion,
) -> Result<KneeDetections> {
    let (ww, wh) = (heatmap.width() as f64, heatmap.height() as f64);
    let (cw, ch) = region.canvas;
    let to_original = (original.0 as f64 / cw as f64, original.1 as f64 / ch as f64);
    let dets = top_two(heatmap)?.map(|(_, center, score)| {
        let on_canvas = BBox::centered(
            center.0 * cw as f64 / ww,
            center.1 * ch as f64 / wh,
            region.region.0 as i64,
            region.region.1 as i64,
        );
        let bbox = on_canvas
            .clamp_to(cw, ch)
            .map(|b| b.scale(to_original.0, to_original.1))
            .and_then(|b| b.clamp_to(original.0, original.1))
            .unwrap_or(BBox::new(0, 0, 0, 0));
        Detection {
            side: Side::from_image_x(center.0, heatmap.width()),
            center,
            bbox,
            score,
            method: Method::FcnCenter,
        }
    });
    if let Some(d) = dets.iter().find(|d| d.bbox.is_empty()) {
        return Err(LocateError::EmptyCrop(d.bbox));
    }
    pair(dets)
}

/// Bounding boxes of the two largest regions, up-scaled per axis to the
/// original raster.
pub fn localize_roi_from_heatmap(heatmap: &FloatMap, original: (usize, usize)) -> Result<KneeDetections> {
    let sx = original.0 as f64 / heatmap.width() as f64;
    let sy = original.1 as f64 / heatmap.height() as f64;
    let mut out = Vec::with_capacity(2);
    for (bbox, _, score) in top_two(heatmap)? {
        let up = bbox.scale(sx, sy);
        let clamped = up.clamp_to(original.0, original.1).ok_or(LocateError::EmptyCrop(up))?;
        let center = bbox.center();
        out.push(Detection {
            side: Side::from_image_x(center.0, heatmap.width()),
            center,
            bbox: clamped,
            score,
            method: Method::FcnRoi,
        });
    }
    let b = out.pop().expect("two regions");
    KneeDetections::from_pair(out.pop().expect("two regions"), b)
}

pub fn fcn_localize_centers(img: &GrayImage, net: &Network<f32>, region: &CenterRegion) -> Result<KneeDetections> {
    let heat = fcn_heatmap(img, net)?;
    localize_centers_from_heatmap(&heat, (img.width(), img.height()), region)
}

pub fn fcn_localize_roi(img: &GrayImage, net: &Network<f32>) -> Result<KneeDetections> {
    let heat = fcn_heatmap(img, net)?;
    localize_roi_from_heatmap(&heat, (img.width(), img.height()))
}
