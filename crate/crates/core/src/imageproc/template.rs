use super::{FloatMap, GrayImage, ImageError, Result};

/// Euclidean distance between `template` and the window of `img` at `(x, y)`.
pub fn window_distance(img: &GrayImage, template: &GrayImage, x: usize, y: usize) -> f64 {
    let tw = template.width();
    let mut acc = 0u64;
    for ty in 0..template.height() {
        let row = &img.row(y + ty)[x..x + tw];
        for (&a, &b) in row.iter().zip(template.row(ty)) {
            let d = a as i64 - b as i64;
            acc += (d * d) as u64;
        }
    }
    (acc as f64).sqrt()
}

/// Distance of `template` to every window whose top-left corner lies on the
/// `stride` grid. Cell `(i, j)` holds the window at `(j * stride, i * stride)`.
pub fn template_distance_map(img: &GrayImage, template: &GrayImage, stride: usize) -> Result<FloatMap> {
    let (w, h, tw, th) = (img.width(), img.height(), template.width(), template.height());
    if tw > w || th > h {
        return Err(ImageError::TooSmall {
            op: "template_distance_map",
            need_w: tw,
            need_h: th,
            found_w: w,
            found_h: h,
        });
    }
    let stride = stride.max(1);
    let (cols, rows) = ((w - tw) / stride + 1, (h - th) / stride + 1);
    let mut out = FloatMap::zeros(cols, rows);
    for i in 0..rows {
        for j in 0..cols {
            out.set(j, i, window_distance(img, template, j * stride, i * stride));
        }
    }
    Ok(out)
}
