use super::{BinaryMask, FloatMap, GrayImage, ImageError, Result};

/// Resampling kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    /// Half-pixel-centred bilinear interpolation with edge clamping.
    Bilinear,
    /// Source pixel `floor(dst * in / out)`.
    Nearest,
}

/// 256-bin intensity histogram.
pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &p in img.pixels() {
        h[p as usize] += 1;
    }
    h
}

/// Global histogram equalisation through the normalised CDF.
///
/// `h(v) = round((cdf(v) - cdf_min) / (N - cdf_min) * 255)`, where
/// `cdf_min` is the CDF at the darkest occupied level. Single-level images
/// are returned unchanged.
pub fn hist_equalize(img: &GrayImage) -> GrayImage {
    let hist = histogram(img);
    let n = img.pixels().len() as u64;
    let mut cdf = [0u64; 256];
    let mut acc = 0;
    for (c, &h) in cdf.iter_mut().zip(&hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf[hist.iter().position(|&h| h > 0).expect("image is non-empty")];
    if cdf_min == n {
        return img.clone();
    }
    let denom = (n - cdf_min) as f64;
    let lut: Vec<u8> = cdf
        .iter()
        .map(|&c| ((c.saturating_sub(cdf_min)) as f64 / denom * 255.0).round() as u8)
        .collect();
    let pixels = img.pixels().iter().map(|&p| lut[p as usize]).collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("same extents")
}

fn bilinear_taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

fn nearest_tap(dst: usize, src_len: usize, dst_len: usize) -> usize {
    (dst * src_len / dst_len).min(src_len - 1)
}

fn resample(src: &[f64], w: usize, h: usize, nw: usize, nh: usize, interp: Interp) -> Vec<f64> {
    let mut out = Vec::with_capacity(nw * nh);
    match interp {
        Interp::Nearest => {
            let cols: Vec<usize> = (0..nw).map(|x| nearest_tap(x, w, nw)).collect();
            for y in 0..nh {
                let row = &src[nearest_tap(y, h, nh) * w..];
                out.extend(cols.iter().map(|&c| row[c]));
            }
        }
        Interp::Bilinear => {
            let cols: Vec<_> = (0..nw).map(|x| bilinear_taps(x, w, nw)).collect();
            for y in 0..nh {
                let (y0, y1, fy) = bilinear_taps(y, h, nh);
                let (r0, r1) = (&src[y0 * w..(y0 + 1) * w], &src[y1 * w..(y1 + 1) * w]);
                for &(x0, x1, fx) in &cols {
                    let top = r0[x0] * (1.0 - fx) + r0[x1] * fx;
                    let bottom = r1[x0] * (1.0 - fx) + r1[x1] * fx;
                    out.push(top * (1.0 - fy) + bottom * fy);
                }
            }
        }
    }
    out
}

fn check_target(new_w: usize, new_h: usize) -> Result<()> {
    if new_w == 0 || new_h == 0 {
        return Err(ImageError::ZeroExtent(new_w, new_h));
    }
    Ok(())
}

/// Resize an image; bilinear values are rounded to the nearest level.
pub fn resize(img: &GrayImage, new_w: usize, new_h: usize, interp: Interp) -> Result<GrayImage> {
    check_target(new_w, new_h)?;
    if (new_w, new_h) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    let src: Vec<f64> = img.pixels().iter().map(|&p| p as f64).collect();
    let pixels = resample(&src, img.width(), img.height(), new_w, new_h, interp)
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(new_w, new_h, pixels)
}

pub fn resize_map(map: &FloatMap, new_w: usize, new_h: usize, interp: Interp) -> Result<FloatMap> {
    check_target(new_w, new_h)?;
    FloatMap::new(new_w, new_h, resample(map.data(), map.width(), map.height(), new_w, new_h, interp))
}

/// Nearest-neighbour resize, the only kernel that keeps a mask binary.
pub fn resize_mask(mask: &BinaryMask, new_w: usize, new_h: usize) -> Result<BinaryMask> {
    check_target(new_w, new_h)?;
    let (w, h) = (mask.width(), mask.height());
    let cols: Vec<usize> = (0..new_w).map(|x| nearest_tap(x, w, new_w)).collect();
    let mut bits = Vec::with_capacity(new_w * new_h);
    for y in 0..new_h {
        let sy = nearest_tap(y, h, new_h);
        bits.extend(cols.iter().map(|&c| mask.get(c, sy)));
    }
    BinaryMask::new(new_w, new_h, bits)
}

/// Mirror columns.
pub fn hflip(img: &GrayImage) -> GrayImage {
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for y in 0..img.height() {
        pixels.extend(img.row(y).iter().rev());
    }
    GrayImage::new(img.width(), img.height(), pixels).expect("same extents")
}

const SOBEL_H: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Response to horizontal edges (intensity change along y).
///
/// Positive where intensity increases downwards. The one-pixel frame,
/// where the 3x3 window would leave the image, is set to zero.
pub fn sobel_horizontal(img: &GrayImage) -> Result<FloatMap> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(ImageError::TooSmall {
            op: "sobel_horizontal",
            need_w: 3,
            need_h: 3,
            found_w: w,
            found_h: h,
        });
    }
    let mut out = FloatMap::zeros(w, h);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let mut acc = 0.0;
            for (ky, krow) in SOBEL_H.iter().enumerate() {
                for (kx, &k) in krow.iter().enumerate() {
                    acc += k * img.get(x + kx - 1, y + ky - 1) as f64;
                }
            }
            out.set(x, y, acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equalize_spread_levels_unchanged() {
        let img = GrayImage::new(2, 2, vec![0, 85, 170, 255]).unwrap();
        assert_eq!(hist_equalize(&img), img);
        let flat = GrayImage::filled(4, 3, 77);
        assert_eq!(hist_equalize(&flat), flat);
    }

    #[test]
    fn equalize_stretches_narrow_range() {
        let img = GrayImage::new(4, 1, vec![100, 101, 102, 103]).unwrap();
        assert_eq!(hist_equalize(&img).pixels(), &[0, 85, 170, 255]);
    }

    #[test]
    fn nearest_upscale_replicates_blocks() {
        let img = GrayImage::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        let up = resize(&img, 4, 4, Interp::Nearest).unwrap();
        assert_eq!(up.pixels(), &[1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4]);
    }

    #[test]
    fn bilinear_halving_averages_quads() {
        let img = GrayImage::from_fn(4, 4, |x, y| (x * 10 + y * 40) as u8);
        let down = resize(&img, 2, 2, Interp::Bilinear).unwrap();
        assert_eq!(down.pixels(), &[25, 45, 105, 125]);
    }

    #[test]
    fn flip_row() {
        let img = GrayImage::new(3, 1, vec![1, 2, 3]).unwrap();
        assert_eq!(hflip(&img).pixels(), &[3, 2, 1]);
    }

    #[test]
    fn sobel_step_edge() {
        let img = GrayImage::from_fn(8, 8, |_, y| if y < 4 { 0 } else { 255 });
        let g = sobel_horizontal(&img).unwrap();
        assert_eq!(g.get(4, 3), 1020.0);
        assert_eq!(g.get(4, 4), 1020.0);
        assert_eq!(g.get(4, 2), 0.0);
        let flat = sobel_horizontal(&GrayImage::filled(5, 5, 9)).unwrap();
        assert!(flat.data().iter().all(|&v| v == 0.0));
        assert!(sobel_horizontal(&GrayImage::filled(2, 5, 0)).is_err());
    }
}
