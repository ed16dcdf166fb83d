use std::cmp::Ordering;

use super::ops::histogram;
use super::{BinaryMask, FloatMap, GrayImage, ImageError, Result};

/// Between-class score of a split, kept as a fraction so candidate splits
/// compare exactly whenever the cross products fit in 128 bits.
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    /// `n0 * n1 * (mu0 - mu1)^2 * N^2 = (n1*s0 - n0*s1)^2 / (n0*n1)`.
    fn new(n0: u64, s0: u64, n1: u64, s1: u64) -> Self {
        let d = (n1 as i128 * s0 as i128 - n0 as i128 * s1 as i128).unsigned_abs();
        Score {
            num: d * d,
            den: n0 as u128 * n1 as u128,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        match (self.num.checked_mul(other.den), other.num.checked_mul(self.den)) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => (self.num as f64 / self.den as f64).total_cmp(&(other.num as f64 / other.den as f64)),
        }
    }
}

/// Otsu threshold of a 256-bin histogram.
///
/// Returns the lowest `t` maximising between-class variance for the split
/// `{v <= t} | {v > t}`.
pub fn otsu_threshold_hist(hist: &[u64; 256]) -> Result<u8> {
    let total: u64 = hist.iter().sum();
    let sum: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best: Option<(u8, Score)> = None;
    for t in 0..255usize {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let score = Score::new(n0, s0, n1, sum - s0);
        if best.as_ref().map_or(true, |(_, b)| score.cmp(b) == Ordering::Greater) {
            best = Some((t as u8, score));
        }
    }
    best.map(|(t, _)| t).ok_or(ImageError::Degenerate("otsu_threshold"))
}

pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    otsu_threshold_hist(&histogram(img))
}

/// Pixels strictly above `t`.
pub fn binarize(img: &GrayImage, t: u8) -> BinaryMask {
    let bits = img.pixels().iter().map(|&p| p > t).collect();
    BinaryMask::new(img.width(), img.height(), bits).expect("same extents")
}

/// Otsu split of a real-valued map quantised into 256 bins over its range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapThreshold {
    pub bin: u8,
    pub min: f64,
    pub max: f64,
}

impl MapThreshold {
    pub fn bin_of(&self, v: f64) -> u8 {
        ((v - self.min) / (self.max - self.min) * 255.0).round().clamp(0.0, 255.0) as u8
    }

    /// Upper edge of the threshold bin in value space.
    pub fn value(&self) -> f64 {
        self.min + (self.bin as f64 + 0.5) / 255.0 * (self.max - self.min)
    }

    pub fn is_foreground(&self, v: f64) -> bool {
        self.bin_of(v) > self.bin
    }
}

pub fn otsu_threshold_map(map: &FloatMap) -> Result<MapThreshold> {
    let (min, max) = map.min_max();
    if !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(ImageError::Degenerate("otsu_threshold_map"));
    }
    let mut th = MapThreshold { bin: 0, min, max };
    let mut hist = [0u64; 256];
    for &v in map.data() {
        hist[th.bin_of(v) as usize] += 1;
    }
    th.bin = otsu_threshold_hist(&hist)?;
    Ok(th)
}

pub fn otsu_binarize_map(map: &FloatMap) -> Result<BinaryMask> {
    let th = otsu_threshold_map(map)?;
    let bits = map.data().iter().map(|&v| th.is_foreground(v)).collect();
    BinaryMask::new(map.width(), map.height(), bits)
}
