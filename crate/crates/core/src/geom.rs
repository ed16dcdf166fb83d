//! Axis-aligned boxes and knee sides.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Integer pixel box: `x, y` top-left, `w, h` extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl BBox {
    pub const fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self { x, y, w, h }
    }

    /// Box of size `w x h` whose centre pixel is `(cx, cy)` rounded.
    pub fn centered(cx: f64, cy: f64, w: i64, h: i64) -> Self {
        Self::new((cx - w as f64 / 2.0).round() as i64, (cy - h as f64 / 2.0).round() as i64, w, h)
    }

    pub fn right(&self) -> i64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i64 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        self.w.max(0) * self.h.max(0)
    }

    pub fn is_empty(&self) -> bool {
        self.w <= 0 || self.h <= 0
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// Part of the box inside a `width x height` image.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<BBox> {
        self.intersection(&BBox::new(0, 0, width as i64, height as i64))
    }

    /// Shift (not shrink) the box so it lies inside the image where it fits.
    pub fn shift_inside(&self, width: usize, height: usize) -> BBox {
        let (w, h) = (width as i64, height as i64);
        let x = self.x.min(w - self.w).max(0);
        let y = self.y.min(h - self.h).max(0);
        BBox::new(x, y, self.w.min(w), self.h.min(h))
    }

    /// Scale edges independently: `x0 = round(x * rx)`, `x1 = round((x + w) * rx)`.
    pub fn scale(&self, rx: f64, ry: f64) -> BBox {
        let x0 = (self.x as f64 * rx).round() as i64;
        let y0 = (self.y as f64 * ry).round() as i64;
        let x1 = (self.right() as f64 * rx).round() as i64;
        let y1 = (self.bottom() as f64 * ry).round() as i64;
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64 && px <= self.right() as f64 && py >= self.y as f64 && py <= self.bottom() as f64
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl FromStr for BBox {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<i64> = s
            .split(',')
            .map(|p| p.trim().parse::<i64>().map_err(|e| format!("bad box `{s}`: {e}")))
            .collect::<Result<_, _>>()?;
        match parts.as_slice() {
            &[x, y, w, h] => Ok(BBox::new(x, y, w, h)),
            _ => Err(format!("box `{s}` needs four comma-separated integers")),
        }
    }
}

/// Knee side in a bilateral radiograph.
///
/// Images are read in the posterior-anterior convention: the patient's
/// right knee appears on the left half of the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    /// Side of a knee whose centre is at `x` in an image of `width` pixels.
    pub fn from_image_x(x: f64, width: usize) -> Side {
        if x < width as f64 / 2.0 {
            Side::Right
        } else {
            Side::Left
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            _ => Err(format!("unknown side `{s}`")),
        }
    }
}
