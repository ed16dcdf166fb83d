use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::geom::BBox;

/// One 8-connected region of a mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub area: usize,
    /// Mean `(x, y)` of member pixels.
    pub centroid: (f64, f64),
    pub bbox: BBox,
}

/// Component list plus a label raster: 0 is background, `i + 1` marks
/// pixels of `components[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

/// Label 8-connected regions, ordered by area (descending), then by the
/// top-left corner of the bounding box in raster order.
pub fn label_components(mask: &BinaryMask) -> Labeling {
    let (w, h) = (mask.width(), mask.height());
    let mut raw = vec![0u32; w * h];
    let mut found = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits()[start] || raw[start] != 0 {
            continue;
        }
        let id = found.len() as u32 + 1;
        raw[start] = id;
        stack.push(start);
        let (mut area, mut sx, mut sy) = (0usize, 0u64, 0u64);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            sx += x as u64;
            sy += y as u64;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if mask.bits()[j] && raw[j] == 0 {
                        raw[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        found.push(Component {
            area,
            centroid: (sx as f64 / area as f64, sy as f64 / area as f64),
            bbox: BBox::new(x0 as i64, y0 as i64, (x1 - x0 + 1) as i64, (y1 - y0 + 1) as i64),
        });
    }
    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_by_key(|&i| (Reverse(found[i].area), found[i].bbox.y, found[i].bbox.x));
    let mut relabel = vec![0u32; found.len() + 1];
    for (rank, &i) in order.iter().enumerate() {
        relabel[i + 1] = rank as u32 + 1;
    }
    Labeling {
        labels: raw.into_iter().map(|l| relabel[l as usize]).collect(),
        components: order.into_iter().map(|i| found[i].clone()).collect(),
    }
}

pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    label_components(mask).components
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_moments() {
        let mut m = BinaryMask::empty(50, 50);
        m.fill_rect(BBox::new(10, 10, 20, 20));
        let c = connected_components(&m);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].area, 400);
        assert_eq!(c[0].centroid, (19.5, 19.5));
        assert_eq!(c[0].bbox, BBox::new(10, 10, 20, 20));
    }

    #[test]
    fn sorted_by_area_then_position() {
        let mut m = BinaryMask::empty(60, 60);
        m.fill_rect(BBox::new(0, 0, 10, 10));
        m.fill_rect(BBox::new(30, 30, 20, 20));
        m.fill_rect(BBox::new(0, 40, 10, 10));
        let areas: Vec<_> = connected_components(&m).iter().map(|c| (c.area, c.bbox.y)).collect();
        assert_eq!(areas, vec![(400, 30), (100, 0), (100, 40)]);
    }

    #[test]
    fn diagonal_touch_is_connected() {
        let m = BinaryMask::new(3, 3, vec![true, false, false, false, true, false, false, false, true]).unwrap();
        assert_eq!(connected_components(&m).len(), 1);
        assert!(connected_components(&BinaryMask::empty(4, 4)).is_empty());
    }
}
