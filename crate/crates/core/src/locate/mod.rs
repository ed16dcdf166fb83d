//! Knee-joint localisation: template matching, a Sobel-feature linear SVM
//! with a sliding window, and FCN heatmaps (joint centres or whole ROIs).
//!
//! Every method returns one detection per knee or a typed error. Detection
//! centres are in the pixels of the raster the detector ran on; boxes are
//! in the pixels of the original radiograph.

mod fcn;
mod records;
mod roi;
mod svm;
mod template;
mod train;

pub use fcn::{
    fcn_heatmap, fcn_input, fcn_localize_centers, fcn_localize_roi, localize_centers_from_heatmap, localize_roi_from_heatmap,
    CenterRegion,
};
pub use records::{read_detections, write_detections, DetectionRecord};
pub use roi::{extract_roi, ROI_HEIGHT, ROI_WIDTH};
pub use svm::{
    collect_svm_samples, hinge_objective, sobel_features, svm_detect, train_svm, LinearModel, SvmConfig, SvmDetectConfig,
    SvmTraining, SOBEL_SCALE,
};
pub use train::{evaluate_fcn, fcn_samples, train_fcn, FcnSamples, FcnTrainConfig};
pub use template::{extract_templates, locate_templates, match_templates, preprocess_downscale, TemplateConfig};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geom::{BBox, Side};
use crate::imageproc::{FloatMap, ImageError};
use crate::nn::NnError;

/// Localisation method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Template,
    Svm,
    FcnCenter,
    FcnRoi,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Template => "template",
            Method::Svm => "svm",
            Method::FcnCenter => "fcn-center",
            Method::FcnRoi => "fcn-roi",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "template" => Ok(Method::Template),
            "svm" => Ok(Method::Svm),
            "fcn-center" => Ok(Method::FcnCenter),
            "fcn-roi" => Ok(Method::FcnRoi),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

/// One localised knee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub side: Side,
    /// Centre in the detector's working raster.
    pub center: (f64, f64),
    /// Region in the original radiograph, clamped to its bounds.
    pub bbox: BBox,
    /// SVM margin, mean FCN activation, or negated template distance.
    pub score: f64,
    pub method: Method,
}

/// The two knees of one radiograph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeDetections {
    pub left: Detection,
    pub right: Detection,
}

impl KneeDetections {
    /// Order two detections by their sides; both sides must be present.
    pub fn from_pair(a: Detection, b: Detection) -> Result<Self> {
        match (a.side, b.side) {
            (Side::Left, Side::Right) => Ok(Self { left: a, right: b }),
            (Side::Right, Side::Left) => Ok(Self { left: b, right: a }),
            (s, _) => Err(LocateError::SideConflict(s)),
        }
    }

    pub fn get(&self, side: Side) -> &Detection {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Detection> {
        [&self.left, &self.right].into_iter()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LocateError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{what}: {found_w}x{found_h} raster is smaller than the {need_w}x{need_h} window")]
    TooSmall {
        what: &'static str,
        need_w: usize,
        need_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("svm training needs both classes, found only {0}")]
    SingleClass(&'static str),
    #[error("{0}")]
    InvalidInput(String),
    #[error("localisation failed: {found} region(s) after thresholding, 2 needed")]
    Failure { found: usize, heatmap: Box<FloatMap> },
    #[error("both detected regions lie on the {0} side")]
    SideConflict(Side),
    #[error("box {0} does not intersect the image")]
    EmptyCrop(BBox),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LocateError>;

/// Fixed-size box about `center` (scaled by `scale`), clamped to the image.
pub(crate) fn region_about(
    center: (f64, f64),
    scale: (f64, f64),
    region: (usize, usize),
    bounds: (usize, usize),
) -> Result<BBox> {
    let b = BBox::centered(center.0 * scale.0, center.1 * scale.1, region.0 as i64, region.1 as i64);
    b.clamp_to(bounds.0, bounds.1).ok_or(LocateError::EmptyCrop(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(side: Side) -> Detection {
        Detection {
            side,
            center: (0.0, 0.0),
            bbox: BBox::new(0, 0, 1, 1),
            score: 0.0,
            method: Method::Svm,
        }
    }

    #[test]
    fn pair_ordering() {
        let p = KneeDetections::from_pair(det(Side::Right), det(Side::Left)).unwrap();
        assert_eq!(p.left.side, Side::Left);
        assert!(KneeDetections::from_pair(det(Side::Left), det(Side::Left)).is_err());
    }

    #[test]
    fn method_roundtrip() {
        for m in [Method::Template, Method::Svm, Method::FcnCenter, Method::FcnRoi] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn region_clamps() {
        let b = region_about((5.0, 5.0), (10.0, 10.0), (700, 500), (1000, 1000)).unwrap();
        assert_eq!(b, BBox::new(0, 0, 400, 300));
    }
}
