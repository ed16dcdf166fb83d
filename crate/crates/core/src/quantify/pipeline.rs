use std::path::Path;

use super::predict::{mode_of, predict_batch};
use super::train::canonical;
use super::{KneePrediction, Mode, QuantifyError, Result};
use crate::imageproc::GrayImage;
use crate::locate::{
    extract_roi, fcn_localize_centers, fcn_localize_roi, CenterRegion, Detection, LocateError, ROI_HEIGHT, ROI_WIDTH,
};
use crate::nn::{load_checkpoint, HeadLoss, Network};

/// Detection and grade of one knee.
#[derive(Debug, Clone, PartialEq)]
pub struct KneeResult {
    pub detection: Detection,
    pub prediction: KneePrediction,
}

/// A localisation network and a quantifier, ready to grade radiographs.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub fcn: Network<f32>,
    pub cnn: Network<f32>,
    pub mode: Mode,
    /// `None` reads the FCN output as ROI masks; `Some` as centre blobs
    /// with fixed-size regions.
    pub centers: Option<CenterRegion>,
}

impl Pipeline {
    pub fn new(fcn: Network<f32>, cnn: Network<f32>) -> Result<Self> {
        if !fcn.spec().heads.iter().any(|h| h.loss == HeadLoss::Bce) {
            return Err(LocateError::InvalidInput(format!("`{}` has no mask head", fcn.spec().name)).into());
        }
        let mode = mode_of(&cnn)?;
        let [_, h, w] = cnn.spec().input_shape;
        if (w, h) != (ROI_WIDTH, ROI_HEIGHT) {
            return Err(QuantifyError::InputSize {
                need_w: ROI_WIDTH,
                need_h: ROI_HEIGHT,
                found_w: w,
                found_h: h,
            });
        }
        Ok(Self {
            fcn,
            cnn,
            mode,
            centers: None,
        })
    }

    /// Load both checkpoints before touching any image.
    pub fn load(fcn: impl AsRef<Path>, cnn: impl AsRef<Path>) -> Result<Self> {
        let f = load_checkpoint::<f32>(fcn)?.network;
        let c = load_checkpoint::<f32>(cnn)?.network;
        Self::new(f, c)
    }

    pub fn with_centers(mut self, region: CenterRegion) -> Self {
        self.centers = Some(region);
        self
    }

    /// Localise both knees, crop them and grade them (right knee first).
    pub fn run(&self, xray: &GrayImage) -> Result<[KneeResult; 2]> {
        let dets = match &self.centers {
            None => fcn_localize_roi(xray, &self.fcn)?,
            Some(r) => fcn_localize_centers(xray, &self.fcn, r)?,
        };
        let crops = [&dets.right, &dets.left]
            .map(|d| extract_roi(xray, d.bbox, ROI_WIDTH, ROI_HEIGHT).map(|c| canonical(c, d.side)));
        let [r, l] = crops;
        let (r, l) = (r?, l?);
        let mut preds = predict_batch(&self.cnn, &[&r, &l])?.into_iter();
        Ok([
            KneeResult {
                detection: dets.right,
                prediction: preds.next().expect("two predictions"),
            },
            KneeResult {
                detection: dets.left,
                prediction: preds.next().expect("two predictions"),
            },
        ])
    }

    /// [`Pipeline::run`] with localisation errors tagged by `image`.
    pub fn run_named(&self, image: &str, xray: &GrayImage) -> Result<[KneeResult; 2]> {
        self.run(xray).map_err(|e| match e {
            QuantifyError::Locate(source) => QuantifyError::Localisation {
                image: image.to_string(),
                source,
            },
            other => other,
        })
    }
}

/// One-shot form of [`Pipeline::run`].
pub fn run_pipeline(xray: &GrayImage, fcn: &Network<f32>, cnn: &Network<f32>) -> Result<[KneeResult; 2]> {
    Pipeline::new(fcn.clone(), cnn.clone())?.run(xray)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageproc::hflip;
    use crate::nn::{build_network, desk_cnn, preset};
    use crate::quantify::predict;

    #[test]
    fn mirrored_knees_get_identical_grades() {
        let cnn = build_network::<f32>(&desk_cnn(Mode::Joint), 2).unwrap();
        let right = GrayImage::from_fn(ROI_WIDTH, ROI_HEIGHT, |x, y| ((x * x + 3 * y) % 256) as u8);
        let left = hflip(&right);
        let a = predict(&cnn, &canonical(right, crate::geom::Side::Right)).unwrap();
        let b = predict(&cnn, &canonical(left, crate::geom::Side::Left)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_networks_in_the_wrong_roles() {
        let fcn = build_network::<f32>(&preset("desk-fcn").unwrap(), 1).unwrap();
        let cnn = build_network::<f32>(&desk_cnn(Mode::Joint), 1).unwrap();
        assert!(Pipeline::new(cnn.clone(), cnn.clone()).is_err());
        assert!(Pipeline::new(fcn.clone(), fcn.clone()).is_err());
        assert_eq!(Pipeline::new(fcn, cnn).unwrap().mode, Mode::Joint);
    }

    #[test]
    fn missing_checkpoint_fails_early() {
        let dir = tempfile::tempdir().unwrap();
        let err = Pipeline::load(dir.path().join("fcn.oakn"), dir.path().join("cnn.oakn")).unwrap_err();
        assert!(matches!(err, QuantifyError::Nn(_)));
    }
}
