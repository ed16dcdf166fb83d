//! Published results on the OAI and MOST radiograph cohorts.
//!
//! These cohorts are access-restricted, so the figures cannot be reproduced
//! here. They are kept for context in reports and are never asserted on.

/// A published figure with a short description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub name: &'static str,
    pub value: f64,
}

/// Centre-blob FCN: fraction of knees detected at JI ≥ 0.25 / 0.5 / 0.75.
pub const FCN_CENTER_DETECTION: [(f64, f64); 3] = [(0.25, 0.989), (0.5, 0.971), (0.75, 0.433)];
pub const FCN_CENTER_JI_MEAN: f64 = 0.76;
pub const FCN_CENTER_JI_STD: f64 = 0.12;

/// ROI FCN on combined OAI-MOST: fraction detected at JI > 0 / ≥ 0.5 / ≥ 0.75.
pub const FCN_ROI_DETECTION: [(f64, f64); 3] = [(0.0, 1.0), (0.5, 1.0), (0.75, 0.922)];
pub const FCN_ROI_JI_MEAN: f64 = 0.83;
pub const FCN_ROI_JI_STD: f64 = 0.06;

/// Receptive field of the best centre FCN before upsampling, in pixels.
pub const FCN_RECEPTIVE_FIELD: usize = 66;

/// Approximate trainable parameters of the best classifier.
pub const CLSF_PARAMS: usize = 5_400_000;
/// Approximate trainable parameters of the joint and ordinal networks.
pub const JOINT_PARAMS: usize = 2_900_000;

pub const CLSF_ACCURACY: f64 = 0.618;
pub const CLSF_MSE: f64 = 0.735;
pub const REG_MSE: f64 = 0.574;
pub const REG_ROUNDED_ACCURACY: f64 = 0.547;
pub const REG_ROUNDED_MSE: f64 = 0.661;
pub const JOINT_ACCURACY: f64 = 0.646;
pub const JOINT_CLSF_MSE: f64 = 0.685;
pub const JOINT_REG_MSE: f64 = 0.507;
pub const ORDINAL_ACCURACY: f64 = 0.643;
pub const ORDINAL_MSE: f64 = 0.480;

/// Every scalar figure, for report footers.
pub const ALL: &[Reference] = &[
    Reference { name: "fcn-center detection at JI >= 0.5", value: 0.971 },
    Reference { name: "fcn-roi detection at JI >= 0.5", value: 1.0 },
    Reference { name: "fcn-roi detection at JI >= 0.75", value: 0.922 },
    Reference { name: "classification accuracy", value: CLSF_ACCURACY },
    Reference { name: "classification mse", value: CLSF_MSE },
    Reference { name: "regression mse", value: REG_MSE },
    Reference { name: "regression rounded accuracy", value: REG_ROUNDED_ACCURACY },
    Reference { name: "joint accuracy", value: JOINT_ACCURACY },
    Reference { name: "joint regression mse", value: JOINT_REG_MSE },
    Reference { name: "ordinal accuracy", value: ORDINAL_ACCURACY },
    Reference { name: "ordinal mse", value: ORDINAL_MSE },
];
