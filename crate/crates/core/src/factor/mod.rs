//! Band-power features, correlation-matrix factor model and nearest-centroid
//! gaze classification with rejection.

mod features;
mod model;
mod report;

pub use features::{
    concatenate_channels, extract_features, interval_features, recording_features, stack_labelled,
    FeatureConfig, FeatureMode, DEFAULT_BANDS_HZ,
};
pub use model::{
    classify, classify_mean_score, component_scores, correlation_matrix, fit_factor_model,
    ClassifyResult, FactorModel, FitOptions, EIGEN_REL_TOL, MODEL_FORMAT_VERSION,
};
pub use report::{
    centroid_csv, eigenvalue_csv, format_score_table, score_report, BLIND_TEST_REFERENCE,
};
