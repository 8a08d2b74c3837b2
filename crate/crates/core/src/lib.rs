//! Conformalized distance- and density-based anomaly detection for
//! univariate time series.
//!
//! The pipeline embeds a series into lagged vectors ([`embedding`]), fits a
//! shrunk Mahalanobis metric on a proper-training set ([`metric`]), scores
//! vectors with a KNN, LOF or LoOP non-conformity measure ([`ncm`]) and
//! turns the scores into conformal p-values against a calibration set
//! ([`conformal`]). [`nab`] scores thresholded detections against labelled
//! anomaly windows.

pub mod conformal;
pub mod embedding;
pub mod error;
pub mod metric;
pub mod nab;
pub mod ncm;
pub mod synthetic;

pub use conformal::{
    calibrate, detect_stream, icad_p_value, p_value, split, CalibrationScores, DetectionRecord,
    IcadConfig, IcadDetector,
};
pub use embedding::{
    embed_series, embed_values, indexed_series, latest_vector, slide, EmbeddedVector, HankelMatrix,
    LagWindow, SeriesPoint, Timestamp,
};
pub use error::{Error, Result};
pub use metric::{fit_metric, mahalanobis, MetricModel};
pub use nab::{
    normalize_score, null_detector, probationary_length, score_file, sigmoid_weight,
    threshold_sweep, AnomalyWindow, ApplicationProfile, FileScore, FileTrace, ProfileName,
};
pub use ncm::{
    k_nearest, knn_ncm, local_density, lof_ncm, loop_score, reach_dist, FittedNcm, NcmKind,
    NeighborList, Query, ReferenceSet,
};
