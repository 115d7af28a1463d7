use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {kind}: {report}")]
    Invalid {
        kind: &'static str,
        report: ValidationReport,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("integration step too coarse: rate*dt = {product:.3e} (limit {limit})")]
    StepSize { product: f64, limit: f64 },

    #[error("regime classification requires zero detuning (got {detuning:.3e} rad/s)")]
    Detuned { detuning: f64 },

    #[error("resonances overlap: FWHM {fwhm:.3e} >= 0.1 x spacing {spacing:.3e}")]
    OverlappingModes { fwhm: f64, spacing: f64 },

    #[error("point (r = {r:.4e} m, z = {z:.4e} m) lies outside the grid hull")]
    OutOfHull { r: f64, z: f64 },

    #[error("sampling is not uniform: {0}")]
    NonUniformSampling(String),

    #[error("far-field plateau is not flat (relative slope {slope:.3e} per radian); use the envelope method")]
    PlateauNotFlat { slope: f64 },

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("no identifiable spectral peak near azimuthal order +/-{m}")]
    MissingPeak { m: i64 },

    #[error("infeasible synthetic configuration: {0}")]
    Infeasible(String),

    #[error("grid under-resolved: {0}")]
    UnderResolved(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
