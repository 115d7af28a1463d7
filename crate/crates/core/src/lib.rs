//! Single emitter coupled to a slot-waveguide ring resonator: excited-state
//! dynamics, resonator Q budgets, and post-processing of field maps into
//! emission enhancement, coupling efficiency, mode volume, ellipticity and
//! directionality.
//!
//! Frequencies are angular (rad/s) everywhere; Hz only appears in I/O
//! records and `*_hz` helpers. Linewidths are full widths at half maximum.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod fieldmap_io;
pub mod fit;
pub mod model;
pub mod polarization;
pub mod reference;
pub mod resonator;
pub mod synth;
pub mod units;

pub use error::{Error, Result};
pub use field::{Component, FieldMap, FieldVector, GridAxes, LineTrace, Provenance, SourceInfo};
pub use model::{
    classify_dipole, validate, CavityMode, CylindricalPoint, DipoleClass, DipoleVector,
    EmitterSpec, RingGeometry, Validate, ValidationReport,
};
pub use num_complex::Complex64;
