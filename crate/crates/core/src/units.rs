//! Physical constants and the Hz <-> rad/s boundary.
//!
//! Every frequency inside the crate is an angular frequency in rad/s. Values
//! in Hz only exist at I/O boundaries and pass through the two helpers below.

use std::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;

pub const TWO_PI: f64 = 2.0 * PI;

#[inline]
pub fn hz_to_angular(f_hz: f64) -> f64 {
    TWO_PI * f_hz
}

#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}

/// Vacuum wavelength (m) of an angular frequency.
#[inline]
pub fn wavelength_of(omega: f64) -> f64 {
    TWO_PI * SPEED_OF_LIGHT / omega
}

/// Relative difference |a - b| / max(|a|, |b|), zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
