//! Local polarization ellipticity and directional emission from azimuthal
//! Fourier spectra.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldMap, FieldVector, LineTrace};
use crate::model::DipoleVector;
use crate::units::TWO_PI;

/// |E_z| at or above this fraction of the in-plane maximum is flagged.
pub const EZ_FLAG_RATIO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipticity {
    /// Signed minor/major axis ratio in [-1, 1]; +1 for (1, i, 0).
    pub epsilon: f64,
    /// E_z is not negligible against the in-plane components.
    pub ez_flagged: bool,
}

/// Ellipticity of the (E_r, E_phi) polarization ellipse, ignoring E_z:
/// tan(asin(sin 2psi sin delta) / 2) with psi = atan(|E_phi| / |E_r|) and
/// delta = arg E_phi - arg E_r, evaluated through the Stokes parameters as
/// S3 / (S0 + sqrt(S1^2 + S2^2)), which stays exact at circular points.
pub fn ellipticity(e: &FieldVector) -> Result<Ellipticity> {
    let (er, ephi) = (e[0], e[1]);
    let in_plane = er.norm().max(ephi.norm());
    if in_plane == 0.0 {
        return Err(Error::Argument("both in-plane components vanish".into()));
    }
    let s0 = er.norm_sqr() + ephi.norm_sqr();
    let s1 = er.norm_sqr() - ephi.norm_sqr();
    let cross = er.conj() * ephi;
    let (s2, s3) = (2.0 * cross.re, 2.0 * cross.im);
    let epsilon = (s3 / (s0 + s1.hypot(s2))).clamp(-1.0, 1.0);
    Ok(Ellipticity {
        epsilon,
        ez_flagged: e[2].norm() >= EZ_FLAG_RATIO * in_plane,
    })
}

/// Ellipticity over the (r, z) cross-section at one angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityMap {
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    /// r-major, one entry per (r, z) node; 0 where the field vanishes.
    pub epsilon: Vec<f64>,
    /// E_z significant or in-plane field zero.
    pub masked: Vec<bool>,
}

impl EllipticityMap {
    pub fn at(&self, ir: usize, iz: usize) -> f64 {
        self.epsilon[ir * self.z.len() + iz]
    }
}

pub fn ellipticity_map(f: &FieldMap, phi_slice: f64) -> EllipticityMap {
    let slice = f.slice_at_phi(phi_slice);
    let (epsilon, masked) = slice
        .iter()
        .map(|e| match ellipticity(e) {
            Ok(el) => (el.epsilon, el.ez_flagged),
            Err(_) => (0.0, true),
        })
        .unzip();
    EllipticityMap {
        r: f.axes().r().to_vec(),
        z: f.axes().z().to_vec(),
        epsilon,
        masked,
    }
}

/// DFT amplitudes of a trace against azimuthal order and wavenumber.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavenumberSpectrum {
    /// Signed order index j, ascending (negative orders first).
    pub orders: Vec<i64>,
    /// Wavenumber 2 pi j / (N dphi r_trace) in rad/m.
    pub k: Vec<f64>,
    /// |X_j| / N, so a unit-amplitude e^{i m phi} gives 1 at j = m.
    pub amplitude: Vec<f64>,
}

impl WavenumberSpectrum {
    fn index_of(&self, order: i64) -> Option<usize> {
        let first = *self.orders.first()?;
        let i = order - first;
        (i >= 0 && (i as usize) < self.orders.len()).then_some(i as usize)
    }

    /// Sum of amplitudes over order +/- `half_width` (bins wrap around).
    pub fn area(&self, order: i64, half_width: i64) -> f64 {
        let n = self.orders.len() as i64;
        let first = self.orders[0];
        (-half_width..=half_width)
            .map(|d| {
                let j = (order + d - first).rem_euclid(n);
                self.amplitude[j as usize]
            })
            .sum()
    }
}

/// Rectangular-window DFT of the complex trace (traces are periodic).
pub fn wavenumber_spectrum(t: &LineTrace) -> WavenumberSpectrum {
    let n = t.len();
    let mut buf = t.values().to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let span = n as f64 * t.spacing() * t.r_trace();
    let lo = -((n as i64 - 1) / 2);
    let hi = n as i64 / 2;
    let orders: Vec<i64> = (lo..=hi).collect();
    let amplitude = orders
        .iter()
        .map(|&j| buf[j.rem_euclid(n as i64) as usize].norm() / n as f64)
        .collect();
    let k = orders.iter().map(|&j| TWO_PI * j as f64 / span).collect();
    WavenumberSpectrum { orders, k, amplitude }
}

/// Half-width (in bins) of the peak integration window.
pub const PEAK_HALF_WIDTH: i64 = 2;

/// Minimum ratio of the stronger peak to the median background.
pub const PEAK_CONTRAST: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionalityReport {
    pub m: i64,
    pub a_plus: f64,
    pub a_minus: f64,
    /// (a+ - a-) / (a+ + a-) from amplitude peak areas.
    pub directionality: f64,
    /// Same with squared areas, for comparison.
    pub power_directionality: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    pub background: f64,
    pub beta_total: Option<f64>,
    pub beta_plus: Option<f64>,
    pub beta_minus: Option<f64>,
}

impl DirectionalityReport {
    /// Splits `beta_total` in proportion to the squared peak areas.
    pub fn with_beta(mut self, beta_total: f64) -> Self {
        let (pp, pm) = (self.a_plus * self.a_plus, self.a_minus * self.a_minus);
        let plus = beta_total * pp / (pp + pm);
        self.beta_total = Some(beta_total);
        self.beta_plus = Some(plus);
        self.beta_minus = Some(beta_total - plus);
        self
    }
}

/// Emission asymmetry between the +m and -m ring modes.
pub fn directionality(t: &LineTrace, m_expected: i64) -> Result<DirectionalityReport> {
    if m_expected <= 0 {
        return Err(Error::Argument("expected order must be positive".into()));
    }
    if !t.covers_full_turn() {
        return Err(Error::Argument("directionality needs a full-turn trace".into()));
    }
    let spec = wavenumber_spectrum(t);
    let (ip, im) = match (spec.index_of(m_expected), spec.index_of(-m_expected)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingPeak { m: m_expected }),
    };
    let near = |i: usize, c: usize| (i as i64 - c as i64).abs() <= PEAK_HALF_WIDTH;
    let mut background: Vec<f64> = spec
        .amplitude
        .iter()
        .enumerate()
        .filter(|(i, _)| !near(*i, ip) && !near(*i, im))
        .map(|(_, a)| *a)
        .collect();
    background.sort_by(f64::total_cmp);
    let median = if background.is_empty() {
        0.0
    } else {
        background[background.len() / 2]
    };
    let peak = |c: usize| {
        (c.saturating_sub(PEAK_HALF_WIDTH as usize)..=(c + PEAK_HALF_WIDTH as usize).min(spec.amplitude.len() - 1))
            .map(|i| spec.amplitude[i])
            .fold(0.0, f64::max)
    };
    let strongest = peak(ip).max(peak(im));
    if !(strongest > PEAK_CONTRAST * median) || strongest == 0.0 {
        return Err(Error::MissingPeak { m: m_expected });
    }
    let a_plus = spec.area(m_expected, PEAK_HALF_WIDTH);
    let a_minus = spec.area(-m_expected, PEAK_HALF_WIDTH);
    let (pp, pm) = (a_plus * a_plus, a_minus * a_minus);
    Ok(DirectionalityReport {
        m: m_expected,
        a_plus,
        a_minus,
        directionality: (a_plus - a_minus) / (a_plus + a_minus),
        power_directionality: (pp - pm) / (pp + pm),
        k_plus: spec.k[ip],
        k_minus: spec.k[im],
        background: median,
        beta_total: None,
        beta_plus: None,
        beta_minus: None,
    })
}

/// Launch amplitudes c+/- = -i <E+/-(r_e), d> with <u, d> = sum conj(u_i) d_i.
/// The -i makes the self-field of the launched waves absorptive (Im < 0).
pub fn dipole_mode_coupling(
    d: &DipoleVector,
    e_plus: &FieldVector,
    e_minus: &FieldVector,
) -> (Complex64, Complex64) {
    let overlap = |u: &FieldVector| -> Complex64 {
        u.iter()
            .zip(d.components())
            .map(|(ui, di)| ui.conj() * di)
            .sum()
    };
    let minus_i = Complex64::new(0.0, -1.0);
    (minus_i * overlap(e_plus), minus_i * overlap(e_minus))
}

/// Ellipticities of many field vectors in parallel (order preserved).
pub fn ellipticities(fields: &[FieldVector]) -> Vec<Result<Ellipticity>> {
    fields.par_iter().map(ellipticity).collect()
}
