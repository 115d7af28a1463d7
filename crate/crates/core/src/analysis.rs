//! Field-map post-processing: dissipated power, emission enhancement chi,
//! coupling efficiency beta and effective mode volume.
//!
//! beta is read from the out-of-phase part Im E of an azimuthal trace at the
//! emitter's radius. Far from the source the guided field is a standing
//! wave, so "the far value" is the local amplitude of the sinusoid
//! a cos(m phi) + b sin(m phi) + c fitted in short windows, with m the
//! dominant azimuthal order of the trace (m = 0 reduces to the mean).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{folded_angle, Component, FieldMap, FieldVector, LineTrace};
use crate::fit::{basis_fit, fit_exponential};
use crate::model::{CylindricalPoint, DipoleVector, RingGeometry};
use crate::units::{SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

/// Half-width of the plateau window around the antipode (rad).
pub const PLATEAU_HALF_WIDTH: f64 = PI / 8.0;

/// Relative amplitude slope per radian above which the plateau is not flat.
pub const PLATEAU_FLATNESS: f64 = 1e-3;

/// Envelope fits with relative RMS residual at or above this are unreliable.
pub const ENVELOPE_RESIDUAL_LIMIT: f64 = 0.05;

const BETA_OVERSHOOT: f64 = 1e-6;
const MIN_WINDOW_SAMPLES: usize = 8;

/// (omega / 2) Im(d* . E).
pub fn dissipated_power(d: &DipoleVector, e: &FieldVector, omega_e: f64) -> f64 {
    omega_e / 2.0 * project(d, e).im
}

/// sum_i conj(d_i) E_i.
fn project(d: &DipoleVector, e: &FieldVector) -> Complex64 {
    d.components()
        .iter()
        .zip(e)
        .map(|(di, ei)| di.conj() * ei)
        .sum()
}

/// Im of the field at the dipole projected on the unit dipole direction.
pub fn source_im(d: &DipoleVector, e: &FieldVector) -> f64 {
    project(d, e).im / d.magnitude()
}

/// chi = Im E_nano / Im E_hom. Both must be non-zero with the same sign.
pub fn chi_from_fields(im_e_nano: f64, im_e_hom: f64) -> Result<f64> {
    if im_e_hom == 0.0 || im_e_nano == 0.0 || !im_e_hom.is_finite() || !im_e_nano.is_finite() {
        return Err(Error::Argument(
            "chi needs finite non-zero nanostructure and bulk fields".into(),
        ));
    }
    if im_e_nano.signum() != im_e_hom.signum() {
        return Err(Error::Argument(format!(
            "field signs differ ({im_e_nano:e} vs {im_e_hom:e}); both must describe damping"
        )));
    }
    Ok(im_e_nano / im_e_hom)
}

/// Bulk self-field Im E_hom = -n omega^3 |d| / (6 pi eps0 c^3) of a dipole in
/// a homogeneous medium of index n (damping carries the negative sign).
pub fn bulk_im_field(n: f64, omega: f64, dipole_magnitude: f64) -> f64 {
    -n * omega.powi(3) * dipole_magnitude
        / (6.0 * PI * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT.powi(3))
}

/// Azimuthal trace of one component at (r, z); bilinear in (r, z), exact on
/// grid lines. The map's source angle, if any, is carried along.
pub fn extract_line_trace(
    f: &FieldMap,
    r_trace: f64,
    z_trace: f64,
    component: Component,
) -> Result<LineTrace> {
    let ring = f.ring_at(r_trace, z_trace)?;
    let c = component.index();
    LineTrace::new(
        f.axes().phi().to_vec(),
        ring.iter().map(|v| v[c]).collect(),
        r_trace,
        z_trace,
        f.source().map(|s| s.position.phi),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BetaMethod {
    Plateau,
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reliability {
    Reliable,
    Unreliable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeDiagnostics {
    /// Decay rate of the envelope per radian of folded angle.
    pub rate_per_rad: f64,
    pub rel_rms: f64,
    pub windows: usize,
    /// Unclamped ratio; differs from `beta` only for unreliable fits.
    pub raw_beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaExtraction {
    pub beta: f64,
    pub method: BetaMethod,
    pub reliability: Reliability,
    pub source_value: Complex64,
    /// Far-field Im value (plateau or extrapolated envelope), signed like
    /// the source value.
    pub far_value: f64,
    /// Dominant azimuthal order used for the local amplitude.
    pub order: i64,
    /// Relative amplitude slope over the plateau window (per radian).
    pub plateau_slope: Option<f64>,
    pub envelope: Option<EnvelopeDiagnostics>,
}

impl BetaExtraction {
    pub fn is_reliable(&self) -> bool {
        self.reliability == Reliability::Reliable
    }
}

/// Dominant |order| of a real sequence on a full-turn uniform grid.
fn dominant_order(ys: &[f64]) -> i64 {
    let n = ys.len();
    let mut buf: Vec<Complex64> = ys.iter().map(|&y| y.into()).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut best = (0usize, buf[0].norm());
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        // a real signal splits its power between +k and -k
        let a = 2.0 * c.norm();
        if a > best.1 {
            best = (k, a);
        }
    }
    best.0 as i64
}

/// Amplitude of a cos(m phi) + b sin(m phi) + c over the given samples, and
/// the offset c. For m = 0 the amplitude is |c|.
fn local_amplitude(phis: &[f64], ys: &[f64], m: i64) -> Result<(f64, f64)> {
    if m == 0 {
        let c = ys.iter().sum::<f64>() / ys.len() as f64;
        return Ok((c.abs(), c));
    }
    let mf = m as f64;
    let cols = vec![
        phis.iter().map(|p| (mf * p).cos()).collect(),
        phis.iter().map(|p| (mf * p).sin()).collect(),
        vec![1.0; phis.len()],
    ];
    let coef = basis_fit(&cols, ys)?;
    Ok((coef[0].hypot(coef[1]), coef[2]))
}

/// As [`local_amplitude`], but lets the amplitude vary linearly across the
/// window so a decaying envelope does not leak into the quadrature term.
/// Returns the amplitude at `centre`.
fn local_amplitude_sloped(phis: &[f64], ys: &[f64], m: i64, centre: f64) -> Result<f64> {
    if m == 0 {
        let cols = vec![vec![1.0; phis.len()], phis.iter().map(|p| p - centre).collect()];
        return Ok(basis_fit(&cols, ys)?[0].abs());
    }
    let mf = m as f64;
    let cols = vec![
        phis.iter().map(|p| (mf * p).cos()).collect(),
        phis.iter().map(|p| (mf * p).sin()).collect(),
        phis.iter().map(|p| (p - centre) * (mf * p).cos()).collect(),
        phis.iter().map(|p| (p - centre) * (mf * p).sin()).collect(),
        vec![1.0; phis.len()],
    ];
    let coef = basis_fit(&cols, ys)?;
    Ok(coef[0].hypot(coef[1]))
}

struct Prepared {
    phis: Vec<f64>,
    ims: Vec<f64>,
    src: usize,
    source_value: Complex64,
    order: i64,
}

fn prepare(t: &LineTrace) -> Result<Prepared> {
    if !t.covers_full_turn() {
        return Err(Error::Argument("beta extraction needs a full-turn trace".into()));
    }
    let src = t.source_index()?;
    let source_value = t.values()[src];
    if source_value.im == 0.0 {
        return Err(Error::Extraction("Im part vanishes at the source".into()));
    }
    let ims: Vec<f64> = t.values().iter().map(|v| v.im).collect();
    let order = dominant_order(&ims);
    Ok(Prepared {
        phis: t.phi().to_vec(),
        ims,
        src,
        source_value,
        order,
    })
}

fn finish_beta(raw: f64, method: BetaMethod, reliable: bool) -> Result<f64> {
    if reliable && raw > 1.0 + BETA_OVERSHOOT {
        return Err(Error::Extraction(format!(
            "{method:?} extraction gave beta = {raw:.6} > 1"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// beta from the flat far-field plateau: window of width pi/4 centred on the
/// antipode of the source. Fails with `PlateauNotFlat` if the local
/// amplitude drifts by more than 1e-3 (relative) per radian across it.
pub fn beta_plateau(t: &LineTrace) -> Result<BetaExtraction> {
    let p = prepare(t)?;
    let source = p.phis[p.src];
    let mut window = (Vec::new(), Vec::new());
    let mut inner = (Vec::new(), Vec::new());
    let mut outer = (Vec::new(), Vec::new());
    for (&phi, &y) in p.phis.iter().zip(&p.ims) {
        let from_antipode = PI - folded_angle(phi, source);
        if from_antipode <= PLATEAU_HALF_WIDTH {
            window.0.push(phi);
            window.1.push(y);
            let half = if from_antipode < PLATEAU_HALF_WIDTH / 2.0 {
                &mut inner
            } else {
                &mut outer
            };
            half.0.push(phi);
            half.1.push(y);
        }
    }
    if inner.0.len() < 4 || outer.0.len() < 4 {
        return Err(Error::UnderResolved(
            "too few samples in the plateau window".into(),
        ));
    }
    let (amp, _) = local_amplitude(&window.0, &window.1, p.order)?;
    let (a_in, _) = local_amplitude(&inner.0, &inner.1, p.order)?;
    let (a_out, _) = local_amplitude(&outer.0, &outer.1, p.order)?;
    // inner half sits pi/16 closer to the antipode on average
    let slope = if amp == 0.0 {
        0.0
    } else {
        (a_in - a_out) / amp / (PLATEAU_HALF_WIDTH / 2.0)
    };
    if slope.abs() >= PLATEAU_FLATNESS {
        return Err(Error::PlateauNotFlat { slope });
    }
    let sign = p.source_value.im.signum();
    let raw = amp / p.source_value.im.abs();
    Ok(BetaExtraction {
        beta: finish_beta(raw, BetaMethod::Plateau, true)?,
        method: BetaMethod::Plateau,
        reliability: Reliability::Reliable,
        source_value: p.source_value,
        far_value: sign * amp,
        order: p.order,
        plateau_slope: Some(slope),
        envelope: None,
    })
}

/// beta from an exponential envelope A e^{-alpha s} fitted to the local
/// amplitude on the far half of the trace (folded angle s in [pi/2, pi],
/// both directions), extrapolated to the source.
pub fn beta_envelope(t: &LineTrace) -> Result<BetaExtraction> {
    let p = prepare(t)?;
    let n = p.phis.len();
    let dphi = t.spacing();
    let period = if p.order == 0 {
        PI / 8.0
    } else {
        2.0 * PI / p.order as f64
    };
    let win = ((period / dphi).round() as usize).max(MIN_WINDOW_SAMPLES);
    let half = win / 2;
    let w = (2 * half + 1) as f64 * dphi;
    let (s_lo, s_hi) = (PI / 2.0 + w / 2.0, PI - w / 2.0);

    let centres: Vec<(usize, f64)> = (0..n)
        .filter_map(|i| {
            let j = (i + n - p.src) % n;
            let s = if j <= n / 2 { j as f64 * dphi } else { (n - j) as f64 * dphi };
            (s >= s_lo - 1e-12 && s <= s_hi + 1e-12).then_some((i, s))
        })
        .collect();
    if centres.len() < 3 {
        return Err(Error::UnderResolved(
            "too few envelope windows in the far half of the trace".into(),
        ));
    }
    let source = p.phis[p.src];
    // local amplitudes with the trial envelope e^{-rate s} divided out first
    let envelope_samples = |rate: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let samples: Vec<(f64, f64)> = centres
            .par_iter()
            .map(|&(i, s)| {
                let (phis, ys): (Vec<f64>, Vec<f64>) = (0..=2 * half)
                    .map(|k| {
                        let idx = (i + n + k - half) % n;
                        // unwrap the angle so the window is contiguous
                        let phi = p.phis[i] + (k as f64 - half as f64) * dphi;
                        let flat = (rate * (folded_angle(phi, source) - s)).exp();
                        (phi, p.ims[idx] * flat)
                    })
                    .unzip();
                local_amplitude_sloped(&phis, &ys, p.order, p.phis[i]).map(|a| (s, a))
            })
            .collect::<Result<_>>()?;
        Ok(samples.into_iter().unzip())
    };
    let (ss, amps) = envelope_samples(0.0)?;
    if amps.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Extraction("envelope vanishes in the far field".into()));
    }
    let first = fit_exponential(&ss, &amps)?;
    // second pass removes the curvature bias of the linear-in-window model
    let (ss, amps) = envelope_samples(first.rate)?;
    if amps.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Extraction("envelope vanishes in the far field".into()));
    }
    let fit = fit_exponential(&ss, &amps)?;
    let reliable = fit.rel_rms < ENVELOPE_RESIDUAL_LIMIT;
    let raw = fit.amplitude / p.source_value.im.abs();
    Ok(BetaExtraction {
        beta: finish_beta(raw, BetaMethod::Envelope, reliable)?,
        method: BetaMethod::Envelope,
        reliability: if reliable {
            Reliability::Reliable
        } else {
            Reliability::Unreliable
        },
        source_value: p.source_value,
        far_value: p.source_value.im.signum() * fit.amplitude,
        order: p.order,
        plateau_slope: None,
        envelope: Some(EnvelopeDiagnostics {
            rate_per_rad: fit.rate,
            rel_rms: fit.rel_rms,
            windows: ss.len(),
            raw_beta: raw,
        }),
    })
}

/// Plateau if the far field is flat, envelope otherwise.
pub fn extract_beta(t: &LineTrace) -> Result<BetaExtraction> {
    match beta_plateau(t) {
        Err(Error::PlateauNotFlat { slope }) => {
            let mut out = beta_envelope(t)?;
            out.plateau_slope = Some(slope);
            Ok(out)
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionMetrics {
    pub chi: f64,
    pub beta: Option<BetaExtraction>,
    pub p_dissipated: f64,
}

/// Where and how to measure on a driven map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionOptions {
    /// Bulk reference Im E_hom for the same dipole.
    pub im_e_hom: f64,
    pub omega_e: f64,
    /// Trace radius; defaults to the source radius.
    pub r_trace: Option<f64>,
    /// Trace height; defaults to the source height.
    pub z_trace: Option<f64>,
    pub with_beta: bool,
}

/// chi, beta and dissipated power of a map that records its source.
pub fn analyze_emission(map: &FieldMap, opts: &EmissionOptions) -> Result<EmissionMetrics> {
    let src = map
        .source()
        .ok_or_else(|| Error::Argument("field map has no source description".into()))?;
    let e = map.sample(src.position)?;
    let chi = chi_from_fields(source_im(&src.dipole, &e), opts.im_e_hom)?;
    let beta = if opts.with_beta {
        let trace = extract_line_trace(
            map,
            opts.r_trace.unwrap_or(src.position.r),
            opts.z_trace.unwrap_or(src.position.z),
            Component::R,
        )?;
        Some(extract_beta(&trace)?)
    } else {
        None
    };
    Ok(EmissionMetrics {
        chi,
        beta,
        p_dissipated: dissipated_power(&src.dipole, &e, opts.omega_e),
    })
}

/// Relative permittivity as a function of (r, z).
pub trait Permittivity: Sync {
    fn eps(&self, r: f64, z: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformPermittivity(pub f64);

impl Permittivity for UniformPermittivity {
    fn eps(&self, _r: f64, _z: f64) -> f64 {
        self.0
    }
}

impl Permittivity for RingGeometry {
    fn eps(&self, r: f64, z: f64) -> f64 {
        self.permittivity(r, z)
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> Permittivity for F {
    fn eps(&self, r: f64, z: f64) -> f64 {
        self(r, z)
    }
}

/// Trapezoid weights on a non-uniform axis.
fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Periodic trapezoid weights on the phi axis (the seam gap closes the turn).
fn periodic_weights(phi: &[f64]) -> Vec<f64> {
    let n = phi.len();
    if n == 1 {
        return vec![2.0 * PI];
    }
    (0..n)
        .map(|i| {
            let prev = if i == 0 { phi[n - 1] - 2.0 * PI } else { phi[i - 1] };
            let next = if i + 1 == n { phi[0] + 2.0 * PI } else { phi[i + 1] };
            0.5 * (next - prev)
        })
        .collect()
}

/// V_eff = int eps |E|^2 dV / (eps(r_e) |E(r_e)|^2) on the cylindrical grid,
/// dV = r dr dphi dz. Rows are summed in parallel and combined in a fixed
/// order, so the result does not depend on the thread count.
pub fn effective_mode_volume(
    f: &FieldMap,
    eps: &dyn Permittivity,
    r_e: CylindricalPoint,
) -> Result<f64> {
    let e0 = f.sample(r_e)?;
    let norm0: f64 = e0.iter().map(|c| c.norm_sqr()).sum();
    let eps0 = eps.eps(r_e.r, r_e.z);
    if !(norm0 > 0.0) {
        return Err(Error::Argument("field vanishes at the emitter position".into()));
    }
    if !(eps0 > 0.0) {
        return Err(Error::Argument("permittivity at the emitter must be > 0".into()));
    }
    let axes = f.axes();
    let wr = trapezoid_weights(axes.r());
    let wz = trapezoid_weights(axes.z());
    let wphi = periodic_weights(axes.phi());
    let (nz, nphi) = (axes.z().len(), axes.phi().len());
    let rows: Vec<f64> = (0..axes.r().len())
        .into_par_iter()
        .map(|ir| {
            let r = axes.r()[ir];
            let mut acc = 0.0;
            for iz in 0..nz {
                let e = eps.eps(r, axes.z()[iz]);
                let mut ring = 0.0;
                for (iphi, w) in wphi.iter().enumerate().take(nphi) {
                    let v = f.at(ir, iz, iphi);
                    ring += w * v.iter().map(|c| c.norm_sqr()).sum::<f64>();
                }
                acc += wz[iz] * e * ring;
            }
            wr[ir] * r * acc
        })
        .collect();
    let total: f64 = rows.iter().sum();
    Ok(total / (eps0 * norm0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridAxes, Provenance, SourceInfo};
    use crate::units::TWO_PI;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn power_examples() {
        let d = DipoleVector::radial();
        assert_eq!(dissipated_power(&d, &[c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)], 1e15), 0.0);
        let p = dissipated_power(&d, &[c(0.0, -1.11e18), c(0.0, 0.0), c(0.0, 0.0)], 2.0);
        assert_eq!(p, -1.11e18);
        let e = [c(0.3, -2.0), c(0.0, 0.5), c(0.1, 0.1)];
        let d2 = DipoleVector::from_real(2.0, 0.0, 0.0).unwrap();
        assert!((dissipated_power(&d2, &e, 1.0) - 2.0 * dissipated_power(&d, &e, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn power_additive_over_orthogonal_components() {
        let e = [c(0.3, -2.0), c(0.7, 0.5), c(0.1, -0.4)];
        let dr = DipoleVector::from_real(1.0, 0.0, 0.0).unwrap();
        let dphi = DipoleVector::new([c(0.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)]).unwrap();
        let both = DipoleVector::new([c(1.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)]).unwrap();
        let sum = dissipated_power(&dr, &e, 1.0) + dissipated_power(&dphi, &e, 1.0);
        assert!((dissipated_power(&both, &e, 1.0) - sum).abs() < 1e-15);
    }

    #[test]
    fn chi_examples() {
        let chi = chi_from_fields(-1.11e18, -4.55e15).unwrap();
        assert!((chi - 244.0).abs() < 1.0 && (chi - 243.0).abs() / 243.0 < 0.005);
        assert_eq!(chi_from_fields(-3.0, -3.0).unwrap(), 1.0);
        assert!((chi_from_fields(-6.5e15, -2.0e15).unwrap() - 3.25).abs() < 1e-12);
        assert!(chi_from_fields(1.0, -1.0).is_err());
        assert!(chi_from_fields(1.0, 0.0).is_err());
    }

    #[test]
    fn bulk_field_scaling() {
        let a = bulk_im_field(1.5, 2e15, 1.0);
        let b = bulk_im_field(3.0, 4e15, 1.0);
        assert!(a < 0.0);
        assert!((b / a - 16.0).abs() < 1e-12);
    }

    /// Im part: standing wave of amplitude `guided` times e^{-alpha s} plus
    /// a lobe of height `leak` at the source.
    fn standing_trace(n: usize, m: f64, guided: f64, leak: f64, alpha: f64, src: usize) -> LineTrace {
        let s0 = TWO_PI * src as f64 / n as f64;
        let vals = (0..n)
            .map(|j| {
                let phi = TWO_PI * j as f64 / n as f64;
                let s = folded_angle(phi, s0);
                let dphi = phi - s0;
                let im = -guided * (m * dphi).cos() * (-alpha * s).exp()
                    - leak * (-(s * s) / (2.0 * 0.09)).exp();
                c(0.2 * (m * dphi).sin(), im)
            })
            .collect();
        LineTrace::full_turn(vals, 1.463e-6, 0.0, Some(s0)).unwrap()
    }

    #[test]
    fn plateau_constant_example() {
        let n = 256;
        let mut vals = vec![c(0.0, -0.949); n];
        vals[0] = c(0.0, -1.0);
        let t = LineTrace::full_turn(vals, 1e-6, 0.0, Some(0.0)).unwrap();
        let b = beta_plateau(&t).unwrap();
        assert!((b.beta - 0.949).abs() < 1e-12);
        assert!((b.far_value + 0.949).abs() < 1e-12);
        assert_eq!(b.order, 0);
    }

    #[test]
    fn plateau_recovers_standing_wave() {
        let t = standing_trace(768, 24.0, 0.995, 0.005, 0.0, 0);
        let b = beta_plateau(&t).unwrap();
        assert!((b.beta - 0.995).abs() < 1e-9, "{}", b.beta);
        assert_eq!(b.order, 24);
        let lossless = standing_trace(768, 24.0, 1.0, 0.0, 0.0, 0);
        assert!((beta_plateau(&lossless).unwrap().beta - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lossy_trace_needs_envelope() {
        let alpha = 1.463e-6 / (2.0 * 15e-6);
        let t = standing_trace(768, 24.0, 0.95, 0.05, alpha, 0);
        assert!(matches!(beta_plateau(&t), Err(Error::PlateauNotFlat { .. })));
        let b = extract_beta(&t).unwrap();
        assert_eq!(b.method, BetaMethod::Envelope);
        assert!(b.is_reliable());
        assert!((b.beta - 0.95).abs() < 1e-4, "{}", b.beta);
        let fit = b.envelope.unwrap();
        assert!((fit.rate_per_rad - alpha).abs() / alpha < 1e-3);
    }

    #[test]
    fn envelope_matches_plateau_without_loss() {
        let t = standing_trace(768, 24.0, 0.995, 0.005, 0.0, 0);
        let env = beta_envelope(&t).unwrap();
        let pl = beta_plateau(&t).unwrap();
        assert!(env.envelope.unwrap().rate_per_rad.abs() < 1e-9);
        assert!((env.beta - pl.beta).abs() < 1e-3);
    }

    #[test]
    fn noise_is_unreliable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut vals: Vec<Complex64> = (0..512)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        vals[0] = c(0.0, -5.0);
        let t = LineTrace::full_turn(vals, 1e-6, 0.0, Some(0.0)).unwrap();
        let b = beta_envelope(&t).unwrap();
        assert_eq!(b.reliability, Reliability::Unreliable);
    }

    #[test]
    fn overshoot_is_an_error() {
        let t = standing_trace(768, 24.0, 1.0, 0.0, 0.0, 0);
        let mut vals = t.values().to_vec();
        vals[0] = c(vals[0].re, -0.5);
        let t = LineTrace::full_turn(vals, 1.463e-6, 0.0, Some(0.0)).unwrap();
        assert!(matches!(beta_plateau(&t), Err(Error::Extraction(_))));
    }

    #[test]
    fn trace_through_grid_line_is_exact() {
        let axes = GridAxes::uniform((1.0e-6, 2.0e-6, 5), 128, (-1e-7, 1e-7, 5)).unwrap();
        let map = FieldMap::from_fn(axes.clone(), None, Provenance::Synthetic, |r, phi, z| {
            [c(r * 1e6 + z * 1e7, phi), c(0.0, 0.0), c(0.0, 0.0)]
        })
        .unwrap();
        let t = extract_line_trace(&map, axes.r()[3], axes.z()[1], Component::R).unwrap();
        for (j, v) in t.values().iter().enumerate() {
            assert_eq!(*v, map.at(3, 1, j)[0]);
        }
        assert!(extract_line_trace(&map, 3e-6, 0.0, Component::R).is_err());
    }

    #[test]
    fn uniform_box_volume() {
        let (r1, r2, z1, z2) = (1.0e-6, 2.0e-6, -1e-7, 1e-7);
        let axes = GridAxes::uniform((r1, r2, 11), 16, (z1, z2, 5)).unwrap();
        let map = FieldMap::from_fn(axes, None, Provenance::Ingested, |_, _, _| {
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]
        })
        .unwrap();
        let v = effective_mode_volume(&map, &UniformPermittivity(2.25), CylindricalPoint::new(1.5e-6, 0.3, 0.0)).unwrap();
        let want = PI * (r2 * r2 - r1 * r1) * (z2 - z1);
        assert!((v - want).abs() / want < 1e-12, "{v} {want}");
    }

    #[test]
    fn volume_shrinks_with_concentration() {
        // two-Gaussian family: narrowing the second lobe around r_e lowers V
        let axes = GridAxes::uniform((1.0e-6, 2.0e-6, 101), 8, (-3e-7, 3e-7, 61)).unwrap();
        let r_e = CylindricalPoint::new(1.5e-6, 0.0, 0.0);
        let vol = |w: f64| {
            let map = FieldMap::from_fn(axes.clone(), None, Provenance::Ingested, |r, _, z| {
                let g = (-((r - 1.5e-6).powi(2) + z * z) / (2.0 * w * w)).exp();
                let bg = 0.2 * (-((r - 1.2e-6).powi(2) + z * z) / (2.0 * 1e-7f64.powi(2))).exp();
                [c(g + bg, 0.0), c(0.0, 0.0), c(0.0, 0.0)]
            })
            .unwrap();
            effective_mode_volume(&map, &UniformPermittivity(1.0), r_e).unwrap()
        };
        assert!(vol(5e-8) < vol(8e-8));
    }

    #[test]
    fn analyze_requires_source() {
        let axes = GridAxes::uniform((1.0e-6, 2.0e-6, 3), 16, (0.0, 1e-7, 2)).unwrap();
        let map = FieldMap::from_fn(axes.clone(), None, Provenance::Ingested, |_, _, _| {
            [c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0)]
        })
        .unwrap();
        let opts = EmissionOptions {
            im_e_hom: -1.0,
            omega_e: 1.0,
            r_trace: None,
            z_trace: None,
            with_beta: false,
        };
        assert!(analyze_emission(&map, &opts).is_err());
        let src = SourceInfo {
            dipole: DipoleVector::radial(),
            position: CylindricalPoint::new(1.5e-6, 0.0, 0.0),
        };
        let map = FieldMap::new(axes, map.values().to_vec(), Some(src), Provenance::Ingested).unwrap();
        let m = analyze_emission(&map, &opts).unwrap();
        assert_eq!(m.chi, 1.0);
        assert!(m.beta.is_none());
    }

    proptest! {
        #[test]
        fn chi_scale_invariant(a in -1e18f64..-1e-3, b in -1e18f64..-1e-3, k in 1e-6f64..1e6) {
            let base = chi_from_fields(a, b).unwrap();
            let scaled = chi_from_fields(k * a, k * b).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12 * base.abs());
        }

        #[test]
        fn beta_invariant_under_rotation_and_scale(shift in 0usize..768, k in 1e-3f64..1e3) {
            let t = standing_trace(768, 24.0, 0.95, 0.05, 0.0, 0);
            let base = beta_plateau(&t).unwrap().beta;
            let moved = beta_plateau(&t.rolled(shift).scaled(k.into())).unwrap().beta;
            prop_assert!((base - moved).abs() < 1e-9);
        }
    }
}
