//! Scalar resonator models: Q budget, roughness scattering, absorption,
//! transmission spectrum and the Q/V trend of the emission enhancement.

use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CavityMode, ValidationReport, Validate};
use crate::units::{angular_to_hz, TWO_PI};

/// Partial quality factors and their harmonic combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QBudget {
    pub q_rad: Option<f64>,
    pub q_scat: Option<f64>,
    pub q_abs: Option<f64>,
    pub q_total: f64,
}

impl QBudget {
    pub fn channels(&self) -> [(&'static str, Option<f64>); 3] {
        [
            ("radiative", self.q_rad),
            ("scattering", self.q_scat),
            ("absorption", self.q_abs),
        ]
    }
}

/// 1/Q = sum of 1/Q_i over the present channels. An infinite channel is
/// lossless and contributes nothing.
pub fn q_total(q_rad: Option<f64>, q_scat: Option<f64>, q_abs: Option<f64>) -> Result<QBudget> {
    let present: Vec<f64> = [q_rad, q_scat, q_abs].into_iter().flatten().collect();
    if present.is_empty() {
        return Err(Error::Argument("Q budget needs at least one channel".into()));
    }
    if let Some(bad) = present.iter().find(|q| !(**q > 0.0)) {
        return Err(Error::Argument(format!("quality factors must be > 0, got {bad}")));
    }
    let inv: f64 = present.iter().map(|q| 1.0 / q).sum();
    Ok(QBudget {
        q_rad,
        q_scat,
        q_abs,
        q_total: 1.0 / inv,
    })
}

/// Rayleigh scattering constant A in Q_scat = A / (sigma^2 l), calibrated at
/// 760 nm: 2.1e6 x (2 nm)^2 x 10 nm = 8.4e7 nm^3.
pub const RAYLEIGH_CONSTANT: f64 = 8.4e-20;

/// Wavelength at which [`RAYLEIGH_CONSTANT`] is calibrated (m).
pub const RAYLEIGH_WAVELENGTH: f64 = 760e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughnessSpec {
    pub sigma_rms: f64,
    pub l_corr: f64,
    pub wavelength: f64,
}

impl Validate for RoughnessSpec {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::new();
        r.require(self.sigma_rms > 0.0, "sigma_rms > 0");
        r.require(self.l_corr > 0.0, "l_corr > 0");
        r.require(self.wavelength > 0.0, "wavelength > 0");
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringQ {
    pub q_scat: f64,
    /// False when the wavelength differs from the calibration wavelength;
    /// no wavelength scaling is applied in that case.
    pub calibrated_wavelength: bool,
}

pub fn q_scat_rayleigh(spec: &RoughnessSpec) -> Result<ScatteringQ> {
    spec.validate().into_result("roughness spec", ())?;
    Ok(ScatteringQ {
        q_scat: RAYLEIGH_CONSTANT / (spec.sigma_rms * spec.sigma_rms * spec.l_corr),
        calibrated_wavelength: (spec.wavelength - RAYLEIGH_WAVELENGTH).abs()
            <= 1e-9 * RAYLEIGH_WAVELENGTH,
    })
}

/// Bulk absorption length L = lambda / (4 pi kappa); infinite for kappa = 0.
pub fn kappa_to_propagation_length(kappa: f64, wavelength: f64) -> Result<f64> {
    if !(kappa >= 0.0) || !(wavelength > 0.0) {
        return Err(Error::Argument(format!(
            "need kappa >= 0 and wavelength > 0 (got {kappa}, {wavelength})"
        )));
    }
    if kappa == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(wavelength / (2.0 * TWO_PI * kappa))
}

/// Inverse of [`kappa_to_propagation_length`].
pub fn propagation_length_to_kappa(l_prop: f64, wavelength: f64) -> Result<f64> {
    if !(l_prop > 0.0) || !(wavelength > 0.0) {
        return Err(Error::Argument("need l_prop > 0 and wavelength > 0".into()));
    }
    Ok(wavelength / (2.0 * TWO_PI * l_prop))
}

/// Q_abs = 2 pi n_g L / lambda. The group index has no default.
pub fn q_abs_from_propagation(l_prop: f64, n_group: f64, wavelength: f64) -> Result<f64> {
    if !(l_prop > 0.0 && n_group > 0.0 && wavelength > 0.0) {
        return Err(Error::Argument(
            "l_prop, n_group and wavelength must be > 0".into(),
        ));
    }
    Ok(TWO_PI * n_group * l_prop / wavelength)
}

/// Group index that maps `l_prop` to `q_abs` (calibration helper).
pub fn group_index_for(q_abs: f64, l_prop: f64, wavelength: f64) -> f64 {
    q_abs * wavelength / (TWO_PI * l_prop)
}

/// Sum of unit-height Lorentzians (gamma/2)^2 / ((w - W)^2 + (gamma/2)^2).
pub fn transmission_comb(modes: &[CavityMode], omegas: &[f64]) -> Vec<f64> {
    omegas
        .par_iter()
        .map(|&w| {
            modes
                .iter()
                .map(|m| {
                    let h = m.gamma_cav() / 2.0;
                    let dw = w - m.omega_cav();
                    h * h / (dw * dw + h * h)
                })
                .sum()
        })
        .collect()
}

/// Comb evaluated on a Hz axis; returns (frequency_hz, transmission) rows.
pub fn transmission_comb_hz(modes: &[CavityMode], freqs_hz: &[f64]) -> Vec<(f64, f64)> {
    let omegas: Vec<f64> = freqs_hz.iter().map(|f| TWO_PI * f).collect();
    freqs_hz
        .iter()
        .copied()
        .zip(transmission_comb(modes, &omegas))
        .collect()
}

/// Full width at half maximum of the highest peak, from linearly
/// interpolated half-maximum crossings.
pub fn peak_fwhm(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Argument("FWHM needs >= 3 paired samples".into()));
    }
    let (ip, &peak) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let half = peak / 2.0;
    let cross = |i: usize, j: usize| xs[i] + (half - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);
    let left = (1..=ip)
        .rev()
        .find(|&i| ys[i - 1] < half)
        .map(|i| cross(i - 1, i));
    let right = (ip..xs.len() - 1)
        .find(|&i| ys[i + 1] < half)
        .map(|i| cross(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Argument("peak is not resolved inside the grid".into())),
    }
}

/// Uniform Hz grid centred on `mode` spanning `half_widths` FWHMs either side.
pub fn grid_around(mode: &CavityMode, half_widths: f64, n: usize) -> Vec<f64> {
    let f0 = mode.frequency_hz();
    let span = half_widths * angular_to_hz(mode.gamma_cav());
    crate::field::linspace(f0 - span, f0 + span, n)
}

/// chi = chi0 (q / q0) (v0 / v): proportional Q/V scaling from an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiAnchor {
    pub q0: f64,
    pub v0: f64,
    pub chi0: f64,
}

pub fn chi_trend(q: f64, v_eff: f64, anchor: &ChiAnchor) -> Result<f64> {
    if !(q > 0.0 && v_eff > 0.0 && anchor.q0 > 0.0 && anchor.v0 > 0.0 && anchor.chi0 > 0.0) {
        return Err(Error::Argument("chi trend inputs must be > 0".into()));
    }
    Ok(anchor.chi0 * (q / anchor.q0) * (anchor.v0 / v_eff))
}

/// Tabulated Q and V_eff against ring radius, for interpolation only.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusSweepTable {
    rows: Vec<RadiusRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub radius_m: f64,
    pub q: f64,
    pub v_eff_m3: f64,
}

impl RadiusSweepTable {
    pub fn new(mut rows: Vec<RadiusRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Argument("radius table needs >= 2 rows".into()));
        }
        rows.sort_by(|a, b| a.radius_m.total_cmp(&b.radius_m));
        if rows.windows(2).any(|w| w[0].radius_m == w[1].radius_m) {
            return Err(Error::Argument("duplicate radius in table".into()));
        }
        if rows
            .iter()
            .any(|r| !(r.radius_m > 0.0 && r.q > 0.0 && r.v_eff_m3 > 0.0))
        {
            return Err(Error::Argument("radius table values must be > 0".into()));
        }
        Ok(Self { rows })
    }

    /// CSV with header `radius_m,q,v_eff_m3`; `#` lines are comments.
    pub fn read_csv<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line.replace(' ', "") != "radius_m,q,v_eff_m3" {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected header radius_m,q,v_eff_m3, got {line}"),
                    });
                }
                header_seen = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            if vals.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 3 columns, got {}", vals.len()),
                });
            }
            rows.push(RadiusRow {
                radius_m: vals[0],
                q: vals[1],
                v_eff_m3: vals[2],
            });
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[RadiusRow] {
        &self.rows
    }

    /// Linear interpolation; radii outside the table are rejected.
    pub fn interpolate(&self, radius: f64) -> Result<RadiusRow> {
        let first = self.rows[0].radius_m;
        let last = self.rows[self.rows.len() - 1].radius_m;
        if !(radius >= first && radius <= last) {
            return Err(Error::Argument(format!(
                "radius {radius} outside table range [{first}, {last}]"
            )));
        }
        let hi = self
            .rows
            .partition_point(|r| r.radius_m < radius)
            .clamp(1, self.rows.len() - 1);
        let (a, b) = (self.rows[hi - 1], self.rows[hi]);
        let t = (radius - a.radius_m) / (b.radius_m - a.radius_m);
        Ok(RadiusRow {
            radius_m: radius,
            q: a.q + t * (b.q - a.q),
            v_eff_m3: a.v_eff_m3 + t * (b.v_eff_m3 - a.v_eff_m3),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_mode;
    use proptest::prelude::*;

    #[test]
    fn budget_examples() {
        assert_eq!(q_total(Some(27866.0), None, None).unwrap().q_total, 27866.0);
        let b = q_total(Some(27866.0), Some(2.1e6), None).unwrap();
        let want = 1.0 / (1.0 / 27866.0 + 1.0 / 2.1e6);
        assert!((b.q_total - want).abs() < 1e-9 * want);
        assert!((b.q_total - 27501.07).abs() < 0.01, "{}", b.q_total);
        let b = q_total(Some(900.0), Some(900.0), Some(900.0)).unwrap();
        assert!((b.q_total - 300.0).abs() < 1e-9);
        assert!(q_total(None, None, None).is_err());
        assert!(q_total(Some(0.0), None, None).is_err());
        assert_eq!(
            q_total(Some(100.0), None, Some(f64::INFINITY)).unwrap().q_total,
            100.0
        );
    }

    #[test]
    fn rayleigh_calibration() {
        let q = |s: f64, l: f64| {
            q_scat_rayleigh(&RoughnessSpec {
                sigma_rms: s,
                l_corr: l,
                wavelength: 760e-9,
            })
            .unwrap()
        };
        let cal = q(2e-9, 10e-9);
        assert!((cal.q_scat - 2.1e6).abs() < 1e-6 * 2.1e6);
        assert!(cal.calibrated_wavelength);
        assert!((q(10e-9, 100e-9).q_scat - 8.4e3).abs() < 1e-6);
        assert!((q(4e-9, 10e-9).q_scat * 4.0 - cal.q_scat).abs() < 1e-6);
        let off = q_scat_rayleigh(&RoughnessSpec {
            sigma_rms: 2e-9,
            l_corr: 10e-9,
            wavelength: 1550e-9,
        })
        .unwrap();
        assert!(!off.calibrated_wavelength);
    }

    #[test]
    fn absorption_lengths() {
        let l = kappa_to_propagation_length(0.004, 760e-9).unwrap();
        assert!((l - 15.12e-6).abs() < 0.01e-6);
        assert!((kappa_to_propagation_length(0.002, 760e-9).unwrap() - 30.24e-6).abs() < 0.01e-6);
        assert!((kappa_to_propagation_length(0.008, 760e-9).unwrap() - 7.56e-6).abs() < 0.01e-6);
        assert_eq!(kappa_to_propagation_length(0.0, 760e-9).unwrap(), f64::INFINITY);
        let ng = group_index_for(600.0, 15e-6, 760e-9);
        assert!((ng - 4.84).abs() < 0.01, "{ng}");
        let q1 = q_abs_from_propagation(15e-6, ng, 760e-9).unwrap();
        let q2 = q_abs_from_propagation(30e-6, ng, 760e-9).unwrap();
        assert!((q1 - 600.0).abs() < 1e-9 && (q2 - 2.0 * q1).abs() < 1e-9);
    }

    #[test]
    fn comb_fwhm_matches_linewidth() {
        let mode = reference_mode();
        let freqs = grid_around(&mode, 5.0, 20001);
        let rows = transmission_comb_hz(&[mode], &freqs);
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let fwhm = peak_fwhm(&xs, &ys).unwrap();
        assert!((fwhm - 14.164e9).abs() / 14.164e9 < 1e-3, "{fwhm}");
    }

    #[test]
    fn comb_symmetric_pair() {
        let center = hz(3.947e14);
        let fsr = hz(10e12);
        let a = CavityMode::from_q(center - fsr / 2.0, 27866.0, 23).unwrap();
        let b = a.shifted_to(center + fsr / 2.0).unwrap();
        let offsets: Vec<f64> = (0..200).map(|i| i as f64 * fsr / 300.0).collect();
        let left: Vec<f64> = offsets.iter().map(|d| center - d).collect();
        let right: Vec<f64> = offsets.iter().map(|d| center + d).collect();
        let tl = transmission_comb(&[a, b], &left);
        let tr = transmission_comb(&[a, b], &right);
        for (x, y) in tl.iter().zip(&tr) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }

    fn hz(f: f64) -> f64 {
        TWO_PI * f
    }

    #[test]
    fn comb_peak_converges() {
        let mode = reference_mode();
        let fwhm = mode.fwhm_hz();
        let peak_at = |n: usize| {
            // grid offset by a fixed phase so the centre is not a sample
            let df = 10.0 * fwhm / n as f64;
            let freqs: Vec<f64> = (0..=n)
                .map(|i| mode.frequency_hz() - 5.0 * fwhm + (i as f64 + 0.37) * df)
                .collect();
            transmission_comb_hz(&[mode], &freqs)
                .into_iter()
                .map(|r| r.1)
                .fold(0.0, f64::max)
        };
        // df = FWHM/50 and finer
        let a = peak_at(500);
        let b = peak_at(1000);
        assert!((a - b).abs() < 2e-3, "{a} {b}");
    }

    #[test]
    fn chi_trend_examples() {
        let anchor = ChiAnchor {
            q0: 27866.0,
            v0: 1e-19,
            chi0: 1330.0,
        };
        assert_eq!(chi_trend(27866.0, 1e-19, &anchor).unwrap(), 1330.0);
        assert!((chi_trend(13933.0, 1e-19, &anchor).unwrap() - 665.0).abs() < 1e-9);
        let low = chi_trend(600.0 * 27866.0 / 27900.0, 1e-19, &anchor).unwrap();
        assert!((low - 28.6).abs() < 0.1 && low > 25.0 && low < 32.0, "{low}");
    }

    #[test]
    fn radius_table_roundtrip() {
        let csv = "# demo\nradius_m,q,v_eff_m3\n1.0e-6,1000,1e-19\n2.0e-6,3000,3e-19\n";
        let t = RadiusSweepTable::read_csv(csv.as_bytes()).unwrap();
        let mid = t.interpolate(1.5e-6).unwrap();
        assert!((mid.q - 2000.0).abs() < 1e-9 && (mid.v_eff_m3 - 2e-19).abs() < 1e-30);
        assert!(t.interpolate(3e-6).is_err());
        assert!(RadiusSweepTable::read_csv("r,q\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn harmonic_bound(a in 10.0f64..1e7, b in 10.0f64..1e7, c in 10.0f64..1e7) {
            let full = q_total(Some(a), Some(b), Some(c)).unwrap();
            let two = q_total(Some(a), Some(b), None).unwrap();
            prop_assert!(full.q_total <= a.min(b).min(c));
            prop_assert!(full.q_total < two.q_total);
            let inv = 1.0 / a + 1.0 / b + 1.0 / c;
            prop_assert!((1.0 / full.q_total - inv).abs() <= 1e-12 * inv);
        }

        #[test]
        fn scattering_scale_covariance(s in 0.5e-9f64..20e-9, l in 1e-9f64..200e-9,
                                       alpha in 0.1f64..10.0, beta in 0.1f64..10.0) {
            let q = |s: f64, l: f64| q_scat_rayleigh(&RoughnessSpec { sigma_rms: s, l_corr: l, wavelength: 760e-9 }).unwrap().q_scat;
            let lhs = q(alpha * s, beta * l);
            let rhs = q(s, l) / (alpha * alpha * beta);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }

        #[test]
        fn kappa_inverse(kappa in 1e-6f64..0.1, lambda in 400e-9f64..2000e-9) {
            let l = kappa_to_propagation_length(kappa, lambda).unwrap();
            let back = propagation_length_to_kappa(l, lambda).unwrap();
            prop_assert!((back - kappa).abs() <= 1e-12 * kappa);
        }

        #[test]
        fn chi_trend_monotone(q in 10.0f64..1e5, v in 1e-21f64..1e-17, dq in 1.0f64..1e3, dv in 1e-22f64..1e-18) {
            let anchor = ChiAnchor { q0: 27866.0, v0: 1e-19, chi0: 1330.0 };
            let base = chi_trend(q, v, &anchor).unwrap();
            prop_assert!(chi_trend(q + dq, v, &anchor).unwrap() > base);
            prop_assert!(chi_trend(q, v + dv, &anchor).unwrap() < base);
        }
    }
}
