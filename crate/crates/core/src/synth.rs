//! Parametric stand-ins for solver output with known chi, beta, ellipticity
//! and loss. Not Maxwell solutions: a Gaussian cross-section carrying
//! e^{i m phi} waves, plus a short non-guided lobe around the source.
//!
//! Driven map, for a dipole d at (r_e, phi_s, z_e):
//!
//! ```text
//! E = g [c+ E+(r) + c- E-(r)] e^{-r s / (2L)}  -  i b d lobe(s) G(r, z)
//! ```
//!
//! with s the folded angle from the source, c+/- from
//! [`dipole_mode_coupling`], lobe(s) = exp(-s^2 / (2 * 0.3^2)) and G a
//! Gaussian around (r_e, z_e). g and b are set so that the self-field
//! projected on the dipole is chi * Im E_hom, of which a fraction beta is
//! guided.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::bulk_im_field;
use crate::error::{Error, Result};
use crate::field::{folded_angle, FieldMap, FieldVector, GridAxes, Provenance, SourceInfo, ZERO_FIELD};
use crate::model::{CylindricalPoint, DipoleVector, Validate, ValidationReport};
use crate::polarization::dipole_mode_coupling;
use crate::units::{hz_to_angular, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

/// Angular width of the non-guided lobe around the source (rad).
pub const LOBE_WIDTH: f64 = 0.3;

/// Minimum grid points inside +/- sigma of the profile, per axis.
pub const MIN_POINTS_PER_SIGMA: usize = 8;

/// Minimum phi samples per azimuthal period.
pub const MIN_PHI_PER_PERIOD: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModeSpec {
    pub m: i64,
    pub r0: f64,
    pub z0: f64,
    pub sigma_r: f64,
    pub sigma_z: f64,
    /// Radial skew: sigma_r (1 + a) outside r0, sigma_r (1 - a) inside.
    pub asymmetry: f64,
    /// (E_r : E_phi : E_z), rescaled to unit length so max |E| = 1.
    pub ratios: [Complex64; 3],
    /// Energy propagation length (m); infinite for a lossless mode.
    pub l_prop: f64,
    /// Angle the travelling wave is launched from (loss is counted from here).
    #[serde(default)]
    pub launch_phi: f64,
}

impl Validate for SyntheticModeSpec {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::new();
        r.require(self.r0 > 0.0 && self.r0.is_finite(), "r0 > 0");
        r.require(self.z0.is_finite(), "z0 finite");
        r.require(self.sigma_r > 0.0 && self.sigma_z > 0.0, "profile widths > 0");
        r.require(self.asymmetry.abs() < 1.0, "|asymmetry| < 1");
        let norm: f64 = self.ratios.iter().map(|c| c.norm_sqr()).sum();
        r.require(norm > 0.0 && norm.is_finite(), "component ratios non-zero");
        r.require(self.l_prop > 0.0, "l_prop > 0 or infinite");
        r.require(self.launch_phi.is_finite(), "launch angle finite");
        r
    }
}

impl SyntheticModeSpec {
    pub fn unit_ratios(&self) -> [Complex64; 3] {
        let norm = self.ratios.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        self.ratios.map(|c| c / norm)
    }

    fn sigma_in(&self) -> f64 {
        self.sigma_r * (1.0 - self.asymmetry)
    }

    fn sigma_out(&self) -> f64 {
        self.sigma_r * (1.0 + self.asymmetry)
    }

    /// Cross-section profile, 1 at (r0, z0).
    pub fn profile(&self, r: f64, z: f64) -> f64 {
        let dr = r - self.r0;
        let sr = if dr > 0.0 { self.sigma_out() } else { self.sigma_in() };
        let dz = z - self.z0;
        (-(dr * dr) / (2.0 * sr * sr) - (dz * dz) / (2.0 * self.sigma_z * self.sigma_z)).exp()
    }

    /// Lossless travelling-wave field profile(r, z) ratios e^{i m phi}.
    pub fn shape(&self, r: f64, phi: f64, z: f64) -> FieldVector {
        let w = Complex64::from_polar(self.profile(r, z), self.m as f64 * phi);
        self.unit_ratios().map(|c| c * w)
    }

    /// Amplitude factor e^{-r s / (2L)} for folded angle s.
    pub fn decay(&self, r: f64, s: f64) -> f64 {
        if self.l_prop.is_infinite() {
            1.0
        } else {
            (-r * s / (2.0 * self.l_prop)).exp()
        }
    }

    /// Field of the travelling mode, damped with distance from the launch angle.
    pub fn field(&self, r: f64, phi: f64, z: f64) -> FieldVector {
        let k = self.decay(r, folded_angle(phi, self.launch_phi));
        self.shape(r, phi, z).map(|c| c * k)
    }

    /// Counter-propagating partner: order -m, conjugated component ratios.
    pub fn partner(&self) -> Self {
        Self {
            m: -self.m,
            ratios: self.ratios.map(|c| c.conj()),
            ..*self
        }
    }

    /// Requires >= 8 grid points within +/- sigma in r and z and >= 16 phi
    /// samples per azimuthal period.
    pub fn check_grid(&self, axes: &GridAxes) -> Result<()> {
        let count = |axis: &[f64], lo: f64, hi: f64| {
            axis.iter().filter(|&&x| x >= lo - 1e-15 && x <= hi + 1e-15).count()
        };
        let nr = count(axes.r(), self.r0 - self.sigma_in(), self.r0 + self.sigma_out());
        let nz = count(axes.z(), self.z0 - self.sigma_z, self.z0 + self.sigma_z);
        if nr < MIN_POINTS_PER_SIGMA || nz < MIN_POINTS_PER_SIGMA {
            return Err(Error::UnderResolved(format!(
                "{nr} r points and {nz} z points within one sigma (need {MIN_POINTS_PER_SIGMA})"
            )));
        }
        let needed = MIN_PHI_PER_PERIOD * self.m.unsigned_abs().max(1) as usize;
        if axes.phi().len() < needed || axes.full_turn_spacing().is_none() {
            return Err(Error::UnderResolved(format!(
                "need a uniform full-turn phi axis with >= {needed} samples"
            )));
        }
        Ok(())
    }

    /// Smallest grid that passes [`SyntheticModeSpec::check_grid`]: r0 and
    /// z0 are nodes, spacing sigma/4, extending 1.5 sigma either side.
    pub fn default_axes(&self, nphi: usize) -> Result<GridAxes> {
        let hr = self.sigma_in() / 4.0;
        let hz = self.sigma_z / 4.0;
        let kr_in = (1.5 * self.sigma_in() / hr).ceil() as i64;
        let kr_out = (1.5 * self.sigma_out() / hr).ceil() as i64;
        let kz = 6;
        let r: Vec<f64> = (-kr_in..=kr_out).map(|k| self.r0 + k as f64 * hr).collect();
        let z: Vec<f64> = (-kz..=kz).map(|k| self.z0 + k as f64 * hz).collect();
        let phi = (0..nphi).map(|j| 2.0 * PI * j as f64 / nphi as f64).collect();
        GridAxes::new(r, phi, z)
    }
}

/// Single travelling mode sampled on `axes`.
pub fn generate_mode_map(spec: &SyntheticModeSpec, axes: &GridAxes) -> Result<FieldMap> {
    spec.validate().into_result("synthetic mode", ())?;
    spec.check_grid(axes)?;
    FieldMap::from_fn(axes.clone(), None, Provenance::Synthetic, |r, phi, z| {
        spec.field(r, phi, z)
    })
}

/// Dipole-driven field with configured chi and beta. The dipole launches the
/// mode in `mode` (+m) and its partner (-m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivenFieldSpec {
    pub mode: SyntheticModeSpec,
    pub dipole: DipoleVector,
    pub position: CylindricalPoint,
    pub beta_true: f64,
    pub chi_true: f64,
    /// Host index of the bulk reference.
    pub n_host: f64,
    /// Emission angular frequency (rad/s).
    pub omega: f64,
}

impl DrivenFieldSpec {
    /// Bulk reference Im E_hom for this dipole.
    pub fn im_e_hom(&self) -> f64 {
        bulk_im_field(self.n_host, self.omega, self.dipole.magnitude())
    }

    fn check(&self) -> Result<()> {
        self.mode.validate().into_result("synthetic mode", ())?;
        if !(0.0..=1.0).contains(&self.beta_true) {
            return Err(Error::Infeasible(format!(
                "beta_true = {} needs a background of negative power",
                self.beta_true
            )));
        }
        if !(self.chi_true > 0.0 && self.chi_true.is_finite()) {
            return Err(Error::Infeasible(format!("chi_true = {} must be > 0", self.chi_true)));
        }
        if !(self.n_host >= 1.0 && self.omega > 0.0) {
            return Err(Error::Argument("n_host >= 1 and omega > 0 required".into()));
        }
        Ok(())
    }

    /// (g c+, g c-, b): guided launch amplitudes and background strength.
    fn amplitudes(&self) -> Result<(Complex64, Complex64, f64)> {
        self.check()?;
        let p = self.position;
        let plus = self.mode;
        let minus = plus.partner();
        let (cp, cm) = dipole_mode_coupling(
            &self.dipole,
            &plus.shape(p.r, p.phi, p.z),
            &minus.shape(p.r, p.phi, p.z),
        );
        let dmag = self.dipole.magnitude();
        // guided self-field projected on d is -i (|c+|^2 + |c-|^2) / |d| per unit g
        let per_g = (cp.norm_sqr() + cm.norm_sqr()) / dmag;
        let total = (self.chi_true * self.im_e_hom()).abs();
        let g = if self.beta_true == 0.0 {
            0.0
        } else if per_g > 0.0 {
            self.beta_true * total / per_g
        } else {
            return Err(Error::Infeasible(
                "dipole does not couple to the guided modes".into(),
            ));
        };
        let b = (1.0 - self.beta_true) * total / dmag;
        Ok((cp * g, cm * g, b))
    }
}

pub fn generate_driven_map(spec: &DrivenFieldSpec, axes: &GridAxes) -> Result<FieldMap> {
    let p = spec.position;
    if !axes.contains_rz(p.r, p.z) {
        return Err(Error::OutOfHull { r: p.r, z: p.z });
    }
    spec.mode.check_grid(axes)?;
    let (cp, cm, b) = spec.amplitudes()?;
    let plus = spec.mode;
    let minus = plus.partner();
    let d = spec.dipole.components();
    let (sr, sz) = (plus.sigma_r, plus.sigma_z);
    let source = SourceInfo {
        dipole: spec.dipole,
        position: p,
    };
    FieldMap::from_fn(axes.clone(), Some(source), Provenance::Synthetic, |r, phi, z| {
        let s = folded_angle(phi, p.phi);
        let k = plus.decay(r, s);
        let ep = plus.shape(r, phi, z);
        let em = minus.shape(r, phi, z);
        let lobe = (-(s * s) / (2.0 * LOBE_WIDTH * LOBE_WIDTH)).exp()
            * (-((r - p.r) / sr).powi(2) / 2.0 - ((z - p.z) / sz).powi(2) / 2.0).exp();
        let bg = Complex64::new(0.0, -b * lobe);
        let mut out = ZERO_FIELD;
        for i in 0..3 {
            out[i] = (cp * ep[i] + cm * em[i]) * k + bg * d[i];
        }
        out
    })
}

/// Local (r, phi, z) unit vectors at angle phi, in Cartesian components.
fn local_basis(phi: f64) -> [[f64; 3]; 3] {
    let (s, c) = phi.sin_cos();
    [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Im G(R) of the homogeneous-medium dyadic Green's function, as the
/// scalars (A, B) in (k / 4pi) [A I + B R^R^], with x = k R.
fn im_green_coefficients(x: f64) -> (f64, f64) {
    if x < 0.02 {
        let x2 = x * x;
        (
            2.0 / 3.0 - 2.0 * x2 / 15.0 + x2 * x2 / 140.0,
            x2 / 15.0 - x2 * x2 / 210.0,
        )
    } else {
        let (s, c) = x.sin_cos();
        (
            s / x + c / (x * x) - s / (x * x * x),
            -s / x - 3.0 * c / (x * x) + 3.0 * s / (x * x * x),
        )
    }
}

/// Out-of-phase field of a dipole in a homogeneous medium of index `n`:
/// E = -i (k0^2 / eps0) Im G d, whose projection on d at the source is
/// exactly [`bulk_im_field`]. The in-phase part is not modelled (zero).
pub fn bulk_reference_map(
    n: f64,
    omega: f64,
    dipole: DipoleVector,
    position: CylindricalPoint,
    axes: &GridAxes,
) -> Result<FieldMap> {
    if !(n >= 1.0 && omega > 0.0) {
        return Err(Error::Argument("n >= 1 and omega > 0 required".into()));
    }
    let k0 = omega / SPEED_OF_LIGHT;
    let k = n * k0;
    let pref = k0 * k0 / VACUUM_PERMITTIVITY * k / (4.0 * PI);
    let src_basis = local_basis(position.phi);
    let dl = dipole.components();
    let mut d_cart = [Complex64::new(0.0, 0.0); 3];
    for (a, basis) in src_basis.iter().enumerate() {
        for i in 0..3 {
            d_cart[i] += dl[a] * basis[i];
        }
    }
    let src_xyz = position.to_cartesian();
    let source = SourceInfo { dipole, position };
    FieldMap::from_fn(axes.clone(), Some(source), Provenance::Synthetic, |r, phi, z| {
        let p = CylindricalPoint::new(r, phi, z).to_cartesian();
        let rv = [p[0] - src_xyz[0], p[1] - src_xyz[1], p[2] - src_xyz[2]];
        let dist = (rv[0] * rv[0] + rv[1] * rv[1] + rv[2] * rv[2]).sqrt();
        let (a, b) = im_green_coefficients(k * dist);
        let rhat = if dist > 0.0 {
            rv.map(|x| x / dist)
        } else {
            [0.0; 3]
        };
        let rd: Complex64 = (0..3).map(|i| d_cart[i] * rhat[i]).sum();
        let mut e_cart = [Complex64::new(0.0, 0.0); 3];
        for i in 0..3 {
            let img = a * d_cart[i] + b * rhat[i] * rd;
            e_cart[i] = Complex64::new(0.0, -pref) * img;
        }
        let basis = local_basis(phi);
        basis.map(|u| (0..3).map(|i| e_cart[i] * u[i]).sum())
    })
}

/// Mode cross-section used by the shipped presets: m = 24, centred on the
/// 1.463 um trace radius, slightly wider on the outside.
pub fn reference_mode_spec(ratios: [Complex64; 3]) -> SyntheticModeSpec {
    SyntheticModeSpec {
        m: 24,
        r0: 1.463e-6,
        z0: 0.0,
        sigma_r: 90e-9,
        sigma_z: 110e-9,
        asymmetry: 0.1,
        ratios,
        l_prop: f64::INFINITY,
        launch_phi: 0.0,
    }
}

/// Radial-dominant ratios: E_r 2.4 x E_phi, small E_z.
pub fn slot_ratios() -> [Complex64; 3] {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0 / 2.4),
        Complex64::new(0.02, 0.0),
    ]
}

/// Ratios with local ellipticity `eps` at the profile centre.
pub fn chiral_ratios(eps: f64) -> [Complex64; 3] {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, eps),
        Complex64::new(0.02, 0.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivenPreset {
    pub name: &'static str,
    pub spec: DrivenFieldSpec,
}

fn driven(ratios: [Complex64; 3], dipole: DipoleVector, beta: f64, chi: f64, l_prop: f64) -> DrivenFieldSpec {
    DrivenFieldSpec {
        mode: SyntheticModeSpec {
            l_prop,
            ..reference_mode_spec(ratios)
        },
        dipole,
        position: CylindricalPoint::new(1.463e-6, 0.0, 0.0),
        beta_true: beta,
        chi_true: chi,
        n_host: 1.6,
        omega: hz_to_angular(3.947e14),
    }
}

/// Named driven-map configurations.
///
/// - `lossless`: beta 0.995, chi 1330
/// - `lossy`: beta 0.95, chi 243, 15 um propagation length
/// - `unity`: beta 1, chi 3.25
/// - `circular-087` / `circular-075`: right-handed circular dipole where the
///   mode ellipticity is 0.87 / 0.75
/// - `linear-087`: radial dipole at the 0.87 point
pub fn driven_presets() -> Vec<DrivenPreset> {
    let radial = DipoleVector::radial();
    let circ = DipoleVector::circular(1.0, true).expect("valid dipole");
    vec![
        DrivenPreset {
            name: "lossless",
            spec: driven(slot_ratios(), radial, 0.995, 1330.0, f64::INFINITY),
        },
        DrivenPreset {
            name: "lossy",
            spec: driven(slot_ratios(), radial, 0.95, 243.0, 15e-6),
        },
        DrivenPreset {
            name: "unity",
            spec: driven(slot_ratios(), radial, 1.0, 3.25, f64::INFINITY),
        },
        DrivenPreset {
            name: "circular-087",
            spec: driven(chiral_ratios(0.87), circ, 0.995, 1330.0, f64::INFINITY),
        },
        DrivenPreset {
            name: "circular-075",
            spec: driven(chiral_ratios(0.75), circ, 0.995, 1330.0, f64::INFINITY),
        },
        DrivenPreset {
            name: "linear-087",
            spec: driven(chiral_ratios(0.87), radial, 0.995, 1330.0, f64::INFINITY),
        },
    ]
}

pub fn driven_preset(name: &str) -> Option<DrivenFieldSpec> {
    driven_presets().into_iter().find(|p| p.name == name).map(|p| p.spec)
}
