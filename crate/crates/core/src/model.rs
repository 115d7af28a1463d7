//! Shared domain types for an emitter coupled to a slot-waveguide ring.
//!
//! All types are immutable once built. Constructors run [`Validate::validate`]
//! and refuse values that violate an invariant; the report lists every
//! violated rule rather than stopping at the first one.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{angular_to_hz, hz_to_angular, rel_diff};

/// Outcome of checking a value against its invariants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    violations: Vec<String>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `rule` as violated unless `holds`.
    pub fn require(&mut self, holds: bool, rule: &str) {
        if !holds {
            self.violations.push(rule.to_string());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub(crate) fn into_result<T>(self, kind: &'static str, value: T) -> Result<T> {
        if self.passed() {
            Ok(value)
        } else {
            Err(Error::Invalid { kind, report: self })
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "pass")
        } else {
            write!(f, "fail: {}", self.violations.join("; "))
        }
    }
}

/// Invariant checking shared by every domain type.
pub trait Validate {
    fn validate(&self) -> ValidationReport;
}

pub fn validate<T: Validate + ?Sized>(value: &T) -> ValidationReport {
    value.validate()
}

/// A point in ring coordinates: r and z in metres, phi in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylindricalPoint {
    pub r: f64,
    pub phi: f64,
    pub z: f64,
}

impl CylindricalPoint {
    pub fn new(r: f64, phi: f64, z: f64) -> Self {
        Self { r, phi, z }
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        [self.r * self.phi.cos(), self.r * self.phi.sin(), self.z]
    }
}

impl Validate for CylindricalPoint {
    fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        report.require(
            self.r.is_finite() && self.phi.is_finite() && self.z.is_finite(),
            "finite coordinates",
        );
        report.require(self.r >= 0.0, "r >= 0");
        report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleClass {
    Linear,
    CircularPlus,
    CircularMinus,
    General,
}

const DIPOLE_CLASS_TOL: f64 = 1e-9;

/// Transition dipole on the local (r, phi, z) basis. Units are arbitrary;
/// only ratios of dipole-dependent quantities carry meaning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[Complex64; 3]", into = "[Complex64; 3]")]
pub struct DipoleVector {
    components: [Complex64; 3],
}

impl DipoleVector {
    pub fn new(components: [Complex64; 3]) -> Result<Self> {
        let dipole = Self { components };
        dipole.validate().into_result("dipole", dipole)
    }

    pub fn from_real(r: f64, phi: f64, z: f64) -> Result<Self> {
        Self::new([r.into(), phi.into(), z.into()])
    }

    /// Unit radial dipole.
    pub fn radial() -> Self {
        Self {
            components: [Complex64::new(1.0, 0.0), Complex64::default(), Complex64::default()],
        }
    }

    /// sqrt(d/2) (r +/- i phi) with the given magnitude d; `plus` selects
    /// the handedness.
    pub fn circular(magnitude: f64, plus: bool) -> Result<Self> {
        let a = (magnitude / 2.0).sqrt();
        let sign = if plus { 1.0 } else { -1.0 };
        Self::new([
            Complex64::new(a, 0.0),
            Complex64::new(0.0, sign * a),
            Complex64::default(),
        ])
    }

    pub fn components(&self) -> [Complex64; 3] {
        self.components
    }

    pub fn magnitude(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Same dipole multiplied by a complex scalar.
    pub fn scaled(&self, factor: Complex64) -> Result<Self> {
        Self::new(self.components.map(|c| c * factor))
    }

    pub fn conj(&self) -> Self {
        Self {
            components: self.components.map(|c| c.conj()),
        }
    }

    pub fn classify(&self) -> DipoleClass {
        classify_dipole(self)
    }
}

impl Validate for DipoleVector {
    fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        report.require(
            self.components.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
            "finite dipole components",
        );
        report.require(self.magnitude() > 0.0, "dipole magnitude > 0");
        report
    }
}

impl TryFrom<[Complex64; 3]> for DipoleVector {
    type Error = Error;
    fn try_from(components: [Complex64; 3]) -> Result<Self> {
        Self::new(components)
    }
}

impl From<DipoleVector> for [Complex64; 3] {
    fn from(d: DipoleVector) -> Self {
        d.components
    }
}

/// Classifies a dipole as linear, circular (either handedness in the r-phi
/// plane) or general. Invariant under any global complex phase.
pub fn classify_dipole(d: &DipoleVector) -> DipoleClass {
    let c = d.components;
    let norm2: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    // Im(conj(d_i) d_j) vanishes for every pair iff d = e^{i theta} * real vector.
    let mut max_cross = 0.0f64;
    for i in 0..3 {
        for j in (i + 1)..3 {
            max_cross = max_cross.max((c[i].conj() * c[j]).im.abs());
        }
    }
    if max_cross / norm2 <= DIPOLE_CLASS_TOL {
        return DipoleClass::Linear;
    }
    // 2 Im(conj(d_r) d_phi) / |d|^2 reaches +/-1 only for (r +/- i phi)/sqrt(2).
    let s3 = 2.0 * (c[0].conj() * c[1]).im / norm2;
    if (s3 - 1.0).abs() <= DIPOLE_CLASS_TOL {
        DipoleClass::CircularPlus
    } else if (s3 + 1.0).abs() <= DIPOLE_CLASS_TOL {
        DipoleClass::CircularMinus
    } else {
        DipoleClass::General
    }
}

/// Quantum emitter: transition frequency, bulk homogeneous linewidth (both
/// rad/s), transition dipole and position in the ring cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EmitterRecord", into = "EmitterRecord")]
pub struct EmitterSpec {
    omega_e: f64,
    gamma_hom: f64,
    dipole: DipoleVector,
    position: CylindricalPoint,
}

impl EmitterSpec {
    pub fn new(
        omega_e: f64,
        gamma_hom: f64,
        dipole: DipoleVector,
        position: CylindricalPoint,
    ) -> Result<Self> {
        let spec = Self {
            omega_e,
            gamma_hom,
            dipole,
            position,
        };
        spec.validate().into_result("emitter", spec)
    }

    pub fn omega_e(&self) -> f64 {
        self.omega_e
    }
    pub fn gamma_hom(&self) -> f64 {
        self.gamma_hom
    }
    pub fn dipole(&self) -> DipoleVector {
        self.dipole
    }
    pub fn position(&self) -> CylindricalPoint {
        self.position
    }
}

impl Validate for EmitterSpec {
    fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        report.require(self.omega_e.is_finite() && self.omega_e > 0.0, "omega_e > 0");
        report.require(self.gamma_hom.is_finite() && self.gamma_hom > 0.0, "gamma_hom > 0");
        report.require(
            self.gamma_hom < self.omega_e / 100.0,
            "gamma_hom < omega_e / 100",
        );
        report.merge(self.dipole.validate());
        report.merge(self.position.validate());
        report
    }
}

/// On-disk form of [`EmitterSpec`]; frequencies in Hz.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterRecord {
    pub frequency_hz: f64,
    pub linewidth_hz: f64,
    pub dipole: DipoleVector,
    pub position: CylindricalPoint,
}

impl TryFrom<EmitterRecord> for EmitterSpec {
    type Error = Error;
    fn try_from(rec: EmitterRecord) -> Result<Self> {
        EmitterSpec::new(
            hz_to_angular(rec.frequency_hz),
            hz_to_angular(rec.linewidth_hz),
            rec.dipole,
            rec.position,
        )
    }
}

impl From<EmitterSpec> for EmitterRecord {
    fn from(e: EmitterSpec) -> Self {
        Self {
            frequency_hz: angular_to_hz(e.omega_e),
            linewidth_hz: angular_to_hz(e.gamma_hom),
            dipole: e.dipole,
            position: e.position,
        }
    }
}

/// Tolerance when a caller supplies a rounded Q alongside (omega, gamma).
pub const NOMINAL_Q_TOLERANCE: f64 = 2e-3;

/// A resonator mode. `gamma_cav` is the FWHM energy decay rate, so the
/// complex eigenfrequency is omega_cav + i gamma_cav / 2 and Q is always
/// recomputed as omega_cav / gamma_cav.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CavityModeRecord", into = "CavityModeRecord")]
pub struct CavityMode {
    omega_cav: f64,
    gamma_cav: f64,
    m: i64,
    v_eff: Option<f64>,
    n_eff: Option<f64>,
}

impl CavityMode {
    pub fn new(omega_cav: f64, gamma_cav: f64, m: i64) -> Result<Self> {
        let mode = Self {
            omega_cav,
            gamma_cav,
            m,
            v_eff: None,
            n_eff: None,
        };
        mode.validate().into_result("cavity mode", mode)
    }

    /// Builds from a quality factor at fixed centre frequency.
    pub fn from_q(omega_cav: f64, q: f64, m: i64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::Argument(format!("q must be positive, got {q}")));
        }
        Self::new(omega_cav, omega_cav / q, m)
    }

    /// Builds from a complex eigenfrequency written as 2pi (re + i im) Hz,
    /// where the imaginary part is gamma_cav / 2.
    pub fn from_complex_eigenfrequency_hz(re_hz: f64, im_hz: f64, m: i64) -> Result<Self> {
        Self::new(hz_to_angular(re_hz), 2.0 * hz_to_angular(im_hz), m)
    }

    /// Like [`CavityMode::new`] but also checks a rounded, externally quoted
    /// Q against the recomputed one (relative tolerance 0.2%).
    pub fn with_nominal_q(omega_cav: f64, gamma_cav: f64, m: i64, q_nominal: f64) -> Result<Self> {
        let mode = Self::new(omega_cav, gamma_cav, m)?;
        let mut report = ValidationReport::new();
        report.require(
            rel_diff(mode.q(), q_nominal) <= NOMINAL_Q_TOLERANCE,
            "nominal q within 0.2% of omega_cav / gamma_cav",
        );
        report.into_result("cavity mode", mode)
    }

    pub fn with_v_eff(mut self, v_eff: f64) -> Result<Self> {
        self.v_eff = Some(v_eff);
        self.validate().into_result("cavity mode", self)
    }

    pub fn with_n_eff(mut self, n_eff: f64) -> Result<Self> {
        self.n_eff = Some(n_eff);
        self.validate().into_result("cavity mode", self)
    }

    pub fn omega_cav(&self) -> f64 {
        self.omega_cav
    }
    pub fn gamma_cav(&self) -> f64 {
        self.gamma_cav
    }
    pub fn m(&self) -> i64 {
        self.m
    }
    pub fn q(&self) -> f64 {
        self.omega_cav / self.gamma_cav
    }
    pub fn v_eff(&self) -> Option<f64> {
        self.v_eff
    }
    pub fn n_eff(&self) -> Option<f64> {
        self.n_eff
    }

    /// FWHM of the resonance in Hz.
    pub fn fwhm_hz(&self) -> f64 {
        angular_to_hz(self.gamma_cav)
    }

    pub fn frequency_hz(&self) -> f64 {
        angular_to_hz(self.omega_cav)
    }

    /// Copy of this mode shifted to another centre frequency, same FWHM.
    pub fn shifted_to(&self, omega_cav: f64) -> Result<Self> {
        let mut mode = *self;
        mode.omega_cav = omega_cav;
        mode.validate().into_result("cavity mode", mode)
    }
}

impl Validate for CavityMode {
    fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        report.require(
            self.omega_cav.is_finite() && self.omega_cav > 0.0,
            "omega_cav > 0",
        );
        report.require(
            self.gamma_cav.is_finite() && self.gamma_cav > 0.0,
            "gamma_cav > 0",
        );
        report.require(
            (self.q() * self.gamma_cav / self.omega_cav - 1.0).abs() <= 1e-12,
            "q = omega_cav / gamma_cav",
        );
        if let Some(v) = self.v_eff {
            report.require(v.is_finite() && v > 0.0, "v_eff > 0");
        }
        if let Some(n) = self.n_eff {
            report.require(n.is_finite() && n > 0.0, "n_eff > 0");
        }
        report
    }
}

/// On-disk form of [`CavityMode`]; frequencies in Hz.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityModeRecord {
    pub frequency_hz: f64,
    pub fwhm_hz: f64,
    pub m: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_nominal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_eff_m3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eff: Option<f64>,
}

impl TryFrom<CavityModeRecord> for CavityMode {
    type Error = Error;
    fn try_from(rec: CavityModeRecord) -> Result<Self> {
        let omega = hz_to_angular(rec.frequency_hz);
        let gamma = hz_to_angular(rec.fwhm_hz);
        let mut mode = match rec.q_nominal {
            Some(q) => CavityMode::with_nominal_q(omega, gamma, rec.m, q)?,
            None => CavityMode::new(omega, gamma, rec.m)?,
        };
        if let Some(v) = rec.v_eff_m3 {
            mode = mode.with_v_eff(v)?;
        }
        if let Some(n) = rec.n_eff {
            mode = mode.with_n_eff(n)?;
        }
        Ok(mode)
    }
}

impl From<CavityMode> for CavityModeRecord {
    fn from(m: CavityMode) -> Self {
        Self {
            frequency_hz: m.frequency_hz(),
            fwhm_hz: m.fwhm_hz(),
            m: m.m,
            q_nominal: None,
            v_eff_m3: m.v_eff,
            n_eff: m.n_eff,
        }
    }
}

/// Cross-section of a slot-waveguide ring. `radius` is the slot centreline;
/// the two high-index bars of width `width` flank a gap of size `gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RingGeometryRecord", into = "RingGeometryRecord")]
pub struct RingGeometry {
    radius: f64,
    width: f64,
    height: f64,
    gap: f64,
    n_high: f64,
    n_slot: f64,
    n_clad: f64,
    kappa_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingGeometryRecord {
    pub radius_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub gap_m: f64,
    pub n_high: f64,
    pub n_slot: f64,
    pub n_clad: f64,
    #[serde(default)]
    pub kappa_high: f64,
}

impl RingGeometry {
    pub fn new(rec: RingGeometryRecord) -> Result<Self> {
        let g = Self {
            radius: rec.radius_m,
            width: rec.width_m,
            height: rec.height_m,
            gap: rec.gap_m,
            n_high: rec.n_high,
            n_slot: rec.n_slot,
            n_clad: rec.n_clad,
            kappa_high: rec.kappa_high,
        };
        g.validate().into_result("ring geometry", g)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn gap(&self) -> f64 {
        self.gap
    }
    pub fn n_high(&self) -> f64 {
        self.n_high
    }
    pub fn n_slot(&self) -> f64 {
        self.n_slot
    }
    pub fn n_clad(&self) -> f64 {
        self.n_clad
    }
    pub fn kappa_high(&self) -> f64 {
        self.kappa_high
    }

    pub fn outer_radius(&self) -> f64 {
        self.radius + self.gap / 2.0 + self.width
    }

    pub fn inner_radius(&self) -> f64 {
        self.radius - self.gap / 2.0 - self.width
    }

    /// pi h (r_o^2 - r_i^2).
    pub fn geometric_volume(&self) -> f64 {
        let (ro, ri) = (self.outer_radius(), self.inner_radius());
        std::f64::consts::PI * self.height * (ro * ro - ri * ri)
    }

    /// Real relative permittivity at (r, z) for the step-index cross-section,
    /// z measured from the ring mid-plane.
    pub fn permittivity(&self, r: f64, z: f64) -> f64 {
        let half_gap = self.gap / 2.0;
        let dr = (r - self.radius).abs();
        let n = if z.abs() > self.height / 2.0 {
            self.n_clad
        } else if dr < half_gap {
            self.n_slot
        } else if dr <= half_gap + self.width {
            self.n_high
        } else {
            self.n_clad
        };
        n * n
    }

    /// Reference slot-waveguide ring: GaP bars
    /// (n = 3.2), 60 nm gap, 135 nm bars, 175 nm height, r = 1.44 um.
    pub fn gap_ring() -> Self {
        Self::new(RingGeometryRecord {
            radius_m: 1.44e-6,
            width_m: 135e-9,
            height_m: 175e-9,
            gap_m: 60e-9,
            n_high: 3.2,
            n_slot: 1.6,
            n_clad: 1.48,
            kappa_high: 0.0,
        })
        .expect("gap-ring preset is valid")
    }

    pub fn diamond_ring() -> Self {
        Self::new(RingGeometryRecord {
            radius_m: 3.1e-6,
            width_m: 180e-9,
            height_m: 230e-9,
            gap_m: 60e-9,
            n_high: 2.4,
            n_slot: 1.6,
            n_clad: 1.48,
            kappa_high: 0.0,
        })
        .expect("diamond preset is valid")
    }

    pub fn sic_ring() -> Self {
        Self::new(RingGeometryRecord {
            radius_m: 2.5e-6,
            width_m: 170e-9,
            height_m: 220e-9,
            gap_m: 60e-9,
            n_high: 2.5,
            n_slot: 1.6,
            n_clad: 1.48,
            kappa_high: 0.0,
        })
        .expect("SiC preset is valid")
    }
}

impl Validate for RingGeometry {
    fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        let lengths = [self.radius, self.width, self.height, self.gap];
        report.require(
            lengths.iter().all(|l| l.is_finite() && *l > 0.0),
            "all lengths > 0",
        );
        report.require(self.n_clad >= 1.0, "n_clad >= 1");
        report.require(self.n_slot >= 1.0, "n_slot >= 1");
        report.require(self.n_high > self.n_clad, "n_high > n_clad");
        report.require(self.n_high > self.n_slot, "n_high > n_slot");
        report.require(self.kappa_high >= 0.0, "kappa_high >= 0");
        report.require(self.inner_radius() > 0.0, "inner radius > 0");
        report
    }
}

impl TryFrom<RingGeometryRecord> for RingGeometry {
    type Error = Error;
    fn try_from(rec: RingGeometryRecord) -> Result<Self> {
        RingGeometry::new(rec)
    }
}

impl From<RingGeometry> for RingGeometryRecord {
    fn from(g: RingGeometry) -> Self {
        Self {
            radius_m: g.radius,
            width_m: g.width,
            height_m: g.height,
            gap_m: g.gap,
            n_high: g.n_high,
            n_slot: g.n_slot,
            n_clad: g.n_clad,
            kappa_high: g.kappa_high,
        }
    }
}

/// Named material/geometry presets with their quoted radiative Q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialPreset {
    pub name: &'static str,
    pub geometry: RingGeometry,
    pub q_rad: f64,
}

pub fn material_presets() -> [MaterialPreset; 3] {
    [
        MaterialPreset {
            name: "gap-ring",
            geometry: RingGeometry::gap_ring(),
            q_rad: reference_mode().q(),
        },
        MaterialPreset {
            name: "diamond",
            geometry: RingGeometry::diamond_ring(),
            q_rad: 30_000.0,
        },
        MaterialPreset {
            name: "sic",
            geometry: RingGeometry::sic_ring(),
            q_rad: 29_000.0,
        },
    ]
}

pub fn material_preset(name: &str) -> Option<MaterialPreset> {
    material_presets().into_iter().find(|p| p.name == name)
}

/// The m = 24 mode of the reference ring, from its complex eigenfrequency
/// 2pi (3.947e14 + i 7.082e9) rad/s.
pub fn reference_mode() -> CavityMode {
    CavityMode::from_complex_eigenfrequency_hz(3.947e14, 7.082e9, 24)
        .expect("reference mode is valid")
}

/// Organic molecule in the slot: resonant with [`reference_mode`], 30 MHz
/// homogeneous linewidth, radial dipole at the trace radius.
pub fn reference_emitter() -> EmitterSpec {
    EmitterSpec::new(
        reference_mode().omega_cav(),
        hz_to_angular(30e6),
        DipoleVector::radial(),
        CylindricalPoint::new(1.463e-6, 0.0, 0.0),
    )
    .expect("reference emitter is valid")
}
