//! Complex electric-field maps on a cylindrical (r, phi, z) grid and the
//! azimuthal line traces cut from them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CylindricalPoint, DipoleVector, Validate, ValidationReport};
use crate::units::TWO_PI;

/// Complex field vector (E_r, E_phi, E_z).
pub type FieldVector = [Complex64; 3];

pub const ZERO_FIELD: FieldVector = [Complex64::new(0.0, 0.0); 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Synthetic,
    Ingested,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Synthetic => "SYNTHETIC",
            Provenance::Ingested => "INGESTED",
        }
    }
}

/// Field component selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    R,
    Phi,
    Z,
}

impl Component {
    pub fn index(&self) -> usize {
        match self {
            Component::R => 0,
            Component::Phi => 1,
            Component::Z => 2,
        }
    }
}

/// The dipole that drove a map and where it sat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub dipole: DipoleVector,
    pub position: CylindricalPoint,
}

/// Grid axes, each strictly increasing. The phi axis lies in [0, 2pi) and
/// never repeats the seam point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes {
    r: Vec<f64>,
    phi: Vec<f64>,
    z: Vec<f64>,
}

impl GridAxes {
    pub fn new(r: Vec<f64>, phi: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let axes = Self { r, phi, z };
        axes.validate().into_result("grid axes", axes)
    }

    /// Uniform grid: `nr` points on [r_min, r_max], `nz` on [z_min, z_max]
    /// and `nphi` points covering the full turn starting at phi = 0.
    pub fn uniform(
        (r_min, r_max, nr): (f64, f64, usize),
        nphi: usize,
        (z_min, z_max, nz): (f64, f64, usize),
    ) -> Result<Self> {
        Self::new(
            linspace(r_min, r_max, nr),
            (0..nphi).map(|j| TWO_PI * j as f64 / nphi as f64).collect(),
            linspace(z_min, z_max, nz),
        )
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.r.len() * self.phi.len() * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ir: usize, iz: usize, iphi: usize) -> usize {
        (ir * self.z.len() + iz) * self.phi.len() + iphi
    }

    /// Uniform phi spacing if the axis is a uniform sampling of the full
    /// turn, None otherwise.
    pub fn full_turn_spacing(&self) -> Option<f64> {
        let n = self.phi.len();
        if n < 2 {
            return None;
        }
        let d = TWO_PI / n as f64;
        let uniform = self
            .phi
            .iter()
            .enumerate()
            .all(|(j, p)| (p - self.phi[0] - j as f64 * d).abs() <= 1e-9 * TWO_PI);
        uniform.then_some(d)
    }

    pub fn contains_rz(&self, r: f64, z: f64) -> bool {
        within(&self.r, r) && within(&self.z, z)
    }
}

impl Validate for GridAxes {
    fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        for (name, axis) in [("r", &self.r), ("phi", &self.phi), ("z", &self.z)] {
            report.require(!axis.is_empty(), &format!("{name} axis non-empty"));
            report.require(
                axis.iter().all(|x| x.is_finite()),
                &format!("{name} axis finite"),
            );
            report.require(
                axis.windows(2).all(|w| w[1] > w[0]),
                &format!("{name} axis strictly increasing"),
            );
        }
        report.require(self.r.iter().all(|&r| r >= 0.0), "r axis >= 0");
        report.require(
            self.phi.iter().all(|&p| (0.0..TWO_PI).contains(&p)),
            "phi axis within [0, 2pi) without seam duplicate",
        );
        report
    }
}

fn within(axis: &[f64], x: f64) -> bool {
    match (axis.first(), axis.last()) {
        (Some(&lo), Some(&hi)) => x >= lo && x <= hi,
        _ => false,
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Bracketing index and fractional offset of `x` on a sorted axis.
fn bracket(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    if !within(axis, x) {
        return None;
    }
    if axis.len() == 1 {
        return Some((0, 0.0));
    }
    let hi = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1);
    let lo = hi - 1;
    let t = (x - axis[lo]) / (axis[hi] - axis[lo]);
    Some((lo, t))
}

/// Complex field map with provenance and optional source description.
#[derive(Debug, Clone)]
pub struct FieldMap {
    axes: GridAxes,
    values: Vec<FieldVector>,
    source: Option<SourceInfo>,
    provenance: Provenance,
}

impl FieldMap {
    /// `values` is laid out r-major, then z, with phi fastest (see
    /// [`GridAxes::index`]).
    pub fn new(
        axes: GridAxes,
        values: Vec<FieldVector>,
        source: Option<SourceInfo>,
        provenance: Provenance,
    ) -> Result<Self> {
        let map = Self {
            axes,
            values,
            source,
            provenance,
        };
        map.validate().into_result("field map", map)
    }

    /// Evaluates `f(r, phi, z)` on every grid node (in parallel).
    pub fn from_fn<F>(
        axes: GridAxes,
        source: Option<SourceInfo>,
        provenance: Provenance,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(f64, f64, f64) -> FieldVector + Sync,
    {
        let (nz, nphi) = (axes.z.len(), axes.phi.len());
        let values: Vec<FieldVector> = (0..axes.len())
            .into_par_iter()
            .map(|k| {
                let iphi = k % nphi;
                let iz = (k / nphi) % nz;
                let ir = k / (nphi * nz);
                f(axes.r[ir], axes.phi[iphi], axes.z[iz])
            })
            .collect();
        Self::new(axes, values, source, provenance)
    }

    pub fn axes(&self) -> &GridAxes {
        &self.axes
    }
    pub fn values(&self) -> &[FieldVector] {
        &self.values
    }
    pub fn source(&self) -> Option<&SourceInfo> {
        self.source.as_ref()
    }
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn at(&self, ir: usize, iz: usize, iphi: usize) -> FieldVector {
        self.values[self.axes.index(ir, iz, iphi)]
    }

    /// Field along the whole phi axis at (r, z), bilinear in (r, z).
    pub fn ring_at(&self, r: f64, z: f64) -> Result<Vec<FieldVector>> {
        let (ir, tr) = bracket(&self.axes.r, r).ok_or(Error::OutOfHull { r, z })?;
        let (iz, tz) = bracket(&self.axes.z, z).ok_or(Error::OutOfHull { r, z })?;
        let ir1 = (ir + 1).min(self.axes.r.len() - 1);
        let iz1 = (iz + 1).min(self.axes.z.len() - 1);
        let corners = [
            (ir, iz, (1.0 - tr) * (1.0 - tz)),
            (ir1, iz, tr * (1.0 - tz)),
            (ir, iz1, (1.0 - tr) * tz),
            (ir1, iz1, tr * tz),
        ];
        let nphi = self.axes.phi.len();
        Ok((0..nphi)
            .map(|iphi| {
                let mut acc = ZERO_FIELD;
                for &(a, b, w) in &corners {
                    if w == 0.0 {
                        continue;
                    }
                    let v = self.at(a, b, iphi);
                    for c in 0..3 {
                        acc[c] += v[c] * w;
                    }
                }
                acc
            })
            .collect())
    }

    /// Field at an arbitrary point: bilinear in (r, z); trigonometric in phi
    /// for synthetic maps on a uniform full-turn axis, periodic-linear
    /// otherwise.
    pub fn sample(&self, p: CylindricalPoint) -> Result<FieldVector> {
        let ring = self.ring_at(p.r, p.z)?;
        let phi = p.phi.rem_euclid(TWO_PI);
        let spacing = self.axes.full_turn_spacing();
        let mut out = ZERO_FIELD;
        for c in 0..3 {
            let samples: Vec<Complex64> = ring.iter().map(|v| v[c]).collect();
            out[c] = match (self.provenance, spacing) {
                (Provenance::Synthetic, Some(_)) => {
                    trig_interpolate(&samples, self.axes.phi[0], phi)
                }
                _ => periodic_linear(&self.axes.phi, &samples, phi),
            };
        }
        Ok(out)
    }

    /// Field on every (r, z) node at angle `phi`, r-major. Exact on phi
    /// nodes; interpolated as in [`FieldMap::sample`] otherwise.
    pub fn slice_at_phi(&self, phi: f64) -> Vec<FieldVector> {
        let phi = phi.rem_euclid(TWO_PI);
        let (nr, nz, nphi) = (self.axes.r.len(), self.axes.z.len(), self.axes.phi.len());
        let on_node = self
            .axes
            .phi
            .iter()
            .position(|&p| (p - phi).abs() <= 1e-12 * TWO_PI);
        let trig = self.provenance == Provenance::Synthetic && self.axes.full_turn_spacing().is_some();
        (0..nr * nz)
            .into_par_iter()
            .map(|k| {
                let (ir, iz) = (k / nz, k % nz);
                if let Some(iphi) = on_node {
                    return self.at(ir, iz, iphi);
                }
                let base = self.axes.index(ir, iz, 0);
                let ring = &self.values[base..base + nphi];
                let mut out = ZERO_FIELD;
                for c in 0..3 {
                    let samples: Vec<Complex64> = ring.iter().map(|v| v[c]).collect();
                    out[c] = if trig {
                        trig_interpolate(&samples, self.axes.phi[0], phi)
                    } else {
                        periodic_linear(&self.axes.phi, &samples, phi)
                    };
                }
                out
            })
            .collect()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Complex-conjugated copy (time reversal).
    pub fn conj(&self) -> Self {
        Self {
            axes: self.axes.clone(),
            values: self.values.iter().map(|v| v.map(|c| c.conj())).collect(),
            source: self.source,
            provenance: self.provenance,
        }
    }
}

impl Validate for FieldMap {
    fn validate(&self) -> ValidationReport {
        let mut report = self.axes.validate();
        report.require(
            self.values.len() == self.axes.len(),
            "value count matches grid",
        );
        report.require(
            self.values
                .iter()
                .all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite())),
            "finite values",
        );
        if let Some(src) = &self.source {
            report.merge(src.dipole.validate());
            report.merge(src.position.validate());
        }
        report
    }
}

/// Band-limited interpolation of uniform full-turn samples starting at
/// `phi0`. The Nyquist term (even N) is split symmetrically.
pub fn trig_interpolate(samples: &[Complex64], phi0: f64, phi: f64) -> Complex64 {
    let n = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let x = phi - phi0;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, c) in buf.iter().enumerate() {
        let kk = k as i64;
        let ni = n as i64;
        if n % 2 == 0 && kk == ni / 2 {
            let f = (kk as f64) * x;
            acc += c * Complex64::new(f.cos(), 0.0);
        } else {
            let freq = if kk > ni / 2 { kk - ni } else { kk };
            acc += c * Complex64::from_polar(1.0, freq as f64 * x);
        }
    }
    acc / n as f64
}

fn periodic_linear(axis: &[f64], samples: &[Complex64], phi: f64) -> Complex64 {
    let n = axis.len();
    if n == 1 {
        return samples[0];
    }
    let hi = axis.partition_point(|&a| a <= phi);
    let (lo_i, hi_i, lo_phi, hi_phi) = if hi == 0 {
        (n - 1, 0, axis[n - 1] - TWO_PI, axis[0])
    } else if hi == n {
        (n - 1, 0, axis[n - 1], axis[0] + TWO_PI)
    } else {
        (hi - 1, hi, axis[hi - 1], axis[hi])
    };
    let t = (phi - lo_phi) / (hi_phi - lo_phi);
    samples[lo_i] * (1.0 - t) + samples[hi_i] * t
}

/// Angular distance from `source` along the ring, folded into [0, pi].
pub fn folded_angle(phi: f64, source: f64) -> f64 {
    let d = (phi - source).rem_euclid(TWO_PI);
    d.min(TWO_PI - d)
}

/// Complex samples along phi at fixed (r, z).
#[derive(Debug, Clone, PartialEq)]
pub struct LineTrace {
    phi: Vec<f64>,
    values: Vec<Complex64>,
    r_trace: f64,
    z_trace: f64,
    source_phi: Option<f64>,
}

const TRACE_UNIFORMITY_TOL: f64 = 1e-9;

impl LineTrace {
    pub fn new(
        phi: Vec<f64>,
        values: Vec<Complex64>,
        r_trace: f64,
        z_trace: f64,
        source_phi: Option<f64>,
    ) -> Result<Self> {
        let trace = Self {
            phi,
            values,
            r_trace,
            z_trace,
            source_phi,
        };
        let report = trace.validate();
        if !report.passed() && report.violations().iter().any(|v| v.contains("uniform")) {
            return Err(Error::NonUniformSampling(report.to_string()));
        }
        report.into_result("line trace", trace)
    }

    /// Full-turn trace with `values.len()` uniform samples from phi = 0.
    pub fn full_turn(
        values: Vec<Complex64>,
        r_trace: f64,
        z_trace: f64,
        source_phi: Option<f64>,
    ) -> Result<Self> {
        let n = values.len();
        let phi = (0..n).map(|j| TWO_PI * j as f64 / n as f64).collect();
        Self::new(phi, values, r_trace, z_trace, source_phi)
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn r_trace(&self) -> f64 {
        self.r_trace
    }
    pub fn z_trace(&self) -> f64 {
        self.z_trace
    }
    pub fn source_phi(&self) -> Option<f64> {
        self.source_phi
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.phi[1] - self.phi[0]
    }

    pub fn covers_full_turn(&self) -> bool {
        (self.spacing() * self.len() as f64 - TWO_PI).abs() <= 1e-9 * TWO_PI
    }

    /// At least 16 samples per azimuthal period 2pi/|m|.
    pub fn check_order(&self, m: i64) -> Result<()> {
        if m == 0 {
            return Ok(());
        }
        let per_period = TWO_PI / (m.unsigned_abs() as f64) / self.spacing();
        if per_period + 1e-9 < 16.0 {
            return Err(Error::UnderResolved(format!(
                "{per_period:.2} samples per period of m = {m} (need 16)"
            )));
        }
        Ok(())
    }

    /// Index of the sample at the source angle.
    pub fn source_index(&self) -> Result<usize> {
        let src = self
            .source_phi
            .ok_or_else(|| Error::Argument("trace has no source angle".into()))?;
        let (idx, dist) = self
            .phi
            .iter()
            .enumerate()
            .map(|(i, &p)| (i, folded_angle(p, src)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("trace is non-empty");
        if dist > 1e-3 * self.spacing() {
            return Err(Error::Argument(format!(
                "source angle {src} is not on a trace sample (nearest {dist:.3e} rad away)"
            )));
        }
        Ok(idx)
    }

    /// Rigid rotation by `k` samples: values move with the source angle.
    pub fn rolled(&self, k: usize) -> Self {
        let n = self.len();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        for (i, v) in self.values.iter().enumerate() {
            values[(i + k) % n] = *v;
        }
        let shift = k as f64 * self.spacing();
        Self {
            phi: self.phi.clone(),
            values,
            r_trace: self.r_trace,
            z_trace: self.z_trace,
            source_phi: self.source_phi.map(|s| (s + shift).rem_euclid(TWO_PI)),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

impl Validate for LineTrace {
    fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        report.require(self.phi.len() >= 2, "at least two samples");
        report.require(self.phi.len() == self.values.len(), "phi and values match");
        report.require(
            self.values.iter().all(|c| c.re.is_finite() && c.im.is_finite())
                && self.phi.iter().all(|p| p.is_finite()),
            "finite values",
        );
        report.require(self.r_trace > 0.0, "r_trace > 0");
        if self.phi.len() >= 2 {
            let d = self.phi[1] - self.phi[0];
            report.require(d > 0.0, "increasing phi");
            let uniform = self.phi.windows(2).all(|w| {
                ((w[1] - w[0]) - d).abs() <= TRACE_UNIFORMITY_TOL * d.abs().max(PI * 1e-9)
            });
            report.require(uniform, "uniform phi spacing");
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> GridAxes {
        GridAxes::uniform((1.0e-6, 2.0e-6, 5), 64, (-1.0e-7, 1.0e-7, 3)).unwrap()
    }

    #[test]
    fn nan_rejected() {
        let a = axes();
        let mut values = vec![ZERO_FIELD; a.len()];
        values[17][1] = Complex64::new(f64::NAN, 0.0);
        let err = FieldMap::new(a, values, None, Provenance::Ingested).unwrap_err();
        assert!(err.to_string().contains("finite values"), "{err}");
    }

    #[test]
    fn seam_duplicate_rejected() {
        let phi = vec![0.0, PI, TWO_PI];
        assert!(GridAxes::new(vec![1.0], phi, vec![0.0]).is_err());
    }

    #[test]
    fn grid_nodes_are_exact() {
        let a = axes();
        let map = FieldMap::from_fn(a.clone(), None, Provenance::Ingested, |r, phi, z| {
            [
                Complex64::new(r * 1e6, phi),
                Complex64::new(z * 1e7, 0.0),
                Complex64::new(0.0, r * z),
            ]
        })
        .unwrap();
        let ring = map.ring_at(a.r()[2], a.z()[1]).unwrap();
        for (iphi, v) in ring.iter().enumerate() {
            assert_eq!(*v, map.at(2, 1, iphi));
        }
    }

    #[test]
    fn bilinear_is_exact_for_bilinear_fields() {
        let map = FieldMap::from_fn(axes(), None, Provenance::Ingested, |r, _, z| {
            let v = Complex64::new(3.0 * r * 1e6 + 2.0 * z * 1e7 + r * z * 1e13, 1.0);
            [v, v, v]
        })
        .unwrap();
        let (r, z) = (1.37e-6, 0.31e-7);
        let got = map.ring_at(r, z).unwrap()[5][0].re;
        let want = 3.0 * r * 1e6 + 2.0 * z * 1e7 + r * z * 1e13;
        assert!((got - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn out_of_hull() {
        let map = FieldMap::from_fn(axes(), None, Provenance::Ingested, |_, _, _| ZERO_FIELD).unwrap();
        assert!(matches!(map.ring_at(0.5e-6, 0.0), Err(Error::OutOfHull { .. })));
    }

    #[test]
    fn trig_interpolation_is_exact_for_band_limited_signal() {
        let n = 64;
        let samples: Vec<Complex64> = (0..n)
            .map(|j| {
                let p = TWO_PI * j as f64 / n as f64;
                Complex64::from_polar(1.0, 5.0 * p) + 0.5 * Complex64::from_polar(1.0, -3.0 * p)
            })
            .collect();
        let phi = 0.123;
        let want = Complex64::from_polar(1.0, 5.0 * phi) + 0.5 * Complex64::from_polar(1.0, -3.0 * phi);
        let got = trig_interpolate(&samples, 0.0, phi);
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn periodic_linear_wraps_the_seam() {
        let axis = vec![0.0, PI / 2.0, PI, 1.5 * PI];
        let s: Vec<Complex64> = [0.0, 1.0, 2.0, 3.0].iter().map(|&x| x.into()).collect();
        let v = periodic_linear(&axis, &s, 1.75 * PI);
        assert!((v.re - 1.5).abs() < 1e-12);
    }

    #[test]
    fn trace_requires_uniform_spacing() {
        let phi = vec![0.0, 0.1, 0.25, 0.3];
        let vals = vec![Complex64::new(1.0, 0.0); 4];
        assert!(matches!(
            LineTrace::new(phi, vals, 1e-6, 0.0, None),
            Err(Error::NonUniformSampling(_))
        ));
    }

    #[test]
    fn trace_order_resolution() {
        let t = LineTrace::full_turn(vec![Complex64::new(1.0, 0.0); 384], 1e-6, 0.0, None).unwrap();
        assert!(t.check_order(24).is_ok());
        assert!(t.check_order(25).is_err());
    }

    #[test]
    fn folded_angles() {
        assert!((folded_angle(0.1, TWO_PI - 0.1) - 0.2).abs() < 1e-12);
        assert!((folded_angle(PI, 0.0) - PI).abs() < 1e-12);
    }
}
