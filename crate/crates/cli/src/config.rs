//! TOML run configuration. Every block has defaults equal to the shipped
//! presets, so an empty file (or no file) reproduces the reference setup.

use std::path::{Path, PathBuf};

use ringqed_core::model::reference_mode;
use ringqed_core::synth::{driven_preset, DrivenFieldSpec};
use ringqed_core::CavityMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory; `--out` takes precedence.
    pub output: Option<PathBuf>,
    pub emitter: EmitterConfig,
    pub dynamics: DynamicsConfig,
    pub sweep_q: SweepQConfig,
    pub spectrum: SpectrumConfig,
    pub qbudget: QBudgetConfig,
    pub analyze_field: AnalyzeFieldConfig,
    pub ellipticity_map: EllipticityMapConfig,
    pub directionality: DirectionalityConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output: None,
            emitter: EmitterConfig::default(),
            dynamics: DynamicsConfig::default(),
            sweep_q: SweepQConfig::default(),
            spectrum: SpectrumConfig::default(),
            qbudget: QBudgetConfig::preset(),
            analyze_field: AnalyzeFieldConfig::default(),
            ellipticity_map: EllipticityMapConfig::default(),
            directionality: DirectionalityConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// Emitter and the chi-versus-Q family used by `dynamics` and `sweep-q`.
/// chi scales linearly with Q from (q_ref, chi_ref) at fixed mode volume.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterConfig {
    pub frequency_hz: f64,
    pub linewidth_hz: f64,
    /// Cavity minus emitter frequency.
    pub detuning_hz: f64,
    pub chi_ref: f64,
    pub q_ref: f64,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 3.947e14,
            linewidth_hz: 30e6,
            detuning_hz: 0.0,
            chi_ref: 1330.0,
            q_ref: reference_mode().q(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub q_values: Vec<f64>,
    pub samples: usize,
    /// Fixed window for every curve; per-Q automatic window when absent.
    pub t_max_s: Option<f64>,
    /// Also integrate numerically and report the largest deviation.
    pub oracle: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            q_values: vec![49.0, 600.0, 8300.0, 27900.0],
            samples: 2001,
            t_max_s: None,
            oracle: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepQConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
}

impl Default for SweepQConfig {
    fn default() -> Self {
        Self {
            q_min: 49.0,
            q_max: 27900.0,
            points: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub modes: Vec<CavityMode>,
    /// Frequency range; defaults to `half_widths` FWHMs around the modes.
    pub f_min_hz: Option<f64>,
    pub f_max_hz: Option<f64>,
    pub half_widths: f64,
    pub points: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            modes: vec![reference_mode()],
            f_min_hz: None,
            f_max_hz: None,
            half_widths: 10.0,
            points: 4001,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoughnessConfig {
    pub sigma_rms_m: f64,
    pub l_corr_m: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionConfig {
    /// Either a propagation length or an extinction coefficient.
    pub l_prop_m: Option<f64>,
    pub kappa: Option<f64>,
    pub n_group: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
}

fn default_wavelength() -> f64 {
    760e-9
}

/// Partial quality factors. A channel may be given directly or through its
/// physical model (roughness for scattering, absorption for Q_abs), not both.
/// A `[qbudget]` table lists exactly the channels present; without one the
/// reference ring's radiative Q and roughness are used.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QBudgetConfig {
    pub q_rad: Option<f64>,
    pub q_scat: Option<f64>,
    pub q_abs: Option<f64>,
    pub roughness: Option<RoughnessConfig>,
    pub absorption: Option<AbsorptionConfig>,
}

impl QBudgetConfig {
    pub fn preset() -> Self {
        Self {
            q_rad: Some(reference_mode().q()),
            q_scat: None,
            q_abs: None,
            roughness: Some(RoughnessConfig {
                sigma_rms_m: 2e-9,
                l_corr_m: 10e-9,
                wavelength_m: 760e-9,
            }),
            absorption: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeFieldConfig {
    pub map: Option<PathBuf>,
    /// Bulk reference map; the closed-form bulk field is used without one.
    pub bulk_map: Option<PathBuf>,
    pub n_host: f64,
    pub frequency_hz: f64,
    pub r_trace_m: Option<f64>,
    pub z_trace_m: Option<f64>,
    pub beta: bool,
    /// Uniform index for the mode-volume integral.
    pub v_eff_index: Option<f64>,
    /// Material preset name (gap-ring, diamond, sic) for the mode volume.
    pub v_eff_geometry: Option<String>,
}

impl Default for AnalyzeFieldConfig {
    fn default() -> Self {
        Self {
            map: None,
            bulk_map: None,
            n_host: 1.6,
            frequency_hz: 3.947e14,
            r_trace_m: None,
            z_trace_m: None,
            beta: true,
            v_eff_index: None,
            v_eff_geometry: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipticityMapConfig {
    pub map: Option<PathBuf>,
    pub phi_rad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectionalityConfig {
    pub map: Option<PathBuf>,
    /// Trace radius; source radius (or 1.463 um) when absent.
    pub r_trace_m: Option<f64>,
    pub z_trace_m: Option<f64>,
    pub m: i64,
    /// Total beta to split between the two directions.
    pub beta_total: Option<f64>,
}

impl Default for DirectionalityConfig {
    fn default() -> Self {
        Self {
            map: None,
            r_trace_m: None,
            z_trace_m: None,
            m: 24,
            beta_total: None,
        }
    }
}

/// Synthetic driven map: a named preset with optional overrides, or a full
/// inline spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub preset: String,
    pub spec: Option<DrivenFieldSpec>,
    pub beta_true: Option<f64>,
    pub chi_true: Option<f64>,
    pub l_prop_m: Option<f64>,
    pub nphi: usize,
    /// Also write the bulk reference map on the same grid.
    pub bulk: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            preset: "lossless".into(),
            spec: None,
            beta_true: None,
            chi_true: None,
            l_prop_m: None,
            nphi: 384,
            bulk: false,
        }
    }
}

impl SynthConfig {
    pub fn resolve(&self) -> Result<DrivenFieldSpec, CliError> {
        let mut spec = match self.spec {
            Some(s) => s,
            None => driven_preset(&self.preset)
                .ok_or_else(|| CliError::Config(format!("unknown synth preset '{}'", self.preset)))?,
        };
        if let Some(b) = self.beta_true {
            spec.beta_true = b;
        }
        if let Some(c) = self.chi_true {
            spec.chi_true = c;
        }
        if let Some(l) = self.l_prop_m {
            spec.mode.l_prop = l;
        }
        Ok(spec)
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.check()?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    /// Paths inside a config file are relative to that file.
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.output);
        fix(&mut self.analyze_field.map);
        fix(&mut self.analyze_field.bulk_map);
        fix(&mut self.ellipticity_map.map);
        fix(&mut self.directionality.map);
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.into()));
        let e = &self.emitter;
        if !(e.frequency_hz > 0.0 && e.linewidth_hz > 0.0 && e.chi_ref > 0.0 && e.q_ref > 0.0) {
            return bad("emitter: frequency, linewidth, chi_ref and q_ref must be > 0");
        }
        if self.dynamics.q_values.iter().any(|q| !(*q > 0.0)) {
            return bad("dynamics: q_values must be > 0");
        }
        if self.dynamics.samples < 2 {
            return bad("dynamics: samples must be >= 2");
        }
        if let Some(t) = self.dynamics.t_max_s {
            if !(t > 0.0) {
                return bad("dynamics: t_max_s must be > 0");
            }
        }
        let s = &self.sweep_q;
        if !(s.q_min > 0.0 && s.q_max > s.q_min) || s.points < 2 {
            return bad("sweep_q: need 0 < q_min < q_max and points >= 2");
        }
        if self.spectrum.points < 3 || !(self.spectrum.half_widths > 0.0) {
            return bad("spectrum: need points >= 3 and half_widths > 0");
        }
        let q = &self.qbudget;
        if q.q_scat.is_some() && q.roughness.is_some() {
            return bad("qbudget: give q_scat or roughness, not both");
        }
        if q.q_abs.is_some() && q.absorption.is_some() {
            return bad("qbudget: give q_abs or absorption, not both");
        }
        if let Some(a) = &q.absorption {
            if a.l_prop_m.is_some() == a.kappa.is_some() {
                return bad("qbudget.absorption: give exactly one of l_prop_m and kappa");
            }
        }
        if self.synth.nphi < 4 {
            return bad("synth: nphi must be >= 4");
        }
        Ok(())
    }
}
