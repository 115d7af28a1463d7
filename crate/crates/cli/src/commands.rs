use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use ringqed_core::analysis::{
    analyze_emission, bulk_im_field, effective_mode_volume, extract_line_trace, source_im,
    BetaMethod, EmissionOptions, Permittivity, Reliability, UniformPermittivity,
};
use ringqed_core::dynamics::{
    classify_regime, decay_analytic, decay_oracle_substepped, default_window, fit_decay_rate,
    lorentzian_green_comb, oracle_substeps, time_grid, CouplingParams, DecayCurve, QSweep,
    RegimeReport,
};
use ringqed_core::field::linspace;
use ringqed_core::fieldmap_io::{load_field_map, save_field_map};
use ringqed_core::model::material_preset;
use ringqed_core::polarization::{directionality as directionality_of, ellipticity_map as eps_map, wavenumber_spectrum};
use ringqed_core::resonator::{
    kappa_to_propagation_length, peak_fwhm, q_abs_from_propagation, q_scat_rayleigh, q_total,
    transmission_comb_hz, RoughnessSpec,
};
use ringqed_core::synth::{bulk_reference_map, generate_driven_map};
use ringqed_core::units::{angular_to_hz, hz_to_angular};
use ringqed_core::{Component, FieldMap};

use crate::config::RunConfig;
use crate::output::{num, opt, Output};
use crate::CliError;

const CURVE_HEADER: &str = "t_s,re_Ce,im_Ce,prob";

fn load_map(path: Option<&Path>, what: &str) -> Result<FieldMap, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("{what}: no field map given")))?;
    load_field_map(path).map_err(|e| match e {
        ringqed_core::Error::Io(err) => CliError::Io(format!("{}: {err}", path.display())),
        other => CliError::Io(format!("{}: {other}", path.display())),
    })
}

struct DynamicsPoint {
    q: f64,
    p: CouplingParams,
    regime: Option<RegimeReport>,
    curve: DecayCurve,
    fitted_rate: Option<f64>,
    oracle_dev: Option<f64>,
}

pub fn dynamics(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let e = &cfg.emitter;
    let d = &cfg.dynamics;
    let omega_e = hz_to_angular(e.frequency_hz);
    let omega_cav = omega_e + hz_to_angular(e.detuning_hz);
    let gamma_hom = hz_to_angular(e.linewidth_hz);

    let points: Vec<DynamicsPoint> = d
        .q_values
        .par_iter()
        .map(|&q| -> Result<DynamicsPoint, CliError> {
            let chi = e.chi_ref * q / e.q_ref;
            let p = CouplingParams::from_rates(omega_e, gamma_hom, omega_cav, omega_cav / q, chi)?;
            // undefined off resonance; the curve is still written
            let regime = classify_regime(&p).ok();
            let times = time_grid(d.t_max_s.unwrap_or_else(|| default_window(&p)), d.samples);
            let curve = decay_analytic(&p, &times)?;
            let fitted_rate = match regime {
                Some(r) if r.rabi_frequency.is_none() => {
                    fit_decay_rate(&curve, &p, 1e-3, 0.9).ok().map(|f| f.rate)
                }
                _ => None,
            };
            let oracle_dev = if d.oracle {
                let n = oracle_substeps(&p, times[1] - times[0]);
                Some(decay_oracle_substepped(&p, &times, n)?.max_deviation(&curve))
            } else {
                None
            };
            Ok(DynamicsPoint {
                q,
                p,
                regime,
                curve,
                fitted_rate,
                oracle_dev,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut out = Output::new(dir)?;
    for (i, pt) in points.iter().enumerate() {
        let c = &pt.curve;
        let rows = (0..c.len()).map(|k| {
            let a = c.amplitudes[k];
            format!("{},{},{},{}", num(c.times[k]), num(a.re), num(a.im), num(c.probabilities[k]))
        });
        out.csv(&format!("dynamics_{i:03}_q{}.csv", pt.q), CURVE_HEADER, rows)?;
    }
    let summary = points.iter().map(|pt| {
        let (regime, visible, rate, rabi) = match pt.regime {
            Some(r) => (r.regime.as_str(), r.rabi_visible.to_string(), r.decay_rate, r.rabi_frequency),
            None => ("DETUNED", String::new(), None, None),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            num(pt.q),
            num(pt.p.chi),
            regime,
            visible,
            opt(rate),
            opt(pt.fitted_rate),
            opt(rabi),
            opt(pt.oracle_dev)
        )
    });
    out.csv(
        "dynamics_summary.csv",
        "q,chi,regime,rabi_visible,decay_rate_per_s,fitted_rate_per_s,rabi_frequency_rad_per_s,oracle_max_dev",
        summary,
    )?;
    for pt in &points {
        let label = pt.regime.map(|r| r.regime.as_str()).unwrap_or("DETUNED");
        println!("Q = {:>10}  {label}", pt.q);
    }
    out.finish("dynamics", cfg)
}

pub fn sweep_q(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let e = &cfg.emitter;
    if e.detuning_hz != 0.0 {
        return Err(CliError::Config("sweep-q needs zero detuning".into()));
    }
    let s = &cfg.sweep_q;
    let sweep = QSweep {
        omega: hz_to_angular(e.frequency_hz),
        gamma_hom: hz_to_angular(e.linewidth_hz),
        chi_ref: e.chi_ref,
        q_ref: e.q_ref,
    };
    let qs: Vec<f64> = linspace(s.q_min.ln(), s.q_max.ln(), s.points)
        .into_iter()
        .map(f64::exp)
        .collect();
    let results = sweep.classify_all(&qs)?;
    let mut out = Output::new(dir)?;
    let rows = qs.iter().zip(&results).map(|(q, (p, r))| {
        format!(
            "{},{},{},{},{},{}",
            num(*q),
            num(p.chi),
            num(p.k0),
            num(p.k0 - p.gamma.re * p.gamma.re),
            r.regime.as_str(),
            r.rabi_visible
        )
    });
    out.csv("sweep_q.csv", "q,chi,k0_rad2_per_s2,margin_rad2_per_s2,regime,rabi_visible", rows)?;
    let mut crit = vec![format!("closed_form,{}", num(sweep.critical_q()))];
    if let Ok(qc) = sweep.find_critical_q(s.q_min, s.q_max) {
        crit.push(format!("bisection,{}", num(qc)));
    }
    out.csv("sweep_q_critical.csv", "method,q_critical", crit)?;
    println!("critical Q = {:.1}", sweep.critical_q());
    out.finish("sweep-q", cfg)
}

pub fn spectrum(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let s = &cfg.spectrum;
    if s.modes.is_empty() {
        return Err(CliError::Config("spectrum: no modes".into()));
    }
    // rejects overlapping resonances
    let amps = vec![Complex64::new(1.0, 0.0); s.modes.len()];
    lorentzian_green_comb(&s.modes, &amps)?;
    let lo = s
        .modes
        .iter()
        .map(|m| m.frequency_hz() - s.half_widths * m.fwhm_hz())
        .fold(f64::INFINITY, f64::min);
    let hi = s
        .modes
        .iter()
        .map(|m| m.frequency_hz() + s.half_widths * m.fwhm_hz())
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (s.f_min_hz.unwrap_or(lo), s.f_max_hz.unwrap_or(hi));
    if !(hi > lo) {
        return Err(CliError::Config("spectrum: empty frequency range".into()));
    }
    let rows = transmission_comb_hz(&s.modes, &linspace(lo, hi, s.points));
    let mut out = Output::new(dir)?;
    out.csv(
        "spectrum.csv",
        "frequency_Hz,transmission",
        rows.iter().map(|(f, t)| format!("{},{}", num(*f), num(*t))),
    )?;

    // per-mode FWHM measured back from the sampled curve
    let mut centres: Vec<f64> = s.modes.iter().map(|m| m.frequency_hz()).collect();
    centres.sort_by(f64::total_cmp);
    let mut fits = Vec::new();
    for (i, m) in s.modes.iter().enumerate() {
        let f0 = m.frequency_hz();
        let half_gap = centres
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
            / 2.0;
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|(f, _)| (f - f0).abs() < half_gap)
            .copied()
            .unzip();
        let fitted = peak_fwhm(&xs, &ys).ok();
        fits.push(format!("{i},{},{},{}", num(f0), num(m.fwhm_hz()), opt(fitted)));
    }
    out.csv("spectrum_modes.csv", "mode,frequency_Hz,fwhm_Hz,fitted_fwhm_Hz", fits)?;
    out.finish("spectrum", cfg)
}

pub fn qbudget(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let b = &cfg.qbudget;
    let q_scat = match &b.roughness {
        Some(r) => {
            let s = q_scat_rayleigh(&RoughnessSpec {
                sigma_rms: r.sigma_rms_m,
                l_corr: r.l_corr_m,
                wavelength: r.wavelength_m,
            })?;
            if !s.calibrated_wavelength {
                eprintln!(
                    "warning: roughness model is calibrated at 760 nm only; no wavelength scaling applied"
                );
            }
            Some(s.q_scat)
        }
        None => b.q_scat,
    };
    let q_abs = match &b.absorption {
        Some(a) => {
            let l = match (a.l_prop_m, a.kappa) {
                (Some(l), _) => l,
                (None, Some(k)) => kappa_to_propagation_length(k, a.wavelength_m)?,
                (None, None) => unreachable!("checked on load"),
            };
            if l.is_infinite() {
                None
            } else {
                Some(q_abs_from_propagation(l, a.n_group, a.wavelength_m)?)
            }
        }
        None => b.q_abs,
    };
    let budget = q_total(b.q_rad, q_scat, q_abs)?;
    let mut rows: Vec<String> = budget
        .channels()
        .iter()
        .filter_map(|(name, q)| q.map(|q| format!("{name},{}", num(q))))
        .collect();
    rows.push(format!("total,{}", num(budget.q_total)));
    let mut out = Output::new(dir)?;
    out.csv("qbudget.csv", "channel,q", rows)?;
    println!("Q_total = {:.1}", budget.q_total);
    out.finish("qbudget", cfg)
}

pub fn analyze_field(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let a = &cfg.analyze_field;
    let map = load_map(a.map.as_deref(), "analyze-field")?;
    let src = *map
        .source()
        .ok_or_else(|| CliError::Config("field map has no source description".into()))?;
    let omega = hz_to_angular(a.frequency_hz);
    let im_e_hom = match &a.bulk_map {
        Some(p) => {
            let bulk = load_map(Some(p), "bulk map")?;
            source_im(&src.dipole, &bulk.sample(src.position)?)
        }
        None => bulk_im_field(a.n_host, omega, src.dipole.magnitude()),
    };
    let metrics = analyze_emission(
        &map,
        &EmissionOptions {
            im_e_hom,
            omega_e: omega,
            r_trace: a.r_trace_m,
            z_trace: a.z_trace_m,
            with_beta: a.beta,
        },
    )?;
    let eps: Option<Box<dyn Permittivity>> = match (a.v_eff_index, &a.v_eff_geometry) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give v_eff_index or v_eff_geometry, not both".into()))
        }
        (Some(n), None) => Some(Box::new(UniformPermittivity(n * n))),
        (None, Some(name)) => Some(Box::new(
            material_preset(name)
                .ok_or_else(|| CliError::Config(format!("unknown material preset '{name}'")))?
                .geometry,
        )),
        (None, None) => None,
    };
    let v_eff = match eps {
        Some(eps) => Some(effective_mode_volume(&map, eps.as_ref(), src.position)?),
        None => None,
    };

    let mut rows = vec![
        format!("chi,{}", num(metrics.chi)),
        format!("p_dissipated_W,{}", num(metrics.p_dissipated)),
        format!("im_e_hom_V_per_m,{}", num(im_e_hom)),
    ];
    if let Some(b) = &metrics.beta {
        rows.push(format!("beta,{}", num(b.beta)));
        let method = match b.method {
            BetaMethod::Plateau => "PLATEAU",
            BetaMethod::Envelope => "ENVELOPE",
        };
        rows.push(format!("beta_method,{method}"));
        let rel = match b.reliability {
            Reliability::Reliable => "RELIABLE",
            Reliability::Unreliable => "UNRELIABLE",
        };
        rows.push(format!("beta_reliability,{rel}"));
        rows.push(format!("azimuthal_order,{}", b.order));
        rows.push(format!("source_im,{}", num(b.source_value.im)));
        rows.push(format!("far_value,{}", num(b.far_value)));
        if let Some(s) = b.plateau_slope {
            rows.push(format!("plateau_slope_per_rad,{}", num(s)));
        }
        if let Some(env) = &b.envelope {
            rows.push(format!("envelope_rate_per_rad,{}", num(env.rate_per_rad)));
            rows.push(format!("envelope_rel_rms,{}", num(env.rel_rms)));
            rows.push(format!("envelope_windows,{}", env.windows));
            rows.push(format!("beta_raw,{}", num(env.raw_beta)));
        }
    }
    if let Some(v) = v_eff {
        rows.push(format!("v_eff_m3,{}", num(v)));
    }
    let mut out = Output::new(dir)?;
    out.csv("analyze_field.csv", "metric,value", rows)?;
    out.finish("analyze-field", cfg)?;
    if let Some(b) = &metrics.beta {
        if b.reliability == Reliability::Unreliable {
            return Err(CliError::Numerical(format!(
                "beta extraction UNRELIABLE (envelope residual {:.3})",
                b.envelope.map(|e| e.rel_rms).unwrap_or(f64::NAN)
            )));
        }
    }
    Ok(())
}

pub fn ellipticity_map(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let c = &cfg.ellipticity_map;
    let map = load_map(c.map.as_deref(), "ellipticity-map")?;
    let em = eps_map(&map, c.phi_rad);
    let nz = em.z.len();
    let rows = (0..em.epsilon.len()).map(|k| {
        format!(
            "{},{},{},{}",
            num(em.r[k / nz]),
            num(em.z[k % nz]),
            num(em.epsilon[k]),
            u8::from(em.masked[k])
        )
    });
    let mut out = Output::new(dir)?;
    out.csv("ellipticity_map.csv", "r_m,z_m,epsilon,ez_flag", rows)?;
    out.finish("ellipticity-map", cfg)
}

pub fn directionality(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let c = &cfg.directionality;
    let map = load_map(c.map.as_deref(), "directionality")?;
    let src = map.source().map(|s| s.position);
    let r = c.r_trace_m.or(src.map(|p| p.r)).unwrap_or(1.463e-6);
    let z = c.z_trace_m.or(src.map(|p| p.z)).unwrap_or(0.0);
    let trace = extract_line_trace(&map, r, z, Component::R)?;
    let mut report = directionality_of(&trace, c.m)?;
    if let Some(b) = c.beta_total {
        if !(0.0..=1.0).contains(&b) {
            return Err(CliError::Config(format!("beta_total = {b} outside [0, 1]")));
        }
        report = report.with_beta(b);
    }
    let spec = wavenumber_spectrum(&trace);
    let mut out = Output::new(dir)?;
    out.json("directionality.json", &report)?;
    out.csv(
        "wavenumber_spectrum.csv",
        "order,k_rad_per_m,amplitude",
        (0..spec.orders.len())
            .map(|i| format!("{},{},{}", spec.orders[i], num(spec.k[i]), num(spec.amplitude[i]))),
    )?;
    println!(
        "directionality = {:.4} (peaks at {:.2} / {:.2} rad/um)",
        report.directionality,
        report.k_plus * 1e-6,
        report.k_minus * 1e-6
    );
    out.finish("directionality", cfg)
}

pub fn synth(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let s = &cfg.synth;
    let spec = s.resolve()?;
    let name = if s.spec.is_some() { "custom" } else { s.preset.as_str() };
    let axes = spec.mode.default_axes(s.nphi)?;
    let map = generate_driven_map(&spec, &axes)?;
    let mut out = Output::new(dir)?;
    let file = format!("synth_{name}.fieldmap.csv");
    save_field_map(&map, &out.path(&file))?;
    out.register(&file, "field map");
    if s.bulk {
        let bulk = bulk_reference_map(spec.n_host, spec.omega, spec.dipole, spec.position, &axes)?;
        let file = format!("bulk_{name}.fieldmap.csv");
        save_field_map(&bulk, &out.path(&file))?;
        out.register(&file, "field map");
    }
    out.csv(
        &format!("synth_{name}_truth.csv"),
        "quantity,value",
        [
            format!("beta_true,{}", num(spec.beta_true)),
            format!("chi_true,{}", num(spec.chi_true)),
            format!("l_prop_m,{}", num(spec.mode.l_prop)),
            format!("im_e_hom_V_per_m,{}", num(spec.im_e_hom())),
            format!("n_host,{}", num(spec.n_host)),
            format!("frequency_Hz,{}", num(angular_to_hz(spec.omega))),
        ],
    )?;
    out.finish("synth", cfg)
}
