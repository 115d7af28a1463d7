//! Excited-state dynamics of an emitter coupled to a single lossy resonance.
//!
//! The excited-state amplitude obeys
//!
//! ```text
//! C''(t) + Gamma C'(t) + (K0 / 4) C(t) = 0,    C(0) = 1, C'(0) = 0
//! Gamma = i (omega_cav - omega_e) + gamma_cav / 2
//! K0    = (omega_cav^2 / omega_e^2) chi gamma_cav gamma_hom
//! ```
//!
//! with closed form
//!
//! ```text
//! C(t) = e^{-Gamma t/2} / (2D) [ (D + Gamma) e^{D t/2} + (D - Gamma) e^{-D t/2} ],
//! D = sqrt(Gamma^2 - K0).
//! ```
//!
//! The same equation is the derivative of the memory-kernel form
//! `C'(t) = int_0^t K(t - s) C(s) ds` with `K(t) = -(K0/4) e^{-Gamma t}`;
//! the kernel amplitude -(K0/4) is the one that reproduces the roots
//! (-Gamma +/- D)/2 of the closed form. [`decay_oracle`] integrates the ODE
//! with RK4 and [`decay_volterra`] integrates the kernel form directly, so
//! the closed form can be checked against two independent routes.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_exponential, ExpFit};
use crate::model::{CavityMode, EmitterSpec};

/// |D| below this fraction of |Gamma| switches to the degenerate-root limit.
pub const DEGENERATE_ROOT_TOL: f64 = 1e-6;

/// Relative gap |Gamma^2 - K0| under which the critical point is snapped.
pub const CRITICAL_SNAP_TOL: f64 = 1e-12;

/// Hard limit on max(|Gamma|, sqrt(K0)) * step for the oracle.
pub const ORACLE_STEP_LIMIT: f64 = 0.05;

/// Default per-step rate product when the oracle picks its own substeps.
pub const ORACLE_DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingParams {
    /// Complex loss/detuning rate Gamma (rad/s).
    pub gamma: Complex64,
    /// Exchange rate squared K0 (rad^2/s^2).
    pub k0: f64,
    /// D = sqrt(Gamma^2 - K0), principal branch with Re D >= 0 (Im D >= 0
    /// when D is purely imaginary).
    pub d: Complex64,
    /// omega_cav - omega_e (rad/s).
    pub detuning: f64,
    pub chi: f64,
    pub omega_e: f64,
}

impl CouplingParams {
    /// Builds from raw rates. `chi = 0` gives the uncoupled limit K0 = 0.
    pub fn from_rates(
        omega_e: f64,
        gamma_hom: f64,
        omega_cav: f64,
        gamma_cav: f64,
        chi: f64,
    ) -> Result<Self> {
        if !(chi >= 0.0 && chi.is_finite()) {
            return Err(Error::Argument(format!("chi must be >= 0, got {chi}")));
        }
        if !(omega_e > 0.0 && gamma_hom > 0.0 && omega_cav > 0.0 && gamma_cav > 0.0) {
            return Err(Error::Argument("rates must be positive".into()));
        }
        let detuning = omega_cav - omega_e;
        let gamma = Complex64::new(gamma_cav / 2.0, detuning);
        let k0 = (omega_cav * omega_cav) / (omega_e * omega_e) * chi * gamma_cav * gamma_hom;
        Ok(Self {
            gamma,
            k0,
            d: discriminant_root(gamma, k0),
            detuning,
            chi,
            omega_e,
        })
    }

    /// Resonance/loss rate sqrt(K0) (rad/s).
    pub fn exchange_rate(&self) -> f64 {
        self.k0.sqrt()
    }

    /// Largest rate governing the step size of numerical integrators.
    pub fn stiffness(&self) -> f64 {
        self.gamma.norm().max(self.exchange_rate())
    }

    /// Memory kernel K(t) = -(K0/4) e^{-Gamma t}.
    pub fn kernel(&self, t: f64) -> Complex64 {
        -(self.k0 / 4.0) * (-self.gamma * t).exp()
    }

    /// The two characteristic rates (-Gamma +/- D)/2.
    pub fn roots(&self) -> (Complex64, Complex64) {
        ((-self.gamma + self.d) / 2.0, (-self.gamma - self.d) / 2.0)
    }
}

fn discriminant_root(gamma: Complex64, k0: f64) -> Complex64 {
    let disc = gamma * gamma - k0;
    let scale = (gamma * gamma).norm().max(k0);
    if disc.norm() <= CRITICAL_SNAP_TOL * scale {
        return Complex64::new(0.0, 0.0);
    }
    let mut d = disc.sqrt();
    if d.re < 0.0 || (d.re == 0.0 && d.im < 0.0) {
        d = -d;
    }
    d
}

/// Coupling parameters of `emitter` and `mode` for emission enhancement `chi`.
pub fn coupling_params(emitter: &EmitterSpec, mode: &CavityMode, chi: f64) -> Result<CouplingParams> {
    if !(chi > 0.0) {
        return Err(Error::Argument(format!("chi must be > 0, got {chi}")));
    }
    CouplingParams::from_rates(
        emitter.omega_e(),
        emitter.gamma_hom(),
        mode.omega_cav(),
        mode.gamma_cav(),
        chi,
    )
}

/// C(t) on a uniform time grid starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub probabilities: Vec<f64>,
}

impl DecayCurve {
    fn from_amplitudes(times: Vec<f64>, amplitudes: Vec<Complex64>) -> Self {
        let probabilities = amplitudes.iter().map(|c| c.norm_sqr()).collect();
        Self {
            times,
            amplitudes,
            probabilities,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// max_t |C_a(t) - C_b(t)| for curves on the same grid.
    pub fn max_deviation(&self, other: &DecayCurve) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Times of local minima of |C|^2, refined by a parabola through the
    /// three neighbouring samples.
    pub fn probability_minima(&self) -> Vec<f64> {
        let p = &self.probabilities;
        let mut out = Vec::new();
        for i in 1..p.len().saturating_sub(1) {
            if p[i] < p[i - 1] && p[i] <= p[i + 1] {
                let denom = p[i - 1] - 2.0 * p[i] + p[i + 1];
                let dt = self.times[i] - self.times[i - 1];
                let shift = if denom > 0.0 {
                    0.5 * (p[i - 1] - p[i + 1]) / denom
                } else {
                    0.0
                };
                out.push(self.times[i] + shift * dt);
            }
        }
        out
    }

    /// Indices of local maxima of |C|^2.
    pub fn probability_maxima(&self) -> Vec<usize> {
        let p = &self.probabilities;
        (1..p.len().saturating_sub(1))
            .filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1])
            .collect()
    }

    /// Minima that occur before the oscillation peaks have fallen below
    /// `floor`, i.e. the Rabi dips still visible above that level.
    pub fn visible_minima(&self, floor: f64) -> usize {
        let cutoff = self
            .probability_maxima()
            .into_iter()
            .find(|&i| self.probabilities[i] < floor)
            .map(|i| self.times[i])
            .unwrap_or(f64::INFINITY);
        self.probability_minima()
            .into_iter()
            .filter(|&t| t < cutoff)
            .count()
    }
}

/// Checks that `times` starts at 0 and is uniform; returns the step.
pub fn grid_step(times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::Argument("empty time grid".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::Argument("time grid must start at 0".into()));
    }
    if times.len() == 1 {
        return Ok(0.0);
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Argument("time grid must increase".into()));
    }
    for (i, t) in times.iter().enumerate() {
        if (t - i as f64 * dt).abs() > 1e-9 * dt.max(i as f64 * dt) {
            return Err(Error::NonUniformSampling(format!("time sample {i} off-grid")));
        }
    }
    Ok(dt)
}

/// `n` uniform samples on [0, t_max].
pub fn time_grid(t_max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

/// Time span that shows the decay down to |C|^2 ~ e^-5, and at least four
/// Rabi periods when the roots are oscillatory.
pub fn default_window(p: &CouplingParams) -> f64 {
    let (r1, r2) = p.roots();
    let slow = (-r1.re).min(-r2.re);
    let rate = if slow > 0.0 { 2.0 * slow } else { p.gamma.re };
    let mut t = 5.0 / rate;
    if p.d.im > 0.0 {
        t = t.max(4.0 * std::f64::consts::TAU / p.d.im);
    }
    t
}

/// Closed-form C(t). Uses e^{-Gamma t/2}(1 + Gamma t/2) when D vanishes.
pub fn amplitude_at(p: &CouplingParams, t: f64) -> Complex64 {
    let g = p.gamma;
    let d = p.d;
    if d.norm() <= DEGENERATE_ROOT_TOL * g.norm() {
        return (-g * t / 2.0).exp() * (1.0 + g * t / 2.0);
    }
    // exponents combined so neither term overflows for large D t
    ((d + g) * ((d - g) * t / 2.0).exp() + (d - g) * (-(d + g) * t / 2.0).exp()) / (2.0 * d)
}

pub fn decay_analytic(p: &CouplingParams, times: &[f64]) -> Result<DecayCurve> {
    grid_step(times)?;
    let amps = times.iter().map(|&t| amplitude_at(p, t)).collect();
    Ok(DecayCurve::from_amplitudes(times.to_vec(), amps))
}

/// Substeps per grid interval that keep the RK4 rate product at or below
/// [`ORACLE_DEFAULT_STEP`].
pub fn oracle_substeps(p: &CouplingParams, dt: f64) -> usize {
    ((p.stiffness() * dt / ORACLE_DEFAULT_STEP).ceil() as usize).max(1)
}

fn check_step(p: &CouplingParams, h: f64) -> Result<()> {
    let product = p.stiffness() * h;
    if product >= ORACLE_STEP_LIMIT {
        return Err(Error::StepSize {
            product,
            limit: ORACLE_STEP_LIMIT,
        });
    }
    Ok(())
}

/// RK4 integration of the second-order ODE with one step per grid interval.
/// Fails unless max(|Gamma|, sqrt K0) dt < 0.05.
pub fn decay_oracle(p: &CouplingParams, times: &[f64]) -> Result<DecayCurve> {
    decay_oracle_substepped(p, times, 1)
}

/// As [`decay_oracle`] with `substeps` RK4 steps per grid interval; the
/// step limit applies to dt / substeps.
pub fn decay_oracle_substepped(
    p: &CouplingParams,
    times: &[f64],
    substeps: usize,
) -> Result<DecayCurve> {
    let dt = grid_step(times)?;
    let substeps = substeps.max(1);
    let h = dt / substeps as f64;
    if times.len() > 1 {
        check_step(p, h)?;
    }
    let rhs = |c: Complex64, v: Complex64| (v, -p.gamma * v - (p.k0 / 4.0) * c);
    let (mut c, mut v) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let mut amps = Vec::with_capacity(times.len());
    amps.push(c);
    for _ in 1..times.len() {
        for _ in 0..substeps {
            let (k1c, k1v) = rhs(c, v);
            let (k2c, k2v) = rhs(c + k1c * (h / 2.0), v + k1v * (h / 2.0));
            let (k3c, k3v) = rhs(c + k2c * (h / 2.0), v + k2v * (h / 2.0));
            let (k4c, k4v) = rhs(c + k3c * h, v + k3v * h);
            c += (k1c + 2.0 * k2c + 2.0 * k3c + k4c) * (h / 6.0);
            v += (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (h / 6.0);
        }
        amps.push(c);
    }
    Ok(DecayCurve::from_amplitudes(times.to_vec(), amps))
}

/// Max change of the oracle curve when the step is halved.
pub fn richardson_delta(p: &CouplingParams, times: &[f64], substeps: usize) -> Result<f64> {
    let coarse = decay_oracle_substepped(p, times, substeps)?;
    let fine = decay_oracle_substepped(p, times, 2 * substeps)?;
    Ok(coarse.max_deviation(&fine))
}

/// Direct trapezoid discretization of C'(t) = int_0^t K(t-s) C(s) ds,
/// O(N^2) in the number of steps; meant for cross-validation on short
/// windows. Second-order accurate.
pub fn decay_volterra(p: &CouplingParams, times: &[f64], substeps: usize) -> Result<DecayCurve> {
    let dt = grid_step(times)?;
    let substeps = substeps.max(1);
    let h = dt / substeps as f64;
    if times.len() > 1 {
        check_step(p, h)?;
    }
    let steps = (times.len() - 1) * substeps;
    let kern: Vec<Complex64> = (0..=steps).map(|j| p.kernel(j as f64 * h)).collect();
    let mut c = Vec::with_capacity(steps + 1);
    c.push(Complex64::new(1.0, 0.0));
    // f[n] = C'(t_n) by the trapezoid rule over [0, t_n]
    let mut f_prev = Complex64::new(0.0, 0.0);
    let implicit = 1.0 - (h / 2.0) * (h / 2.0) * kern[0];
    for n in 0..steps {
        let m = n + 1;
        // known part of f[m]: all nodes except the unknown C[m]
        let mut s = 0.5 * kern[m] * c[0];
        for j in 1..m {
            s += kern[m - j] * c[j];
        }
        s *= h;
        let next = (c[n] + (h / 2.0) * (f_prev + s)) / implicit;
        f_prev = s + (h / 2.0) * kern[0] * next;
        c.push(next);
    }
    let amps = c.into_iter().step_by(substeps).collect();
    Ok(DecayCurve::from_amplitudes(times.to_vec(), amps))
}

/// Single-exponential fit of |C|^2 over the samples with probability in
/// [p_lo, p_hi], skipping the fast transient t < 10 / Re Gamma.
pub fn fit_decay_rate(curve: &DecayCurve, p: &CouplingParams, p_lo: f64, p_hi: f64) -> Result<ExpFit> {
    let t_skip = 10.0 / p.gamma.re;
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .times
        .iter()
        .zip(&curve.probabilities)
        .filter(|(t, pr)| **t >= t_skip && **pr >= p_lo && **pr <= p_hi)
        .map(|(t, pr)| (*t, *pr))
        .unzip();
    fit_exponential(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Weak,
    Strong,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Weak => "WEAK",
            Regime::Strong => "STRONG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub rabi_visible: bool,
    /// Probability decay rate Re(Gamma - D) (rad/s), weak regime only.
    pub decay_rate: Option<f64>,
    /// Im D (rad/s), strong regime only.
    pub rabi_frequency: Option<f64>,
}

/// Strong coupling iff K0 > Gamma^2; the boundary itself (within the
/// critical snap tolerance) is weak. Only defined at zero detuning.
pub fn classify_regime(p: &CouplingParams) -> Result<RegimeReport> {
    if p.detuning.abs() > 1e-12 * p.omega_e {
        return Err(Error::Detuned {
            detuning: p.detuning,
        });
    }
    let g2 = p.gamma.re * p.gamma.re;
    let strong = p.k0 > g2 && (p.k0 - g2) > CRITICAL_SNAP_TOL * g2.max(p.k0);
    if strong {
        let rabi = p.d.im;
        Ok(RegimeReport {
            regime: Regime::Strong,
            rabi_visible: rabi >= 2.0 * p.gamma.re,
            decay_rate: None,
            rabi_frequency: Some(rabi),
        })
    } else {
        Ok(RegimeReport {
            regime: Regime::Weak,
            rabi_visible: false,
            decay_rate: Some((p.gamma - p.d).re),
            rabi_frequency: None,
        })
    }
}

/// Resonator family with fixed centre frequency and mode volume, so the
/// emission enhancement scales linearly with Q from a reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSweep {
    pub omega: f64,
    pub gamma_hom: f64,
    pub chi_ref: f64,
    pub q_ref: f64,
}

impl QSweep {
    pub fn chi_at(&self, q: f64) -> f64 {
        self.chi_ref * q / self.q_ref
    }

    pub fn params_at(&self, q: f64) -> Result<CouplingParams> {
        if !(q > 0.0) {
            return Err(Error::Argument(format!("q must be > 0, got {q}")));
        }
        CouplingParams::from_rates(self.omega, self.gamma_hom, self.omega, self.omega / q, self.chi_at(q))
    }

    /// Q at which Gamma^2 = K0, from (omega / 2Q)^2 = chi_ref omega gamma_hom / q_ref.
    pub fn critical_q(&self) -> f64 {
        (self.omega * self.q_ref / (4.0 * self.chi_ref * self.gamma_hom)).sqrt()
    }

    /// K0 - Gamma^2 at zero detuning; positive means strong coupling.
    pub fn margin(&self, q: f64) -> Result<f64> {
        let p = self.params_at(q)?;
        Ok(p.k0 - p.gamma.re * p.gamma.re)
    }

    /// Bisection (in log Q) for the sign change of [`QSweep::margin`].
    pub fn find_critical_q(&self, q_lo: f64, q_hi: f64) -> Result<f64> {
        let (mut lo, mut hi) = (q_lo.ln(), q_hi.ln());
        let f_lo = self.margin(q_lo)?;
        let f_hi = self.margin(q_hi)?;
        if f_lo.signum() == f_hi.signum() {
            return Err(Error::Argument(format!(
                "no regime change between Q = {q_lo} and Q = {q_hi}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.margin(mid.exp())?.signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    /// Classification over many Q values, evaluated in parallel; output order
    /// follows `qs`.
    pub fn classify_all(&self, qs: &[f64]) -> Result<Vec<(CouplingParams, RegimeReport)>> {
        qs.par_iter()
            .map(|&q| {
                let p = self.params_at(q)?;
                Ok((p, classify_regime(&p)?))
            })
            .collect()
    }
}

/// One resonance of a discrete Lorentzian Green's-function model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianLine {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: Complex64,
}

impl LorentzianLine {
    /// a (-i G/2) / (W - w - i G/2); equals `amplitude` on resonance.
    pub fn weight(&self, omega: f64) -> Complex64 {
        let half = Complex64::new(0.0, -self.fwhm / 2.0);
        self.amplitude * half / (Complex64::new(self.center - omega, 0.0) + half)
    }
}

/// Sum of well-separated Lorentzian resonances.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianComb {
    lines: Vec<LorentzianLine>,
}

/// Resonances must satisfy FWHM < 0.1 x the smallest centre spacing.
pub fn lorentzian_green_comb(modes: &[CavityMode], amplitudes: &[Complex64]) -> Result<LorentzianComb> {
    if modes.is_empty() || modes.len() != amplitudes.len() {
        return Err(Error::Argument(
            "need one amplitude per mode and at least one mode".into(),
        ));
    }
    let mut lines: Vec<LorentzianLine> = modes
        .iter()
        .zip(amplitudes)
        .map(|(m, &a)| LorentzianLine {
            center: m.omega_cav(),
            fwhm: m.gamma_cav(),
            amplitude: a,
        })
        .collect();
    lines.sort_by(|a, b| a.center.total_cmp(&b.center));
    if lines.len() > 1 {
        let spacing = lines
            .windows(2)
            .map(|w| w[1].center - w[0].center)
            .fold(f64::INFINITY, f64::min);
        let fwhm = lines.iter().map(|l| l.fwhm).fold(0.0, f64::max);
        if fwhm >= 0.1 * spacing {
            return Err(Error::OverlappingModes { fwhm, spacing });
        }
    }
    Ok(LorentzianComb { lines })
}

impl LorentzianComb {
    pub fn lines(&self) -> &[LorentzianLine] {
        &self.lines
    }

    pub fn weight(&self, omega: f64) -> Complex64 {
        self.lines.iter().map(|l| l.weight(omega)).sum()
    }

    pub fn weights(&self, omegas: &[f64]) -> Vec<Complex64> {
        omegas.par_iter().map(|&w| self.weight(w)).collect()
    }

    /// The line nearest to `omega`: the single-mode restriction used when
    /// the emitter only talks to one resonance.
    pub fn nearest(&self, omega: f64) -> LorentzianLine {
        *self
            .lines
            .iter()
            .min_by(|a, b| (a.center - omega).abs().total_cmp(&(b.center - omega).abs()))
            .expect("comb is non-empty")
    }
}
