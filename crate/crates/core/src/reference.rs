//! Published figures of merit for the reference GaP slot ring, kept as data
//! so tests and reports can compare against them. None of these are
//! recomputed here; the solver-level values need a full 3D field solution.

/// Emission enhancement of the 1.44 um ring, lossless.
pub const CHI_RING: f64 = 1330.0;
/// Coupling efficiency of the 1.44 um ring, lossless.
pub const BETA_RING: f64 = 0.995;
/// Quality factor as quoted (rounded).
pub const Q_RING_QUOTED: f64 = 27_900.0;
/// Quoted resonance linewidth (Hz).
pub const FWHM_RING_QUOTED_HZ: f64 = 14.2e9;
/// Quoted free spectral range (Hz).
pub const FSR_QUOTED_HZ: f64 = 10e12;
/// Quoted quality factor at the strong/weak crossover.
pub const Q_CRITICAL_QUOTED: f64 = 8_300.0;
/// Lowest quality factor of the dynamics sweep.
pub const Q_LOWEST: f64 = 49.0;

/// Straight slot waveguide.
pub const CHI_STRAIGHT: f64 = 3.25;
pub const BETA_STRAIGHT: f64 = 0.75;

/// Lossy ring example: Im E_r at the dipole for the ring and for bulk
/// (per unit dipole, arbitrary consistent units), and the quoted results.
pub const IM_E_NANO_LOSSY: f64 = -1.11e18;
pub const IM_E_HOM_LOSSY: f64 = -4.55e15;
pub const CHI_LOSSY: f64 = 243.0;
pub const BETA_LOSSY: f64 = 0.949;

/// Ring with reduced Q.
pub const CHI_LOW_Q: f64 = 56.0;
pub const BETA_LOW_Q: f64 = 0.99;

/// Absorbing GaP: imaginary index, resulting Q, propagation length (m).
pub const KAPPA_ABSORBING: f64 = 0.004;
pub const Q_ABSORBING: f64 = 600.0;
pub const L_PROP_ABSORBING: f64 = 15e-6;

/// Roughness datum: sigma, correlation length (m), resulting Q_scat at 760 nm.
pub const ROUGHNESS_SIGMA: f64 = 2e-9;
pub const ROUGHNESS_LCORR: f64 = 10e-9;
pub const Q_SCAT_ROUGH: f64 = 2.1e6;
/// Rougher surface (10 nm / 100 nm) drops Q_scat below this.
pub const Q_SCAT_ROUGHER_BOUND: f64 = 20_000.0;

/// Chiral emission: peak ellipticity, measured directionalities and the
/// per-direction coupling efficiencies at the 0.87 point.
pub const ELLIPTICITY_PEAK: f64 = 0.87;
pub const DIRECTIONALITY_087: f64 = 0.87;
pub const DIRECTIONALITY_075: f64 = 0.75;
pub const DIRECTIONALITY_TOLERANCE: f64 = 0.02;
pub const BETA_PLUS: f64 = 0.86;
pub const BETA_MINUS: f64 = 0.13;

/// Fourier peak position of the m = 24 modes (rad/m).
pub const PEAK_WAVENUMBER: f64 = 16.4e6;

/// Emitter homogeneous linewidth (Hz).
pub const GAMMA_HOM_HZ: f64 = 30e6;
