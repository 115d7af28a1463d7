use ringqed_core::model::{reference_emitter, reference_mode, CavityMode, EmitterSpec, RingGeometry};
use ringqed_core::synth::{driven_preset, DrivenFieldSpec};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn mode_round_trips_through_toml() {
    let mode = reference_mode().with_v_eff(1.2e-19).unwrap();
    let text = toml::to_string(&mode).unwrap();
    let back: CavityMode = toml::from_str(&text).unwrap();
    assert!(rel(back.omega_cav(), mode.omega_cav()) < 1e-15);
    assert!(rel(back.gamma_cav(), mode.gamma_cav()) < 1e-15);
    assert_eq!(back.m(), mode.m());
    assert_eq!(back.v_eff(), mode.v_eff());
}

#[test]
fn mode_record_checks_nominal_q() {
    let ok = "frequency_hz = 3.947e14\nfwhm_hz = 14.164e9\nm = 24\nq_nominal = 27900\n";
    assert!(toml::from_str::<CavityMode>(ok).is_ok());
    let off = "frequency_hz = 3.947e14\nfwhm_hz = 14.164e9\nm = 24\nq_nominal = 30000\n";
    assert!(toml::from_str::<CavityMode>(off).is_err());
    let extra = "frequency_hz = 3.947e14\nfwhm_hz = 14.164e9\nm = 24\ncolour = 1\n";
    assert!(toml::from_str::<CavityMode>(extra).is_err());
}

#[test]
fn emitter_round_trips_through_toml() {
    let e = reference_emitter();
    let back: EmitterSpec = toml::from_str(&toml::to_string(&e).unwrap()).unwrap();
    assert!(rel(back.omega_e(), e.omega_e()) < 1e-15);
    assert!(rel(back.gamma_hom(), e.gamma_hom()) < 1e-15);
    assert_eq!(back.dipole(), e.dipole());
    assert_eq!(back.position(), e.position());
}

#[test]
fn invalid_emitter_is_rejected_on_load() {
    let text = "frequency_hz = 3.947e14\nlinewidth_hz = 1e13\n\
                dipole = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]\n\
                position = { r = 1.463e-6, phi = 0.0, z = 0.0 }\n";
    assert!(toml::from_str::<EmitterSpec>(text).is_err());
}

#[test]
fn geometry_and_driven_spec_round_trip() {
    for g in [RingGeometry::gap_ring(), RingGeometry::diamond_ring(), RingGeometry::sic_ring()] {
        let back: RingGeometry = toml::from_str(&toml::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
    let d = driven_preset("lossy").unwrap();
    let back: DrivenFieldSpec = toml::from_str(&toml::to_string(&d).unwrap()).unwrap();
    assert_eq!(back, d);
}
