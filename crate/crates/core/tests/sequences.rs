use std::f64::consts::PI;

use donorspin::bath::BathModel;
use donorspin::hamiltonian::{effective_pulse_area, LevelScheme, PulseSpec};
use donorspin::lindblad::{default_t1_rate, DensityMatrix, DissipatorSet, IntegratorConfig};
use donorspin::sequences::{
    experiments, far_detuned_sweep, optical_pump, run_echo, run_rabi_sweep, run_ramsey, run_t1_recovery, scramble,
    EchoParams, RamseyParams, Setup,
};
use donorspin::units::{FieldConfig, MaterialParams};
use proptest::prelude::*;

const DETUNING_GHZ: f64 = 3570.0;

fn setup_at(field: f64) -> Setup {
    setup_detuned(field, 2.0 * PI * DETUNING_GHZ * 1e9)
}

fn setup_detuned(field: f64, detuning: f64) -> Setup {
    let m = MaterialParams::zno_natural();
    let f = FieldConfig::voigt(field).unwrap();
    let levels = LevelScheme::from_material(&m, &f, detuning).unwrap();
    let pulse = PulseSpec::gaussian(1.9e-12, 1e-12, levels.detuning).unwrap();
    let k = (PI / 2.0) / effective_pulse_area(&levels, &pulse, 1.0).unwrap();
    let mut d = DissipatorSet::radiative(1e-9);
    d.t1_rate = default_t1_rate(field).unwrap();
    Setup::new(levels, d, pulse, k).unwrap()
}

fn with_bath(mut s: Setup, t2_star: f64, samples: usize) -> Setup {
    let g = MaterialParams::zno_natural().g_electron;
    s.bath = Some(BathModel::gaussian_for_t2_star(t2_star, g).unwrap());
    s.bath_samples = samples;
    s.seed = 7;
    s
}

#[test]
fn ramsey_fringe_tracks_the_zeeman_splitting() {
    for b in [1.0, 3.0, 5.0, 7.0] {
        let s = setup_at(b);
        let tl = s.larmor_period();
        let p = RamseyParams { energy: s.energy_for_angle(PI / 2.0).unwrap(), taus: vec![0.5e-9], step: tl / 10.0, points: 40 };
        let r = run_ramsey(&s, &p).unwrap();
        let f = r.fringe_fit.unwrap();
        let rel = (f.frequency - s.levels.omega_e).abs() / s.levels.omega_e;
        assert!(rel < 0.01, "B = {b} T: relative frequency error {rel}");
    }
}

#[test]
fn ramsey_rejects_coarse_steps() {
    let s = setup_at(5.0);
    let p = RamseyParams { step: s.larmor_period() / 4.0, ..RamseyParams::defaults(&s).unwrap() };
    let err = run_ramsey(&s, &p).unwrap_err().to_string();
    assert!(err.contains("under-samples"), "{err}");
}

#[test]
fn gaussian_bath_gives_back_its_dephasing_time() {
    let n = 1000;
    let s = with_bath(setup_at(5.0), 17e-9, n);
    let p = RamseyParams::defaults(&s).unwrap();
    let r = run_ramsey(&s, &p).unwrap();
    let fit = r.t2_star.unwrap();
    let t = fit.value("time").unwrap();
    assert!((t - 17e-9).abs() < 0.05 * 17e-9, "T2* = {t}");

    // Monte Carlo visibility against the analytic envelope; the bound uses
    // the largest possible per-sample variance of cos(δτ).
    let mut clean = s.clone();
    clean.bath = None;
    clean.bath_samples = 1;
    let v0 = run_ramsey(&clean, &RamseyParams { taus: vec![0.0], ..p.clone() }).unwrap().visibility.columns[1][0];
    let bath = s.bath.as_ref().unwrap();
    let se = v0 * (0.5 / n as f64).sqrt();
    for (tau, v) in r.visibility.columns[0].iter().zip(&r.visibility.columns[1]) {
        let expect = v0 * bath.envelope(*tau);
        assert!((v - expect).abs() < 3.0 * se, "tau {tau}: {v} vs {expect} (se {se})");
    }
}

fn echo_params(s: &Setup, times: Vec<f64>) -> EchoParams {
    EchoParams { total_times: times, ..EchoParams::defaults(s).unwrap() }
}

#[test]
fn static_bath_is_refocused() {
    for t2 in [5e-9, 17e-9, 50e-9] {
        let mut s = with_bath(setup_at(5.0), t2, 400);
        s.dissipators.t1_rate = 0.0;
        let r = run_echo(&s, &echo_params(&s, vec![1e-6, 30e-6, 80e-6, 150e-6])).unwrap();
        let (a, se) = (&r.amplitude.columns[1], &r.amplitude.columns[2]);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(mean > 0.1, "echo amplitude {mean}");
        for (v, e) in a.iter().zip(se) {
            assert!((v - mean).abs() < 3.0 * e, "T2* {t2}: amplitudes {a:?} ± {se:?}");
        }
    }
}

#[test]
fn exponential_channel_is_recovered() {
    let mut s = with_bath(setup_at(5.0), 17e-9, 1000);
    s.dissipators.ground_dephasing_rate = 1.0 / 50e-6;
    let times: Vec<f64> = (0..12).map(|i| 2e-6 + i as f64 * 148e-6 / 11.0).collect();
    let r = run_echo(&s, &echo_params(&s, times)).unwrap();
    let t = r.exp_fit.unwrap().value("time").unwrap();
    assert!((t - 50e-6).abs() < 0.05 * 50e-6, "T2 = {t}");
}

#[test]
fn diffusing_detuning_prefers_the_cubed_model() {
    let mut s = with_bath(setup_at(5.0), 17e-9, 1000);
    s.diffusion = Setup::diffusion_for_echo_time(50e-6).unwrap();
    let times: Vec<f64> = (0..12).map(|i| 2e-6 + i as f64 * 98e-6 / 11.0).collect();
    let r = run_echo(&s, &echo_params(&s, times)).unwrap();
    let (e, c) = (r.exp_fit.unwrap(), r.cubed_fit.unwrap());
    assert!(c.residual_norm < e.residual_norm, "cubed {} vs exp {}", c.residual_norm, e.residual_norm);
    let t = c.value("time").unwrap();
    assert!((t - 50e-6).abs() < 0.05 * 50e-6, "T2 = {t}");
}

#[test]
fn t1_follows_the_field_power_law() {
    let fields = [2.25, 3.0, 4.0, 5.0];
    let mut logs = Vec::new();
    for b in fields {
        let s = setup_at(b);
        let waits: Vec<f64> = (0..26).map(|i| i as f64 * 0.2 / s.dissipators.t1_rate).collect();
        let r = run_t1_recovery(&s, &waits).unwrap();
        if b == 2.25 {
            assert!((r.t1 - 0.1).abs() < 0.005, "T1(2.25 T) = {}", r.t1);
        }
        logs.push((b.ln(), (1.0 / r.t1).ln()));
    }
    let n = logs.len() as f64;
    let (mx, my) = (logs.iter().map(|p| p.0).sum::<f64>() / n, logs.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 3.5).abs() < 0.1, "slope {slope}");
}

#[test]
fn zero_energy_reads_the_pump_infidelity() {
    let s = setup_at(5.0);
    let t = run_rabi_sweep(&s, &[0.0]).unwrap();
    let pump = optical_pump(&scramble(&DensityMatrix::ground_mixture()), &s, s.pump).unwrap();
    let infidelity = 1.0 - pump.fidelity;
    assert!(infidelity < 0.05, "{infidelity}");
    assert!((t.p_up[0] - pump.state.p_up()).abs() < 1e-3, "{} vs {}", t.p_up[0], pump.state.p_up());
}

#[test]
fn rabi_oscillation_reaches_full_contrast() {
    // negligible precession during the pulse and Δ·FWHM = 400: each pulse is
    // a plain rotation by its nominal angle
    let s = setup_detuned(0.1, 400.0 / 1.9e-12);
    let e: Vec<f64> = [0.0, PI, 2.0 * PI].iter().map(|a| s.energy_for_angle(*a).unwrap()).collect();
    let t = run_rabi_sweep(&s, &e).unwrap();
    let pump = optical_pump(&scramble(&DensityMatrix::ground_mixture()), &s, s.pump).unwrap();
    assert!(t.p_up[1] > 0.97 * pump.fidelity, "π pulse: {}", t.p_up[1]);
    assert!((t.p_up[2] - t.p_up[0]).abs() < 0.02, "2π pulse: {} vs {}", t.p_up[2], t.p_up[0]);
}

#[test]
fn far_detuned_limit_matches_effective_model() {
    let s = setup_at(5.0);
    let cfg = IntegratorConfig::default();
    let ratios = [5.0, 10.0, 20.0, 40.0, 80.0];
    let pts = far_detuned_sweep(&s.levels, &s.pulse, PI / 2.0, &ratios, &cfg).unwrap();
    // below ratio 40 the non-adiabatic error dominates and shrinks
    // monotonically; above it a residual of order 1e-4 remains
    for w in pts.windows(2).filter(|w| w[1].ratio <= 40.0) {
        assert!(w[1].relative_error <= w[0].relative_error, "{pts:?}");
    }
    for p in pts.iter().filter(|p| p.ratio >= 40.0) {
        assert!(p.relative_error < 0.02, "{p:?}");
    }
}

#[test]
fn registry_runs_experiments_from_tables() {
    let s = setup_at(5.0);
    let names: Vec<&str> = experiments().names().collect();
    for n in ["rabi", "ramsey", "echo", "t1", "pump"] {
        assert!(names.contains(&n), "{n}");
    }
    let table: toml::Table = "energies = [\"0 J\", \"1 pJ\"]".parse().unwrap();
    let out = experiments().get("rabi").unwrap().run(&s, &table).unwrap();
    assert_eq!(out.tables[0].table.len(), 2);
    let bad: toml::Table = "energies = [\"1 s\"]\nangel = 3".parse().unwrap();
    let err = experiments().get("rabi").unwrap().run(&s, &bad).unwrap_err();
    assert_eq!(err.issues().len(), 2, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn traces_stay_physical(energies in proptest::collection::vec(0.0f64..20e-12, 1..4), spread in 0.0f64..0.3) {
        let mut s = setup_at(5.0);
        s.angle_spread = spread;
        s.angle_spread_nodes = 3;
        s.photon_readout = true;
        let t = run_rabi_sweep(&s, &energies).unwrap();
        prop_assert!(t.check_invariants().is_ok());
        for ((u, d), p) in t.p_up.iter().zip(&t.p_down).zip(t.photons.as_ref().unwrap()) {
            prop_assert!(u + d <= 1.0 + 1e-9 && *p >= -1e-9);
        }
    }
}
