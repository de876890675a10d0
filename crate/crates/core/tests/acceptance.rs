//! Acceptance checks for the toolkit, one PASS/FAIL line per criterion.
//! Exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use donorspin::bath::{t2_star_theory, BathModel, DispersionConvention, ZnSumMode};
use donorspin::estimators::{
    dipolar_lattice_sum, t2_instantaneous_diffusion, t2_spectral_diffusion, FieldDirection, IdVariant, LatticeSumMode,
    DEFAULT_LATTICE_CUTOFF,
};
use donorspin::fit::{curve_models, fit_named, FitOptions};
use donorspin::hamiltonian::{effective_pulse_area, hamiltonian_matrix, LevelScheme, Mat4, PulseSpec, BALANCED_COUPLING, C64};
use donorspin::lindblad::{
    change_frame, default_t1_rate, evolve, lindblad_rhs, DensityMatrix, DissipatorSet, Drive, DriveGenerator, IntegratorConfig, Segment,
};
use donorspin::sequences::{
    far_detuned_sweep, optical_pump, run_echo, run_ramsey, run_t1_recovery, scramble, EchoParams, RamseyParams, Setup,
};
use donorspin::units::{FieldConfig, MaterialParams};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

const DETUNING_GHZ: f64 = 3570.0;

fn setup_at(field: f64) -> Setup {
    let m = MaterialParams::zno_natural();
    let f = FieldConfig::voigt(field).unwrap();
    let levels = LevelScheme::from_material(&m, &f, 2.0 * PI * DETUNING_GHZ * 1e9).unwrap();
    let pulse = PulseSpec::gaussian(1.9e-12, 1e-12, levels.detuning).unwrap();
    let k = (PI / 2.0) / effective_pulse_area(&levels, &pulse, 1.0).unwrap();
    let mut d = DissipatorSet::radiative(1e-9);
    d.t1_rate = default_t1_rate(field).unwrap();
    Setup::new(levels, d, pulse, k).unwrap()
}

fn with_bath(mut s: Setup, t2_star: f64, samples: usize) -> Setup {
    s.bath = Some(BathModel::gaussian_for_t2_star(t2_star, MaterialParams::zno_natural().g_electron).unwrap());
    s.bath_samples = samples;
    s.seed = 7;
    s
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn fringe_frequency() -> Outcome {
    let s = setup_at(5.0);
    let r = run_ramsey(&s, &RamseyParams::defaults(&s).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let f = r.fringe_fit.ok_or_else(|| format!("no fringe fit: {:?}", r.fringe_fit_error))?.frequency / (2.0 * PI);
    let e = rel(f, 137.9e9);
    check(e < 0.005, format!("fringe {:.3} GHz, {:.3}% from 137.9 GHz", f / 1e9, 100.0 * e))
}

fn t2_star_estimate() -> Outcome {
    let m = MaterialParams::zno_natural();
    let conv = DispersionConvention::default();
    let cont = t2_star_theory(&m, conv).map_err(|e| e.to_string())?.exact.ok_or("no decay")?;
    let lat = BathModel::new(&m, ZnSumMode::lattice_default(&m), conv).map_err(|e| e.to_string())?.t2_star().exact.ok_or("no decay")?;
    let agree = rel(lat, cont);
    check(
        (6e-9..=14e-9).contains(&cont) && agree < 0.15,
        format!("continuum {:.2} ns, lattice {:.2} ns, differ by {:.1}%", cont * 1e9, lat * 1e9, 100.0 * agree),
    )
}

fn instantaneous_diffusion() -> Outcome {
    let m = MaterialParams::zno_natural();
    let t = |theta, v| t2_instantaneous_diffusion(&m, theta, v).map(|e| e.t2.unwrap()).map_err(|e| e.to_string());
    let (half, fifth) = (t(PI / 2.0, IdVariant::PaperConsistent)?, t(PI / 5.0, IdVariant::PaperConsistent)?);
    let expect = (PI / 4.0).sin().powi(2) / (PI / 10.0).sin().powi(2);
    let ratio_err = [IdVariant::PaperConsistent, IdVariant::AsPrinted]
        .into_iter()
        .map(|v| Ok(rel(t(PI / 5.0, v)? / t(PI / 2.0, v)?, expect)))
        .collect::<Result<Vec<f64>, String>>()?;
    let ok = rel(half, 240e-6) < 0.05 && rel(fifth, 1.27e-3) < 0.05 && ratio_err.iter().all(|e| *e < 1e-6);
    check(ok, format!("{:.1} µs at π/2, {:.3} ms at π/5, ratio {:.4} (errors {:?})", half * 1e6, fifth * 1e3, fifth / half, ratio_err))
}

fn spectral_diffusion() -> Outcome {
    let m = MaterialParams::zno_natural();
    let lat = dipolar_lattice_sum(&m, FieldDirection::voigt(), DEFAULT_LATTICE_CUTOFF, LatticeSumMode::Deterministic)
        .map_err(|e| e.to_string())?;
    let t = t2_spectral_diffusion(&m, &lat).map_err(|e| e.to_string())?.t2.ok_or("no decay")?;
    let ok = t > 200e-6 / 1.5 && t < 200e-6 * 1.5 && lat.converged && lat.convergence_change <= 0.01;
    check(ok, format!("{:.1} µs, lattice sum changed {:.2e} under 25% cutoff growth", t * 1e6, lat.convergence_change))
}

fn t2_star_roundtrip() -> Outcome {
    let s = with_bath(setup_at(5.0), 17e-9, 1000);
    let r = run_ramsey(&s, &RamseyParams::defaults(&s).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let t = r.t2_star.ok_or("no T2* fit")?.value("time").ok_or("no time parameter")?;
    check(rel(t, 17e-9) < 0.05, format!("T2* {:.2} ns from 1000 bath samples", t * 1e9))
}

fn echo_and_discrimination() -> Outcome {
    let mut s = with_bath(setup_at(5.0), 17e-9, 1000);
    s.dissipators.ground_dephasing_rate = 1.0 / 50e-6;
    let times: Vec<f64> = (0..12).map(|i| 2e-6 + i as f64 * 148e-6 / 11.0).collect();
    let p = EchoParams { total_times: times, ..EchoParams::defaults(&s).map_err(|e| e.to_string())? };
    let r = run_echo(&s, &p).map_err(|e| e.to_string())?;
    let t2 = r.exp_fit.ok_or("no exponential fit")?.value("time").ok_or("no time parameter")?;

    let cubed = curve_models().get("cubed_exp_decay").unwrap();
    let x: Vec<f64> = (0..30).map(|i| i as f64 * 150e-6 / 29.0).collect();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut wins = 0;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|x| cubed.eval(*x, &[1.0, 50e-6, 0.0]) + noise.sample(&mut rng)).collect();
        let f = fit_named("cubed_exp_decay", &x, &y, None, &FitOptions { compare: vec!["exp_decay".into()], ..Default::default() })
            .map_err(|e| e.to_string())?;
        let cmp = f.model_comparison.ok_or("no comparison")?;
        if cmp[0].residual_norm < cmp[1].residual_norm {
            wins += 1;
        }
    }
    check(rel(t2, 50e-6) < 0.05 && wins >= 190, format!("echo T2 {:.2} µs; cubed model won {wins}/200", t2 * 1e6))
}

fn t1_power_law() -> Outcome {
    let mut pts = Vec::new();
    let mut t1_low = 0.0;
    for b in [2.25, 3.0, 4.0, 5.0] {
        let s = setup_at(b);
        let waits: Vec<f64> = (0..26).map(|i| i as f64 * 0.2 / s.dissipators.t1_rate).collect();
        let t1 = run_t1_recovery(&s, &waits).map_err(|e| e.to_string())?.t1;
        if b == 2.25 {
            t1_low = t1;
        }
        pts.push((b.ln(), t1.ln()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let ok = (slope + 3.5).abs() <= 0.1 && rel(t1_low, 0.1) < 0.05;
    check(ok, format!("T1 ∝ B^{slope:.3}, T1(2.25 T) = {:.4} s", t1_low))
}

fn optical_pumping() -> Outcome {
    let s = setup_at(5.0);
    let p = optical_pump(&scramble(&DensityMatrix::ground_mixture()), &s, s.pump).map_err(|e| e.to_string())?;
    check(
        p.fidelity >= 0.95,
        format!("fidelity {:.4} after {:.0} µs at Ω/2π = {:.0} MHz", p.fidelity, s.pump.duration * 1e6, s.pump.rabi / (2.0 * PI * 1e6)),
    )
}

fn random_state(rng: &mut ChaCha8Rng, pure: bool) -> DensityMatrix {
    let rank = if pure { 1 } else { rng.random_range(1..=4) };
    let mut m = Mat4::zeros();
    for _ in 0..rank {
        let v = nalgebra::Vector4::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let v = v / C64::from(v.norm());
        m += v * v.adjoint() * C64::from(rng.random_range(0.1..1.0));
    }
    let tr = m.trace();
    DensityMatrix::new(m / tr).unwrap()
}

fn random_dissipators(rng: &mut ChaCha8Rng) -> DissipatorSet {
    let b = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
    DissipatorSet {
        radiative_rate: rng.random_range(0.0..2e9),
        branching: [[b[0], 1.0 - b[0]], [b[1], 1.0 - b[1]]],
        t1_rate: rng.random_range(0.0..1e8),
        ground_dephasing_rate: rng.random_range(0.0..5e8),
        beta1: rng.random_range(0.0..0.1),
        beta2: rng.random_range(0.0..1e-11),
    }
}

/// exp(L·t) of the 16×16 Liouvillian, assembled column by column.
fn liouvillian_step(h: &Mat4, d: &DissipatorSet, rabi: f64, t: f64) -> DMatrix<C64> {
    let mut l = DMatrix::<C64>::zeros(16, 16);
    for k in 0..16 {
        let mut e = Mat4::zeros();
        e[(k % 4, k / 4)] = C64::new(1.0, 0.0);
        let col = lindblad_rhs(&e, h, d, rabi);
        for j in 0..16 {
            l[(j, k)] = col[(j % 4, j / 4)];
        }
    }
    (l * C64::from(t)).exp()
}

fn apply(map: &DMatrix<C64>, rho: &Mat4) -> Mat4 {
    let v = map * DVector::from_iterator(16, rho.iter().copied());
    Mat4::from_iterator(v.iter().copied())
}

fn unitary(h: &Mat4, t: f64) -> Mat4 {
    let eig = SymmetricEigen::new(*h);
    let phases = Mat4::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// One randomized piecewise-constant problem: worst (trace, Hermiticity,
/// −min eigenvalue, purity drift, oracle) deviations.
fn integrity_case(seed: u64) -> [f64; 5] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lv = LevelScheme::new(rng.random_range(1e9..5e9), rng.random_range(1e8..1e9), rng.random_range(2e9..1e10)).unwrap();
    let closed = seed % 2 == 0;
    let d = if closed { DissipatorSet::none() } else { random_dissipators(&mut rng) };
    let rho0 = random_state(&mut rng, closed);
    let mut t = 0.0;
    let mut segs = Vec::new();
    let mut expect = *rho0.matrix();
    // the solver reports ρ in the frame of the most recent drive
    let mut frame = lv.detuning;
    for _ in 0..rng.random_range(1..=4) {
        let dt = rng.random_range(0.1e-9..1e-9);
        let rabi = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.0..4e9) };
        let det = lv.detuning + rng.random_range(-2e9..2e9);
        let seg = if rabi == 0.0 {
            Segment::silence(t, t + dt)
        } else {
            Segment { start: t, end: t + dt, drive: Drive::Cw { rabi, detuning: det, coupling_weights: BALANCED_COUPLING } }
        };
        let h = if rabi == 0.0 {
            hamiltonian_matrix(&lv.with_detuning(frame), &[C64::new(0.0, 0.0); 4])
        } else {
            expect = change_frame(&expect, frame, det, t);
            frame = det;
            DriveGenerator::cw(&lv, rabi, det, BALANCED_COUPLING, &d).hamiltonian(0.0)
        };
        expect = if closed {
            let u = unitary(&h, dt);
            u * expect * u.adjoint()
        } else {
            apply(&liouvillian_step(&h, &d, rabi, dt), &expect)
        };
        segs.push(seg);
        t += dt;
    }
    let samples: Vec<f64> = (0..=10).map(|i| i as f64 * t / 10.0).collect();
    let traj = evolve(&rho0, &lv, &segs, &d, &IntegratorConfig::default(), &samples).unwrap();
    let mut worst = [0.0f64; 5];
    for s in &traj.states {
        let diag = s.diagnostics();
        worst[0] = worst[0].max(diag.trace_error);
        worst[1] = worst[1].max(diag.hermiticity);
        worst[2] = worst[2].max(-diag.min_eigenvalue);
        if closed {
            worst[3] = worst[3].max((s.purity() - rho0.purity()).abs());
        }
    }
    worst[4] = (traj.last().unwrap().matrix() - expect).camax();
    worst
}

fn integrity_suite() -> Outcome {
    let mut worst = [0.0f64; 5];
    for seed in 0..1000 {
        let w = catch_unwind(|| integrity_case(seed)).map_err(|_| format!("case {seed} failed to evolve"))?;
        for (a, b) in worst.iter_mut().zip(w) {
            *a = a.max(b);
        }
    }
    let ok = worst[0] <= 1e-9 && worst[1] <= 1e-10 && worst[2] <= 1e-7 && worst[3] <= 1e-8 && worst[4] <= 1e-8;
    check(
        ok,
        format!(
            "1000 cases: trace {:.1e}, hermiticity {:.1e}, min eigenvalue {:.1e}, purity {:.1e}, exponential oracle {:.1e}",
            worst[0], worst[1], -worst[2], worst[3], worst[4]
        ),
    )
}

fn far_detuned() -> Outcome {
    let s = setup_at(5.0);
    let ratios = [5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0, 120.0];
    let pts = far_detuned_sweep(&s.levels, &s.pulse, PI / 2.0, &ratios, &IntegratorConfig::default()).map_err(|e| e.to_string())?;
    let monotone = pts.windows(2).filter(|w| w[1].ratio <= 40.0).all(|w| w[1].relative_error <= w[0].relative_error);
    let far = pts.iter().filter(|p| p.ratio >= 40.0).map(|p| p.relative_error).fold(0.0, f64::max);
    let errs: Vec<String> = pts.iter().map(|p| format!("{}:{:.1e}", p.ratio, p.relative_error)).collect();
    check(monotone && far < 0.02, format!("relative angle error by ratio {}", errs.join(" ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("fringe frequency at 5 T", fringe_frequency),
        ("T2* theory", t2_star_estimate),
        ("instantaneous diffusion", instantaneous_diffusion),
        ("spectral diffusion", spectral_diffusion),
        ("T2* roundtrip", t2_star_roundtrip),
        ("echo roundtrip and model discrimination", echo_and_discrimination),
        ("T1 field dependence", t1_power_law),
        ("optical pumping", optical_pumping),
        ("numerical integrity", integrity_suite),
        ("far-detuned equivalence", far_detuned),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let took = format_duration(start.elapsed());
        match out {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{took}]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{took}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn format_duration(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}
