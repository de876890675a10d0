use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::engine::Engine;
use super::ensemble::{ensemble_average, Ensemble};
use super::params::{linspace, Params};
use super::{optical_pump, ExperimentTrace, Setup, Step};
use crate::error::{Error, Result};
use crate::fit::{fit_fringe, fit_named, one_over_e_crossing, FitOptions, FitResult, FringeFit, Param};
use crate::hamiltonian::{
    effective_pulse_area, effective_two_level_evolution, rotation_angle_from_population, LevelScheme, PulseSpec, DOWN,
};
use crate::io::Table;
use crate::lindblad::{evolve, DensityMatrix, DissipatorSet, IntegratorConfig, Segment};
use crate::registry::{Named, Registry};
use crate::units::Dimension;

struct Measured {
    p_up: Ensemble,
    p_down: Ensemble,
    photons: Option<Ensemble>,
}

fn part(e: &Ensemble, k: usize, n: usize) -> Ensemble {
    Ensemble { mean: e.mean[k * n..(k + 1) * n].to_vec(), stderr: e.stderr[k * n..(k + 1) * n].to_vec(), samples: e.samples }
}

/// Last readout of every timeline, averaged over the bath ensemble.
fn measure(setup: &Setup, timelines: &[Vec<Step>]) -> Result<Measured> {
    let engine = Engine::prepare(setup, timelines)?;
    let n = timelines.len();
    let photons = setup.photon_readout;
    let all = ensemble_average(setup.bath_samples, |k| {
        let mut row = vec![0.0; if photons { 3 * n } else { 2 * n }];
        for (i, tl) in timelines.iter().enumerate() {
            let r = engine.measure(tl, k)?;
            let last = r.last().ok_or_else(|| Error::invalid("sequence", "timeline has no readout"))?;
            row[i] = last.p_up;
            row[n + i] = last.p_down;
            if photons {
                row[2 * n + i] = last.photons.unwrap_or(0.0);
            }
        }
        Ok(row)
    })?;
    Ok(Measured { p_up: part(&all, 0, n), p_down: part(&all, 1, n), photons: photons.then(|| part(&all, 2, n)) })
}

/// Mean P↑ at the last readout of each timeline.
pub(crate) fn measure_readouts(setup: &Setup, timelines: &[Vec<Step>]) -> Result<Vec<f64>> {
    Ok(measure(setup, timelines)?.p_up.mean)
}

fn trace(setup: &Setup, name: &str, experiment: &str, x: Vec<f64>, m: &Measured) -> Result<ExperimentTrace> {
    let t = ExperimentTrace {
        abscissa_name: name.into(),
        abscissa: x,
        p_up: m.p_up.mean.clone(),
        p_down: m.p_down.mean.clone(),
        p_up_stderr: m.p_up.stderr.clone(),
        photons: m.photons.as_ref().map(|p| p.mean.clone()),
        metadata: json!({ "experiment": experiment, "bath_samples": m.p_up.samples, "setup": setup }),
    };
    t.check_invariants()?;
    Ok(t)
}

/// P↑ after a single control pulse of each energy, starting from the pumped state.
pub fn run_rabi_sweep(setup: &Setup, energies: &[f64]) -> Result<ExperimentTrace> {
    if energies.is_empty() {
        return Err(Error::invalid("experiment.energies", "need at least one energy"));
    }
    if let Some(i) = energies.iter().position(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::invalid(format!("experiment.energies[{i}]"), "must be finite and >= 0"));
    }
    let timelines: Vec<Vec<Step>> = energies.iter().map(|e| setup.timeline(&[(0.0, *e)])).collect();
    let m = measure(setup, &timelines)?;
    trace(setup, "energy_J", "rabi", energies.to_vec(), &m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RamseyParams {
    /// Energy of each of the two pulses, J.
    pub energy: f64,
    /// Start of each delay window, s.
    pub taus: Vec<f64>,
    /// Delay increment inside a window, s.
    pub step: f64,
    /// Delays per window.
    pub points: usize,
}

impl RamseyParams {
    pub fn defaults(setup: &Setup) -> Result<Self> {
        Ok(Self { energy: setup.energy_for_angle(PI / 2.0)?, taus: linspace(0.0, 40e-9, 21), step: setup.larmor_period() / 10.0, points: 24 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RamseyResult {
    pub fringe: ExperimentTrace,
    /// Per window: centre delay, V and its uncertainty.
    #[serde(skip)]
    pub visibility: Table,
    /// Free-frequency fit of the window with the largest V.
    pub fringe_fit: Option<FringeFit>,
    pub fringe_fit_error: Option<String>,
    pub t2_star: Option<FitResult>,
}

/// Checks a delay step against the Larmor period.
fn check_step(key: &str, step: f64, period: f64, points: usize) -> Result<()> {
    let limit = period / 8.0;
    if !(step > 0.0) || step > limit {
        return Err(Error::invalid(
            key,
            format!("delay step {step:e} s under-samples the Larmor period {period:e} s; use a step of at most {limit:e} s"),
        ));
    }
    if points < 4 {
        return Err(Error::invalid(key.replace("step", "points"), "need at least 4 delays per window"));
    }
    Ok(())
}

/// Weights 1/σ² when every σ is positive and finite.
fn inverse_variance(s: &[f64]) -> Option<Vec<f64>> {
    s.iter().all(|v| *v > 0.0 && v.is_finite()).then(|| s.iter().map(|v| 1.0 / (v * v)).collect())
}

pub fn run_ramsey(setup: &Setup, p: &RamseyParams) -> Result<RamseyResult> {
    check_step("experiment.step", p.step, setup.larmor_period(), p.points)?;
    if p.taus.is_empty() || p.taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("experiment.tau", "need at least one delay window, all >= 0"));
    }
    let delays: Vec<f64> = p.taus.iter().flat_map(|t| (0..p.points).map(move |j| t + j as f64 * p.step)).collect();
    let timelines: Vec<Vec<Step>> = delays.iter().map(|d| setup.timeline(&[(0.0, p.energy), (*d, p.energy)])).collect();
    let m = measure(setup, &timelines)?;
    let fringe = trace(setup, "tau_s", "ramsey", delays.clone(), &m)?;

    let w = setup.levels.omega_e;
    let mut visibility = Table::new(&["tau_s", "visibility", "visibility_stderr"]);
    let mut best: Option<(f64, usize)> = None;
    for (k, chunk) in delays.chunks(p.points).enumerate() {
        let y = &m.p_up.mean[k * p.points..(k + 1) * p.points];
        let f = fit_fringe(chunk, y, None, Some(w), None)?;
        let centre = 0.5 * (chunk[0] + chunk[chunk.len() - 1]);
        visibility.push_row(&[centre, f.amplitude, f.amplitude_stderr]);
        if best.is_none_or(|(v, _)| f.amplitude > v) {
            best = Some((f.amplitude, k));
        }
    }
    let (fringe_fit, fringe_fit_error) = match best {
        Some((_, k)) => {
            let x = &delays[k * p.points..(k + 1) * p.points];
            let y = &m.p_up.mean[k * p.points..(k + 1) * p.points];
            match fit_fringe(x, y, None, None, Some(w)) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        None => (None, None),
    };
    let t2_star = if p.taus.len() >= 4 {
        let x = visibility.columns[0].clone();
        let v = visibility.columns[1].clone();
        let weights = inverse_variance(&visibility.columns[2]);
        Some(fit_named("gaussian_decay", &x, &v, weights.as_deref(), &FitOptions::default())?)
    } else {
        None
    };
    let visibility = visibility.comment(format!("fringe amplitude from fixed-frequency fits at {w:e} rad/s"));
    Ok(RamseyResult { fringe, visibility, fringe_fit, fringe_fit_error, t2_star })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoParams {
    pub energy: f64,
    /// τ₁ + τ₂ with τ₁ = τ₂, s.
    pub total_times: Vec<f64>,
    /// Δτ₂ increment, s.
    pub step: f64,
    pub points: usize,
}

impl EchoParams {
    pub fn defaults(setup: &Setup) -> Result<Self> {
        Ok(Self {
            energy: setup.energy_for_angle(PI / 2.0)?,
            total_times: linspace(1e-6, 150e-6, 30),
            step: setup.larmor_period() / 10.0,
            points: 16,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoResult {
    #[serde(skip)]
    pub raw: Table,
    #[serde(skip)]
    pub amplitude: Table,
    pub exp_fit: Option<FitResult>,
    pub cubed_fit: Option<FitResult>,
}

/// Three equal pulses at 0, τ₁ and τ₁ + τ₂ + Δτ₂; the echo amplitude at each
/// τ₁ + τ₂ is the fringe amplitude of P↑ versus Δτ₂.
pub fn run_echo(setup: &Setup, p: &EchoParams) -> Result<EchoResult> {
    check_step("experiment.step", p.step, setup.larmor_period(), p.points)?;
    if p.total_times.is_empty() || p.total_times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("experiment.total_time", "need at least one value, all >= 0"));
    }
    let mut rows = Vec::new();
    let mut timelines = Vec::new();
    for &t in &p.total_times {
        let tau1 = 0.5 * t;
        for j in 0..p.points {
            let d = j as f64 * p.step;
            rows.push((t, d));
            timelines.push(setup.timeline(&[(0.0, p.energy), (tau1, p.energy), (t + d, p.energy)]));
        }
    }
    let m = measure(setup, &timelines)?;
    let raw = Table::from_columns(
        &["total_time_s", "delta_tau2_s", "p_up", "p_up_stderr"],
        vec![rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect(), m.p_up.mean.clone(), m.p_up.stderr.clone()],
    )?;
    // The refocused term has the same fringe phase at every total time, so
    // projecting onto the phase of the strongest window keeps the noise floor
    // zero-mean instead of rectifying it.
    let w = setup.levels.omega_e;
    let fits = p
        .total_times
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let x: Vec<f64> = rows[k * p.points..(k + 1) * p.points].iter().map(|r| r.1).collect();
            fit_fringe(&x, &m.p_up.mean[k * p.points..(k + 1) * p.points], None, Some(w), None)
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = fits.iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude)).map_or(0.0, |f| f.phase);
    let mut amplitude = Table::new(&["total_time_s", "amplitude", "amplitude_stderr", "phase_rad"]);
    for (k, (&t, f)) in p.total_times.iter().zip(&fits).enumerate() {
        // samples are shared across a window, so its points are correlated and
        // the residual-based error alone is too optimistic
        let se = &m.p_up.stderr[k * p.points..(k + 1) * p.points];
        let floor = se.iter().sum::<f64>() / se.len() as f64;
        amplitude.push_row(&[t, f.amplitude * (f.phase - reference).cos(), f.amplitude_stderr.max(floor), f.phase]);
    }
    let (exp_fit, cubed_fit) = if p.total_times.len() >= 4 {
        let x = &amplitude.columns[0];
        let y = &amplitude.columns[1];
        let weights = inverse_variance(&amplitude.columns[2]);
        let e = fit_named("exp_decay", x, y, weights.as_deref(), &FitOptions { compare: vec!["cubed_exp_decay".into()], ..Default::default() })?;
        let c = fit_named("cubed_exp_decay", x, y, weights.as_deref(), &FitOptions { compare: vec!["exp_decay".into()], ..Default::default() })?;
        (Some(e), Some(c))
    } else {
        (None, None)
    };
    let amplitude = amplitude.comment(format!("echo amplitude projected on the reference fringe phase at {w:e} rad/s"));
    Ok(EchoResult { raw, amplitude, exp_fit, cubed_fit })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct T1Result {
    pub trace: ExperimentTrace,
    pub fit: FitResult,
    pub t1: f64,
    pub t1_stderr: Option<f64>,
}

/// Pump, wait, read out; fits the recovery toward the equal mixture.
pub fn run_t1_recovery(setup: &Setup, waits: &[f64]) -> Result<T1Result> {
    if waits.len() < 4 || waits.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid("experiment.waits", "need at least 4 waits, all finite and >= 0"));
    }
    // populations do not depend on the Overhauser shift
    let mut s = setup.clone();
    s.bath = None;
    s.bath_samples = 1;
    let timelines: Vec<Vec<Step>> =
        waits.iter().map(|w| vec![Step::Scramble, Step::Pump(s.pump), Step::Wait(*w), Step::Readout(s.readout)]).collect();
    let m = measure(&s, &timelines)?;
    let trace = trace(setup, "wait_s", "t1", waits.to_vec(), &m)?;
    let y = &trace.p_up;
    let (i_lo, i_hi) = extreme_indices(waits);
    let end = y[i_hi];
    let shifted: Vec<f64> = y.iter().map(|v| v - end).collect();
    let t = one_over_e_crossing(waits, &shifted).max(f64::MIN_POSITIVE);
    let params = vec![
        Param::new("amplitude", y[i_lo] - end),
        Param::bounded("time", t, t * 1e-6, t * 1e6),
        Param::new("offset", end),
    ];
    let fit = fit_named("exp_decay", waits, y, None, &FitOptions { params: Some(params), ..Default::default() })?;
    Ok(T1Result { t1: fit.value("time").unwrap_or(f64::NAN), t1_stderr: fit.stderr("time"), fit, trace })
}

fn extreme_indices(x: &[f64]) -> (usize, usize) {
    let lo = (0..x.len()).min_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
    let hi = (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FarDetunedPoint {
    /// Δ × FWHM.
    pub ratio: f64,
    pub detuning: f64,
    pub four_level_angle: f64,
    pub two_level_angle: f64,
    pub relative_error: f64,
}

/// Rotation angle of one pulse from |↓⟩ in the four-level model without
/// dissipation, against the adiabatically eliminated two-level evolution.
pub fn far_detuned_comparison(levels: &LevelScheme, pulse: &PulseSpec, calibration: f64, cfg: &IntegratorConfig) -> Result<FarDetunedPoint> {
    let lv = levels.with_detuning(pulse.detuning);
    let p = pulse.at(0.0);
    let traj = evolve(&DensityMatrix::pure(DOWN), &lv, &[Segment::pulse(&p, calibration)], &DissipatorSet::none(), cfg, &[])?;
    let p4 = traj.last().map(|s| s.p_up()).unwrap_or(0.0);
    let spinor = effective_two_level_evolution(&lv, &p, calibration)?;
    let p2 = spinor[1].norm_sqr() / (spinor[0].norm_sqr() + spinor[1].norm_sqr());
    let (a4, a2) = (rotation_angle_from_population(p4), rotation_angle_from_population(p2));
    Ok(FarDetunedPoint {
        ratio: pulse.detuning * pulse.duration,
        detuning: pulse.detuning,
        four_level_angle: a4,
        two_level_angle: a2,
        relative_error: (a4 - a2).abs() / a2,
    })
}

/// Sweeps Δ·FWHM at fixed nominal angle, recalibrating the energy scale per point.
pub fn far_detuned_sweep(
    levels: &LevelScheme,
    pulse: &PulseSpec,
    target_angle: f64,
    ratios: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<FarDetunedPoint>> {
    ratios
        .par_iter()
        .map(|r| {
            let p = PulseSpec { detuning: r / pulse.duration, ..pulse.clone() };
            let lv = levels.with_detuning(p.detuning);
            let k = target_angle / effective_pulse_area(&lv, &p, 1.0)?;
            far_detuned_comparison(&lv, &p, k, cfg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTable {
    pub name: String,
    pub table: Table,
}

impl NamedTable {
    fn new(name: &str, table: Table) -> Self {
        Self { name: name.into(), table }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub tables: Vec<NamedTable>,
    pub summary: serde_json::Value,
}

/// A named experiment runnable from a configuration table.
pub trait Experiment: Named + Send + Sync {
    fn description(&self) -> &'static str;
    fn run(&self, setup: &Setup, params: &toml::Table) -> Result<ExperimentOutput>;
}

/// `energy` or `angle`; the latter is converted with the setup calibration.
fn pulse_energy(p: &mut Params, setup: &Setup, default_angle: f64) -> Result<f64> {
    let e = p.optional("energy", Dimension::Energy);
    let a = p.optional("angle", Dimension::Angle);
    match (e, a) {
        (Some(_), Some(_)) => {
            p.issue("angle", "give either energy or angle, not both");
            Ok(0.0)
        }
        (Some(e), None) => Ok(e),
        (None, a) => setup.energy_for_angle(a.unwrap_or(default_angle)),
    }
}

fn fit_summary(f: &Option<FitResult>) -> serde_json::Value {
    serde_json::to_value(f).unwrap_or(serde_json::Value::Null)
}

struct Rabi;
struct Ramsey;
struct Echo;
struct T1;
struct Pump;

impl Named for Rabi {
    fn name(&self) -> &'static str {
        "rabi"
    }
}

impl Experiment for Rabi {
    fn description(&self) -> &'static str {
        "P↑ versus single-pulse energy"
    }

    fn run(&self, setup: &Setup, params: &toml::Table) -> Result<ExperimentOutput> {
        let mut p = Params::new("experiment", params);
        let full = setup.energy_for_angle(2.0 * PI)?;
        let energies = p.grid("energies", Dimension::Energy, || linspace(0.0, full, 41));
        p.finish()?;
        let t = run_rabi_sweep(setup, &energies)?;
        let peak = t.p_up.iter().copied().fold(0.0, f64::max);
        Ok(ExperimentOutput {
            summary: json!({ "max_p_up": peak, "points": energies.len() }),
            tables: vec![NamedTable::new("rabi_trace", t.to_table().comment("P(up) after one control pulse"))],
        })
    }
}

impl Named for Ramsey {
    fn name(&self) -> &'static str {
        "ramsey"
    }
}

impl Experiment for Ramsey {
    fn description(&self) -> &'static str {
        "two-pulse fringes, fringe amplitude per delay window and T2*"
    }

    fn run(&self, setup: &Setup, params: &toml::Table) -> Result<ExperimentOutput> {
        let d = RamseyParams::defaults(setup)?;
        let mut p = Params::new("experiment", params);
        let energy = pulse_energy(&mut p, setup, PI / 2.0)?;
        let rp = RamseyParams {
            energy,
            taus: p.grid("tau", Dimension::Time, || d.taus.clone()),
            step: p.quantity("step", Dimension::Time, d.step),
            points: p.count("points", d.points),
        };
        p.finish()?;
        let r = run_ramsey(setup, &rp)?;
        let freq = r.fringe_fit.map(|f| f.frequency / (2.0 * PI));
        Ok(ExperimentOutput {
            summary: json!({
                "pulse_energy_J": rp.energy,
                "fringe_frequency_Hz": freq,
                "fringe_frequency_stderr_Hz": r.fringe_fit.and_then(|f| f.frequency_stderr).map(|s| s / (2.0 * PI)),
                "expected_frequency_Hz": setup.levels.omega_e / (2.0 * PI),
                "fringe_fit_error": r.fringe_fit_error,
                "t2_star_s": r.t2_star.as_ref().and_then(|f| f.value("time")),
                "t2_star_stderr_s": r.t2_star.as_ref().and_then(|f| f.stderr("time")),
                "t2_star_fit": fit_summary(&r.t2_star),
            }),
            tables: vec![
                NamedTable::new("ramsey_trace", r.fringe.to_table().comment("P(up) versus delay between two pulses")),
                NamedTable::new("ramsey_visibility", r.visibility),
            ],
        })
    }
}

impl Named for Echo {
    fn name(&self) -> &'static str {
        "echo"
    }
}

impl Experiment for Echo {
    fn description(&self) -> &'static str {
        "three-pulse echo amplitude versus total delay with exponential and cubed-exponential fits"
    }

    fn run(&self, setup: &Setup, params: &toml::Table) -> Result<ExperimentOutput> {
        let d = EchoParams::defaults(setup)?;
        let mut p = Params::new("experiment", params);
        let energy = pulse_energy(&mut p, setup, PI / 2.0)?;
        let ep = EchoParams {
            energy,
            total_times: p.grid("total_time", Dimension::Time, || d.total_times.clone()),
            step: p.quantity("step", Dimension::Time, d.step),
            points: p.count("points", d.points),
        };
        p.finish()?;
        let r = run_echo(setup, &ep)?;
        Ok(ExperimentOutput {
            summary: json!({
                "pulse_energy_J": ep.energy,
                "t2_exp_s": r.exp_fit.as_ref().and_then(|f| f.value("time")),
                "t2_exp_stderr_s": r.exp_fit.as_ref().and_then(|f| f.stderr("time")),
                "t2_cubed_s": r.cubed_fit.as_ref().and_then(|f| f.value("time")),
                "t2_cubed_stderr_s": r.cubed_fit.as_ref().and_then(|f| f.stderr("time")),
                "exp_fit": fit_summary(&r.exp_fit),
                "cubed_fit": fit_summary(&r.cubed_fit),
            }),
            tables: vec![NamedTable::new("echo_trace", r.raw), NamedTable::new("echo_amplitude", r.amplitude)],
        })
    }
}

impl Named for T1 {
    fn name(&self) -> &'static str {
        "t1"
    }
}

impl Experiment for T1 {
    fn description(&self) -> &'static str {
        "population recovery after pumping and the fitted T1"
    }

    fn run(&self, setup: &Setup, params: &toml::Table) -> Result<ExperimentOutput> {
        let mut p = Params::new("experiment", params);
        let rate = setup.dissipators.t1_rate;
        let span = if rate > 0.0 { 5.0 / rate } else { 1.0 };
        let waits = p.grid("waits", Dimension::Time, || linspace(0.0, span, 26));
        p.finish()?;
        let r = run_t1_recovery(setup, &waits)?;
        Ok(ExperimentOutput {
            summary: json!({ "t1_s": r.t1, "t1_stderr_s": r.t1_stderr, "fit": r.fit }),
            tables: vec![NamedTable::new("t1_trace", r.trace.to_table().comment("P(up) after pump and wait"))],
        })
    }
}

impl Named for Pump {
    fn name(&self) -> &'static str {
        "pump"
    }
}

impl Experiment for Pump {
    fn description(&self) -> &'static str {
        "optical pumping from the scrambled state: fidelity and emission transient"
    }

    fn run(&self, setup: &Setup, params: &toml::Table) -> Result<ExperimentOutput> {
        let p = Params::new("experiment", params);
        p.finish()?;
        let r = optical_pump(&super::scramble(&DensityMatrix::ground_mixture()), setup, setup.pump)?;
        let table = Table::from_columns(&["time_s", "photon_rate_per_s"], vec![r.times.clone(), r.photon_rate.clone()])?
            .comment(format!("pump rabi {:e} rad/s, duration {:e} s", setup.pump.rabi, setup.pump.duration));
        Ok(ExperimentOutput {
            summary: json!({ "fidelity": r.fidelity, "populations": r.state.populations() }),
            tables: vec![NamedTable::new("pump_curve", table)],
        })
    }
}

pub fn experiments() -> &'static Registry<dyn Experiment> {
    static REG: OnceLock<Registry<dyn Experiment>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn Experiment> = Registry::new("experiment");
        r.register(Arc::new(Rabi)).register(Arc::new(Ramsey)).register(Arc::new(Echo)).register(Arc::new(T1)).register(Arc::new(Pump));
        r
    })
}
