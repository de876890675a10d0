//! Joint fit of a Rabi trace and a fringe-amplitude trace with the full
//! four-level simulation as the model.

use serde::Serialize;

use super::{fit_fringe, levenberg_marquardt, validate_data, FitResult, LmOptions, Param};
use crate::error::{Error, Result};
use crate::io::{Table, Trace};
use crate::sequences::{measure_readouts, Setup, Step};

#[derive(Debug, Clone)]
pub struct SimultaneousSpec {
    /// Template setup; its calibration and β's are the starting point unless
    /// `initial` is given.
    pub setup: Setup,
    /// Pulse separation of the fringe-amplitude measurement, s.
    pub fringe_delay: f64,
    /// Delays per fringe window.
    pub fringe_points: usize,
    /// Total weight of the Rabi and fringe datasets; each dataset's points
    /// share its weight, so point counts do not tilt the fit.
    pub dataset_weights: [f64; 2],
    /// (k, β₁, β₂).
    pub initial: Option<[f64; 3]>,
    /// Every iteration runs several full forward simulations, hence the low default cap.
    pub lm: LmOptions,
}

impl SimultaneousSpec {
    pub fn new(setup: Setup) -> Self {
        Self { setup, fringe_delay: 0.8e-9, fringe_points: 12, dataset_weights: [1.0, 1.0], initial: None, lm: LmOptions { max_iterations: 40, ..LmOptions::default() } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RabiFringeFit {
    /// Parameters `calibration` (rad²/(s·J)), `beta1`, `beta2` (s/rad).
    pub fit: FitResult,
    pub rabi_model: Vec<f64>,
    pub fringe_model: Vec<f64>,
    /// Peak Ω_R and peak γ versus pulse energy at the fitted parameters.
    #[serde(skip)]
    pub gamma: Table,
}

/// P↑ after one pulse at each of `rabi_energies`, and the fringe amplitude V
/// at `delay` for two pulses of each of `fringe_energies`. No bath: the
/// fringe amplitude at sub-ns delays is set by the pulses alone.
pub fn rabi_fringe_model(
    setup: &Setup,
    rabi_energies: &[f64],
    fringe_energies: &[f64],
    delay: f64,
    points: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut s = setup.clone();
    s.bath = None;
    s.bath_samples = 1;
    s.diffusion = 0.0;
    let step = s.larmor_period() / 10.0;
    let points = points.max(4);
    let mut timelines: Vec<Vec<Step>> = rabi_energies.iter().map(|e| s.timeline(&[(0.0, *e)])).collect();
    let delays: Vec<f64> = (0..points).map(|j| delay + j as f64 * step).collect();
    for e in fringe_energies {
        for d in &delays {
            timelines.push(s.timeline(&[(0.0, *e), (*d, *e)]));
        }
    }
    let p_up = measure_readouts(&s, &timelines)?;
    let n = rabi_energies.len();
    let rabi = p_up[..n].to_vec();
    let fringe = p_up[n..]
        .chunks(points)
        .map(|y| fit_fringe(&delays, y, None, Some(s.levels.omega_e), None).map(|f| f.amplitude))
        .collect::<Result<Vec<_>>>()?;
    Ok((rabi, fringe))
}

fn with_params(setup: &Setup, k: f64, b1: f64, b2: f64) -> Setup {
    let mut s = setup.clone();
    s.calibration = k;
    s.dissipators.beta1 = b1;
    s.dissipators.beta2 = b2;
    s
}

/// Fits (k, β₁, β₂) to both traces at once. The parameters are fitted in
/// units natural to the largest pulse: k relative to its starting value, β₁
/// in Δ/Ω_pk and β₂ in Δ/Ω_pk² (dephasing only transfers population once γ
/// approaches the detuning).
pub fn simultaneous_fit_rabi_fringe(rabi: &Trace, fringe: &Trace, spec: &SimultaneousSpec) -> Result<RabiFringeFit> {
    let rabi_w = validate_data(&rabi.x, &rabi.y, rabi.weights().as_deref())?;
    let fringe_w = validate_data(&fringe.x, &fringe.y, fringe.weights().as_deref())?;
    if let Some(e) = rabi.x.iter().chain(&fringe.x).find(|e| **e < 0.0) {
        return Err(Error::invalid("data", format!("pulse energies must be >= 0, got {e}")));
    }
    if !(spec.fringe_delay > 0.0) {
        return Err(Error::invalid("fit.fringe_delay", "must be positive"));
    }
    if spec.dataset_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::invalid("fit.dataset_weights", "must be positive and finite"));
    }
    let s = &spec.setup;
    let [k0, b10, b20] = spec.initial.unwrap_or([s.calibration, s.dissipators.beta1, s.dissipators.beta2]);
    if !(k0 > 0.0) {
        return Err(Error::invalid("fit.initial", "calibration must start positive"));
    }
    let e_max = rabi.x.iter().chain(&fringe.x).copied().fold(0.0, f64::max);
    if !(e_max > 0.0) {
        return Err(Error::invalid("data", "need at least one positive pulse energy"));
    }
    let peak = s.pulse.with_energy(e_max).peak_rabi_squared(k0).sqrt();
    let delta = s.pulse.detuning.abs();
    let scale = [k0, delta / peak, delta / (peak * peak)];

    let norm = |w: &[f64], total: f64| {
        let sum: f64 = w.iter().sum();
        w.iter().map(|v| (total * v / sum).sqrt()).collect::<Vec<f64>>()
    };
    let rabi_sw = norm(&rabi_w, spec.dataset_weights[0]);
    let fringe_sw = norm(&fringe_w, spec.dataset_weights[1]);

    let forward = |u: &[f64]| {
        let t = with_params(s, u[0] * scale[0], u[1] * scale[1], u[2] * scale[2]);
        rabi_fringe_model(&t, &rabi.x, &fringe.x, spec.fringe_delay, spec.fringe_points)
    };
    let residuals = |u: &[f64]| -> Result<Vec<f64>> {
        let (r, f) = forward(u)?;
        Ok(r.iter()
            .zip(&rabi.y)
            .zip(&rabi_sw)
            .map(|((m, y), w)| w * (m - y))
            .chain(f.iter().zip(&fringe.y).zip(&fringe_sw).map(|((m, y), w)| w * (m - y)))
            .collect())
    };
    let params = [
        Param::bounded("calibration", 1.0, 1e-3, 1e3),
        Param::bounded("beta1", b10 / scale[1], 0.0, 1e3),
        Param::bounded("beta2", b20 / scale[2], 0.0, 1e3),
    ];
    let out = levenberg_marquardt(residuals, &params, &spec.lm)?;
    let scaled = FitResult::from_outcome("rabi_fringe", &params, out);
    let fit = rescale(scaled, &scale);
    let v = fit.values();
    let (rabi_model, fringe_model) = forward(&[v[0] / scale[0], v[1] / scale[1], v[2] / scale[2]])?;
    let gamma = gamma_table(s, &rabi.x, &fringe.x, v[0], v[1], v[2]);
    Ok(RabiFringeFit { fit, rabi_model, fringe_model, gamma })
}

fn rescale(mut f: FitResult, scale: &[f64; 3]) -> FitResult {
    for (p, s) in f.parameters.iter_mut().zip(scale) {
        p.value *= s;
        p.stderr = p.stderr.map(|e| e * s);
    }
    for (i, row) in f.covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c *= scale[i] * scale[j];
        }
    }
    f
}

fn gamma_table(s: &Setup, a: &[f64], b: &[f64], k: f64, b1: f64, b2: f64) -> Table {
    let mut e: Vec<f64> = a.iter().chain(b).copied().collect();
    e.sort_by(f64::total_cmp);
    e.dedup();
    let mut t = Table::new(&["energy_J", "peak_rabi_rad_per_s", "gamma_peak_rad_per_s"]);
    for e in e {
        let w = s.pulse.with_energy(e).peak_rabi_squared(k).sqrt();
        t.push_row(&[e, w, b1 * w + b2 * w * w]);
    }
    t.comment("laser-induced excited-state dephasing at the pulse peak, gamma = beta1*Omega + beta2*Omega^2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{effective_pulse_area, LevelScheme, PulseSpec};
    use crate::lindblad::DissipatorSet;
    use crate::units::ghz_to_rad_per_s;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn setup() -> Setup {
        let levels = LevelScheme::new(ghz_to_rad_per_s(137.9), ghz_to_rad_per_s(23.8), ghz_to_rad_per_s(3570.0)).unwrap();
        let pulse = PulseSpec::gaussian(1.9e-12, 1e-12, levels.detuning).unwrap();
        let k = (std::f64::consts::PI / 2.0) / effective_pulse_area(&levels, &pulse, 1.0).unwrap();
        let mut d = DissipatorSet::radiative(1e-9);
        d.t1_rate = 163.0;
        Setup::new(levels, d, pulse, k).unwrap()
    }

    fn trace(x: Vec<f64>, y: Vec<f64>, sigma: Option<f64>) -> Trace {
        let n = x.len();
        Trace { x_name: "energy_J".into(), x_unit: crate::io::ColumnUnit::of("energy_J"), x, y_name: "y".into(), y, stderr: sigma.map(|s| vec![s; n]) }
    }

    struct Data {
        truth: Setup,
        rabi: Trace,
        fringe: Trace,
    }

    fn synthetic(b1: f64, b2: f64, noise: Option<(f64, u64)>) -> Data {
        let s = setup();
        let e_pi = s.energy_for_angle(std::f64::consts::PI).unwrap();
        let peak = s.pulse.with_energy(3.0 * e_pi).peak_rabi_squared(s.calibration).sqrt();
        let delta = s.pulse.detuning;
        let truth = with_params(&s, s.calibration, b1 * delta / peak, b2 * delta / (peak * peak));
        let re: Vec<f64> = (0..8).map(|i| 3.0 * e_pi * i as f64 / 7.0).collect();
        let fe: Vec<f64> = (1..5).map(|i| 0.5 * e_pi * i as f64 / 4.0).collect();
        let (mut r, mut f) = rabi_fringe_model(&truth, &re, &fe, 0.8e-9, 8).unwrap();
        let sigma = noise.map(|(sd, seed)| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = Normal::new(0.0, sd).unwrap();
            for v in r.iter_mut().chain(f.iter_mut()) {
                *v += n.sample(&mut rng);
            }
            sd
        });
        Data { truth, rabi: trace(re, r, sigma), fringe: trace(fe, f, sigma) }
    }

    // the fit integrates pulses more coarsely than the data were generated
    fn spec(truth: &Setup) -> SimultaneousSpec {
        let mut t = truth.clone();
        t.integrator.pulse_resolution = 20.0;
        SimultaneousSpec { fringe_points: 8, ..SimultaneousSpec::new(t) }
    }

    #[test]
    fn noiseless_parameters_are_recovered() {
        let d = synthetic(0.5, 0.3, None);
        let mut spec = spec(&d.truth);
        spec.initial = Some([1.2 * d.truth.calibration, 0.5 * d.truth.dissipators.beta1, 2.0 * d.truth.dissipators.beta2]);
        let r = simultaneous_fit_rabi_fringe(&d.rabi, &d.fringe, &spec).unwrap();
        let truth = [d.truth.calibration, d.truth.dissipators.beta1, d.truth.dissipators.beta2];
        for (name, t) in ["calibration", "beta1", "beta2"].iter().zip(truth) {
            let v = r.fit.value(name).unwrap();
            assert!((v - t).abs() < 0.01 * t, "{name}: {v} vs {t}");
        }
        assert_eq!(r.gamma.len(), 12);
    }

    #[test]
    fn null_dephasing_is_consistent_with_zero() {
        let d = synthetic(0.0, 0.0, Some((0.01, 3)));
        let spec = spec(&d.truth);
        let r = simultaneous_fit_rabi_fringe(&d.rabi, &d.fringe, &spec).unwrap();
        for name in ["beta1", "beta2"] {
            let (v, e) = (r.fit.value(name).unwrap(), r.fit.stderr(name).unwrap_or(f64::INFINITY));
            assert!(v <= 2.0 * e, "{name}: {v} ± {e}");
        }
    }

    #[test]
    fn dephasing_saturates_the_transfer() {
        let clean = synthetic(0.0, 0.0, None);
        let lossy = synthetic(1.0, 0.5, None);
        let max = |t: &Trace| t.y.iter().copied().fold(0.0, f64::max);
        assert!(max(&lossy.rabi) < 0.9 * max(&clean.rabi), "{} vs {}", max(&lossy.rabi), max(&clean.rabi));
        // at high energy the transfer flattens instead of oscillating
        let tail = &lossy.rabi.y[5..];
        let spread = tail.iter().copied().fold(0.0, f64::max) - tail.iter().copied().fold(1.0, f64::min);
        assert!(spread < 0.15, "{tail:?}");
    }
}
