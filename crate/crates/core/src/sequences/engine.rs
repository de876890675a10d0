use nalgebra::{SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{gauss_hermite, CwSpec, Propagation, Setup, Step};
use crate::error::{Error, Result};
use crate::hamiltonian::{LevelScheme, Mat4, PulseSpec, BALANCED_COUPLING, C64, DOWN, EXC_DOWN, EXC_UP, UP};
use crate::lindblad::{change_frame, DensityMatrix, DriveGenerator, FreeEvolution, Propagator, Super};

type Vec16 = SVector<C64, 16>;
type Row16 = SMatrix<C64, 1, 16>;

/// Resolution of cw drive maps: pump curves and photon integrals use this many steps.
const CW_STEPS: usize = 1000;

fn flat(rho: &Mat4) -> Vec16 {
    Vec16::from_column_slice(rho.as_slice())
}

fn unflat(v: &Vec16) -> Mat4 {
    Mat4::from_column_slice(v.as_slice())
}

/// Equal ground populations, nothing else.
pub fn scramble(_rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::ground_mixture()
}

/// Levels of the frame in which a cw drive on |↑⟩ ↔ |⇓↑↓⟩ is static.
fn cw_frame(levels: &LevelScheme) -> LevelScheme {
    levels.with_detuning(levels.omega_e)
}

struct CwMap {
    spec: CwSpec,
    step: Super,
    map: Super,
    /// Row functional giving the photon count Γ∫Tr(P_e ρ(t))dt.
    photons: Row16,
}

impl CwMap {
    fn new(setup: &Setup, spec: CwSpec) -> Result<Self> {
        let frame = cw_frame(&setup.levels);
        let gen = DriveGenerator::cw(&frame, spec.rabi, frame.detuning, BALANCED_COUPLING, &setup.dissipators);
        let dt = spec.duration / CW_STEPS as f64;
        // the drive is constant, so its exponential is exact at any step
        let step = if dt > 0.0 {
            crate::lindblad::propagators().get("matrix-exponential")?.superoperator(&gen, 0.0, dt, &setup.integrator)?
        } else {
            Super::identity()
        };
        let mut e = Row16::zeros();
        e[EXC_DOWN + 4 * EXC_DOWN] = C64::new(1.0, 0.0);
        e[EXC_UP + 4 * EXC_UP] = C64::new(1.0, 0.0);
        let gamma = setup.dissipators.radiative_rate;
        let mut map = Super::identity();
        let mut photons = e * C64::from(0.5 * gamma * dt);
        for k in 1..=CW_STEPS {
            map = step * map;
            let w = if k == CW_STEPS { 0.5 } else { 1.0 };
            photons += (e * map) * C64::from(w * gamma * dt);
        }
        Ok(Self { spec, step, map, photons })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Readout {
    pub p_up: f64,
    pub p_down: f64,
    pub excited: f64,
    pub photons: Option<f64>,
}

/// Per-sample state: the static Overhauser shift, the closed-form free
/// propagator it implies, and the sample's random stream for a diffusing
/// detuning.
pub struct SampleEnv {
    pub detuning: f64,
    levels: LevelScheme,
    free: FreeEvolution,
    rng: ChaCha8Rng,
    diffusion: f64,
    drift: f64,
}

impl SampleEnv {
    /// Sample `index` of the ensemble seeded by `setup.seed`; every call with
    /// the same index reproduces the same draws.
    pub fn new(setup: &Setup, index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
        rng.set_stream(index as u64);
        let detuning = setup.bath.as_ref().map_or(0.0, |b| b.draw(&mut rng).detuning);
        Self::with_detuning(setup, detuning, rng)
    }

    pub fn with_detuning(setup: &Setup, detuning: f64, rng: ChaCha8Rng) -> Self {
        let levels = LevelScheme { omega_e: setup.levels.omega_e + detuning, ..setup.levels };
        Self {
            detuning,
            levels,
            free: FreeEvolution::new(&levels, &setup.dissipators),
            rng,
            diffusion: setup.diffusion,
            drift: 0.0,
        }
    }

    /// Advances the diffusing part of the detuning by `h` and returns its
    /// integral over the interval.
    fn advance(&mut self, h: f64) -> f64 {
        if self.diffusion == 0.0 || h <= 0.0 {
            return 0.0;
        }
        let d = self.diffusion;
        let z1: f64 = StandardNormal.sample(&mut self.rng);
        let z2: f64 = StandardNormal.sample(&mut self.rng);
        let step = (d * h).sqrt() * z1;
        // joint Gaussian: Var ∫ = Dh³/3, Cov = Dh²/2, Var Δ = Dh
        let integral = self.drift * h + 0.5 * h * step + (d * h * h * h / 12.0).sqrt() * z2;
        self.drift += step;
        integral
    }
}

/// Precomputed pulse kicks and cw maps for a set of timelines.
pub struct Engine<'a> {
    setup: &'a Setup,
    propagator: std::sync::Arc<dyn Propagator>,
    kicks: Vec<(PulseSpec, Super)>,
    cws: Vec<CwMap>,
    /// (energy scale, weight) nodes of the rotation-angle distribution.
    nodes: Vec<(f64, f64)>,
}

fn scaled(p: &PulseSpec, s: f64) -> PulseSpec {
    if s == 1.0 {
        p.clone()
    } else {
        p.with_energy(p.energy * s)
    }
}

impl<'a> Engine<'a> {
    pub fn prepare(setup: &'a Setup, timelines: &[Vec<Step>]) -> Result<Self> {
        setup.validate()?;
        let nodes: Vec<(f64, f64)> = if setup.angle_spread > 0.0 {
            gauss_hermite(setup.angle_spread_nodes).into_iter().map(|(z, w)| ((1.0 + setup.angle_spread * z).max(0.0), w)).collect()
        } else {
            vec![(1.0, 1.0)]
        };
        let mut pulses: Vec<PulseSpec> = Vec::new();
        let mut cws: Vec<CwSpec> = Vec::new();
        for steps in timelines {
            for s in steps {
                match s {
                    Step::Pulse(p) => {
                        if p.detuning != setup.levels.detuning {
                            return Err(Error::invalid("pulse.detuning", "all control pulses must share the setup detuning"));
                        }
                        for (scale, _) in &nodes {
                            let key = scaled(p, *scale).at(0.0);
                            if !pulses.contains(&key) {
                                pulses.push(key);
                            }
                        }
                    }
                    Step::Pump(c) | Step::Readout(c) => {
                        if !cws.contains(c) {
                            cws.push(*c);
                        }
                    }
                    _ => {}
                }
            }
        }
        let propagator = setup.integrator.propagator()?;
        let kicks = if setup.propagation == Propagation::Kick {
            let free0 = FreeEvolution::new(&setup.levels, &setup.dissipators);
            pulses
                .into_par_iter()
                .map(|p| {
                    let k = kick_map(setup, propagator.as_ref(), &free0, &p)?;
                    Ok((p, k))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let cws = cws.into_par_iter().map(|c| CwMap::new(setup, c)).collect::<Result<Vec<_>>>()?;
        Ok(Self { setup, propagator, kicks, cws, nodes })
    }

    fn kick(&self, p: &PulseSpec) -> &Super {
        let key = p.at(0.0);
        &self.kicks.iter().find(|(q, _)| *q == key).expect("pulse prepared").1
    }

    fn cw(&self, c: &CwSpec) -> &CwMap {
        self.cws.iter().find(|m| m.spec == *c).expect("cw drive prepared")
    }

    /// Readouts of one timeline for ensemble sample `index`, averaged over
    /// the rotation-angle distribution.
    pub fn measure(&self, steps: &[Step], index: usize) -> Result<Vec<Readout>> {
        let mut total: Option<Vec<Readout>> = None;
        for &(scale, weight) in &self.nodes {
            let mut env = SampleEnv::new(self.setup, index);
            let r = self.run(steps, &mut env, scale)?;
            total = Some(match total {
                None => r.iter().map(|x| weighted(x, weight)).collect(),
                Some(acc) => acc.iter().zip(&r).map(|(a, x)| add(a, &weighted(x, weight))).collect(),
            });
        }
        Ok(total.unwrap_or_default())
    }

    /// Runs a timeline from the equal ground mixture for one environment.
    pub fn run(&self, steps: &[Step], env: &mut SampleEnv, scale: f64) -> Result<Vec<Readout>> {
        let setup = self.setup;
        let control = setup.levels.detuning;
        let pump_frame = cw_frame(&setup.levels).detuning;
        let mut rho = *DensityMatrix::ground_mixture().matrix();
        let mut t = 0.0f64;
        let mut out = Vec::new();
        let free_to = |rho: &mut Mat4, t: &mut f64, target: f64, env: &mut SampleEnv| {
            let h = target - *t;
            if h > 0.0 {
                let phase = env.advance(h);
                *rho = env.free.propagate(rho, h, phase);
                *t = target;
            }
        };
        for (i, s) in steps.iter().enumerate() {
            match s {
                Step::Scramble => rho = *DensityMatrix::ground_mixture().matrix(),
                Step::Wait(d) => {
                    let target = t + d;
                    free_to(&mut rho, &mut t, target, env)
                }
                Step::Pump(c) => {
                    rho = self.apply_cw(&rho, c, t, control, pump_frame);
                    env.advance(c.duration);
                    t += c.duration;
                }
                Step::Readout(c) => {
                    let r = Readout {
                        p_up: rho[(UP, UP)].re,
                        p_down: rho[(DOWN, DOWN)].re,
                        excited: rho[(EXC_DOWN, EXC_DOWN)].re + rho[(EXC_UP, EXC_UP)].re,
                        photons: setup.photon_readout.then(|| {
                            let in_frame = change_frame(&rho, control, pump_frame, t);
                            (self.cw(c).photons * flat(&in_frame))[0].re
                        }),
                    };
                    out.push(r);
                    rho = self.apply_cw(&rho, c, t, control, pump_frame);
                    env.advance(c.duration);
                    t += c.duration;
                }
                Step::Pulse(p) => {
                    let p = scaled(p, scale);
                    match setup.propagation {
                        Propagation::Kick => {
                            if p.arrival_time < t {
                                return Err(out_of_order(i, p.arrival_time, t));
                            }
                            free_to(&mut rho, &mut t, p.arrival_time, env);
                            if p.energy > 0.0 {
                                rho = unflat(&(self.kick(&p) * flat(&rho)));
                            }
                        }
                        Propagation::Exact => {
                            let w = p.half_window();
                            let start = p.arrival_time - w;
                            if start < t {
                                return Err(Error::invalid(
                                    format!("steps[{i}]"),
                                    format!(
                                        "pulse window starting at {start:e} s overlaps the previous step ending at {t:e} s; exact propagation needs separated pulses"
                                    ),
                                ));
                            }
                            free_to(&mut rho, &mut t, start, env);
                            let gen = DriveGenerator::pulse(&env.levels, &p, setup.calibration, &setup.dissipators);
                            rho = self.propagator.propagate(&gen, &rho, start, start + 2.0 * w, &setup.integrator)?;
                            // the diffusing detuning is not modeled here, but keep the stream aligned
                            env.advance(2.0 * w);
                            t = start + 2.0 * w;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn apply_cw(&self, rho: &Mat4, c: &CwSpec, t: f64, control: f64, pump_frame: f64) -> Mat4 {
        let m = self.cw(c);
        let in_frame = change_frame(rho, control, pump_frame, t);
        let after = unflat(&(m.map * flat(&in_frame)));
        change_frame(&after, pump_frame, control, t + c.duration)
    }
}

fn out_of_order(i: usize, at: f64, clock: f64) -> Error {
    Error::invalid(format!("steps[{i}]"), format!("pulse at {at:e} s precedes the sequence clock at {clock:e} s"))
}

fn weighted(r: &Readout, w: f64) -> Readout {
    Readout { p_up: r.p_up * w, p_down: r.p_down * w, excited: r.excited * w, photons: r.photons.map(|p| p * w) }
}

fn add(a: &Readout, b: &Readout) -> Readout {
    Readout {
        p_up: a.p_up + b.p_up,
        p_down: a.p_down + b.p_down,
        excited: a.excited + b.excited,
        photons: a.photons.zip(b.photons).map(|(x, y)| x + y),
    }
}

/// The pulse map referenced to its arrival time: evolving freely up to the
/// arrival, applying the kick, and evolving freely on reproduces the pulse
/// window exactly at zero bath detuning.
fn kick_map(setup: &Setup, propagator: &dyn Propagator, free0: &FreeEvolution, p: &PulseSpec) -> Result<Super> {
    let w = p.half_window();
    let gen = DriveGenerator::pulse(&setup.levels, p, setup.calibration, &setup.dissipators);
    let s = propagator.superoperator(&gen, -w, w, &setup.integrator)?;
    let back = free0.superoperator(-w, 0.0);
    Ok(back * s * back)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PumpResult {
    #[serde(skip)]
    pub state: DensityMatrix,
    /// Population of |↓⟩ after the pump.
    pub fidelity: f64,
    pub times: Vec<f64>,
    /// Emitted photon rate Γ·(excited population), 1/s.
    pub photon_rate: Vec<f64>,
}

/// Drives |↑⟩ ↔ |⇓↑↓⟩ resonantly from `rho0` and records the emission transient.
pub fn optical_pump(rho0: &DensityMatrix, setup: &Setup, drive: CwSpec) -> Result<PumpResult> {
    let m = CwMap::new(setup, drive)?;
    let gamma = setup.dissipators.radiative_rate;
    let dt = drive.duration / CW_STEPS as f64;
    let mut v = flat(rho0.matrix());
    let rate = |v: &Vec16| gamma * (v[EXC_DOWN + 4 * EXC_DOWN].re + v[EXC_UP + 4 * EXC_UP].re);
    let mut times = vec![0.0];
    let mut photon_rate = vec![rate(&v)];
    for k in 1..=CW_STEPS {
        v = m.step * v;
        times.push(k as f64 * dt);
        photon_rate.push(rate(&v));
    }
    let state = DensityMatrix::from_matrix_unchecked(unflat(&v));
    let min = state.min_eigenvalue();
    if min < -crate::lindblad::POSITIVITY_TOL {
        return Err(Error::Positivity { time: drive.duration, min_eigenvalue: min });
    }
    Ok(PumpResult { fidelity: state.p_down(), state, times, photon_rate })
}
