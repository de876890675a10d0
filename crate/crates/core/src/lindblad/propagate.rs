use std::sync::{Arc, OnceLock};

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use super::{lindblad_rhs, DissipatorSet};
use crate::error::{Error, Issues, Result};
use crate::hamiltonian::{envelope_value, hamiltonian_matrix, LevelScheme, Mat4, PulseSpec, C64};
use crate::ode::{dopri5, StepControl};
use crate::registry::{Named, Registry};

/// Linear map on column-stacked 4×4 matrices (index i + 4j).
pub type Super = SMatrix<C64, 16, 16>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    /// Registered propagator name: `adaptive-rk` or `matrix-exponential`.
    pub method: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Minimum steps per pulse duration.
    pub pulse_resolution: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: "matrix-exponential".into(),
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 1e-9,
            min_step: 1e-21,
            pulse_resolution: 50.0,
        }
    }
}

impl IntegratorConfig {
    pub fn adaptive(rel_tol: f64, abs_tol: f64) -> Self {
        Self { method: "adaptive-rk".into(), rel_tol, abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::new();
        for (key, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v <= 1e-3) {
                issues.push(format!("integrator.{key}"), format!("must lie in (0, 1e-3], got {v}"));
            }
        }
        if !(self.min_step > 0.0) || !(self.min_step <= self.max_step) {
            issues.push("integrator.min_step", "must be > 0 and <= max_step");
        }
        if !(self.pulse_resolution >= 1.0) {
            issues.push("integrator.pulse_resolution", format!("must be >= 1, got {}", self.pulse_resolution));
        }
        if !propagators().contains(&self.method) {
            issues.push(
                "integrator.method",
                format!("unknown method {:?}; valid options: {}", self.method, propagators().names().collect::<Vec<_>>().join(", ")),
            );
        }
        issues.finish()
    }

    fn step_limit(&self, gen: &dyn Generator) -> f64 {
        self.max_step.min(gen.max_step() / self.pulse_resolution)
    }

    pub fn propagator(&self) -> Result<Arc<dyn Propagator>> {
        propagators().get(&self.method)
    }
}

/// Right-hand side of a linear master equation.
pub trait Generator: Sync {
    fn apply(&self, t: f64, rho: &Mat4) -> Mat4;

    fn is_constant(&self) -> bool {
        false
    }

    /// Time scale of the drive; steps are limited to this over the resolution.
    fn max_step(&self) -> f64 {
        f64::INFINITY
    }

    fn liouvillian(&self, t: f64) -> Super {
        let mut l = Super::zeros();
        for k in 0..16 {
            let mut basis = Mat4::zeros();
            basis[(k % 4, k / 4)] = C64::new(1.0, 0.0);
            let col = self.apply(t, &basis);
            l.column_mut(k).copy_from_slice(col.as_slice());
        }
        l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Amplitude {
    Pulse { pulse: PulseSpec, calibration: f64 },
    Constant(f64),
}

/// Optically driven four-level system in the frame of its drive.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveGenerator {
    /// `levels.detuning` is the drive's detuning and fixes the frame.
    pub levels: LevelScheme,
    pub weights: [C64; 4],
    pub amplitude: Amplitude,
    pub dissipators: DissipatorSet,
}

impl DriveGenerator {
    pub fn pulse(levels: &LevelScheme, pulse: &PulseSpec, calibration: f64, d: &DissipatorSet) -> Self {
        Self {
            levels: levels.with_detuning(pulse.detuning),
            weights: pulse.coupling_weights,
            amplitude: Amplitude::Pulse { pulse: pulse.clone(), calibration },
            dissipators: *d,
        }
    }

    pub fn cw(levels: &LevelScheme, rabi: f64, detuning: f64, weights: [C64; 4], d: &DissipatorSet) -> Self {
        Self {
            levels: levels.with_detuning(detuning),
            weights,
            amplitude: Amplitude::Constant(rabi),
            dissipators: *d,
        }
    }

    pub fn rabi(&self, t: f64) -> f64 {
        match &self.amplitude {
            Amplitude::Pulse { pulse, calibration } => envelope_value(pulse, *calibration, t),
            Amplitude::Constant(r) => *r,
        }
    }

    pub fn hamiltonian(&self, t: f64) -> Mat4 {
        let r = self.rabi(t);
        hamiltonian_matrix(&self.levels, &self.weights.map(|w| w * r))
    }
}

impl Generator for DriveGenerator {
    fn apply(&self, t: f64, rho: &Mat4) -> Mat4 {
        let r = self.rabi(t);
        let h = hamiltonian_matrix(&self.levels, &self.weights.map(|w| w * r));
        lindblad_rhs(rho, &h, &self.dissipators, r)
    }

    fn is_constant(&self) -> bool {
        matches!(self.amplitude, Amplitude::Constant(_))
    }

    fn max_step(&self) -> f64 {
        match &self.amplitude {
            Amplitude::Pulse { pulse, .. } => pulse.duration,
            Amplitude::Constant(_) => f64::INFINITY,
        }
    }
}

/// Time-stepping strategy for driven segments.
pub trait Propagator: Named + Send + Sync {
    fn propagate(&self, gen: &dyn Generator, rho: &Mat4, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Mat4>;

    /// The evolution map over [t0, t1] as a 16×16 matrix.
    fn superoperator(&self, gen: &dyn Generator, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Super>;
}

fn step_control(gen: &dyn Generator, cfg: &IntegratorConfig) -> StepControl {
    StepControl {
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        max_step: cfg.step_limit(gen),
        min_step: cfg.min_step,
    }
}

/// Embedded Dormand–Prince 5(4) with adaptive steps.
pub struct AdaptiveRk;

impl Named for AdaptiveRk {
    fn name(&self) -> &'static str {
        "adaptive-rk"
    }
}

impl Propagator for AdaptiveRk {
    fn propagate(&self, gen: &dyn Generator, rho: &Mat4, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Mat4> {
        let (out, _) = dopri5(|t, r: &Mat4| gen.apply(t, r), t0, t1, *rho, &step_control(gen, cfg))?;
        Ok(out)
    }

    fn superoperator(&self, gen: &dyn Generator, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Super> {
        let rhs = |t: f64, s: &Super| {
            let mut out = Super::zeros();
            for k in 0..16 {
                let rho = Mat4::from_column_slice(s.column(k).as_slice());
                out.column_mut(k).copy_from_slice(gen.apply(t, &rho).as_slice());
            }
            out
        };
        let (s, _) = dopri5(rhs, t0, t1, Super::identity(), &step_control(gen, cfg))?;
        Ok(s)
    }
}

/// Fixed steps of exp(Ω) with the fourth-order two-node Magnus generator;
/// exact for piecewise-constant drives.
pub struct MatrixExponential;

impl Named for MatrixExponential {
    fn name(&self) -> &'static str {
        "matrix-exponential"
    }
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6

impl MatrixExponential {
    fn steps(gen: &dyn Generator, t0: f64, t1: f64, cfg: &IntegratorConfig) -> (usize, f64) {
        let span = t1 - t0;
        let h_max = cfg.step_limit(gen);
        let n = ((span / h_max).ceil() as usize).max(1);
        (n, span / n as f64)
    }

    fn step_map(gen: &dyn Generator, t: f64, h: f64) -> Result<Super> {
        let omega = if gen.is_constant() {
            gen.liouvillian(t) * C64::from(h)
        } else {
            let a1 = gen.liouvillian(t + (0.5 - GAUSS_OFFSET) * h);
            let a2 = gen.liouvillian(t + (0.5 + GAUSS_OFFSET) * h);
            let comm = a2 * a1 - a1 * a2;
            (a1 + a2) * C64::from(0.5 * h) + comm * C64::from(3f64.sqrt() / 12.0 * h * h)
        };
        let p = omega.exp();
        if p.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Integration { time: t, reason: "non-finite step propagator".into() });
        }
        Ok(p)
    }

    fn run(gen: &dyn Generator, t0: f64, t1: f64, cfg: &IntegratorConfig, mut apply: impl FnMut(&Super)) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        let (n, h) = Self::steps(gen, t0, t1, cfg);
        if gen.is_constant() {
            let p = Self::step_map(gen, t0, h)?;
            for _ in 0..n {
                apply(&p);
            }
        } else {
            for k in 0..n {
                apply(&Self::step_map(gen, t0 + k as f64 * h, h)?);
            }
        }
        Ok(())
    }
}

impl Propagator for MatrixExponential {
    fn propagate(&self, gen: &dyn Generator, rho: &Mat4, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Mat4> {
        let mut v = nalgebra::SVector::<C64, 16>::from_column_slice(rho.as_slice());
        Self::run(gen, t0, t1, cfg, |p| v = p * v)?;
        Ok(Mat4::from_column_slice(v.as_slice()))
    }

    fn superoperator(&self, gen: &dyn Generator, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Super> {
        let mut s = Super::identity();
        Self::run(gen, t0, t1, cfg, |p| s = p * s)?;
        Ok(s)
    }
}

pub fn propagators() -> &'static Registry<dyn Propagator> {
    static PROPAGATORS: OnceLock<Registry<dyn Propagator>> = OnceLock::new();
    PROPAGATORS.get_or_init(|| {
        let mut r: Registry<dyn Propagator> = Registry::new("integrator method");
        r.register(Arc::new(AdaptiveRk)).register(Arc::new(MatrixExponential));
        r
    })
}
