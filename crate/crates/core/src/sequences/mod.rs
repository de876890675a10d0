//! Experiment timelines: optical pumping, control pulses, waits and readout,
//! averaged over the nuclear bath.
//!
//! Control pulses are picosecond kicks between long stretches of free
//! evolution. Each distinct pulse is integrated once (at zero bath detuning)
//! into a superoperator referenced to its arrival time; free evolution between
//! kicks is closed-form and carries the per-sample Overhauser shift. The
//! `exact` propagation mode integrates every pulse window per sample instead.

mod engine;
mod ensemble;
mod experiments;
mod params;

use serde::{Deserialize, Serialize};

pub use engine::{optical_pump, scramble, Engine, PumpResult, Readout, SampleEnv};
pub use ensemble::{ensemble_average, gauss_hermite, Ensemble};
pub use experiments::{
    experiments, far_detuned_comparison, far_detuned_sweep, run_echo, run_rabi_sweep, run_ramsey, run_t1_recovery, EchoParams,
    EchoResult, Experiment, ExperimentOutput, FarDetunedPoint, NamedTable, RamseyParams, RamseyResult, T1Result,
};
pub use params::Params;
pub(crate) use experiments::measure_readouts;

use crate::bath::BathModel;
use crate::error::{Error, Issues, Result};
use crate::hamiltonian::{effective_rabi, LevelScheme, PulseSpec};
use crate::io::Table;
use crate::lindblad::{DissipatorSet, IntegratorConfig};

/// A continuous-wave optical drive resonant with |↑⟩ ↔ |⇓↑↓⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwSpec {
    pub duration: f64,
    /// rad/s.
    pub rabi: f64,
}

impl CwSpec {
    fn validate(&self, key: &str, issues: &mut Issues) {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            issues.push(format!("{key}.duration"), format!("must be finite and >= 0, got {}", self.duration));
        }
        if !(self.rabi >= 0.0 && self.rabi.is_finite()) {
            issues.push(format!("{key}.rabi"), format!("must be finite and >= 0, got {}", self.rabi));
        }
    }
}

/// How control pulses are propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    /// Precomputed pulse maps applied at the arrival time.
    #[default]
    Kick,
    /// Every pulse window integrated with the sample's own Zeeman splitting.
    Exact,
}

/// Resolved physical and numerical setup shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Setup {
    /// `levels.detuning` is the control detuning; it equals `pulse.detuning`.
    pub levels: LevelScheme,
    pub dissipators: DissipatorSet,
    /// Template control pulse; experiments set energy and arrival time.
    pub pulse: PulseSpec,
    /// k in ∫Ω_R² dt = k·E, rad²/(s·J).
    pub calibration: f64,
    pub integrator: IntegratorConfig,
    pub pump: CwSpec,
    pub readout: CwSpec,
    /// Gap between pump end and the first control pulse.
    pub lead: f64,
    /// Gap between the last control pulse and readout.
    pub readout_delay: f64,
    /// Also integrate emitted photons under the readout drive.
    pub photon_readout: bool,
    pub bath: Option<BathModel>,
    pub bath_samples: usize,
    pub seed: u64,
    /// Brownian diffusion constant of the spin detuning, rad²/s³.
    pub diffusion: f64,
    /// Relative standard deviation of the rotation angle across the spot; 0 disables it.
    pub angle_spread: f64,
    pub angle_spread_nodes: usize,
    pub propagation: Propagation,
}

/// Pump Rabi frequency meeting the ≥ 95% fidelity target with a 1 ns
/// radiative lifetime over 10 µs: 2π × 10 MHz.
pub const DEFAULT_PUMP_RABI: f64 = 2.0 * std::f64::consts::PI * 10e6;
pub const DEFAULT_PUMP_DURATION: f64 = 10e-6;

impl Setup {
    pub fn new(levels: LevelScheme, dissipators: DissipatorSet, pulse: PulseSpec, calibration: f64) -> Result<Self> {
        let s = Self {
            levels: levels.with_detuning(pulse.detuning),
            dissipators,
            pulse,
            calibration,
            integrator: IntegratorConfig::default(),
            pump: CwSpec { duration: DEFAULT_PUMP_DURATION, rabi: DEFAULT_PUMP_RABI },
            readout: CwSpec { duration: DEFAULT_PUMP_DURATION, rabi: DEFAULT_PUMP_RABI },
            lead: 1e-9,
            readout_delay: 20e-9,
            photon_readout: false,
            bath: None,
            bath_samples: 1,
            seed: 0,
            diffusion: 0.0,
            angle_spread: 0.0,
            angle_spread_nodes: 9,
            propagation: Propagation::Kick,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::new();
        if let Err(e) = self.pulse.validate() {
            for i in e.issues() {
                issues.push(i.key.clone(), i.message.clone());
            }
        }
        if let Err(e) = self.dissipators.validate() {
            for i in e.issues() {
                issues.push(i.key.clone(), i.message.clone());
            }
        }
        if let Err(e) = self.integrator.validate() {
            for i in e.issues() {
                issues.push(i.key.clone(), i.message.clone());
            }
        }
        if self.levels.detuning != self.pulse.detuning {
            issues.push("pulse.detuning", "must equal the level-scheme detuning");
        }
        if !(self.calibration >= 0.0 && self.calibration.is_finite()) {
            issues.push("pulse.calibration", format!("must be finite and >= 0, got {}", self.calibration));
        }
        self.pump.validate("pump", &mut issues);
        self.readout.validate("readout", &mut issues);
        for (k, v) in [("sequence.lead", self.lead), ("sequence.readout_delay", self.readout_delay)] {
            if !(v >= 0.0 && v.is_finite()) {
                issues.push(k, format!("must be finite and >= 0, got {v}"));
            }
        }
        if self.bath_samples == 0 {
            issues.push("bath.samples", "must be >= 1");
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            issues.push("bath.diffusion", "must be finite and >= 0");
        }
        if !(self.angle_spread >= 0.0 && self.angle_spread < 1.0) {
            issues.push("pulse.angle_spread", format!("relative spread must lie in [0, 1), got {}", self.angle_spread));
        }
        if self.angle_spread_nodes == 0 {
            issues.push("pulse.angle_spread_nodes", "must be >= 1");
        }
        if self.propagation == Propagation::Exact && self.diffusion > 0.0 {
            issues.push("sequence.propagation", "exact propagation does not support a diffusing detuning; use kick");
        }
        issues.finish()
    }

    /// Larmor period 2π/ω_e.
    pub fn larmor_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.levels.omega_e
    }

    /// Nominal two-level rotation angle per joule of pulse energy.
    pub fn angle_per_joule(&self) -> Result<f64> {
        Ok(effective_rabi(1.0, self.pulse.detuning, self.levels.omega_h)? * self.calibration)
    }

    /// Pulse energy with nominal rotation angle `theta`.
    pub fn energy_for_angle(&self, theta: f64) -> Result<f64> {
        let per = self.angle_per_joule()?;
        if !(per > 0.0) {
            return Err(Error::invalid("pulse.calibration", "a zero calibration cannot rotate the spin"));
        }
        Ok(theta / per)
    }

    /// Scramble, pump, control pulses `(offset after the lead, energy)` in
    /// order, then readout after `readout_delay`.
    pub fn timeline(&self, pulses: &[(f64, f64)]) -> Vec<Step> {
        let t0 = self.pump.duration + self.lead;
        let mut steps = vec![Step::Scramble, Step::Pump(self.pump)];
        for (dt, e) in pulses {
            steps.push(Step::Pulse(self.pulse.with_energy(*e).at(t0 + dt)));
        }
        steps.push(Step::Wait(self.readout_delay));
        steps.push(Step::Readout(self.readout));
        steps
    }

    /// Effective diffusion constant that produces exp(−(t/T)³) echo decay.
    pub fn diffusion_for_echo_time(t2: f64) -> Result<f64> {
        if !(t2 > 0.0 && t2.is_finite()) {
            return Err(Error::invalid("t2", "must be positive and finite"));
        }
        Ok(24.0 / t2.powi(3))
    }
}

/// One element of a timeline. Control pulses carry their arrival time on the
/// sequence clock, which starts at zero when the timeline starts.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Scramble,
    Pump(CwSpec),
    Pulse(PulseSpec),
    Wait(f64),
    Readout(CwSpec),
}

/// Ordered steps plus ensemble settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub steps: Vec<Step>,
    pub bath_samples: usize,
    pub seed: u64,
}

impl SequenceSpec {
    /// Checks chronological order: pulses never precede the clock.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::new();
        if self.bath_samples == 0 {
            issues.push("bath_samples", "must be >= 1");
        }
        let mut clock = 0.0f64;
        for (i, s) in self.steps.iter().enumerate() {
            match s {
                Step::Scramble => {}
                Step::Pump(c) | Step::Readout(c) => {
                    c.validate(&format!("steps[{i}]"), &mut issues);
                    clock += c.duration;
                }
                Step::Pulse(p) => {
                    if p.arrival_time < clock {
                        issues.push(
                            format!("steps[{i}]"),
                            format!("pulse at {:e} s precedes the end of the previous step at {clock:e} s", p.arrival_time),
                        );
                    }
                    clock = clock.max(p.arrival_time);
                }
                Step::Wait(d) => {
                    if !(*d >= 0.0) {
                        issues.push(format!("steps[{i}]"), format!("wait must be >= 0, got {d}"));
                    }
                    clock += d.max(0.0);
                }
            }
        }
        issues.finish()
    }
}

/// Populations versus a swept quantity, with the run configuration attached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentTrace {
    /// Unit-suffixed column name, e.g. `tau_s` or `energy_J`.
    pub abscissa_name: String,
    pub abscissa: Vec<f64>,
    pub p_up: Vec<f64>,
    pub p_down: Vec<f64>,
    pub p_up_stderr: Vec<f64>,
    pub photons: Option<Vec<f64>>,
    pub metadata: serde_json::Value,
}

/// Population bound tolerance for averaged traces.
pub const POPULATION_TOL: f64 = 1e-9;

impl ExperimentTrace {
    pub fn check_invariants(&self) -> Result<()> {
        let mut issues = Issues::new();
        for (i, (u, d)) in self.p_up.iter().zip(&self.p_down).enumerate() {
            if !(*u >= -POPULATION_TOL && *u <= 1.0 + POPULATION_TOL && *d >= -POPULATION_TOL && *d <= 1.0 + POPULATION_TOL) {
                issues.push(format!("trace[{i}]"), format!("populations out of [0, 1]: p_up {u}, p_down {d}"));
            }
            if u + d > 1.0 + POPULATION_TOL {
                issues.push(format!("trace[{i}]"), format!("ground populations sum to {}", u + d));
            }
        }
        issues.finish()
    }

    pub fn to_table(&self) -> Table {
        let mut headers = vec![self.abscissa_name.as_str(), "p_up", "p_down", "p_up_stderr"];
        let mut cols = vec![self.abscissa.clone(), self.p_up.clone(), self.p_down.clone(), self.p_up_stderr.clone()];
        if let Some(p) = &self.photons {
            headers.push("photons");
            cols.push(p.clone());
        }
        Table::from_columns(&headers, cols).expect("trace columns share a length")
    }
}
