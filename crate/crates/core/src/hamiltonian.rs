//! Four-level donor Hamiltonian in the rotating frame of an optical drive.
//!
//! Basis order: |↓⟩, |↑⟩, |⇓↑↓⟩, |⇑↑↓⟩. Entries are angular frequencies.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ode::{dopri5, StepControl};
use crate::registry::{Named, Registry};
use crate::units::{zeeman_splitting, FieldConfig, MaterialParams};

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;

pub const DOWN: usize = 0;
pub const UP: usize = 1;
pub const EXC_DOWN: usize = 2;
pub const EXC_UP: usize = 3;
pub const GROUND_STATES: [usize; 2] = [DOWN, UP];
pub const EXCITED_STATES: [usize; 2] = [EXC_DOWN, EXC_UP];

/// Zeeman splittings and the control-laser detuning, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub omega_e: f64,
    pub omega_h: f64,
    /// Red detuning of the drive from |↓⟩ ↔ |⇓↑↓⟩.
    pub detuning: f64,
}

impl LevelScheme {
    pub fn new(omega_e: f64, omega_h: f64, detuning: f64) -> Result<Self> {
        if !(omega_e >= 0.0) || !(omega_h >= 0.0) || !detuning.is_finite() {
            return Err(Error::invalid(
                "levels",
                "Zeeman splittings must be >= 0 and the detuning finite",
            ));
        }
        Ok(Self { omega_e, omega_h, detuning })
    }

    pub fn from_material(m: &MaterialParams, field: &FieldConfig, detuning: f64) -> Result<Self> {
        Self::new(
            zeeman_splitting(m.g_electron, field.magnitude)?,
            zeeman_splitting(m.g_hole, field.magnitude)?,
            detuning,
        )
    }

    pub fn with_detuning(self, detuning: f64) -> Self {
        Self { detuning, ..self }
    }

    /// Frame energies (0, ω_e, Δ, Δ+ω_h).
    pub fn diagonal(&self) -> [f64; 4] {
        [0.0, self.omega_e, self.detuning, self.detuning + self.omega_h]
    }
}

/// Normalized intensity profile of a pulse family, in units of the FWHM.
pub trait EnvelopeShape: Named + Send + Sync {
    /// Intensity at `u` FWHMs from the peak; 1 at `u = 0`.
    fn intensity(&self, u: f64) -> f64;
    /// Half-width of the support, in FWHMs.
    fn half_support(&self) -> f64;
    /// ∫ intensity(u) du over the support.
    fn area(&self) -> f64;
}

struct Gaussian;
struct Sech2;
struct Rectangular;

const TRUNCATION: f64 = 5.0;
// sech²(x) = ½ at x = ln(1 + √2)
const SECH2_SCALE: f64 = 2.0 * 0.881_373_587_019_543;

impl Named for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }
}
impl EnvelopeShape for Gaussian {
    fn intensity(&self, u: f64) -> f64 {
        (-4.0 * 2f64.ln() * u * u).exp()
    }
    fn half_support(&self) -> f64 {
        TRUNCATION
    }
    fn area(&self) -> f64 {
        // erf(5·2√ln2) rounds to 1 in double precision
        (PI / (4.0 * 2f64.ln())).sqrt()
    }
}

impl Named for Sech2 {
    fn name(&self) -> &'static str {
        "sech2"
    }
}
impl EnvelopeShape for Sech2 {
    fn intensity(&self, u: f64) -> f64 {
        let c = (SECH2_SCALE * u).cosh();
        1.0 / (c * c)
    }
    fn half_support(&self) -> f64 {
        TRUNCATION
    }
    fn area(&self) -> f64 {
        2.0 * (SECH2_SCALE * TRUNCATION).tanh() / SECH2_SCALE
    }
}

impl Named for Rectangular {
    fn name(&self) -> &'static str {
        "rectangular"
    }
}
impl EnvelopeShape for Rectangular {
    fn intensity(&self, u: f64) -> f64 {
        if u.abs() <= 0.5 {
            1.0
        } else {
            0.0
        }
    }
    fn half_support(&self) -> f64 {
        0.5
    }
    fn area(&self) -> f64 {
        1.0
    }
}

pub fn envelope_shapes() -> &'static Registry<dyn EnvelopeShape> {
    static SHAPES: OnceLock<Registry<dyn EnvelopeShape>> = OnceLock::new();
    SHAPES.get_or_init(|| {
        let mut r: Registry<dyn EnvelopeShape> = Registry::new("pulse shape");
        r.register(Arc::new(Gaussian))
            .register(Arc::new(Sech2))
            .register(Arc::new(Rectangular));
        r
    })
}

/// Shape handle that serializes as its registry name.
#[derive(Clone)]
pub struct Shape(Arc<dyn EnvelopeShape>);

impl Shape {
    pub fn named(name: &str) -> Result<Self> {
        envelope_shapes().get(name).map(Shape)
    }

    pub fn gaussian() -> Self {
        Self::named("gaussian").expect("registered")
    }

    pub fn name(&self) -> &'static str {
        self.0.name()
    }
}

impl std::ops::Deref for Shape {
    type Target = dyn EnvelopeShape;
    fn deref(&self) -> &Self::Target {
        &*self.0
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Shape({})", self.name())
    }
}

impl PartialEq for Shape {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

impl Serialize for Shape {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Shape::named(&name).map_err(serde::de::Error::custom)
    }
}

/// One optical control pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub shape: Shape,
    /// Intensity FWHM (length for rectangular pulses), s.
    pub duration: f64,
    /// Pulse energy, J.
    pub energy: f64,
    pub arrival_time: f64,
    /// Red detuning from |↓⟩ ↔ |⇓↑↓⟩, rad/s.
    pub detuning: f64,
    /// Ω₁₃, Ω₂₃, Ω₁₄, Ω₂₄ relative to Ω_R.
    pub coupling_weights: [C64; 4],
}

pub const BALANCED_COUPLING: [C64; 4] = [C64::new(1.0, 0.0); 4];

impl PulseSpec {
    /// Gaussian pulse with balanced couplings.
    pub fn gaussian(duration: f64, energy: f64, detuning: f64) -> Result<Self> {
        let p = Self {
            shape: Shape::gaussian(),
            duration,
            energy,
            arrival_time: 0.0,
            detuning,
            coupling_weights: BALANCED_COUPLING,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::invalid("pulse.duration", "must be > 0"));
        }
        if !(self.energy >= 0.0) {
            return Err(Error::invalid("pulse.energy", "must be >= 0"));
        }
        if !self.detuning.is_finite() || !self.arrival_time.is_finite() {
            return Err(Error::invalid("pulse", "detuning and arrival time must be finite"));
        }
        Ok(())
    }

    pub fn with_energy(&self, energy: f64) -> Self {
        Self { energy, ..self.clone() }
    }

    pub fn at(&self, arrival_time: f64) -> Self {
        Self { arrival_time, ..self.clone() }
    }

    /// Half-width of the integration window around the arrival time.
    pub fn half_window(&self) -> f64 {
        self.shape.half_support() * self.duration
    }

    /// Ω_R²(t) at the peak, given the energy calibration.
    pub fn peak_rabi_squared(&self, calibration: f64) -> f64 {
        calibration * self.energy / (self.duration * self.shape.area())
    }
}

/// Ω_R(t) ≥ 0 such that ∫Ω_R²dt = k·energy.
pub fn envelope_value(pulse: &PulseSpec, calibration: f64, t: f64) -> f64 {
    let u = (t - pulse.arrival_time) / pulse.duration;
    if u.abs() > pulse.shape.half_support() {
        return 0.0;
    }
    (pulse.peak_rabi_squared(calibration) * pulse.shape.intensity(u))
        .max(0.0)
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSnapshot {
    pub matrix: Mat4,
    pub time: f64,
}

/// Rotating-frame Hamiltonian for given instantaneous couplings Ω₁₃, Ω₂₃, Ω₁₄, Ω₂₄.
pub fn hamiltonian_matrix(levels: &LevelScheme, couplings: &[C64; 4]) -> Mat4 {
    let [o13, o23, o14, o24] = *couplings;
    let d = levels.diagonal();
    let mut h = Mat4::from_diagonal(&nalgebra::Vector4::new(
        C64::from(d[0]),
        C64::from(d[1]),
        C64::from(d[2]),
        C64::from(d[3]),
    ));
    for (g, e, o) in [
        (DOWN, EXC_DOWN, o13),
        (UP, EXC_DOWN, o23),
        (DOWN, EXC_UP, o14),
        (UP, EXC_UP, o24),
    ] {
        h[(g, e)] = -o * 0.5;
        h[(e, g)] = -o.conj() * 0.5;
    }
    h
}

/// Hamiltonian at time `t` for `pulse`. The pulse's own detuning sets Δ.
pub fn build_hamiltonian(
    levels: &LevelScheme,
    pulse: &PulseSpec,
    calibration: f64,
    t: f64,
) -> HamiltonianSnapshot {
    let rabi = envelope_value(pulse, calibration, t);
    let couplings = pulse.coupling_weights.map(|w| w * rabi);
    HamiltonianSnapshot {
        matrix: hamiltonian_matrix(&levels.with_detuning(pulse.detuning), &couplings),
        time: t,
    }
}

/// Ω_eff = (|Ω_R|²/2)(1/Δ + 1/(Δ+ω_h)).
pub fn effective_rabi(rabi: f64, detuning: f64, omega_h: f64) -> Result<f64> {
    if !(detuning > 0.0) || !(detuning + omega_h > 0.0) {
        return Err(Error::invalid(
            "detuning",
            format!("effective Rabi frequency needs Δ > 0 and Δ+ω_h > 0 (Δ = {detuning:e})"),
        ));
    }
    Ok(0.5 * rabi * rabi * (1.0 / detuning + 1.0 / (detuning + omega_h)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Adiabaticity {
    pub ratio: f64,
    pub pass: bool,
}

pub const ADIABATICITY_THRESHOLD: f64 = 10.0;

/// Δ·FWHM; the two-level picture is trusted when it is at least 10.
pub fn adiabaticity_diagnostic(pulse: &PulseSpec) -> Adiabaticity {
    let ratio = pulse.detuning.abs() * pulse.duration;
    Adiabaticity {
        ratio,
        pass: ratio >= ADIABATICITY_THRESHOLD,
    }
}

/// ∫Ω_eff(t) dt over the pulse, the nominal two-level rotation angle.
pub fn effective_pulse_area(levels: &LevelScheme, pulse: &PulseSpec, calibration: f64) -> Result<f64> {
    // Ω_eff ∝ Ω_R², and ∫Ω_R² dt = k·E exactly
    effective_rabi(1.0, pulse.detuning, levels.omega_h).map(|per| per * calibration * pulse.energy)
}

/// Evolves the adiabatically eliminated two-level Hamiltonian through `pulse`
/// starting from |↓⟩ and returns the final spinor (↓, ↑).
///
/// The coupling carries the e^{∓iω_e t} factors, so the result includes the
/// finite-bandwidth reduction of the rotation.
pub fn effective_two_level_evolution(
    levels: &LevelScheme,
    pulse: &PulseSpec,
    calibration: f64,
) -> Result<Vector2<C64>> {
    let per = effective_rabi(1.0, pulse.detuning, levels.omega_h)?;
    let w = pulse.half_window();
    let t0 = pulse.arrival_time - w;
    let t1 = pulse.arrival_time + w;
    let ctl = StepControl {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        max_step: pulse.duration / 50.0,
        min_step: pulse.duration * 1e-9,
    };
    let y0 = Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    let we = levels.omega_e;
    let (y, _) = dopri5(
        |t, y: &Vector2<C64>| {
            let r = envelope_value(pulse, calibration, t);
            let half = 0.5 * per * r * r;
            let phase = C64::from_polar(1.0, -we * t);
            let h = Matrix2::new(C64::new(0.0, 0.0), phase * half, phase.conj() * half, C64::new(0.0, 0.0));
            (h * y) * C64::new(0.0, -1.0)
        },
        t0,
        t1,
        y0,
        &ctl,
    )?;
    Ok(y)
}

/// Rotation angle θ with P↑ = sin²(θ/2), for θ ∈ [0, π].
pub fn rotation_angle_from_population(p_up: f64) -> f64 {
    2.0 * p_up.clamp(0.0, 1.0).sqrt().asin()
}
