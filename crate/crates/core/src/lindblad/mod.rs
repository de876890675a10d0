//! Master-equation dynamics of the four-level donor.
//!
//! ∂ρ/∂t = −i[H, ρ] + L(ρ) with rate-type jump operators (radiative decay,
//! ground-state T₁, ground pure dephasing) and a drive-dependent dephasing of
//! the ground/excited partition with rate γ(t) = β₁Ω_R(t) + β₂Ω_R²(t).

mod evolve;
mod free;
mod propagate;

pub use evolve::{evolve, change_frame, Drive, Segment, Trajectory};
pub use free::FreeEvolution;
pub use propagate::{
    propagators, DriveGenerator, Generator, IntegratorConfig, Propagator, Super,
};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Issues, Result};
use crate::hamiltonian::{Mat4, C64, DOWN, EXC_DOWN, EXC_UP, UP};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-7;

/// Hermitian, unit-trace, positive 4×4 state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat4);

impl DensityMatrix {
    /// Validates the physical-state invariants.
    pub fn new(m: Mat4) -> Result<Self> {
        let rho = Self(m);
        let r = rho.diagnostics();
        if r.hermiticity > HERMITICITY_TOL {
            return Err(Error::invalid("rho", format!("not Hermitian (deviation {:e})", r.hermiticity)));
        }
        if r.trace_error > TRACE_TOL {
            return Err(Error::invalid("rho", format!("trace off by {:e}", r.trace_error)));
        }
        if r.min_eigenvalue < -POSITIVITY_TOL {
            return Err(Error::Positivity { time: f64::NAN, min_eigenvalue: r.min_eigenvalue });
        }
        Ok(rho)
    }

    /// Wraps a matrix produced by the integrators without validating it.
    pub fn from_matrix_unchecked(m: Mat4) -> Self {
        Self(m)
    }

    pub fn pure(level: usize) -> Self {
        let mut m = Mat4::zeros();
        m[(level, level)] = C64::new(1.0, 0.0);
        Self(m)
    }

    /// diag(½, ½, 0, 0).
    pub fn ground_mixture() -> Self {
        let mut m = Mat4::zeros();
        m[(DOWN, DOWN)] = C64::new(0.5, 0.0);
        m[(UP, UP)] = C64::new(0.5, 0.0);
        Self(m)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat4 {
        self.0
    }

    pub fn population(&self, level: usize) -> f64 {
        self.0[(level, level)].re
    }

    pub fn populations(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| self.0[(i, i)].re)
    }

    pub fn p_up(&self) -> f64 {
        self.population(UP)
    }

    pub fn p_down(&self) -> f64 {
        self.population(DOWN)
    }

    pub fn excited_population(&self) -> f64 {
        self.population(EXC_DOWN) + self.population(EXC_UP)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        StateDiagnostics {
            hermiticity: (self.0 - self.0.adjoint()).camax(),
            trace_error: (self.trace() - C64::new(1.0, 0.0)).norm(),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateDiagnostics {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

/// Dissipative channels. Rates in s⁻¹; β₁ dimensionless, β₂ in s/rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipatorSet {
    /// Total radiative rate out of each excited state.
    pub radiative_rate: f64,
    /// `branching[e][g]`: fraction of decays from excited state `e` (⇓, ⇑) into ground `g` (↓, ↑).
    pub branching: [[f64; 2]; 2],
    /// 1/T₁; relaxation toward the equal ground mixture.
    pub t1_rate: f64,
    /// Decay rate of the |↓⟩/|↑⟩ coherence from pure dephasing.
    pub ground_dephasing_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for DissipatorSet {
    fn default() -> Self {
        Self::none()
    }
}

impl DissipatorSet {
    pub fn none() -> Self {
        Self {
            radiative_rate: 0.0,
            branching: [[0.5, 0.5], [0.5, 0.5]],
            t1_rate: 0.0,
            ground_dephasing_rate: 0.0,
            beta1: 0.0,
            beta2: 0.0,
        }
    }

    /// Balanced branching with the given radiative lifetime.
    pub fn radiative(lifetime: f64) -> Self {
        Self { radiative_rate: 1.0 / lifetime, ..Self::none() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::new();
        for (key, v) in [
            ("radiative_rate", self.radiative_rate),
            ("t1_rate", self.t1_rate),
            ("ground_dephasing_rate", self.ground_dephasing_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                issues.push(format!("dissipators.{key}"), format!("must be finite and >= 0, got {v}"));
            }
        }
        for (e, row) in self.branching.iter().enumerate() {
            if row.iter().any(|b| !(0.0..=1.0).contains(b)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
                issues.push(
                    format!("dissipators.branching[{e}]"),
                    format!("weights must lie in [0, 1] and sum to 1, got {row:?}"),
                );
            }
        }
        issues.finish()
    }

    /// γ(Ω_R) = β₁Ω_R + β₂Ω_R².
    pub fn excited_dephasing(&self, rabi: f64) -> f64 {
        self.beta1 * rabi + self.beta2 * rabi * rabi
    }

    /// Total jump rate out of each level (excluding dephasing).
    pub(crate) fn out_rates(&self) -> [f64; 4] {
        let t1 = 0.5 * self.t1_rate;
        [t1, t1, self.radiative_rate, self.radiative_rate]
    }

    /// (target, source, rate) for every population-transfer jump.
    pub(crate) fn jumps(&self) -> [(usize, usize, f64); 6] {
        let r = self.radiative_rate;
        let t1 = 0.5 * self.t1_rate;
        [
            (DOWN, EXC_DOWN, r * self.branching[0][0]),
            (UP, EXC_DOWN, r * self.branching[0][1]),
            (DOWN, EXC_UP, r * self.branching[1][0]),
            (UP, EXC_UP, r * self.branching[1][1]),
            (UP, DOWN, t1),
            (DOWN, UP, t1),
        ]
    }
}

fn add_jump(rho: &Mat4, out: &mut Mat4, target: usize, source: usize, rate: f64) {
    if rate == 0.0 {
        return;
    }
    out[(target, target)] += rho[(source, source)] * rate;
    let half = 0.5 * rate;
    for j in 0..4 {
        out[(source, j)] -= rho[(source, j)] * half;
        out[(j, source)] -= rho[(j, source)] * half;
    }
}

/// Coherences between `inside` and its complement decay at `rate`.
fn add_dephasing(rho: &Mat4, out: &mut Mat4, inside: [bool; 4], rate: f64) {
    if rate == 0.0 {
        return;
    }
    for i in 0..4 {
        for j in 0..4 {
            if inside[i] != inside[j] {
                out[(i, j)] -= rho[(i, j)] * rate;
            }
        }
    }
}

pub(crate) const UP_SET: [bool; 4] = [false, true, false, false];
pub(crate) const EXCITED_SET: [bool; 4] = [false, false, true, true];

/// L(ρ) alone, for a given instantaneous excited-state dephasing rate.
pub fn dissipator(rho: &Mat4, d: &DissipatorSet, excited_dephasing: f64) -> Mat4 {
    let mut out = Mat4::zeros();
    for (target, source, rate) in d.jumps() {
        add_jump(rho, &mut out, target, source, rate);
    }
    add_dephasing(rho, &mut out, UP_SET, d.ground_dephasing_rate);
    add_dephasing(rho, &mut out, EXCITED_SET, excited_dephasing);
    out
}

/// −i[H, ρ] + L(ρ), with γ evaluated at the instantaneous Rabi frequency.
pub fn lindblad_rhs(rho: &Mat4, h: &Mat4, d: &DissipatorSet, instant_rabi: f64) -> Mat4 {
    let comm = h * rho - rho * h;
    comm * C64::new(0.0, -1.0) + dissipator(rho, d, d.excited_dephasing(instant_rabi))
}

/// 1/T₁(B) = (1/T₁,ref)(B/B_ref)^exponent.
pub fn t1_rate_model(field: f64, reference_t1: f64, reference_field: f64, exponent: f64) -> Result<f64> {
    if !(field > 0.0) {
        return Err(Error::invalid("field", format!("must be > 0 T, got {field}")));
    }
    if !(reference_t1 > 0.0) || !(reference_field > 0.0) {
        return Err(Error::invalid("t1_model", "reference T1 and field must be > 0"));
    }
    Ok((field / reference_field).powf(exponent) / reference_t1)
}

/// T₁ = 0.1 s at 2.25 T, rate ∝ B^3.5.
pub fn default_t1_rate(field: f64) -> Result<f64> {
    t1_rate_model(field, 0.1, 2.25, 3.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{hamiltonian_matrix, LevelScheme};
    use proptest::prelude::*;

    fn random_state(seed: &[f64; 32]) -> Mat4 {
        let mut a = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                a[(i, j)] = C64::new(seed[2 * (4 * i + j)], seed[2 * (4 * i + j) + 1]);
            }
        }
        let m = a * a.adjoint();
        m / m.trace()
    }

    #[test]
    fn zero_generator() {
        let rho = DensityMatrix::ground_mixture();
        let out = lindblad_rhs(rho.matrix(), &Mat4::zeros(), &DissipatorSet::none(), 0.0);
        assert_eq!(out, Mat4::zeros());
    }

    #[test]
    fn radiative_flow_from_excited_state() {
        // rate-equation oracle: dp_↓/dt = dp_↑/dt = r/2, dp_⇓/dt = -r
        let r = 1e9;
        let rho = DensityMatrix::pure(EXC_DOWN);
        let out = lindblad_rhs(rho.matrix(), &Mat4::zeros(), &DissipatorSet::radiative(1.0 / r), 0.0);
        assert!((out[(DOWN, DOWN)].re - r / 2.0).abs() < 1e-3);
        assert!((out[(UP, UP)].re - r / 2.0).abs() < 1e-3);
        assert!((out[(EXC_DOWN, EXC_DOWN)].re + r).abs() < 1e-3);
        assert_eq!(out[(EXC_UP, EXC_UP)].re, 0.0);
    }

    #[test]
    fn dephasing_rates_are_coherence_decay_rates() {
        let mut m = Mat4::zeros();
        m[(DOWN, UP)] = C64::new(1.0, 0.0);
        let d = DissipatorSet { ground_dephasing_rate: 3.0, t1_rate: 2.0, ..DissipatorSet::none() };
        let out = dissipator(&m, &d, 0.0);
        // γφ + T₁/2
        assert!((out[(DOWN, UP)].re + 4.0).abs() < 1e-12);
        let mut m = Mat4::zeros();
        m[(UP, EXC_DOWN)] = C64::new(1.0, 0.0);
        m[(EXC_DOWN, EXC_UP)] = C64::new(1.0, 0.0);
        let out = dissipator(&m, &DissipatorSet::none(), 5.0);
        assert!((out[(UP, EXC_DOWN)].re + 5.0).abs() < 1e-12);
        assert_eq!(out[(EXC_DOWN, EXC_UP)].re, 0.0);
    }

    #[test]
    fn t1_model_values() {
        assert!((default_t1_rate(2.25).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(t1_rate_model(3.0, 0.5, 3.0, 3.5).unwrap(), 2.0);
        let t1 = 1.0 / default_t1_rate(4.5).unwrap();
        assert!((t1 - 0.1 * 2f64.powf(-3.5)).abs() < 1e-15);
        assert!((t1 - 8.8e-3).abs() < 0.05e-3);
        assert!(default_t1_rate(0.0).is_err());
        assert!(default_t1_rate(-1.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(DissipatorSet::none().validate().is_ok());
        let bad = DissipatorSet { t1_rate: -1.0, branching: [[0.7, 0.7], [0.5, 0.5]], ..DissipatorSet::none() };
        assert_eq!(bad.validate().unwrap_err().issues().len(), 2);
        assert!(DensityMatrix::new(Mat4::identity()).is_err());
        assert!(DensityMatrix::new(*DensityMatrix::ground_mixture().matrix()).is_ok());
    }

    proptest! {
        #[test]
        fn generator_is_traceless_and_hermiticity_preserving(
            seed in proptest::array::uniform32(-1.0f64..1.0),
            diag in proptest::array::uniform3(0.0f64..5.0),
            w in proptest::array::uniform4(-2.0f64..2.0),
            rates in proptest::array::uniform6(0.0f64..3.0),
            b in 0.0f64..1.0,
        ) {
            let rho = random_state(&seed);
            let levels = LevelScheme::new(diag[0], diag[1], diag[2]).unwrap();
            let h = hamiltonian_matrix(&levels, &w.map(|x| C64::new(x, 0.3 * x)));
            let d = DissipatorSet {
                radiative_rate: rates[0],
                branching: [[b, 1.0 - b], [1.0 - b, b]],
                t1_rate: rates[1],
                ground_dephasing_rate: rates[2],
                beta1: rates[3],
                beta2: rates[4],
            };
            let out = lindblad_rhs(&rho, &h, &d, rates[5]);
            prop_assert!(out.trace().norm() < 1e-12);
            prop_assert!((out - out.adjoint()).camax() < 1e-12);
        }
    }
}
