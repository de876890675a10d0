use super::{DissipatorSet, Super, UP_SET};
use crate::hamiltonian::{LevelScheme, Mat4, C64, UP};

/// Closed-form propagation with no optical drive.
///
/// With a diagonal Hamiltonian and rate-type jumps, populations obey a linear
/// rate equation and each coherence decays and rotates independently.
#[derive(Debug, Clone)]
pub struct FreeEvolution {
    energies: [f64; 4],
    radiative_rate: f64,
    t1_rate: f64,
    /// Branching imbalance b(→↓) − b(→↑) of each excited state.
    imbalance: [f64; 2],
    coherence_decay: [[f64; 4]; 4],
}

impl FreeEvolution {
    /// `levels.detuning` fixes the frame of the excited states.
    pub fn new(levels: &LevelScheme, d: &DissipatorSet) -> Self {
        let out = d.out_rates();
        let mut coherence_decay = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let mut g = 0.5 * (out[i] + out[j]);
                    if UP_SET[i] != UP_SET[j] {
                        g += d.ground_dephasing_rate;
                    }
                    coherence_decay[i][j] = g;
                }
            }
        }
        Self {
            energies: levels.diagonal(),
            radiative_rate: d.radiative_rate,
            t1_rate: d.t1_rate,
            imbalance: d.branching.map(|b| b[0] - b[1]),
            coherence_decay,
        }
    }

    /// Advances `rho` by `dt`. `up_phase` adds ∫δω dt accumulated by |↑⟩
    /// beyond ω_e·dt (a time-dependent Overhauser shift).
    pub fn propagate(&self, rho: &Mat4, dt: f64, up_phase: f64) -> Mat4 {
        let p = self.populations([0, 1, 2, 3].map(|i| rho[(i, i)]), dt);
        let mut out = Mat4::zeros();
        let phase = |i: usize| self.energies[i] * dt + if i == UP { up_phase } else { 0.0 };
        for i in 0..4 {
            for j in 0..4 {
                out[(i, j)] = if i == j {
                    p[i]
                } else {
                    let f = C64::new(-self.coherence_decay[i][j] * dt, -(phase(i) - phase(j))).exp();
                    rho[(i, j)] * f
                };
            }
        }
        out
    }

    /// Excited levels decay radiatively; the ground sum absorbs what they
    /// lose, and the ground imbalance relaxes at the T₁ rate while being fed.
    fn populations(&self, p: [C64; 4], dt: f64) -> [C64; 4] {
        let (g, k) = (self.radiative_rate, self.t1_rate);
        let keep = (-g * dt).exp();
        let lost = -(-g * dt).exp_m1();
        let excited = [p[2] * keep, p[3] * keep];
        let sum = p[0] + p[1] + (p[2] + p[3]) * lost;
        let feed = g * (-g.min(k) * dt).exp() * dt * phi((g - k).abs() * dt);
        let diff = (p[0] - p[1]) * (-k * dt).exp() + (p[2] * self.imbalance[0] + p[3] * self.imbalance[1]) * feed;
        [(sum + diff) * 0.5, (sum - diff) * 0.5, excited[0], excited[1]]
    }

    /// The same map as a 16×16 matrix on column-stacked ρ.
    pub fn superoperator(&self, dt: f64, up_phase: f64) -> Super {
        let mut s = Super::zeros();
        for k in 0..16 {
            let mut basis = Mat4::zeros();
            basis[(k % 4, k / 4)] = C64::new(1.0, 0.0);
            let col = self.propagate(&basis, dt, up_phase);
            s.column_mut(k).copy_from_slice(col.as_slice());
        }
        s
    }
}

/// (1 − e^{−x}) / x, continuous at 0.
fn phi(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{DOWN, EXC_DOWN};
    use crate::lindblad::{dissipator, DensityMatrix};
    use crate::ode::{dopri5, StepControl};
    use nalgebra::Vector4;

    #[test]
    fn unitary_phase_rotation() {
        let levels = LevelScheme::new(2.0, 0.5, 7.0).unwrap();
        let f = FreeEvolution::new(&levels, &DissipatorSet::none());
        let mut rho = *DensityMatrix::ground_mixture().matrix();
        rho[(DOWN, UP)] = C64::new(0.3, 0.0);
        rho[(UP, DOWN)] = C64::new(0.3, 0.0);
        let out = f.propagate(&rho, 1.25, 0.0);
        assert_eq!(out[(DOWN, DOWN)], rho[(DOWN, DOWN)]);
        let expect = C64::from_polar(0.3, 2.0 * 1.25);
        assert!((out[(DOWN, UP)] - expect).norm() < 1e-15);
    }

    #[test]
    fn matches_generator_integration() {
        let levels = LevelScheme::new(3.0, 1.0, 5.0).unwrap();
        let d = DissipatorSet {
            radiative_rate: 0.7,
            branching: [[0.3, 0.7], [0.6, 0.4]],
            t1_rate: 0.2,
            ground_dephasing_rate: 0.1,
            beta1: 0.0,
            beta2: 0.0,
        };
        let mut rho = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                rho[(i, j)] = C64::new(0.1 * (i + j) as f64, 0.05 * (i as f64 - j as f64));
            }
        }
        let h = Mat4::from_diagonal(&Vector4::from(levels.diagonal().map(C64::from)));
        let ctl = StepControl { rel_tol: 1e-12, abs_tol: 1e-14, max_step: 0.01, min_step: 1e-12 };
        let (num, _) = dopri5(
            |_, r: &Mat4| (h * r - r * h) * C64::new(0.0, -1.0) + dissipator(r, &d, 0.0),
            0.0,
            2.0,
            rho,
            &ctl,
        )
        .unwrap();
        let exact = FreeEvolution::new(&levels, &d).propagate(&rho, 2.0, 0.0);
        assert!((num - exact).camax() < 1e-10, "{}", (num - exact).camax());
    }

    #[test]
    fn inverse_and_composition() {
        let levels = LevelScheme::new(3.0, 1.0, 5.0).unwrap();
        let d = DissipatorSet { radiative_rate: 1.0, t1_rate: 0.3, ..DissipatorSet::none() };
        let f = FreeEvolution::new(&levels, &d);
        let a = f.superoperator(0.4, 0.1);
        let b = f.superoperator(0.6, -0.3);
        let ab = f.superoperator(1.0, -0.2);
        assert!((b * a - ab).camax() < 1e-12);
        let inv = f.superoperator(-0.4, -0.1);
        assert!((inv * a - Super::identity()).camax() < 1e-12);
        let rho = DensityMatrix::pure(EXC_DOWN);
        let out = f.propagate(rho.matrix(), 50.0, 0.0);
        assert!((out[(DOWN, DOWN)].re - 0.5).abs() < 1e-6);
    }
}
