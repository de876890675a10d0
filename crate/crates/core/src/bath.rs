//! Hyperfine field of the donor's own nucleus and of the surrounding
//! magnetic host isotope, and the resulting inhomogeneous dephasing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{cation_sites, norm};
use crate::units::{density_at_origin, MaterialParams, BOHR_MAGNETON, NUCLEAR_MAGNETON, REDUCED_PLANCK, VACUUM_PERMEABILITY};

/// Multiplet weights m_I for the I = 3/2 donor nucleus.
pub const GA_MULTIPLET: [f64; 4] = [1.5, 0.5, -0.5, -1.5];
pub const DEFAULT_CUTOFF_BOHR: f64 = 10.0;
pub const MIN_CUTOFF_BOHR: f64 = 5.0;

/// How Σ_j |ψ(R_j)|⁴ over host sites is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ZnSumMode {
    /// n_Zn / (8π a_B³), the integral of the hydrogenic density squared.
    Continuum,
    /// Explicit sum over wurtzite cation sites within `cutoff` (m).
    LatticeSum { cutoff: f64 },
}

impl ZnSumMode {
    pub fn lattice_default(m: &MaterialParams) -> Self {
        ZnSumMode::LatticeSum { cutoff: DEFAULT_CUTOFF_BOHR * m.bohr_radius }
    }
}

/// Whether the quoted host-field dispersion is a Gaussian half-width
/// (envelope exp(−(wΔt)²)) or an rms (envelope exp(−(wΔt)²/2)).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispersionConvention {
    #[default]
    HalfWidth,
    Rms,
}

impl DispersionConvention {
    /// Ratio of the field standard deviation to the quoted dispersion.
    pub fn std_factor(self) -> f64 {
        match self {
            DispersionConvention::HalfWidth => 2f64.sqrt(),
            DispersionConvention::Rms => 1.0,
        }
    }
}

/// The four hyperfine fields from the donor nucleus, tesla.
pub fn ga_field_values(m: &MaterialParams) -> Result<[f64; 4]> {
    m.validate()?;
    let psi0 = density_at_origin(m.bohr_radius)?;
    let unit = 2.0 * VACUUM_PERMEABILITY / (3.0 * m.g_electron) * (m.moment_donor * NUCLEAR_MAGNETON / m.nuclear_spin_donor)
        * m.bloch_density_ratio
        * psi0;
    Ok(GA_MULTIPLET.map(|w| w * unit))
}

/// Σ_j |ψ(R_j)|⁴ over all cation sites except the donor's own, m⁻⁶.
pub fn envelope_fourth_moment(m: &MaterialParams, mode: ZnSumMode) -> Result<f64> {
    let a = m.bohr_radius;
    match mode {
        ZnSumMode::Continuum => Ok(m.zn_site_density / (8.0 * PI * a.powi(3))),
        ZnSumMode::LatticeSum { cutoff } => {
            if !(cutoff >= MIN_CUTOFF_BOHR * a) {
                return Err(Error::invalid(
                    "cutoff",
                    format!("lattice-sum cutoff {cutoff:e} m is below {MIN_CUTOFF_BOHR} Bohr radii ({:e} m)", MIN_CUTOFF_BOHR * a),
                ));
            }
            let sum: f64 = cation_sites(m.lattice_a, m.lattice_c, cutoff, 0)
                .iter()
                .map(|p| (-4.0 * norm(p) / a).exp())
                .sum();
            Ok(sum / (PI * PI * a.powi(6)))
        }
    }
}

/// Gaussian dispersion of the host nuclear field, tesla.
pub fn zn_dispersion(m: &MaterialParams, mode: ZnSumMode) -> Result<f64> {
    m.validate()?;
    let i = m.nuclear_spin_zn;
    let sum = envelope_fourth_moment(m, mode)?;
    Ok(VACUUM_PERMEABILITY * m.moment_zn * NUCLEAR_MAGNETON / m.g_electron
        * (32.0f64 / 27.0).sqrt()
        * ((i + 1.0) / i).sqrt()
        * m.bloch_density_ratio
        * (m.abundance_zn67 * sum).sqrt())
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathModel {
    pub ga_field_values: [f64; 4],
    /// Standard deviation of the sampled host field, tesla.
    pub zn_dispersion: f64,
    /// √(zn_dispersion² + rms(ga)²), tesla.
    pub combined_dispersion: f64,
    /// The formula value before the convention factor, tesla.
    pub zn_nominal: f64,
    pub convention: DispersionConvention,
    pub g_electron: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverhauserSample {
    /// Shift of ω_e, rad/s.
    pub detuning: f64,
    pub ga_component: f64,
    pub zn_component: f64,
}

/// Dephasing-time estimates; `None` means the envelope never decays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T2Star {
    pub exact: Option<f64>,
    pub quadrature: Option<f64>,
}

impl BathModel {
    pub fn new(m: &MaterialParams, mode: ZnSumMode, convention: DispersionConvention) -> Result<Self> {
        let ga = ga_field_values(m)?;
        let nominal = zn_dispersion(m, mode)?;
        Ok(Self::from_parts(ga, nominal, convention, m.g_electron))
    }

    pub fn from_parts(ga_field_values: [f64; 4], zn_nominal: f64, convention: DispersionConvention, g_electron: f64) -> Self {
        let zn = zn_nominal * convention.std_factor();
        Self {
            ga_field_values,
            zn_dispersion: zn,
            combined_dispersion: zn.hypot(rms(&ga_field_values)),
            zn_nominal,
            convention,
            g_electron,
        }
    }

    /// A purely Gaussian bath whose exact envelope is exp(−(t/T₂*)²).
    pub fn gaussian_for_t2_star(t2_star: f64, g_electron: f64) -> Result<Self> {
        if !(t2_star > 0.0 && t2_star.is_finite()) {
            return Err(Error::invalid("t2_star", "must be positive and finite"));
        }
        let std = 2f64.sqrt() / t2_star / field_to_rad(g_electron);
        Ok(Self::from_parts([0.0; 4], std, DispersionConvention::Rms, g_electron))
    }

    /// rad/s per tesla of Overhauser field.
    pub fn gyromagnetic(&self) -> f64 {
        field_to_rad(self.g_electron)
    }

    pub fn ga_rms(&self) -> f64 {
        rms(&self.ga_field_values)
    }

    /// Ensemble free-precession envelope ⟨cos(δ t)⟩ at time `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        let w = self.gyromagnetic();
        let ga = self.ga_field_values.iter().map(|b| (w * b * t).cos()).sum::<f64>() / 4.0;
        let s = w * self.zn_dispersion * t;
        ga * (-0.5 * s * s).exp()
    }

    pub fn t2_star(&self) -> T2Star {
        let w = self.gyromagnetic();
        let scale = self.ga_field_values.iter().fold(self.zn_dispersion, |acc, b| acc.max(b.abs())) * w;
        let exact = (scale > 0.0).then(|| first_crossing(|t| self.envelope(t), 1.0 / std::f64::consts::E, 1.0 / scale)).flatten();
        let nominal = self.zn_nominal.hypot(self.ga_rms());
        let quadrature = (nominal > 0.0).then(|| 1.0 / (w * nominal));
        T2Star { exact, quadrature }
    }

    pub fn sample_overhauser(&self, seed: u64, n: usize) -> Result<Vec<OverhauserSample>> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one sample"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| self.draw(&mut rng)).collect())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> OverhauserSample {
        let ga = self.ga_field_values[rng.random_range(0..4)];
        let zn = if self.zn_dispersion > 0.0 {
            Normal::new(0.0, self.zn_dispersion).expect("finite dispersion").sample(rng)
        } else {
            0.0
        };
        OverhauserSample { detuning: self.gyromagnetic() * (ga + zn), ga_component: ga, zn_component: zn }
    }

    pub fn summary(&self) -> BathSummary {
        let t2 = self.t2_star();
        BathSummary {
            ga_field_values_t: self.ga_field_values,
            zn_dispersion_t: self.zn_dispersion,
            zn_nominal_t: self.zn_nominal,
            combined_dispersion_t: self.combined_dispersion,
            convention: self.convention,
            t2_star_exact_s: t2.exact,
            t2_star_quadrature_s: t2.quadrature,
        }
    }
}

fn field_to_rad(g: f64) -> f64 {
    g * BOHR_MAGNETON / REDUCED_PLANCK
}

/// First t > 0 where `f` falls to `level`, scanning in steps of `scale`/400
/// up to 200·`scale`, refined by bisection.
fn first_crossing(f: impl Fn(f64) -> f64, level: f64, scale: f64) -> Option<f64> {
    let dt = scale / 400.0;
    let mut lo = 0.0;
    for k in 1..=80_000 {
        let hi = k as f64 * dt;
        if f(hi) <= level {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if f(mid) > level {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Some(0.5 * (a + b));
        }
        lo = hi;
    }
    None
}

/// Key-value bath report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSummary {
    pub ga_field_values_t: [f64; 4],
    pub zn_dispersion_t: f64,
    pub zn_nominal_t: f64,
    pub combined_dispersion_t: f64,
    pub convention: DispersionConvention,
    pub t2_star_exact_s: Option<f64>,
    pub t2_star_quadrature_s: Option<f64>,
}

/// Both T₂* figures for a material with the default continuum host sum.
pub fn t2_star_theory(m: &MaterialParams, convention: DispersionConvention) -> Result<T2Star> {
    Ok(BathModel::new(m, ZnSumMode::Continuum, convention)?.t2_star())
}
