//! Closed-form echo-decay estimators: instantaneous diffusion from donor
//! dipolar coupling and spectral diffusion from host nuclear flip-flops.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{t2_star_theory, DispersionConvention};
use crate::error::{Error, Result};
use crate::lattice::{cation_sites, norm};
use crate::units::{MaterialParams, BOHR_MAGNETON, NUCLEAR_MAGNETON, REDUCED_PLANCK, VACUUM_PERMEABILITY};

pub const MIN_LATTICE_CUTOFF: f64 = 3e-9;
pub const DEFAULT_LATTICE_CUTOFF: f64 = 10e-9;
/// Cutoff growth factor and tolerated relative change for convergence.
pub const CONVERGENCE_GROWTH: f64 = 1.25;
pub const CONVERGENCE_TOL: f64 = 0.01;
/// Largest cutoff tried before giving up, as a multiple of the requested one.
pub const MAX_CUTOFF_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdVariant {
    /// π in the numerator, as in the standard ESR expression.
    #[default]
    PaperConsistent,
    /// π in the denominator.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdEstimate {
    /// None when the rate vanishes.
    pub t2: Option<f64>,
    pub rate: f64,
    pub decay_exponent: u32,
    pub donor_density: f64,
    pub theta2: f64,
    pub variant: IdVariant,
}

pub fn t2_instantaneous_diffusion(m: &MaterialParams, theta2: f64, variant: IdVariant) -> Result<IdEstimate> {
    if !(0.0..=PI).contains(&theta2) {
        return Err(Error::invalid("theta2", format!("refocusing angle {theta2} rad must lie in [0, π]")));
    }
    if !(m.donor_density >= 0.0) {
        return Err(Error::invalid("donor_density", "must be non-negative"));
    }
    let ge = m.g_electron * BOHR_MAGNETON;
    let base = VACUUM_PERMEABILITY * ge * ge * m.donor_density / (9.0 * 3f64.sqrt() * REDUCED_PLANCK) * (theta2 / 2.0).sin().powi(2);
    let rate = match variant {
        IdVariant::PaperConsistent => base * PI,
        IdVariant::AsPrinted => base / PI,
    };
    Ok(IdEstimate {
        t2: (rate > 0.0).then(|| 1.0 / rate),
        rate,
        decay_exponent: 1,
        donor_density: m.donor_density,
        theta2,
        variant,
    })
}

/// Orientation of the static field relative to the crystal axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FieldDirection {
    Vector { direction: [f64; 3] },
    /// Isotropic average of (1 − 3cos²θ)², i.e. 4/5.
    PowderAverage,
}

impl FieldDirection {
    /// Field perpendicular to the c axis.
    pub fn voigt() -> Self {
        FieldDirection::Vector { direction: [1.0, 0.0, 0.0] }
    }

    fn angular(&self, p: &[f64; 3]) -> f64 {
        match self {
            FieldDirection::Vector { direction: d } => {
                let r = norm(p);
                let n = norm(d);
                let cos = (p[0] * d[0] + p[1] * d[1] + p[2] * d[2]) / (r * n);
                (1.0 - 3.0 * cos * cos).powi(2)
            }
            FieldDirection::PowderAverage => 0.8,
        }
    }

    fn validate(&self) -> Result<()> {
        if let FieldDirection::Vector { direction } = self {
            let n = norm(direction);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::invalid("field_direction", "must be a non-zero finite vector"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum LatticeSumMode {
    /// Every site weighted by the abundance.
    Deterministic,
    /// Random isotope occupations and central-site choices.
    MonteCarlo { seed: u64, realizations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSumResult {
    /// Σ_j b_j², rad²/s².
    pub sum_b_squared: f64,
    /// Standard error over realizations (Monte Carlo mode only).
    pub standard_error: Option<f64>,
    pub cutoff_radius: f64,
    pub site_count: usize,
    pub field_direction: FieldDirection,
    pub converged: bool,
    /// Relative change when the cutoff grew by the convergence factor.
    pub convergence_change: f64,
}

/// Geometric sum Σ_j (1 − 3cos²θ_j)² / r_j⁶ around basis site `center`, with
/// the per-site terms returned in a deterministic order.
fn kernel_terms(m: &MaterialParams, dir: &FieldDirection, cutoff: f64, center: usize) -> Vec<f64> {
    let sites = cation_sites(m.lattice_a, m.lattice_c, cutoff, center);
    sites.par_iter().map(|p| dir.angular(p) / norm(p).powi(6)).collect()
}

fn ordered_sum(terms: &[f64]) -> f64 {
    terms.iter().sum()
}

fn b_squared_prefactor(m: &MaterialParams) -> f64 {
    let mu = m.moment_zn * NUCLEAR_MAGNETON;
    VACUUM_PERMEABILITY.powi(2) / (16.0 * PI * PI) * mu.powi(4) / REDUCED_PLANCK.powi(2)
}

/// Abundance-weighted dipolar sum around a host magnetic nucleus.
pub fn dipolar_lattice_sum(
    m: &MaterialParams,
    direction: FieldDirection,
    cutoff: f64,
    mode: LatticeSumMode,
) -> Result<LatticeSumResult> {
    m.validate()?;
    direction.validate()?;
    if !(cutoff >= MIN_LATTICE_CUTOFF && cutoff.is_finite()) {
        return Err(Error::invalid("cutoff", format!("lattice-sum cutoff must be at least {MIN_LATTICE_CUTOFF:e} m, got {cutoff:e}")));
    }
    let pre = b_squared_prefactor(m);
    let f = m.abundance_zn67;

    let mut r = cutoff;
    let mut partial = Vec::new();
    let (geometric, change, converged_at) = loop {
        let inner = ordered_sum(&kernel_terms(m, &direction, r, 0));
        let outer = ordered_sum(&kernel_terms(m, &direction, r * CONVERGENCE_GROWTH, 0));
        let change = if outer > 0.0 { (outer - inner).abs() / outer } else { 0.0 };
        partial.push((r, inner));
        if change <= CONVERGENCE_TOL {
            break (inner, change, r);
        }
        r *= CONVERGENCE_GROWTH;
        if r > MAX_CUTOFF_FACTOR * cutoff {
            let sums: Vec<String> = partial.iter().map(|(r, s)| format!("{r:.3e} m: {:.6e}", pre * f * s)).collect();
            return Err(Error::NotConverged(format!("dipolar lattice sum did not converge; partial sums {}", sums.join(", "))));
        }
    };

    let (sum_b_squared, standard_error) = match mode {
        LatticeSumMode::Deterministic => (pre * f * geometric, None),
        LatticeSumMode::MonteCarlo { seed, realizations } => {
            if realizations < 2 {
                return Err(Error::invalid("realizations", "Monte Carlo mode needs at least 2 realizations"));
            }
            let terms = [kernel_terms(m, &direction, converged_at, 0), kernel_terms(m, &direction, converged_at, 1)];
            let samples: Vec<f64> = (0..realizations)
                .into_par_iter()
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    let center = rng.random_range(0..2);
                    terms[center].iter().filter(|_| rng.random::<f64>() < f).sum::<f64>() * pre
                })
                .collect();
            let n = samples.len() as f64;
            let mean = ordered_sum(&samples) / n;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, Some((var / n).sqrt()))
        }
    };

    Ok(LatticeSumResult {
        sum_b_squared,
        standard_error,
        cutoff_radius: converged_at,
        site_count: cation_sites(m.lattice_a, m.lattice_c, converged_at, 0).len(),
        field_direction: direction,
        converged: true,
        convergence_change: change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdEstimate {
    pub t2: Option<f64>,
    pub rate: f64,
    pub decay_exponent: u32,
    /// Magnetic host isotope density, m⁻³.
    pub isotope_density: f64,
    pub sum_b_squared: f64,
}

pub fn t2_spectral_diffusion(m: &MaterialParams, lattice: &LatticeSumResult) -> Result<SdEstimate> {
    if !(lattice.sum_b_squared >= 0.0 && lattice.sum_b_squared.is_finite()) {
        return Err(Error::invalid("sum_b_squared", "must be finite and non-negative"));
    }
    let n = m.zn67_density();
    let inner = 8.0 * PI / (27.0 * 3f64.sqrt() * REDUCED_PLANCK)
        * VACUUM_PERMEABILITY
        * m.moment_zn
        * NUCLEAR_MAGNETON
        * m.g_electron
        * BOHR_MAGNETON
        * n
        * lattice.sum_b_squared;
    let rate = inner.cbrt();
    Ok(SdEstimate {
        t2: (rate > 0.0).then(|| 1.0 / rate),
        rate,
        decay_exponent: 3,
        isotope_density: n,
        sum_b_squared: lattice.sum_b_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub mechanism: String,
    pub t2_s: Option<f64>,
    pub decay_exponent: u32,
    pub inputs: serde_json::Value,
    pub variant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceBudget {
    pub mechanisms: Vec<Mechanism>,
    pub instantaneous_diffusion: IdEstimate,
    pub spectral_diffusion: SdEstimate,
}

impl DecoherenceBudget {
    /// exp(−t/T_ID)·exp(−(t/T_SD)³).
    pub fn echo_envelope(&self, t: f64) -> f64 {
        let id = self.instantaneous_diffusion.rate * t;
        let sd = self.spectral_diffusion.rate * t;
        (-id - sd.powi(3)).exp()
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<26} {:>14} {:>9}  {}\n", "mechanism", "T2", "exponent", "variant");
        for m in &self.mechanisms {
            let t2 = m.t2_s.map_or("inf".to_string(), |t| format!("{t:.4e} s"));
            let _ = writeln!(out, "{:<26} {:>14} {:>9}  {}", m.mechanism, t2, m.decay_exponent, m.variant.as_deref().unwrap_or("-"));
        }
        out
    }
}

pub fn decoherence_budget(
    m: &MaterialParams,
    theta2: f64,
    direction: FieldDirection,
    variant: IdVariant,
    convention: DispersionConvention,
) -> Result<DecoherenceBudget> {
    let id = t2_instantaneous_diffusion(m, theta2, variant)?;
    let lattice = dipolar_lattice_sum(m, direction, DEFAULT_LATTICE_CUTOFF, LatticeSumMode::Deterministic)?;
    let sd = t2_spectral_diffusion(m, &lattice)?;
    let star = t2_star_theory(m, convention)?;
    let mechanisms = vec![
        Mechanism {
            mechanism: "instantaneous-diffusion".into(),
            t2_s: id.t2,
            decay_exponent: 1,
            inputs: serde_json::json!({ "donor_density_m3": m.donor_density, "theta2_rad": theta2 }),
            variant: Some(kebab(&variant)),
        },
        Mechanism {
            mechanism: "spectral-diffusion".into(),
            t2_s: sd.t2,
            decay_exponent: 3,
            inputs: serde_json::json!({
                "isotope_density_m3": sd.isotope_density,
                "sum_b_squared_rad2_s2": sd.sum_b_squared,
                "cutoff_m": lattice.cutoff_radius,
                "field_direction": direction,
            }),
            variant: None,
        },
        Mechanism {
            mechanism: "inhomogeneous-dephasing".into(),
            t2_s: star.exact,
            decay_exponent: 2,
            inputs: serde_json::json!({ "t2_star_quadrature_s": star.quadrature }),
            variant: Some(kebab(&convention)),
        },
    ];
    Ok(DecoherenceBudget { mechanisms, instantaneous_diffusion: id, spectral_diffusion: sd })
}

/// The serialized name of a unit enum variant.
fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}
