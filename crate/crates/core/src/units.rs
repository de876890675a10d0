//! Physical constants, unit conversion, and material parameter sets.
//!
//! Internal conventions: SI base units throughout, with every energy stored
//! as an angular frequency (rad/s) so that ħ never appears in a Hamiltonian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issues, Result};

/// CODATA 2018 values.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const NUCLEAR_MAGNETON: f64 = 5.050_783_746_1e-27;
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;
pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;
pub const PLANCK: f64 = 6.626_070_15e-34;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub bohr_magneton: f64,
    pub nuclear_magneton: f64,
    pub vacuum_permeability: f64,
    pub reduced_planck: f64,
}

/// The only instance; constants are not user-overridable.
pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    bohr_magneton: BOHR_MAGNETON,
    nuclear_magneton: NUCLEAR_MAGNETON,
    vacuum_permeability: VACUUM_PERMEABILITY,
    reduced_planck: REDUCED_PLANCK,
};

pub fn rad_per_s_to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI) / 1e9
}

pub fn ghz_to_rad_per_s(ghz: f64) -> f64 {
    ghz * 1e9 * 2.0 * PI
}

pub fn rad_per_s_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

pub fn hz_to_rad_per_s(hz: f64) -> f64 {
    hz * 2.0 * PI
}

/// Spin splitting g·μ_B·B/ħ in rad/s.
pub fn zeeman_splitting(g: f64, field: f64) -> Result<f64> {
    if !(field >= 0.0) {
        return Err(Error::invalid("field", format!("must be >= 0 T, got {field}")));
    }
    Ok(g * BOHR_MAGNETON * field / REDUCED_PLANCK)
}

/// |ψ(0)|² of a hydrogenic 1s envelope, 1/(π a³).
pub fn density_at_origin(bohr_radius: f64) -> Result<f64> {
    if !(bohr_radius > 0.0) {
        return Err(Error::invalid(
            "bohr_radius",
            format!("must be > 0 m, got {bohr_radius}"),
        ));
    }
    Ok(1.0 / (PI * bohr_radius.powi(3)))
}

/// Zn site density of an ideal wurtzite cell (two cations per cell).
pub fn wurtzite_site_density(a: f64, c: f64) -> f64 {
    2.0 / (0.5 * 3f64.sqrt() * a * a * c)
}

/// Physical dimension of a configuration value; selects the accepted unit strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Dimensionless,
    Length,
    NumberDensity,
    /// Stored as multiples of μ_N.
    NuclearMoment,
    MagneticField,
    Time,
    /// Stored as rad/s; cyclic units (Hz, GHz, ...) are multiplied by 2π.
    AngularFrequency,
    Rate,
    Energy,
    Angle,
}

impl Dimension {
    fn scale(self, unit: &str) -> Option<f64> {
        use Dimension::*;
        let s = match (self, unit) {
            (Dimensionless, "" | "1") => 1.0,
            (Dimensionless, "%") => 0.01,
            (Length, "m") => 1.0,
            (Length, "cm") => 1e-2,
            (Length, "mm") => 1e-3,
            (Length, "um" | "µm") => 1e-6,
            (Length, "nm") => 1e-9,
            (Length, "angstrom" | "Å" | "A") => 1e-10,
            (Length, "pm") => 1e-12,
            (NumberDensity, "m^-3") => 1.0,
            (NumberDensity, "cm^-3") => 1e6,
            (NumberDensity, "nm^-3") => 1e27,
            (NuclearMoment, "mu_N" | "μ_N") => 1.0,
            (NuclearMoment, "J/T") => 1.0 / NUCLEAR_MAGNETON,
            (MagneticField, "T") => 1.0,
            (MagneticField, "mT") => 1e-3,
            (MagneticField, "G") => 1e-4,
            (Time, "s") => 1.0,
            (Time, "ms") => 1e-3,
            (Time, "us" | "µs") => 1e-6,
            (Time, "ns") => 1e-9,
            (Time, "ps") => 1e-12,
            (Time, "fs") => 1e-15,
            (Time, "s/rad") => 1.0,
            (AngularFrequency, "rad/s") => 1.0,
            (AngularFrequency, "Hz") => 2.0 * PI,
            (AngularFrequency, "kHz") => 2.0 * PI * 1e3,
            (AngularFrequency, "MHz") => 2.0 * PI * 1e6,
            (AngularFrequency, "GHz") => 2.0 * PI * 1e9,
            (AngularFrequency, "THz") => 2.0 * PI * 1e12,
            (Rate, "s^-1" | "1/s") => 1.0,
            (Rate, "ms^-1") => 1e3,
            (Rate, "us^-1") => 1e6,
            (Rate, "ns^-1") => 1e9,
            (Energy, "J") => 1.0,
            (Energy, "nJ") => 1e-9,
            (Energy, "pJ") => 1e-12,
            (Energy, "fJ") => 1e-15,
            (Angle, "rad") => 1.0,
            (Angle, "deg") => PI / 180.0,
            (Angle, "pi") => PI,
            _ => return None,
        };
        Some(s)
    }
}

/// Splits `"1.7 nm"` into `(1.7, "nm")`.
pub fn split_quantity(text: &str) -> Option<(f64, &str)> {
    let text = text.trim();
    let (num, unit) = match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim()),
        None => (text, ""),
    };
    num.parse::<f64>().ok().map(|v| (v, unit))
}

/// Parses a configuration value carrying an explicit unit string into SI.
///
/// Bare numbers are accepted only for dimensionless keys.
pub fn parse_quantity(key: &str, value: &toml::Value, dim: Dimension) -> Result<f64> {
    let v = match value {
        toml::Value::Float(x) if dim == Dimension::Dimensionless => *x,
        toml::Value::Integer(i) if dim == Dimension::Dimensionless => *i as f64,
        toml::Value::Float(_) | toml::Value::Integer(_) => {
            return Err(Error::invalid(key, format!("{dim:?} value needs a unit string")))
        }
        toml::Value::String(s) => {
            let (x, unit) = split_quantity(s)
                .ok_or_else(|| Error::invalid(key, format!("cannot parse quantity {s:?}")))?;
            let scale = dim
                .scale(unit)
                .ok_or_else(|| Error::invalid(key, format!("unknown unit {unit:?} for {dim:?}")))?;
            x * scale
        }
        other => return Err(Error::invalid(key, format!("expected a quantity, got {other}"))),
    };
    if !v.is_finite() {
        return Err(Error::invalid(key, "value is not finite"));
    }
    Ok(v)
}

/// Host and donor constants. Lengths in m, densities in m⁻³, moments in μ_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub name: String,
    pub g_electron: f64,
    pub g_hole: f64,
    pub nuclear_spin_zn: f64,
    pub nuclear_spin_donor: f64,
    pub moment_zn: f64,
    pub moment_donor: f64,
    pub abundance_zn67: f64,
    pub bohr_radius: f64,
    pub bloch_density_ratio: f64,
    pub lattice_a: f64,
    pub lattice_c: f64,
    pub zn_site_density: f64,
    pub donor_density: f64,
}

pub const DEFAULT_LATTICE_A: f64 = 3.25e-10;
pub const DEFAULT_LATTICE_C: f64 = 5.21e-10;

const REQUIRED_KEYS: [(&str, Dimension); 10] = [
    ("g_electron", Dimension::Dimensionless),
    ("g_hole", Dimension::Dimensionless),
    ("nuclear_spin_zn", Dimension::Dimensionless),
    ("nuclear_spin_donor", Dimension::Dimensionless),
    ("moment_zn", Dimension::NuclearMoment),
    ("moment_donor", Dimension::NuclearMoment),
    ("abundance_zn67", Dimension::Dimensionless),
    ("bohr_radius", Dimension::Length),
    ("bloch_density_ratio", Dimension::Dimensionless),
    ("donor_density", Dimension::NumberDensity),
];

const BUNDLED: &[(&str, &str)] = &[(
    "zno-natural",
    include_str!("../../../materials/zno-natural.toml"),
)];

/// Names of the profiles compiled into the library.
pub fn bundled_materials() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

/// The TOML document of a bundled profile.
pub fn bundled_document(name: &str) -> Result<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text).ok_or_else(|| {
        let known: Vec<_> = bundled_materials().collect();
        Error::invalid("material", format!("no bundled profile {name:?} (known: {known:?})"))
    })
}

impl MaterialParams {
    /// Natural-abundance Ga:ZnO.
    pub fn zno_natural() -> Self {
        Self::bundled("zno-natural").expect("bundled profile is valid")
    }

    pub fn bundled(name: &str) -> Result<Self> {
        load_material(bundled_document(name)?)
    }

    /// Range checks; collects every violation.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::new();
        if !(0.0..=1.0).contains(&self.abundance_zn67) {
            issues.push("abundance_zn67", format!("must be in [0, 1], got {}", self.abundance_zn67));
        }
        if !(self.bohr_radius > 0.0) {
            issues.push("bohr_radius", "must be > 0");
        }
        for (key, v) in [
            ("donor_density", self.donor_density),
            ("zn_site_density", self.zn_site_density),
        ] {
            if !(v >= 0.0) {
                issues.push(key, "must be >= 0");
            }
        }
        for (key, v) in [("lattice_a", self.lattice_a), ("lattice_c", self.lattice_c)] {
            if !(v > 0.0) {
                issues.push(key, "must be > 0");
            }
        }
        for (key, v) in [
            ("nuclear_spin_zn", self.nuclear_spin_zn),
            ("nuclear_spin_donor", self.nuclear_spin_donor),
        ] {
            if !(v > 0.0) || (2.0 * v).fract() != 0.0 {
                issues.push(key, format!("must be a positive half-integer, got {v}"));
            }
        }
        if !(self.bloch_density_ratio >= 0.0) {
            issues.push("bloch_density_ratio", "must be >= 0");
        }
        issues.finish()
    }

    /// ⁶⁷Zn number density f·n_Zn.
    pub fn zn67_density(&self) -> f64 {
        self.abundance_zn67 * self.zn_site_density
    }
}

/// Parses and validates a material profile document.
///
/// Every required key must be present; all problems are reported together.
pub fn load_material(document: &str) -> Result<MaterialParams> {
    let table: toml::Table = document
        .parse()
        .map_err(|e: toml::de::Error| Error::invalid("document", e.to_string()))?;
    material_from_table(&table)
}

pub fn material_from_table(table: &toml::Table) -> Result<MaterialParams> {
    let mut issues = Issues::new();
    let mut values = [0.0; REQUIRED_KEYS.len()];
    for (slot, (key, dim)) in values.iter_mut().zip(REQUIRED_KEYS) {
        match table.get(key) {
            None => issues.push(key, "missing required key"),
            Some(v) => match parse_quantity(key, v, dim) {
                Ok(x) => *slot = x,
                Err(e) => {
                    issues.extend_from(e);
                }
            },
        }
    }
    let mut optional = |key: &str, dim: Dimension| -> Option<f64> {
        let v = table.get(key)?;
        match parse_quantity(key, v, dim) {
            Ok(x) => Some(x),
            Err(e) => {
                issues.extend_from(e);
                None
            }
        }
    };
    let lattice_a = optional("lattice_a", Dimension::Length).unwrap_or(DEFAULT_LATTICE_A);
    let lattice_c = optional("lattice_c", Dimension::Length).unwrap_or(DEFAULT_LATTICE_C);
    let zn_site_density = optional("zn_site_density", Dimension::NumberDensity)
        .unwrap_or_else(|| wurtzite_site_density(lattice_a, lattice_c));
    let name = table
        .get("name")
        .and_then(|v| v.as_str())
        .unwrap_or("unnamed")
        .to_string();
    issues.finish()?;

    let [g_electron, g_hole, nuclear_spin_zn, nuclear_spin_donor, moment_zn, moment_donor, abundance_zn67, bohr_radius, bloch_density_ratio, donor_density] =
        values;
    let params = MaterialParams {
        name,
        g_electron,
        g_hole,
        nuclear_spin_zn,
        nuclear_spin_donor,
        moment_zn,
        moment_donor,
        abundance_zn67,
        bohr_radius,
        bloch_density_ratio,
        lattice_a,
        lattice_c,
        zn_site_density,
        donor_density,
    };
    params.validate()?;
    Ok(params)
}

/// Static field magnitude and direction in the crystal frame (z = c-axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub magnitude: f64,
    pub orientation: [f64; 3],
}

impl FieldConfig {
    pub fn new(magnitude: f64, orientation: [f64; 3]) -> Result<Self> {
        if !(magnitude >= 0.0) {
            return Err(Error::invalid("field.magnitude", "must be >= 0 T"));
        }
        let norm = orientation.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("field.orientation", "must be a non-zero finite vector"));
        }
        Ok(Self {
            magnitude,
            orientation: orientation.map(|x| x / norm),
        })
    }

    /// Field perpendicular to the c-axis.
    pub fn voigt(magnitude: f64) -> Result<Self> {
        Self::new(magnitude, [1.0, 0.0, 0.0])
    }
}
