//! Run configuration: one TOML document with unit-carrying values, `--set`
//! overrides, and resolution into the library's setup types.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use donorspin::bath::{BathModel, DispersionConvention, ZnSumMode};
use donorspin::error::{Error, Issues, Result};
use donorspin::estimators::{FieldDirection, IdVariant};
use donorspin::fit::LmOptions;
use donorspin::hamiltonian::{effective_rabi, LevelScheme, PulseSpec, Shape, BALANCED_COUPLING};
use donorspin::lindblad::{t1_rate_model, DissipatorSet, IntegratorConfig};
use donorspin::sequences::{experiments, CwSpec, Params, Propagation, Setup};
use donorspin::units::{bundled_document, material_from_table, Dimension, FieldConfig, MaterialParams};
use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

const SECTIONS: &[&str] = &[
    "seed", "material", "field", "pulse", "dissipators", "pump", "readout", "sequence", "integrator", "bath", "experiment", "fit",
    "estimate", "output",
];

const MATERIAL_KEYS: &[&str] = &[
    "name",
    "g_electron",
    "g_hole",
    "nuclear_spin_zn",
    "nuclear_spin_donor",
    "moment_zn",
    "moment_donor",
    "abundance_zn67",
    "bohr_radius",
    "bloch_density_ratio",
    "donor_density",
    "lattice_a",
    "lattice_c",
    "zn_site_density",
];

/// Curve-model shorthands accepted by `fit.model` and `--compare`.
pub fn model_alias(name: &str) -> &str {
    match name {
        "exp" => "exp_decay",
        "cubed_exp" => "cubed_exp_decay",
        "gaussian" => "gaussian_decay",
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct FitSection {
    pub model: String,
    pub compare: Vec<String>,
    pub y_column: Option<String>,
    pub fringe_delay: f64,
    pub fringe_points: usize,
    pub dataset_weights: [f64; 2],
    pub lm: LmOptions,
}

#[derive(Debug, Clone)]
pub struct EstimateSection {
    pub theta2: f64,
    pub variant: IdVariant,
    pub direction: FieldDirection,
    pub convention: DispersionConvention,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// The document after overrides, with the seed filled in.
    pub document: toml::Table,
    pub seed: u64,
    pub hash: String,
    pub material: MaterialParams,
    pub setup: Setup,
    /// Experiment name and its parameter table (without `name`).
    pub experiment: Option<(String, toml::Table)>,
    pub fit: FitSection,
    pub estimate: EstimateSection,
    pub output_dir: PathBuf,
}

pub fn read_document(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    text.parse::<toml::Table>().map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
        message: e.message().to_string(),
    })
}

/// Applies `a.b.c=value`. The value is read as a TOML value when it parses as
/// one and as a plain string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid("--set", format!("expected key=value, got {assignment:?}")))?;
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if key.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::invalid("--set", format!("malformed key {key:?}")));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut table = doc;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::invalid("--set", format!("{} is not a table", parts[..=i].join("."))))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn lookup<'a>(doc: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
    let mut parts = key.split('.');
    let mut v = doc.get(parts.next()?)?;
    for p in parts {
        v = v.as_table()?.get(p)?;
    }
    Some(v)
}

/// First 12 hex digits of the SHA-256 of the canonical document.
pub fn config_hash(doc: &toml::Table) -> String {
    let text = toml::to_string(doc).unwrap_or_default();
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn section<'a>(doc: &'a toml::Table, name: &str, issues: &mut Issues) -> toml::Table {
    match doc.get(name) {
        None => toml::Table::new(),
        Some(toml::Value::Table(t)) => t.clone(),
        Some(other) => {
            issues.push(name, format!("expected a table, got {other}"));
            toml::Table::new()
        }
    }
}

/// Reads a kebab-case enum by its serialized name.
fn choice<T: DeserializeOwned>(p: &mut Params, key: &str, default: &str, options: &str) -> Option<T> {
    let s = p.string(key, default);
    match serde_json::from_value(serde_json::Value::String(s.clone())) {
        Ok(v) => Some(v),
        Err(_) => {
            p.issue(key, format!("unknown value {s:?}; valid options: {options}"));
            None
        }
    }
}

fn numbers(p: &mut Params, key: &str, len: usize) -> Option<Vec<f64>> {
    let v = p.raw(key)?;
    let items: Option<Vec<f64>> = v.as_array().and_then(|a| {
        (a.len() == len).then(|| a.iter().map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64))).collect()).flatten()
    });
    if items.is_none() {
        p.issue(key, format!("expected {len} numbers, got {v}"));
    }
    items
}

fn strings(p: &mut Params, key: &str) -> Vec<String> {
    match p.raw(key) {
        None => Vec::new(),
        Some(toml::Value::String(s)) => s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect(),
        Some(toml::Value::Array(a)) if a.iter().all(toml::Value::is_str) => {
            a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect()
        }
        Some(other) => {
            p.issue(key, format!("expected a list of names, got {other}"));
            Vec::new()
        }
    }
}

fn material(t: &toml::Table, base: &Path, issues: &mut Issues) -> Option<MaterialParams> {
    let profile = t.get("profile").map(|v| v.as_str().map(str::to_string));
    let path = t.get("path").map(|v| v.as_str().map(str::to_string));
    let mut doc = match (profile, path) {
        (Some(_), Some(_)) => {
            issues.push("material", "give either profile or path, not both");
            return None;
        }
        (_, Some(None)) | (Some(None), _) => {
            issues.push("material", "profile and path must be strings");
            return None;
        }
        (None, Some(Some(p))) => {
            let full = base.join(&p);
            match read_document(&full) {
                Ok(d) => d,
                Err(e) => {
                    issues.push("material.path", e.to_string());
                    return None;
                }
            }
        }
        (Some(Some(name)), None) => match bundled_document(&name).and_then(|d| {
            d.parse::<toml::Table>().map_err(|e| Error::invalid("material.profile", e.to_string()))
        }) {
            Ok(d) => d,
            Err(e) => {
                issues.push("material.profile", e.to_string());
                return None;
            }
        },
        (None, None) => bundled_document("zno-natural").ok()?.parse().ok()?,
    };
    let mut ok = true;
    for (k, v) in t.iter().filter(|(k, _)| *k != "profile" && *k != "path") {
        if MATERIAL_KEYS.contains(&k.as_str()) {
            doc.insert(k.clone(), v.clone());
        } else {
            issues.push(format!("material.{k}"), format!("unknown key; valid keys: profile, path, {}", MATERIAL_KEYS.join(", ")));
            ok = false;
        }
    }
    match material_from_table(&doc) {
        Ok(m) if ok => Some(m),
        Ok(_) => None,
        Err(e) => {
            for i in e.issues() {
                issues.push(format!("material.{}", i.key), i.message.clone());
            }
            None
        }
    }
}

pub const DEFAULT_PI_ENERGY: f64 = 36e-12;
pub const DEFAULT_SAMPLES: usize = 200;

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut doc = match path {
            Some(p) => read_document(p)?,
            None => toml::Table::new(),
        };
        let mut issues = Issues::new();
        for o in overrides {
            if let Err(e) = apply_override(&mut doc, o) {
                if let Some(other) = issues.extend_from(e) {
                    return Err(other);
                }
            }
        }
        issues.finish()?;
        let base = path.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
        Self::resolve(doc, seed, &base)
    }

    /// Validates every section, reporting all problems together.
    pub fn resolve(mut doc: toml::Table, seed: Option<u64>, base: &Path) -> Result<Self> {
        let mut issues = Issues::new();
        for k in doc.keys() {
            if !SECTIONS.contains(&k.as_str()) {
                issues.push(k.clone(), format!("unknown section; valid: {}", SECTIONS.join(", ")));
            }
        }
        let seed = match (seed, doc.get("seed")) {
            (Some(s), _) => s,
            (None, None) => 0,
            (None, Some(toml::Value::Integer(i))) if *i >= 0 => *i as u64,
            (None, Some(other)) => {
                issues.push("seed", format!("expected a non-negative integer, got {other}"));
                0
            }
        };
        doc.insert("seed".into(), toml::Value::Integer(seed as i64));

        let material = material(&section(&doc, "material", &mut issues), base, &mut issues);

        let t = section(&doc, "field", &mut issues);
        let mut p = Params::new("field", &t);
        let magnitude = p.quantity("magnitude", Dimension::MagneticField, 5.0);
        let direction = numbers(&mut p, "direction", 3).map_or([1.0, 0.0, 0.0], |v| [v[0], v[1], v[2]]);
        issues.extend(p.into_issues());
        let field = FieldConfig::new(magnitude, direction).map_err(|e| issues.extend_from(e)).ok();

        let t = section(&doc, "pulse", &mut issues);
        let mut p = Params::new("pulse", &t);
        let shape_name = p.string("shape", "gaussian");
        let shape = Shape::named(&shape_name).map_err(|e| p.issue("shape", e.to_string())).ok();
        let fwhm = p.quantity("fwhm", Dimension::Time, 1.9e-12);
        let detuning = p.quantity("detuning", Dimension::AngularFrequency, 2.0 * PI * 3570e9);
        let calibration = p.optional("calibration", Dimension::Dimensionless);
        let pi_energy = p.optional("pi_energy", Dimension::Energy);
        if calibration.is_some() && pi_energy.is_some() {
            p.issue("calibration", "give either calibration or pi_energy, not both");
        }
        if pi_energy.is_some_and(|e| !(e > 0.0)) {
            p.issue("pi_energy", "must be positive");
        }
        let angle_spread = p.quantity("angle_spread", Dimension::Dimensionless, 0.0);
        let angle_spread_nodes = p.count("angle_spread_nodes", 9);
        issues.extend(p.into_issues());

        let t = section(&doc, "dissipators", &mut issues);
        let mut p = Params::new("dissipators", &t);
        let lifetime = p.quantity("radiative_lifetime", Dimension::Time, 1e-9);
        let branching = [numbers(&mut p, "branching_down", 2), numbers(&mut p, "branching_up", 2)]
            .map(|r| r.map_or([0.5, 0.5], |v| [v[0], v[1]]));
        let t1 = p.optional("t1", Dimension::Time);
        let t1_ref = p.quantity("t1_reference", Dimension::Time, 0.1);
        let t1_ref_field = p.quantity("t1_reference_field", Dimension::MagneticField, 2.25);
        let t1_exponent = p.quantity("t1_exponent", Dimension::Dimensionless, 3.5);
        let dephasing = p.optional("ground_dephasing_time", Dimension::Time);
        let beta1 = p.quantity("beta1", Dimension::Dimensionless, 0.0);
        let beta2 = p.quantity("beta2", Dimension::Time, 0.0);
        if !(lifetime > 0.0) {
            p.issue("radiative_lifetime", "must be positive");
        }
        if t1.is_some_and(|t| !(t > 0.0)) {
            p.issue("t1", "must be positive");
        }
        if dephasing.is_some_and(|t| !(t > 0.0)) {
            p.issue("ground_dephasing_time", "must be positive");
        }
        let t1_rate = match t1 {
            Some(t) => Some(1.0 / t),
            None => t1_rate_model(magnitude, t1_ref, t1_ref_field, t1_exponent).map_err(|e| {
                for i in e.issues() {
                    p.issue(&i.key, i.message.clone());
                }
            }).ok(),
        };
        issues.extend(p.into_issues());
        let dissipators = DissipatorSet {
            radiative_rate: 1.0 / lifetime,
            branching,
            t1_rate: t1_rate.unwrap_or(0.0),
            ground_dephasing_rate: dephasing.map_or(0.0, |t| 1.0 / t),
            beta1,
            beta2,
        };

        let cw = |name: &str, issues: &mut Issues| {
            let t = section(&doc, name, issues);
            let mut p = Params::new(name, &t);
            let spec = CwSpec {
                duration: p.quantity("duration", Dimension::Time, donorspin::sequences::DEFAULT_PUMP_DURATION),
                rabi: p.quantity("rabi", Dimension::AngularFrequency, donorspin::sequences::DEFAULT_PUMP_RABI),
            };
            let photons = if name == "readout" { p.flag("photons", false) } else { false };
            issues.extend(p.into_issues());
            (spec, photons)
        };
        let (pump, _) = cw("pump", &mut issues);
        let (readout, photon_readout) = cw("readout", &mut issues);

        let t = section(&doc, "sequence", &mut issues);
        let mut p = Params::new("sequence", &t);
        let lead = p.quantity("lead", Dimension::Time, 1e-9);
        let readout_delay = p.quantity("readout_delay", Dimension::Time, 20e-9);
        let propagation: Option<Propagation> = choice(&mut p, "propagation", "kick", "kick, exact");
        issues.extend(p.into_issues());

        let t = section(&doc, "integrator", &mut issues);
        let mut p = Params::new("integrator", &t);
        let d = IntegratorConfig::default();
        let integrator = IntegratorConfig {
            method: p.string("method", &d.method),
            rel_tol: p.quantity("rel_tol", Dimension::Dimensionless, d.rel_tol),
            abs_tol: p.quantity("abs_tol", Dimension::Dimensionless, d.abs_tol),
            max_step: p.quantity("max_step", Dimension::Time, d.max_step),
            min_step: p.quantity("min_step", Dimension::Time, d.min_step),
            pulse_resolution: p.quantity("pulse_resolution", Dimension::Dimensionless, d.pulse_resolution),
        };
        issues.extend(p.into_issues());

        let t = section(&doc, "bath", &mut issues);
        let mut p = Params::new("bath", &t);
        let model = p.string("model", "none");
        let t2_star = p.optional("t2_star", Dimension::Time);
        let convention: Option<DispersionConvention> = choice(&mut p, "convention", "half-width", "half-width, rms");
        let zn_sum = p.string("zn_sum", "continuum");
        let cutoff = p.optional("cutoff", Dimension::Length);
        let samples = p.count("samples", DEFAULT_SAMPLES);
        let echo_t2 = p.optional("echo_t2", Dimension::Time);
        if !["continuum", "lattice"].contains(&zn_sum.as_str()) {
            p.issue("zn_sum", format!("unknown value {zn_sum:?}; valid options: continuum, lattice"));
        }
        if model == "gaussian" && t2_star.is_none() {
            p.issue("t2_star", "required for the gaussian bath model");
        }
        if model != "gaussian" && t2_star.is_some() {
            p.issue("t2_star", "only used by the gaussian bath model");
        }
        if !["none", "material", "gaussian"].contains(&model.as_str()) {
            p.issue("model", format!("unknown value {model:?}; valid options: none, material, gaussian"));
        }
        let diffusion = match echo_t2 {
            Some(t) => Setup::diffusion_for_echo_time(t).map_err(|e| p.issue("echo_t2", e.to_string())).ok(),
            None => Some(0.0),
        };
        issues.extend(p.into_issues());
        let bath = match (model.as_str(), &material) {
            ("gaussian", Some(m)) => t2_star.and_then(|t| BathModel::gaussian_for_t2_star(t, m.g_electron).map_err(|e| issues.extend_from(e)).ok()),
            ("material", Some(m)) => {
                let mode = match (zn_sum.as_str(), cutoff) {
                    ("lattice", Some(c)) => ZnSumMode::LatticeSum { cutoff: c },
                    ("lattice", None) => ZnSumMode::lattice_default(m),
                    _ => ZnSumMode::Continuum,
                };
                convention.and_then(|c| BathModel::new(m, mode, c).map_err(|e| issues.extend_from(e)).ok())
            }
            _ => None,
        };

        let mut experiment = None;
        if let Some(v) = doc.get("experiment") {
            match v.as_table() {
                None => issues.push("experiment", format!("expected a table, got {v}")),
                Some(t) => {
                    let mut params = t.clone();
                    match params.remove("name") {
                        None => issues.push("experiment.name", "missing"),
                        Some(toml::Value::String(n)) => match experiments().get(&n) {
                            Ok(_) => experiment = Some((n, params)),
                            Err(e) => issues.push("experiment.name", e.to_string()),
                        },
                        Some(other) => issues.push("experiment.name", format!("expected a string, got {other}")),
                    }
                }
            }
        }

        let t = section(&doc, "fit", &mut issues);
        let mut p = Params::new("fit", &t);
        let lm_default = LmOptions::default();
        let fit = FitSection {
            model: model_alias(&p.string("model", "exp_decay")).to_string(),
            compare: strings(&mut p, "compare").iter().map(|m| model_alias(m).to_string()).collect(),
            y_column: p.raw("y_column").and_then(|v| v.as_str().map(str::to_string)),
            fringe_delay: p.quantity("fringe_delay", Dimension::Time, 0.8e-9),
            fringe_points: p.count("fringe_points", 12),
            dataset_weights: numbers(&mut p, "dataset_weights", 2).map_or([1.0, 1.0], |v| [v[0], v[1]]),
            lm: LmOptions { max_iterations: p.count("max_iterations", lm_default.max_iterations), ..lm_default },
        };
        issues.extend(p.into_issues());

        let t = section(&doc, "estimate", &mut issues);
        let mut p = Params::new("estimate", &t);
        let theta2 = p.quantity("theta2", Dimension::Angle, PI / 2.0);
        let variant: Option<IdVariant> = choice(&mut p, "variant", "paper-consistent", "paper-consistent, as-printed");
        let direction = match p.raw("direction") {
            None => FieldDirection::voigt(),
            Some(toml::Value::String(s)) if s == "voigt" => FieldDirection::voigt(),
            Some(toml::Value::String(s)) if s == "faraday" => FieldDirection::Vector { direction: [0.0, 0.0, 1.0] },
            Some(toml::Value::String(s)) if s == "powder" => FieldDirection::PowderAverage,
            Some(_) => match numbers(&mut p, "direction", 3) {
                Some(v) => FieldDirection::Vector { direction: [v[0], v[1], v[2]] },
                None => FieldDirection::voigt(),
            },
        };
        let est_convention: Option<DispersionConvention> = choice(&mut p, "convention", "half-width", "half-width, rms");
        issues.extend(p.into_issues());

        let t = section(&doc, "output", &mut issues);
        let mut p = Params::new("output", &t);
        let output_dir = PathBuf::from(p.string("dir", "runs"));
        issues.extend(p.into_issues());

        // the setup needs every physical section to be valid
        let setup = match (&material, field, shape) {
            (Some(m), Some(f), Some(shape)) if issues.is_empty() => {
                let built = LevelScheme::from_material(m, &f, detuning).and_then(|levels| {
                    let pulse = PulseSpec {
                        shape,
                        duration: fwhm,
                        energy: 0.0,
                        arrival_time: 0.0,
                        detuning,
                        coupling_weights: BALANCED_COUPLING,
                    };
                    pulse.validate()?;
                    let k = match calibration {
                        Some(k) => k,
                        None => PI / (pi_energy.unwrap_or(DEFAULT_PI_ENERGY) * effective_rabi(1.0, detuning, levels.omega_h)?),
                    };
                    let mut s = Setup::new(levels, dissipators, pulse, k)?;
                    s.integrator = integrator;
                    s.pump = pump;
                    s.readout = readout;
                    s.lead = lead;
                    s.readout_delay = readout_delay;
                    s.photon_readout = photon_readout;
                    s.bath = bath;
                    s.bath_samples = samples;
                    s.seed = seed;
                    s.diffusion = diffusion.unwrap_or(0.0);
                    s.angle_spread = angle_spread;
                    s.angle_spread_nodes = angle_spread_nodes;
                    s.propagation = propagation.unwrap_or_default();
                    s.validate()?;
                    Ok(s)
                });
                match built {
                    Ok(s) => Some(s),
                    Err(e) => {
                        if let Some(other) = issues.extend_from(e) {
                            return Err(other);
                        }
                        None
                    }
                }
            }
            _ => None,
        };
        issues.finish()?;
        let (Some(material), Some(setup), Some(variant), Some(est_convention)) = (material, setup, variant, est_convention) else {
            return Err(Error::invalid("config", "incomplete configuration"));
        };
        let hash = config_hash(&doc);
        Ok(Self {
            document: doc,
            seed,
            hash,
            material,
            setup,
            experiment,
            fit,
            estimate: EstimateSection { theta2, variant, direction, convention: est_convention },
            output_dir,
        })
    }
}
