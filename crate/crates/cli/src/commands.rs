use std::path::{Path, PathBuf};

use donorspin::bath::{BathModel, ZnSumMode};
use donorspin::error::{Error, Result};
use donorspin::estimators::decoherence_budget;
use donorspin::fit::{fit_named, simultaneous_fit_rabi_fringe, FitOptions, SimultaneousSpec};
use donorspin::io::{ingest_trace, Table, Trace};
use donorspin::sequences::{experiments, ExperimentOutput};
use donorspin::units::{parse_quantity, Dimension};
use log::info;
use serde_json::{json, Value};

use crate::config::{apply_override, config_hash, lookup, read_document, RunConfig};
use crate::rundir::{write_document, write_table, write_text, RunDir};

fn output_root(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone())
}

fn meta(cfg: &RunConfig, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("created_utc".into(), json!(chrono::Utc::now().to_rfc3339()));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("config_hash".into(), json!(cfg.hash));
    m.insert("config".into(), serde_json::to_value(&cfg.document).unwrap_or(Value::Null));
    m
}

fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let body = toml::to_string(&cfg.document).map_err(|e| Error::invalid("config", e.to_string()))?;
    write_text(dir, "config.toml", &format!("# resolved configuration (hash {}); rerun with --config on this file\n{body}", cfg.hash))
}

fn run_experiment(cfg: &RunConfig) -> Result<(String, ExperimentOutput)> {
    let (name, params) = cfg.experiment.as_ref().ok_or_else(|| {
        Error::invalid("experiment.name", format!("missing; valid options: {}", experiments().names().collect::<Vec<_>>().join(", ")))
    })?;
    info!("running {name} with {} bath samples", cfg.setup.bath_samples);
    let out = experiments().get(name)?.run(&cfg.setup, params)?;
    Ok((name.clone(), out))
}

fn write_experiment(dir: &Path, cfg: &RunConfig, name: &str, out: &ExperimentOutput, command: &str) -> Result<()> {
    for t in &out.tables {
        write_table(dir, &t.name, &t.table)?;
    }
    let mut m = meta(cfg, command);
    m.insert("experiment".into(), json!(name));
    m.insert("setup".into(), serde_json::to_value(&cfg.setup).unwrap_or(Value::Null));
    m.insert("material".into(), serde_json::to_value(&cfg.material).unwrap_or(Value::Null));
    m.insert("summary".into(), out.summary.clone());
    m.insert("tables".into(), json!(out.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>()));
    write_document(dir, &format!("{name}_meta.json"), &m)?;
    write_config(dir, cfg)
}

pub fn simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let (name, result) = run_experiment(cfg)?;
    let run = RunDir::create(&output_root(cfg, out), &cfg.hash)?;
    write_experiment(run.path(), cfg, &name, &result, "simulate")?;
    run.commit()
}

pub fn estimate(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let e = &cfg.estimate;
    let m = &cfg.material;
    let budget = decoherence_budget(m, e.theta2, e.direction, e.variant, e.convention)?;
    let continuum = BathModel::new(m, ZnSumMode::Continuum, e.convention)?.t2_star();
    let lattice = BathModel::new(m, ZnSumMode::lattice_default(m), e.convention)?.t2_star();
    let report = json!({
        "material": m.name,
        "theta2_rad": e.theta2,
        "budget": budget,
        "t2_star_theory": {
            "convention": e.convention,
            "continuum_s": continuum.exact,
            "lattice_s": lattice.exact,
            "continuum_quadrature_s": continuum.quadrature,
            "lattice_quadrature_s": lattice.quadrature,
        },
    });
    let mut text = budget.table();
    text.push_str(&format!(
        "\nT2* theory ({:?}): continuum {:.4e} s, lattice sum {:.4e} s\n",
        e.convention,
        continuum.exact.unwrap_or(f64::INFINITY),
        lattice.exact.unwrap_or(f64::INFINITY)
    ));
    let run = RunDir::create(&output_root(cfg, out), &cfg.hash)?;
    write_document(run.path(), "decoherence_budget.json", &report)?;
    write_text(run.path(), "decoherence_budget.txt", &text)?;
    let mut meta = meta(cfg, "estimate");
    meta.insert("material".into(), serde_json::to_value(m).unwrap_or(Value::Null));
    meta.insert("summary".into(), report);
    write_document(run.path(), "estimate_meta.json", &meta)?;
    write_config(run.path(), cfg)?;
    run.commit()
}

fn curve_table(t: &Trace, model: &[f64]) -> Result<Table> {
    let resid: Vec<f64> = model.iter().zip(&t.y).map(|(m, y)| y - m).collect();
    Ok(Table::from_columns(
        &[t.x_name.as_str(), t.y_name.as_str(), "model", "residual"],
        vec![t.x.clone(), t.y.clone(), model.to_vec(), resid],
    )?)
}

pub fn fit(cfg: &RunConfig, files: &[PathBuf], out: Option<&Path>) -> Result<PathBuf> {
    let f = &cfg.fit;
    let (report, tables) = if f.model == "rabi_fringe" {
        let [rabi_path, fringe_path] = files else {
            return Err(Error::invalid("data", format!("rabi_fringe takes two files (Rabi trace, fringe amplitudes), got {}", files.len())));
        };
        let rabi = ingest_trace(rabi_path, f.y_column.as_deref())?;
        let fringe = ingest_trace(fringe_path, None)?;
        let spec = SimultaneousSpec {
            fringe_delay: f.fringe_delay,
            fringe_points: f.fringe_points,
            dataset_weights: f.dataset_weights,
            lm: f.lm,
            ..SimultaneousSpec::new(cfg.setup.clone())
        };
        info!("simultaneous fit of {} Rabi and {} fringe points", rabi.x.len(), fringe.x.len());
        let r = simultaneous_fit_rabi_fringe(&rabi, &fringe, &spec)?;
        let report = json!({
            "data": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "fit": r.fit,
            "dataset_weights": f.dataset_weights,
        });
        let tables = vec![
            ("rabi_fringe_rabi_curve".to_string(), curve_table(&rabi, &r.rabi_model)?),
            ("rabi_fringe_fringe_curve".to_string(), curve_table(&fringe, &r.fringe_model)?),
            ("rabi_fringe_gamma".to_string(), r.gamma.clone()),
        ];
        (report, tables)
    } else {
        let [path] = files else {
            return Err(Error::invalid("data", format!("{} takes one data file, got {}", f.model, files.len())));
        };
        let t = ingest_trace(path, f.y_column.as_deref())?;
        let opts = FitOptions { compare: f.compare.clone(), lm: f.lm, ..Default::default() };
        let r = fit_named(&f.model, &t.x, &t.y, t.weights().as_deref(), &opts)?;
        let model = donorspin::fit::curve_models().get(&f.model)?;
        let values = r.values();
        let curve: Vec<f64> = t.x.iter().map(|x| model.eval(*x, &values)).collect();
        let report = json!({
            "data": path.display().to_string(),
            "x_column": t.x_name,
            "y_column": t.y_name,
            "weighted": t.weights().is_some(),
            "fit": r,
        });
        (report, vec![(format!("{}_curve", f.model), curve_table(&t, &curve)?)])
    };
    let run = RunDir::create(&output_root(cfg, out), &cfg.hash)?;
    let name = if f.model == "rabi_fringe" { "rabi_fringe".to_string() } else { f.model.clone() };
    write_document(run.path(), &format!("{name}_report.json"), &report)?;
    for (n, t) in &tables {
        write_table(run.path(), n, t)?;
    }
    let mut meta = meta(cfg, "fit");
    meta.insert("summary".into(), report);
    write_document(run.path(), "fit_meta.json", &meta)?;
    write_config(run.path(), cfg)?;
    run.commit()
}

const AXIS_DIMENSIONS: [(Dimension, &str); 10] = [
    (Dimension::Dimensionless, ""),
    (Dimension::MagneticField, "_T"),
    (Dimension::Time, "_s"),
    (Dimension::Energy, "_J"),
    (Dimension::AngularFrequency, "_rad_per_s"),
    (Dimension::Rate, "_per_s"),
    (Dimension::Length, "_m"),
    (Dimension::NumberDensity, "_per_m3"),
    (Dimension::Angle, "_rad"),
    (Dimension::NuclearMoment, "_mu_N"),
];

/// SI value and header suffix of a quantity, if it is one.
fn classify(key: &str, v: &toml::Value) -> Option<(f64, &'static str)> {
    AXIS_DIMENSIONS.iter().find_map(|(d, suffix)| parse_quantity(key, v, *d).ok().map(|x| (x, *suffix)))
}

/// Sweep values as config values: bare numbers inherit the unit of the
/// configured value at `axis`.
fn sweep_values(doc: &toml::Table, axis: &str, values: &[String]) -> Result<Vec<toml::Value>> {
    let unit = match lookup(doc, axis) {
        None | Some(toml::Value::Integer(_)) | Some(toml::Value::Float(_)) => None,
        Some(v @ toml::Value::String(s)) => {
            if classify(axis, v).is_none() {
                return Err(Error::invalid("--axis", format!("{axis} = {s:?} is not a numeric key")));
            }
            donorspin::units::split_quantity(s).map(|(_, u)| u.to_string()).filter(|u| !u.is_empty())
        }
        Some(other) => return Err(Error::invalid("--axis", format!("{axis} = {other} is not a numeric key"))),
    };
    let mut issues = donorspin::error::Issues::new();
    let mut out = Vec::new();
    for (i, raw) in values.iter().enumerate() {
        let raw = raw.trim();
        let v = match (raw.parse::<f64>(), &unit) {
            (Ok(_), Some(u)) => toml::Value::String(format!("{raw} {u}")),
            (Ok(x), None) => toml::Value::Float(x),
            (Err(_), _) => toml::Value::String(raw.to_string()),
        };
        if classify(axis, &v).is_none() {
            issues.push(format!("--values[{i}]"), format!("{raw:?} is not a number or quantity"));
        }
        out.push(v);
    }
    if values.is_empty() {
        issues.push("--values", "need at least one value");
    }
    issues.finish()?;
    Ok(out)
}

fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx)
}

pub struct SweepArgs<'a> {
    pub config: Option<&'a Path>,
    pub overrides: &'a [String],
    pub seed: Option<u64>,
    pub axis: &'a str,
    pub values: &'a [String],
    pub out: Option<&'a Path>,
}

pub fn sweep(a: &SweepArgs) -> Result<PathBuf> {
    let mut doc = match a.config {
        Some(p) => read_document(p)?,
        None => toml::Table::new(),
    };
    for o in a.overrides {
        apply_override(&mut doc, o)?;
    }
    let base = a.config.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
    let base_cfg = RunConfig::resolve(doc.clone(), a.seed, &base)?;
    let values = sweep_values(&doc, a.axis, a.values)?;

    let mut points = Vec::new();
    for v in &values {
        let mut d = doc.clone();
        apply_override(&mut d, &format!("{}={v}", a.axis))?;
        let cfg = RunConfig::resolve(d, a.seed, &base)?;
        let x = classify(a.axis, v).map(|c| c.0).unwrap_or(f64::NAN);
        points.push((x, cfg));
    }
    if base_cfg.experiment.is_none() {
        return Err(Error::invalid("experiment.name", format!("missing; valid options: {}", experiments().names().collect::<Vec<_>>().join(", "))));
    }

    let mut hashed = base_cfg.document.clone();
    let mut spec = toml::Table::new();
    spec.insert("axis".into(), toml::Value::String(a.axis.into()));
    spec.insert("values".into(), toml::Value::Array(values.clone()));
    hashed.insert("sweep".into(), toml::Value::Table(spec));
    let run = RunDir::create(&output_root(&base_cfg, a.out), &config_hash(&hashed))?;
    let suffix = classify(a.axis, &values[0]).map_or("", |c| c.1);
    let axis_col = format!("{}{suffix}", a.axis.replace('.', "_"));
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<(f64, serde_json::Map<String, Value>)> = Vec::new();
    let mut listing = Vec::new();
    for (i, (x, cfg)) in points.iter().enumerate() {
        info!("sweep point {}/{}: {} = {}", i + 1, points.len(), a.axis, values[i]);
        let (name, result) = run_experiment(cfg)?;
        let sub = format!("point_{i:03}");
        let dir = run.subdir(&sub)?;
        write_experiment(&dir, cfg, &name, &result, "sweep")?;
        let mut scalars = serde_json::Map::new();
        if let Value::Object(m) = &result.summary {
            for (k, v) in m {
                if let Some(f) = v.as_f64() {
                    if !columns.contains(k) {
                        columns.push(k.clone());
                    }
                    scalars.insert(k.clone(), json!(f));
                }
            }
        }
        listing.push(json!({ "dir": sub, "value": values[i].as_str().map_or_else(|| values[i].to_string(), str::to_string), "config_hash": cfg.hash }));
        rows.push((*x, scalars));
    }

    let mut headers = vec![axis_col.clone()];
    headers.extend(columns.iter().cloned());
    let mut table = Table::new(&headers);
    for (x, s) in &rows {
        let mut row = vec![*x];
        row.extend(columns.iter().map(|c| s.get(c).and_then(Value::as_f64).unwrap_or(f64::NAN)));
        table.push_row(&row);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut trends = serde_json::Map::new();
    table = table.comment(format!("sweep of {} over {} points", a.axis, rows.len()));
    for (j, c) in columns.iter().enumerate() {
        if let Some(s) = log_log_slope(&xs, &table.columns[j + 1]) {
            table = table.comment(format!("log-log slope of {c} versus {axis_col}: {s:.4}"));
            trends.insert(c.clone(), json!({ "log_log_slope": s }));
        }
    }
    write_table(run.path(), "sweep_summary", &table)?;
    let mut m = meta(&base_cfg, "sweep");
    m.insert("axis".into(), json!(a.axis));
    m.insert("axis_column".into(), json!(axis_col));
    m.insert("points".into(), Value::Array(listing));
    m.insert("trends".into(), Value::Object(trends));
    write_document(run.path(), "sweep_meta.json", &m)?;
    write_config(run.path(), &base_cfg)?;
    run.commit()
}
