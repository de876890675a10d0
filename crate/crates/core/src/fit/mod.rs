//! Least-squares fitting of traces to closed-form models and to the full
//! simulation.

mod lm;
mod models;
mod simultaneous;


use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use lm::{levenberg_marquardt, LmOptions, LmOutcome, Param};
pub use simultaneous::{rabi_fringe_model, simultaneous_fit_rabi_fringe, RabiFringeFit, SimultaneousSpec};
pub use models::{curve_models, linear_sinusoid, nyquist, one_over_e_crossing, periodogram_peak, CurveModel};

use crate::error::{Error, Issues, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    /// None for fixed parameters or a singular fit.
    pub stderr: Option<f64>,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResidual {
    pub model: String,
    pub residual_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub parameters: Vec<ParamEstimate>,
    pub covariance: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_comparison: Option<Vec<ModelResidual>>,
}

impl FitResult {
    pub fn from_outcome(model: &str, params: &[Param], out: LmOutcome) -> Self {
        let parameters = params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let var = out.covariance[(i, i)];
                let free = !(p.fixed || p.low == p.high);
                ParamEstimate {
                    name: p.name.clone(),
                    value: out.values[i],
                    stderr: (free && var.is_finite()).then(|| var.max(0.0).sqrt()),
                    fixed: !free,
                }
            })
            .collect();
        let n = params.len();
        FitResult {
            model: model.into(),
            parameters,
            covariance: (0..n).map(|i| (0..n).map(|j| out.covariance[(i, j)]).collect()).collect(),
            residual_norm: out.residual_norm,
            iterations: out.iterations,
            converged: out.converged,
            message: out.message,
            model_comparison: None,
        }
    }

    pub fn get(&self, name: &str) -> Option<&ParamEstimate> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|p| p.stderr)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }
}

/// Checks lengths and finiteness; returns weights defaulting to 1.
pub fn validate_data(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut issues = Issues::new();
    if x.len() != y.len() {
        issues.push("data", format!("abscissa has {} points but ordinate has {}", x.len(), y.len()));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        issues.push(format!("x[{i}]"), "must be finite");
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        issues.push(format!("y[{i}]"), "must be finite");
    }
    let w = match weights {
        Some(w) => {
            if w.len() != x.len() {
                issues.push("weights", format!("expected {} weights, got {}", x.len(), w.len()));
            }
            if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                issues.push(format!("weights[{i}]"), "must be positive and finite");
            }
            w.to_vec()
        }
        None => vec![1.0; x.len()],
    };
    issues.finish()?;
    Ok(w)
}

/// Data sorted into a canonical order so that results do not depend on the
/// order points were supplied in.
fn canonical(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])).then(w[a].total_cmp(&w[b])));
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| y[i]).collect(), idx.iter().map(|&i| w[i]).collect())
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Replaces the model's automatic starting point.
    pub params: Option<Vec<Param>>,
    pub lm: LmOptions,
    /// Models whose residual norms are reported alongside.
    pub compare: Vec<String>,
}

/// Weighted least squares fit; `weights` are inverse variances.
pub fn fit_curve(model: &dyn CurveModel, x: &[f64], y: &[f64], weights: Option<&[f64]>, opts: &FitOptions) -> Result<FitResult> {
    let w = validate_data(x, y, weights)?;
    let (x, y, w) = canonical(x, y, &w);
    let params = match &opts.params {
        Some(p) => {
            if p.len() != model.parameter_names().len() {
                return Err(Error::invalid(
                    "params",
                    format!("{} takes {} parameters ({}), got {}", model.name(), model.parameter_names().len(), model.parameter_names().join(", "), p.len()),
                ));
            }
            p.clone()
        }
        None => model.initial(&x, &y),
    };
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let out = levenberg_marquardt(
        |p| Ok(x.iter().zip(&y).zip(&sw).map(|((x, y), s)| s * (model.eval(*x, p) - y)).collect()),
        &params,
        &opts.lm,
    )?;
    let mut result = FitResult::from_outcome(model.name(), &params, out);
    if !opts.compare.is_empty() {
        let mut table = vec![ModelResidual { model: result.model.clone(), residual_norm: result.residual_norm, converged: result.converged }];
        for name in &opts.compare {
            let other = curve_models().get(name)?;
            let r = fit_curve(other.as_ref(), &x, &y, Some(&w), &FitOptions { lm: opts.lm, ..Default::default() })?;
            table.push(ModelResidual { model: r.model, residual_norm: r.residual_norm, converged: r.converged });
        }
        result.model_comparison = Some(table);
    }
    Ok(result)
}

pub fn fit_named(model: &str, x: &[f64], y: &[f64], weights: Option<&[f64]>, opts: &FitOptions) -> Result<FitResult> {
    fit_curve(curve_models().get(model)?.as_ref(), x, y, weights, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    /// V = (max − min)/2 of the fitted sinusoid.
    pub amplitude: f64,
    pub amplitude_stderr: f64,
    pub phase: f64,
    pub offset: f64,
    /// rad/s (angular, in units of the abscissa).
    pub frequency: f64,
    /// None when the frequency was fixed.
    pub frequency_stderr: Option<f64>,
}

/// Sinusoid fit to a fringe. With `known_frequency` the fit is linear in
/// amplitude, phase and offset; otherwise the frequency is free and
/// `guess` (or a periodogram scan) seeds it.
pub fn fit_fringe(x: &[f64], y: &[f64], weights: Option<&[f64]>, known_frequency: Option<f64>, guess: Option<f64>) -> Result<FringeFit> {
    let w = validate_data(x, y, weights)?;
    let (x, y, w) = canonical(x, y, &w);
    if x.len() < 4 {
        return Err(Error::invalid("data", format!("a fringe fit needs at least 4 points, got {}", x.len())));
    }
    let nyq = nyquist(&x);
    let span = x[x.len() - 1] - x[0];
    match known_frequency {
        Some(freq) => {
            if !(freq > 0.0 && freq.is_finite()) {
                return Err(Error::invalid("frequency", "must be positive and finite"));
            }
            if freq >= nyq {
                return Err(under_sampled(freq, &x));
            }
            fixed_frequency_fringe(&x, &y, &w, freq)
        }
        None => {
            let lo = 4.0 * PI / span.max(f64::MIN_POSITIVE);
            let seed = match guess {
                Some(g) => {
                    if g >= nyq {
                        return Err(under_sampled(g, &x));
                    }
                    periodogram_peak(&x, &y, 0.8 * g, (1.2 * g).min(nyq))
                }
                None => periodogram_peak(&x, &y, lo, 0.95 * nyq),
            };
            if seed * span < 4.0 * PI {
                return Err(Error::invalid(
                    "data",
                    format!("free-frequency fringe fit needs at least 2 periods; span {span:e} covers {:.2}", seed * span / (2.0 * PI)),
                ));
            }
            let (a, phase, c) = linear_sinusoid(&x, &y, seed);
            let params = [
                Param::new("amplitude", a),
                Param::bounded("frequency", seed, 0.5 * seed, (1.5 * seed).min(nyq)),
                Param::new("phase", phase),
                Param::new("offset", c),
            ];
            let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            let model = models::Sinusoid;
            let out = levenberg_marquardt(
                |p| Ok(x.iter().zip(&y).zip(&sw).map(|((x, y), s)| s * (model.eval(*x, p) - y)).collect()),
                &params,
                &LmOptions::default(),
            )?;
            let fit = FitResult::from_outcome("sinusoid", &params, out);
            let (mut amp, mut phase) = (fit.values()[0], fit.values()[2]);
            if amp < 0.0 {
                amp = -amp;
                phase += PI;
            }
            Ok(FringeFit {
                amplitude: amp,
                amplitude_stderr: fit.parameters[0].stderr.unwrap_or(f64::NAN),
                phase: phase.rem_euclid(2.0 * PI),
                offset: fit.values()[3],
                frequency: fit.values()[1],
                frequency_stderr: fit.parameters[1].stderr,
            })
        }
    }
}

fn under_sampled(freq: f64, x: &[f64]) -> Error {
    Error::invalid(
        "data",
        format!(
            "trace is under-sampled for angular frequency {freq:e}: sample spacing must be below π/ω = {:e} (largest usable frequency {:e})",
            PI / freq,
            nyquist(x)
        ),
    )
}

fn fixed_frequency_fringe(x: &[f64], y: &[f64], w: &[f64], freq: f64) -> Result<FringeFit> {
    let n = x.len();
    let a = DMatrix::from_fn(n, 3, |i, j| {
        let s = w[i].sqrt();
        s * match j {
            0 => (freq * x[i]).cos(),
            1 => (freq * x[i]).sin(),
            _ => 1.0,
        }
    });
    let b = DVector::from_fn(n, |i, _| w[i].sqrt() * y[i]);
    let ata = a.transpose() * &a;
    let inv = ata.try_inverse().ok_or_else(|| Error::Fit("fringe design matrix is singular (samples at one phase)".into()))?;
    let s = &inv * (a.transpose() * &b);
    let resid = &a * &s - &b;
    let s2 = resid.norm_squared() / (n as f64 - 3.0);
    let cov = inv * s2;
    let (p, q) = (s[0], s[1]);
    let amp = p.hypot(q);
    let var = if amp > 0.0 {
        (p * p * cov[(0, 0)] + 2.0 * p * q * cov[(0, 1)] + q * q * cov[(1, 1)]) / (amp * amp)
    } else {
        0.5 * (cov[(0, 0)] + cov[(1, 1)])
    };
    Ok(FringeFit {
        amplitude: amp,
        amplitude_stderr: var.max(0.0).sqrt(),
        phase: (-q).atan2(p).rem_euclid(2.0 * PI),
        offset: s[2],
        frequency: freq,
        frequency_stderr: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, end: f64) -> Vec<f64> {
        (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn noiseless_decay_roundtrips() {
        for (model, t, end) in [("exp_decay", 50e-6, 200e-6), ("gaussian_decay", 17e-9, 40e-9), ("cubed_exp_decay", 200e-6, 400e-6)] {
            let x = grid(30, end);
            let m = curve_models().get(model).unwrap();
            let y: Vec<f64> = x.iter().map(|x| m.eval(*x, &[0.8, t, 0.0])).collect();
            let r = fit_curve(m.as_ref(), &x, &y, None, &FitOptions::default()).unwrap();
            assert!(r.converged, "{model}: {}", r.message);
            assert!((r.value("time").unwrap() / t - 1.0).abs() < 1e-6, "{model}: {:?}", r.value("time"));
        }
    }

    #[test]
    fn order_independence() {
        let x = grid(25, 100e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.03).unwrap();
        let y: Vec<f64> = x.iter().map(|x| (-x / 40e-6).exp() + noise.sample(&mut rng)).collect();
        let a = fit_named("exp_decay", &x, &y, None, &FitOptions::default()).unwrap();
        let mut idx: Vec<usize> = (0..x.len()).rev().collect();
        idx.swap(3, 17);
        let xr: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let yr: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let b = fit_named("exp_decay", &xr, &yr, None, &FitOptions::default()).unwrap();
        for (p, q) in a.values().iter().zip(b.values()) {
            assert!((p - q).abs() <= 1e-12 * p.abs().max(1e-300));
        }
    }

    #[test]
    fn optimum_never_worse_than_start() {
        let x = grid(20, 10.0);
        let y: Vec<f64> = x.iter().map(|x| 2.0 * x.powf(1.7) + 0.3 * (x * 7.0).sin()).collect();
        let m = curve_models().get("power_law").unwrap();
        let init = m.initial(&x, &y);
        let start: f64 = x.iter().zip(&y).map(|(x, y)| (m.eval(*x, &init.iter().map(|p| p.init).collect::<Vec<_>>()) - y).powi(2)).sum::<f64>().sqrt();
        let r = fit_curve(m.as_ref(), &x, &y, None, &FitOptions::default()).unwrap();
        assert!(r.residual_norm <= start);
    }

    #[test]
    fn nan_input_rejected() {
        let x = grid(10, 1.0);
        let mut y = x.clone();
        y[4] = f64::NAN;
        let err = fit_named("exp_decay", &x, &y, None, &FitOptions::default()).unwrap_err();
        assert_eq!(err.issues()[0].key, "y[4]");
        assert!(fit_named("exp_decay", &x, &x[..5], None, &FitOptions::default()).is_err());
    }

    #[test]
    fn fixed_frequency_fringe() {
        let w = 2.0 * PI * 137.9e9;
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.8e-12).collect();
        let y: Vec<f64> = x.iter().map(|x| 0.5 + 0.2 * (w * x + 1.1).cos()).collect();
        let f = fit_fringe(&x, &y, None, Some(w), None).unwrap();
        assert!((f.amplitude - 0.2).abs() < 1e-10 && (f.phase - 1.1).abs() < 1e-9 && (f.offset - 0.5).abs() < 1e-10);
        // V is half the peak-to-peak of the fitted curve
        let curve: Vec<f64> = (0..10_000).map(|k| f.offset + f.amplitude * (k as f64 * 2.0 * PI / 10_000.0).cos()).collect();
        let (lo, hi) = curve.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(((hi - lo) / 2.0 - f.amplitude).abs() < 1e-12);
        let flat = fit_fringe(&x, &vec![0.3; x.len()], None, Some(w), None).unwrap();
        assert!(flat.amplitude < 1e-12);
    }

    #[test]
    fn free_frequency_fringe() {
        let w = 2.0 * PI * 137.9e9;
        let x: Vec<f64> = (0..120).map(|i| i as f64 * 0.9e-12).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let y: Vec<f64> = x.iter().map(|x| 0.5 + 0.2 * (w * x + 0.4).cos() + noise.sample(&mut rng)).collect();
        for guess in [Some(2.0 * PI * 130e9), None] {
            let f = fit_fringe(&x, &y, None, None, guess).unwrap();
            let se = f.frequency_stderr.unwrap();
            assert!((f.frequency - w).abs() < 4.0 * se, "{} vs {w} ± {se}", f.frequency);
            assert!((f.frequency / w - 1.0).abs() < 0.005);
        }
    }

    #[test]
    fn under_sampled_fringe_rejected() {
        let w = 2.0 * PI * 137.9e9;
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 5e-12).collect();
        let y: Vec<f64> = x.iter().map(|x| (w * x).cos()).collect();
        let err = fit_fringe(&x, &y, None, Some(w), None).unwrap_err();
        assert!(err.to_string().contains("under-sampled"));
        let short: Vec<f64> = (0..10).map(|i| i as f64 * 0.5e-12).collect();
        let ys: Vec<f64> = short.iter().map(|x| (w * x).cos()).collect();
        assert!(fit_fringe(&short, &ys, None, None, Some(w)).is_err());
    }

    #[test]
    fn coverage_of_reported_uncertainty() {
        // 5% noise on 30 points of an exponential echo decay
        let t2 = 50e-6;
        let x = grid(30, 150e-6);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut hits = 0;
        let runs = 500;
        for seed in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x.iter().map(|x| (-x / t2).exp() + noise.sample(&mut rng)).collect();
            let r = fit_named("exp_decay", &x, &y, None, &FitOptions::default()).unwrap();
            let (v, s) = (r.value("time").unwrap(), r.stderr("time").unwrap());
            if (v - t2).abs() <= s {
                hits += 1;
            }
        }
        let frac = hits as f64 / runs as f64;
        assert!((0.62..=0.74).contains(&frac), "{frac}");
    }

    #[test]
    fn model_discrimination() {
        let t = 100e-6;
        let x = grid(30, 200e-6);
        let noise = Normal::new(0.0, 0.05).unwrap();
        for (truth, rival) in [("cubed_exp_decay", "exp_decay"), ("exp_decay", "cubed_exp_decay")] {
            let m = curve_models().get(truth).unwrap();
            let mut wins = 0;
            for seed in 0..200 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let y: Vec<f64> = x.iter().map(|x| m.eval(*x, &[1.0, t, 0.0]) + noise.sample(&mut rng)).collect();
                let r = fit_named(truth, &x, &y, None, &FitOptions { compare: vec![rival.into()], ..Default::default() }).unwrap();
                let cmp = r.model_comparison.unwrap();
                if cmp[0].residual_norm < cmp[1].residual_norm {
                    wins += 1;
                }
            }
            assert!(wins >= 190, "{truth}: {wins}/200");
        }
    }
}
