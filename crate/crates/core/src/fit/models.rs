//! Closed-form curve models selectable by name.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use super::lm::Param;
use crate::registry::{Named, Registry};

pub trait CurveModel: Named + Send + Sync {
    fn parameter_names(&self) -> &'static [&'static str];
    fn eval(&self, x: f64, p: &[f64]) -> f64;
    /// Data-driven starting point with bounds; offsets start fixed at 0 for
    /// decays.
    fn initial(&self, x: &[f64], y: &[f64]) -> Vec<Param>;
}

fn span(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

/// First abscissa where |y| falls below 1/e of its largest magnitude,
/// interpolated; falls back to the data span.
pub fn one_over_e_crossing(x: &[f64], y: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().map(|v| v.abs())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let peak = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let level = peak / std::f64::consts::E;
    for w in pts.windows(2) {
        if w[0].1 > level && w[1].1 <= level {
            let f = (w[0].1 - level) / (w[0].1 - w[1].1);
            return w[0].0 + f * (w[1].0 - w[0].0);
        }
    }
    let (lo, hi) = span(x);
    (hi - lo).max(hi.abs()).max(f64::MIN_POSITIVE)
}

/// A·exp(−(x/T)^n) + c.
pub struct StretchedDecay {
    name: &'static str,
    power: f64,
}

impl Named for StretchedDecay {
    fn name(&self) -> &'static str {
        self.name
    }
}

impl CurveModel for StretchedDecay {
    fn parameter_names(&self) -> &'static [&'static str] {
        &["amplitude", "time", "offset"]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (-(x / p[1]).abs().powf(self.power)).exp() + p[2]
    }

    fn initial(&self, x: &[f64], y: &[f64]) -> Vec<Param> {
        let amp = y.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        let t = one_over_e_crossing(x, y).max(f64::MIN_POSITIVE);
        vec![Param::new("amplitude", amp), Param::bounded("time", t, t * 1e-6, t * 1e6), Param::fixed("offset", 0.0)]
    }
}

/// A·cos(ωx + φ) + c.
pub struct Sinusoid;

impl Named for Sinusoid {
    fn name(&self) -> &'static str {
        "sinusoid"
    }
}

impl CurveModel for Sinusoid {
    fn parameter_names(&self) -> &'static [&'static str] {
        &["amplitude", "frequency", "phase", "offset"]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (p[1] * x + p[2]).cos() + p[3]
    }

    fn initial(&self, x: &[f64], y: &[f64]) -> Vec<Param> {
        let (lo, hi) = span(x);
        let w = periodogram_peak(x, y, 2.0 * PI / (hi - lo).max(f64::MIN_POSITIVE), 0.95 * nyquist(x));
        let (a, phase, c) = linear_sinusoid(x, y, w);
        vec![Param::new("amplitude", a), Param::bounded("frequency", w, 0.0, f64::INFINITY), Param::new("phase", phase), Param::new("offset", c)]
    }
}

/// A·exp(−x/T)·cos(ωx + φ) + c.
pub struct DampedSinusoid;

impl Named for DampedSinusoid {
    fn name(&self) -> &'static str {
        "damped_sinusoid"
    }
}

impl CurveModel for DampedSinusoid {
    fn parameter_names(&self) -> &'static [&'static str] {
        &["amplitude", "time", "frequency", "phase", "offset"]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (-x / p[1]).exp() * (p[2] * x + p[3]).cos() + p[4]
    }

    fn initial(&self, x: &[f64], y: &[f64]) -> Vec<Param> {
        let s = Sinusoid.initial(x, y);
        let (lo, hi) = span(x);
        let t = (hi - lo).max(f64::MIN_POSITIVE);
        vec![
            s[0].clone(),
            Param::bounded("time", t, t * 1e-6, t * 1e6),
            s[1].clone(),
            s[2].clone(),
            s[3].clone(),
        ]
    }
}

/// A·x^k + c.
pub struct PowerLaw;

impl Named for PowerLaw {
    fn name(&self) -> &'static str {
        "power_law"
    }
}

impl CurveModel for PowerLaw {
    fn parameter_names(&self) -> &'static [&'static str] {
        &["amplitude", "exponent", "offset"]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * x.powf(p[1]) + p[2]
    }

    fn initial(&self, x: &[f64], y: &[f64]) -> Vec<Param> {
        // straight line through the log-log points
        let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
        let (k, a) = if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
            let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            let k = if sxx > 0.0 { sxy / sxx } else { 1.0 };
            (k, (my - k * mx).exp())
        } else {
            (1.0, 1.0)
        };
        vec![Param::new("amplitude", a), Param::new("exponent", k), Param::fixed("offset", 0.0)]
    }
}

pub fn curve_models() -> &'static Registry<dyn CurveModel> {
    static REG: OnceLock<Registry<dyn CurveModel>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn CurveModel> = Registry::new("curve model");
        r.register(Arc::new(Sinusoid))
            .register(Arc::new(StretchedDecay { name: "exp_decay", power: 1.0 }))
            .register(Arc::new(StretchedDecay { name: "gaussian_decay", power: 2.0 }))
            .register(Arc::new(StretchedDecay { name: "cubed_exp_decay", power: 3.0 }))
            .register(Arc::new(PowerLaw))
            .register(Arc::new(DampedSinusoid));
        r
    })
}

/// Angular Nyquist limit π/Δx for the smallest positive spacing.
pub fn nyquist(x: &[f64]) -> f64 {
    let mut s: Vec<f64> = x.to_vec();
    s.sort_by(f64::total_cmp);
    let dx = s.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    PI / dx
}

/// Linear least squares for a·cos(ωx) + b·sin(ωx) + c, returned as
/// (amplitude, phase, offset) with amplitude ≥ 0.
pub fn linear_sinusoid(x: &[f64], y: &[f64], w: f64) -> (f64, f64, f64) {
    let a = nalgebra::DMatrix::from_fn(x.len(), 3, |i, j| match j {
        0 => (w * x[i]).cos(),
        1 => (w * x[i]).sin(),
        _ => 1.0,
    });
    let b = nalgebra::DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let cutoff = 1e-10 * svd.singular_values.max();
    match svd.solve(&b, cutoff) {
        Ok(s) => (s[0].hypot(s[1]), (-s[1]).atan2(s[0]), s[2]),
        Err(_) => (0.0, 0.0, y.iter().sum::<f64>() / y.len() as f64),
    }
}

/// Angular frequency in [lo, hi] with the largest fitted sinusoid amplitude.
pub fn periodogram_peak(x: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let n = 2000;
    let mut best = (lo, -1.0);
    for k in 0..=n {
        let w = lo + (hi - lo) * k as f64 / n as f64;
        let (a, _, _) = linear_sinusoid(x, y, w);
        if a > best.1 {
            best = (w, a);
        }
    }
    best.0
}
