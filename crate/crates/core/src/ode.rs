//! Dormand–Prince 5(4) integration for complex matrix-valued linear ODEs.

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Vector-space operations the integrator needs.
pub trait OdeState: Clone {
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);

    /// Max-norm of `err` scaled by `atol + rtol * max(|y0|, |y1|)` entrywise.
    fn scaled_error(err: &Self, y0: &Self, y1: &Self, rtol: f64, atol: f64) -> f64;
}

impl<const R: usize, const C: usize> OdeState for SMatrix<Complex64, R, C> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s += v * a;
        }
    }

    fn scaled_error(err: &Self, y0: &Self, y1: &Self, rtol: f64, atol: f64) -> f64 {
        err.iter()
            .zip(y0.iter().zip(y1.iter()))
            .map(|(e, (a, b))| e.norm() / (atol + rtol * a.norm().max(b.norm())))
            // NaN must reject the step rather than vanish under f64::max
            .fold(0.0, |acc, x| if x.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(x) })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` (t1 > t0).
///
/// Fails with [`Error::Integration`] carrying the last accepted time when the
/// controller asks for a step below `min_step`.
pub fn dopri5<S, F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: S,
    ctl: &StepControl,
) -> Result<(S, OdeStats)>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
{
    let mut stats = OdeStats::default();
    if t1 <= t0 {
        return Ok((y0, stats));
    }
    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    let mut h = ctl.max_step.min(span).min(span * 1e-2).max(ctl.min_step);

    while t < t1 {
        let last = t + h >= t1 - 1e-15 * span;
        if last {
            h = t1 - t;
        }
        let stage = |coefs: &[(f64, &S)]| {
            let mut s = y.clone();
            for (c, k) in coefs {
                s.axpy(h * c, k);
            }
            s
        };
        let k2 = f(t + C2 * h, &stage(&[(A21, &k1)]));
        let k3 = f(t + C3 * h, &stage(&[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &stage(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = stage(&[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + h, &y_new);
        stats.evaluations += 6;

        let mut err = k1.clone();
        // err = h * (E1 k1 + E3 k3 + ...), built without a zero constructor
        err.axpy(E1 - 1.0, &k1);
        err.axpy(E3, &k3);
        err.axpy(E4, &k4);
        err.axpy(E5, &k5);
        err.axpy(E6, &k6);
        err.axpy(E7, &k7);
        let mut scaled = S::scaled_error(&err, &y, &y_new, ctl.rel_tol, ctl.abs_tol) * h.abs();
        if !scaled.is_finite() {
            scaled = f64::INFINITY;
        }

        if scaled <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            let fac = if scaled == 0.0 { 5.0 } else { (0.9 * scaled.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(ctl.max_step);
        } else {
            stats.rejected += 1;
            h *= (0.9 * scaled.powf(-0.2)).clamp(0.1, 0.9);
            if h < ctl.min_step {
                return Err(Error::Integration {
                    time: t,
                    reason: format!("step size {h:e} s fell below min_step {:e} s", ctl.min_step),
                });
            }
        }
    }
    Ok((y, stats))
}
