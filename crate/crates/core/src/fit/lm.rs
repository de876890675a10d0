//! Bounded Levenberg–Marquardt with central-difference Jacobians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub init: f64,
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub fixed: bool,
}

impl Param {
    pub fn new(name: &str, init: f64) -> Self {
        Self { name: name.into(), init, low: f64::NEG_INFINITY, high: f64::INFINITY, fixed: false }
    }

    pub fn bounded(name: &str, init: f64, low: f64, high: f64) -> Self {
        Self { name: name.into(), init, low, high, fixed: false }
    }

    pub fn fixed(name: &str, value: f64) -> Self {
        Self { name: name.into(), init: value, low: value, high: value, fixed: true }
    }

    fn validate(&self) -> Result<()> {
        if !self.init.is_finite() || self.low.is_nan() || self.high.is_nan() {
            return Err(Error::invalid(format!("params.{}", self.name), "initial value and bounds must be numbers"));
        }
        if !(self.low <= self.init && self.init <= self.high) {
            return Err(Error::invalid(
                format!("params.{}", self.name),
                format!("need low <= init <= high, got {} <= {} <= {}", self.low, self.init, self.high),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub step_tol: f64,
    pub residual_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, step_tol: 1e-8, residual_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub values: Vec<f64>,
    /// Over all parameters; rows and columns of fixed ones are zero.
    pub covariance: DMatrix<f64>,
    /// √Σ r².
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
    pub degrees_of_freedom: usize,
}

/// Minimizes Σ r(p)² over the free parameters. A residual function error at a
/// trial point is treated as a rejected step.
pub fn levenberg_marquardt<F>(mut residuals: F, params: &[Param], opts: &LmOptions) -> Result<LmOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    for p in params {
        p.validate()?;
    }
    let free: Vec<usize> = (0..params.len()).filter(|&i| !params[i].fixed && params[i].low < params[i].high).collect();
    let mut p: Vec<f64> = params.iter().map(|q| q.init).collect();
    let r0 = residuals(&p)?;
    if r0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Fit("residuals at the initial guess are not finite".into()));
    }
    let m = r0.len();
    if m <= free.len() {
        return Err(Error::invalid("data", format!("need more than {} points for {} free parameters, got {m}", free.len(), free.len())));
    }
    let ssr = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut r = r0;
    let mut cost = ssr(&r);
    let initial = cost.sqrt();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");

    if free.is_empty() {
        return Ok(finish(p, DMatrix::zeros(params.len(), params.len()), cost, initial, 0, true, "no free parameters".into(), m));
    }

    let mut jac = jacobian(&mut residuals, &p, &r, params, &free)?;
    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        loop {
            let mut a = jtj.clone();
            for k in 0..free.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => match a.lu().solve(&(-&grad)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        if lambda > 1e20 {
                            message = "normal equations singular".into();
                            break 'outer;
                        }
                        continue;
                    }
                },
            };
            let mut trial = p.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] = (p[i] + step[k]).clamp(params[i].low, params[i].high);
            }
            let accepted = match residuals(&trial) {
                Ok(rt) if rt.iter().all(|x| x.is_finite()) => {
                    let ct = ssr(&rt);
                    if ct <= cost {
                        let rel_step = free
                            .iter()
                            .map(|&i| ((trial[i] - p[i]) / if p[i] == 0.0 { 1.0 } else { p[i].abs() }).abs())
                            .fold(0.0, f64::max);
                        let rel_res = if cost > 0.0 { (cost - ct) / cost } else { 0.0 };
                        p = trial;
                        r = rt;
                        cost = ct;
                        lambda = (lambda / 10.0).max(1e-12);
                        if rel_step < opts.step_tol || rel_res < opts.residual_tol {
                            converged = true;
                            message = if rel_step < opts.step_tol { "relative step below tolerance" } else { "relative residual change below tolerance" }.into();
                            break 'outer;
                        }
                        true
                    } else {
                        false
                    }
                }
                Ok(_) => false,
                Err(e) => {
                    log::warn!("forward model failed at trial parameters {trial:?}: {e}");
                    false
                }
            };
            if accepted {
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no downhill step exists at machine precision
                let gnorm = grad.norm();
                let scale = jac.norm() * cost.sqrt();
                converged = scale == 0.0 || gnorm <= 1e-6 * scale;
                message = if converged { "no further decrease possible".into() } else { "damping diverged away from a minimum".into() };
                break 'outer;
            }
        }
        if cost == 0.0 {
            converged = true;
            message = "exact fit".into();
            break;
        }
        jac = jacobian(&mut residuals, &p, &r, params, &free)?;
    }

    let jac = jacobian(&mut residuals, &p, &r, params, &free)?;
    let dof = m - free.len();
    let jtj = jac.transpose() * &jac;
    let mut cov = DMatrix::zeros(params.len(), params.len());
    let dead: Vec<&str> = free
        .iter()
        .enumerate()
        .filter(|(k, _)| jac.column(*k).norm() == 0.0)
        .map(|(_, &i)| params[i].name.as_str())
        .collect();
    if !dead.is_empty() {
        converged = false;
        message = format!("singular Jacobian: {} do not affect the residuals", dead.join(", "));
        cov.fill(f64::NAN);
    } else if let Some(inv) = jtj.try_inverse() {
        let s2 = cost / dof as f64;
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                cov[(i, j)] = 0.5 * (inv[(a, b)] + inv[(b, a)]) * s2;
            }
        }
    } else {
        converged = false;
        message = "singular Jacobian at the optimum".into();
        cov.fill(f64::NAN);
    }
    Ok(finish(p, cov, cost, initial, iterations, converged, message, m - free.len()))
}

#[allow(clippy::too_many_arguments)]
fn finish(values: Vec<f64>, covariance: DMatrix<f64>, cost: f64, initial: f64, iterations: usize, converged: bool, message: String, dof: usize) -> LmOutcome {
    LmOutcome {
        values,
        covariance,
        residual_norm: cost.sqrt(),
        initial_residual_norm: initial,
        iterations,
        converged,
        message,
        degrees_of_freedom: dof,
    }
}

fn jacobian<F>(residuals: &mut F, p: &[f64], r: &[f64], params: &[Param], free: &[usize]) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r.len(), free.len());
    for (k, &i) in free.iter().enumerate() {
        let h = f64::EPSILON.sqrt() * p[i].abs().max(1.0);
        let (lo, hi) = ((p[i] - h).max(params[i].low), (p[i] + h).min(params[i].high));
        let mut q = p.to_vec();
        q[i] = hi;
        let rp = if hi > p[i] { residuals(&q)? } else { r.to_vec() };
        q[i] = lo;
        let rm = if lo < p[i] { residuals(&q)? } else { r.to_vec() };
        let width = hi - lo;
        for row in 0..r.len() {
            jac[(row, k)] = (rp[row] - rm[row]) / width;
        }
    }
    Ok(jac)
}
