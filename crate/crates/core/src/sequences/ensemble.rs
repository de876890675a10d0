use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Pointwise mean and standard error over ensemble samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub mean: Vec<f64>,
    /// Zero for a single sample.
    pub stderr: Vec<f64>,
    pub samples: usize,
}

/// Evaluates `f` for samples `0..n` in parallel and reduces per point.
///
/// Each point's values are sorted before summation, so the result does not
/// depend on sample order or on scheduling.
pub fn ensemble_average<F>(n: usize, f: F) -> Result<Ensemble>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    if n == 0 {
        return Err(Error::invalid("bath.samples", "need at least one sample"));
    }
    let rows = (0..n).into_par_iter().map(&f).collect::<Result<Vec<_>>>()?;
    reduce(&rows)
}

pub(crate) fn reduce(rows: &[Vec<f64>]) -> Result<Ensemble> {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::invalid("ensemble", format!("sample {i} returned {} values, expected {width}", rows[i].len())));
    }
    let mut mean = Vec::with_capacity(width);
    let mut stderr = Vec::with_capacity(width);
    let mut col = vec![0.0; n];
    for j in 0..width {
        for (c, r) in col.iter_mut().zip(rows) {
            *c = r[j];
        }
        col.sort_by(f64::total_cmp);
        let m = col.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let mut dev: Vec<f64> = col.iter().map(|x| (x - m) * (x - m)).collect();
            dev.sort_by(f64::total_cmp);
            (dev.iter().sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        mean.push(m);
        stderr.push(se);
    }
    Ok(Ensemble { mean, stderr, samples: n })
}

/// Nodes and weights integrating against the standard normal density,
/// exact for polynomials of degree < 2n.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let n = n.max(1);
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<(f64, f64)> = (0..n).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes
}
