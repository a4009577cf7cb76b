//! Linear ε-insensitive support vector regression with an ℓ2 penalty,
//! solved by averaged stochastic subgradient descent.
//!
//! Features and targets are standardized internally; the penalty and `ε` act
//! on the standardized problem
//!
//! ```text
//! J(u, c) = (1/n) Σ max(0, |<u, x̃ᵢ> + c − ỹᵢ| − ε) + λ ||u||²
//! ```
//!
//! and the solution is mapped back to raw units. Steps are `η₀ / √t` with
//! `η₀ = 1 / (1 + mean ||x̃ᵢ||²)`. Iterates of the second half of the budget
//! are averaged; the averaged iterate is evaluated at the end of each epoch
//! and the best checkpoint so far is kept, so the recorded objective trace is
//! non-increasing.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot_unchecked, DenseMatrix};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrParams {
    /// ℓ2 penalty strength on standardized weights.
    pub lambda: f64,
    /// Half-width of the insensitive tube, in standardized target units.
    pub epsilon: f64,
    /// Passes over the data.
    pub epochs: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            lambda: 0.0,
            epsilon: 0.1,
            epochs: 40,
        }
    }
}

/// Fitted regressor in raw feature/target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl SvrModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        dot_unchecked(&self.w, x) + self.b
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        check_len(self.w.len(), x.cols())?;
        Ok(x.row_iter().map(|r| self.predict_one(r)).collect())
    }
}

pub fn svr_fit(x: &DenseMatrix, y: &[f64], params: &SvrParams, seed: u64) -> Result<SvrModel> {
    svr_fit_traced(x, y, params, seed).map(|(m, _)| m)
}

struct Standardized {
    x: Vec<f64>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
}

fn standardize(x: &DenseMatrix, y: &[f64]) -> Standardized {
    let (n, d) = (x.rows(), x.cols());
    let mut x_mean = vec![0.0; d];
    for row in x.row_iter() {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut x_scale = vec![0.0; d];
    for row in x.row_iter() {
        for ((s, v), m) in x_scale.iter_mut().zip(row).zip(&x_mean) {
            *s += (v - m) * (v - m);
        }
    }
    // constant columns keep scale 1 and end up with zero weight
    x_scale
        .iter_mut()
        .for_each(|s| *s = if *s > 0.0 { (*s / n as f64).sqrt() } else { 1.0 });
    let mut xs = Vec::with_capacity(n * d);
    for row in x.row_iter() {
        xs.extend(row.iter().zip(&x_mean).zip(&x_scale).map(|((v, m), s)| (v - m) / s));
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
    let y_scale = if y_var > 0.0 { y_var.sqrt() } else { 1.0 };
    Standardized {
        x: xs,
        y: y.iter().map(|v| (v - y_mean) / y_scale).collect(),
        x_mean,
        x_scale,
        y_mean,
        y_scale,
    }
}

fn objective(s: &Standardized, d: usize, u: &[f64], c: f64, params: &SvrParams) -> f64 {
    let n = s.y.len();
    let loss: f64 = s
        .x
        .chunks_exact(d)
        .zip(&s.y)
        .map(|(row, yi)| ((dot_unchecked(u, row) + c - yi).abs() - params.epsilon).max(0.0))
        .sum();
    loss / n as f64 + params.lambda * dot_unchecked(u, u)
}

/// Like [`svr_fit`], also returning the standardized objective of the kept
/// solution at every checkpoint.
pub fn svr_fit_traced(x: &DenseMatrix, y: &[f64], params: &SvrParams, seed: u64) -> Result<(SvrModel, Vec<f64>)> {
    check_len(x.rows(), y.len())?;
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::input(format!("SVR needs at least 2 samples, got {n}")));
    }
    if d == 0 {
        return Err(Error::input("SVR needs at least one feature"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("SVR targets must be finite"));
    }
    if !(params.lambda >= 0.0 && params.lambda.is_finite()) {
        return Err(Error::input("lambda must be finite and >= 0"));
    }
    if !(params.epsilon >= 0.0 && params.epsilon.is_finite()) {
        return Err(Error::input("epsilon must be finite and >= 0"));
    }
    if params.epochs == 0 {
        return Err(Error::input("SVR epochs must be >= 1"));
    }

    let s = standardize(x, y);
    let mean_sq_norm = s.x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let eta0 = 1.0 / (1.0 + mean_sq_norm);
    let mut rng = SeededRng::new(seed);

    let mut u = vec![0.0; d];
    let mut c = 0.0;
    let mut avg_u = vec![0.0; d];
    let mut avg_c = 0.0;
    let mut averaged = 0usize;
    let average_from = params.epochs / 2;

    let mut best_u = u.clone();
    let mut best_c = c;
    let mut best_obj = objective(&s, d, &u, c, params);
    let mut trace = Vec::with_capacity(params.epochs - average_from);
    let mut t = 0usize;

    for epoch in 0..params.epochs {
        for i in rng.permutation(n) {
            t += 1;
            let eta = eta0 / (t as f64).sqrt();
            let row = &s.x[i * d..(i + 1) * d];
            let r = dot_unchecked(&u, row) + c - s.y[i];
            let sign = if r.abs() > params.epsilon {
                r.signum()
            } else {
                0.0
            };
            let shrink = 1.0 - 2.0 * eta * params.lambda;
            for (uj, xj) in u.iter_mut().zip(row) {
                *uj = shrink * *uj - eta * sign * xj;
            }
            c -= eta * sign;
            if epoch >= average_from {
                averaged += 1;
                let k = averaged as f64;
                for (a, v) in avg_u.iter_mut().zip(&u) {
                    *a += (v - *a) / k;
                }
                avg_c += (c - avg_c) / k;
            }
        }
        if epoch >= average_from {
            let obj = objective(&s, d, &avg_u, avg_c, params);
            if obj < best_obj {
                best_obj = obj;
                best_u.copy_from_slice(&avg_u);
                best_c = avg_c;
            }
            trace.push(best_obj);
        }
    }

    // undo standardization: y = y_mean + y_scale (<u, (x - m)/s> + c)
    let w: Vec<f64> = best_u
        .iter()
        .zip(&s.x_scale)
        .map(|(uj, sj)| s.y_scale * uj / sj)
        .collect();
    let b = s.y_mean + s.y_scale * best_c - dot_unchecked(&w, &s.x_mean);
    Ok((
        SvrModel {
            w,
            b,
            lambda: params.lambda,
            epsilon: params.epsilon,
        },
        trace,
    ))
}
