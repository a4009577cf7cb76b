//! Synthetic datasets with known geometry.
//!
//! All generators emit class 0 samples first, then class 1.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::SeededRng;

/// Name of the continuous target produced by [`sparse_signal_synth`].
pub const SPARSE_TARGET: &str = "score";

fn check_even(n: usize) -> Result<()> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::input(format!("n must be even and >= 2, got {n}")));
    }
    Ok(())
}

fn labels_in_halves(n: usize) -> Vec<u8> {
    (0..n).map(|i| u8::from(i >= n / 2)).collect()
}

/// Two interleaving half circles.
///
/// Class 0 lies on the upper unit half circle centred at the origin, class 1
/// on the lower unit half circle centred at `(1, 0.5)`; angles are evenly
/// spaced over `[0, π]` and isotropic Gaussian noise of `noise_sd` is added.
pub fn two_moons(n: usize, noise_sd: f64, rng: &mut SeededRng) -> Result<LabeledDataset> {
    check_even(n)?;
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::input("noise_sd must be finite and >= 0"));
    }
    let half = n / 2;
    let step = if half > 1 { PI / (half - 1) as f64 } else { 0.0 };
    let mut rows = Vec::with_capacity(n);
    for i in 0..half {
        let t = step * i as f64;
        rows.push(vec![t.cos(), t.sin()]);
    }
    for i in 0..half {
        let t = step * i as f64;
        rows.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
    }
    if noise_sd > 0.0 {
        for row in &mut rows {
            for v in row.iter_mut() {
                *v += rng.normal(0.0, noise_sd);
            }
        }
    }
    LabeledDataset::new(DenseMatrix::from_rows(&rows)?, labels_in_halves(n))
}

/// Two unit-covariance Gaussian clusters separated by the line `y = -x`.
///
/// `separation` is the distance between the cluster means, which sit at
/// `±(separation / 2) · (1, 1)/√2`. The per-axis class-mean gap is therefore
/// `separation / √2`.
pub fn diagonal_clusters(n: usize, separation: f64, rng: &mut SeededRng) -> Result<LabeledDataset> {
    diagonal_clusters_elongated(n, separation, 1.0, rng)
}

/// Like [`diagonal_clusters`] but with standard deviation `along_sd` in the
/// direction parallel to the separating line `(1, -1)/√2` (unit in the
/// normal direction). `along_sd = 1` is the isotropic case.
pub fn diagonal_clusters_elongated(
    n: usize,
    separation: f64,
    along_sd: f64,
    rng: &mut SeededRng,
) -> Result<LabeledDataset> {
    check_even(n)?;
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::input("separation must be finite and > 0"));
    }
    if !(along_sd > 0.0 && along_sd.is_finite()) {
        return Err(Error::input("along_sd must be finite and > 0"));
    }
    let labels = labels_in_halves(n);
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| {
            let sign = if l == 1 { 1.0 } else { -1.0 };
            let normal = sign * separation / 2.0 + rng.standard_normal();
            let along = along_sd * rng.standard_normal();
            vec![
                FRAC_1_SQRT_2 * (normal + along),
                FRAC_1_SQRT_2 * (normal - along),
            ]
        })
        .collect();
    LabeledDataset::new(DenseMatrix::from_rows(&rows)?, labels)
}

/// Two unit-covariance Gaussian clusters at `(0, ∓separation/2)`; only the y
/// coordinate carries class information.
pub fn axis_clusters(n: usize, separation: f64, rng: &mut SeededRng) -> Result<LabeledDataset> {
    check_even(n)?;
    if !separation.is_finite() {
        return Err(Error::input("separation must be finite"));
    }
    let labels = labels_in_halves(n);
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| {
            let sign = if l == 1 { 1.0 } else { -1.0 };
            vec![rng.standard_normal(), sign * separation / 2.0 + rng.standard_normal()]
        })
        .collect();
    LabeledDataset::new(DenseMatrix::from_rows(&rows)?, labels)
}

/// `k` informative features among `d`, with a ground-truth support.
///
/// Labels alternate `0, 1, 0, …`. Informative feature `j` is
/// `±1 · (2·label − 1) + noise_sd · ε` (sign fixed per feature); the other
/// features are standard normal noise. The continuous target
/// [`SPARSE_TARGET`] is `Σ β_j x_j + noise_sd · ε` over the support, with
/// `|β_j|` uniform in `[0.5, 1.5]` and random sign.
pub fn sparse_signal_synth(
    n: usize,
    d: usize,
    k: usize,
    noise_sd: f64,
    rng: &mut SeededRng,
) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::input("n must be >= 2"));
    }
    if k == 0 || k > d {
        return Err(Error::input(format!("need 1 <= k <= d, got k = {k}, d = {d}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::input("noise_sd must be finite and >= 0"));
    }
    let support = rng.choose_indices(d, k);
    let signs: Vec<f64> = support
        .iter()
        .map(|_| if rng.below(2) == 0 { -1.0 } else { 1.0 })
        .collect();
    let betas: Vec<f64> = support
        .iter()
        .map(|_| {
            let s = if rng.below(2) == 0 { -1.0 } else { 1.0 };
            s * rng.uniform(0.5, 1.5)
        })
        .collect();

    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let mut values = Vec::with_capacity(n * d);
    let mut target = Vec::with_capacity(n);
    for &label in &labels {
        let class_sign = 2.0 * f64::from(label) - 1.0;
        let start = values.len();
        values.extend((0..d).map(|_| rng.standard_normal()));
        let row = &mut values[start..];
        let mut t = 0.0;
        for ((&j, &s), &beta) in support.iter().zip(&signs).zip(&betas) {
            row[j] = s * class_sign + noise_sd * rng.standard_normal();
            t += beta * row[j];
        }
        target.push(t + noise_sd * rng.standard_normal());
    }
    LabeledDataset::new(DenseMatrix::new(n, d, values)?, labels)?
        .with_target(SPARSE_TARGET, target)?
        .with_support(support)
}
