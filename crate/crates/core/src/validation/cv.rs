//! Nested k-fold cross-validation of linear SVR.
//!
//! The outer loop estimates generalization; on each outer training set an
//! inner k-fold loop picks the penalty strength from a grid by mean inner
//! MSE (ties go to the smaller λ), then the model is refit on the whole outer
//! training set and scored on the held-out fold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{correlation, mean_squared_error};
use super::svr::{svr_fit, SvrParams};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// `0, 1e-6, 1e-5, …, 1e-1`.
pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub folds: usize,
    pub inner_folds: usize,
    pub lambda_grid: Vec<f64>,
    pub epsilon: f64,
    pub svr_epochs: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            inner_folds: 5,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            epsilon: 0.1,
            svr_epochs: SvrParams::default().epochs,
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 || self.inner_folds < 2 {
            return Err(Error::input("folds and inner_folds must be >= 2"));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::input("lambda grid is empty"));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::input("lambda grid values must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Disjoint train/test index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Every split a nested CV run uses. Inner splits index into the full
/// dataset, like the outer ones.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedSplitPlan {
    pub outer: Vec<FoldSplit>,
    pub inner: Vec<Vec<FoldSplit>>,
}

/// Shuffles `items` once and deals them round-robin into `k` folds.
fn k_fold(items: &[usize], k: usize, rng: &mut SeededRng) -> Result<Vec<FoldSplit>> {
    if items.len() < 2 * k {
        return Err(Error::input(format!(
            "{} samples cannot fill {k} folds with at least 2 samples each",
            items.len()
        )));
    }
    let mut shuffled = items.to_vec();
    rng.shuffle(&mut shuffled);
    Ok((0..k)
        .map(|f| {
            let mut test = Vec::new();
            let mut train = Vec::new();
            for (pos, &i) in shuffled.iter().enumerate() {
                if pos % k == f {
                    test.push(i);
                } else {
                    train.push(i);
                }
            }
            test.sort_unstable();
            train.sort_unstable();
            FoldSplit { train, test }
        })
        .collect())
}

impl NestedSplitPlan {
    pub fn new(n: usize, folds: usize, inner_folds: usize, seed: u64) -> Result<Self> {
        let root = SeededRng::new(seed);
        let all: Vec<usize> = (0..n).collect();
        let outer = k_fold(&all, folds, &mut root.child("outer"))?;
        let inner = outer
            .iter()
            .enumerate()
            .map(|(f, split)| k_fold(&split.train, inner_folds, &mut root.child(&format!("inner-{f}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(NestedSplitPlan { outer, inner })
    }
}

/// Per-fold and mean regression scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub fold_mse: Vec<f64>,
    pub fold_cor: Vec<f64>,
    pub mean_mse: f64,
    pub mean_cor: f64,
    pub chosen_lambdas: Vec<f64>,
}

struct FoldOutcome {
    mse: f64,
    cor: f64,
    lambda: f64,
}

fn fit_and_score(
    data: &LabeledDataset,
    target: &[f64],
    split: &FoldSplit,
    params: &SvrParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let x_train = data.features().select_rows(&split.train);
    let y_train: Vec<f64> = split.train.iter().map(|&i| target[i]).collect();
    let model = svr_fit(&x_train, &y_train, params, seed)?;
    model.predict(&data.features().select_rows(&split.test))
}

fn fit_seed(root: &SeededRng, label: String) -> u64 {
    root.child(&label).seed()
}

/// Runs nested CV for one target on all features or on `feature_subset`.
pub fn nested_cv(
    dataset: &LabeledDataset,
    target_name: &str,
    feature_subset: Option<&[usize]>,
    config: &CvConfig,
) -> Result<CvReport> {
    config.validate()?;
    let target = dataset.target(target_name)?;
    let data = match feature_subset {
        Some(idx) => dataset.select_features(idx)?,
        None => dataset.clone(),
    };
    let plan = NestedSplitPlan::new(data.len(), config.folds, config.inner_folds, config.seed)?;
    let root = SeededRng::new(config.seed);
    let params_for = |lambda| SvrParams {
        lambda,
        epsilon: config.epsilon,
        epochs: config.svr_epochs,
    };

    let outcomes: Vec<FoldOutcome> = (0..config.folds)
        .into_par_iter()
        .map(|f| -> Result<FoldOutcome> {
            let mut best: Option<(f64, f64)> = None;
            for (li, &lambda) in config.lambda_grid.iter().enumerate() {
                let mut total = 0.0;
                for (ii, split) in plan.inner[f].iter().enumerate() {
                    let seed = fit_seed(&root, format!("fit-{f}-{ii}-{li}"));
                    let pred = fit_and_score(&data, target, split, &params_for(lambda), seed)?;
                    let actual: Vec<f64> = split.test.iter().map(|&i| target[i]).collect();
                    total += mean_squared_error(&pred, &actual)?;
                }
                let inner_mse = total / plan.inner[f].len() as f64;
                let better = match best {
                    None => true,
                    Some((mse, l)) => inner_mse < mse || (inner_mse == mse && lambda < l),
                };
                if better {
                    best = Some((inner_mse, lambda));
                }
            }
            let (_, lambda) = best.expect("grid is non-empty");
            let split = &plan.outer[f];
            let seed = fit_seed(&root, format!("fit-{f}-outer"));
            let pred = fit_and_score(&data, target, split, &params_for(lambda), seed)?;
            let actual: Vec<f64> = split.test.iter().map(|&i| target[i]).collect();
            Ok(FoldOutcome {
                mse: mean_squared_error(&pred, &actual)?,
                cor: correlation(&pred, &actual)?,
                lambda,
            })
        })
        .collect::<Result<_>>()?;

    let fold_mse: Vec<f64> = outcomes.iter().map(|o| o.mse).collect();
    let fold_cor: Vec<f64> = outcomes.iter().map(|o| o.cor).collect();
    let k = config.folds as f64;
    Ok(CvReport {
        mean_mse: fold_mse.iter().sum::<f64>() / k,
        mean_cor: fold_cor.iter().sum::<f64>() / k,
        fold_mse,
        fold_cor,
        chosen_lambdas: outcomes.iter().map(|o| o.lambda).collect(),
    })
}
