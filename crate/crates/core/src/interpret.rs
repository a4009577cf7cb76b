//! Decision-boundary projection, explanations and importance rankings.
//!
//! In the feature domain the classifier is the hyperplane `<w, z> + b = 0`.
//! A point is explained by its displacement from its orthogonal projection
//! onto that hyperplane, mapped back through the inverse transform, and each
//! input coordinate's importance is that displacement weighted by the local
//! gradient of the logit.

use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, dot_unchecked};
use crate::net::InvNetModel;

/// Hyperplane `{z : <w, z> + b = 0}` with `w != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBoundary {
    w: Vec<f64>,
    b: f64,
    w_norm_sq: f64,
}

impl LinearBoundary {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::input("boundary normal must be non-empty"));
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary parameters".into()));
        }
        let w_norm_sq = dot_unchecked(&w, &w);
        if w_norm_sq == 0.0 {
            return Err(Error::DegenerateBoundary);
        }
        Ok(LinearBoundary { w, b, w_norm_sq })
    }

    /// The classifier hyperplane of a model's feature domain.
    pub fn of_model(model: &InvNetModel) -> Result<Self> {
        LinearBoundary::new(model.weights().to_vec(), model.bias())
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.w, x)? + self.b)
    }

    /// Orthogonal projection onto the hyperplane:
    /// `x - <ŵ, x> ŵ - b w / ||w||²` with `ŵ = w / ||w||`, evaluated as
    /// `x - ((<w, x> + b) / ||w||²) w`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let step = self.score(x)? / self.w_norm_sq;
        Ok(x.iter().zip(&self.w).map(|(xi, wi)| xi - step * wi).collect())
    }
}

/// Free-function form of [`LinearBoundary::project`].
pub fn project_to_boundary(boundary: &LinearBoundary, x: &[f64]) -> Result<Vec<f64>> {
    boundary.project(x)
}

/// A sample, its boundary projection and the derived attributions, all in
/// input-domain coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub x: Vec<f64>,
    pub x_p: Vec<f64>,
    /// `x - x_p`.
    pub explanation: Vec<f64>,
    /// `|gradient ⊗ (x - x_p)|`.
    pub importance: Vec<f64>,
}

impl Explanation {
    fn from_parts(x: &[f64], x_p: Vec<f64>, gradient: &[f64]) -> Explanation {
        let explanation: Vec<f64> = x.iter().zip(&x_p).map(|(a, b)| a - b).collect();
        let importance = explanation
            .iter()
            .zip(gradient)
            .map(|(e, g)| (e * g).abs())
            .collect();
        Explanation {
            x: x.to_vec(),
            x_p,
            explanation,
            importance,
        }
    }
}

/// Explanation for a plain linear classifier; the gradient is `w` itself.
pub fn explain_linear(boundary: &LinearBoundary, x: &[f64]) -> Result<Explanation> {
    let x_p = boundary.project(x)?;
    Ok(Explanation::from_parts(x, x_p, boundary.w()))
}

/// Explanation through an invertible network: project `T(x)` in the feature
/// domain and map the projection back with `T⁻¹`. The importance weights use
/// the logit gradient at `x`.
///
/// For odd input dimensions the padding coordinate of `T⁻¹(X_p)` is dropped,
/// so `logit(x_p) = 0` holds only up to that truncation.
pub fn explain_network(model: &InvNetModel, x: &[f64]) -> Result<Explanation> {
    let boundary = LinearBoundary::of_model(model)?;
    let z = model.transform(x)?;
    let z_p = boundary.project(&z)?;
    let x_p = model.inverse_transform(&z_p)?;
    let gradient = model.input_gradient(x)?;
    Ok(Explanation::from_parts(x, x_p, &gradient))
}

/// Explains every sample of a dataset, in row order. Runs in parallel.
pub fn explain_dataset(model: &InvNetModel, dataset: &LabeledDataset) -> Result<Vec<Explanation>> {
    check_len(model.input_dim(), dataset.dim())?;
    LinearBoundary::of_model(model)?;
    (0..dataset.len())
        .into_par_iter()
        .map(|i| explain_network(model, dataset.features().row(i)))
        .collect()
}

/// Dataset-mean importance and the induced feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRanking {
    pub mean_importance: Vec<f64>,
    /// Feature indices by descending mean importance, ties by ascending index.
    pub order: Vec<usize>,
}

impl ImportanceRanking {
    pub fn from_scores(mean_importance: Vec<f64>) -> Result<Self> {
        if mean_importance.is_empty() {
            return Err(Error::input("ranking needs at least one feature"));
        }
        if mean_importance.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::input("importance scores must be finite and >= 0"));
        }
        let mut order: Vec<usize> = (0..mean_importance.len()).collect();
        order.sort_by(|&a, &b| {
            mean_importance[b]
                .total_cmp(&mean_importance[a])
                .then(a.cmp(&b))
        });
        Ok(ImportanceRanking {
            mean_importance,
            order,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean_importance.len()
    }

    /// 1-based rank of each feature.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (pos, &j) in self.order.iter().enumerate() {
            ranks[j] = pos + 1;
        }
        ranks
    }
}

/// Mean of per-sample importance vectors over the whole dataset, both classes
/// pooled. The sum is taken in row order whatever the thread count.
pub fn mean_importance(model: &InvNetModel, dataset: &LabeledDataset) -> Result<ImportanceRanking> {
    if dataset.is_empty() {
        return Err(Error::input("cannot rank features on an empty dataset"));
    }
    mean_of_explanations(&explain_dataset(model, dataset)?)
}

/// Ranking from already computed explanations, summed in slice order.
pub fn mean_of_explanations(explanations: &[Explanation]) -> Result<ImportanceRanking> {
    if explanations.is_empty() {
        return Err(Error::input("cannot rank features without explanations"));
    }
    let d = explanations[0].importance.len();
    let mut sum = vec![0.0; d];
    for e in explanations {
        for (s, v) in sum.iter_mut().zip(&e.importance) {
            *s += v;
        }
    }
    let n = explanations.len() as f64;
    let mean = sum.into_iter().map(|s| s / n).collect();
    ImportanceRanking::from_scores(mean)
}

/// First `ceil(fraction · d)` features of the ranking.
pub fn select_top(ranking: &ImportanceRanking, fraction: f64) -> Result<Vec<usize>> {
    let count = top_count(ranking.dim(), fraction)?;
    Ok(ranking.order[..count].to_vec())
}

/// `ceil(fraction · d)` for `fraction` in `(0, 1]`, robust to the product
/// landing one ulp above an integer.
pub fn top_count(d: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::input(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let count = (fraction * d as f64 - 1e-9).ceil() as usize;
    Ok(count.clamp(1, d))
}

/// Axis-aligned rectangle in a 2-D feature domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    /// Smallest box containing the points, grown by `margin` times its size.
    pub fn around(points: &[[f64; 2]], margin: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("no points to bound"));
        }
        let mut b = BoundingBox {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in points {
            b.x_min = b.x_min.min(p[0]);
            b.x_max = b.x_max.max(p[0]);
            b.y_min = b.y_min.min(p[1]);
            b.y_max = b.y_max.max(p[1]);
        }
        let dx = (b.x_max - b.x_min).max(1e-9) * margin;
        let dy = (b.y_max - b.y_min).max(1e-9) * margin;
        b.x_min -= dx;
        b.x_max += dx;
        b.y_min -= dy;
        b.y_max += dy;
        Ok(b)
    }
}

fn require_planar(model: &InvNetModel) -> Result<()> {
    if model.input_dim() != 2 {
        return Err(Error::UnsupportedDimension {
            got: model.input_dim(),
            what: "boundary curves are only drawn for 2-D inputs",
        });
    }
    Ok(())
}

/// End points of the feature-domain boundary line clipped to `bbox`.
pub fn boundary_segment(model: &InvNetModel, bbox: &BoundingBox) -> Result<[[f64; 2]; 2]> {
    require_planar(model)?;
    let boundary = LinearBoundary::of_model(model)?;
    let (w, b) = (boundary.w(), boundary.b());
    let origin = boundary.project(&[0.0, 0.0])?;
    let dir = [-w[1], w[0]];
    let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (axis, lo, hi) in [(0, bbox.x_min, bbox.x_max), (1, bbox.y_min, bbox.y_max)] {
        if dir[axis] == 0.0 {
            if origin[axis] < lo || origin[axis] > hi {
                t_hi = f64::NEG_INFINITY;
            }
            continue;
        }
        let a = (lo - origin[axis]) / dir[axis];
        let c = (hi - origin[axis]) / dir[axis];
        t_lo = t_lo.max(a.min(c));
        t_hi = t_hi.min(a.max(c));
    }
    if t_lo >= t_hi {
        return Err(Error::input(format!(
            "decision boundary {}·z0 + {}·z1 + {} = 0 does not cross the plotting box",
            w[0], w[1], b
        )));
    }
    let at = |t: f64| [origin[0] + t * dir[0], origin[1] + t * dir[1]];
    Ok([at(t_lo), at(t_hi)])
}

/// Samples `samples` evenly spaced points of the feature-domain boundary line
/// inside `bbox` and maps them to the input domain, tracing the boundary
/// curve there.
pub fn invert_boundary_curve(model: &InvNetModel, samples: usize, bbox: &BoundingBox) -> Result<Vec<Vec<f64>>> {
    require_planar(model)?;
    if samples < 2 {
        return Err(Error::input("need at least 2 boundary samples"));
    }
    let [p, q] = boundary_segment(model, bbox)?;
    (0..samples)
        .map(|i| {
            let s = i as f64 / (samples - 1) as f64;
            let z = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            model.inverse_transform(&z)
        })
        .collect()
}
