//! ROI time series to connectivity feature vectors.
//!
//! Edge order is the strict upper triangle in row-major pair order:
//! `(0,1), (0,2), …, (0,R-1), (1,2), …, (R-2,R-1)` (0-based). Feature index
//! `k` of every ingested dataset refers to this order.

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::SeededRng;

/// `T × R` table: one row per timepoint, one column per ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    values: DenseMatrix,
    roi_names: Vec<String>,
}

impl TimeSeriesTable {
    pub fn new(values: DenseMatrix, roi_names: Vec<String>) -> Result<Self> {
        check_len(values.cols(), roi_names.len())?;
        if values.rows() < 3 {
            return Err(Error::input(format!(
                "time series needs at least 3 timepoints, got {}",
                values.rows()
            )));
        }
        if values.cols() < 2 {
            return Err(Error::input("time series needs at least 2 ROIs"));
        }
        Ok(TimeSeriesTable { values, roi_names })
    }

    /// Table with ROI names `roi0, roi1, …`.
    pub fn unnamed(values: DenseMatrix) -> Result<Self> {
        let names = (0..values.cols()).map(|j| format!("roi{j}")).collect();
        TimeSeriesTable::new(values, names)
    }

    pub fn timepoints(&self) -> usize {
        self.values.rows()
    }

    pub fn rois(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn roi_names(&self) -> &[String] {
        &self.roi_names
    }
}

/// Strict upper triangle of a connectivity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityVector {
    pub values: Vec<f64>,
    pub roi_count: usize,
}

/// Position of pair `(i, j)`, `i < j`, in the vectorized upper triangle.
pub fn pair_index(i: usize, j: usize, rois: usize) -> usize {
    debug_assert!(i < j && j < rois);
    i * (2 * rois - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_of(k: usize, rois: usize) -> (usize, usize) {
    let mut start = 0;
    for i in 0..rois - 1 {
        let row_len = rois - i - 1;
        if k < start + row_len {
            return (i, i + 1 + (k - start));
        }
        start += row_len;
    }
    panic!("pair index {k} out of range for {rois} ROIs");
}

/// Pearson correlation between every pair of ROI columns.
///
/// The result is symmetric with an exact unit diagonal. A column with zero
/// variance is an error naming that column.
pub fn pearson_connectivity(ts: &TimeSeriesTable) -> Result<DenseMatrix> {
    let t = ts.timepoints();
    let r = ts.rois();
    let mut centered = Vec::with_capacity(r);
    for c in 0..r {
        let col = ts.values.column(c);
        let m = col.iter().sum::<f64>() / t as f64;
        let dev: Vec<f64> = col.iter().map(|v| v - m).collect();
        let ss: f64 = dev.iter().map(|v| v * v).sum();
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // rounding in the mean leaves ~eps*|x| residue on constant columns
        if ss <= t as f64 * (1e-12 * (1.0 + scale)).powi(2) {
            return Err(Error::DegenerateSignal(format!(
                "ROI column {c} ({}) has zero variance",
                ts.roi_names[c]
            )));
        }
        let norm = ss.sqrt();
        centered.push(dev.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    let mut m = DenseMatrix::zeros(r, r);
    let vals = m.values_mut();
    for i in 0..r {
        vals[i * r + i] = 1.0;
        for j in i + 1..r {
            let c: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let c = c.clamp(-1.0, 1.0);
            vals[i * r + j] = c;
            vals[j * r + i] = c;
        }
    }
    Ok(m)
}

/// Flattens the strict upper triangle in row-major pair order.
pub fn vectorize_upper(m: &DenseMatrix) -> Result<ConnectivityVector> {
    if m.rows() != m.cols() {
        return Err(Error::Dimension {
            expected: m.rows(),
            got: m.cols(),
        });
    }
    let r = m.rows();
    if r < 2 {
        return Err(Error::input("connectivity matrix needs at least 2 ROIs"));
    }
    let mut values = Vec::with_capacity(r * (r - 1) / 2);
    for i in 0..r {
        values.extend_from_slice(&m.row(i)[i + 1..]);
    }
    Ok(ConnectivityVector {
        values,
        roi_count: r,
    })
}

/// Symmetric matrix with unit diagonal rebuilt from its upper triangle.
pub fn matricize(v: &ConnectivityVector) -> Result<DenseMatrix> {
    let r = v.roi_count;
    check_len(r * r.saturating_sub(1) / 2, v.values.len())?;
    let mut m = DenseMatrix::zeros(r, r);
    let vals = m.values_mut();
    let mut k = 0;
    for i in 0..r {
        vals[i * r + i] = 1.0;
        for j in i + 1..r {
            vals[i * r + j] = v.values[k];
            vals[j * r + i] = v.values[k];
            k += 1;
        }
    }
    Ok(m)
}

/// Moving-block bootstrap over timepoints.
///
/// Each copy concatenates contiguous blocks of `block_len` timepoints with
/// uniformly drawn start positions until `T` timepoints are collected (the
/// last block is truncated), then computes the connectivity vector. This
/// stands in for voxel-level resampling, which needs data below ROI level.
pub fn bootstrap_connectivity(
    ts: &TimeSeriesTable,
    copies: usize,
    block_len: usize,
    rng: &mut SeededRng,
) -> Result<Vec<ConnectivityVector>> {
    let t = ts.timepoints();
    if copies == 0 {
        return Err(Error::input("copies must be >= 1"));
    }
    if block_len < 2 {
        return Err(Error::input(format!("block_len must be >= 2, got {block_len}")));
    }
    if block_len > t {
        return Err(Error::input(format!(
            "block_len {block_len} exceeds the {t} available timepoints"
        )));
    }
    let mut out = Vec::with_capacity(copies);
    for _ in 0..copies {
        let mut rows = Vec::with_capacity(t + block_len);
        while rows.len() < t {
            let start = rng.below(t - block_len + 1);
            rows.extend(start..start + block_len);
        }
        rows.truncate(t);
        let resampled = TimeSeriesTable {
            values: ts.values.select_rows(&rows),
            roi_names: ts.roi_names.clone(),
        };
        out.push(vectorize_upper(&pearson_connectivity(&resampled)?)?);
    }
    Ok(out)
}
