//! Distances, Gaussian kernels, Gram matrices and the quantile-based
//! bandwidth grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Point};
use crate::error::{config, Result, SstError};

/// Gaussian kernel `k(a, b) = exp(-‖a - b‖² / ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return config(format!("bandwidth must be positive and finite, got {bandwidth}"));
        }
        Ok(Self { bandwidth })
    }

    /// The bandwidth ε, in units of squared distance.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel value for a precomputed squared distance.
    #[inline]
    pub fn from_sq_dist(&self, d2: f64) -> f64 {
        (-d2 / self.bandwidth).exp()
    }
}

/// `Σₖ (aₖ − bₖ)²`.
pub fn squared_euclidean(a: &Point, b: &Point) -> Result<f64> {
    if a.len() != b.len() {
        return config(format!("dimension mismatch: {} vs {}", a.len(), b.len()));
    }
    Ok(sq_dist(a, b))
}

/// Unchecked squared distance for hot loops; callers guarantee equal length.
#[inline]
pub(crate) fn sq_dist(a: &Point, b: &Point) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn gaussian_kernel(a: &Point, b: &Point, cfg: &KernelConfig) -> Result<f64> {
    Ok(cfg.from_sq_dist(squared_euclidean(a, b)?))
}

/// Dense kernel matrix between two point sets, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.ncols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Builds a matrix from raw row-major entries. Used for tests and for
    /// feeding externally computed kernels into [`crate::diffusion_basis::row_normalize`].
    pub fn from_entries(nrows: usize, ncols: usize, entries: Vec<f64>) -> Result<Self> {
        if nrows == 0 || ncols == 0 || entries.len() != nrows * ncols {
            return config(format!(
                "{} entries do not form a {nrows}×{ncols} matrix",
                entries.len()
            ));
        }
        Ok(Self { nrows, ncols, entries })
    }
}

/// `K[i][j] = k(rows[i], cols[j])`. Rows are filled in parallel; each entry
/// is computed the same way regardless of scheduling.
pub fn gram_matrix(rows: &Dataset, cols: &Dataset, cfg: &KernelConfig) -> Result<GramMatrix> {
    if rows.is_empty() || cols.is_empty() {
        return config("Gram matrix needs nonempty point sets");
    }
    if rows.dim() != cols.dim() {
        return config(format!(
            "dimension mismatch: {} vs {}",
            rows.dim(),
            cols.dim()
        ));
    }
    let ncols = cols.len();
    let mut entries = vec![0.0; rows.len() * ncols];
    entries
        .par_chunks_mut(ncols)
        .zip(rows.rows().collect::<Vec<_>>())
        .for_each(|(out, x)| {
            for (o, y) in out.iter_mut().zip(cols.rows()) {
                *o = cfg.from_sq_dist(sq_dist(x, y));
            }
        });
    Ok(GramMatrix { nrows: rows.len(), ncols, entries })
}

/// Symmetric matrix of squared distances within one dataset, row-major.
pub(crate) fn self_sq_distances(points: &Dataset) -> Vec<f64> {
    let m = points.len();
    let mut d2 = vec![0.0; m * m];
    d2.par_chunks_mut(m).enumerate().for_each(|(i, out)| {
        let x = points.row(i);
        for (o, y) in out.iter_mut().zip(points.rows()) {
            *o = sq_dist(x, y);
        }
    });
    d2
}

/// Which quantile the paper-style label "q_{0.833%}" denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileReading {
    /// The 5/6 quantile, continuing 1/6, 2/6, 3/6, 4/6.
    #[default]
    FiveSixths,
    /// The literal 0.833% quantile.
    Literal,
}

impl QuantileReading {
    pub fn base_level(self) -> f64 {
        match self {
            QuantileReading::FiveSixths => 5.0 / 6.0,
            QuantileReading::Literal => 0.00833,
        }
    }
}

/// Recipe for [`bandwidth_grid`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default)]
    pub reading: QuantileReading,
}

/// Linear interpolation between order statistics of a sorted sample
/// (the "type 7" estimator).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// All `m(m−1)/2` unordered pairwise squared distances, sorted ascending.
pub fn pairwise_sq_distances_sorted(points: &Dataset) -> Vec<f64> {
    let m = points.len();
    let mut out: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = points.row(i);
            (i + 1..m).map(move |j| sq_dist(x, points.row(j)))
        })
        .collect();
    out.par_sort_unstable_by(f64::total_cmp);
    out
}

/// Ten bandwidths: the 1/6, 2/6, 3/6 and 4/6 quantiles of the pairwise
/// squared distances of `reference`, then 1×…6× the base quantile chosen by
/// `spec.reading`.
pub fn bandwidth_grid(reference: &Dataset, spec: &GridSpec) -> Result<Vec<KernelConfig>> {
    if reference.len() < 2 {
        return config("bandwidth grid needs at least two reference points");
    }
    let d2 = pairwise_sq_distances_sorted(reference);
    let base = quantile_sorted(&d2, spec.reading.base_level());
    let mut levels: Vec<f64> = (1..=4).map(|k| quantile_sorted(&d2, k as f64 / 6.0)).collect();
    levels.extend((1..=6).map(|k| k as f64 * base));
    if levels.iter().any(|&q| q <= 0.0) {
        return Err(SstError::Calibration(
            "degenerate reference sample: a squared-distance quantile is zero".into(),
        ));
    }
    levels.into_iter().map(KernelConfig::new).collect()
}
