//! Diffusion eigenbasis estimated from a sample of the null distribution.
//!
//! Given training points `y₁ … y_m` and a Gaussian kernel, the Markov matrix
//! `A = D⁻¹K` has real right eigenpairs `A ψᵢ = λᵢ ψᵢ` with `1 = λ₀ ≥ λ₁ ≥ …`.
//! They are obtained from the symmetric conjugate `S = D^{-1/2} K D^{-1/2}`:
//! if `S uᵢ = λᵢ uᵢ` then `ψᵢ = D^{-1/2} uᵢ`. Each `ψᵢ` is rescaled to
//! Euclidean norm `√m` and sign-fixed so that its entries sum to a
//! nonnegative number, which makes `ψ₀ ≡ 1`.
//!
//! Out-of-sample values come from the Nyström extension
//!
//! ```text
//! ψᵢ(x) = (1/λᵢ) Σⱼ [k(x, yⱼ) / Σₗ k(x, yₗ)] ψᵢ(yⱼ)
//! ```
//!
//! and the weight `ŝ(x) = Σⱼ k(x, yⱼ) / mean_degree` corrects for the
//! orthogonality measure of the basis differing from the null distribution.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, Par};
use rayon::prelude::*;

use crate::dataset::{Dataset, Point};
use crate::error::{config, Result, SstError};
use crate::kernel_space::{self, GramMatrix, KernelConfig};

/// Eigenvalues below this are refused by the Nyström extension.
pub const EIGENVALUE_FLOOR: f64 = 1e-8;

/// Row-stochastic matrix `A = D⁻¹K` together with the degrees `Dᵢᵢ`.
#[derive(Debug, Clone)]
pub struct MarkovMatrix {
    size: usize,
    transition: Vec<f64>,
    degree: Vec<f64>,
}

impl MarkovMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.transition[i * self.size..(i + 1) * self.size]
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }
}

/// Divides every row of a symmetric kernel matrix by its sum.
pub fn row_normalize(k: &GramMatrix) -> Result<MarkovMatrix> {
    if !k.is_square() {
        return config(format!("kernel matrix is {}×{}, not square", k.nrows(), k.ncols()));
    }
    let m = k.nrows();
    for i in 0..m {
        for j in 0..i {
            let (a, b) = (k.get(i, j), k.get(j, i));
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return config(format!("kernel matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    let degree: Vec<f64> = (0..m).map(|i| k.row(i).iter().sum()).collect();
    if let Some(i) = degree.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(SstError::Numerical(format!("row {i} of the kernel matrix sums to {}", degree[i])));
    }
    let mut transition = k.entries().to_vec();
    transition
        .par_chunks_mut(m)
        .zip(degree.par_iter())
        .for_each(|(row, d)| row.iter_mut().for_each(|v| *v /= d));
    Ok(MarkovMatrix { size: m, transition, degree })
}

/// Leading right eigenpairs of a Markov matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    /// `λ₀ ≥ λ₁ ≥ … ≥ λ_{I_max}`.
    pub eigenvalues: Vec<f64>,
    /// `(I_max + 1) × m`, row `i` is `ψᵢ(y₁), …, ψᵢ(y_m)`.
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Rescales `v` to norm `√m` and fixes its sign: the entries must sum to a
/// nonnegative value, and when the sum vanishes the first clearly nonzero
/// entry must be positive.
pub fn normalize_eigenvector(v: &mut [f64]) {
    let m = v.len() as f64;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        let scale = m.sqrt() / norm;
        v.iter_mut().for_each(|x| *x *= scale);
    }
    let sum: f64 = v.iter().sum();
    let abs_sum: f64 = v.iter().map(|x| x.abs()).sum();
    let flip = if sum.abs() > 1e-10 * abs_sum {
        sum < 0.0
    } else {
        let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        v.iter().find(|x| x.abs() > 1e-8 * max).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top `i_max + 1` right eigenpairs of `A`, computed through the symmetric
/// conjugate `S = D^{1/2} A D^{-1/2}`.
pub fn eigenbasis(markov: &MarkovMatrix, i_max: usize) -> Result<Eigenpairs> {
    let m = markov.size;
    if i_max == 0 || i_max >= m {
        return config(format!("cutoff I_max = {i_max} must satisfy 1 ≤ I_max < m = {m}"));
    }
    let sqrt_d: Vec<f64> = markov.degree.iter().map(|d| d.sqrt()).collect();
    // faer reads the lower triangle only.
    let s = Mat::from_fn(m, m, |i, j| {
        if i >= j {
            markov.get(i, j) * sqrt_d[i] / sqrt_d[j]
        } else {
            0.0
        }
    });

    let mut u = Mat::<f64>::zeros(m, m);
    let mut eig = Diag::<f64>::zeros(m);
    let par = Par::Seq;
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        m,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        s.as_ref(),
        eig.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|e| SstError::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;

    let mut eigenvalues = Vec::with_capacity(i_max + 1);
    let mut eigenvectors = Vec::with_capacity(i_max + 1);
    for k in 0..=i_max {
        // Ascending order from the solver.
        let col = m - 1 - k;
        eigenvalues.push(eig.column_vector()[col]);
        let mut psi: Vec<f64> = (0..m).map(|j| u[(j, col)] / sqrt_d[j]).collect();
        normalize_eigenvector(&mut psi);
        eigenvectors.push(psi);
    }

    let drift = eigenvectors[0].iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs()));
    if drift > 1e-6 || (eigenvalues[0] - 1.0).abs() > 1e-8 {
        return Err(SstError::Numerical(format!(
            "leading eigenvector is not constant (max deviation {drift:e}, λ₀ = {}); \
             the kernel graph is likely disconnected at this bandwidth",
            eigenvalues[0]
        )));
    }
    eigenvectors[0].iter_mut().for_each(|v| *v = 1.0);
    Ok(Eigenpairs { eigenvalues, eigenvectors })
}

/// A fitted diffusion basis: training points, kernel, leading eigenpairs and
/// the degree data needed for `ŝ`.
#[derive(Debug, Clone)]
pub struct DiffusionBasis {
    training: Arc<Dataset>,
    kernel: KernelConfig,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
    degree: Vec<f64>,
    mean_degree: f64,
    // m × (I_max + 1) copy of the eigenvector table for the evaluation loop.
    by_point: Vec<f64>,
}

impl PartialEq for DiffusionBasis {
    fn eq(&self, other: &Self) -> bool {
        self.training == other.training
            && self.kernel == other.kernel
            && self.eigenvalues == other.eigenvalues
            && self.eigenvectors == other.eigenvectors
            && self.degree == other.degree
    }
}

impl DiffusionBasis {
    /// Builds the Gram matrix of `training`, normalizes it and extracts the
    /// leading `i_max + 1` eigenpairs.
    pub fn fit(training: Arc<Dataset>, kernel: KernelConfig, i_max: usize) -> Result<Self> {
        let k = kernel_space::gram_matrix(&training, &training, &kernel)?;
        let markov = row_normalize(&k)?;
        let pairs = eigenbasis(&markov, i_max)?;
        Self::from_parts(training, kernel, pairs, markov.degree)
    }

    pub(crate) fn fit_from_sq_distances(
        training: Arc<Dataset>,
        kernel: KernelConfig,
        i_max: usize,
        d2: &[f64],
    ) -> Result<Self> {
        let m = training.len();
        let entries: Vec<f64> = d2.par_iter().map(|&d| kernel.from_sq_dist(d)).collect();
        let k = GramMatrix::from_entries(m, m, entries)?;
        let markov = row_normalize(&k)?;
        let pairs = eigenbasis(&markov, i_max)?;
        Self::from_parts(training, kernel, pairs, markov.degree)
    }

    /// Assembles a basis from stored parts (used when loading artifacts).
    pub fn from_parts(
        training: Arc<Dataset>,
        kernel: KernelConfig,
        pairs: Eigenpairs,
        degree: Vec<f64>,
    ) -> Result<Self> {
        let m = training.len();
        let Eigenpairs { eigenvalues, eigenvectors } = pairs;
        if eigenvalues.is_empty()
            || eigenvalues.len() != eigenvectors.len()
            || degree.len() != m
            || eigenvectors.iter().any(|v| v.len() != m)
        {
            return config("inconsistent basis dimensions");
        }
        let mean_degree = degree.iter().sum::<f64>() / m as f64;
        let width = eigenvalues.len();
        let mut by_point = vec![0.0; m * width];
        for (i, v) in eigenvectors.iter().enumerate() {
            for (j, x) in v.iter().enumerate() {
                by_point[j * width + i] = *x;
            }
        }
        Ok(Self { training, kernel, eigenvalues, eigenvectors, degree, mean_degree, by_point })
    }

    pub fn training(&self) -> &Arc<Dataset> {
        &self.training
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn i_max(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `ψᵢ(y₁), …, ψᵢ(y_m)`.
    pub fn eigenvector(&self, i: usize) -> &[f64] {
        &self.eigenvectors[i]
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// `(1/m) Σᵢ Σₗ k(yᵢ, yₗ)`, the denominator of `ŝ`.
    pub fn mean_degree(&self) -> f64 {
        self.mean_degree
    }

    /// Largest cutoff whose eigenvalues all clear [`EIGENVALUE_FLOOR`].
    pub fn usable_cutoff(&self) -> usize {
        self.eigenvalues
            .iter()
            .position(|&l| l < EIGENVALUE_FLOOR)
            .map_or(self.i_max(), |p| p.saturating_sub(1))
    }

    fn check_floor(&self, upto: usize) -> Result<()> {
        match self.eigenvalues[..=upto].iter().position(|&l| l < EIGENVALUE_FLOOR) {
            Some(index) => Err(SstError::DegenerateEigenvalue {
                index,
                value: self.eigenvalues[index],
                floor: EIGENVALUE_FLOOR,
            }),
            None => Ok(()),
        }
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.len() != self.training.dim() {
            return config(format!(
                "point has dimension {}, basis was built in dimension {}",
                x.len(),
                self.training.dim()
            ));
        }
        Ok(())
    }

    /// Nyström extension of every stored eigenvector to `x`.
    pub fn nystrom_extend(&self, x: &Point) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.check_floor(self.i_max())?;
        let d2 = self.sq_distances_to(x);
        let mut psi = vec![0.0; self.i_max() + 1];
        self.evaluate_from_sq_distances(&d2, self.i_max(), &mut psi);
        Ok(psi)
    }

    /// `ŝ(x) = Σⱼ k(x, yⱼ) / mean_degree`.
    pub fn s_hat(&self, x: &Point) -> Result<f64> {
        self.check_point(x)?;
        let num: f64 = self.training.rows().map(|y| self.kernel.from_sq_dist(kernel_space::sq_dist(x, y))).sum();
        Ok(num / self.mean_degree)
    }

    pub(crate) fn sq_distances_to(&self, x: &Point) -> Vec<f64> {
        self.training.rows().map(|y| kernel_space::sq_dist(x, y)).collect()
    }

    /// Core evaluation loop. Writes `ψ₀(x) … ψ_upto(x)` into `psi` and
    /// returns `ŝ(x)`. Weights are shifted by the nearest training point so
    /// the normalized weights stay finite when every kernel value underflows.
    pub(crate) fn evaluate_from_sq_distances(&self, d2: &[f64], upto: usize, psi: &mut [f64]) -> f64 {
        let width = self.eigenvalues.len();
        let d_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = -1.0 / self.kernel.bandwidth();
        let acc = &mut psi[..=upto];
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut total = 0.0;
        for (j, &d) in d2.iter().enumerate() {
            let w = ((d - d_min) * scale).exp();
            total += w;
            let row = &self.by_point[j * width..j * width + upto + 1];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += w * v;
            }
        }
        for (a, l) in acc.iter_mut().zip(&self.eigenvalues) {
            *a /= total * l;
        }
        (d_min * scale).exp() * total / self.mean_degree
    }
}

/// One basis per bandwidth, all sharing the same training points.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    training: Arc<Dataset>,
    bases: Vec<DiffusionBasis>,
}

impl BasisSet {
    /// Fits a basis for each kernel. Pairwise distances are computed once.
    pub fn fit(training: Arc<Dataset>, kernels: &[KernelConfig], i_max: usize) -> Result<Self> {
        if kernels.is_empty() {
            return config("at least one bandwidth is required");
        }
        let d2 = kernel_space::self_sq_distances(&training);
        let bases = kernels
            .iter()
            .map(|k| DiffusionBasis::fit_from_sq_distances(training.clone(), *k, i_max, &d2))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { training, bases })
    }

    pub fn from_bases(bases: Vec<DiffusionBasis>) -> Result<Self> {
        let Some(first) = bases.first() else {
            return config("empty basis set");
        };
        let training = first.training.clone();
        if bases.iter().any(|b| b.training != training) {
            return config("all bases in a set must share their training points");
        }
        Ok(Self { training, bases })
    }

    pub fn training(&self) -> &Arc<Dataset> {
        &self.training
    }

    pub fn bases(&self) -> &[DiffusionBasis] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// Coefficient vectors `θ̂₀ … θ̂_{upto[b]}` of `data` for every basis `b`.
    /// The distance from each data point to the training set is shared by
    /// all bandwidths.
    pub fn coefficients(&self, data: &Dataset, upto: &[usize]) -> Result<Vec<Vec<f64>>> {
        if data.is_empty() {
            return Err(SstError::Usage("cannot estimate coefficients from an empty sample".into()));
        }
        if data.dim() != self.training.dim() {
            return config(format!(
                "data has dimension {}, bases were built in dimension {}",
                data.dim(),
                self.training.dim()
            ));
        }
        assert_eq!(upto.len(), self.bases.len());
        for (b, &u) in self.bases.iter().zip(upto) {
            if u > b.i_max() {
                return config(format!("cutoff {u} exceeds basis I_max = {}", b.i_max()));
            }
            b.check_floor(u)?;
        }
        let mut sums: Vec<Vec<f64>> = upto.iter().map(|&u| vec![0.0; u + 1]).collect();
        let width = self.bases.iter().map(|b| b.i_max() + 1).max().unwrap_or(1);
        let mut psi = vec![0.0; width];
        let mut d2 = vec![0.0; self.training.len()];
        for x in data.rows() {
            for (o, y) in d2.iter_mut().zip(self.training.rows()) {
                *o = kernel_space::sq_dist(x, y);
            }
            for ((b, &u), sum) in self.bases.iter().zip(upto).zip(sums.iter_mut()) {
                let s = b.evaluate_from_sq_distances(&d2, u, &mut psi);
                for (acc, p) in sum.iter_mut().zip(&psi) {
                    *acc += p * s;
                }
            }
        }
        let n = data.len() as f64;
        for sum in &mut sums {
            sum.iter_mut().for_each(|v| *v /= n);
        }
        Ok(sums)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(points: &[f64]) -> Arc<Dataset> {
        Arc::new(Dataset::from_scalars(points).unwrap())
    }

    #[test]
    fn row_normalize_examples() {
        let k = GramMatrix::from_entries(1, 1, vec![1.0]).unwrap();
        let a = row_normalize(&k).unwrap();
        assert_eq!(a.row(0), &[1.0]);
        assert_eq!(a.degree(), &[1.0]);

        let e = (-1.0f64).exp();
        let k = GramMatrix::from_entries(2, 2, vec![1.0, e, e, 1.0]).unwrap();
        let a = row_normalize(&k).unwrap();
        assert_abs_diff_eq!(a.get(0, 1), e / (1.0 + e), epsilon = 1e-15);
        for i in 0..2 {
            assert_abs_diff_eq!(a.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn row_normalize_rejects_bad_input() {
        let k = GramMatrix::from_entries(1, 2, vec![1.0, 0.5]).unwrap();
        assert!(matches!(row_normalize(&k), Err(SstError::Config(_))));
        let k = GramMatrix::from_entries(2, 2, vec![1.0, 0.5, 0.2, 1.0]).unwrap();
        assert!(matches!(row_normalize(&k), Err(SstError::Config(_))));
        let k = GramMatrix::from_entries(2, 2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(row_normalize(&k), Err(SstError::Numerical(_))));
    }

    #[test]
    fn eigenbasis_rejects_bad_cutoff() {
        let b = DiffusionBasis::fit(line(&[0.0, 1.0, 2.0]), KernelConfig::new(1.0).unwrap(), 3);
        assert!(matches!(b, Err(SstError::Config(_))));
        let b = DiffusionBasis::fit(line(&[0.0, 1.0, 2.0]), KernelConfig::new(1.0).unwrap(), 0);
        assert!(matches!(b, Err(SstError::Config(_))));
    }

    #[test]
    fn leading_pair_is_constant() {
        let b = DiffusionBasis::fit(line(&[0.0, 0.3, 1.1, 2.0, 2.2]), KernelConfig::new(0.8).unwrap(), 3)
            .unwrap();
        assert_abs_diff_eq!(b.eigenvalues()[0], 1.0, epsilon = 1e-12);
        assert!(b.eigenvector(0).iter().all(|&v| v == 1.0));
        assert!(b.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        for i in 0..=3 {
            let norm2: f64 = b.eigenvector(i).iter().map(|v| v * v).sum();
            assert_abs_diff_eq!(norm2, 5.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn nystrom_examples() {
        let b = DiffusionBasis::fit(line(&[0.0, 1.0, 2.0]), KernelConfig::new(1.0).unwrap(), 2).unwrap();
        for j in 0..3 {
            let psi = b.nystrom_extend(&[j as f64]).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(psi[i], b.eigenvector(i)[j], epsilon = 1e-10);
            }
        }
        for x in [-3.0, 0.5, 7.0, 40.0] {
            assert_abs_diff_eq!(b.nystrom_extend(&[x]).unwrap()[0], 1.0, epsilon = 1e-12);
        }
        assert!(b.nystrom_extend(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn nystrom_refuses_tiny_eigenvalues() {
        // A very wide kernel on three points gives λ₂ far below the floor.
        let b = DiffusionBasis::fit(line(&[0.0, 1.0, 2.0]), KernelConfig::new(1e9).unwrap(), 2).unwrap();
        assert!(b.eigenvalues()[2] < EIGENVALUE_FLOOR);
        match b.nystrom_extend(&[0.5]) {
            Err(SstError::DegenerateEigenvalue { index, .. }) => assert!(index >= 1),
            other => panic!("expected degenerate eigenvalue error, got {other:?}"),
        }
        assert!(b.usable_cutoff() < 2);
    }

    #[test]
    fn s_hat_examples() {
        let b = DiffusionBasis::fit(line(&[0.0, 1.0]), KernelConfig::new(1.0).unwrap(), 1).unwrap();
        assert_abs_diff_eq!(b.s_hat(&[0.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.s_hat(&[1.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(b.s_hat(&[25.0]).unwrap() < 1e-100);
        // Training degrees all equal on a symmetric configuration.
        let b = DiffusionBasis::fit(line(&[-1.0, 1.0]), KernelConfig::new(2.0).unwrap(), 1).unwrap();
        assert_abs_diff_eq!(b.s_hat(&[-1.0]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn evaluation_loop_matches_public_api() {
        let b = DiffusionBasis::fit(line(&[0.0, 0.4, 1.3, 2.0, 2.5, 3.1]), KernelConfig::new(1.5).unwrap(), 4)
            .unwrap();
        let x = [1.7];
        let mut psi = vec![0.0; 5];
        let s = b.evaluate_from_sq_distances(&b.sq_distances_to(&x), 4, &mut psi);
        assert_abs_diff_eq!(s, b.s_hat(&x).unwrap(), epsilon = 1e-14);
        let direct = b.nystrom_extend(&x).unwrap();
        for (a, c) in psi.iter().zip(&direct) {
            assert_abs_diff_eq!(a, c, epsilon = 1e-14);
        }
    }

    #[test]
    fn normalize_handles_zero_sum() {
        let mut v = vec![-1.0, 1.0];
        normalize_eigenvector(&mut v);
        assert!(v[0] > 0.0);
        assert_abs_diff_eq!(v[0] * v[0] + v[1] * v[1], 2.0, epsilon = 1e-15);
        let mut v = vec![0.0, -3.0, 1.0];
        normalize_eigenvector(&mut v);
        assert!(v.iter().sum::<f64>() >= 0.0);
    }

    #[test]
    fn basis_set_matches_individual_fits() {
        let t = line(&[0.0, 0.4, 1.3, 2.0, 2.5]);
        let kernels = [KernelConfig::new(0.5).unwrap(), KernelConfig::new(2.0).unwrap()];
        let set = BasisSet::fit(t.clone(), &kernels, 3).unwrap();
        for (b, k) in set.bases().iter().zip(&kernels) {
            let single = DiffusionBasis::fit(t.clone(), *k, 3).unwrap();
            for (x, y) in b.eigenvalues().iter().zip(single.eigenvalues()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-14);
            }
        }
        let data = Dataset::from_scalars(&[0.1, 1.9]).unwrap();
        let theta = set.coefficients(&data, &[3, 2]).unwrap();
        assert_eq!(theta[0].len(), 4);
        assert_eq!(theta[1].len(), 3);
        assert!(set.coefficients(&Dataset::empty(1), &[3, 3]).is_err());
    }
}
