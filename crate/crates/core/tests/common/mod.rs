//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sst::Dataset;

/// Explicit `A = D⁻¹K` for a Gaussian kernel, built without the library.
pub fn explicit_markov(data: &Dataset, eps: f64) -> DMatrix<f64> {
    let m = data.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let d2: f64 = data.row(i).iter().zip(data.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            k[(i, j)] = (-d2 / eps).exp();
        }
    }
    for i in 0..m {
        let s: f64 = k.row(i).sum();
        for j in 0..m {
            k[(i, j)] /= s;
        }
    }
    k
}

/// Eigenvalues of the non-symmetric `A` from a real Schur form, descending,
/// and eigenvectors from inverse iteration on the LU factors of `A − σI`.
pub fn oracle_eigenpairs(a: &DMatrix<f64>, count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = a.nrows();
    // A is similar to a symmetric matrix, so its spectrum is real; rounding can
    // still pair up clustered eigenvalues near zero into complex conjugates.
    let mut values: Vec<f64> = a.clone().schur().complex_eigenvalues().iter().map(|z| z.re).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values.truncate(count);

    let vectors = values
        .iter()
        .map(|&lambda| {
            let shift = lambda + 1e-10 * lambda.abs().max(1e-3);
            let lu = (a - DMatrix::identity(m, m) * shift).lu();
            let mut x = DVector::from_fn(m, |i, _| 1.0 + 0.01 * ((i * 7919) % 13) as f64);
            for _ in 0..4 {
                x = lu.solve(&x).expect("shifted matrix is invertible");
                x /= x.norm();
            }
            let mut v: Vec<f64> = x.iter().copied().collect();
            normalize(&mut v);
            v
        })
        .collect();
    (values, vectors)
}

/// Norm `√m`, then the sign convention: nonnegative sum, or a positive first
/// clearly nonzero entry when the sum vanishes.
pub fn normalize(v: &mut [f64]) {
    let m = v.len() as f64;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x *= m.sqrt() / norm);
    let sum: f64 = v.iter().sum();
    let abs: f64 = v.iter().map(|x| x.abs()).sum();
    let negative = if sum.abs() > 1e-10 * abs {
        sum < 0.0
    } else {
        let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        v.iter().find(|x| x.abs() > 1e-8 * max).is_some_and(|x| *x < 0.0)
    };
    if negative {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Random dataset of `m` points in `d` dimensions with a median-distance
/// bandwidth, which keeps the kernel graph connected.
pub fn random_case(seed: u64, m_range: (usize, usize), d_max: usize) -> (Dataset, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(m_range.0..=m_range.1);
    let d = rng.random_range(1..=d_max);
    let values: Vec<f64> = (0..m * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let data = Dataset::from_flat(d, values).unwrap();
    let mut d2 = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            d2.push(data.row(i).iter().zip(data.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        }
    }
    d2.sort_by(f64::total_cmp);
    (data, d2[d2.len() / 2])
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}
