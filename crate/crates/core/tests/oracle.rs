mod common;

use common::{explicit_markov, max_abs_diff, oracle_eigenpairs, random_case};
use sst::diffusion_basis::{eigenbasis, row_normalize};
use sst::kernel_space::{gram_matrix, KernelConfig};

#[test]
fn eigenbasis_matches_dense_nonsymmetric_solver() {
    for seed in 0..25 {
        let (data, eps) = random_case(seed, (5, 50), 3);
        let i_max = (data.len() - 1).min(8);
        let kernel = KernelConfig::new(eps).unwrap();
        let markov = row_normalize(&gram_matrix(&data, &data, &kernel).unwrap()).unwrap();
        let ours = eigenbasis(&markov, i_max).unwrap();
        let (values, vectors) = oracle_eigenpairs(&explicit_markov(&data, eps), i_max + 1);
        assert!(
            max_abs_diff(&ours.eigenvalues, &values) < 1e-8,
            "seed {seed}: {:?} vs {values:?}",
            ours.eigenvalues
        );
        for i in 0..=i_max {
            let err = max_abs_diff(&ours.eigenvectors[i], &vectors[i]);
            assert!(err < 1e-6, "seed {seed}, ψ{i}: max deviation {err:e}");
        }
    }
}

#[test]
fn markov_matrix_matches_explicit_construction() {
    let (data, eps) = random_case(99, (30, 30), 2);
    let kernel = KernelConfig::new(eps).unwrap();
    let markov = row_normalize(&gram_matrix(&data, &data, &kernel).unwrap()).unwrap();
    let a = explicit_markov(&data, eps);
    for i in 0..data.len() {
        for j in 0..data.len() {
            assert!((markov.get(i, j) - a[(i, j)]).abs() < 1e-14);
        }
    }
}
