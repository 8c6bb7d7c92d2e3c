//! Spectral smooth goodness-of-fit tests.
//!
//! A smooth test expands the density ratio `h = dF/dF₀` of the data law
//! against the null in an orthogonal basis and checks that every
//! coefficient beyond the constant vanishes. Here the basis is the leading
//! eigenvectors of a diffusion operator built from a sample of `F₀`, so the
//! null only needs to be something you can sample from, in any dimension.
//!
//! The pieces, in pipeline order:
//!
//! - [`kernel_space`]: Gaussian kernel, Gram matrices, the bandwidth grid.
//! - [`diffusion_basis`]: Markov matrix, eigenbasis, Nyström extension, `ŝ`.
//! - [`smooth_test`]: coefficients, `T_λ`, the combined `T_SST`, two-stage
//!   Monte Carlo calibration, the density ratio.
//! - [`null_models`]: scenario samplers, the bootstrap null, KS and AD.
//! - [`harness`]: power and robustness studies with CSV/SVG/JSON reports.
//! - [`mnist`]: IDX parsing and density-ratio ranking of images.
//! - [`artifact`]: saving fitted bases and calibrations.
//!
//! ```
//! use sst::null_models::{Family, NullSampler, ScenarioSpec};
//! use sst::rng::{stream, Purpose};
//! use sst::smooth_test::{run_sst, SstConfig};
//!
//! let null = ScenarioSpec::null(Family::NormalMean);
//! let data = null.sample(40, &mut stream(3, Purpose::Replicate, 0, 0))?;
//! let cfg = SstConfig { m: 150, b1: 120, b2: 120, cutoffs: vec![1, 2], ..SstConfig::default() };
//! let result = run_sst(&data, &null, &cfg)?;
//! assert!((0.0..=1.0).contains(&result.p_value));
//! # Ok::<(), sst::SstError>(())
//! ```
//!
//! The guide in `book/` walks through each step with runnable examples.

pub mod artifact;
pub mod dataset;
pub mod diffusion_basis;
pub mod error;
pub mod harness;
pub mod kernel_space;
pub mod mnist;
pub mod null_models;
pub mod rng;

pub use dataset::{Dataset, Point};
pub use error::{Result, SstError};

// Every chapter of the guide is compiled and run as a doctest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/diffusion-basis.md")]
    mod diffusion_basis {}
    #[doc = include_str!("../../../book/src/smooth-test.md")]
    mod smooth_test {}
    #[doc = include_str!("../../../book/src/null-models.md")]
    mod null_models {}
    #[doc = include_str!("../../../book/src/power-studies.md")]
    mod power_studies {}
    #[doc = include_str!("../../../book/src/mnist.md")]
    mod mnist {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
