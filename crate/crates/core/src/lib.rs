//! Numerical laboratory for Gaussian approximation of vectors of multiple
//! Wiener–Itô integrals: exact kernel algebra and moment formulas, two
//! independent samplers, probability-metric estimators, a diagnostics
//! battery over kernel families, and an isotropic-sphere application.

pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod moments;
pub mod rng;
pub mod sampler;
pub mod sphere;

pub use error::{Error, Result};
pub use kernel::{contract, contraction_profile, inner, symmetrize, GeneralTensor, SymmetricKernel};
pub use moments::{
    covariance_matrix, fourth_cumulant, fourth_moment, malliavin_variance, multiply, ChaosDecomposition,
    ChaosVectorSpec,
};
pub use sampler::{sample_batch, sample_gaussian_surrogate, Companions, SampleBatch, SampleMatrix};
