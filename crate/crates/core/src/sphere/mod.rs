//! Isotropic Gaussian fields on the sphere, their Hermite subordination and
//! the Gaussian approximation of normalized frequency components.

pub mod ensemble;
pub mod field;
pub mod harmonics;

pub use ensemble::{
    legendre_covariance, normalized_components, sphere_clt_diagnostics, SphereConfig, SphereEnsemble, SphereReport,
    PROBE_POINTS,
};
pub use field::{
    field_variance_summary, frequency_component, simulate_field, subordinate, ComponentAnalyzer, FieldSample,
    FieldSimulator, PowerSpectrum, SphereGrid, SubordinatedField,
};
pub use harmonics::{gauss_legendre, legendre, real_sph_harm};
