//! Periodic torus `[-1, 1)^d`: grids, sampled fields, spectral operators,
//! periodic convolution and the Galerkin eigenbasis.

pub mod basis;
pub mod field;
pub mod grid;
pub mod spectral;

pub use basis::{eigenmodes, project_modes, BasisMode, GalerkinBasis, ModeKind};
pub use field::{neumaier_sum, Field};
pub use grid::TorusGrid;
pub use spectral::{
    convolve, convolve_with_spectrum, dealias, divergence, divergence_tensor, from_spectral, gradient,
    gradient_components, inv_laplacian, laplacian, lp_norm, mean, sym_gradient, to_spectral, SpectralField,
};
