//! Adaptive spectral (AS) decompositions of piecewise-constant media on
//! uniform triangular FE meshes, with the subspace machinery needed to study
//! their L2 approximation error and to drive an iterated-subspace
//! deconvolution solver.
//!
//! Modules follow the pipeline: [`mesh`] and [`media`] define the geometry
//! and the medium, [`quadrature`] integrates against exact media, [`fem`]
//! assembles the weighted operator, [`eigen`] solves the generalized
//! eigenproblem, [`spectral`] builds the basis and its projections, and
//! [`inversion`] runs the deconvolution study. [`export`] writes CSV/VTK.

pub mod eigen;
pub mod error;
pub mod export;
pub mod fem;
pub mod inversion;
pub mod media;
pub mod mesh;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use fem::{WeightForm, WeightSpec};
pub use media::{FeFunction, Medium, RasterMedium, Shape};
pub use mesh::{Mesh, Point, Rect};
pub use spectral::{build_as_basis, SpectralBasis};
