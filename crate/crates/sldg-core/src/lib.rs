//! Semi-Lagrangian discontinuous Galerkin transport schemes on uniform
//! periodic Cartesian meshes: a 1D characteristic-Galerkin scheme, a 2D
//! Strang-split scheme on tensor spaces, a non-splitting 2D scheme with
//! upstream-cell geometry, LDG Poisson solvers, and the coupled nonlinear
//! drivers (Vlasov-Poisson, guiding center, incompressible Euler).

pub mod basis;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod models;
pub mod nonsplit2d;
pub mod poisson;
pub mod sldg1d;
pub mod split2d;
pub mod trace;

pub use error::{Result, SldgError};
pub use mesh::{CellLocation, CellLocation2D, Mesh1D, Mesh2D};
