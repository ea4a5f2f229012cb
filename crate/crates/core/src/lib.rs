//! Numerical toolkit for conformal metrics `g = e^{2u} (dx² + dy²)` on planar
//! domains.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`]: masked uniform grids, scalar fields, quadrature, the 5-point
//!   Laplacian and blowup rescaling.
//! * [`norms`]: `L^p`, weak `L^{2,∞}`, mean oscillation and John-Nirenberg radii.
//! * [`pde`]: Dirichlet Poisson solver, harmonic/zero-trace decomposition,
//!   Gauss curvature, exponential integrability and cutoff extension.
//! * [`metric`]: conformal lengths, geodesic distances on a dense stencil
//!   graph, balls, volumes, diameters and annulus neck reports.
//! * [`gh`]: finite metric spaces and Gromov-Hausdorff distance.
//! * [`analysis`]: metric families and sequence-level diagnostics (bubbles,
//!   atoms, collapse, JN floor, linear blowups, Möbius renormalization, sphere
//!   atlases).

pub mod analysis;
pub mod config;
pub mod error;
pub mod field;
pub mod geom;
pub mod gh;
pub mod metric;
pub mod norms;
pub mod pde;

pub use config::Constants;
pub use error::{Error, Result};
pub use field::{Grid, Region, ScalarField};
pub use geom::Point;
pub use gh::FiniteMetricSpace;
pub use metric::{ConformalMetric, NeckReport};
