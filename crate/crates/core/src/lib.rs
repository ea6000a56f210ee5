//! Monge optimal transport on surfaces, solved on a narrowband of a
//! uniform Cartesian grid.
//!
//! The surface problem is lifted to a tubular neighborhood `T_ε` of the
//! surface: densities are extended by `ρ(P_Γ z)·J(z)/(2ε)`, the surface
//! cost is extended by a penalty on the difference of signed distances,
//! and the resulting Monge–Ampère type equation is discretized with plain
//! centered differences on the lattice points inside `T_ε`. Out-of-band
//! stencil points are closed by interpolating the potential at their
//! closest points on the surface.
//!
//! Module map:
//!
//! - [`geometry`]: analytic surfaces and narrowband grid construction.
//! - [`density`]: surface density presets, their volumetric extension and
//!   surface quadrature.
//! - [`cost`]: extended costs, gradient-to-map solvers and mixed Hessians.
//! - [`fd`]: finite-difference kernels, interpolation, closure and the
//!   residual operator.
//! - [`solver`]: the accelerated pseudo-time iteration.
//! - [`validate`]: analytic solutions and post-solve diagnostics.

pub mod cost;
pub mod density;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod solver;
pub mod validate;

pub use cost::{CostKind, CostModel, MappingResult, MixedHessianForm};
pub use density::{ExtendedDensity, Region, SurfaceDensity};
pub use error::{Error, Result};
pub use fd::{GridFunction, ResidualField, ResidualOperator};
pub use geometry::{NarrowbandGrid, Surface, SurfacePointData, Vec3};
pub use solver::{GammaSchedule, SolverConfig, SolverReport};
pub use validate::AnalyticSolution;
