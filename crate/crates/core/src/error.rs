use thiserror::Error;

use crate::geometry::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The point sits on a locus where the closest-point map is undefined.
    #[error("point ({:.6}, {:.6}, {:.6}) is on the singular locus of the surface", .0.x, .0.y, .0.z)]
    Domain(Vec3),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A trilinear cell needed for interpolation has a corner outside the grid.
    #[error("interpolation cell at ({:.6}, {:.6}, {:.6}) is not covered by the narrowband grid", .0.x, .0.y, .0.z)]
    Coverage(Vec3),

    #[error("target density is not positive ({value:e}) at the image of node {node}")]
    DegenerateTarget { node: usize, value: f64 },

    #[error("non-finite residual at node {node}")]
    NonFinite { node: usize },

    #[error("mixed Hessian determinant {value:e} is not positive at node {node}")]
    MixedHessian { node: usize, value: f64 },

    /// The normal-offset root search on a general surface failed to bracket a root.
    #[error("no surface intersection found along the normal when mapping ({:.6}, {:.6}, {:.6})", .0.x, .0.y, .0.z)]
    RootBracket(Vec3),
}
