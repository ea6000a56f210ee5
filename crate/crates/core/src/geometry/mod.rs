//! Analytic surfaces: signed distance, closest point, normal and the
//! change-of-variables factor `J` between the surface and its offsets.

mod grid;

pub use grid::{Cell, Closure, NarrowbandGrid, NodeKind, AXIS_OFFSETS, DIAGONAL_OFFSETS};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    UnitSphere,
    /// Upper half (`z ≥ 0`) of the unit sphere. Geometry queries use the
    /// full sphere; the restriction only affects grid construction.
    NorthernHemisphere,
    Torus { minor: f64, major: f64 },
}

/// Geometric data cached at a grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePointData {
    pub phi: f64,
    pub closest_point: Vec3,
    pub normal: Vec3,
    pub jacobian: f64,
}

/// Principal directions and curvatures of the surface at `P_Γ z`.
///
/// Curvatures are signed so that the closest-point map scales the
/// direction `tangents[i]` by `1 / (1 + curvatures[i]·φ)`.
#[derive(Debug, Clone, Copy)]
pub struct PrincipalFrame {
    pub normal: Vec3,
    pub tangents: [Vec3; 2],
    pub curvatures: [f64; 2],
}

impl Surface {
    /// Torus of revolution about the z-axis with tube radius `minor` and
    /// center-circle radius `major`.
    pub fn torus(minor: f64, major: f64) -> Result<Self> {
        if !(minor > 0.0 && major > minor) {
            return Err(Error::Config(format!(
                "torus radii must satisfy 0 < minor < major (got minor={minor}, major={major})"
            )));
        }
        Ok(Surface::Torus { minor, major })
    }

    pub fn is_hemisphere(&self) -> bool {
        matches!(self, Surface::NorthernHemisphere)
    }

    /// Reach of the surface: the largest admissible narrowband half-width.
    pub fn reach(&self) -> f64 {
        match *self {
            Surface::UnitSphere | Surface::NorthernHemisphere => 1.0,
            Surface::Torus { minor, major } => minor.min(major - minor),
        }
    }

    /// Total surface area.
    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Surface::UnitSphere => 4.0 * PI,
            Surface::NorthernHemisphere => 2.0 * PI,
            Surface::Torus { minor, major } => 4.0 * PI * PI * minor * major,
        }
    }

    /// Signed distance, negative inside.
    pub fn signed_distance(&self, z: &Vec3) -> f64 {
        match *self {
            Surface::UnitSphere | Surface::NorthernHemisphere => z.norm() - 1.0,
            Surface::Torus { minor, major } => {
                let r = z.x.hypot(z.y);
                (r - major).hypot(z.z) - minor
            }
        }
    }

    pub fn closest_point(&self, z: &Vec3) -> Result<Vec3> {
        match *self {
            Surface::UnitSphere | Surface::NorthernHemisphere => {
                let r = z.norm();
                if r < SINGULAR_TOL {
                    return Err(Error::Domain(*z));
                }
                Ok(z / r)
            }
            Surface::Torus { minor, major } => {
                let r = z.x.hypot(z.y);
                let rho = (r - major).hypot(z.z);
                if r < SINGULAR_TOL || rho < SINGULAR_TOL {
                    return Err(Error::Domain(*z));
                }
                let s = minor / rho;
                let radial = major + s * (r - major);
                Ok(Vec3::new(radial * z.x / r, radial * z.y / r, s * z.z))
            }
        }
    }

    /// Outward unit normal of the level set through `z`.
    pub fn normal(&self, z: &Vec3) -> Result<Vec3> {
        match *self {
            Surface::UnitSphere | Surface::NorthernHemisphere => {
                let r = z.norm();
                if r < SINGULAR_TOL {
                    return Err(Error::Domain(*z));
                }
                Ok(z / r)
            }
            Surface::Torus { major, .. } => {
                let r = z.x.hypot(z.y);
                let rho = (r - major).hypot(z.z);
                if r < SINGULAR_TOL || rho < SINGULAR_TOL {
                    return Err(Error::Domain(*z));
                }
                let c = (r - major) / (rho * r);
                Ok(Vec3::new(c * z.x, c * z.y, z.z / rho))
            }
        }
    }

    /// Centered finite-difference Jacobian matrix of the closest-point map.
    pub fn projection_jacobian_fd(&self, z: &Vec3, step: f64) -> Result<Matrix3<f64>> {
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = step;
            let col = (self.closest_point(&(z + e))? - self.closest_point(&(z - e))?) / (2.0 * step);
            jac.set_column(k, &col);
        }
        Ok(jac)
    }

    /// Change-of-variables factor `J(z)`.
    ///
    /// On the unit sphere this is the closed form `1/r²`. On the torus it
    /// is the product of the two largest singular values of the
    /// finite-difference Jacobian of the closest-point map, taken with
    /// step `fd_step`.
    pub fn jacobian(&self, z: &Vec3, fd_step: f64) -> Result<f64> {
        match self {
            Surface::UnitSphere | Surface::NorthernHemisphere => {
                let r2 = z.norm_squared();
                if r2 < SINGULAR_TOL * SINGULAR_TOL {
                    return Err(Error::Domain(*z));
                }
                Ok(1.0 / r2)
            }
            Surface::Torus { .. } => {
                let jac = self.projection_jacobian_fd(z, fd_step)?;
                Ok(two_largest_singular_product(&jac))
            }
        }
    }

    pub fn point_data(&self, z: &Vec3, fd_step: f64) -> Result<SurfacePointData> {
        Ok(SurfacePointData {
            phi: self.signed_distance(z),
            closest_point: self.closest_point(z)?,
            normal: self.normal(z)?,
            jacobian: self.jacobian(z, fd_step)?,
        })
    }

    pub fn principal_frame(&self, z: &Vec3) -> Result<PrincipalFrame> {
        let normal = self.normal(z)?;
        match *self {
            Surface::UnitSphere | Surface::NorthernHemisphere => {
                let [t1, t2] = tangent_basis(&normal);
                Ok(PrincipalFrame { normal, tangents: [t1, t2], curvatures: [1.0, 1.0] })
            }
            Surface::Torus { minor, major } => {
                let r = z.x.hypot(z.y);
                let rho = (r - major).hypot(z.z);
                let cos_v = (r - major) / rho;
                let around_axis = Vec3::new(-z.y / r, z.x / r, 0.0);
                let around_tube = normal.cross(&around_axis);
                Ok(PrincipalFrame {
                    normal,
                    tangents: [around_axis, around_tube],
                    curvatures: [cos_v / (major + minor * cos_v), 1.0 / minor],
                })
            }
        }
    }

    /// Maps a tangential gradient taken at `z` to the surface gradient of
    /// the normally-constant extension at `P_Γ z`, undoing the contraction
    /// of the closest-point map along each principal direction.
    pub fn lift_tangential(&self, z: &Vec3, grad: &Vec3) -> Result<Vec3> {
        let frame = self.principal_frame(z)?;
        let phi = self.signed_distance(z);
        let mut out = Vec3::zeros();
        for (t, kappa) in frame.tangents.iter().zip(frame.curvatures) {
            out += t * ((1.0 + kappa * phi) * t.dot(grad));
        }
        Ok(out)
    }
}

/// Product of the two largest singular values of a 3×3 matrix.
pub fn two_largest_singular_product(m: &Matrix3<f64>) -> f64 {
    let mut eig: Vec<f64> = (m.transpose() * m).symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    (eig[0].max(0.0) * eig[1].max(0.0)).sqrt()
}

/// An orthonormal pair spanning the plane orthogonal to the unit vector `n`.
pub fn tangent_basis(n: &Vec3) -> [Vec3; 2] {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = (helper - n * n.dot(&helper)).normalize();
    let t2 = n.cross(&t1);
    [t1, t2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_torus() -> Surface {
        Surface::torus(0.65, 1.3).unwrap()
    }

    #[test]
    fn sphere_signed_distance_and_projection() {
        let s = Surface::UnitSphere;
        assert_eq!(s.signed_distance(&Vec3::new(2.0, 0.0, 0.0)), 1.0);
        assert_eq!(s.closest_point(&Vec3::new(0.0, 0.0, 0.5)).unwrap(), Vec3::z());
        assert_eq!(s.closest_point(&Vec3::x()).unwrap(), Vec3::x());
        assert!(matches!(s.closest_point(&Vec3::zeros()), Err(Error::Domain(_))));
    }

    #[test]
    fn torus_signed_distance_examples() {
        let t = reference_torus();
        assert_abs_diff_eq!(t.signed_distance(&Vec3::new(1.95, 0.0, 0.0)), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.signed_distance(&Vec3::new(1.3, 0.0, 0.0)), -0.65, epsilon = 1e-15);
    }

    #[test]
    fn torus_singular_locus_is_rejected() {
        let t = reference_torus();
        assert!(matches!(t.closest_point(&Vec3::new(0.0, 1.3, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(t.closest_point(&Vec3::new(0.0, 0.0, 0.3)), Err(Error::Domain(_))));
        assert!(Surface::torus(1.3, 0.65).is_err());
    }

    #[test]
    fn torus_projection_matches_parametric_minimization() {
        // 1-D minimization of |z - x(v)| over the tube circle in the
        // meridian plane y = 0, by golden-section search. The minimum is
        // flat, so the search only resolves v to about sqrt(machine eps).
        let (a, c) = (0.65, 1.3);
        let z = Vec3::new(1.3, 0.0, 0.5);
        let dist = |v: f64| {
            let x = Vec3::new(c + a * v.cos(), 0.0, a * v.sin());
            (z - x).norm()
        };
        let (mut lo, mut hi) = (0.0_f64, std::f64::consts::PI);
        let g = (5.0_f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if dist(m1) < dist(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let v = 0.5 * (lo + hi);
        let oracle = Vec3::new(c + a * v.cos(), 0.0, a * v.sin());
        let p = reference_torus().closest_point(&z).unwrap();
        assert!((p - oracle).norm() < 1e-7);
        assert!((p - Vec3::new(1.3, 0.0, 0.65)).norm() < 1e-12);
    }

    #[test]
    fn sphere_jacobian_is_inverse_square_radius() {
        let s = Surface::UnitSphere;
        assert_eq!(s.jacobian(&Vec3::x(), 0.025).unwrap(), 1.0);
        assert_abs_diff_eq!(s.jacobian(&Vec3::new(0.0, 1.1, 0.0), 0.025).unwrap(), 1.0 / 1.21, epsilon = 1e-15);
    }

    #[test]
    fn torus_jacobian_on_surface_is_one() {
        let t = reference_torus();
        for v in [0.0, 0.7, 2.0, 3.5] {
            let p = Vec3::new(1.3 + 0.65 * f64::cos(v), 0.0, 0.65 * f64::sin(v));
            let j = t.jacobian(&p, 0.025).unwrap();
            assert_abs_diff_eq!(j, 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        for n in [Vec3::x(), Vec3::y(), Vec3::new(0.3, -0.4, 0.2).normalize()] {
            let [t1, t2] = tangent_basis(&n);
            assert_abs_diff_eq!(t1.dot(&n), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(t2.dot(&n), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(t1.dot(&t2), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(t2.norm(), 1.0, epsilon = 1e-15);
        }
    }
}
