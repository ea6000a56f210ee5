//! Surface densities, their extension into the narrowband, and surface
//! quadrature.

use std::f64::consts::PI;

use crate::cost::CostKind;
use crate::error::{Error, Result};
use crate::geometry::{Surface, Vec3};
use crate::validate::exact_axisymmetric_density;

const FOUR_PI: f64 = 4.0 * PI;

/// Quadrature resolution along each parameter direction.
pub const QUADRATURE_RESOLUTION: usize = 1024;

/// A probability density on the surface, bounded away from zero.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceDensity {
    Constant(f64),
    /// Source density whose squared-geodesic transport to the uniform
    /// density has potential `z/a0`.
    AxisymmetricSqGeoExact { a0: f64 },
    /// As above for the reflector (logarithmic) cost.
    AxisymmetricLogExact { a0: f64 },
    /// `(1-β)/α · exp(-rate·(angle - center)²) + β/(4π)` where `angle` is
    /// measured from `axis` and `α` is the integral of the exponential bump.
    GaussianBump { axis: Vec3, center: f64, rate: f64, alpha: f64, beta: f64 },
    /// Two Gaussian spots side by side, like a pair of headlights.
    HeadlightPeanut { axes: [Vec3; 2], rate: f64, beta: f64, norm: f64 },
    /// `(1-β)/(2π)` added on the half-sphere `x·n ≥ 0`, plus `β/(4π)` everywhere.
    DiscontinuousCap { normal: Vec3, beta: f64 },
    /// `(1 + 10·θ) / (2π(1 + a0))` on the northern hemisphere.
    HemisphereLinear { a0: f64 },
    /// `(z + a + a0) / (4π²ac(a + a0))` on the torus with radii `a < c`.
    TorusLinear { a0: f64, minor: f64, major: f64 },
}

/// Integration region on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Full,
    /// Polar cap `θ ≤ θ0` around the north pole (spheres only).
    PolarCap(f64),
}

impl SurfaceDensity {
    pub fn uniform(surface: &Surface) -> Self {
        SurfaceDensity::Constant(1.0 / surface.area())
    }

    /// Source of the north-to-south example: mass concentrated at the north pole.
    pub fn polar_gaussian_north() -> Self {
        SurfaceDensity::GaussianBump { axis: Vec3::z(), center: 0.1, rate: 4.0, alpha: 1.042, beta: 0.4 }
    }

    /// Target of the north-to-south example: mass concentrated near the south pole.
    pub fn polar_gaussian_south() -> Self {
        SurfaceDensity::GaussianBump { axis: Vec3::z(), center: PI - 0.3, rate: 3.0, alpha: 2.089, beta: 0.3 }
    }

    /// Source of the non-Lipschitz example, centered on the +x axis.
    pub fn gaussian_cap_x() -> Self {
        SurfaceDensity::GaussianBump { axis: Vec3::x(), center: 0.0, rate: 5.0, alpha: 0.607788, beta: 0.3 }
    }

    /// Discontinuous target of the non-Lipschitz example.
    pub fn discontinuous_cap() -> Self {
        SurfaceDensity::DiscontinuousCap { normal: Vec3::new(0.2, 0.2, 1.0).normalize(), beta: 0.1 }
    }

    pub fn headlight_peanut() -> Self {
        let axes = [Vec3::new(0.5f64.cos(), 0.5f64.sin(), 0.0), Vec3::new(0.5f64.cos(), -(0.5f64.sin()), 0.0)];
        let rate = 6.0;
        let bumps = SurfaceDensity::HeadlightPeanut { axes, rate, beta: 0.0, norm: 1.0 };
        let norm = bumps.surface_integral(&Surface::UnitSphere, Region::Full);
        SurfaceDensity::HeadlightPeanut { axes, rate, beta: 0.2, norm }
    }

    pub fn hemisphere_linear(a0: f64) -> Self {
        SurfaceDensity::HemisphereLinear { a0 }
    }

    pub fn torus_linear(a0: f64, surface: &Surface) -> Result<Self> {
        match *surface {
            Surface::Torus { minor, major } => Ok(SurfaceDensity::TorusLinear { a0, minor, major }),
            _ => Err(Error::Config("torus_linear density requires a torus surface".into())),
        }
    }

    /// Density value at a point `x` on the surface.
    pub fn eval(&self, x: &Vec3) -> f64 {
        match self {
            SurfaceDensity::Constant(c) => *c,
            SurfaceDensity::AxisymmetricSqGeoExact { a0 } => {
                exact_axisymmetric_density(CostKind::SqGeodesicSphere, *a0, polar_angle(x))
            }
            SurfaceDensity::AxisymmetricLogExact { a0 } => {
                exact_axisymmetric_density(CostKind::LogReflectorSphere, *a0, polar_angle(x))
            }
            SurfaceDensity::GaussianBump { axis, center, rate, alpha, beta } => {
                let angle = angle_between(axis, x);
                (1.0 - beta) / alpha * (-rate * (angle - center).powi(2)).exp() + beta / FOUR_PI
            }
            SurfaceDensity::HeadlightPeanut { axes, rate, beta, norm } => {
                let bumps: f64 = axes.iter().map(|a| (-rate * angle_between(a, x).powi(2)).exp()).sum();
                (1.0 - beta) * bumps / norm + beta / FOUR_PI
            }
            SurfaceDensity::DiscontinuousCap { normal, beta } => {
                let cap = if x.dot(normal) >= 0.0 { (1.0 - beta) / (2.0 * PI) } else { 0.0 };
                cap + beta / FOUR_PI
            }
            SurfaceDensity::HemisphereLinear { a0 } => (1.0 + 10.0 * polar_angle(x)) / (2.0 * PI * (1.0 + a0)),
            SurfaceDensity::TorusLinear { a0, minor, major } => {
                (x.z + minor + a0) / (4.0 * PI * PI * minor * major * (minor + a0))
            }
        }
    }

    /// Integral over `region` by a midpoint product rule in (θ, φ) on
    /// spheres or (u, v) on the torus.
    pub fn surface_integral(&self, surface: &Surface, region: Region) -> f64 {
        let n = QUADRATURE_RESOLUTION;
        match *surface {
            Surface::UnitSphere | Surface::NorthernHemisphere => {
                let full = if surface.is_hemisphere() { PI / 2.0 } else { PI };
                let theta_max = match region {
                    Region::Full => full,
                    Region::PolarCap(t) => t.clamp(0.0, full),
                };
                let (dt, dp) = (theta_max / n as f64, 2.0 * PI / (n / 2) as f64);
                let mut total = 0.0;
                for i in 0..n {
                    let theta = (i as f64 + 0.5) * dt;
                    let (st, ct) = theta.sin_cos();
                    let ring: f64 = (0..n / 2)
                        .map(|j| {
                            let phi = (j as f64 + 0.5) * dp;
                            self.eval(&Vec3::new(st * phi.cos(), st * phi.sin(), ct))
                        })
                        .sum();
                    total += ring * st;
                }
                total * dt * dp
            }
            Surface::Torus { minor, major } => {
                let d = 2.0 * PI / n as f64;
                let mut total = 0.0;
                for i in 0..n {
                    let u = (i as f64 + 0.5) * d;
                    for j in 0..n {
                        let v = (j as f64 + 0.5) * d;
                        let radial = major + minor * v.cos();
                        let x = Vec3::new(radial * u.cos(), radial * u.sin(), minor * v.sin());
                        total += self.eval(&x) * minor * radial;
                    }
                }
                total * d * d
            }
        }
    }

    /// Infimum of the density, used to check that it is bounded away from zero.
    pub fn lower_bound(&self) -> Option<f64> {
        match self {
            SurfaceDensity::Constant(c) => Some(*c),
            SurfaceDensity::GaussianBump { beta, .. }
            | SurfaceDensity::HeadlightPeanut { beta, .. }
            | SurfaceDensity::DiscontinuousCap { beta, .. } => Some(beta / FOUR_PI),
            SurfaceDensity::HemisphereLinear { a0 } => Some(1.0 / (2.0 * PI * (1.0 + a0))),
            SurfaceDensity::TorusLinear { a0, minor, major } => Some(a0 / (4.0 * PI * PI * minor * major * (minor + a0))),
            SurfaceDensity::AxisymmetricSqGeoExact { .. } | SurfaceDensity::AxisymmetricLogExact { .. } => None,
        }
    }
}

/// Polar angle `θ = arccos(z)` of a unit vector, computed stably near the poles.
pub fn polar_angle(x: &Vec3) -> f64 {
    x.x.hypot(x.y).atan2(x.z)
}

/// Angle between two directions.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Volumetric extension `ρ̄(z) = ρ(P_Γ z)·J(z)/(2ε)` of a surface density.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedDensity {
    base: SurfaceDensity,
    surface: Surface,
    epsilon: f64,
    jacobian_step: f64,
}

impl ExtendedDensity {
    pub fn new(base: SurfaceDensity, surface: Surface, epsilon: f64, jacobian_step: f64) -> Self {
        ExtendedDensity { base, surface, epsilon, jacobian_step }
    }

    pub fn base(&self) -> &SurfaceDensity {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eval(&self, z: &Vec3) -> Result<f64> {
        let x = self.surface.closest_point(z)?;
        self.eval_parts(&x, z)
    }

    /// Evaluation when the closest point `x` of `z` is already known.
    pub fn eval_parts(&self, x: &Vec3, z: &Vec3) -> Result<f64> {
        let j = self.surface.jacobian(z, self.jacobian_step)?;
        Ok(self.from_surface_value(self.base.eval(x), j))
    }

    #[inline]
    pub fn from_surface_value(&self, rho: f64, jacobian: f64) -> f64 {
        rho * jacobian / (2.0 * self.epsilon)
    }
}
