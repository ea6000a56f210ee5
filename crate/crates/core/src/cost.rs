//! Surface costs, their σ-penalized extensions to the band, the map from a
//! potential gradient to a target point, and mixed Hessian determinants.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Surface, Vec3};

/// Largest geodesic distance the exponential map is allowed to travel.
pub const EXP_MAP_CUTOFF: f64 = PI - 1e-6;

const ROOT_SCAN_STEPS: usize = 32;
const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostKind {
    /// `c(x, y) = ½ d_S²(x, y)` on the unit sphere.
    SqGeodesicSphere,
    /// `c(x, y) = -log(1 - x·y)` on the unit sphere (reflector antenna).
    LogReflectorSphere,
    /// `c(x, y) = ½‖x - y‖²` restricted to the surface.
    EuclideanSurface,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            CostKind::SqGeodesicSphere => "sq_geodesic",
            CostKind::LogReflectorSphere => "log_reflector",
            CostKind::EuclideanSurface => "euclidean",
        }
    }
}

/// Extended cost `c_σ(z₁, z₂) = c(P z₁, P z₂) + σ/2·(φ(z₁) - φ(z₂))²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    kind: CostKind,
    sigma: f64,
    surface: Surface,
    fd_step: f64,
    form: MixedHessianForm,
}

/// Radial scaling of the sphere closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MixedHessianForm {
    /// `σ·S/((1+φ(z))²(1+φ(ξ))²)`, the determinant of the extended cost.
    #[default]
    Exact,
    /// `σ·S/(1+φ(z))²`. Agrees with `Exact` only when the image lies on
    /// the surface; it is less stiff near the inner band edge and gives
    /// larger errors.
    Reduced,
}

/// Image `m̄(z)` of a band point under the transport map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingResult {
    pub target: Vec3,
    /// `P_Γ(target)`.
    pub tangential_part: Vec3,
    /// `φ_Γ(target)`.
    pub normal_offset: f64,
    /// Set when the exponential map argument had to be clamped.
    pub clamped: bool,
}

/// Image of a point on the surface under the surface map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceImage {
    pub point: Vec3,
    pub clamped: bool,
}

impl CostModel {
    pub fn new(kind: CostKind, sigma: f64, surface: Surface) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive (got {sigma})")));
        }
        let spherical = matches!(surface, Surface::UnitSphere | Surface::NorthernHemisphere);
        if kind != CostKind::EuclideanSurface && !spherical {
            return Err(Error::Config(format!("cost '{}' is only defined on the sphere", kind.name())));
        }
        Ok(CostModel { kind, sigma, surface, fd_step: 1e-3, form: MixedHessianForm::Exact })
    }

    /// Step of the nested finite differences used by the generic mixed Hessian.
    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn with_form(mut self, form: MixedHessianForm) -> Self {
        self.form = form;
        self
    }

    pub fn form(&self) -> MixedHessianForm {
        self.form
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    /// Cost between two points on the surface. The log cost is `+∞` at
    /// coincident points.
    #[inline]
    pub fn surface_cost(&self, x: &Vec3, y: &Vec3) -> f64 {
        match self.kind {
            CostKind::SqGeodesicSphere => {
                let d = x.cross(y).norm().atan2(x.dot(y));
                0.5 * d * d
            }
            CostKind::LogReflectorSphere => {
                let gap = 0.5 * (x - y).norm_squared();
                if gap > 0.0 {
                    -gap.ln()
                } else {
                    f64::INFINITY
                }
            }
            CostKind::EuclideanSurface => 0.5 * (x - y).norm_squared(),
        }
    }

    /// Extended cost from closest points and signed distances.
    #[inline]
    pub fn cost_from_parts(&self, x1: &Vec3, phi1: f64, x2: &Vec3, phi2: f64) -> f64 {
        let dphi = phi1 - phi2;
        self.surface_cost(x1, x2) + 0.5 * self.sigma * dphi * dphi
    }

    pub fn cost(&self, z1: &Vec3, z2: &Vec3) -> Result<f64> {
        let x1 = self.surface.closest_point(z1)?;
        let x2 = self.surface.closest_point(z2)?;
        Ok(self.cost_from_parts(&x1, self.surface.signed_distance(z1), &x2, self.surface.signed_distance(z2)))
    }

    /// Solves `∇_Γ u(x) = -∇_x c(x, y)` for `y`, given the surface gradient
    /// `p` at a surface point `x`.
    pub fn surface_map(&self, x: &Vec3, p: &Vec3) -> Result<SurfaceImage> {
        match self.kind {
            CostKind::SqGeodesicSphere => {
                let len = p.norm();
                if len == 0.0 {
                    return Ok(SurfaceImage { point: *x, clamped: false });
                }
                let clamped = len > EXP_MAP_CUTOFF;
                let t = len.min(EXP_MAP_CUTOFF);
                let (s, c) = t.sin_cos();
                Ok(SurfaceImage { point: x * c + p * (s / len), clamped })
            }
            CostKind::LogReflectorSphere => {
                let q2 = p.norm_squared();
                let point = x * ((q2 - 1.0) / (q2 + 1.0)) - p * (2.0 / (q2 + 1.0));
                Ok(SurfaceImage { point, clamped: false })
            }
            CostKind::EuclideanSurface => {
                let n = self.surface.normal(x)?;
                let base = x + p;
                let alpha = self.normal_root(&base, &n)?;
                Ok(SurfaceImage { point: self.surface.closest_point(&(base + n * alpha))?, clamped: false })
            }
        }
    }

    /// Smallest-magnitude `α` with `φ(base + α n) = 0`.
    fn normal_root(&self, base: &Vec3, n: &Vec3) -> Result<f64> {
        let span = 0.9 * self.surface.reach();
        let f = |a: f64| self.surface.signed_distance(&(base + n * a));
        let step = 2.0 * span / ROOT_SCAN_STEPS as f64;
        let mut best: Option<f64> = None;
        let mut lo = -span;
        let mut f_lo = f(lo);
        for k in 1..=ROOT_SCAN_STEPS {
            let hi = -span + k as f64 * step;
            let f_hi = f(hi);
            if f_lo == 0.0 || f_lo * f_hi < 0.0 || f_hi == 0.0 {
                let root = if f_lo == 0.0 {
                    lo
                } else if f_hi == 0.0 {
                    hi
                } else {
                    bisect(&f, lo, hi, f_lo)
                };
                if best.map_or(true, |b| root.abs() < b.abs()) {
                    best = Some(root);
                }
            }
            lo = hi;
            f_lo = f_hi;
        }
        best.ok_or(Error::RootBracket(*base))
    }

    /// Transport map at a band point `z` given `∇v(z)`.
    pub fn map_from_gradient(&self, z: &Vec3, grad_v: &Vec3) -> Result<MappingResult> {
        let x = self.surface.closest_point(z)?;
        let n = self.surface.normal(z)?;
        let phi = self.surface.signed_distance(z);
        let gn = grad_v.dot(&n);
        let p = self.surface.lift_tangential(z, &(grad_v - n * gn))?;
        self.map_from_parts(&x, &p, phi + gn / self.sigma)
    }

    /// Transport map from a surface point, its surface gradient and the
    /// signed distance of the image.
    #[inline]
    pub fn map_from_parts(&self, x: &Vec3, p: &Vec3, normal_offset: f64) -> Result<MappingResult> {
        let image = self.surface_map(x, p)?;
        let y = image.point;
        let n = match self.surface {
            Surface::UnitSphere | Surface::NorthernHemisphere => y,
            _ => self.surface.normal(&y)?,
        };
        Ok(MappingResult { target: y + n * normal_offset, tangential_part: y, normal_offset, clamped: image.clamped })
    }

    /// `|det D²_{z ξ} c_σ(z, m̄(z))|`.
    ///
    /// Closed forms on the sphere; nested central differences of step
    /// `fd_step` otherwise. The result is not checked for positivity.
    pub fn mixed_hessian(&self, z: &Vec3, grad_v: &Vec3, mapped: &MappingResult) -> Result<f64> {
        match self.kind {
            CostKind::SqGeodesicSphere | CostKind::LogReflectorSphere => {
                let n = self.surface.normal(z)?;
                let q = self.surface.lift_tangential(z, &(grad_v - n * grad_v.dot(&n)))?;
                Ok(self.sphere_mixed_hessian(q.norm(), self.surface.signed_distance(z), mapped.normal_offset))
            }
            CostKind::EuclideanSurface => self.mixed_hessian_generic(z, &mapped.target, self.fd_step),
        }
    }

    /// Sphere closed form from the surface-gradient length `|q|` and the
    /// signed distances of the source and the image.
    ///
    /// Tangential derivatives at radius `r` scale by `1/r`, so the
    /// surface determinant picks up `1/(r_z² r_ξ²)`. [`MixedHessianForm::Reduced`]
    /// keeps only the source factor.
    #[inline]
    pub fn sphere_mixed_hessian(&self, q_norm: f64, phi_source: f64, phi_target: f64) -> f64 {
        let rz = 1.0 + phi_source;
        let rxi = 1.0 + phi_target;
        let radial = match self.form {
            MixedHessianForm::Exact => 1.0 / (rz * rz * rxi * rxi),
            MixedHessianForm::Reduced => 1.0 / (rz * rz),
        };
        let surface = match self.kind {
            CostKind::SqGeodesicSphere => {
                let t = q_norm.min(EXP_MAP_CUTOFF);
                if t < 1e-4 {
                    1.0 + t * t / 6.0
                } else {
                    t / t.sin()
                }
            }
            CostKind::LogReflectorSphere => {
                let s = q_norm * q_norm + 1.0;
                s * s / 4.0
            }
            CostKind::EuclideanSurface => unreachable!("no closed form for the Euclidean surface cost"),
        };
        self.sigma * surface * radial
    }

    /// `|det M|` with `M[j][k] = ∂²c_σ/∂z_j∂ξ_k` by nested central
    /// differences of step `delta`.
    pub fn mixed_hessian_generic(&self, z: &Vec3, xi: &Vec3, delta: f64) -> Result<f64> {
        let parts = |p: &Vec3| -> Result<(Vec3, f64)> {
            Ok((self.surface.closest_point(p)?, self.surface.signed_distance(p)))
        };
        let mut zs = [(Vec3::zeros(), 0.0); 6];
        let mut xs = [(Vec3::zeros(), 0.0); 6];
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = delta;
            zs[2 * k] = parts(&(z + e))?;
            zs[2 * k + 1] = parts(&(z - e))?;
            xs[2 * k] = parts(&(xi + e))?;
            xs[2 * k + 1] = parts(&(xi - e))?;
        }
        let c = |a: &(Vec3, f64), b: &(Vec3, f64)| self.cost_from_parts(&a.0, a.1, &b.0, b.1);
        let mut m = nalgebra::Matrix3::zeros();
        for j in 0..3 {
            for k in 0..3 {
                let (zp, zm) = (&zs[2 * j], &zs[2 * j + 1]);
                let (xp, xm) = (&xs[2 * k], &xs[2 * k + 1]);
                m[(j, k)] = (c(zp, xp) - c(zm, xp) - c(zp, xm) + c(zm, xm)) / (4.0 * delta * delta);
            }
        }
        Ok(m.determinant().abs())
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
