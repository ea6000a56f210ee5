//! Axisymmetric exact solutions and diagnostics evaluated on solved
//! potentials.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cost::{CostKind, CostModel, MappingResult};
use crate::density::{polar_angle, Region, SurfaceDensity};
use crate::error::{Error, Result};
use crate::fd::{grad_h, interp_trilinear, tangential_gradient_at, tangential_gradient_field};
use crate::geometry::{NarrowbandGrid, Surface, Vec3};

const POLE_SWITCH: f64 = 1e-3;

/// Source density with potential `u = z/a0` and uniform target on the unit sphere.
///
/// Below `θ = 10⁻³` from either pole the closed form is replaced by its
/// even Taylor expansion to fourth order.
pub fn exact_axisymmetric_density(kind: CostKind, a0: f64, theta: f64) -> f64 {
    let inv = 1.0 / (4.0 * PI);
    if theta < POLE_SWITCH {
        return inv * pole_series(kind, a0, theta, true);
    }
    if PI - theta < POLE_SWITCH {
        return inv * pole_series(kind, a0, PI - theta, false);
    }
    let (s, c) = theta.sin_cos();
    match kind {
        CostKind::SqGeodesicSphere => inv * (theta - s / a0).sin() * (1.0 - c / a0) / s,
        CostKind::LogReflectorSphere => {
            let w = s * s + a0 * a0;
            inv * (2.0 * (s / a0).atan() - theta).sin() / s * (-1.0 + 2.0 * a0 * c / w)
        }
        CostKind::EuclideanSurface => f64::NAN,
    }
}

fn pole_series(kind: CostKind, a: f64, t: f64, north: bool) -> f64 {
    let (a2, a3, a4, a5, a6) = (a * a, a.powi(3), a.powi(4), a.powi(5), a.powi(6));
    let (c0, c2, c4) = match (kind, north) {
        (CostKind::SqGeodesicSphere, true) => (
            (1.0 - 1.0 / a).powi(2),
            (6.0 * a3 - 9.0 * a2 + 4.0 * a - 1.0) / (6.0 * a4),
            (-30.0 * a5 + 180.0 * a4 - 200.0 * a3 + 95.0 * a2 - 18.0 * a + 3.0) / (360.0 * a6),
        ),
        (CostKind::SqGeodesicSphere, false) => (
            (1.0 + 1.0 / a).powi(2),
            (-6.0 * a3 - 9.0 * a2 - 4.0 * a - 1.0) / (6.0 * a4),
            (30.0 * a5 + 180.0 * a4 + 200.0 * a3 + 95.0 * a2 + 18.0 * a + 3.0) / (360.0 * a6),
        ),
        (CostKind::LogReflectorSphere, true) => (
            1.0 - 4.0 / a + 4.0 / a2,
            2.0 * (a3 - 3.0 * a2 + 4.0 * a - 4.0) / a4,
            (-a5 + 12.0 * a4 - 40.0 * a3 + 76.0 * a2 - 72.0 * a + 72.0) / (6.0 * a6),
        ),
        (CostKind::LogReflectorSphere, false) => (
            1.0 + 4.0 / a + 4.0 / a2,
            2.0 * (-a3 - 3.0 * a2 - 4.0 * a - 4.0) / a4,
            (a5 + 12.0 * a4 + 40.0 * a3 + 76.0 * a2 + 72.0 * a + 72.0) / (6.0 * a6),
        ),
        (CostKind::EuclideanSurface, _) => return f64::NAN,
    };
    let t2 = t * t;
    c0 + c2 * t2 + c4 * t2 * t2
}

/// Exact solution `u = z/a0` of the sphere problem with uniform target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSolution {
    pub cost_kind: CostKind,
    pub a0: f64,
}

impl AnalyticSolution {
    pub fn new(cost_kind: CostKind, a0: f64) -> Result<Self> {
        if cost_kind == CostKind::EuclideanSurface {
            return Err(Error::Config("exact solutions exist only for the sphere costs".into()));
        }
        if !(a0 > 1.0) {
            return Err(Error::Config(format!("a0 must exceed 1 (got {a0})")));
        }
        Ok(AnalyticSolution { cost_kind, a0 })
    }

    /// Potential normalized to minimum zero on the sphere.
    pub fn potential(&self, x: &Vec3) -> f64 {
        (x.z + 1.0) / self.a0
    }

    pub fn source(&self) -> SurfaceDensity {
        match self.cost_kind {
            CostKind::LogReflectorSphere => SurfaceDensity::AxisymmetricLogExact { a0: self.a0 },
            _ => SurfaceDensity::AxisymmetricSqGeoExact { a0: self.a0 },
        }
    }

    pub fn target(&self) -> SurfaceDensity {
        SurfaceDensity::uniform(&Surface::UnitSphere)
    }

    /// Polar angle of the image of a point at polar angle `theta`.
    pub fn image_angle(&self, theta: f64) -> f64 {
        let s = theta.sin();
        match self.cost_kind {
            CostKind::LogReflectorSphere => {
                // Travels south by 2·atan(a0/sinθ), possibly past the pole.
                let t = theta + 2.0 * (self.a0 / s).atan();
                if t > PI {
                    2.0 * PI - t
                } else {
                    t
                }
            }
            _ => theta - s / self.a0,
        }
    }
}

/// Latitude-longitude sample directions with `θ ∈ [margin, π - margin]`.
pub fn lat_long_samples(n_theta: usize, n_phi: usize, margin: f64) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = margin + (PI - 2.0 * margin) * i as f64 / (n_theta - 1).max(1) as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            out.push(Vec3::new(st * phi.cos(), st * phi.sin(), ct));
        }
    }
    out
}

/// `max |ℐv(x) - u(x)|` over a pole-avoiding lattice, after shifting both
/// to minimum zero over the samples.
pub fn linf_error_on_surface(v: &[f64], grid: &NarrowbandGrid, exact: &AnalyticSolution, n_theta: usize, n_phi: usize) -> Result<f64> {
    let samples = lat_long_samples(n_theta, n_phi, 0.01);
    let computed = samples.par_iter().map(|x| interp_trilinear(v, grid, x)).collect::<Result<Vec<_>>>()?;
    let exact_vals: Vec<f64> = samples.iter().map(|x| exact.potential(x)).collect();
    let cmin = computed.iter().copied().fold(f64::INFINITY, f64::min);
    let emin = exact_vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(computed.iter().zip(&exact_vals).map(|(c, e)| ((c - cmin) - (e - emin)).abs()).fold(0.0, f64::max))
}

/// Default error metric: 200 × 400 samples.
pub fn linf_error(v: &[f64], grid: &NarrowbandGrid, exact: &AnalyticSolution) -> Result<f64> {
    linf_error_on_surface(v, grid, exact, 200, 400)
}

/// Mass of the source cap `θ ≤ θ0` and of the target cap bounded by the
/// estimated image angle `T(θ0)`.
///
/// `T(θ0)` is `θ0` plus the mean displacement in polar angle of the
/// interior nodes whose closest points lie within `band` of `θ0`.
pub fn pushforward_cap_check(
    grid: &NarrowbandGrid,
    mappings: &[MappingResult],
    f: &SurfaceDensity,
    g: &SurfaceDensity,
    theta0: f64,
    band: f64,
) -> Result<(f64, f64)> {
    let image = estimate_image_angle(grid, mappings, theta0, band)?;
    let surface = grid.surface();
    Ok((f.surface_integral(&surface, Region::PolarCap(theta0)), g.surface_integral(&surface, Region::PolarCap(image))))
}

pub fn estimate_image_angle(grid: &NarrowbandGrid, mappings: &[MappingResult], theta0: f64, band: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, m) in mappings.iter().enumerate().take(grid.n_interior()) {
        let theta = polar_angle(&grid.data(i).closest_point);
        if (theta - theta0).abs() < band {
            sum += polar_angle(&m.tangential_part) - theta;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Config(format!("no grid nodes within {band} of polar angle {theta0}")));
    }
    Ok(theta0 + sum / count as f64)
}

/// Reflector radius `exp(-ℐv(x))` along each direction.
pub fn reflector_shape(v: &[f64], grid: &NarrowbandGrid, directions: &[Vec3]) -> Result<Vec<(Vec3, f64)>> {
    directions.iter().map(|x| Ok((*x, (-interp_trilinear(v, grid, x)?).exp()))).collect()
}

/// `max |∇ʰv·n|` over interior nodes.
pub fn normal_constancy(v: &[f64], grid: &NarrowbandGrid) -> f64 {
    (0..grid.n_interior())
        .into_par_iter()
        .map(|i| grad_h(v, grid, i).dot(&grid.data(i).normal).abs())
        .reduce(|| 0.0, f64::max)
}

/// `max |φ(m̄ʰ(x_i)) - φ(x_i)|` over interior nodes.
pub fn level_set_defect(grid: &NarrowbandGrid, mappings: &[MappingResult]) -> f64 {
    let s = grid.surface();
    mappings.iter().enumerate().map(|(i, m)| (s.signed_distance(&m.target) - grid.data(i).phi).abs()).fold(0.0, f64::max)
}

/// Largest `|∂v/∂z|` on the hemisphere's equator plane, from the one-sided
/// second-order difference `(-3v₀ + 4v₁ - v₂)/(2h)` over the nodes on and
/// above the plane.
///
/// Ghost values are even reflections, so centred differences across the
/// equator vanish identically; this one-sided form tests whether the solved
/// potential is actually flat there.
pub fn neumann_defect(v: &[f64], grid: &NarrowbandGrid) -> f64 {
    let h = grid.h();
    let mut worst = 0.0f64;
    for i in 0..grid.n_interior() {
        let l = grid.lattice(i);
        if l[2] != 0 {
            continue;
        }
        if let (Some(a), Some(b)) = (grid.index_of([l[0], l[1], 1]), grid.index_of([l[0], l[1], 2])) {
            worst = worst.max(((-3.0 * v[i] + 4.0 * v[a] - v[b]) / (2.0 * h)).abs());
        }
    }
    worst
}

/// `h³ Σ ρ̄(x_i)` over interior nodes.
pub fn band_mass(grid: &NarrowbandGrid, values: &[f64]) -> f64 {
    grid.h().powi(3) * values.iter().take(grid.n_interior()).sum::<f64>()
}

/// Transport cost `h³ Σ c_σ(x_i, m̄(x_i)) f̄(x_i)` of the discrete map.
pub fn band_transport_cost(grid: &NarrowbandGrid, cost: &CostModel, mappings: &[MappingResult], source_values: &[f64]) -> f64 {
    let h3 = grid.h().powi(3);
    mappings
        .iter()
        .zip(source_values)
        .enumerate()
        .map(|(i, (m, f))| {
            let d = grid.data(i);
            cost.cost_from_parts(&d.closest_point, d.phi, &m.tangential_part, m.normal_offset) * f
        })
        .sum::<f64>()
        * h3
}

/// Surface map `m(x)` at a point `x` on the surface, from the
/// interpolated tangential gradient field.
pub fn surface_image(cost: &CostModel, grid: &NarrowbandGrid, field: &[Vec3], x: &Vec3) -> Result<Vec3> {
    let p = tangential_gradient_at(field, grid, x)?;
    let y = cost.surface_map(x, &p)?.point;
    grid.surface().closest_point(&y)
}

/// `∫ c(x, m(x)) f(x) dS` by a latitude-longitude midpoint rule on the sphere.
pub fn surface_transport_cost(v: &[f64], grid: &NarrowbandGrid, cost: &CostModel, f: &SurfaceDensity, n_theta: usize) -> Result<f64> {
    let field = tangential_gradient_field(v, grid);
    let n_phi = 2 * n_theta;
    let (dt, dp) = (PI / n_theta as f64, 2.0 * PI / n_phi as f64);
    let rows = (0..n_theta)
        .into_par_iter()
        .map(|i| {
            let theta = (i as f64 + 0.5) * dt;
            let (st, ct) = theta.sin_cos();
            let mut acc = 0.0;
            for j in 0..n_phi {
                let phi = (j as f64 + 0.5) * dp;
                let x = Vec3::new(st * phi.cos(), st * phi.sin(), ct);
                let y = surface_image(cost, grid, &field, &x)?;
                acc += cost.surface_cost(&x, &y) * f.eval(&x);
            }
            Ok(acc * st)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rows.iter().sum::<f64>() * dt * dp)
}

/// Points on a surface with their connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub points: Vec<Vec3>,
    pub edges: Vec<(usize, usize)>,
    pub triangles: Vec<[usize; 3]>,
}

impl SurfaceMesh {
    /// Latitude-longitude mesh of the sphere without the poles.
    pub fn sphere(n_lat: usize, n_lon: usize) -> Self {
        let mut points = Vec::with_capacity(n_lat * n_lon);
        for i in 0..n_lat {
            let theta = PI * (i as f64 + 0.5) / n_lat as f64;
            for j in 0..n_lon {
                let phi = 2.0 * PI * j as f64 / n_lon as f64;
                points.push(Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
            }
        }
        Self::periodic_connectivity(points, n_lat, n_lon, false)
    }

    /// Uniform `(u, v)` mesh of a torus.
    pub fn torus(surface: &Surface, n_u: usize, n_v: usize) -> Result<Self> {
        let Surface::Torus { minor, major } = *surface else {
            return Err(Error::Config("torus mesh requires a torus surface".into()));
        };
        let mut points = Vec::with_capacity(n_u * n_v);
        for i in 0..n_u {
            let u = 2.0 * PI * i as f64 / n_u as f64;
            for j in 0..n_v {
                let v = 2.0 * PI * j as f64 / n_v as f64;
                let r = major + minor * v.cos();
                points.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
            }
        }
        Ok(Self::periodic_connectivity(points, n_u, n_v, true))
    }

    fn periodic_connectivity(points: Vec<Vec3>, rows: usize, cols: usize, wrap_rows: bool) -> Self {
        let id = |i: usize, j: usize| (i % rows) * cols + j % cols;
        let mut edges = Vec::new();
        let mut triangles = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                edges.push((id(i, j), id(i, j + 1)));
                if wrap_rows || i + 1 < rows {
                    edges.push((id(i, j), id(i + 1, j)));
                    triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                    triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
        SurfaceMesh { points, edges, triangles }
    }
}

/// Mesh vertices before and after transport.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportedCloud {
    pub mesh: SurfaceMesh,
    pub images: Vec<Vec3>,
}

/// Moves every mesh vertex by the discrete transport map.
pub fn transport_cloud(v: &[f64], grid: &NarrowbandGrid, cost: &CostModel, mesh: &SurfaceMesh) -> Result<TransportedCloud> {
    let field = tangential_gradient_field(v, grid);
    let images = mesh.points.par_iter().map(|x| surface_image(cost, grid, &field, x)).collect::<Result<Vec<_>>>()?;
    Ok(TransportedCloud { mesh: mesh.clone(), images })
}

/// Torus angles `(u, v)` of a point near the torus.
pub fn torus_angles(surface: &Surface, x: &Vec3) -> (f64, f64) {
    let major = match *surface {
        Surface::Torus { major, .. } => major,
        _ => 0.0,
    };
    let r = x.x.hypot(x.y);
    (x.y.atan2(x.x), x.z.atan2(r - major))
}

/// Triangles whose orientation in the `(u, v)` chart flips under transport.
///
/// Image angles are unwrapped to the periodic copy nearest to the source.
pub fn inverted_triangles(surface: &Surface, cloud: &TransportedCloud) -> usize {
    let wrap = |a: f64, reference: f64| reference + (a - reference + PI).rem_euclid(2.0 * PI) - PI;
    let chart = |p: &Vec3| torus_angles(surface, p);
    let area = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    cloud
        .mesh
        .triangles
        .iter()
        .filter(|t| {
            let src: Vec<(f64, f64)> = t.iter().map(|&k| chart(&cloud.mesh.points[k])).collect();
            let base = src[0];
            let s: Vec<(f64, f64)> = src.iter().map(|&(u, v)| (wrap(u, base.0), wrap(v, base.1))).collect();
            let d: Vec<(f64, f64)> = t
                .iter()
                .map(|&k| {
                    let (u, v) = chart(&cloud.images[k]);
                    (wrap(u, base.0), wrap(v, base.1))
                })
                .collect();
            area(s[0], s[1], s[2]) * area(d[0], d[1], d[2]) <= 0.0
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sq_geodesic_density_at_equator() {
        let f = exact_axisymmetric_density(CostKind::SqGeodesicSphere, 3.0, PI / 2.0);
        assert_abs_diff_eq!(f, (1.0f64 / 3.0).cos() / (4.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn log_density_matches_z_form() {
        let a0 = 3.0f64;
        for z in [-0.7, -0.2, 0.0, 0.4, 0.9] {
            let theta = f64::acos(z);
            let s2 = 1.0 - z * z;
            let z_form = (PI - theta - ((s2 - a0 * a0) / (s2 + a0 * a0)).acos()).sin() / (4.0 * PI * s2.sqrt())
                * (-1.0 + 2.0 * a0 * z / (s2 + a0 * a0));
            assert_abs_diff_eq!(exact_axisymmetric_density(CostKind::LogReflectorSphere, a0, theta), z_form, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(exact_axisymmetric_density(CostKind::LogReflectorSphere, 3.0, PI / 2.0), 0.0636620, epsilon = 1e-7);
    }

    #[test]
    fn pole_series_is_continuous() {
        for kind in [CostKind::SqGeodesicSphere, CostKind::LogReflectorSphere] {
            for a0 in [2.0, 3.0, 5.0] {
                let below = exact_axisymmetric_density(kind, a0, POLE_SWITCH * (1.0 - 1e-9));
                let above = exact_axisymmetric_density(kind, a0, POLE_SWITCH * (1.0 + 1e-9));
                assert!((below - above).abs() < 1e-12, "{kind:?} a0={a0}: {below} vs {above}");
                let below = exact_axisymmetric_density(kind, a0, PI - POLE_SWITCH * (1.0 - 1e-9));
                let above = exact_axisymmetric_density(kind, a0, PI - POLE_SWITCH * (1.0 + 1e-9));
                assert!((below - above).abs() < 1e-12, "{kind:?} a0={a0} south: {below} vs {above}");
            }
        }
    }

    #[test]
    fn exact_map_pushes_source_to_uniform() {
        // Mass of the source cap θ ≤ t must equal the uniform mass of the cap θ ≤ T(t).
        for kind in [CostKind::SqGeodesicSphere, CostKind::LogReflectorSphere] {
            let sol = AnalyticSolution::new(kind, 3.0).unwrap();
            let n = 20000;
            let mut mass = 0.0;
            let dt = PI / n as f64;
            for i in 0..n {
                let t = (i as f64 + 0.5) * dt;
                mass += exact_axisymmetric_density(kind, 3.0, t) * t.sin() * dt * 2.0 * PI;
                if (i + 1) % 4000 == 0 {
                    let edge = (i + 1) as f64 * dt;
                    let image = sol.image_angle(edge);
                    let uniform = match kind {
                        CostKind::SqGeodesicSphere => (1.0 - image.cos()) / 2.0,
                        _ => (1.0 + image.cos()) / 2.0,
                    };
                    assert!((mass - uniform).abs() < 1e-6, "{kind:?} at {edge}: {mass} vs {uniform}");
                }
            }
        }
    }

    #[test]
    fn identity_pushforward_is_exact() {
        let grid = NarrowbandGrid::build(Surface::UnitSphere, 0.1, 0.2).unwrap();
        let cost = CostModel::new(CostKind::SqGeodesicSphere, 8.0, Surface::UnitSphere).unwrap();
        let mappings: Vec<MappingResult> = (0..grid.n_interior())
            .map(|i| {
                let d = grid.data(i);
                cost.map_from_parts(&d.closest_point, &Vec3::zeros(), d.phi).unwrap()
            })
            .collect();
        let u = SurfaceDensity::uniform(&Surface::UnitSphere);
        let (a, b) = pushforward_cap_check(&grid, &mappings, &u, &u, PI / 3.0, 0.2).unwrap();
        assert_abs_diff_eq!(a, (1.0 - (PI / 3.0).cos()) / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        assert!(level_set_defect(&grid, &mappings) < 1e-12);
    }

    #[test]
    fn reflector_examples() {
        let grid = NarrowbandGrid::build(Surface::UnitSphere, 0.1, 0.2).unwrap();
        let dirs = lat_long_samples(10, 20, 0.01);
        let zero = vec![0.0; grid.len()];
        assert!(reflector_shape(&zero, &grid, &dirs).unwrap().iter().all(|(_, r)| *r == 1.0));
        let v: Vec<f64> = (0..grid.len()).map(|i| grid.data(i).closest_point.z / 3.0 + 1.0 / 3.0).collect();
        for (x, r) in reflector_shape(&v, &grid, &dirs).unwrap() {
            assert!((r - (-(x.z + 1.0) / 3.0).exp()).abs() < 2e-3);
        }
    }

    #[test]
    fn sampled_exact_potential_has_small_error() {
        let grid = NarrowbandGrid::build(Surface::UnitSphere, 0.05, 0.2).unwrap();
        let sol = AnalyticSolution::new(CostKind::SqGeodesicSphere, 3.0).unwrap();
        let v: Vec<f64> = (0..grid.len()).map(|i| sol.potential(&grid.data(i).closest_point)).collect();
        let e = linf_error(&v, &grid, &sol).unwrap();
        assert!(e < 3e-3, "{e}");
    }

    #[test]
    fn mesh_connectivity() {
        let m = SurfaceMesh::sphere(8, 16);
        assert_eq!(m.points.len(), 128);
        assert_eq!(m.triangles.len(), 2 * 7 * 16);
        let torus = Surface::torus(0.65, 1.3).unwrap();
        let t = SurfaceMesh::torus(&torus, 12, 8).unwrap();
        assert_eq!(t.edges.len(), 2 * 96);
        let cloud = TransportedCloud { images: t.points.clone(), mesh: t };
        assert_eq!(inverted_triangles(&torus, &cloud), 0);
        let mut swapped = cloud.clone();
        swapped.images.swap(0, 1);
        let bad = inverted_triangles(&torus, &swapped);
        assert!(bad > 0 && bad < swapped.mesh.triangles.len());
    }

    #[test]
    fn neumann_defect_sees_the_normal_slope() {
        let grid = NarrowbandGrid::build(Surface::NorthernHemisphere, 0.1, 0.2).unwrap();
        let even: Vec<f64> = (0..grid.len()).map(|i| grid.position(i).z.powi(2)).collect();
        assert!(neumann_defect(&even, &grid) < 1e-12);
        let odd: Vec<f64> = (0..grid.len()).map(|i| grid.position(i).z).collect();
        assert_abs_diff_eq!(neumann_defect(&odd, &grid), 1.0, epsilon = 1e-12);
    }
}
