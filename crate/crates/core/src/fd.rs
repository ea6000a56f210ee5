//! Centered-difference kernels on the narrowband grid, trilinear
//! interpolation, the closure of out-of-band nodes and the residual
//! operator of the discretized transport equation.

use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::cost::{CostKind, CostModel, MappingResult};
use crate::density::ExtendedDensity;
use crate::error::{Error, Result};
use crate::geometry::{Closure, NarrowbandGrid, NodeKind, Surface, Vec3, AXIS_OFFSETS, DIAGONAL_OFFSETS};

/// Smallest admissible target density value at a mapped point.
pub const TARGET_FLOOR: f64 = 1e-12;

/// Values at every grid node, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn constant(grid: &NarrowbandGrid, value: f64) -> Self {
        GridFunction(vec![value; grid.len()])
    }

    pub fn zeros(grid: &NarrowbandGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every node position.
    pub fn from_fn(grid: &NarrowbandGrid, f: impl Fn(&Vec3) -> f64 + Sync) -> Self {
        GridFunction((0..grid.len()).into_par_iter().map(|i| f(&grid.position(i))).collect())
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        GridFunction(values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Minimum over the first `n_interior` entries.
    pub fn interior_min(&self, grid: &NarrowbandGrid) -> f64 {
        self.0[..grid.n_interior()].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Deref for GridFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GridFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Residual values at the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub values: Vec<f64>,
    pub max_abs: f64,
    /// Nodes whose exponential map argument was clamped.
    pub clamp_events: usize,
}

/// Centered-difference gradient at an interior node.
#[inline]
pub fn grad_h(v: &[f64], grid: &NarrowbandGrid, node: usize) -> Vec3 {
    let s = grid.stencil(node);
    let inv = 0.5 / grid.h();
    Vec3::new(
        (v[s[0] as usize] - v[s[1] as usize]) * inv,
        (v[s[2] as usize] - v[s[3] as usize]) * inv,
        (v[s[4] as usize] - v[s[5] as usize]) * inv,
    )
}

/// Centered-difference Hessian from the center value and the 18 stencil
/// values ordered as the grid stencil.
#[inline]
pub fn hessian_from_stencil(center: f64, u: &[f64; 18], h: f64) -> Matrix3<f64> {
    let inv2 = 1.0 / (h * h);
    let inv4 = 0.25 * inv2;
    let xx = (u[0] + u[1] - 2.0 * center) * inv2;
    let yy = (u[2] + u[3] - 2.0 * center) * inv2;
    let zz = (u[4] + u[5] - 2.0 * center) * inv2;
    let xy = (u[6] + u[7] - u[8] - u[9]) * inv4;
    let xz = (u[10] + u[11] - u[12] - u[13]) * inv4;
    let yz = (u[14] + u[15] - u[16] - u[17]) * inv4;
    Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
}

#[inline]
fn det_symmetric(m: &Matrix3<f64>) -> f64 {
    let (a, b, c) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
    let (d, e, f) = (m[(0, 1)], m[(0, 2)], m[(1, 2)]);
    a * (b * c - f * f) - d * (d * c - f * e) + e * (d * f - b * e)
}

/// Determinant of the centered-difference Hessian of `u` at an interior node.
pub fn hessian_det_h(grid: &NarrowbandGrid, node: usize, u: impl Fn(&Vec3) -> f64) -> f64 {
    let z = grid.position(node);
    let h = grid.h();
    let mut vals = [0.0; 18];
    for (slot, off) in vals.iter_mut().zip(AXIS_OFFSETS.iter().chain(DIAGONAL_OFFSETS.iter())) {
        *slot = u(&(z + Vec3::new(off[0] as f64, off[1] as f64, off[2] as f64) * h));
    }
    det_symmetric(&hessian_from_stencil(u(&z), &vals, h))
}

/// Trilinear interpolant of `v` at `p`.
pub fn interp_trilinear(v: &[f64], grid: &NarrowbandGrid, p: &Vec3) -> Result<f64> {
    Ok(grid.cell_at(p)?.apply(v))
}

/// `(I - n⊗n)∇ʰv` at every node where it can be formed.
///
/// Interior nodes use their own stencil. Hemisphere ghosts reflect the
/// value of their mirror node. Boundary nodes get zero: they never appear
/// in projection cells, whose corners lie within `√3h < ε` of the surface.
pub fn tangential_gradient_field(v: &[f64], grid: &NarrowbandGrid) -> Vec<Vec3> {
    let n_int = grid.n_interior();
    let mut field: Vec<Vec3> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if i < n_int {
                let g = grad_h(v, grid, i);
                let n = grid.data(i).normal;
                g - n * n.dot(&g)
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    for i in n_int + grid.n_boundary()..grid.len() {
        if let Closure::Mirror(m) = grid.closure(i) {
            let g = field[*m as usize];
            field[i] = Vec3::new(g.x, g.y, -g.z);
        }
    }
    field
}

/// Interpolated tangential gradient at the closest point of an interior
/// node, re-projected onto the tangent plane there.
#[inline]
pub fn tangential_gradient_at_projection(field: &[Vec3], grid: &NarrowbandGrid, node: usize) -> Vec3 {
    let p = grid.projection_cell(node).apply_vec(field);
    let n = grid.data(node).normal;
    p - n * n.dot(&p)
}

/// Interpolated, re-projected tangential gradient at a point `x` on the surface.
pub fn tangential_gradient_at(field: &[Vec3], grid: &NarrowbandGrid, x: &Vec3) -> Result<Vec3> {
    let p = grid.cell_at(x)?.apply_vec(field);
    let n = grid.surface().normal(x)?;
    Ok(p - n * n.dot(&p))
}

/// Overwrites boundary nodes with the interpolant at their closest points
/// and ghost nodes with their mirror values. All boundary values are
/// computed from the field as it was on entry.
pub fn apply_closure(v: &mut [f64], grid: &NarrowbandGrid) {
    let n_int = grid.n_interior();
    let n_bnd = grid.n_boundary();
    let fresh: Vec<f64> = (n_int..n_int + n_bnd)
        .into_par_iter()
        .map(|i| match grid.closure(i) {
            Closure::Interpolate(cell) => cell.apply(v),
            Closure::Mirror(m) => v[*m as usize],
        })
        .collect();
    v[n_int..n_int + n_bnd].copy_from_slice(&fresh);
    for i in n_int + n_bnd..grid.len() {
        if let Closure::Mirror(m) = grid.closure(i) {
            v[i] = v[*m as usize];
        }
    }
}

/// Discrete residual `F(v)(x_i) = det D²ₕ[v + c_σ(·, m̄ʰ(x_i))] - |det D²c_σ|·f̄/ḡ(m̄ʰ)`.
#[derive(Debug, Clone)]
pub struct ResidualOperator<'g> {
    grid: &'g NarrowbandGrid,
    cost: CostModel,
    target: ExtendedDensity,
    source_values: Vec<f64>,
}

struct NodeState {
    residual: f64,
    mapping: MappingResult,
}

impl<'g> ResidualOperator<'g> {
    /// The generic mixed Hessian uses nested differences of step `h/2`.
    pub fn new(grid: &'g NarrowbandGrid, cost: CostModel, source: &ExtendedDensity, target: &ExtendedDensity) -> Result<Self> {
        if cost.surface() != grid.surface() {
            return Err(Error::Config("cost model and grid are defined on different surfaces".into()));
        }
        let cost = cost.with_fd_step(grid.h() / 2.0);
        let source_values = (0..grid.n_interior())
            .map(|i| {
                let d = grid.data(i);
                source.from_surface_value(source.base().eval(&d.closest_point), d.jacobian)
            })
            .collect();
        Ok(ResidualOperator { grid, cost, target: target.clone(), source_values })
    }

    pub fn grid(&self) -> &NarrowbandGrid {
        self.grid
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    /// `f̄` at the interior nodes.
    pub fn source_values(&self) -> &[f64] {
        &self.source_values
    }

    /// Residual at every interior node. `v` must already be closed.
    pub fn evaluate(&self, v: &[f64]) -> Result<ResidualField> {
        let mut values = vec![0.0; self.grid.n_interior()];
        let clamp_events = self.evaluate_into(v, &mut values)?;
        let max_abs = values.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        Ok(ResidualField { values, max_abs, clamp_events })
    }

    /// Writes residuals into `out` and returns the number of clamped maps.
    pub fn evaluate_into(&self, v: &[f64], out: &mut [f64]) -> Result<usize> {
        let field = tangential_gradient_field(v, self.grid);
        let clamps = AtomicUsize::new(0);
        out.par_iter_mut().enumerate().try_for_each(|(i, r)| {
            let s = self.node(v, &field, i)?;
            if s.mapping.clamped {
                clamps.fetch_add(1, Ordering::Relaxed);
            }
            *r = s.residual;
            Ok::<(), Error>(())
        })?;
        Ok(clamps.into_inner())
    }

    /// Discrete transport map at every interior node.
    pub fn mappings(&self, v: &[f64]) -> Result<Vec<MappingResult>> {
        let field = tangential_gradient_field(v, self.grid);
        (0..self.grid.n_interior()).into_par_iter().map(|i| self.node_mapping(v, &field, i)).collect()
    }

    #[inline]
    fn node_mapping(&self, v: &[f64], field: &[Vec3], i: usize) -> Result<MappingResult> {
        let d = self.grid.data(i);
        let gn = grad_h(v, self.grid, i).dot(&d.normal);
        let p = tangential_gradient_at_projection(field, self.grid, i);
        self.cost.map_from_parts(&d.closest_point, &p, d.phi + gn / self.cost.sigma())
    }

    fn node(&self, v: &[f64], field: &[Vec3], i: usize) -> Result<NodeState> {
        let grid = self.grid;
        let d = grid.data(i);
        let mapping = self.node_mapping(v, field, i)?;
        let y = mapping.tangential_part;
        let off = mapping.normal_offset;

        let stencil = grid.stencil(i);
        let mut u = [0.0; 18];
        for (slot, &nb) in u.iter_mut().zip(stencil.iter()) {
            let nd = grid.data(nb as usize);
            *slot = v[nb as usize] + self.cost.cost_from_parts(&nd.closest_point, nd.phi, &y, off);
        }
        let center = v[i] + self.cost.cost_from_parts(&d.closest_point, d.phi, &y, off);
        let det = det_symmetric(&hessian_from_stencil(center, &u, grid.h()));

        let (mixed, jac_target) = match self.cost.kind() {
            CostKind::SqGeodesicSphere | CostKind::LogReflectorSphere => {
                let q = tangential_gradient_at_projection(field, grid, i).norm();
                let r = 1.0 + off;
                (self.cost.sphere_mixed_hessian(q, d.phi, off), 1.0 / (r * r))
            }
            CostKind::EuclideanSurface => {
                let m = self.cost.mixed_hessian_generic(&grid.position(i), &mapping.target, self.cost.fd_step())?;
                (m, grid.surface().jacobian(&mapping.target, grid.jacobian_step())?)
            }
        };
        if !(mixed.is_finite() && mixed > 0.0) {
            return Err(Error::MixedHessian { node: i, value: mixed });
        }
        let g = self.target.from_surface_value(self.target.base().eval(&y), jac_target);
        if !(g > TARGET_FLOOR) {
            return Err(Error::DegenerateTarget { node: i, value: g });
        }
        let residual = det - mixed * self.source_values[i] / g;
        if !residual.is_finite() {
            return Err(Error::NonFinite { node: i });
        }
        Ok(NodeState { residual, mapping })
    }
}

/// Closes `v` and evaluates the residual operator once.
pub fn residual_f0(
    v: &GridFunction,
    grid: &NarrowbandGrid,
    cost: &CostModel,
    source: &ExtendedDensity,
    target: &ExtendedDensity,
) -> Result<ResidualField> {
    let mut closed = v.clone();
    apply_closure(&mut closed, grid);
    ResidualOperator::new(grid, *cost, source, target)?.evaluate(&closed)
}

/// True when `node` is an interior node of a surface without boundary
/// or an interior node strictly above the hemisphere's equator plane.
pub fn is_regular_interior(grid: &NarrowbandGrid, node: usize) -> bool {
    grid.kind(node) == NodeKind::Interior && !(grid.surface() == Surface::NorthernHemisphere && grid.lattice(node)[2] == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SurfaceDensity;
    use approx::assert_abs_diff_eq;

    fn sphere_grid() -> NarrowbandGrid {
        NarrowbandGrid::build(Surface::UnitSphere, 0.1, 0.2).unwrap()
    }

    fn node_near(grid: &NarrowbandGrid, p: Vec3) -> usize {
        (0..grid.n_interior())
            .min_by(|&a, &b| (grid.position(a) - p).norm().total_cmp(&(grid.position(b) - p).norm()))
            .unwrap()
    }

    #[test]
    fn gradient_examples() {
        let grid = sphere_grid();
        let i = node_near(&grid, Vec3::new(1.0, 0.0, 0.0));
        let lin = GridFunction::from_fn(&grid, |z| z.dot(&Vec3::new(1.0, 2.0, 3.0)));
        assert_abs_diff_eq!(grad_h(&lin, &grid, i), Vec3::new(1.0, 2.0, 3.0), epsilon = 1e-12);
        let quad = GridFunction::from_fn(&grid, |z| 0.5 * z.norm_squared());
        assert_abs_diff_eq!(grad_h(&quad, &grid, i), grid.position(i), epsilon = 1e-12);
        let s = GridFunction::from_fn(&grid, |z| z.x.sin());
        let j = node_near(&grid, Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(grid.position(j).x, 0.0);
        assert_abs_diff_eq!(grad_h(&s, &grid, j).x, 0.1f64.sin() / 0.1, epsilon = 1e-14);
    }

    #[test]
    fn hessian_determinant_examples() {
        let grid = sphere_grid();
        let i = node_near(&grid, Vec3::new(0.3, 0.5, 0.8));
        assert_abs_diff_eq!(hessian_det_h(&grid, i, |z| 0.5 * z.norm_squared()), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hessian_det_h(&grid, i, |z| z.x * z.x), 0.0, epsilon = 1e-9);
        let q = |z: &Vec3| z.x * z.x + 2.0 * z.y * z.y + 3.0 * z.z * z.z + z.x * z.y;
        assert_abs_diff_eq!(hessian_det_h(&grid, i, q), 42.0, epsilon = 1e-8);
    }

    #[test]
    fn interpolation_examples() {
        let grid = sphere_grid();
        let lin = GridFunction::from_fn(&grid, |z| 1.0 + z.dot(&Vec3::new(0.3, -2.0, 0.7)));
        let p = Vec3::new(0.2, 0.4, 0.9).normalize();
        assert_abs_diff_eq!(interp_trilinear(&lin, &grid, &p).unwrap(), 1.0 + p.dot(&Vec3::new(0.3, -2.0, 0.7)), epsilon = 1e-12);
        let tri = GridFunction::from_fn(&grid, |z| z.x * z.y * z.z);
        let center = Vec3::new(0.55, 0.45, 0.65);
        assert_abs_diff_eq!(interp_trilinear(&tri, &grid, &center).unwrap(), 0.55 * 0.45 * 0.65, epsilon = 1e-14);
        let node = grid.position(10);
        assert_abs_diff_eq!(interp_trilinear(&tri, &grid, &node).unwrap(), tri[10], epsilon = 1e-16);
    }

    #[test]
    fn tangential_gradient_examples() {
        let grid = sphere_grid();
        let g = Vec3::new(0.4, -1.0, 2.0);
        let lin = GridFunction::from_fn(&grid, |z| z.dot(&g));
        let field = tangential_gradient_field(&lin, &grid);
        let top = grid.index_of([0, 0, 11]).unwrap();
        assert_abs_diff_eq!(tangential_gradient_at_projection(&field, &grid, top), Vec3::new(0.4, -1.0, 0.0), epsilon = 1e-12);

        let zf = GridFunction::from_fn(&grid, |z| z.z);
        let field = tangential_gradient_field(&zf, &grid);
        let eq = grid.index_of([10, 0, 0]).unwrap();
        assert_abs_diff_eq!(tangential_gradient_at_projection(&field, &grid, eq), Vec3::z(), epsilon = 1e-12);

        let field = tangential_gradient_field(&GridFunction::constant(&grid, 2.5), &grid);
        assert_eq!(tangential_gradient_at_projection(&field, &grid, eq), Vec3::zeros());
    }

    #[test]
    fn closure_examples() {
        let grid = sphere_grid();
        let mut c = GridFunction::from_fn(&grid, |z| if z.norm() < 1.2 && z.norm() > 0.8 { 3.0 } else { -7.0 });
        for i in 0..grid.n_interior() {
            c[i] = 3.0;
        }
        apply_closure(&mut c, &grid);
        assert!(c.iter().all(|&x| (x - 3.0).abs() < 1e-14));

        let psi = |z: &Vec3| {
            let x = z.normalize();
            x.x * x.y + x.z
        };
        let mut v = GridFunction::from_fn(&grid, psi);
        let exact = v.clone();
        apply_closure(&mut v, &grid);
        let err = (grid.n_interior()..grid.len()).map(|i| (v[i] - exact[i]).abs()).fold(0.0, f64::max);
        assert!(err < 0.02, "closure error {err}");
    }

    #[test]
    fn hemisphere_closure_reflects() {
        let grid = NarrowbandGrid::build(Surface::NorthernHemisphere, 0.1, 0.2).unwrap();
        let mut v = GridFunction::from_fn(&grid, |z| z.z + 0.1 * z.x);
        apply_closure(&mut v, &grid);
        for i in grid.n_interior() + grid.n_boundary()..grid.len() {
            let l = grid.lattice(i);
            let m = grid.index_of([l[0], l[1], -l[2]]).unwrap();
            assert_eq!(v[i], v[m]);
        }
    }

    fn uniform_pair(surface: Surface, eps: f64, step: f64) -> (ExtendedDensity, ExtendedDensity) {
        let d = ExtendedDensity::new(SurfaceDensity::uniform(&surface), surface, eps, step);
        (d.clone(), d)
    }

    #[test]
    fn residual_is_shift_invariant_and_local() {
        let grid = sphere_grid();
        let cost = CostModel::new(CostKind::SqGeodesicSphere, 8.0, Surface::UnitSphere).unwrap();
        let src = ExtendedDensity::new(SurfaceDensity::AxisymmetricSqGeoExact { a0: 3.0 }, Surface::UnitSphere, 0.2, 0.05);
        let (_, tgt) = uniform_pair(Surface::UnitSphere, 0.2, 0.05);
        let op = ResidualOperator::new(&grid, cost, &src, &tgt).unwrap();
        let mut v = GridFunction::from_fn(&grid, |z| z.z / z.norm() / 3.0);
        apply_closure(&mut v, &grid);
        let base = op.evaluate(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + 0.75).collect();
        let r2 = op.evaluate(&shifted).unwrap();
        for (a, b) in base.values.iter().zip(&r2.values) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }

        let k = node_near(&grid, Vec3::new(0.6, 0.0, 0.8));
        let mut bumped = v.clone();
        bumped[k] += 1e-3;
        let r3 = op.evaluate(&bumped).unwrap();
        let mut touched = vec![false; grid.n_interior()];
        for i in 0..grid.n_interior() {
            let refs = i == k
                || grid.stencil(i).contains(&(k as u32))
                || grid.projection_cell(i).corners.iter().any(|&c| {
                    c as usize == k || (c as usize) < grid.n_interior() && grid.stencil(c as usize).contains(&(k as u32))
                });
            touched[i] = refs;
        }
        for i in 0..grid.n_interior() {
            if !touched[i] {
                assert_eq!(base.values[i], r3.values[i], "node {i} changed");
            }
        }
    }

    #[test]
    fn identity_transport_on_torus_has_small_residual_on_surface() {
        let torus = Surface::torus(0.65, 1.3).unwrap();
        let grid = NarrowbandGrid::build(torus, 0.1, 0.3).unwrap();
        let cost = CostModel::new(CostKind::EuclideanSurface, 8.0, torus).unwrap();
        let (f, g) = uniform_pair(torus, 0.3, grid.jacobian_step());
        let v = GridFunction::zeros(&grid);
        let r = residual_f0(&v, &grid, &cost, &f, &g).unwrap();
        let mut on_surface: Vec<usize> = (0..grid.n_interior()).filter(|&i| grid.data(i).phi.abs() < 0.02).collect();
        on_surface.truncate(20);
        assert!(!on_surface.is_empty());
        for i in on_surface {
            assert!(r.values[i].abs() < 0.05 * 8.0, "node {i}: {}", r.values[i]);
        }
    }
}
