//! Benchmark fixtures shared by the criterion benches.

use tubeot_core::{CostKind, CostModel, ExtendedDensity, NarrowbandGrid, Surface, SurfaceDensity};

/// Exact-solution sphere setup: grid, cost, source and uniform target.
pub fn sphere_fixture(h: f64, epsilon: f64) -> (NarrowbandGrid, CostModel, ExtendedDensity, ExtendedDensity) {
    let grid = NarrowbandGrid::build(Surface::UnitSphere, h, epsilon).expect("valid sphere grid");
    let cost = CostModel::new(CostKind::SqGeodesicSphere, 8.0, Surface::UnitSphere).expect("valid cost");
    let step = grid.jacobian_step();
    let f = ExtendedDensity::new(SurfaceDensity::AxisymmetricSqGeoExact { a0: 3.0 }, Surface::UnitSphere, epsilon, step);
    let g = ExtendedDensity::new(SurfaceDensity::uniform(&Surface::UnitSphere), Surface::UnitSphere, epsilon, step);
    (grid, cost, f, g)
}

/// Torus setup with the linear source density and uniform target.
pub fn torus_fixture(h: f64, epsilon: f64) -> (NarrowbandGrid, CostModel, ExtendedDensity, ExtendedDensity) {
    let torus = Surface::torus(0.65, 1.3).expect("valid torus");
    let grid = NarrowbandGrid::build(torus, h, epsilon).expect("valid torus grid");
    let cost = CostModel::new(CostKind::EuclideanSurface, 8.0, torus).expect("valid cost");
    let step = grid.jacobian_step();
    let f = ExtendedDensity::new(SurfaceDensity::torus_linear(1.0, &torus).expect("torus density"), torus, epsilon, step);
    let g = ExtendedDensity::new(SurfaceDensity::uniform(&torus), torus, epsilon, step);
    (grid, cost, f, g)
}
