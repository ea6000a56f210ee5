use tubeot_core::fd::{apply_closure, interp_trilinear};
use tubeot_core::validate::band_mass;
use tubeot_core::{
    AnalyticSolution, CostKind, CostModel, ExtendedDensity, GridFunction, NarrowbandGrid, ResidualOperator, Surface,
    SurfaceDensity, Vec3,
};

fn extended_mass(surface: Surface, density: SurfaceDensity, h: f64, eps: f64) -> f64 {
    let grid = NarrowbandGrid::build(surface, h, eps).unwrap();
    let ext = ExtendedDensity::new(density, surface, eps, grid.jacobian_step());
    let values: Vec<f64> = (0..grid.n_interior()).map(|i| ext.eval(&grid.position(i)).unwrap()).collect();
    band_mass(&grid, &values)
}

#[test]
fn extended_densities_carry_unit_mass() {
    let sphere = [
        SurfaceDensity::uniform(&Surface::UnitSphere),
        SurfaceDensity::AxisymmetricSqGeoExact { a0: 3.0 },
        SurfaceDensity::AxisymmetricLogExact { a0: 3.0 },
        SurfaceDensity::polar_gaussian_north(),
        SurfaceDensity::polar_gaussian_south(),
        SurfaceDensity::gaussian_cap_x(),
        SurfaceDensity::headlight_peanut(),
    ];
    for d in sphere {
        let m = extended_mass(Surface::UnitSphere, d.clone(), 0.05, 0.2);
        assert!((m - 1.0).abs() < 2e-3, "{d:?}: {m}");
    }
    let torus = Surface::torus(0.65, 1.3).unwrap();
    let m = extended_mass(torus, SurfaceDensity::torus_linear(0.5, &torus).unwrap(), 0.05, 0.2);
    assert!((m - 1.0).abs() < 2e-3, "torus: {m}");
}

#[test]
fn discontinuous_density_mass_converges_at_first_order() {
    // Lattice sampling of the jump costs O(h) in the Riemann sum.
    let d = SurfaceDensity::discontinuous_cap();
    let coarse = extended_mass(Surface::UnitSphere, d.clone(), 0.05, 0.2);
    let fine = extended_mass(Surface::UnitSphere, d, 0.025, 0.2);
    assert!((coarse - 1.0).abs() < 5e-3, "{coarse}");
    assert!((fine - 1.0).abs() < 2e-3, "{fine}");
}

/// Interpolation error of the closure on a normal-constant field.
fn closure_error(h: f64) -> f64 {
    let grid = NarrowbandGrid::build(Surface::UnitSphere, h, 0.2).unwrap();
    let psi = |x: &Vec3| (2.0 * x.x).sin() + x.y * x.z;
    let exact = |z: &Vec3| psi(&(z / z.norm()));
    let mut v = GridFunction::from_fn(&grid, exact);
    for i in grid.n_interior()..grid.len() {
        v[i] = 0.0;
    }
    apply_closure(&mut v, &grid);
    (grid.n_interior()..grid.n_interior() + grid.n_boundary())
        .map(|i| (v[i] - exact(&grid.position(i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn closure_is_second_order_on_normal_constant_fields() {
    let (coarse, fine) = (closure_error(0.1), closure_error(0.05));
    assert!(coarse / fine > 3.0, "{coarse} -> {fine}");
}

#[test]
fn interpolation_reproduces_trilinear_monomials() {
    let grid = NarrowbandGrid::build(Surface::UnitSphere, 0.1, 0.2).unwrap();
    let f = |z: &Vec3| 1.0 + z.x - 2.0 * z.y + z.x * z.y * z.z;
    let v = GridFunction::from_fn(&grid, f);
    for p in [Vec3::new(0.33, 0.41, 0.85), Vec3::new(-0.7, 0.05, -0.68)] {
        let p = p.normalize();
        assert!((interp_trilinear(&v, &grid, &p).unwrap() - f(&p)).abs() < 1e-13);
    }
}

/// Largest residual of the closed interpolant of the exact potential, over
/// nodes whose stencils stay interior and over the remaining edge nodes.
fn exact_residual(h: f64) -> (f64, f64) {
    let grid = NarrowbandGrid::build(Surface::UnitSphere, h, 0.2).unwrap();
    let exact = AnalyticSolution::new(CostKind::SqGeodesicSphere, 3.0).unwrap();
    let cost = CostModel::new(CostKind::SqGeodesicSphere, 8.0, Surface::UnitSphere).unwrap();
    let f = ExtendedDensity::new(exact.source(), Surface::UnitSphere, 0.2, grid.jacobian_step());
    let g = ExtendedDensity::new(exact.target(), Surface::UnitSphere, 0.2, grid.jacobian_step());
    let op = ResidualOperator::new(&grid, cost, &f, &g).unwrap();
    let mut v = GridFunction::from_fn(&grid, |z| exact.potential(&(z / z.norm())));
    apply_closure(&mut v, &grid);
    let r = op.evaluate(&v).unwrap();
    let (mut inner, mut edge) = (0.0f64, 0.0f64);
    for (i, x) in r.values.iter().enumerate() {
        if grid.stencil(i).iter().all(|&nb| (nb as usize) < grid.n_interior()) {
            inner = inner.max(x.abs());
        } else {
            edge = edge.max(x.abs());
        }
    }
    (inner, edge)
}

// Closure values carry the O(h²) interpolation error, which the second
// differences divide by h², so the residual next to the band edge stays
// O(1) while the rest of the band is second order.
#[test]
fn exact_potential_residual_is_second_order_away_from_the_edge() {
    let r: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h| exact_residual(h)).collect();
    let orders: Vec<f64> = r.windows(2).map(|w| (w[0].0 / w[1].0).log2()).collect();
    assert!(orders.iter().all(|&p| p >= 1.5), "residuals {r:?}, orders {orders:?}");
    for (_, edge) in &r {
        assert!(*edge > r[2].0 && *edge < 5.0, "edge residual {edge}");
    }
}
