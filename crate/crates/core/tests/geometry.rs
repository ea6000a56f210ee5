use proptest::prelude::*;
use tubeot_core::geometry::NodeKind;
use tubeot_core::{NarrowbandGrid, Surface, Vec3};

fn torus() -> Surface {
    Surface::torus(0.65, 1.3).unwrap()
}

/// A point at signed distance `d` from the surface, from uniform samples.
fn band_point(surface: Surface, u: f64, w: f64, d: f64) -> Vec3 {
    use std::f64::consts::PI;
    match surface {
        Surface::Torus { minor, major } => {
            let (a, b) = (2.0 * PI * u, 2.0 * PI * w);
            let r = minor + d;
            Vec3::new((major + r * b.cos()) * a.cos(), (major + r * b.cos()) * a.sin(), r * b.sin())
        }
        _ => {
            let (t, p) = ((2.0 * u - 1.0).acos(), 2.0 * PI * w);
            Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()) * (1.0 + d)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn closest_point_invariants(u in 0.0..1.0f64, w in 0.0..1.0f64, d in -0.2..0.2f64, on_torus in any::<bool>()) {
        let s = if on_torus { torus() } else { Surface::UnitSphere };
        let z = band_point(s, u, w, d);
        let p = s.closest_point(&z).unwrap();
        let n = s.normal(&z).unwrap();
        prop_assert!((s.closest_point(&p).unwrap() - p).norm() < 1e-10);
        prop_assert!((s.signed_distance(&z) - n.dot(&(z - p))).abs() < 1e-10);
        prop_assert!((s.normal(&p).unwrap() - n).norm() < 1e-10);
        prop_assert!((s.signed_distance(&z) - d).abs() < 1e-10);
    }
}

#[test]
fn grid_sizes_match_reference_counts() {
    let sphere = NarrowbandGrid::build(Surface::UnitSphere, 0.1, 0.2).unwrap();
    assert!((sphere.n_interior() as f64 / 5038.0 - 1.0).abs() < 0.02, "sphere {}", sphere.n_interior());

    // The reference hemisphere count includes the sphere band points less
    // than epsilon below the equator plane, counted here as the collar.
    let hemi = NarrowbandGrid::build(Surface::NorthernHemisphere, 0.05, 0.2).unwrap();
    let n = hemi.band_node_count();
    assert!((n as f64 / 24208.0 - 1.0).abs() < 0.02, "hemisphere {n} ({} interior, {} boundary, {} ghost)", hemi.n_interior(), hemi.n_boundary(), hemi.n_ghost());

    let tor = NarrowbandGrid::build(torus(), 0.05, 0.2).unwrap();
    assert!((tor.n_interior() as f64 / 106304.0 - 1.0).abs() < 0.02, "torus {}", tor.n_interior());
}

#[test]
fn counts_grow_with_band_width() {
    let mut last = 0;
    for eps in [0.1, 0.15, 0.2, 0.25] {
        let n = NarrowbandGrid::build(Surface::UnitSphere, 0.05, eps).unwrap().n_interior();
        assert!(n > last, "eps {eps}: {n} <= {last}");
        last = n;
    }
}

#[test]
fn every_interior_stencil_is_resolved() {
    for s in [Surface::UnitSphere, Surface::NorthernHemisphere, torus()] {
        let grid = NarrowbandGrid::build(s, 0.1, 0.2).unwrap();
        for i in 0..grid.n_interior() {
            assert_eq!(grid.kind(i), NodeKind::Interior);
            let l = grid.lattice(i);
            for &nb in grid.stencil(i) {
                let m = grid.lattice(nb as usize);
                let off: i32 = (0..3).map(|k| (m[k] - l[k]).abs()).sum();
                assert!((1..=2).contains(&off));
            }
            for &c in &grid.projection_cell(i).corners {
                assert!((c as usize) < grid.len());
            }
        }
    }
}
