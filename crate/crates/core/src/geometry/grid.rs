//! Lattice points of `hℤ³` inside the tubular neighborhood, with the
//! out-of-band nodes needed to close the difference stencils.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::{Surface, SurfacePointData, Vec3};
use crate::error::{Error, Result};

/// Axis neighbors: `+x, -x, +y, -y, +z, -z`.
pub const AXIS_OFFSETS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

/// Diagonal neighbors, four per coordinate pair `(j, k)` in the order
/// `+j+k, -j-k, -j+k, +j-k` for the pairs `xy, xz, yz`.
pub const DIAGONAL_OFFSETS: [[i32; 3]; 12] = [
    [1, 1, 0],
    [-1, -1, 0],
    [-1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [-1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, -1, -1],
    [0, -1, 1],
    [0, 1, -1],
];

const WEIGHT_DROP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Lattice point inside the band; carries an unknown.
    Interior,
    /// Out-of-band stencil node closed by interpolation at its closest point.
    Boundary,
    /// Node below the equator of a hemisphere, closed by even reflection.
    Ghost,
}

/// Trilinear interpolation stencil: 8 node indices and their weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub corners: [u32; 8],
    pub weights: [f64; 8],
}

impl Cell {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.corners.iter().zip(&self.weights).map(|(&c, w)| w * values[c as usize]).sum()
    }

    #[inline]
    pub fn apply_vec(&self, values: &[Vec3]) -> Vec3 {
        let mut out = Vec3::zeros();
        for (&c, w) in self.corners.iter().zip(&self.weights) {
            out += values[c as usize] * *w;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Closure {
    Interpolate(Cell),
    Mirror(u32),
}

/// The node set `hℤ³ ∩ T_ε` plus closure nodes, with cached geometry.
///
/// Nodes are stored interior first, then boundary, then ghost nodes, each
/// group sorted lexicographically by lattice coordinate.
#[derive(Debug, Clone)]
pub struct NarrowbandGrid {
    surface: Surface,
    h: f64,
    epsilon: f64,
    jacobian_step: f64,
    lattice: Vec<[i32; 3]>,
    index: HashMap<[i32; 3], u32>,
    n_interior: usize,
    n_boundary: usize,
    data: Vec<SurfacePointData>,
    stencils: Vec<[u32; 18]>,
    projection_cells: Vec<Cell>,
    closures: Vec<Closure>,
    collar_count: usize,
}

impl NarrowbandGrid {
    /// Builds the grid. Requires `√3·h < ε < reach`.
    pub fn build(surface: Surface, h: f64, epsilon: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("grid spacing h must be positive (got {h})")));
        }
        if epsilon <= 3f64.sqrt() * h {
            return Err(Error::Config(format!(
                "epsilon must exceed sqrt(3)*h = {:.6} for trilinear cells to be covered (got epsilon={epsilon}, h={h})",
                3f64.sqrt() * h
            )));
        }
        if epsilon >= surface.reach() {
            return Err(Error::Config(format!(
                "epsilon must stay below the reach {} of the surface (got {epsilon})",
                surface.reach()
            )));
        }
        let jacobian_step = h / 2.0;
        let pos = |l: &[i32; 3]| Vec3::new(l[0] as f64 * h, l[1] as f64 * h, l[2] as f64 * h);

        let (rxy, rz) = match surface {
            Surface::UnitSphere | Surface::NorthernHemisphere => (1.0 + epsilon, 1.0 + epsilon),
            Surface::Torus { minor, major } => (major + minor + epsilon, minor + epsilon),
        };
        let nxy = (rxy / h).ceil() as i32 + 1;
        let nz = (rz / h).ceil() as i32 + 1;

        let mut interior = Vec::new();
        let mut collar_count = 0;
        for i in -nxy..=nxy {
            for j in -nxy..=nxy {
                for k in -nz..=nz {
                    let z = pos(&[i, j, k]);
                    let inside = surface.signed_distance(&z).abs() < epsilon;
                    if surface.is_hemisphere() {
                        if k >= 0 {
                            if inside {
                                interior.push([i, j, k]);
                            }
                        } else if inside && z.z > -epsilon {
                            collar_count += 1;
                        }
                    } else if inside {
                        interior.push([i, j, k]);
                    }
                }
            }
        }
        let interior_set: HashSet<[i32; 3]> = interior.iter().copied().collect();

        let mut boundary: HashSet<[i32; 3]> = HashSet::new();
        let mut ghost: HashSet<[i32; 3]> = HashSet::new();
        let mut pending: Vec<[i32; 3]> = Vec::new();
        let mut enqueue = |l: [i32; 3], pending: &mut Vec<[i32; 3]>| {
            if !interior_set.contains(&l) && !boundary.contains(&l) && !ghost.contains(&l) {
                if surface.is_hemisphere() && l[2] < 0 {
                    ghost.insert(l);
                } else {
                    boundary.insert(l);
                }
                pending.push(l);
            }
        };

        for l in &interior {
            for off in AXIS_OFFSETS.iter().chain(DIAGONAL_OFFSETS.iter()) {
                enqueue([l[0] + off[0], l[1] + off[1], l[2] + off[2]], &mut pending);
            }
            let p = surface.closest_point(&pos(l))?;
            for corner in cell_corners(&p, h).0 {
                enqueue(corner, &mut pending);
            }
        }
        while let Some(l) = pending.pop() {
            if surface.is_hemisphere() && l[2] < 0 {
                enqueue([l[0], l[1], -l[2]], &mut pending);
            } else {
                let p = surface.closest_point(&pos(&l))?;
                for corner in cell_corners(&p, h).0 {
                    enqueue(corner, &mut pending);
                }
            }
        }

        let mut boundary: Vec<[i32; 3]> = boundary.into_iter().collect();
        let mut ghost: Vec<[i32; 3]> = ghost.into_iter().collect();
        boundary.sort_unstable();
        ghost.sort_unstable();
        let n_interior = interior.len();
        let n_boundary = boundary.len();

        let mut lattice = interior;
        lattice.extend(boundary);
        lattice.extend(ghost);
        let index: HashMap<[i32; 3], u32> = lattice.iter().enumerate().map(|(i, l)| (*l, i as u32)).collect();

        let data = lattice
            .par_iter()
            .map(|l| surface.point_data(&pos(l), jacobian_step))
            .collect::<Result<Vec<_>>>()?;

        let mut grid = NarrowbandGrid {
            surface,
            h,
            epsilon,
            jacobian_step,
            lattice,
            index,
            n_interior,
            n_boundary,
            data,
            stencils: Vec::new(),
            projection_cells: Vec::new(),
            closures: Vec::new(),
            collar_count,
        };

        let lookup = |l: [i32; 3]| grid.index[&l];
        grid.stencils = grid.lattice[..n_interior]
            .iter()
            .map(|l| {
                let mut s = [0u32; 18];
                for (slot, off) in s.iter_mut().zip(AXIS_OFFSETS.iter().chain(DIAGONAL_OFFSETS.iter())) {
                    *slot = lookup([l[0] + off[0], l[1] + off[1], l[2] + off[2]]);
                }
                s
            })
            .collect();
        grid.projection_cells = (0..n_interior)
            .map(|i| grid.cell_at(&grid.data[i].closest_point))
            .collect::<Result<Vec<_>>>()?;
        grid.closures = (n_interior..grid.lattice.len())
            .map(|i| {
                let l = grid.lattice[i];
                if i < n_interior + n_boundary {
                    grid.cell_at(&grid.data[i].closest_point).map(Closure::Interpolate)
                } else {
                    Ok(Closure::Mirror(lookup([l[0], l[1], -l[2]])))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(grid)
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Step used for finite-difference Jacobians of the closest-point map.
    pub fn jacobian_step(&self) -> f64 {
        self.jacobian_step
    }

    /// Total number of stored nodes (interior, boundary and ghost).
    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    pub fn n_ghost(&self) -> usize {
        self.lattice.len() - self.n_interior - self.n_boundary
    }

    /// Lattice points of the hemisphere's equatorial collar: sphere band
    /// points less than `ε` below the plane `z = 0`. Zero for closed surfaces.
    pub fn collar_count(&self) -> usize {
        self.collar_count
    }

    /// Number of lattice points in the tubular neighborhood of the surface;
    /// for the hemisphere this includes the equatorial collar.
    pub fn band_node_count(&self) -> usize {
        self.n_interior + self.collar_count
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        if node < self.n_interior {
            NodeKind::Interior
        } else if node < self.n_interior + self.n_boundary {
            NodeKind::Boundary
        } else {
            NodeKind::Ghost
        }
    }

    pub fn lattice(&self, node: usize) -> [i32; 3] {
        self.lattice[node]
    }

    pub fn position(&self, node: usize) -> Vec3 {
        let l = self.lattice[node];
        Vec3::new(l[0] as f64 * self.h, l[1] as f64 * self.h, l[2] as f64 * self.h)
    }

    pub fn data(&self, node: usize) -> &SurfacePointData {
        &self.data[node]
    }

    pub fn index_of(&self, lattice: [i32; 3]) -> Option<usize> {
        self.index.get(&lattice).map(|&i| i as usize)
    }

    /// The 18 neighbor indices of an interior node, ordered as
    /// [`AXIS_OFFSETS`] followed by [`DIAGONAL_OFFSETS`].
    pub fn stencil(&self, node: usize) -> &[u32; 18] {
        &self.stencils[node]
    }

    /// Interpolation cell at the closest point of an interior node.
    pub fn projection_cell(&self, node: usize) -> &Cell {
        &self.projection_cells[node]
    }

    /// Closure rule of a non-interior node.
    pub fn closure(&self, node: usize) -> &Closure {
        &self.closures[node - self.n_interior]
    }

    /// Trilinear cell containing `p`. Corners carrying a vanishing weight
    /// may be absent from the grid.
    pub fn cell_at(&self, p: &Vec3) -> Result<Cell> {
        let (corners, weights) = cell_corners(p, self.h);
        let mut cell = Cell { corners: [0; 8], weights };
        let mut fallback = None;
        for (slot, l) in corners.iter().enumerate() {
            match self.index.get(l) {
                Some(&i) => {
                    cell.corners[slot] = i;
                    fallback.get_or_insert(i);
                }
                None if weights[slot].abs() <= WEIGHT_DROP => cell.weights[slot] = 0.0,
                None => return Err(Error::Coverage(*p)),
            }
        }
        let fallback = fallback.ok_or(Error::Coverage(*p))?;
        for (slot, l) in corners.iter().enumerate() {
            if !self.index.contains_key(l) {
                cell.corners[slot] = fallback;
            }
        }
        Ok(cell)
    }
}

/// Lattice corners of the cell containing `p` and their trilinear weights.
/// Corner `c` has offsets `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
pub(crate) fn cell_corners(p: &Vec3, h: f64) -> ([[i32; 3]; 8], [f64; 8]) {
    let s = p / h;
    let base = [s.x.floor(), s.y.floor(), s.z.floor()];
    let t = [s.x - base[0], s.y - base[1], s.z - base[2]];
    let mut corners = [[0i32; 3]; 8];
    let mut weights = [0.0; 8];
    for c in 0..8 {
        let mut w = 1.0;
        for d in 0..3 {
            let bit = (c >> d) & 1;
            corners[c][d] = base[d] as i32 + bit as i32;
            w *= if bit == 1 { t[d] } else { 1.0 - t[d] };
        }
        weights[c] = w;
    }
    (corners, weights)
}
