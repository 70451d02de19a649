use crate::basis::poly_dim;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Degree-k weak Galerkin layout: interior velocities in [P_k(T)]², edge
/// velocities in [P_{k-1}(e)]² on interior edges only, pressures in P_{k-1}(T).
///
/// Velocity vectors are ordered `[interior | edge]`; within a cell the first
/// component's coefficients precede the second's, and likewise on an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WgSpace {
    pub k: usize,
    /// dim P_k(T)
    pub interior_dim: usize,
    /// dim P_{k-1}(e)
    pub edge_dim: usize,
    /// dim P_{k-1}(T)
    pub pressure_dim: usize,
    pub num_cells: usize,
    /// First global edge-velocity slot of each edge, `None` on the boundary.
    pub edge_slot: Vec<Option<usize>>,
    pub n_interior: usize,
    pub n_edge: usize,
    pub n_pressure: usize,
}

impl WgSpace {
    pub fn new(mesh: &Mesh, k: usize) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(Error::InvalidArgument(format!("degree k must satisfy 1 <= k <= 3, got {k}")));
        }
        let interior_dim = poly_dim(k);
        let edge_dim = k;
        let pressure_dim = poly_dim(k - 1);
        let n_interior = 2 * interior_dim * mesh.num_cells();
        let mut next = 0;
        let edge_slot = mesh
            .edges
            .iter()
            .map(|e| {
                if e.boundary {
                    None
                } else {
                    let s = next;
                    next += 1;
                    Some(s)
                }
            })
            .collect();
        Ok(Self {
            k,
            interior_dim,
            edge_dim,
            pressure_dim,
            num_cells: mesh.num_cells(),
            edge_slot,
            n_interior,
            n_edge: 2 * edge_dim * next,
            n_pressure: pressure_dim * mesh.num_cells(),
        })
    }

    pub fn n_velocity(&self) -> usize {
        self.n_interior + self.n_edge
    }

    /// Scalar local dimension: interior coefficients then three edges.
    pub fn scalar_local_dim(&self) -> usize {
        self.interior_dim + 3 * self.edge_dim
    }

    pub fn velocity_local_dim(&self) -> usize {
        2 * self.scalar_local_dim()
    }

    /// Local velocity index of scalar local index `s` of component `comp`.
    pub fn local_velocity_index(&self, comp: usize, s: usize) -> usize {
        if s < self.interior_dim {
            comp * self.interior_dim + s
        } else {
            let e = (s - self.interior_dim) / self.edge_dim;
            let j = (s - self.interior_dim) % self.edge_dim;
            2 * self.interior_dim + e * 2 * self.edge_dim + comp * self.edge_dim + j
        }
    }

    pub fn interior_index(&self, cell: usize, comp: usize, a: usize) -> usize {
        cell * 2 * self.interior_dim + comp * self.interior_dim + a
    }

    pub fn edge_index(&self, edge: usize, comp: usize, j: usize) -> Option<usize> {
        self.edge_slot[edge].map(|s| self.n_interior + s * 2 * self.edge_dim + comp * self.edge_dim + j)
    }

    pub fn pressure_index(&self, cell: usize, a: usize) -> usize {
        cell * self.pressure_dim + a
    }

    /// Global velocity index for every local velocity index of `cell`
    /// (`None` for edge unknowns on the boundary, which are fixed to zero).
    pub fn local_to_global(&self, mesh: &Mesh, cell: usize) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(self.velocity_local_dim());
        for comp in 0..2 {
            for a in 0..self.interior_dim {
                out.push(Some(self.interior_index(cell, comp, a)));
            }
        }
        for &e in &mesh.cells[cell].edges {
            for comp in 0..2 {
                for j in 0..self.edge_dim {
                    out.push(self.edge_index(e, comp, j));
                }
            }
        }
        out
    }
}

/// Coefficients of a discrete velocity `{v_0, v_b}` and optionally a pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakFunction {
    pub velocity: Vec<f64>,
    pub pressure: Option<Vec<f64>>,
}

impl WeakFunction {
    pub fn zeros(space: &WgSpace) -> Self {
        Self {
            velocity: vec![0.0; space.n_velocity()],
            pressure: None,
        }
    }

    pub fn from_velocity(velocity: Vec<f64>) -> Self {
        Self {
            velocity,
            pressure: None,
        }
    }

    pub fn interior<'a>(&'a self, space: &WgSpace) -> &'a [f64] {
        &self.velocity[..space.n_interior]
    }

    pub fn local_velocity(&self, space: &WgSpace, mesh: &Mesh, cell: usize) -> Vec<f64> {
        space
            .local_to_global(mesh, cell)
            .into_iter()
            .map(|g| g.map_or(0.0, |i| self.velocity[i]))
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            velocity: self.velocity.iter().map(|v| v * s).collect(),
            pressure: self.pressure.as_ref().map(|p| p.iter().map(|v| v * s).collect()),
        }
    }

    pub fn sub(&self, other: &WeakFunction) -> Self {
        Self {
            velocity: self.velocity.iter().zip(&other.velocity).map(|(a, b)| a - b).collect(),
            pressure: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square_mesh;

    #[test]
    fn counts() {
        let m = build_unit_square_mesh(4).unwrap();
        let s = WgSpace::new(&m, 1).unwrap();
        assert_eq!(s.n_interior, 6 * 32);
        // 56 edges, 16 on the boundary
        assert_eq!(s.n_edge, 2 * 40);
        assert_eq!(s.n_pressure, 32);
        let s2 = WgSpace::new(&m, 2).unwrap();
        assert_eq!(s2.n_interior, 12 * 32);
        assert_eq!(s2.n_edge, 4 * 40);
        assert_eq!(s2.n_pressure, 3 * 32);
        assert!(WgSpace::new(&m, 0).is_err());
        assert!(WgSpace::new(&m, 4).is_err());
    }

    #[test]
    fn index_ranges_dense_and_disjoint() {
        let m = build_unit_square_mesh(3).unwrap();
        let s = WgSpace::new(&m, 2).unwrap();
        let mut seen = vec![false; s.n_velocity()];
        for c in 0..m.num_cells() {
            for g in s.local_to_global(&m, c).into_iter().flatten() {
                seen[g] = true;
            }
        }
        assert!(seen.iter().all(|&x| x));
        let local: Vec<usize> = (0..2)
            .flat_map(|c| (0..s.scalar_local_dim()).map(move |i| (c, i)))
            .map(|(c, i)| s.local_velocity_index(c, i))
            .collect();
        let mut sorted = local.clone();
        sorted.sort();
        assert_eq!(sorted, (0..s.velocity_local_dim()).collect::<Vec<_>>());
    }
}
