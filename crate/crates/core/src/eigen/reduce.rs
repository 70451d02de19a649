use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::{block_matrix, CsrMatrix, SparseLu};
use crate::wg::AssembledSystem;

/// The saddle-point pencil restricted to the support of the mass matrix.
///
/// With unknowns ordered `[u_0 | u_b | p]` (one pressure unknown pinned per
/// connected component) the saddle matrix `K` is nonsingular. Interior values
/// `x` are mapped by `T x`, the interior part of `K⁻¹ [M_00 x; 0]`, and the
/// reduced problem reads `G x = θ M_00 x` with the symmetric positive
/// semidefinite `G = M_00 T`; finite eigenvalues of the pencil are `λ = 1/θ`
/// over `θ > 0`. Where the edge/pressure block is invertible (k = 1) this is
/// the inverse of the Schur complement problem `S x = λ M_00 x`.
#[derive(Debug)]
pub struct ReducedPencil {
    pub n_interior: usize,
    pub n_edge: usize,
    /// Pressure unknowns kept after pinning one per connected component.
    pub kept_pressure: Vec<usize>,
    pub pinned_pressure: Vec<usize>,
    pub m00: CsrMatrix,
    /// The full saddle matrix in the ordering above.
    pub saddle: CsrMatrix,
    saddle_lu: SparseLu,
}

/// Cells grouped into connected components through shared interior edges;
/// returns the first cell of each component.
fn component_roots(system: &AssembledSystem) -> Vec<usize> {
    // cells sharing an edge unknown are coupled through B
    let space = &system.space;
    let n_cells = space.num_cells;
    let mut parent: Vec<usize> = (0..n_cells).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    // an edge unknown column in B touches the pressure rows of both neighbours
    let bt = system.b.transpose();
    for col in space.n_interior..space.n_velocity() {
        let cells: Vec<usize> = bt.row(col).map(|(r, _)| r / space.pressure_dim).collect();
        for w in cells.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut roots: Vec<usize> = (0..n_cells).filter(|&c| find(&mut parent, c) == c).collect();
    roots.sort();
    roots
}

impl ReducedPencil {
    pub fn new(system: &AssembledSystem) -> Result<Self> {
        Self::with_pinning(system, true)
    }

    /// `pin = false` keeps the constant-pressure mode and therefore yields a
    /// singular saddle matrix; exposed for diagnostics.
    pub fn with_pinning(system: &AssembledSystem, pin: bool) -> Result<Self> {
        let space = &system.space;
        let n0 = space.n_interior;
        let nb = space.n_edge;
        let interior: Vec<usize> = (0..n0).collect();
        let edge: Vec<usize> = (n0..n0 + nb).collect();
        let pinned_pressure: Vec<usize> = if pin {
            component_roots(system).into_iter().map(|c| space.pressure_index(c, 0)).collect()
        } else {
            Vec::new()
        };
        let kept_pressure: Vec<usize> = (0..space.n_pressure).filter(|i| !pinned_pressure.contains(i)).collect();
        let np = kept_pressure.len();

        let a00 = system.a.select(&interior, &interior);
        let ab0 = system.a.select(&edge, &interior);
        let abb = system.a.select(&edge, &edge);
        let b0 = system.b.select(&kept_pressure, &interior);
        let bb = system.b.select(&kept_pressure, &edge);
        let m00 = system.m.select(&interior, &interior);
        let (ab0t, b0t, bbt) = (ab0.transpose(), b0.transpose(), bb.transpose());
        let saddle = block_matrix(
            &[
                vec![Some(&a00), Some(&ab0t), Some(&b0t)],
                vec![Some(&ab0), Some(&abb), Some(&bbt)],
                vec![Some(&b0), Some(&bb), None],
            ],
            &[n0, nb, np],
            &[n0, nb, np],
        );
        let saddle_lu = SparseLu::new(&saddle, "saddle matrix")?;
        Ok(Self { n_interior: n0, n_edge: nb, kept_pressure, pinned_pressure, m00, saddle, saddle_lu })
    }

    pub fn dim(&self) -> usize {
        self.n_interior
    }

    /// `K⁻¹ b` for a right-hand side in the saddle ordering.
    pub fn solve_saddle(&self, b: &[f64]) -> Vec<f64> {
        self.saddle_lu.solve(b)
    }

    /// Full solution of `K [u; q] = [M_00 x; 0]`.
    pub fn solve_full(&self, x: &[f64]) -> Vec<f64> {
        let mut rhs = self.m00.mul_vec(x);
        rhs.resize(self.saddle_lu.dim(), 0.0);
        self.saddle_lu.solve(&rhs)
    }

    /// `T x`.
    pub fn apply_inverse_times_mass(&self, x: &[f64]) -> Vec<f64> {
        let mut sol = self.solve_full(x);
        sol.truncate(self.n_interior);
        sol
    }

    pub fn mass_dot(&self, x: &[f64], y: &[f64]) -> f64 {
        self.m00.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Dense `G = M_00 T`, one saddle solve per column.
    pub fn dense_compliance(&self) -> Result<DMatrix<f64>> {
        let n = self.n_interior;
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.m00.mul_vec(&self.apply_inverse_times_mass(&e))
            })
            .collect();
        let mut g = DMatrix::zeros(n, n);
        for (j, col) in cols.iter().enumerate() {
            for i in 0..n {
                g[(i, j)] = col[i];
            }
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient("saddle solve produced non-finite values".into()));
        }
        Ok(g)
    }

    pub fn dense_mass(&self) -> DMatrix<f64> {
        self.m00.to_dense()
    }
}
