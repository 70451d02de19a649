//! Element-level weak Galerkin operators.
//!
//! Scalar local unknowns are ordered `[interior P_k | edge 0 | edge 1 | edge 2]`
//! with edge `i` joining cell vertices `i` and `i + 1`. The vector-valued
//! operators act componentwise, so everything is built from scalar blocks and
//! scattered through [`WgSpace::local_velocity_index`].

use nalgebra::DMatrix;

use crate::basis::{CellBasis, EdgeBasis};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{cell_quadrature, edge_quadrature, MAX_DEGREE};
use crate::wg::space::WgSpace;

/// Extra quadrature degree used when projecting callbacks that need not be
/// polynomials of low degree.
pub const PROJECTION_DEGREE_BOOST: usize = 10;

#[derive(Debug, Clone)]
pub struct LocalElement {
    pub k: usize,
    pub cell: usize,
    pub area: f64,
    pub diameter: f64,
    pub basis: CellBasis,
    pub low_basis: CellBasis,
    pub edge_bases: [EdgeBasis; 3],
    pub edge_lengths: [f64; 3],
    pub normals: [Point; 3],
    pub vertices: [Point; 3],
    /// Gram matrix of P_k(T).
    pub gram: DMatrix<f64>,
    /// Gram matrix of P_{k-1}(T) and its inverse.
    pub low_gram: DMatrix<f64>,
    pub low_gram_inv: DMatrix<f64>,
    /// `rhs[j][(a, s)] = -(u_s, ∂_j φ_a)_T + <u_s, φ_a n_j>_∂T` for scalar
    /// local unknowns `u_s` and φ_a ∈ P_{k-1}(T).
    pub rhs: [DMatrix<f64>; 2],
    /// Gram matrices of P_{k-1}(e).
    pub edge_gram: [DMatrix<f64>; 3],
    /// L² projection of interior traces onto P_{k-1}(e): `edge_gram⁻¹ ∫ ψ φ`.
    pub trace_proj: [DMatrix<f64>; 3],
}

fn invert_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone()
        .cholesky()
        .expect("Gram matrix of a non-degenerate cell is SPD")
        .inverse()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl LocalElement {
    pub fn new(mesh: &Mesh, cell: usize, k: usize) -> Result<Self> {
        let c = &mesh.cells[cell];
        if !(c.area > 1e-14 * c.diameter * c.diameter) {
            return Err(Error::DegenerateCell { cell, area: c.area });
        }
        let basis = CellBasis::new(k, c);
        let low_basis = CellBasis::new(k - 1, c);
        let dk = basis.dim();
        let pk = low_basis.dim();
        let ns = dk + 3 * k;
        let vertices = mesh.cell_points(cell);

        let (pts, wts) = cell_quadrature(2 * k + 2)?.map_to_triangle(&vertices);
        let mut gram = DMatrix::zeros(dk, dk);
        let mut low_gram = DMatrix::zeros(pk, pk);
        let mut rhs = [DMatrix::zeros(pk, ns), DMatrix::zeros(pk, ns)];
        for (p, w) in pts.iter().zip(&wts) {
            let v = basis.values(*p);
            let lv = low_basis.values(*p);
            let lg = low_basis.gradients(*p);
            for i in 0..dk {
                for j in 0..dk {
                    gram[(i, j)] += w * v[i] * v[j];
                }
            }
            for a in 0..pk {
                for b in 0..pk {
                    low_gram[(a, b)] += w * lv[a] * lv[b];
                }
                for (dir, r) in rhs.iter_mut().enumerate() {
                    for s in 0..dk {
                        r[(a, s)] -= w * v[s] * lg[a][dir];
                    }
                }
            }
        }

        let eq = edge_quadrature(2 * k + 1)?;
        let mut edge_gram: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(k, k));
        let mut trace_rhs: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(k, dk));
        let edge_bases: [EdgeBasis; 3] = std::array::from_fn(|i| EdgeBasis::new(k - 1, mesh, &mesh.edges[c.edges[i]]));
        let mut normals = [[0.0; 2]; 3];
        let mut edge_lengths = [0.0; 3];
        for i in 0..3 {
            let edge = &mesh.edges[c.edges[i]];
            let n = edge.normal_for(cell);
            normals[i] = n;
            edge_lengths[i] = edge.length;
            let (ep, ew) = eq.map_to_segment(vertices[i], vertices[(i + 1) % 3]);
            for (p, w) in ep.iter().zip(&ew) {
                let psi = edge_bases[i].values(*p);
                let v = basis.values(*p);
                let lv = low_basis.values(*p);
                for a in 0..k {
                    for b in 0..k {
                        edge_gram[i][(a, b)] += w * psi[a] * psi[b];
                    }
                    for s in 0..dk {
                        trace_rhs[i][(a, s)] += w * psi[a] * v[s];
                    }
                }
                for a in 0..pk {
                    for j in 0..k {
                        for (dir, r) in rhs.iter_mut().enumerate() {
                            r[(a, dk + i * k + j)] += w * psi[j] * lv[a] * n[dir];
                        }
                    }
                }
            }
        }
        let trace_proj = std::array::from_fn(|i| invert_spd(&edge_gram[i]) * &trace_rhs[i]);
        let low_gram_inv = invert_spd(&low_gram);
        Ok(Self {
            k,
            cell,
            area: c.area,
            diameter: c.diameter,
            basis,
            low_basis,
            edge_bases,
            edge_lengths,
            normals,
            vertices,
            gram: symmetrize(gram),
            low_gram: symmetrize(low_gram),
            low_gram_inv,
            rhs,
            edge_gram: edge_gram.map(symmetrize),
            trace_proj,
        })
    }

    pub fn interior_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn scalar_dim(&self) -> usize {
        self.interior_dim() + 3 * self.k
    }

    /// Coefficients of the scalar weak gradient component `dir` in P_{k-1}(T).
    pub fn scalar_weak_gradient(&self, dir: usize) -> DMatrix<f64> {
        &self.low_gram_inv * &self.rhs[dir]
    }

    /// `Σ_j (∇_w u, ∇_w v)` for scalar local unknowns.
    pub fn scalar_gradient_stiffness(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.scalar_dim(), self.scalar_dim());
        for dir in 0..2 {
            k += self.rhs[dir].transpose() * self.scalar_weak_gradient(dir);
        }
        symmetrize(k)
    }

    /// `Σ_e w_e <Q_b u_0 - u_b, Q_b v_0 - v_b>_e` for scalar local unknowns.
    pub fn scalar_stabilizer(&self, weights: [f64; 3]) -> DMatrix<f64> {
        let ns = self.scalar_dim();
        let mut s = DMatrix::zeros(ns, ns);
        for e in 0..3 {
            let l = self.jump_operator(e);
            s += (l.transpose() * &self.edge_gram[e] * l) * weights[e];
        }
        symmetrize(s)
    }

    /// Coefficients of `Q_b u_0 - u_b` on local edge `e` (k × scalar_dim).
    pub fn jump_operator(&self, e: usize) -> DMatrix<f64> {
        let dk = self.interior_dim();
        let mut l = DMatrix::zeros(self.k, self.scalar_dim());
        l.view_mut((0, 0), (self.k, dk)).copy_from(&self.trace_proj[e]);
        for j in 0..self.k {
            l[(j, dk + e * self.k + j)] = -1.0;
        }
        l
    }

    /// Per-edge stabilizer weights for a given stabilizer.
    pub fn stabilizer_weights(&self, stab: &StabilizerWeights) -> [f64; 3] {
        match *stab {
            StabilizerWeights::Standard { gamma } => [gamma / self.diameter; 3],
            StabilizerWeights::Skeletal { alpha } => {
                // (α/(n+1)) h_T^{-2} |F|^{-1} |T| with n = 2
                let c = alpha / 3.0 * self.area / (self.diameter * self.diameter);
                self.edge_lengths.map(|len| c / len)
            }
            StabilizerWeights::Unweighted => [1.0 / self.diameter; 3],
        }
    }

    fn scatter_scalar_pair(&self, space: &WgSpace, scalar: &DMatrix<f64>) -> DMatrix<f64> {
        let nv = space.velocity_local_dim();
        let ns = self.scalar_dim();
        let mut out = DMatrix::zeros(nv, nv);
        for comp in 0..2 {
            for i in 0..ns {
                let gi = space.local_velocity_index(comp, i);
                for j in 0..ns {
                    out[(gi, space.local_velocity_index(comp, j))] = scalar[(i, j)];
                }
            }
        }
        out
    }

    /// Rows map a P_{k-1} test block to local velocity columns of component `comp`.
    fn scatter_rows(&self, space: &WgSpace, blocks: &[(usize, DMatrix<f64>)]) -> DMatrix<f64> {
        let rows = blocks[0].1.nrows();
        let mut out = DMatrix::zeros(rows, space.velocity_local_dim());
        for (comp, b) in blocks {
            for a in 0..rows {
                for s in 0..self.scalar_dim() {
                    out[(a, space.local_velocity_index(*comp, s))] += b[(a, s)];
                }
            }
        }
        out
    }

    /// Local matrix of ∇_w: rows `(2 i + j) * dim P_{k-1} + a` hold the
    /// coefficient `a` of `(∇_w v)_{ij} = ∂_j v_i`.
    pub fn weak_gradient(&self, space: &WgSpace) -> DMatrix<f64> {
        let pk = self.low_basis.dim();
        let mut out = DMatrix::zeros(4 * pk, space.velocity_local_dim());
        for comp in 0..2 {
            for dir in 0..2 {
                let blk = self.scatter_rows(space, &[(comp, self.scalar_weak_gradient(dir))]);
                out.view_mut(((2 * comp + dir) * pk, 0), (pk, blk.ncols())).copy_from(&blk);
            }
        }
        out
    }

    /// Local matrix of ∇_w· into P_{k-1}(T) coefficients.
    pub fn weak_divergence(&self, space: &WgSpace) -> DMatrix<f64> {
        self.scatter_rows(
            space,
            &[(0, self.scalar_weak_gradient(0)), (1, self.scalar_weak_gradient(1))],
        )
    }

    /// `(∇_w·v, q)_T` for q ∈ P_{k-1}(T): rows are pressure basis functions.
    pub fn divergence_form(&self, space: &WgSpace) -> DMatrix<f64> {
        self.scatter_rows(space, &[(0, self.rhs[0].clone()), (1, self.rhs[1].clone())])
    }

    pub fn velocity_gradient_stiffness(&self, space: &WgSpace) -> DMatrix<f64> {
        self.scatter_scalar_pair(space, &self.scalar_gradient_stiffness())
    }

    pub fn velocity_stabilizer(&self, space: &WgSpace, weights: [f64; 3]) -> DMatrix<f64> {
        self.scatter_scalar_pair(space, &self.scalar_stabilizer(weights))
    }

    /// Local Q_h of a vector field: interior L² projection onto [P_k(T)]²
    /// followed by the three edge projections onto [P_{k-1}(e)]².
    pub fn project(&self, space: &WgSpace, f: &dyn Fn(Point) -> [f64; 2]) -> Result<Vec<f64>> {
        let dk = self.interior_dim();
        let k = self.k;
        let deg = (2 * k + PROJECTION_DEGREE_BOOST).min(MAX_DEGREE);
        let (pts, wts) = cell_quadrature(deg)?.map_to_triangle(&self.vertices);
        let mut b = DMatrix::zeros(dk, 2);
        for (p, w) in pts.iter().zip(&wts) {
            let v = self.basis.values(*p);
            let fv = f(*p);
            for a in 0..dk {
                for comp in 0..2 {
                    b[(a, comp)] += w * v[a] * fv[comp];
                }
            }
        }
        let c0 = self.gram.clone().cholesky().expect("SPD Gram").solve(&b);
        let mut out = vec![0.0; space.velocity_local_dim()];
        for comp in 0..2 {
            for a in 0..dk {
                out[space.local_velocity_index(comp, a)] = c0[(a, comp)];
            }
        }
        let eq = edge_quadrature(deg)?;
        for e in 0..3 {
            let (ep, ew) = eq.map_to_segment(self.vertices[e], self.vertices[(e + 1) % 3]);
            let mut be = DMatrix::zeros(k, 2);
            for (p, w) in ep.iter().zip(&ew) {
                let psi = self.edge_bases[e].values(*p);
                let fv = f(*p);
                for a in 0..k {
                    for comp in 0..2 {
                        be[(a, comp)] += w * psi[a] * fv[comp];
                    }
                }
            }
            let ce = self.edge_gram[e].clone().cholesky().expect("SPD Gram").solve(&be);
            for comp in 0..2 {
                for j in 0..k {
                    out[space.local_velocity_index(comp, dk + e * k + j)] = ce[(j, comp)];
                }
            }
        }
        Ok(out)
    }

    /// L² projection of a scalar callback onto P_{k-1}(T).
    pub fn project_low(&self, f: &dyn Fn(Point) -> f64) -> Result<Vec<f64>> {
        let pk = self.low_basis.dim();
        let deg = (2 * self.k + PROJECTION_DEGREE_BOOST).min(MAX_DEGREE);
        let (pts, wts) = cell_quadrature(deg)?.map_to_triangle(&self.vertices);
        let mut b = nalgebra::DVector::zeros(pk);
        for (p, w) in pts.iter().zip(&wts) {
            let v = self.low_basis.values(*p);
            let fv = f(*p);
            for a in 0..pk {
                b[a] += w * v[a] * fv;
            }
        }
        Ok((&self.low_gram_inv * b).iter().copied().collect())
    }

    /// Value of interior component `comp` at `p` from a local velocity vector.
    pub fn eval_interior(&self, space: &WgSpace, local: &[f64], comp: usize, p: Point) -> f64 {
        self.basis
            .values(p)
            .iter()
            .enumerate()
            .map(|(a, v)| v * local[space.local_velocity_index(comp, a)])
            .sum()
    }
}

/// Resolved stabilizer scaling used at element level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilizerWeights {
    /// γ h_T⁻¹ on every edge of T.
    Standard { gamma: f64 },
    /// (α/3) h_T⁻² |F|⁻¹ |T| on edge F of T.
    Skeletal { alpha: f64 },
    /// h_T⁻¹ on every edge; the edge term of the V-norm.
    Unweighted,
}
