//! Scaled monomial bases on triangles and edges.
//!
//! Cell functions are `((x - xc)/h)^a ((y - yc)/h)^b` about the centroid,
//! ordered by total degree and then by the power of y. Edge functions are
//! powers of the arc-length coordinate `s = (p - mid)·t / |F|`, which lies in
//! [-1/2, 1/2] and follows the global edge orientation.

use crate::mesh::{Cell, Edge, Mesh, Point};

pub fn poly_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponent pairs (a, b) in basis order.
pub fn monomial_exponents(degree: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(poly_dim(degree));
    for d in 0..=degree as i32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct CellBasis {
    pub degree: usize,
    pub center: Point,
    pub scale: f64,
    exponents: Vec<(i32, i32)>,
}

impl CellBasis {
    pub fn new(degree: usize, cell: &Cell) -> Self {
        Self {
            degree,
            center: cell.centroid,
            scale: cell.diameter,
            exponents: monomial_exponents(degree),
        }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(i32, i32)] {
        &self.exponents
    }

    fn local(&self, p: Point) -> (f64, f64) {
        ((p[0] - self.center[0]) / self.scale, (p[1] - self.center[1]) / self.scale)
    }

    pub fn values(&self, p: Point) -> Vec<f64> {
        let (x, y) = self.local(p);
        self.exponents.iter().map(|&(a, b)| x.powi(a) * y.powi(b)).collect()
    }

    /// Physical gradients of each basis function at `p`.
    pub fn gradients(&self, p: Point) -> Vec<[f64; 2]> {
        let (x, y) = self.local(p);
        let s = 1.0 / self.scale;
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 { a as f64 * x.powi(a - 1) * y.powi(b) * s } else { 0.0 };
                let dy = if b > 0 { b as f64 * x.powi(a) * y.powi(b - 1) * s } else { 0.0 };
                [dx, dy]
            })
            .collect()
    }

    /// Values (points × dim) and gradients (points × dim × 2).
    pub fn evaluate(&self, points: &[Point]) -> (Vec<Vec<f64>>, Vec<Vec<[f64; 2]>>) {
        (
            points.iter().map(|&p| self.values(p)).collect(),
            points.iter().map(|&p| self.gradients(p)).collect(),
        )
    }
}

/// Evaluates the degree-`degree` cell basis of `cell` at physical `points`.
pub fn eval_cell_basis(degree: usize, mesh: &Mesh, cell: usize, points: &[Point]) -> (Vec<Vec<f64>>, Vec<Vec<[f64; 2]>>) {
    CellBasis::new(degree, &mesh.cells[cell]).evaluate(points)
}

#[derive(Debug, Clone)]
pub struct EdgeBasis {
    pub degree: usize,
    pub midpoint: Point,
    pub tangent: Point,
    pub length: f64,
}

impl EdgeBasis {
    pub fn new(degree: usize, mesh: &Mesh, edge: &Edge) -> Self {
        Self {
            degree,
            midpoint: edge.midpoint(mesh),
            tangent: edge.tangent(mesh),
            length: edge.length,
        }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn coordinate(&self, p: Point) -> f64 {
        ((p[0] - self.midpoint[0]) * self.tangent[0] + (p[1] - self.midpoint[1]) * self.tangent[1]) / self.length
    }

    pub fn values(&self, p: Point) -> Vec<f64> {
        let s = self.coordinate(p);
        (0..=self.degree as i32).map(|j| s.powi(j)).collect()
    }
}
