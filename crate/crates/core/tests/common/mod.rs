#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wg_stokes::basis::monomial_exponents;
use wg_stokes::mesh::{Mesh, Point};
use wg_stokes::quadrature::{cell_quadrature, edge_quadrature, MAX_DEGREE};
use wg_stokes::wg::{AssembledSystem, LocalElement, WgSpace};

/// Vector polynomial field of total degree ≤ `deg` with random coefficients.
#[derive(Debug, Clone)]
pub struct PolyField {
    pub terms: Vec<(i32, i32, [f64; 2])>,
}

impl PolyField {
    pub fn random(rng: &mut ChaCha8Rng, deg: usize) -> Self {
        let terms = monomial_exponents(deg)
            .into_iter()
            .map(|(a, b)| (a, b, [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]))
            .collect();
        Self { terms }
    }

    pub fn value(&self, p: Point) -> [f64; 2] {
        let mut v = [0.0; 2];
        for &(a, b, c) in &self.terms {
            let m = p[0].powi(a) * p[1].powi(b);
            v[0] += c[0] * m;
            v[1] += c[1] * m;
        }
        v
    }

    /// ∂_dir of component `comp`.
    pub fn derivative(&self, comp: usize, dir: usize, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|&(a, b, c)| {
                let d = if dir == 0 {
                    if a == 0 { 0.0 } else { a as f64 * p[0].powi(a - 1) * p[1].powi(b) }
                } else if b == 0 {
                    0.0
                } else {
                    b as f64 * p[0].powi(a) * p[1].powi(b - 1)
                };
                c[comp] * d
            })
            .sum()
    }
}

/// Largest coefficient error of `∇_w Q_h u = ℚ_h ∇u` and
/// `∇_w·Q_h u = ℚ_h ∇·u` over all cells and `fields` random fields.
pub fn commutation_error(mesh: &Mesh, k: usize, fields: usize, seed: u64) -> (f64, f64) {
    let space = WgSpace::new(mesh, k).unwrap();
    let elements: Vec<LocalElement> = (0..mesh.num_cells()).map(|c| LocalElement::new(mesh, c, k).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut grad_err, mut div_err) = (0.0f64, 0.0f64);
    for _ in 0..fields {
        let u = PolyField::random(&mut rng, k);
        for el in &elements {
            let pk = el.low_basis.dim();
            let qu = DVector::from_vec(el.project(&space, &|p| u.value(p)).unwrap());
            let g = el.weak_gradient(&space) * &qu;
            let d = el.weak_divergence(&space) * &qu;
            for comp in 0..2 {
                for dir in 0..2 {
                    let exact = el.project_low(&|p| u.derivative(comp, dir, p)).unwrap();
                    for a in 0..pk {
                        grad_err = grad_err.max((g[(2 * comp + dir) * pk + a] - exact[a]).abs());
                    }
                }
            }
            let exact = el.project_low(&|p| u.derivative(0, 0, p) + u.derivative(1, 1, p)).unwrap();
            for a in 0..pk {
                div_err = div_err.max((d[a] - exact[a]).abs());
            }
        }
    }
    (grad_err, div_err)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Worst relative error of the cell and edge rules on all monomials up to
/// each rule's declared exactness, against closed-form integrals.
pub fn quadrature_error() -> f64 {
    let mut worst = 0.0f64;
    for deg in 0..=MAX_DEGREE {
        let rule = cell_quadrature(deg).unwrap();
        for a in 0..=deg as u32 {
            for b in 0..=(deg as u32 - a) {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                worst = worst.max((q - exact).abs() / exact);
            }
        }
        let rule = edge_quadrature(deg).unwrap();
        for a in 0..=deg as i32 {
            let exact = if a % 2 == 1 { 0.0 } else { 2.0 / (a + 1) as f64 };
            let q: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[0].powi(a)).sum();
            worst = worst.max((q - exact).abs() / exact.max(1.0));
        }
    }
    worst
}

/// Brute-force finite eigenvalues of the full pencil
/// `[[A, Bᵀ], [B, 0]] x = λ [[M, 0], [0, 0]] x`: restrict to ker B through
/// an eigen-decomposition of `BᵀB`, then solve the definite problem
/// `NᵀMN y = μ NᵀAN y` and return the `m` smallest `λ = 1/μ`.
pub fn dense_full_pencil(system: &AssembledSystem, m: usize) -> Vec<f64> {
    let a = system.a.to_dense();
    let mm = system.m.to_dense();
    let b = system.b.to_dense();
    let btb = b.transpose() * &b;
    let eig = btb.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let null: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] <= 1e-10 * top).collect();
    let n = DMatrix::from_columns(&null.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    let an = n.transpose() * &a * &n;
    let mn = n.transpose() * &mm * &n;
    let an = (&an + an.transpose()) * 0.5;
    let l = an.cholesky().expect("A is definite on ker B").l();
    let linv = l.try_inverse().unwrap();
    let c = &linv * mn * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut mu: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    mu.sort_by(|x, y| y.total_cmp(x));
    mu.iter().take(m).map(|v| 1.0 / v).collect()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs()).fold(0.0, f64::max)
}
