//! Gauss-Legendre rules on the interval and collapsed (Duffy) Gauss rules on
//! the reference triangle.

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Highest polynomial degree for which a rule can be requested.
pub const MAX_DEGREE: usize = 30;

/// A rule on a reference domain.
///
/// Cell rules live on the triangle with vertices (0,0), (1,0), (0,1) and
/// their weights sum to 1/2. Edge rules live on [-1, 1] with weights summing
/// to 2 (the second coordinate of each point is zero).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points and weights on the triangle `p`; weights sum to its area.
    pub fn map_to_triangle(&self, p: &[Point; 3]) -> (Vec<Point>, Vec<f64>) {
        let jac = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
        let pts = self
            .points
            .iter()
            .map(|&[s, t]| {
                [
                    p[0][0] + s * (p[1][0] - p[0][0]) + t * (p[2][0] - p[0][0]),
                    p[0][1] + s * (p[1][1] - p[0][1]) + t * (p[2][1] - p[0][1]),
                ]
            })
            .collect();
        let w = self.weights.iter().map(|w| w * jac).collect();
        (pts, w)
    }

    /// Barycentric coordinates of the cell points.
    pub fn barycentric(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|&[s, t]| [1.0 - s - t, s, t]).collect()
    }

    /// Physical points and weights on the segment `a`-`b`; weights sum to its length.
    pub fn map_to_segment(&self, a: Point, b: Point) -> (Vec<Point>, Vec<f64>) {
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let pts = self
            .points
            .iter()
            .map(|&[t, _]| {
                let s = 0.5 * (t + 1.0);
                [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
            })
            .collect();
        let w = self.weights.iter().map(|w| 0.5 * w * len).collect();
        (pts, w)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Rule on the reference triangle exact for all x^a y^b with a + b ≤ `exact_degree`.
pub fn cell_quadrature(exact_degree: usize) -> Result<QuadratureRule> {
    if exact_degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree: exact_degree,
            max: MAX_DEGREE,
        });
    }
    // the collapsed map adds one degree through its Jacobian (1 - s)
    let n = (exact_degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (xi, wi) in x.iter().zip(&w) {
        let s = 0.5 * (xi + 1.0);
        for (xj, wj) in x.iter().zip(&w) {
            let t = 0.5 * (xj + 1.0);
            points.push([s, t * (1.0 - s)]);
            weights.push(0.25 * wi * wj * (1.0 - s));
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        exact_degree,
    })
}

/// Gauss rule on [-1, 1] exact up to `exact_degree`.
pub fn edge_quadrature(exact_degree: usize) -> Result<QuadratureRule> {
    if exact_degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree: exact_degree,
            max: MAX_DEGREE,
        });
    }
    let n = (exact_degree + 1).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    Ok(QuadratureRule {
        points: x.into_iter().map(|t| [t, 0.0]).collect(),
        weights: w,
        exact_degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // ∫_ref x^a y^b = a! b! / (a+b+2)!
    fn ref_monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn reference_triangle_values() {
        let q2 = cell_quadrature(2).unwrap();
        let v: f64 = q2.points.iter().zip(&q2.weights).map(|(p, w)| w * p[0] * p[0]).sum();
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
        let q4 = cell_quadrature(4).unwrap();
        let v: f64 = q4.points.iter().zip(&q4.weights).map(|(p, w)| w * (p[0] * p[1]).powi(2)).sum();
        assert!((v - 1.0 / 180.0).abs() < 1e-16);
    }

    #[test]
    fn cell_rules_exact() {
        for d in 0..=20 {
            let q = cell_quadrature(d).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let v: f64 = q
                        .points
                        .iter()
                        .zip(&q.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let e = ref_monomial(a, b);
                    assert!(((v - e) / e).abs() < 1e-12, "degree {d}: x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn edge_rules_exact() {
        let q = edge_quadrature(3).unwrap();
        assert_eq!(q.len(), 2);
        let q1 = edge_quadrature(1).unwrap();
        assert_eq!(q1.len(), 1);
        assert_eq!(q1.points[0][0], 0.0);
        for d in 0..=20usize {
            let q = edge_quadrature(d).unwrap();
            for p in 0..=d as i32 {
                let v: f64 = q.points.iter().zip(&q.weights).map(|(x, w)| w * x[0].powi(p)).sum();
                let e = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((v - e).abs() < 1e-13 * e.max(1.0), "degree {d}, power {p}");
            }
        }
    }

    #[test]
    fn mapped_weights_sum_to_measure() {
        let tri = [[0.3, 0.1], [1.2, 0.4], [0.5, 0.9]];
        let area = 0.5 * ((0.9f64) * 0.8 - 0.2 * 0.3);
        let (_, w) = cell_quadrature(0).unwrap().map_to_triangle(&tri);
        assert!((w.iter().sum::<f64>() - area).abs() < 1e-15);
        let (_, w) = edge_quadrature(0).unwrap().map_to_segment([0.0, 0.0], [3.0, 4.0]);
        assert!((w.iter().sum::<f64>() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(cell_quadrature(MAX_DEGREE + 1), Err(Error::UnsupportedDegree { .. })));
        assert!(matches!(edge_quadrature(MAX_DEGREE + 1), Err(Error::UnsupportedDegree { .. })));
    }
}
