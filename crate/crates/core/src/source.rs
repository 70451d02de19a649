//! Weak Galerkin solver for the Stokes source problem with manufactured
//! solutions, plus the consistency functionals of its error equation.

use rayon::prelude::*;

use crate::eigen::{remove_mean, ReducedPencil};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{cell_quadrature, edge_quadrature, MAX_DEGREE};
use crate::wg::local::PROJECTION_DEGREE_BOOST;
use crate::wg::{assemble, project_qh, v_norm, AssembledSystem, GammaSchedule, LocalElement, StabilizerKind, WeakFunction, WgSpace};

type VectorField = Box<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
type TensorField = Box<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;
type ScalarField = Box<dyn Fn(Point) -> f64 + Send + Sync>;

/// Exact solution of `-Δu + ∇p = f`, `∇·u = 0` with `u = 0` on the boundary.
pub struct ManufacturedCase {
    pub name: String,
    pub velocity: VectorField,
    /// `grad[i][j] = ∂_j u_i`.
    pub gradient: TensorField,
    /// Zero-mean pressure.
    pub pressure: ScalarField,
    pub forcing: VectorField,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase").field("name", &self.name).finish()
    }
}

// X(x) = x²(1-x)² and its derivatives
fn bump(x: f64) -> [f64; 4] {
    [
        x * x * (1.0 - x) * (1.0 - x),
        2.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
        2.0 * (1.0 - 6.0 * x + 6.0 * x * x),
        12.0 * (2.0 * x - 1.0),
    ]
}

impl ManufacturedCase {
    /// Unit square: ψ = x²(1-x)²y²(1-y)², u = (ψ_y, -ψ_x), p = xy - 1/4.
    pub fn stream_function() -> Self {
        Self {
            name: "stream-function".into(),
            velocity: Box::new(|[x, y]| {
                let (a, b) = (bump(x), bump(y));
                [a[0] * b[1], -a[1] * b[0]]
            }),
            gradient: Box::new(|[x, y]| {
                let (a, b) = (bump(x), bump(y));
                [[a[1] * b[1], a[0] * b[2]], [-a[2] * b[0], -a[1] * b[1]]]
            }),
            pressure: Box::new(|[x, y]| x * y - 0.25),
            forcing: Box::new(|[x, y]| {
                let (a, b) = (bump(x), bump(y));
                let lap1 = a[2] * b[1] + a[0] * b[3];
                let lap2 = -a[3] * b[0] - a[1] * b[2];
                [-lap1 + y, -lap2 + x]
            }),
        }
    }

    /// u = 0, p = 0, f = 0.
    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            velocity: Box::new(|_| [0.0; 2]),
            gradient: Box::new(|_| [[0.0; 2]; 2]),
            pressure: Box::new(|_| 0.0),
            forcing: Box::new(|_| [0.0; 2]),
        }
    }

    pub fn divergence(&self, p: Point) -> f64 {
        let g = (self.gradient)(p);
        g[0][0] + g[1][1]
    }
}

/// `e_V = ‖Q_h u − u_h‖_V`, `e_p = ‖ℚ_h p − p_h‖`, `e_0 = ‖Q_0 u − u_0‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceErrors {
    pub e_v: f64,
    pub e_p: f64,
    pub e_0: f64,
}

#[derive(Debug, Clone)]
pub struct SourceSolution {
    pub system: AssembledSystem,
    pub velocity: WeakFunction,
    /// Cellwise P_{k-1} pressure coefficients, zero mean.
    pub pressure: Vec<f64>,
    pub errors: SourceErrors,
    /// `‖K x − b‖ / ‖b‖` of the final linear solve.
    pub residual: f64,
}

fn projection_degree(k: usize) -> usize {
    (2 * k + PROJECTION_DEGREE_BOOST).min(MAX_DEGREE)
}

/// `(f, v_0)` for every velocity unknown.
pub fn load_vector(mesh: &Mesh, space: &WgSpace, f: &(dyn Fn(Point) -> [f64; 2] + Sync)) -> Result<Vec<f64>> {
    let q = cell_quadrature(projection_degree(space.k))?;
    let locals: Vec<Vec<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let el = LocalElement::new(mesh, c, space.k)?;
            let (pts, wts) = q.map_to_triangle(&el.vertices);
            let mut out = vec![0.0; space.velocity_local_dim()];
            for (p, w) in pts.iter().zip(&wts) {
                let v = el.basis.values(*p);
                let fv = f(*p);
                for comp in 0..2 {
                    for (a, va) in v.iter().enumerate() {
                        out[space.local_velocity_index(comp, a)] += w * va * fv[comp];
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    scatter(mesh, space, &locals)
}

fn scatter(mesh: &Mesh, space: &WgSpace, locals: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; space.n_velocity()];
    for (c, local) in locals.iter().enumerate() {
        for (g, v) in space.local_to_global(mesh, c).into_iter().zip(local) {
            if let Some(g) = g {
                out[g] += v;
            }
        }
    }
    Ok(out)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn solve_source(
    mesh: &Mesh,
    space: &WgSpace,
    gamma: GammaSchedule,
    stabilizer: StabilizerKind,
    case: &ManufacturedCase,
) -> Result<SourceSolution> {
    let system = assemble(mesh, space, gamma, stabilizer)?;
    let pencil = ReducedPencil::new(&system)?;
    let nv = space.n_velocity();
    let load = load_vector(mesh, space, &*case.forcing)?;

    // [[A, Bᵀ], [B, 0]] [u; -p] = [F; 0] with the pinned pressure removed
    let mut rhs = load.clone();
    rhs.resize(pencil.saddle.nrows, 0.0);
    let mut sol = pencil.solve_saddle(&rhs);
    let mut residual = 0.0;
    let bnorm = norm2(&rhs);
    if bnorm > 0.0 {
        for _ in 0..3 {
            let r: Vec<f64> = rhs.iter().zip(pencil.saddle.mul_vec(&sol)).map(|(b, ks)| b - ks).collect();
            residual = norm2(&r) / bnorm;
            if residual <= 1e-13 {
                break;
            }
            let d = pencil.solve_saddle(&r);
            sol.iter_mut().zip(d).for_each(|(s, di)| *s += di);
        }
        let r: Vec<f64> = rhs.iter().zip(pencil.saddle.mul_vec(&sol)).map(|(b, ks)| b - ks).collect();
        residual = norm2(&r) / bnorm;
    }
    if !(residual <= 1e-10) {
        return Err(Error::RankDeficient(format!("source system residual {residual:e}")));
    }

    let mut pressure = vec![0.0; space.n_pressure];
    for (&i, &q) in pencil.kept_pressure.iter().zip(&sol[nv..]) {
        pressure[i] = -q;
    }
    remove_mean(&system, &mut pressure);
    let velocity = WeakFunction { velocity: sol[..nv].to_vec(), pressure: Some(pressure.clone()) };
    let errors = error_functionals(mesh, space, &system, &velocity, &pressure, case)?;
    Ok(SourceSolution { system, velocity, pressure, errors, residual })
}

/// `ℚ_h p`: cellwise L² projection onto P_{k-1}.
pub fn project_pressure(mesh: &Mesh, space: &WgSpace, p: &(dyn Fn(Point) -> f64 + Sync)) -> Result<Vec<f64>> {
    let locals: Vec<Vec<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| LocalElement::new(mesh, c, space.k)?.project_low(p))
        .collect::<Result<_>>()?;
    Ok(locals.concat())
}

pub fn error_functionals(
    mesh: &Mesh,
    space: &WgSpace,
    system: &AssembledSystem,
    u_h: &WeakFunction,
    p_h: &[f64],
    case: &ManufacturedCase,
) -> Result<SourceErrors> {
    let qu = project_qh(mesh, space, &*case.velocity)?;
    let e = qu.sub(u_h);
    let e_v = v_norm(mesh, space, &e)?;
    let e_0 = system.m.quad_form(&e.velocity).max(0.0).sqrt();
    let qp = project_pressure(mesh, space, &*case.pressure)?;
    let ep: Vec<f64> = qp.iter().zip(p_h).map(|(a, b)| a - b).collect();
    let e_p = system.pressure_mass.quad_form(&ep).max(0.0).sqrt();
    Ok(SourceErrors { e_v, e_p, e_0 })
}

/// Coefficient vectors of the linear functionals
/// `ℓ_u(v) = Σ_T <v_0 − v_b, (∇u − 𝐐_h∇u)·n>_∂T` and
/// `θ_p(v) = Σ_T <v_0 − v_b, (p − ℚ_h p) n>_∂T` over velocity unknowns.
pub fn consistency_functionals(mesh: &Mesh, space: &WgSpace, case: &ManufacturedCase) -> Result<(Vec<f64>, Vec<f64>)> {
    let deg = projection_degree(space.k);
    let eq = edge_quadrature(deg)?;
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let el = LocalElement::new(mesh, c, space.k)?;
            let dk = el.interior_dim();
            let k = space.k;
            let mut grad_proj = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
            for (i, row) in grad_proj.iter_mut().enumerate() {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = el.project_low(&|p| (case.gradient)(p)[i][j])?;
                }
            }
            let p_proj = el.project_low(&*case.pressure)?;
            let low = |coeffs: &[f64], p: Point| -> f64 { el.low_basis.values(p).iter().zip(coeffs).map(|(a, b)| a * b).sum() };
            let mut ell = vec![0.0; space.velocity_local_dim()];
            let mut theta = vec![0.0; space.velocity_local_dim()];
            for e in 0..3 {
                let n = el.normals[e];
                let (pts, wts) = eq.map_to_segment(el.vertices[e], el.vertices[(e + 1) % 3]);
                for (p, w) in pts.iter().zip(&wts) {
                    let g = (case.gradient)(*p);
                    let mut gl = [0.0; 2];
                    for (i, gi) in gl.iter_mut().enumerate() {
                        for j in 0..2 {
                            *gi += (g[i][j] - low(&grad_proj[i][j], *p)) * n[j];
                        }
                    }
                    let dp = (case.pressure)(*p) - low(&p_proj, *p);
                    let gt = [dp * n[0], dp * n[1]];
                    let v = el.basis.values(*p);
                    let psi = el.edge_bases[e].values(*p);
                    for comp in 0..2 {
                        for (a, va) in v.iter().enumerate() {
                            let idx = space.local_velocity_index(comp, a);
                            ell[idx] += w * va * gl[comp];
                            theta[idx] += w * va * gt[comp];
                        }
                        for (j, pj) in psi.iter().enumerate() {
                            let idx = space.local_velocity_index(comp, dk + e * k + j);
                            ell[idx] -= w * pj * gl[comp];
                            theta[idx] -= w * pj * gt[comp];
                        }
                    }
                }
            }
            Ok((ell, theta))
        })
        .collect::<Result<_>>()?;
    let (ell, theta): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    Ok((scatter(mesh, space, &ell)?, scatter(mesh, space, &theta)?))
}

/// Largest relative defect of the error equation
/// `a_w(e_h, v) − c_w(v, ε_h) = ℓ_u(v) − θ_p(v) + s(Q_h u, v)` over the given
/// test functions.
pub fn error_equation_defect(mesh: &Mesh, solution: &SourceSolution, case: &ManufacturedCase, tests: &[Vec<f64>]) -> Result<f64> {
    let system = &solution.system;
    let space = &system.space;
    let qu = project_qh(mesh, space, &*case.velocity)?;
    let e = qu.sub(&solution.velocity);
    let qp = project_pressure(mesh, space, &*case.pressure)?;
    let eps: Vec<f64> = qp.iter().zip(&solution.pressure).map(|(a, b)| a - b).collect();
    let (ell, theta) = consistency_functionals(mesh, space, case)?;
    let ae = system.a.mul_vec(&e.velocity);
    let bte = system.b.tr_mul_vec(&eps);
    let sq = system.stab.mul_vec(&qu.velocity);
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut worst = 0.0f64;
    for v in tests {
        let lhs = dot(&ae, v) - dot(&bte, v);
        let rhs = dot(&ell, v) - dot(&theta, v) + dot(&sq, v);
        let scale = dot(&ae, v).abs() + dot(&bte, v).abs() + dot(&ell, v).abs() + dot(&theta, v).abs() + dot(&sq, v).abs();
        worst = worst.max((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
