//! Smallest eigenpairs of the discrete Stokes eigenproblem.

mod krylov;
mod reduce;

use nalgebra::DMatrix;

pub use reduce::ReducedPencil;

use crate::error::{Error, Result};
use crate::wg::{AssembledSystem, WeakFunction};

/// How the reduced problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Dense below `dense_limit` interior unknowns, iterative above.
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub method: SolveMethod,
    pub dense_limit: usize,
    /// Relative residual target.
    pub tol: f64,
    /// Restart budget of the iterative solver.
    pub max_restarts: usize,
    pub block_size: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Auto,
            dense_limit: 1500,
            tol: 1e-9,
            max_restarts: 200,
            block_size: 3,
            seed: 0x5eed,
        }
    }
}

/// Eigenpairs ordered by ascending eigenvalue. Velocities hold the complete
/// weak function (interior and edge parts) with `b_w(u, u) = 1`; pressures are
/// cellwise P_{k-1} coefficients with zero mean.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<WeakFunction>,
    /// `‖A u + Bᵀ p − λ M u‖_{M⁻¹} / (λ ‖u‖_M)`, measured on the reduced
    /// problem.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub method: SolveMethod,
}

pub fn reduce_pencil(system: &AssembledSystem) -> Result<ReducedPencil> {
    ReducedPencil::new(system)
}

pub fn solve_smallest(system: &AssembledSystem, m: usize, tol: f64) -> Result<EigenResult> {
    solve_smallest_with(system, m, &EigenOptions { tol, ..Default::default() })
}

pub fn solve_smallest_with(system: &AssembledSystem, m: usize, opts: &EigenOptions) -> Result<EigenResult> {
    if m == 0 {
        return Err(Error::InvalidArgument("number of eigenpairs must be at least 1".into()));
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {}", opts.tol)));
    }
    let pencil = ReducedPencil::new(system)?;
    let n = pencil.dim();
    if m > n {
        return Err(Error::InvalidArgument(format!("requested {m} eigenpairs but the reduced problem has dimension {n}")));
    }
    let method = match opts.method {
        SolveMethod::Auto if n <= opts.dense_limit => SolveMethod::Dense,
        SolveMethod::Auto => SolveMethod::Iterative,
        other => other,
    };
    let (values, vectors, iterations) = match method {
        SolveMethod::Dense => {
            let (v, x) = dense_smallest(&pencil, m)?;
            (v, x, 0)
        }
        _ => krylov::shift_invert(&pencil, m, opts)?,
    };
    finish(system, &pencil, values, vectors, iterations, method, opts.tol)
}

/// Dense generalized symmetric solve `G x = θ M x` through a Cholesky factor
/// of `M`, keeping the largest θ.
fn dense_smallest(pencil: &ReducedPencil, m: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let g = pencil.dense_compliance()?;
    let chol = pencil
        .dense_mass()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("interior mass matrix is not SPD".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("interior mass factor is singular".into()))?;
    let c = &linv * g * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let lt_inv: DMatrix<f64> = linv.transpose();
    let mut values = Vec::with_capacity(m);
    let mut vectors = Vec::with_capacity(m);
    for &i in order.iter().take(m) {
        let theta = eig.eigenvalues[i];
        if theta <= 1e-12 * top {
            return Err(Error::InvalidArgument(format!("only {} finite eigenvalues exist", values.len())));
        }
        values.push(1.0 / theta);
        let x = &lt_inv * eig.eigenvectors.column(i);
        vectors.push(x.iter().copied().collect());
    }
    Ok((values, vectors))
}

/// `‖r‖_{M⁻¹}` for the cellwise block-diagonal interior mass.
fn inverse_mass_norm(system: &AssembledSystem, r: &[f64]) -> f64 {
    let bs = 2 * system.space.interior_dim;
    (0..system.space.num_cells)
        .map(|c| {
            let idx: Vec<usize> = (c * bs..(c + 1) * bs).collect();
            let block = system.m.select(&idx, &idx).to_dense();
            let v = nalgebra::DVector::from_column_slice(&r[c * bs..(c + 1) * bs]);
            block.cholesky().map(|ch| v.dot(&ch.solve(&v))).unwrap_or(f64::INFINITY)
        })
        .sum::<f64>()
        .sqrt()
}

fn finish(
    system: &AssembledSystem,
    pencil: &ReducedPencil,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    iterations: usize,
    method: SolveMethod,
    tol: f64,
) -> Result<EigenResult> {
    if let Some(bad) = values.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::RankDeficient(format!("non-positive eigenvalue {bad} in reduced problem")));
    }
    let space = &system.space;
    let nv = space.n_velocity();
    let mut eigenvectors = Vec::with_capacity(values.len());
    let mut residuals = Vec::with_capacity(values.len());
    for (&lambda, x) in values.iter().zip(&vectors) {
        // K [u; q] = [λ M x; 0] gives the eigenfunction with its edge part and pressure
        let full = pencil.solve_full(x);
        let mut velocity: Vec<f64> = full[..nv].iter().map(|v| lambda * v).collect();
        let mut q = vec![0.0; space.n_pressure];
        for (&i, &v) in pencil.kept_pressure.iter().zip(&full[nv..]) {
            q[i] = lambda * v;
        }
        let norm = system.m.quad_form(&velocity).sqrt();
        let big = velocity[..space.n_interior].iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let scale = big.signum() / norm;
        velocity.iter_mut().for_each(|v| *v *= scale);
        q.iter_mut().for_each(|v| *v *= scale);

        let mut r = system.a.mul_vec(&velocity);
        for (ri, bi) in r.iter_mut().zip(system.b.tr_mul_vec(&q)) {
            *ri += bi;
        }
        for (ri, mi) in r.iter_mut().zip(system.m.mul_vec(&velocity)) {
            *ri -= lambda * mi;
        }
        residuals.push(inverse_mass_norm(system, &r[..space.n_interior]) / lambda);

        // the saddle matrix carries +Bᵀ; the pressure of a_w(u, v) - c_w(v, p) is its negative
        let mut p: Vec<f64> = q.iter().map(|v| -v).collect();
        remove_mean(system, &mut p);
        eigenvectors.push(WeakFunction { velocity, pressure: Some(p) });
    }
    let worst = residuals.iter().copied().fold(0.0f64, f64::max);
    if worst > 100.0 * tol.max(1e-12) {
        return Err(Error::NoConvergence { iterations, residuals });
    }
    Ok(EigenResult { eigenvalues: values, eigenvectors, residuals, iterations, method })
}

/// Subtracts the area-weighted mean from a cellwise pressure.
pub fn remove_mean(system: &AssembledSystem, p: &mut [f64]) {
    let area: f64 = (0..system.space.num_cells)
        .map(|c| system.pressure_integrals[system.space.pressure_index(c, 0)])
        .sum();
    let integral: f64 = p.iter().zip(&system.pressure_integrals).map(|(a, b)| a * b).sum();
    let mean = integral / area;
    // the constant is the first basis function on every cell
    for c in 0..system.space.num_cells {
        let c0 = system.space.pressure_index(c, 0);
        p[c0] -= mean;
    }
}
