//! Thick-restart block Krylov iteration for the largest eigenvalues of the
//! M-self-adjoint operator `T = S⁻¹ M`, i.e. the smallest of `S x = λ M x`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{EigenOptions, ReducedPencil};
use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

struct Basis {
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
    tv: Vec<Vec<f64>>,
}

impl Basis {
    fn len(&self) -> usize {
        self.v.len()
    }

    /// M-orthonormalizes `block` against the basis and itself, then appends
    /// the survivors together with their images under `T`. Returns how many
    /// vectors were added.
    fn extend(&mut self, pencil: &ReducedPencil, block: Vec<Vec<f64>>) -> usize {
        let mut accepted = Vec::new();
        let mut accepted_m = Vec::new();
        for mut x in block {
            let start = pencil.mass_dot(&x, &x).sqrt();
            if start == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for (v, mv) in self.v.iter().zip(&self.mv).chain(accepted.iter().zip(&accepted_m)) {
                    let c = dot(mv, &x);
                    axpy(&mut x, -c, v);
                }
            }
            let mx = pencil.m00.mul_vec(&x);
            let norm = dot(&mx, &x).max(0.0).sqrt();
            if norm <= 1e-10 * start {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= norm);
            accepted_m.push(mx.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
            accepted.push(x);
        }
        let images: Vec<Vec<f64>> = accepted.par_iter().map(|x| pencil.apply_inverse_times_mass(x)).collect();
        let added = accepted.len();
        self.v.extend(accepted);
        self.mv.extend(accepted_m);
        self.tv.extend(images);
        added
    }
}

fn combine(vs: &[Vec<f64>], coeffs: nalgebra::DVectorView<f64>) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for (v, &c) in vs.iter().zip(coeffs.iter()) {
        axpy(&mut out, c, v);
    }
    out
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// Returns ascending eigenvalues of the reduced pencil, M-orthonormal
/// eigenvectors and the number of Rayleigh-Ritz steps taken.
pub(super) fn shift_invert(
    pencil: &ReducedPencil,
    nev: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let n = pencil.dim();
    let p = opts.block_size.clamp(1, n);
    let max_basis = (2 * nev + 8 * p).max(40).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis { v: Vec::new(), mv: Vec::new(), tv: Vec::new() };
    let mut block = random_block(&mut rng, n, p);
    let mut steps = 0;
    let mut last_residuals = vec![f64::INFINITY; nev];

    loop {
        let first = basis.len();
        if basis.extend(pencil, block) == 0 && basis.len() < n {
            basis.extend(pencil, random_block(&mut rng, n, p));
        }
        if basis.len() < nev.min(n) {
            block = basis.tv[first..].to_vec();
            continue;
        }

        // Rayleigh-Ritz on span(V)
        let k = basis.len();
        let mut h = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = 0.5 * (dot(&basis.mv[i], &basis.tv[j]) + dot(&basis.mv[j], &basis.tv[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let wanted = nev + p.min(k - nev.min(k));
        let ritz: Vec<(f64, Vec<f64>, Vec<f64>)> = order
            .iter()
            .take(wanted.min(k))
            .map(|&i| {
                let y = eig.eigenvectors.column(i);
                (eig.eigenvalues[i], combine(&basis.v, y.as_view()), combine(&basis.tv, y.as_view()))
            })
            .collect();
        steps += 1;

        let mut unconverged = Vec::new();
        let mut residual_vectors = Vec::new();
        for (i, (theta, x, tx)) in ritz.iter().enumerate().take(nev) {
            let mut r = tx.clone();
            axpy(&mut r, -theta, x);
            let res = pencil.mass_dot(&r, &r).max(0.0).sqrt() / theta.abs().max(f64::MIN_POSITIVE);
            // ‖T x − θ x‖_M / θ equals the relative residual of the pair
            // recovered from K⁻¹ [M x; 0]
            last_residuals[i] = res;
            let ok = res <= opts.tol;
            if !ok {
                unconverged.push(i);
                residual_vectors.push(r);
            }
        }
        if unconverged.is_empty() || basis.len() == n {
            let values = ritz.iter().take(nev).map(|(t, _, _)| 1.0 / t).collect();
            let vectors = ritz.into_iter().take(nev).map(|(_, x, _)| x).collect();
            return Ok((values, vectors, steps));
        }
        if steps > opts.max_restarts * max_basis {
            return Err(Error::NoConvergence { iterations: steps, residuals: last_residuals });
        }

        // expand with residuals of the leading unconverged pairs, topped up
        // with those of the trailing Ritz pairs to keep the block full
        block = residual_vectors.into_iter().take(p).collect();
        for (theta, x, tx) in ritz.iter().skip(nev) {
            if block.len() >= p {
                break;
            }
            let mut r = tx.clone();
            axpy(&mut r, -theta, x);
            block.push(r);
        }

        if basis.len() + block.len() > max_basis {
            let keep = (nev + p).min(ritz.len());
            let mut fresh = Basis { v: Vec::new(), mv: Vec::new(), tv: Vec::new() };
            for (_, x, tx) in ritz.into_iter().take(keep) {
                fresh.mv.push(pencil.m00.mul_vec(&x));
                fresh.v.push(x);
                fresh.tv.push(tx);
            }
            basis = fresh;
        }
    }
}
