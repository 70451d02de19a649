use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::Result;
use crate::mesh::{Mesh, Point};
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::wg::local::{LocalElement, StabilizerWeights};
use crate::wg::space::{WeakFunction, WgSpace};
use crate::wg::{GammaSchedule, StabilizerKind};

/// Global matrices of the scheme.
///
/// * `a`: `(∇_w w, ∇_w v) + s(w, v)` on velocities (N_v × N_v)
/// * `m`: `(w_0, v_0)`, supported on the interior block only
/// * `b`: `(∇_w·v, q)` (N_p × N_v)
/// * `stab`: the stabilizer part of `a`, kept for diagnostics
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub space: WgSpace,
    pub gamma: GammaSchedule,
    pub gamma_value: f64,
    pub stabilizer: StabilizerKind,
    pub a: CsrMatrix,
    pub m: CsrMatrix,
    pub b: CsrMatrix,
    pub stab: CsrMatrix,
    /// Pressure Gram blocks per cell, used for mean-value corrections.
    pub pressure_mass: CsrMatrix,
    /// `∫_T q` for every pressure unknown.
    pub pressure_integrals: Vec<f64>,
}

struct CellContribution {
    dofs: Vec<Option<usize>>,
    a: DMatrix<f64>,
    stab: DMatrix<f64>,
    m: DMatrix<f64>,
    b: DMatrix<f64>,
    pressure_gram: DMatrix<f64>,
    pressure_integrals: Vec<f64>,
}

/// Assembles a_w, b_w and c_w. γ is evaluated at the mesh size `h_max`.
pub fn assemble(mesh: &Mesh, space: &WgSpace, gamma: GammaSchedule, stabilizer: StabilizerKind) -> Result<AssembledSystem> {
    gamma.validate()?;
    let gamma_value = gamma.eval(mesh.h_max);
    let weights = match stabilizer {
        StabilizerKind::Standard => StabilizerWeights::Standard { gamma: gamma_value },
        StabilizerKind::Skeletal { alpha } => StabilizerWeights::Skeletal { alpha },
    };

    let contributions: Vec<CellContribution> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let el = LocalElement::new(mesh, c, space.k)?;
            let grad = el.velocity_gradient_stiffness(space);
            let stab = el.velocity_stabilizer(space, el.stabilizer_weights(&weights));
            let nv = space.velocity_local_dim();
            let dk = space.interior_dim;
            let mut m = DMatrix::zeros(nv, nv);
            for comp in 0..2 {
                m.view_mut((comp * dk, comp * dk), (dk, dk)).copy_from(&el.gram);
            }
            // the constant is the first low-order basis function
            let pressure_integrals = (0..space.pressure_dim).map(|a| el.low_gram[(a, 0)]).collect();
            Ok(CellContribution {
                dofs: space.local_to_global(mesh, c),
                a: &grad + &stab,
                stab,
                m,
                b: el.divergence_form(space),
                pressure_gram: el.low_gram.clone(),
                pressure_integrals,
            })
        })
        .collect::<Result<_>>()?;

    let nv = space.n_velocity();
    let np = space.n_pressure;
    let mut ta = TripletBuilder::new(nv, nv);
    let mut ts = TripletBuilder::new(nv, nv);
    let mut tm = TripletBuilder::new(nv, nv);
    let mut tb = TripletBuilder::new(np, nv);
    let mut tp = TripletBuilder::new(np, np);
    let mut pressure_integrals = vec![0.0; np];
    for (c, cc) in contributions.iter().enumerate() {
        for (i, gi) in cc.dofs.iter().enumerate() {
            let Some(gi) = *gi else { continue };
            for (j, gj) in cc.dofs.iter().enumerate() {
                let Some(gj) = *gj else { continue };
                ta.push(gi, gj, cc.a[(i, j)]);
                ts.push(gi, gj, cc.stab[(i, j)]);
                if cc.m[(i, j)] != 0.0 {
                    tm.push(gi, gj, cc.m[(i, j)]);
                }
            }
        }
        for a in 0..space.pressure_dim {
            let ga = space.pressure_index(c, a);
            for (j, gj) in cc.dofs.iter().enumerate() {
                if let Some(gj) = *gj {
                    tb.push(ga, gj, cc.b[(a, j)]);
                }
            }
            for bb in 0..space.pressure_dim {
                tp.push(ga, space.pressure_index(c, bb), cc.pressure_gram[(a, bb)]);
            }
            pressure_integrals[ga] = cc.pressure_integrals[a];
        }
    }
    Ok(AssembledSystem {
        space: space.clone(),
        gamma,
        gamma_value,
        stabilizer,
        a: ta.build(),
        m: tm.build(),
        b: tb.build(),
        stab: ts.build(),
        pressure_mass: tp.build(),
        pressure_integrals,
    })
}

/// Q_h u: cellwise L² projection onto [P_k(T)]² and edgewise onto
/// [P_{k-1}(e)]². Boundary edges carry no unknowns.
pub fn project_qh(mesh: &Mesh, space: &WgSpace, u: &(dyn Fn(Point) -> [f64; 2] + Sync)) -> Result<WeakFunction> {
    let locals: Vec<Vec<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| LocalElement::new(mesh, c, space.k)?.project(space, u))
        .collect::<Result<_>>()?;
    let mut v = vec![0.0; space.n_velocity()];
    for (c, local) in locals.iter().enumerate() {
        for (g, val) in space.local_to_global(mesh, c).into_iter().zip(local) {
            if let Some(g) = g {
                v[g] = *val;
            }
        }
    }
    Ok(WeakFunction::from_velocity(v))
}

/// s(v, v) for the stabilizer assembled into `system`.
pub fn stabilizer_energy(v: &WeakFunction, system: &AssembledSystem) -> f64 {
    system.stab.quad_form(&v.velocity)
}

/// ‖v‖_V = (Σ_T ‖∇v_0‖²_T + Σ_T h_T⁻¹ ‖Q_b v_0 - v_b‖²_∂T)^{1/2}.
pub fn v_norm(mesh: &Mesh, space: &WgSpace, v: &WeakFunction) -> Result<f64> {
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let el = LocalElement::new(mesh, c, space.k)?;
            let local = v.local_velocity(space, mesh, c);
            let dk = space.interior_dim;
            let q = crate::quadrature::cell_quadrature(2 * space.k)?;
            let (pts, wts) = q.map_to_triangle(&el.vertices);
            let mut grad = 0.0;
            for (p, w) in pts.iter().zip(&wts) {
                let g = el.basis.gradients(*p);
                for comp in 0..2 {
                    let mut d = [0.0; 2];
                    for a in 0..dk {
                        let c = local[space.local_velocity_index(comp, a)];
                        d[0] += c * g[a][0];
                        d[1] += c * g[a][1];
                    }
                    grad += w * (d[0] * d[0] + d[1] * d[1]);
                }
            }
            let weights = el.stabilizer_weights(&StabilizerWeights::Unweighted);
            let mut jump = 0.0;
            for comp in 0..2 {
                let scalar: DVector<f64> =
                    DVector::from_iterator(el.scalar_dim(), (0..el.scalar_dim()).map(|s| local[space.local_velocity_index(comp, s)]));
                for e in 0..3 {
                    let d = el.jump_operator(e) * &scalar;
                    jump += weights[e] * (d.transpose() * &el.edge_gram[e] * &d)[(0, 0)];
                }
            }
            Ok(grad + jump)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_cell_counts_and_symmetry() {
        let mesh = Mesh::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            crate::mesh::DomainKind::Custom,
        )
        .unwrap();
        let space = WgSpace::new(&mesh, 1).unwrap();
        assert_eq!(space.n_edge, 0);
        let sys = assemble(&mesh, &space, GammaSchedule::Constant(1.0), StabilizerKind::Standard).unwrap();
        assert_eq!((sys.a.nrows, sys.a.ncols), (6, 6));
        assert!(sys.a.is_symmetric() && sys.m.is_symmetric());
        let m = sys.m.to_dense();
        assert!(m.cholesky().is_some());
    }

    #[test]
    fn forms_are_psd() {
        let mesh = build_unit_square_mesh(3).unwrap();
        let space = WgSpace::new(&mesh, 2).unwrap();
        let sys = assemble(&mesh, &space, GammaSchedule::Power(0.1), StabilizerKind::Standard).unwrap();
        assert!(sys.a.is_symmetric() && sys.m.is_symmetric() && sys.stab.is_symmetric());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v: Vec<f64> = (0..space.n_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(sys.a.quad_form(&v) >= 0.0);
            assert!(sys.m.quad_form(&v) >= 0.0);
        }
    }

    #[test]
    fn stabilizer_energy_properties() {
        let mesh = build_unit_square_mesh(4).unwrap();
        let space = WgSpace::new(&mesh, 1).unwrap();
        let sys = assemble(&mesh, &space, GammaSchedule::Constant(1.0), StabilizerKind::Standard).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = WeakFunction::from_velocity((0..space.n_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let e1 = stabilizer_energy(&v, &sys);
        let e2 = stabilizer_energy(&v.scaled(2.0), &sys);
        assert!(e1 > 0.0);
        assert!((e2 - 4.0 * e1).abs() < 1e-12 * e2);

        // a continuous piecewise-linear hat vanishing on ∂Ω has v_b = Q_b v_0
        let w = project_qh(&mesh, &space, &|p| [hat(p, [0.5, 0.5], 0.25), 0.0]).unwrap();
        assert!(stabilizer_energy(&w, &sys) < 1e-28);
    }

    /// Lagrange P1 hat of the bottom-left/top-right diagonal triangulation.
    pub(crate) fn hat(p: Point, at: Point, h: f64) -> f64 {
        let x = (p[0] - at[0]) / h;
        let y = (p[1] - at[1]) / h;
        (1.0 - x.abs().max(y.abs()).max((x - y).abs())).max(0.0)
    }

    #[test]
    fn v_norm_of_conforming_hat() {
        let mesh = build_unit_square_mesh(4).unwrap();
        let space = WgSpace::new(&mesh, 1).unwrap();
        let w = project_qh(&mesh, &space, &|p| [hat(p, [0.5, 0.25], 0.25), 0.0]).unwrap();
        // |hat|_1^2 = 4 for this triangulation
        assert!((v_norm(&mesh, &space, &w).unwrap().powi(2) - 4.0).abs() < 1e-12);
        assert_eq!(v_norm(&mesh, &space, &WeakFunction::zeros(&space)).unwrap(), 0.0);
        assert!(v_norm(&mesh, &space, &w.sub(&w)).unwrap() == 0.0);
    }
}
