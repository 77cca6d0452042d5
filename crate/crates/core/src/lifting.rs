//! The `P_{k+2}` lifting `L_h = Q_h^{-1} P_h`.
//!
//! On each cell, `P_h` is the projection of the local WG data onto the image
//! `Q_h P_{k+2}(T)` in the discrete inner product
//! `<v, w> = ∫_T v_0 w_0 + Σ_e ∫_e v_b w_b` (volume and face terms
//! unweighted). Applying `Q_h^{-1}` inside the image is the normal-equation
//! solve `G c = Qmat^T W v`, so `lift_mat = G^{-1} Qmat^T W`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::element::ElementStore;
use crate::mesh::PolytopalMesh;
use crate::poly::{cell_basis, WgFunction};
use crate::{Point, Result, WgError};

/// Relative `sigma_min` below which a cell is rejected.
pub const CERTIFICATE_FAILURE: f64 = 1e-10;
/// Relative `sigma_min` below which a cell is reported as poorly conditioned.
pub const CERTIFICATE_WARNING: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LiftOperator {
    pub cell: usize,
    /// `P_{k+2}` coefficients → stacked local dofs `(Q_0 p; Q_b p per face)`.
    pub qmat: DMatrix<f64>,
    /// `Qmat^T W Qmat`.
    pub gram: DMatrix<f64>,
    /// Stacked local dofs → `P_{k+2}` coefficients.
    pub lift_mat: DMatrix<f64>,
    /// Smallest singular value of `W^{1/2} Qmat` relative to the largest.
    pub sigma_min: f64,
}

impl LiftOperator {
    pub fn apply(&self, local_dofs: &DVector<f64>) -> DVector<f64> {
        &self.lift_mat * local_dofs
    }

    pub fn is_poorly_conditioned(&self) -> bool {
        self.sigma_min < CERTIFICATE_WARNING
    }
}

/// Block-diagonal weight `W` of the discrete inner product on one cell.
pub fn discrete_weight(store: &ElementStore, cell: usize) -> DMatrix<f64> {
    let el = store.element(cell);
    let h = store.diameter(cell);
    let d = store.dim as i32;
    let nk = el.interior_dofs();
    let nf = el.face_dofs();
    let mut w = DMatrix::zeros(el.local_dofs(), el.local_dofs());
    w.view_mut((0, 0), (nk, nk))
        .copy_from(&(&el.interior_gram * h.powi(d)));
    for (f, g) in el.face_grams.iter().enumerate() {
        w.view_mut((nk + f * nf, nk + f * nf), (nf, nf))
            .copy_from(&(g * h.powi(d - 1)));
    }
    w
}

pub fn build_lift_operator(store: &ElementStore, cell: usize) -> Result<LiftOperator> {
    let el = store.element(cell);
    let qmat = el.lift_projection.clone();
    let w = discrete_weight(store, cell);
    let wq = &w * &qmat;
    let gram = qmat.transpose() * &wq;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| WgError::SingularGram {
            context: format!("lifting Gram of cell {cell}"),
        })?;
    let lift_mat = chol.solve(&wq.transpose());

    let l = w.cholesky().ok_or_else(|| WgError::SingularGram {
        context: format!("discrete weight of cell {cell}"),
    })?;
    let weighted = l.l().transpose() * &qmat;
    let s = weighted.singular_values();
    let sigma_min = s.min() / s.max();
    if sigma_min.is_nan() || sigma_min < CERTIFICATE_FAILURE {
        return Err(WgError::CertificateFailure { cell, sigma_min });
    }
    Ok(LiftOperator {
        cell,
        qmat,
        gram,
        lift_mat,
        sigma_min,
    })
}

pub fn build_lift_operators(store: &ElementStore) -> Result<Vec<LiftOperator>> {
    (0..store.num_cells())
        .into_par_iter()
        .map(|c| build_lift_operator(store, c))
        .collect()
}

/// A discontinuous piecewise `P_{k+2}` field in the scaled cell bases.
#[derive(Debug, Clone)]
pub struct LiftedField {
    pub degree: usize,
    pub coeffs: Vec<DVector<f64>>,
}

impl LiftedField {
    pub fn eval(&self, mesh: &PolytopalMesh, cell: usize, x: &Point) -> f64 {
        cell_basis(mesh, cell, self.degree).evaluate(self.coeffs[cell].as_slice(), x)
    }

    pub fn eval_grad(&self, mesh: &PolytopalMesh, cell: usize, x: &Point) -> Point {
        cell_basis(mesh, cell, self.degree).evaluate_grad(self.coeffs[cell].as_slice(), x)
    }
}

pub fn lift(mesh: &PolytopalMesh, u_h: &WgFunction, operators: &[LiftOperator]) -> LiftedField {
    let coeffs = operators
        .par_iter()
        .map(|op| op.apply(&u_h.local_dofs(mesh, op.cell)))
        .collect();
    LiftedField {
        degree: u_h.k + 2,
        coeffs,
    }
}

/// `|L_h u_h|_{1,h}`.
pub fn energy_of_lift(
    mesh: &PolytopalMesh,
    store: &ElementStore,
    u_h: &WgFunction,
    operators: &[LiftOperator],
) -> f64 {
    let field = lift(mesh, u_h, operators);
    let parts: Vec<f64> = (0..store.num_cells())
        .into_par_iter()
        .map(|c| {
            let h = store.diameter(c);
            let k = &store.element(c).lift_stiffness * h.powi(store.dim as i32 - 2);
            let x = &field.coeffs[c];
            x.dot(&(k * x))
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_quad_mesh, PolytopalMesh};
    use crate::poly::project_qh;

    fn unit_square() -> PolytopalMesh {
        let v = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ];
        let faces = vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]];
        PolytopalMesh::from_parts(2, v, faces, vec![vec![0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn unit_square_identity_and_certificate() {
        let mesh = unit_square();
        let store = ElementStore::build(&mesh, 1).unwrap();
        let op = build_lift_operator(&store, 0).unwrap();
        assert_eq!(op.qmat.ncols(), 10);
        let id = &op.lift_mat * &op.qmat;
        assert!((id - DMatrix::identity(10, 10)).amax() < 1e-10);
        assert!(op.sigma_min > 1e-8);
        assert!(op.gram.clone().cholesky().is_some());
    }

    #[test]
    fn lift_reproduces_cubic_and_zero() {
        let mesh = generate_quad_mesh(2);
        let store = ElementStore::build(&mesh, 1).unwrap();
        let ops = build_lift_operators(&store).unwrap();
        let u = |x: &Point| x.x * x.x * x.y;
        let qh = project_qh(&mesh, 1, u, false).unwrap();
        let field = lift(&mesh, &qh, &ops);
        for c in 0..mesh.num_cells() {
            for x in &store.physical_rule(c).points {
                assert!((field.eval(&mesh, c, x) - u(x)).abs() < 1e-10);
            }
        }
        let zero = WgFunction::zeros(&mesh, 1);
        assert!(lift(&mesh, &zero, &ops)
            .coeffs
            .iter()
            .all(|c| c.amax() == 0.0));
        assert_eq!(energy_of_lift(&mesh, &store, &zero, &ops), 0.0);
    }

    #[test]
    fn constant_lifts_to_zero_energy() {
        let mesh = generate_quad_mesh(2);
        let store = ElementStore::build(&mesh, 2).unwrap();
        let ops = build_lift_operators(&store).unwrap();
        let one = project_qh(&mesh, 2, |_| 1.0, false).unwrap();
        assert!(energy_of_lift(&mesh, &store, &one, &ops) < 1e-9);
    }
}
