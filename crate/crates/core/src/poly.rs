//! Scaled monomial bases on cells and faces, the local `L^2` projections
//! `Q_0`, `Q_b`, `Q_h`, and the weak-function container.

use nalgebra::{DMatrix, DVector};

use crate::mesh::PolytopalMesh;
use crate::quadrature::{cell_rule, face_rule, QuadratureRule, MAX_DEGREE};
use crate::{Point, Result, WgError};

/// Dimension of `P_degree` in `nvars` variables.
pub fn poly_dim(nvars: usize, degree: usize) -> usize {
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 1..=nvars {
        num *= degree + i;
        den *= i;
    }
    num / den
}

/// Exponents of all monomials of total degree `<= degree`, graded by total
/// degree so that `P_m` is always a prefix of `P_{m+1}`.
pub fn exponents(nvars: usize, degree: usize) -> Vec<[u8; 3]> {
    let mut out = Vec::with_capacity(poly_dim(nvars, degree));
    for d in 0..=degree as u8 {
        match nvars {
            1 => out.push([d, 0, 0]),
            2 => {
                for a in (0..=d).rev() {
                    out.push([a, d - a, 0]);
                }
            }
            3 => {
                for a in (0..=d).rev() {
                    for b in (0..=(d - a)).rev() {
                        out.push([a, b, d - a - b]);
                    }
                }
            }
            _ => panic!("unsupported number of variables {nvars}"),
        }
    }
    out
}

/// Monomials `s^α` in the affine variables `s_i = (x - origin)·axes_i`.
///
/// Cell bases use `axes = e_i / h_T`; face bases use the face tangents divided
/// by the face diameter.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub degree: usize,
    pub origin: Point,
    pub axes: Vec<Point>,
    exps: Vec<[u8; 3]>,
}

impl MonomialBasis {
    pub fn new(degree: usize, origin: Point, axes: Vec<Point>) -> Self {
        let exps = exponents(axes.len(), degree);
        Self {
            degree,
            origin,
            axes,
            exps,
        }
    }

    pub fn cell(dim: usize, degree: usize, center: Point, scale: f64) -> Self {
        let axes = (0..dim)
            .map(|i| {
                let mut e = Point::zeros();
                e[i] = 1.0 / scale;
                e
            })
            .collect();
        Self::new(degree, center, axes)
    }

    pub fn face(degree: usize, center: Point, tangents: &[Point], scale: f64) -> Self {
        Self::new(degree, center, tangents.iter().map(|t| t / scale).collect())
    }

    pub fn nvars(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[[u8; 3]] {
        &self.exps
    }

    pub fn index_of(&self, e: [u8; 3]) -> Option<usize> {
        self.exps.iter().position(|&x| x == e)
    }

    pub fn vars(&self, x: &Point) -> [f64; 3] {
        let d = x - self.origin;
        let mut s = [0.0; 3];
        for (i, a) in self.axes.iter().enumerate() {
            s[i] = d.dot(a);
        }
        s
    }

    fn powers(&self, s: &[f64; 3]) -> [[f64; 16]; 3] {
        let mut pw = [[0.0; 16]; 3];
        for i in 0..self.nvars() {
            pw[i][0] = 1.0;
            for p in 1..=self.degree {
                pw[i][p] = pw[i][p - 1] * s[i];
            }
        }
        pw
    }

    pub fn eval_into(&self, x: &Point, out: &mut [f64]) {
        let s = self.vars(x);
        let pw = self.powers(&s);
        let nv = self.nvars();
        for (o, e) in out.iter_mut().zip(&self.exps) {
            let mut v = pw[0][e[0] as usize];
            if nv > 1 {
                v *= pw[1][e[1] as usize];
            }
            if nv > 2 {
                v *= pw[2][e[2] as usize];
            }
            *o = v;
        }
    }

    pub fn eval(&self, x: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }

    /// Gradients with respect to the ambient coordinates.
    pub fn eval_grad_into(&self, x: &Point, out: &mut [Point]) {
        let s = self.vars(x);
        let pw = self.powers(&s);
        let nv = self.nvars();
        for (o, e) in out.iter_mut().zip(&self.exps) {
            let mut g = Point::zeros();
            for i in 0..nv {
                let ei = e[i] as usize;
                if ei == 0 {
                    continue;
                }
                let mut d = ei as f64 * pw[i][ei - 1];
                for j in 0..nv {
                    if j != i {
                        d *= pw[j][e[j] as usize];
                    }
                }
                g += self.axes[i] * d;
            }
            *o = g;
        }
    }

    pub fn eval_grad(&self, x: &Point) -> Vec<Point> {
        let mut out = vec![Point::zeros(); self.len()];
        self.eval_grad_into(x, &mut out);
        out
    }

    /// Value of the polynomial with coefficients `c`.
    pub fn evaluate(&self, c: &[f64], x: &Point) -> f64 {
        self.eval(x).iter().zip(c).map(|(a, b)| a * b).sum()
    }

    pub fn evaluate_grad(&self, c: &[f64], x: &Point) -> Point {
        self.eval_grad(x).iter().zip(c).map(|(g, b)| g * *b).sum()
    }

    /// `∫ φ_i φ_j` over the rule.
    pub fn gram(&self, rule: &QuadratureRule) -> DMatrix<f64> {
        let n = self.len();
        let mut g = DMatrix::zeros(n, n);
        let mut phi = vec![0.0; n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            self.eval_into(p, &mut phi);
            for j in 0..n {
                let wj = w * phi[j];
                for i in j..n {
                    g[(i, j)] += wj * phi[i];
                }
            }
        }
        g.fill_upper_triangle_with_lower_triangle();
        g
    }

    /// `∫ f φ_i` over the rule.
    pub fn moments(&self, rule: &QuadratureRule, f: impl Fn(&Point) -> f64) -> DVector<f64> {
        let mut b = DVector::zeros(self.len());
        let mut phi = vec![0.0; self.len()];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            self.eval_into(p, &mut phi);
            let fw = w * f(p);
            for (bi, ph) in b.iter_mut().zip(&phi) {
                *bi += fw * ph;
            }
        }
        b
    }
}

/// Quadrature degree used by every volume and face integral for interior
/// degree `k`.
pub fn default_quadrature_degree(k: usize) -> usize {
    (2 * (k + 2) + 2).min(MAX_DEGREE)
}

/// Solves `gram · c = rhs` by Cholesky.
pub fn solve_gram(gram: &DMatrix<f64>, rhs: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| WgError::SingularGram {
            context: context.to_owned(),
        })?;
    Ok(chol.solve(rhs))
}

/// `P_m(T)` on one cell in scaled monomials centred at the cell centroid.
#[derive(Debug, Clone)]
pub struct CellPolySpace {
    pub cell: usize,
    pub degree: usize,
    pub basis: MonomialBasis,
    pub gram: DMatrix<f64>,
    rule: QuadratureRule,
}

impl CellPolySpace {
    pub fn new(mesh: &PolytopalMesh, cell: usize, degree: usize) -> Result<Self> {
        let c = &mesh.cells[cell];
        let basis = MonomialBasis::cell(mesh.dim, degree, c.centroid, c.diameter);
        let rule = cell_rule(mesh, cell, (2 * degree + 6).min(MAX_DEGREE))?;
        let gram = basis.gram(&rule);
        Ok(Self {
            cell,
            degree,
            basis,
            gram,
            rule,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `Q_0 f`: the `L^2(T)` projection onto `P_m(T)`.
    pub fn project(&self, f: impl Fn(&Point) -> f64) -> Result<DVector<f64>> {
        let rhs = self.basis.moments(&self.rule, f);
        solve_gram(
            &self.gram,
            &rhs,
            &format!("cell {} degree {}", self.cell, self.degree),
        )
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }
}

/// `P_m(e)` on one face in scaled monomials of its tangent frame.
#[derive(Debug, Clone)]
pub struct FacePolySpace {
    pub face: usize,
    pub degree: usize,
    pub basis: MonomialBasis,
    pub gram: DMatrix<f64>,
    rule: QuadratureRule,
}

impl FacePolySpace {
    pub fn new(mesh: &PolytopalMesh, face: usize, degree: usize) -> Result<Self> {
        let basis = face_basis(mesh, face, degree);
        let rule = face_rule(mesh, face, (2 * degree + 6).min(MAX_DEGREE))?;
        let gram = basis.gram(&rule);
        Ok(Self {
            face,
            degree,
            basis,
            gram,
            rule,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `Q_b f`: the `L^2(e)` projection onto `P_m(e)`.
    pub fn project(&self, f: impl Fn(&Point) -> f64) -> Result<DVector<f64>> {
        let rhs = self.basis.moments(&self.rule, f);
        solve_gram(
            &self.gram,
            &rhs,
            &format!("face {} degree {}", self.face, self.degree),
        )
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }
}

pub fn cell_basis(mesh: &PolytopalMesh, cell: usize, degree: usize) -> MonomialBasis {
    let c = &mesh.cells[cell];
    MonomialBasis::cell(mesh.dim, degree, c.centroid, c.diameter)
}

pub fn face_basis(mesh: &PolytopalMesh, face: usize, degree: usize) -> MonomialBasis {
    let f = &mesh.faces[face];
    MonomialBasis::face(degree, f.centroid, &f.tangents, f.diameter)
}

pub fn project_cell(
    mesh: &PolytopalMesh,
    cell: usize,
    degree: usize,
    f: impl Fn(&Point) -> f64,
) -> Result<DVector<f64>> {
    CellPolySpace::new(mesh, cell, degree)?.project(f)
}

pub fn project_face(
    mesh: &PolytopalMesh,
    face: usize,
    degree: usize,
    f: impl Fn(&Point) -> f64,
) -> Result<DVector<f64>> {
    FacePolySpace::new(mesh, face, degree)?.project(f)
}

/// A weak function `{v_0, v_b}`: one `P_k` polynomial per cell and one
/// `P_{k+1}` polynomial per face, all faces included.
#[derive(Debug, Clone, PartialEq)]
pub struct WgFunction {
    pub k: usize,
    pub cell_dofs: usize,
    pub face_dofs: usize,
    pub cell_coeffs: Vec<f64>,
    pub face_coeffs: Vec<f64>,
}

impl WgFunction {
    pub fn zeros(mesh: &PolytopalMesh, k: usize) -> Self {
        let cell_dofs = poly_dim(mesh.dim, k);
        let face_dofs = poly_dim(mesh.dim - 1, k + 1);
        Self {
            k,
            cell_dofs,
            face_dofs,
            cell_coeffs: vec![0.0; cell_dofs * mesh.num_cells()],
            face_coeffs: vec![0.0; face_dofs * mesh.num_faces()],
        }
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.cell_coeffs[c * self.cell_dofs..(c + 1) * self.cell_dofs]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.cell_coeffs[c * self.cell_dofs..(c + 1) * self.cell_dofs]
    }

    pub fn face(&self, f: usize) -> &[f64] {
        &self.face_coeffs[f * self.face_dofs..(f + 1) * self.face_dofs]
    }

    pub fn face_mut(&mut self, f: usize) -> &mut [f64] {
        &mut self.face_coeffs[f * self.face_dofs..(f + 1) * self.face_dofs]
    }

    /// Stacked local dofs `(v_0; v_b on each face of the cell, in cell order)`.
    pub fn local_dofs(&self, mesh: &PolytopalMesh, cell: usize) -> DVector<f64> {
        let c = &mesh.cells[cell];
        let mut v = Vec::with_capacity(self.cell_dofs + c.faces.len() * self.face_dofs);
        v.extend_from_slice(self.cell(cell));
        for &f in &c.faces {
            v.extend_from_slice(self.face(f));
        }
        DVector::from_vec(v)
    }

    pub fn sub(&self, other: &WgFunction) -> WgFunction {
        let mut out = self.clone();
        out.cell_coeffs
            .iter_mut()
            .zip(&other.cell_coeffs)
            .for_each(|(a, b)| *a -= b);
        out.face_coeffs
            .iter_mut()
            .zip(&other.face_coeffs)
            .for_each(|(a, b)| *a -= b);
        out
    }

    /// Whether all boundary faces carry zero data (membership in `V_h^0`).
    pub fn is_homogeneous(&self, mesh: &PolytopalMesh) -> bool {
        mesh.boundary_face_ids
            .iter()
            .all(|&f| self.face(f).iter().all(|&x| x == 0.0))
    }

    pub fn zero_boundary(&mut self, mesh: &PolytopalMesh) {
        for &f in &mesh.boundary_face_ids {
            self.face_mut(f).fill(0.0);
        }
    }
}

/// `Q_h u = {Q_0 u, Q_b u}`; boundary faces are zeroed when `homogeneous`.
pub fn project_qh(
    mesh: &PolytopalMesh,
    k: usize,
    u: impl Fn(&Point) -> f64 + Sync,
    homogeneous: bool,
) -> Result<WgFunction> {
    use rayon::prelude::*;
    let mut w = WgFunction::zeros(mesh, k);
    let cells: Vec<DVector<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| project_cell(mesh, c, k, &u))
        .collect::<Result<_>>()?;
    for (c, v) in cells.into_iter().enumerate() {
        w.cell_mut(c).copy_from_slice(v.as_slice());
    }
    let faces: Vec<DVector<f64>> = (0..mesh.num_faces())
        .into_par_iter()
        .map(|f| project_face(mesh, f, k + 1, &u))
        .collect::<Result<_>>()?;
    for (f, v) in faces.into_iter().enumerate() {
        w.face_mut(f).copy_from_slice(v.as_slice());
    }
    if homogeneous {
        w.zero_boundary(mesh);
    }
    Ok(w)
}
