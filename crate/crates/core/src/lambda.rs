//! The weak-gradient test space `Λ_k(T)` and the weak gradient itself.
//!
//! `Λ_k(T)` consists of vector fields that are `P_{k+1}^d` on each simplex of
//! the centroid fan of `T`, have continuous normal components across the
//! internal facets, a divergence that is one `P_k(T)` polynomial on the whole
//! cell, and a normal trace that is one `P_{k+1}(e)` polynomial on each face
//! `e`, even where `e` is split into several facets.
//!
//! The space is computed as the nullspace of a constraint matrix. The shared
//! divergence and the shared per-face traces enter as auxiliary unknowns, so
//! no pairwise constraints between pieces are needed; their columns are
//! dropped after the nullspace is taken.
//!
//! All quantities here live in the scaled frame of the cell
//! (`x̂ = (x - x_T) / h_T`, see [`LocalCell`]).

use nalgebra::{DMatrix, DVector};

use crate::element::LocalCell;
use crate::linalg::{nullspace, orthonormalize, symmetrize};
use crate::mesh::{simplex_measure, PolytopalMesh, SimplicialDecomposition};
use crate::poly::{poly_dim, MonomialBasis};
use crate::quadrature::{facet_rule, map_rule, simplex_rule, QuadratureRule};
use crate::{Point, Result, WgError};

#[derive(Debug, Clone)]
pub struct LambdaBasis {
    pub dim: usize,
    pub k: usize,
    pub decomposition: SimplicialDecomposition,
    /// Coefficients of each basis function (columns) in the raw piecewise
    /// space, indexed `(simplex * dim + component) * dim P_{k+1} + α` with
    /// respect to the orthonormal scalar basis of each simplex.
    pub functions: DMatrix<f64>,
    /// `∫_T q_i · q_j`.
    pub mass: DMatrix<f64>,
    /// `∫_T φ_α div q_j` for the `P_k(T)` cell basis `φ`.
    pub div_moments: DMatrix<f64>,
    /// Per face: `∫_e ψ_β q_j·n` for the `P_{k+1}(e)` face basis `ψ`.
    pub trace_moments: Vec<DMatrix<f64>>,
    /// Singular value ratio of the raw parts before orthonormalisation.
    pub conditioning: f64,
    pieces: Vec<PieceBasis>,
}

/// `L^2`-orthonormal scalar `P_m` basis on one simplex: local monomials
/// `φ` combined as `ψ = T^T φ`.
#[derive(Debug, Clone)]
struct PieceBasis {
    monomials: MonomialBasis,
    transform: DMatrix<f64>,
    /// Gram matrix of `ψ` (the identity up to roundoff).
    gram: DMatrix<f64>,
}

impl PieceBasis {
    fn new(
        dim: usize,
        pts: &[Point],
        degree: usize,
        rule: &QuadratureRule,
        cell_id: usize,
    ) -> Result<Self> {
        let center = pts.iter().sum::<Point>() / pts.len() as f64;
        let diam = pts
            .iter()
            .flat_map(|a| pts.iter().map(move |b| (a - b).norm()))
            .fold(0.0, f64::max);
        let monomials = MonomialBasis::cell(dim, degree, center, diam);
        let raw_gram = monomials.gram(rule);
        let chol = raw_gram
            .clone()
            .cholesky()
            .ok_or_else(|| WgError::SingularGram {
                context: format!("sub-simplex basis of cell {cell_id}"),
            })?;
        let n = monomials.len();
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor is invertible");
        let transform = l_inv.transpose();
        let gram = transform.tr_mul(&raw_gram) * &transform;
        Ok(Self {
            monomials,
            transform,
            gram,
        })
    }

    fn len(&self) -> usize {
        self.monomials.len()
    }

    fn eval(&self, x: &Point) -> DVector<f64> {
        self.transform
            .tr_mul(&DVector::from_vec(self.monomials.eval(x)))
    }

    /// `∂_comp ψ_b` as `out[comp][b]`.
    fn eval_grad(&self, x: &Point) -> Vec<DVector<f64>> {
        let g = self.monomials.eval_grad(x);
        (0..self.monomials.axes.len())
            .map(|comp| {
                self.transform
                    .tr_mul(&DVector::from_iterator(g.len(), g.iter().map(|v| v[comp])))
            })
            .collect()
    }
}

/// Unit normal and tangent frame of a facet.
fn facet_frame(dim: usize, p: &[Point]) -> (Point, Vec<Point>) {
    if dim == 2 {
        let t = (p[1] - p[0]).normalize();
        (Point::new(t.y, -t.x, 0.0), vec![t])
    } else {
        let t1 = (p[1] - p[0]).normalize();
        let n = (p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
        let t2 = n.cross(&t1);
        (n, vec![t1, t2])
    }
}

/// Local `P_m` basis on a facet, used only as test functions for moments.
fn facet_test_basis(dim: usize, p: &[Point], degree: usize) -> MonomialBasis {
    let (_, tangents) = facet_frame(dim, p);
    let centroid = p.iter().sum::<Point>() / p.len() as f64;
    let diam = p
        .iter()
        .flat_map(|a| p.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    MonomialBasis::face(degree, centroid, &tangents, diam)
}

/// Re-expresses constraint rows tested against `test` in an orthonormal basis
/// of the same space, which keeps the constraint matrix well conditioned.
fn orthonormal_test_rows(
    test: &MonomialBasis,
    rule: &QuadratureRule,
    block: Vec<Vec<f64>>,
    cell_id: usize,
) -> Result<Vec<Vec<f64>>> {
    let chol = test
        .gram(rule)
        .cholesky()
        .ok_or_else(|| WgError::SingularGram {
            context: format!("test functions of cell {cell_id}"),
        })?;
    let b = DMatrix::from_fn(block.len(), block[0].len(), |i, j| block[i][j]);
    let x = chol
        .l()
        .solve_lower_triangular(&b)
        .expect("Cholesky factor is invertible");
    Ok(x.row_iter().map(|r| r.iter().copied().collect()).collect())
}

fn simplex_rule_on(
    dec: &SimplicialDecomposition,
    s: usize,
    degree: usize,
) -> Result<QuadratureRule> {
    let pts = dec.simplex_points(s);
    Ok(map_rule(
        &simplex_rule(dec.dim, degree)?,
        &pts,
        simplex_measure(dec.dim, &pts),
    ))
}

impl LambdaBasis {
    /// Builds `Λ_k` for a cell given in its scaled frame; `cell_id` is only
    /// used in error reports.
    pub fn build(cell: &LocalCell, k: usize, cell_id: usize) -> Result<Self> {
        let dim = cell.dim;
        let dec = cell.decompose(cell_id)?;
        let n1 = poly_dim(dim, k + 1);
        let nk = poly_dim(dim, k);
        let nf = poly_dim(dim - 1, k + 1);
        let n_sub = dec.sub_simplices.len();
        let n_raw = n_sub * dim * n1;
        let g_col = n_raw;
        let face_col = |f: usize| n_raw + nk + f * nf;
        let n_cols = n_raw + nk + cell.faces.len() * nf;
        // every integrand below is a product of two polynomials of degree <= k + 1
        let qdeg = 2 * k + 2;
        let cell_pk = cell.cell_basis(k);

        let rules: Vec<QuadratureRule> = (0..n_sub)
            .map(|s| simplex_rule_on(&dec, s, qdeg))
            .collect::<Result<_>>()?;
        let pieces: Vec<PieceBasis> = (0..n_sub)
            .map(|s| PieceBasis::new(dim, &dec.simplex_points(s), k + 1, &rules[s], cell_id))
            .collect::<Result<_>>()?;

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let raw = |s: usize, comp: usize, a: usize| (s * dim + comp) * n1 + a;

        // normal continuity across internal facets
        for isf in &dec.interior_sub_faces {
            let pts = dec.facet_points(&isf.vertices);
            let (nu, _) = facet_frame(dim, &pts);
            let test = facet_test_basis(dim, &pts, k + 1);
            let rule = facet_rule(dim, &pts, qdeg)?;
            let mut block = vec![vec![0.0; n_cols]; test.len()];
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let tv = test.eval(x);
                let phi = [
                    pieces[isf.simplices[0]].eval(x),
                    pieces[isf.simplices[1]].eval(x),
                ];
                for (t, row) in tv.iter().zip(block.iter_mut()) {
                    for comp in 0..dim {
                        let c = w * t * nu[comp];
                        for a in 0..n1 {
                            row[raw(isf.simplices[0], comp, a)] += c * phi[0][a];
                            row[raw(isf.simplices[1], comp, a)] -= c * phi[1][a];
                        }
                    }
                }
            }
            rows.extend(orthonormal_test_rows(&test, &rule, block, cell_id)?);
        }

        // one-piece divergence: div q|_s = g, tested against P_k(s)
        let mut aux_grams = vec![(g_col, DMatrix::zeros(nk, nk))];
        for s in 0..n_sub {
            aux_grams[0].1 += cell_pk.gram(&rules[s]);
            let local = &pieces[s].monomials;
            let test = MonomialBasis::new(k, local.origin, local.axes.clone());
            let rule = &rules[s];
            let mut block = vec![vec![0.0; n_cols]; test.len()];
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let tv = test.eval(x);
                let dphi = pieces[s].eval_grad(x);
                let g = cell_pk.eval(x);
                for (t, row) in tv.iter().zip(block.iter_mut()) {
                    for (comp, d) in dphi.iter().enumerate() {
                        for a in 0..n1 {
                            row[raw(s, comp, a)] += w * t * d[a];
                        }
                    }
                    for (b, gb) in g.iter().enumerate() {
                        row[g_col + b] -= w * t * gb;
                    }
                }
            }
            rows.extend(orthonormal_test_rows(&test, rule, block, cell_id)?);
        }

        // one-piece normal trace per parent face
        for (f, sub_faces) in dec.sub_faces.iter().enumerate() {
            let n_out = cell.faces[f].outward;
            let fb = cell.face_basis(f, k + 1);
            let mut face_gram = DMatrix::zeros(nf, nf);
            for sf in sub_faces {
                let pts = dec.facet_points(&sf.vertices);
                let test = facet_test_basis(dim, &pts, k + 1);
                let rule = facet_rule(dim, &pts, qdeg)?;
                face_gram += fb.gram(&rule);
                let mut block = vec![vec![0.0; n_cols]; test.len()];
                for (x, w) in rule.points.iter().zip(&rule.weights) {
                    let phi = pieces[sf.simplex].eval(x);
                    let tv = test.eval(x);
                    let psi = fb.eval(x);
                    for (t, row) in tv.iter().zip(block.iter_mut()) {
                        for comp in 0..dim {
                            let c = w * t * n_out[comp];
                            for a in 0..n1 {
                                row[raw(sf.simplex, comp, a)] += c * phi[a];
                            }
                        }
                        for (b, ps) in psi.iter().enumerate() {
                            row[face_col(f) + b] -= w * t * ps;
                        }
                    }
                }
                rows.extend(orthonormal_test_rows(&test, &rule, block, cell_id)?);
            }
            aux_grams.push((face_col(f), face_gram));
        }

        let mut cmat = DMatrix::from_fn(rows.len(), n_cols, |i, j| rows[i][j]);
        // Auxiliary unknowns in L2-orthonormal bases, so that the raw part of
        // the nullspace stays well conditioned.
        for (col, gram) in aux_grams {
            let n = gram.nrows();
            let chol = gram.cholesky().ok_or_else(|| WgError::SingularGram {
                context: format!("auxiliary basis of cell {cell_id}"),
            })?;
            let blk = cmat.columns(col, n).transpose();
            let scaled = chol
                .l()
                .solve_lower_triangular(&blk)
                .expect("Cholesky factor is invertible");
            cmat.columns_mut(col, n).copy_from(&scaled.transpose());
        }
        for mut row in cmat.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }

        let ns = nullspace(&cmat);
        if let Some(ratio) = ns.deadband {
            return Err(WgError::RankDeadband {
                cell: cell_id,
                ratio,
            });
        }
        if ns.basis.ncols() == 0 {
            return Err(WgError::EmptyLambdaSpace { cell: cell_id });
        }
        let raw_part = ns.basis.rows(0, n_raw).into_owned();
        let (functions, conditioning) = orthonormalize(&raw_part);
        if conditioning.is_nan() || conditioning <= 1e-8 {
            return Err(WgError::RankDeadband {
                cell: cell_id,
                ratio: conditioning,
            });
        }
        let n_basis = functions.ncols();

        let mut mass = DMatrix::zeros(n_basis, n_basis);
        for (s, piece) in pieces.iter().enumerate() {
            for comp in 0..dim {
                let blk = functions.rows(raw(s, comp, 0), n1);
                mass += blk.transpose() * &piece.gram * blk;
            }
        }
        symmetrize(&mut mass);

        let mut basis = Self {
            dim,
            k,
            decomposition: dec,
            functions,
            mass,
            div_moments: DMatrix::zeros(nk, n_basis),
            trace_moments: Vec::new(),
            conditioning,
            pieces,
        };

        for (s, rule) in rules.iter().enumerate() {
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let dq = DVector::from_vec(basis.eval_piece_div(s, x));
                let phi = DVector::from_vec(cell_pk.eval(x));
                basis.div_moments += (phi * *w) * dq.transpose();
            }
        }

        let mut trace_moments = Vec::with_capacity(cell.faces.len());
        for f in 0..cell.faces.len() {
            let fb = cell.face_basis(f, k + 1);
            let n_out = cell.faces[f].outward;
            let mut mom = DMatrix::zeros(nf, n_basis);
            for sf in &basis.decomposition.sub_faces[f] {
                let pts = basis.decomposition.facet_points(&sf.vertices);
                let rule = facet_rule(dim, &pts, qdeg)?;
                for (x, w) in rule.points.iter().zip(&rule.weights) {
                    let psi = DVector::from_vec(fb.eval(x));
                    let qn: Vec<f64> = basis
                        .eval_piece(sf.simplex, x)
                        .iter()
                        .map(|q| q.dot(&n_out))
                        .collect();
                    mom += (psi * *w) * DVector::from_vec(qn).transpose();
                }
            }
            trace_moments.push(mom);
        }
        basis.trace_moments = trace_moments;
        Ok(basis)
    }

    pub fn n_basis(&self) -> usize {
        self.functions.ncols()
    }

    pub fn raw_dim(&self) -> usize {
        self.functions.nrows()
    }

    /// Values of all basis functions on piece `s` at the (scaled) point `x`.
    pub fn eval_piece(&self, s: usize, x: &Point) -> Vec<Point> {
        let n1 = self.pieces[s].len();
        let phi = self.pieces[s].eval(x);
        let mut out = vec![Point::zeros(); self.n_basis()];
        for comp in 0..self.dim {
            let vals = self
                .functions
                .rows((s * self.dim + comp) * n1, n1)
                .tr_mul(&phi);
            for (o, v) in out.iter_mut().zip(vals.iter()) {
                o[comp] = *v;
            }
        }
        out
    }

    /// Raw piecewise coefficients of the combination `Σ c_i q_i`, for
    /// [`Self::eval_raw`].
    pub fn raw_coeffs(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.functions * c
    }

    /// Value on piece `s` at the (scaled) point `x` of the field with raw
    /// coefficients `raw`.
    pub fn eval_raw(&self, s: usize, x: &Point, raw: &DVector<f64>) -> Point {
        let n1 = self.pieces[s].len();
        let phi = self.pieces[s].eval(x);
        let mut out = Point::zeros();
        for comp in 0..self.dim {
            out[comp] = raw.rows((s * self.dim + comp) * n1, n1).dot(&phi);
        }
        out
    }

    /// Divergences of all basis functions on piece `s` at the (scaled) point `x`.
    pub fn eval_piece_div(&self, s: usize, x: &Point) -> Vec<f64> {
        let n1 = self.pieces[s].len();
        let dphi = self.pieces[s].eval_grad(x);
        let mut out = DVector::zeros(self.n_basis());
        for (comp, d) in dphi.iter().enumerate() {
            out += self
                .functions
                .rows((s * self.dim + comp) * n1, n1)
                .tr_mul(d);
        }
        out.iter().copied().collect()
    }

    /// Right-hand side operator of the weak-gradient equation: row `i` maps
    /// local WG dofs `(v_0; v_b)` to `∫_∂T v_b q_i·n - ∫_T v_0 div q_i`.
    pub fn gradient_rhs(&self) -> DMatrix<f64> {
        let nk = self.div_moments.nrows();
        let nf = self.trace_moments.first().map_or(0, |m| m.nrows());
        let mut b = DMatrix::zeros(self.n_basis(), nk + self.trace_moments.len() * nf);
        b.view_mut((0, 0), (self.n_basis(), nk))
            .copy_from(&(-self.div_moments.transpose()));
        for (f, m) in self.trace_moments.iter().enumerate() {
            b.view_mut((0, nk + f * nf), (self.n_basis(), nf))
                .copy_from(&m.transpose());
        }
        b
    }
}

/// Builds `Λ_k(T)` for a mesh cell (in that cell's scaled frame).
pub fn build_lambda_basis(mesh: &PolytopalMesh, cell_id: usize, k: usize) -> Result<LambdaBasis> {
    LambdaBasis::build(&LocalCell::from_mesh(mesh, cell_id), k, cell_id)
}

/// Coefficients of `∇_w v` on one cell with respect to the physical basis
/// functions `q_i(x) = q̂_i((x - x_T)/h_T)`.
#[derive(Debug, Clone)]
pub struct WeakGradientCoeffs {
    pub cell: usize,
    pub coeffs: DVector<f64>,
}

impl WeakGradientCoeffs {
    /// Evaluates `∇_w v` on piece `s` at the scaled point `x̂`.
    pub fn eval(&self, basis: &LambdaBasis, s: usize, x_scaled: &Point) -> Point {
        basis.eval_raw(s, x_scaled, &basis.raw_coeffs(&self.coeffs))
    }
}

/// Solves `mass · c = B v` for the reference-frame coefficients of the weak
/// gradient of the local dofs `v`.
pub fn weak_gradient_reference(
    basis: &LambdaBasis,
    gradient_rhs: &DMatrix<f64>,
    local_dofs: &DVector<f64>,
) -> Result<DVector<f64>> {
    let b = gradient_rhs * local_dofs;
    let chol = basis
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| WgError::SingularGram {
            context: "Λ_k mass".into(),
        })?;
    Ok(chol.solve(&b))
}
