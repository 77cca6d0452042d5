//! Per-cell matrices in the scaled frame of the cell, shared between
//! congruent cells.
//!
//! Every local quantity is computed on the cell mapped by
//! `x̂ = (x - x_T) / h_T` (centroid to the origin, diameter to one). Cell
//! polynomials are scaled monomials in that frame and face polynomials are
//! the global face bases rewritten in it, so two cells that agree in the
//! scaled frame (including their face frames) have identical local
//! matrices. [`ElementStore`] builds one [`LocalElement`] per such class.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::lambda::{weak_gradient_reference, LambdaBasis, WeakGradientCoeffs};
use crate::linalg::symmetrize;
use crate::mesh::{decompose_points, PolytopalMesh, SimplicialDecomposition};
use crate::poly::{default_quadrature_degree, poly_dim, MonomialBasis, WgFunction};
use crate::quadrature::{facet_rule, map_rule, simplex_rule, QuadratureRule};
use crate::{Point, Result, WgError};

/// Face of a [`LocalCell`].
#[derive(Debug, Clone)]
pub struct LocalFace {
    /// Local vertex indices (the loop of the global face).
    pub vertices: Vec<usize>,
    /// Face centroid in the scaled frame.
    pub center: Point,
    /// Face tangents times `h_T / h_e`, so that face monomials are the
    /// global face monomials.
    pub axes: Vec<Point>,
    pub outward: Point,
}

/// A cell in its scaled frame.
#[derive(Debug, Clone)]
pub struct LocalCell {
    pub dim: usize,
    pub points: Vec<Point>,
    pub faces: Vec<LocalFace>,
}

impl LocalCell {
    pub fn from_mesh(mesh: &PolytopalMesh, cell: usize) -> Self {
        let c = &mesh.cells[cell];
        let h = c.diameter;
        let to_local = |x: &Point| (x - c.centroid) / h;
        let points = c
            .vertices
            .iter()
            .map(|&v| to_local(&mesh.vertices[v]))
            .collect();
        let local_of = |g: usize| {
            c.vertices
                .iter()
                .position(|&v| v == g)
                .expect("face vertex in cell")
        };
        let faces = c
            .faces
            .iter()
            .enumerate()
            .map(|(slot, &f)| {
                let face = &mesh.faces[f];
                LocalFace {
                    vertices: face.vertices.iter().map(|&g| local_of(g)).collect(),
                    center: to_local(&face.centroid),
                    axes: face
                        .tangents
                        .iter()
                        .map(|t| t * (h / face.diameter))
                        .collect(),
                    outward: mesh.outward_normal(cell, slot),
                }
            })
            .collect();
        Self {
            dim: mesh.dim,
            points,
            faces,
        }
    }

    pub fn decompose(&self, cell_id: usize) -> Result<SimplicialDecomposition> {
        let loops: Vec<Vec<usize>> = self.faces.iter().map(|f| f.vertices.clone()).collect();
        decompose_points(self.dim, cell_id, &self.points, &loops, Point::zeros())
    }

    pub fn cell_basis(&self, degree: usize) -> MonomialBasis {
        MonomialBasis::cell(self.dim, degree, Point::zeros(), 1.0)
    }

    pub fn face_basis(&self, slot: usize, degree: usize) -> MonomialBasis {
        let f = &self.faces[slot];
        MonomialBasis::new(degree, f.center, f.axes.clone())
    }

    /// Quantised description used to detect congruent cells.
    pub fn key(&self) -> Vec<i64> {
        const Q: f64 = (1u64 << 40) as f64;
        let q = |v: f64| (v * Q).round() as i64;
        let mut key = vec![
            self.dim as i64,
            self.points.len() as i64,
            self.faces.len() as i64,
        ];
        for p in &self.points {
            key.extend((0..self.dim).map(|i| q(p[i])));
        }
        for f in &self.faces {
            key.push(f.vertices.len() as i64);
            key.extend(f.vertices.iter().map(|&v| v as i64));
            key.extend((0..self.dim).map(|i| q(f.center[i])));
            key.extend((0..self.dim).map(|i| q(f.outward[i])));
            for a in &f.axes {
                key.extend((0..self.dim).map(|i| q(a[i])));
            }
        }
        key
    }
}

/// Everything about one cell class that does not depend on its size.
#[derive(Debug, Clone)]
pub struct LocalElement {
    pub k: usize,
    pub dim: usize,
    pub cell: LocalCell,
    pub lambda: LambdaBasis,
    /// Gram matrix of `P_k` on the scaled cell.
    pub interior_gram: DMatrix<f64>,
    /// Gram matrices of `P_{k+1}(e)` on the scaled faces.
    pub face_grams: Vec<DMatrix<f64>>,
    /// `B`: local dofs → right-hand sides of the weak-gradient equation.
    pub gradient_rhs: DMatrix<f64>,
    /// `M^{-1} B`: local dofs → weak-gradient coefficients.
    pub weak_gradient: DMatrix<f64>,
    /// `B^T M^{-1} B`, the local WG stiffness in the scaled frame.
    pub stiffness: DMatrix<f64>,
    /// Columns: `(Q_0 p; Q_b p on each face)` for the `P_{k+2}` monomials.
    pub lift_projection: DMatrix<f64>,
    /// `∫ ∇p_i · ∇p_j` for the `P_{k+2}` monomials.
    pub lift_stiffness: DMatrix<f64>,
    /// Composite cell rule of the default degree, scaled frame.
    pub rule: QuadratureRule,
    /// `P_k` and `P_{k+2}` bases tabulated at the rule points.
    pub tables: [PolyTable; 2],
}

/// Values and scaled-frame gradients of a cell basis at the rule points.
#[derive(Debug, Clone)]
pub struct PolyTable {
    pub degree: usize,
    /// `values[(q, i)] = φ_i(x̂_q)`.
    pub values: DMatrix<f64>,
    /// Per coordinate: `grads[d][(q, i)] = ∂_d φ_i(x̂_q)` in the scaled frame.
    pub grads: Vec<DMatrix<f64>>,
}

impl PolyTable {
    fn new(basis: &MonomialBasis, dim: usize, rule: &QuadratureRule) -> Self {
        let (nq, n) = (rule.len(), basis.len());
        let mut values = DMatrix::zeros(nq, n);
        let mut grads = vec![DMatrix::zeros(nq, n); dim];
        let mut g = vec![Point::zeros(); n];
        for (q, x) in rule.points.iter().enumerate() {
            for (i, v) in basis.eval(x).into_iter().enumerate() {
                values[(q, i)] = v;
            }
            basis.eval_grad_into(x, &mut g);
            for (i, gi) in g.iter().enumerate() {
                for (d, gd) in grads.iter_mut().enumerate() {
                    gd[(q, i)] = gi[d];
                }
            }
        }
        Self {
            degree: basis.degree,
            values,
            grads,
        }
    }
}

impl LocalElement {
    pub fn build(cell: LocalCell, k: usize, cell_id: usize) -> Result<Self> {
        let dim = cell.dim;
        let lambda = LambdaBasis::build(&cell, k, cell_id)?;
        let dec = &lambda.decomposition;
        let qdeg = default_quadrature_degree(k);
        let rule = composite_rule(dec, qdeg)?;

        let pk = cell.cell_basis(k);
        let pk2 = cell.cell_basis(k + 2);
        let interior_gram = pk.gram(&rule);
        let mut face_grams = Vec::with_capacity(cell.faces.len());
        let mut face_proj = Vec::with_capacity(cell.faces.len());
        for f in 0..cell.faces.len() {
            let fb = cell.face_basis(f, k + 1);
            let mut gram = DMatrix::zeros(fb.len(), fb.len());
            let mut mixed = DMatrix::zeros(fb.len(), pk2.len());
            for sf in &dec.sub_faces[f] {
                let r = facet_rule(dim, &dec.facet_points(&sf.vertices), qdeg)?;
                gram += fb.gram(&r);
                mixed += cross_moments(&fb, &pk2, &r);
            }
            let chol = gram
                .clone()
                .cholesky()
                .ok_or_else(|| WgError::SingularGram {
                    context: format!("face slot {f} of cell {cell_id}"),
                })?;
            face_proj.push(chol.solve(&mixed));
            face_grams.push(gram);
        }

        let gradient_rhs = lambda.gradient_rhs();
        let mass_chol = lambda
            .mass
            .clone()
            .cholesky()
            .ok_or_else(|| WgError::SingularGram {
                context: format!("Λ_k mass of cell {cell_id}"),
            })?;
        let weak_gradient = mass_chol.solve(&gradient_rhs);
        let mut stiffness = gradient_rhs.transpose() * &weak_gradient;
        symmetrize(&mut stiffness);

        let interior_chol =
            interior_gram
                .clone()
                .cholesky()
                .ok_or_else(|| WgError::SingularGram {
                    context: format!("P_k Gram of cell {cell_id}"),
                })?;
        let q0 = interior_chol.solve(&cross_moments(&pk, &pk2, &rule));
        let nk = pk.len();
        let nf = poly_dim(dim - 1, k + 1);
        let n_local = nk + nf * cell.faces.len();
        let mut lift_projection = DMatrix::zeros(n_local, pk2.len());
        lift_projection
            .view_mut((0, 0), (nk, pk2.len()))
            .copy_from(&q0);
        for (f, qb) in face_proj.iter().enumerate() {
            lift_projection
                .view_mut((nk + f * nf, 0), (nf, pk2.len()))
                .copy_from(qb);
        }
        let lift_stiffness = gradient_gram(&pk2, &rule);
        let tables = [
            PolyTable::new(&pk, dim, &rule),
            PolyTable::new(&pk2, dim, &rule),
        ];

        Ok(Self {
            k,
            dim,
            cell,
            lambda,
            interior_gram,
            face_grams,
            gradient_rhs,
            weak_gradient,
            stiffness,
            lift_projection,
            lift_stiffness,
            rule,
            tables,
        })
    }

    pub fn interior_dofs(&self) -> usize {
        self.interior_gram.nrows()
    }

    pub fn face_dofs(&self) -> usize {
        self.face_grams.first().map_or(0, |g| g.nrows())
    }

    pub fn local_dofs(&self) -> usize {
        self.interior_dofs() + self.face_dofs() * self.face_grams.len()
    }
}

fn composite_rule(dec: &SimplicialDecomposition, degree: usize) -> Result<QuadratureRule> {
    let reference = simplex_rule(dec.dim, degree)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for s in 0..dec.sub_simplices.len() {
        let r = map_rule(&reference, &dec.simplex_points(s), dec.simplex_measure(s));
        points.extend(r.points);
        weights.extend(r.weights);
    }
    Ok(QuadratureRule { points, weights })
}

/// `∫ a_i b_j`.
fn cross_moments(a: &MonomialBasis, b: &MonomialBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.len(), b.len());
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        let av = a.eval(x);
        let bv = b.eval(x);
        for j in 0..b.len() {
            let wb = w * bv[j];
            for i in 0..a.len() {
                m[(i, j)] += av[i] * wb;
            }
        }
    }
    m
}

/// `∫ ∇a_i · ∇a_j`.
fn gradient_gram(a: &MonomialBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    let n = a.len();
    let mut m = DMatrix::zeros(n, n);
    let mut g = vec![Point::zeros(); n];
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        a.eval_grad_into(x, &mut g);
        for j in 0..n {
            for i in j..n {
                m[(i, j)] += w * g[i].dot(&g[j]);
            }
        }
    }
    m.fill_upper_triangle_with_lower_triangle();
    m
}

/// Degree plus quantised scaled geometry.
type ElementKey = (usize, Vec<i64>);

/// Local elements keyed by degree and scaled geometry, reusable across
/// meshes (congruent cells recur at every refinement level).
#[derive(Debug, Default)]
pub struct ElementCache {
    elements: Mutex<HashMap<ElementKey, Arc<LocalElement>>>,
}

impl ElementCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elements.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Local elements for every cell of a mesh, deduplicated by congruence class.
#[derive(Debug, Clone)]
pub struct ElementStore {
    pub k: usize,
    pub dim: usize,
    elements: Vec<Arc<LocalElement>>,
    cell_class: Vec<usize>,
    diameters: Vec<f64>,
    centroids: Vec<Point>,
}

impl ElementStore {
    pub fn build(mesh: &PolytopalMesh, k: usize) -> Result<Self> {
        Self::build_cached(mesh, k, &ElementCache::new())
    }

    /// Like [`ElementStore::build`], reusing and extending `cache`.
    pub fn build_cached(mesh: &PolytopalMesh, k: usize, cache: &ElementCache) -> Result<Self> {
        let locals: Vec<LocalCell> = (0..mesh.num_cells())
            .map(|c| LocalCell::from_mesh(mesh, c))
            .collect();
        let mut class_of_key: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut representatives = Vec::new();
        let mut keys = Vec::new();
        let mut cell_class = Vec::with_capacity(locals.len());
        for (c, lc) in locals.iter().enumerate() {
            let next = representatives.len();
            let key = lc.key();
            let class = *class_of_key.entry(key.clone()).or_insert(next);
            if class == next {
                representatives.push(c);
                keys.push(key);
            }
            cell_class.push(class);
        }
        let known: Vec<Option<Arc<LocalElement>>> = {
            let map = cache.elements.lock().expect("cache lock");
            keys.iter()
                .map(|key| map.get(&(k, key.clone())).cloned())
                .collect()
        };
        let elements = representatives
            .par_iter()
            .zip(known)
            .map(|(&c, known)| match known {
                Some(el) => Ok(el),
                None => LocalElement::build(locals[c].clone(), k, c).map(Arc::new),
            })
            .collect::<Result<Vec<_>>>()?;
        {
            let mut map = cache.elements.lock().expect("cache lock");
            for (key, el) in keys.into_iter().zip(&elements) {
                map.entry((k, key)).or_insert_with(|| el.clone());
            }
        }
        Ok(Self {
            k,
            dim: mesh.dim,
            elements,
            cell_class,
            diameters: mesh.cells.iter().map(|c| c.diameter).collect(),
            centroids: mesh.cells.iter().map(|c| c.centroid).collect(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.elements.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_class.len()
    }

    pub fn element(&self, cell: usize) -> &LocalElement {
        &self.elements[self.cell_class[cell]]
    }

    pub fn class_of(&self, cell: usize) -> usize {
        self.cell_class[cell]
    }

    pub fn diameter(&self, cell: usize) -> f64 {
        self.diameters[cell]
    }

    pub fn centroid(&self, cell: usize) -> Point {
        self.centroids[cell]
    }

    /// Scaled-frame coordinates of a physical point.
    pub fn to_local(&self, cell: usize, x: &Point) -> Point {
        (x - self.centroids[cell]) / self.diameters[cell]
    }

    pub fn to_physical(&self, cell: usize, x: &Point) -> Point {
        self.centroids[cell] + x * self.diameters[cell]
    }

    /// Physical local stiffness `(∇_w φ_i, ∇_w φ_j)_T` over the local dofs.
    pub fn local_stiffness(&self, cell: usize) -> DMatrix<f64> {
        let h = self.diameters[cell];
        &self.element(cell).stiffness * h.powi(self.dim as i32 - 2)
    }

    /// Physical-frame weak-gradient coefficients of `v` on `cell`.
    pub fn weak_gradient(
        &self,
        mesh: &PolytopalMesh,
        cell: usize,
        v: &WgFunction,
    ) -> Result<WeakGradientCoeffs> {
        let el = self.element(cell);
        let c = weak_gradient_reference(&el.lambda, &el.gradient_rhs, &v.local_dofs(mesh, cell))?;
        Ok(WeakGradientCoeffs {
            cell,
            coeffs: c / self.diameters[cell],
        })
    }

    /// `|||v|||^2 = Σ_T (∇_w v, ∇_w v)_T`.
    pub fn energy_squared(&self, mesh: &PolytopalMesh, v: &WgFunction) -> f64 {
        (0..self.num_cells())
            .into_par_iter()
            .map(|c| {
                let el = self.element(c);
                let g = &el.weak_gradient * v.local_dofs(mesh, c);
                g.dot(&(&el.lambda.mass * &g)) * self.diameters[c].powi(self.dim as i32 - 2)
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    /// Composite rule of `cell` in physical coordinates.
    pub fn physical_rule(&self, cell: usize) -> QuadratureRule {
        let r = &self.element(cell).rule;
        let vol = self.diameters[cell].powi(self.dim as i32);
        QuadratureRule {
            points: r.points.iter().map(|x| self.to_physical(cell, x)).collect(),
            weights: r.weights.iter().map(|w| w * vol).collect(),
        }
    }

    fn table(&self, cell: usize, degree: usize) -> &PolyTable {
        self.element(cell)
            .tables
            .iter()
            .find(|t| t.degree == degree)
            .unwrap_or_else(|| panic!("no degree-{degree} table (k = {})", self.k))
    }

    /// Values at the rule points of the cell polynomial with `coeffs`
    /// (degree `k` or `k + 2`).
    pub fn values_at_rule(&self, cell: usize, degree: usize, coeffs: &[f64]) -> DVector<f64> {
        &self.table(cell, degree).values * DVector::from_column_slice(coeffs)
    }

    /// Physical gradients at the rule points of the cell polynomial with `coeffs`.
    pub fn gradients_at_rule(&self, cell: usize, degree: usize, coeffs: &[f64]) -> Vec<Point> {
        let t = self.table(cell, degree);
        let c = DVector::from_column_slice(coeffs);
        let h = self.diameters[cell];
        let parts: Vec<DVector<f64>> = t.grads.iter().map(|g| g * &c).collect();
        (0..t.values.nrows())
            .map(|q| {
                let mut p = Point::zeros();
                for (d, v) in parts.iter().enumerate() {
                    p[d] = v[q] / h;
                }
                p
            })
            .collect()
    }

    /// `(f, φ_α)_T` for the `P_k` basis of `cell`.
    pub fn load(&self, cell: usize, f: impl Fn(&Point) -> f64) -> DVector<f64> {
        let el = self.element(cell);
        let basis = el.cell.cell_basis(self.k);
        let h = self.diameters[cell];
        let vol = h.powi(self.dim as i32);
        let mut b = DVector::zeros(basis.len());
        let mut phi = vec![0.0; basis.len()];
        for (x, w) in el.rule.points.iter().zip(&el.rule.weights) {
            basis.eval_into(x, &mut phi);
            let fw = w * vol * f(&self.to_physical(cell, x));
            for (bi, p) in b.iter_mut().zip(&phi) {
                *bi += fw * p;
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshFamily;
    use crate::poly::project_qh;

    #[test]
    fn congruent_cells_share_one_element() {
        let mesh = MeshFamily::Quad.generate(4);
        let cache = ElementCache::new();
        let store = ElementStore::build_cached(&mesh, 1, &cache).unwrap();
        assert!(store.num_classes() * 4 < mesh.num_cells());
        let n = cache.len();
        assert_eq!(n, store.num_classes());
        ElementStore::build_cached(&MeshFamily::Quad.generate(4), 1, &cache).unwrap();
        assert_eq!(cache.len(), n);
        ElementStore::build_cached(&mesh, 2, &cache).unwrap();
        assert_eq!(cache.len(), 2 * n);
    }

    #[test]
    fn weak_gradient_of_linear_function() {
        let mesh = MeshFamily::Mixed.generate(2);
        let store = ElementStore::build(&mesh, 1).unwrap();
        let grad = Point::new(0.3, -1.7, 0.0);
        let v = project_qh(&mesh, 1, |x| 2.0 + grad.dot(x), false).unwrap();
        for c in 0..mesh.num_cells() {
            let wg = store.weak_gradient(&mesh, c, &v).unwrap();
            let el = store.element(c);
            for s in 0..el.lambda.decomposition.sub_simplices.len() {
                let x = el.lambda.decomposition.simplex_points(s)[0];
                assert!((wg.eval(&el.lambda, s, &x) - grad).amax() < 1e-11);
            }
        }
        let energy = store.energy_squared(&mesh, &v);
        assert!((energy - grad.norm_squared()).abs() < 1e-11);
    }
}
