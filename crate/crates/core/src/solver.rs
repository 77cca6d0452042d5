//! Global assembly and solution of `(∇_w u_h, ∇_w v) = (f, v_0)` with
//! homogeneous Dirichlet data.
//!
//! Unknowns are ordered cell blocks first, then interior-face blocks;
//! boundary-face dofs are eliminated. The system is solved by Jacobi-PCG
//! with a sparse Cholesky fallback on a bandwidth-reduced ordering.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use rayon::prelude::*;

use crate::element::ElementStore;
use crate::mesh::PolytopalMesh;
use crate::poly::WgFunction;
use crate::{Point, Result, WgError};

/// Relative residual every accepted solution must meet.
pub const ACCEPT_RESIDUAL: f64 = 1e-11;
/// Default PCG stopping tolerance on the relative residual.
pub const DEFAULT_TOLERANCE: f64 = 1e-13;

/// Map from mesh blocks to global unknowns.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub cell_dofs: usize,
    pub face_dofs: usize,
    pub num_cells: usize,
    /// Block index of each face, `None` on the boundary.
    pub face_block: Vec<Option<usize>>,
    pub num_interior_faces: usize,
}

impl DofMap {
    pub fn new(mesh: &PolytopalMesh, cell_dofs: usize, face_dofs: usize) -> Self {
        let mut next = 0;
        let face_block = mesh
            .faces
            .iter()
            .map(|f| {
                if f.is_boundary() {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        Self {
            cell_dofs,
            face_dofs,
            num_cells: mesh.num_cells(),
            face_block,
            num_interior_faces: next,
        }
    }

    pub fn len(&self) -> usize {
        self.num_cells * self.cell_dofs + self.num_interior_faces * self.face_dofs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_offset(&self, cell: usize) -> usize {
        cell * self.cell_dofs
    }

    pub fn face_offset(&self, face: usize) -> Option<usize> {
        self.face_block[face].map(|b| self.num_cells * self.cell_dofs + b * self.face_dofs)
    }

    /// Global index of each local dof of `cell` (`None` for eliminated dofs).
    pub fn local_to_global(&self, mesh: &PolytopalMesh, cell: usize) -> Vec<Option<usize>> {
        let mut out: Vec<Option<usize>> = (0..self.cell_dofs)
            .map(|i| Some(self.cell_offset(cell) + i))
            .collect();
        for &f in &mesh.cells[cell].faces {
            match self.face_offset(f) {
                Some(o) => out.extend((0..self.face_dofs).map(|i| Some(o + i))),
                None => out.extend(std::iter::repeat_n(None, self.face_dofs)),
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub dofs: DofMap,
    pub stiffness: CsrMatrix<f64>,
    pub load: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Pcg,
    Direct,
}

#[derive(Debug, Clone)]
pub struct SolveDiagnostics {
    pub method: SolveMethod,
    pub pcg_iterations: usize,
    pub pcg_residual: f64,
    /// Relative residual of the accepted solution.
    pub residual: f64,
}

pub fn assemble(
    mesh: &PolytopalMesh,
    store: &ElementStore,
    f: impl Fn(&Point) -> f64 + Sync,
) -> GlobalSystem {
    let el0 = store.element(0);
    let dofs = DofMap::new(mesh, el0.interior_dofs(), el0.face_dofs());
    let locals: Vec<(DMatrix<f64>, DVector<f64>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| (store.local_stiffness(c), store.load(c, &f)))
        .collect();

    let n = dofs.len();
    let mut coo = CooMatrix::new(n, n);
    let mut load = DVector::zeros(n);
    for (c, (s, b)) in locals.iter().enumerate() {
        let map = dofs.local_to_global(mesh, c);
        for (i, gi) in map.iter().enumerate() {
            let Some(gi) = *gi else { continue };
            for (j, gj) in map.iter().enumerate() {
                if let Some(gj) = *gj {
                    coo.push(gi, gj, s[(i, j)]);
                }
            }
        }
        let off = dofs.cell_offset(c);
        for (i, v) in b.iter().enumerate() {
            load[off + i] += v;
        }
    }
    GlobalSystem {
        dofs,
        stiffness: CsrMatrix::from(&coo),
        load,
    }
}

fn spmv(a: &CsrMatrix<f64>, x: &DVector<f64>, y: &mut DVector<f64>) {
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    y.as_mut_slice()
        .par_iter_mut()
        .with_min_len(256)
        .enumerate()
        .for_each(|(r, yr)| {
            let mut acc = 0.0;
            for p in offsets[r]..offsets[r + 1] {
                acc += vals[p] * x[cols[p]];
            }
            *yr = acc;
        });
}

fn relative_residual(a: &CsrMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let mut r = DVector::zeros(b.len());
    spmv(a, x, &mut r);
    let bn = b.norm();
    if bn == 0.0 {
        (r - b).norm()
    } else {
        (r - b).norm() / bn
    }
}

/// Jacobi-preconditioned conjugate gradients. Returns the iterate and the
/// number of iterations taken.
pub fn pcg(
    a: &CsrMatrix<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> (DVector<f64>, usize) {
    let n = b.len();
    let mut diag = DVector::from_element(n, 1.0);
    for (r, d) in diag.iter_mut().enumerate() {
        let row = a.row(r);
        if let Some(p) = row.col_indices().iter().position(|&c| c == r) {
            let v = row.values()[p];
            if v > 0.0 {
                *d = 1.0 / v;
            }
        }
    }
    let mut x = DVector::zeros(n);
    let bn = b.norm();
    if bn == 0.0 {
        return (x, 0);
    }
    let mut r = b.clone();
    let mut z = r.component_mul(&diag);
    let mut p = z.clone();
    let mut ap = DVector::zeros(n);
    let mut rz = r.dot(&z);
    for it in 1..=max_iter {
        spmv(a, &p, &mut ap);
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if r.norm() <= tol * bn {
            return (x, it);
        }
        z = r.component_mul(&diag);
        let rz_new = r.dot(&z);
        p *= rz_new / rz;
        p += &z;
        rz = rz_new;
    }
    (x, max_iter)
}

/// Reverse Cuthill-McKee ordering of the sparsity graph of `a`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix<f64>) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|r| a.row(r).nnz()).collect();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&v| (degree[v], v));
    for &s in &starts {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a
                .row(v)
                .col_indices()
                .iter()
                .copied()
                .filter(|&u| !seen[u])
                .collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Sparse Cholesky on the RCM-permuted matrix.
pub fn direct_solve(a: &CsrMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let perm = reverse_cuthill_mckee(a);
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut coo = CooMatrix::new(a.nrows(), a.ncols());
    for (r, c, v) in a.triplet_iter() {
        coo.push(inv[r], inv[c], *v);
    }
    let csc = CscMatrix::from(&coo);
    let chol = CscCholesky::factor(&csc)
        .map_err(|e| WgError::SolveFailed(format!("sparse Cholesky: {e}")))?;
    let pb = DMatrix::from_fn(b.len(), 1, |i, _| b[perm[i]]);
    let y = chol.solve(&pb);
    let mut x = DVector::zeros(b.len());
    for (new, &old) in perm.iter().enumerate() {
        x[old] = y[(new, 0)];
    }
    Ok(x)
}

/// Solves the system, falling back to the direct solver when PCG misses
/// the acceptance residual.
pub fn solve(system: &GlobalSystem, tol: f64) -> Result<(DVector<f64>, SolveDiagnostics)> {
    let a = &system.stiffness;
    let b = &system.load;
    let max_iter = (10 * b.len()).max(1000);
    let (x, iters) = pcg(a, b, tol, max_iter);
    let res = relative_residual(a, &x, b);
    if res <= ACCEPT_RESIDUAL {
        let diag = SolveDiagnostics {
            method: SolveMethod::Pcg,
            pcg_iterations: iters,
            pcg_residual: res,
            residual: res,
        };
        return Ok((x, diag));
    }
    let xd = direct_solve(a, b)?;
    let res_d = relative_residual(a, &xd, b);
    if res_d.is_nan() || res_d > ACCEPT_RESIDUAL {
        return Err(WgError::SolveFailed(format!(
            "PCG residual {res:.3e} after {iters} iterations, direct residual {res_d:.3e}"
        )));
    }
    let diag = SolveDiagnostics {
        method: SolveMethod::Direct,
        pcg_iterations: iters,
        pcg_residual: res,
        residual: res_d,
    };
    Ok((xd, diag))
}

/// Scatters a global solution vector into a weak function (boundary faces zero).
pub fn to_wg_function(
    mesh: &PolytopalMesh,
    k: usize,
    dofs: &DofMap,
    x: &DVector<f64>,
) -> WgFunction {
    let mut w = WgFunction::zeros(mesh, k);
    for c in 0..mesh.num_cells() {
        let o = dofs.cell_offset(c);
        w.cell_mut(c)
            .copy_from_slice(&x.as_slice()[o..o + dofs.cell_dofs]);
    }
    for f in 0..mesh.num_faces() {
        if let Some(o) = dofs.face_offset(f) {
            w.face_mut(f)
                .copy_from_slice(&x.as_slice()[o..o + dofs.face_dofs]);
        }
    }
    w
}

/// Gathers the unknowns of a weak function (boundary data dropped).
pub fn from_wg_function(mesh: &PolytopalMesh, dofs: &DofMap, w: &WgFunction) -> DVector<f64> {
    let mut x = DVector::zeros(dofs.len());
    for c in 0..mesh.num_cells() {
        let o = dofs.cell_offset(c);
        x.as_mut_slice()[o..o + dofs.cell_dofs].copy_from_slice(w.cell(c));
    }
    for f in 0..mesh.num_faces() {
        if let Some(o) = dofs.face_offset(f) {
            x.as_mut_slice()[o..o + dofs.face_dofs].copy_from_slice(w.face(f));
        }
    }
    x
}

/// Assembles and solves the WG problem with load `f`.
pub fn solve_poisson(
    mesh: &PolytopalMesh,
    store: &ElementStore,
    f: impl Fn(&Point) -> f64 + Sync,
    tol: f64,
) -> Result<(WgFunction, SolveDiagnostics)> {
    let system = assemble(mesh, store, f);
    let (x, diag) = solve(&system, tol)?;
    Ok((to_wg_function(mesh, store.k, &system.dofs, &x), diag))
}
