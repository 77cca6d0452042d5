use std::collections::BTreeMap;

use super::PolytopalMesh;
use crate::{Point, Result, WgError};

/// Boundary piece `e_j` of a parent face, owned by one sub-simplex.
#[derive(Debug, Clone)]
pub struct SubFace {
    pub simplex: usize,
    /// `dim` point indices into [`SimplicialDecomposition::points`].
    pub vertices: Vec<usize>,
}

/// A facet shared by two sub-simplices inside the cell.
#[derive(Debug, Clone)]
pub struct InteriorSubFace {
    pub simplices: [usize; 2],
    pub vertices: Vec<usize>,
}

/// Centroid fan of a cell into triangles (2D) or tetrahedra (3D).
#[derive(Debug, Clone)]
pub struct SimplicialDecomposition {
    pub parent_cell: usize,
    pub dim: usize,
    /// Cell vertices in local order, then the cell centroid, then any face
    /// centroids added to fan non-triangular 3D faces.
    pub points: Vec<Point>,
    /// Positively oriented simplices, `dim + 1` point indices each.
    pub sub_simplices: Vec<Vec<usize>>,
    /// For each local face of the cell, the sub-faces covering it.
    pub sub_faces: Vec<Vec<SubFace>>,
    pub interior_sub_faces: Vec<InteriorSubFace>,
}

impl SimplicialDecomposition {
    pub fn simplex_points(&self, s: usize) -> Vec<Point> {
        self.sub_simplices[s]
            .iter()
            .map(|&i| self.points[i])
            .collect()
    }

    pub fn facet_points(&self, ids: &[usize]) -> Vec<Point> {
        ids.iter().map(|&i| self.points[i]).collect()
    }

    pub fn simplex_measure(&self, s: usize) -> f64 {
        simplex_measure(self.dim, &self.simplex_points(s))
    }
}

/// Signed measure of a `dim`-simplex given by `dim + 1` points.
pub fn simplex_measure(dim: usize, p: &[Point]) -> f64 {
    if dim == 2 {
        let a = p[1] - p[0];
        let b = p[2] - p[0];
        0.5 * (a.x * b.y - a.y * b.x)
    } else {
        (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])) / 6.0
    }
}

/// Unsigned measure of a facet (`dim` points embedded in `dim`-space).
pub fn facet_measure(dim: usize, p: &[Point]) -> f64 {
    if dim == 2 {
        (p[1] - p[0]).norm()
    } else {
        0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm()
    }
}

/// Subdivides the cell `cell_id` of `mesh` in physical coordinates.
pub fn decompose_cell(mesh: &PolytopalMesh, cell_id: usize) -> Result<SimplicialDecomposition> {
    let cell = mesh
        .cells
        .get(cell_id)
        .ok_or_else(|| WgError::InvalidMesh(format!("no cell {cell_id}")))?;
    let points: Vec<Point> = cell.vertices.iter().map(|&v| mesh.vertices[v]).collect();
    let local_of = |g: usize| cell.vertices.iter().position(|&v| v == g).unwrap();
    let face_loops: Vec<Vec<usize>> = cell
        .faces
        .iter()
        .map(|&f| {
            mesh.faces[f]
                .vertices
                .iter()
                .map(|&g| local_of(g))
                .collect()
        })
        .collect();
    decompose_points(mesh.dim, cell_id, &points, &face_loops, cell.centroid)
}

/// Fans a cell given by local vertex coordinates and face vertex loops (local
/// indices) from `center`. Non-triangular 3D faces are first fanned from their
/// own area centroid.
pub fn decompose_points(
    dim: usize,
    cell_id: usize,
    cell_points: &[Point],
    face_loops: &[Vec<usize>],
    center: Point,
) -> Result<SimplicialDecomposition> {
    let mut points = cell_points.to_vec();
    let c = points.len();
    points.push(center);

    let loops = oriented_loops(dim, cell_id, c, face_loops)?;
    let mut sub_simplices = Vec::new();
    let mut sub_faces = Vec::with_capacity(loops.len());
    for lp in &loops {
        let tris: Vec<Vec<usize>> = if dim == 2 || lp.len() == 3 {
            vec![lp.clone()]
        } else {
            let (fc, _, _) = super::polygon3d_geometry(&points, lp);
            let fci = points.len();
            points.push(fc);
            (0..lp.len())
                .map(|i| vec![fci, lp[i], lp[(i + 1) % lp.len()]])
                .collect()
        };
        let mut pieces = Vec::with_capacity(tris.len());
        for tri in tris {
            let mut simplex = Vec::with_capacity(dim + 1);
            simplex.push(c);
            simplex.extend_from_slice(&tri);
            pieces.push(SubFace {
                simplex: sub_simplices.len(),
                vertices: tri,
            });
            sub_simplices.push(simplex);
        }
        sub_faces.push(pieces);
    }

    // with consistently oriented faces the signed fan measures sum to the
    // cell measure; the center sees every face from inside iff all of them
    // are positive once the total is
    let signed: Vec<f64> = sub_simplices
        .iter()
        .map(|s| simplex_measure(dim, &s.iter().map(|&i| points[i]).collect::<Vec<_>>()))
        .collect();
    let flip = signed.iter().sum::<f64>() < 0.0;
    let mut scale: f64 = 0.0;
    for p in cell_points {
        scale = scale.max((p - center).norm());
    }
    let tol = 1e-12 * scale.powi(dim as i32);
    for (s, simplex) in sub_simplices.iter_mut().enumerate() {
        let m = if flip { -signed[s] } else { signed[s] };
        if m.is_nan() || m <= tol {
            return Err(WgError::DegenerateCell {
                cell: cell_id,
                reason: format!("sub-simplex {s} has signed measure {m:e}; cell is not star-shaped about its centroid"),
            });
        }
        if flip {
            simplex.swap(1, 2);
        }
    }

    // facets through the center are shared by exactly two simplices
    let mut shared: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (s, simplex) in sub_simplices.iter().enumerate() {
        for skip in 1..=dim {
            let mut facet: Vec<usize> = simplex
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &v)| v)
                .collect();
            facet.sort_unstable();
            shared.entry(facet).or_default().push(s);
        }
    }
    let mut interior_sub_faces = Vec::with_capacity(shared.len());
    for (facet, owners) in shared {
        if owners.len() != 2 {
            return Err(WgError::DegenerateCell {
                cell: cell_id,
                reason: format!("internal facet {facet:?} has {} neighbours", owners.len()),
            });
        }
        interior_sub_faces.push(InteriorSubFace {
            simplices: [owners[0], owners[1]],
            vertices: facet,
        });
    }

    Ok(SimplicialDecomposition {
        parent_cell: cell_id,
        dim,
        points,
        sub_simplices,
        sub_faces,
        interior_sub_faces,
    })
}

/// Face loops (local indices) oriented consistently around the cell. In 2D
/// the cell points are a closed loop, so each edge follows it; in 3D the
/// orientation is propagated across shared edges.
fn oriented_loops(
    dim: usize,
    cell_id: usize,
    n_points: usize,
    face_loops: &[Vec<usize>],
) -> Result<Vec<Vec<usize>>> {
    let bad = |reason: String| WgError::DegenerateCell {
        cell: cell_id,
        reason,
    };
    if dim == 2 {
        return face_loops
            .iter()
            .map(|lp| {
                let (a, b) = (lp[0], lp[1]);
                if (a + 1) % n_points == b {
                    Ok(vec![a, b])
                } else if (b + 1) % n_points == a {
                    Ok(vec![b, a])
                } else {
                    Err(bad(format!("edge {lp:?} does not follow the vertex loop")))
                }
            })
            .collect();
    }
    let mut out: Vec<Option<Vec<usize>>> = vec![None; face_loops.len()];
    let edges = |lp: &Vec<usize>| -> Vec<(usize, usize)> {
        (0..lp.len())
            .map(|i| (lp[i], lp[(i + 1) % lp.len()]))
            .collect()
    };
    let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (f, lp) in face_loops.iter().enumerate() {
        for (a, b) in edges(lp) {
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    out[0] = Some(face_loops[0].clone());
    let mut stack = vec![0];
    while let Some(f) = stack.pop() {
        let lp = out[f].clone().expect("oriented");
        for (a, b) in edges(&lp) {
            for &g in &edge_faces[&(a.min(b), a.max(b))] {
                if g == f {
                    continue;
                }
                let mut cand = face_loops[g].clone();
                // a neighbour must traverse the shared edge as (b, a)
                if !edges(&cand).contains(&(b, a)) {
                    cand.reverse();
                }
                match &out[g] {
                    Some(existing) if *existing != cand => {
                        return Err(bad("faces cannot be oriented consistently".into()));
                    }
                    Some(_) => {}
                    None => {
                        out[g] = Some(cand);
                        stack.push(g);
                    }
                }
            }
        }
    }
    out.into_iter()
        .map(|o| o.ok_or_else(|| bad("face graph is disconnected".into())))
        .collect()
}
