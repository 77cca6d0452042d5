//! Polytopal meshes of the unit square and unit cube.
//!
//! A mesh is stored face-based: every face (an edge in 2D, a planar polygon in
//! 3D) appears once with a fixed unit normal pointing out of its first cell,
//! and every cell lists its faces with an orientation sign (`+1` when the
//! stored normal is outward for that cell).

mod decompose;
mod generate;
mod io;

pub use decompose::{
    decompose_cell, decompose_points, facet_measure, simplex_measure, InteriorSubFace,
    SimplicialDecomposition, SubFace,
};
pub use generate::{
    generate_mixed_polygon_mesh, generate_quad_mesh, generate_wedge_mesh, MeshFamily,
};
pub use io::{read_mesh, write_mesh};

use std::collections::HashMap;

use crate::{Point, Result, WgError};

#[derive(Debug, Clone)]
pub struct Face {
    /// 2D: the two end points; 3D: the vertex loop of the polygon.
    pub vertices: Vec<usize>,
    /// Owning cell and, for interior faces, the neighbour.
    pub cells: (usize, Option<usize>),
    /// Unit normal, outward with respect to `cells.0`.
    pub normal: Point,
    pub centroid: Point,
    pub measure: f64,
    pub diameter: f64,
    /// Orthonormal tangent frame (`dim - 1` vectors) used by face polynomials.
    pub tangents: Vec<Point>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    /// 2D: counter-clockwise vertex loop. 3D: sorted distinct vertex ids.
    pub vertices: Vec<usize>,
    pub faces: Vec<usize>,
    /// `+1.0` when the face normal points out of this cell, `-1.0` otherwise.
    pub orientation: Vec<f64>,
    pub centroid: Point,
    pub measure: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone)]
pub struct PolytopalMesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    pub boundary_face_ids: Vec<usize>,
}

impl PolytopalMesh {
    /// Builds a mesh from raw connectivity: `faces[f]` lists vertex ids (2
    /// for an edge, a loop for a 3D polygon) and `cells[c]` lists face ids.
    /// All geometric quantities, adjacency and orientations are derived here.
    pub fn from_parts(
        dim: usize,
        vertices: Vec<Point>,
        faces: Vec<Vec<usize>>,
        cells: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(WgError::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        let nv = vertices.len();
        for (f, fv) in faces.iter().enumerate() {
            let ok = if dim == 2 {
                fv.len() == 2
            } else {
                fv.len() >= 3
            };
            if !ok || fv.iter().any(|&v| v >= nv) {
                return Err(WgError::InvalidMesh(format!(
                    "face {f} has bad vertex list {fv:?}"
                )));
            }
        }

        let mut owners: Vec<Vec<usize>> = vec![Vec::new(); faces.len()];
        for (c, cf) in cells.iter().enumerate() {
            if cf.len() < dim + 1 {
                return Err(WgError::InvalidMesh(format!(
                    "cell {c} has only {} faces",
                    cf.len()
                )));
            }
            for &f in cf {
                if f >= faces.len() {
                    return Err(WgError::InvalidMesh(format!(
                        "cell {c} references face {f}"
                    )));
                }
                owners[f].push(c);
            }
        }
        for (f, o) in owners.iter().enumerate() {
            if o.is_empty() || o.len() > 2 {
                return Err(WgError::InvalidMesh(format!(
                    "face {f} is shared by {} cells",
                    o.len()
                )));
            }
        }

        let mut mesh_faces: Vec<Face> = faces
            .iter()
            .enumerate()
            .map(|(f, fv)| {
                let (centroid, measure, mut normal) = face_geometry(dim, &vertices, fv);
                if measure <= 0.0 {
                    return Err(WgError::InvalidMesh(format!("face {f} has zero measure")));
                }
                normal /= normal.norm();
                Ok(Face {
                    vertices: fv.clone(),
                    cells: (owners[f][0], owners[f].get(1).copied()),
                    normal,
                    centroid,
                    measure,
                    diameter: diameter_of(&vertices, fv),
                    tangents: Vec::new(),
                })
            })
            .collect::<Result<_>>()?;

        let mut mesh_cells = Vec::with_capacity(cells.len());
        for (c, cf) in cells.iter().enumerate() {
            let cell_vertices = if dim == 2 {
                let mut lp = polygon_loop(c, cf, &faces)?;
                orient_ccw(&vertices, &mut lp);
                lp
            } else {
                let mut vs: Vec<usize> =
                    cf.iter().flat_map(|&f| faces[f].iter().copied()).collect();
                vs.sort_unstable();
                vs.dedup();
                vs
            };
            let (centroid, measure) = if dim == 2 {
                polygon_area_centroid(&vertices, &cell_vertices)
            } else {
                polyhedron_volume_centroid(&vertices, &cell_vertices, cf, &mesh_faces)
            };
            if measure.is_nan() || measure <= 0.0 {
                return Err(WgError::DegenerateCell {
                    cell: c,
                    reason: format!("non-positive measure {measure:e}"),
                });
            }
            let diameter = diameter_of(&vertices, &cell_vertices);
            let orientation = cf
                .iter()
                .map(|&f| {
                    let face = &mesh_faces[f];
                    if (face.centroid - centroid).dot(&face.normal) > 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            mesh_cells.push(Cell {
                vertices: cell_vertices,
                faces: cf.clone(),
                orientation,
                centroid,
                measure,
                diameter,
            });
        }

        // Fix the stored normal to point out of the first owner.
        for face in mesh_faces.iter_mut() {
            if (face.centroid - mesh_cells[face.cells.0].centroid).dot(&face.normal) < 0.0 {
                face.normal = -face.normal;
            }
        }
        for cell in mesh_cells.iter_mut() {
            for (slot, &f) in cell.faces.iter().enumerate() {
                let face = &mesh_faces[f];
                cell.orientation[slot] = if (face.centroid - cell.centroid).dot(&face.normal) > 0.0
                {
                    1.0
                } else {
                    -1.0
                };
            }
        }
        for (f, cellpair) in owners.iter().enumerate() {
            if cellpair.len() == 2 {
                let a = &mesh_cells[cellpair[0]];
                let b = &mesh_cells[cellpair[1]];
                let sa = a.orientation[a.faces.iter().position(|&x| x == f).unwrap()];
                let sb = b.orientation[b.faces.iter().position(|&x| x == f).unwrap()];
                if sa * sb > 0.0 {
                    return Err(WgError::InvalidMesh(format!(
                        "face {f} is not separating its two cells"
                    )));
                }
            }
        }
        for face in mesh_faces.iter_mut() {
            face.tangents = face_tangents(dim, &vertices, face);
        }

        let boundary_face_ids = mesh_faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
            .map(|(i, _)| i)
            .collect();

        Ok(Self {
            dim,
            vertices,
            cells: mesh_cells,
            faces: mesh_faces,
            boundary_face_ids,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.len() - self.boundary_face_ids.len()
    }

    /// Largest cell diameter.
    pub fn mesh_size(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    pub fn total_measure(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }

    /// Outward unit normal of local face `slot` of `cell`.
    pub fn outward_normal(&self, cell: usize, slot: usize) -> Point {
        let c = &self.cells[cell];
        self.faces[c.faces[slot]].normal * c.orientation[slot]
    }
}

fn diameter_of(vertices: &[Point], ids: &[usize]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            d = d.max((vertices[a] - vertices[b]).norm());
        }
    }
    d
}

/// Centroid, measure and (unnormalised) normal of a face.
pub(crate) fn face_geometry(dim: usize, vertices: &[Point], fv: &[usize]) -> (Point, f64, Point) {
    if dim == 2 {
        let a = vertices[fv[0]];
        let b = vertices[fv[1]];
        let t = b - a;
        ((a + b) * 0.5, t.norm(), Point::new(t.y, -t.x, 0.0))
    } else {
        polygon3d_geometry(vertices, fv)
    }
}

/// Area centroid, area and Newell normal of a planar polygon in 3D.
pub(crate) fn polygon3d_geometry(vertices: &[Point], fv: &[usize]) -> (Point, f64, Point) {
    let n = fv.len();
    let mut newell = Point::zeros();
    for i in 0..n {
        let p = vertices[fv[i]];
        let q = vertices[fv[(i + 1) % n]];
        newell += p.cross(&q);
    }
    let unit = newell / newell.norm();
    let mean = fv.iter().map(|&v| vertices[v]).sum::<Point>() / n as f64;
    let mut area = 0.0;
    let mut centroid = Point::zeros();
    for i in 0..n {
        let p = vertices[fv[i]];
        let q = vertices[fv[(i + 1) % n]];
        let a = 0.5 * (p - mean).cross(&(q - mean)).dot(&unit);
        area += a;
        centroid += (mean + p + q) / 3.0 * a;
    }
    (centroid / area, area, unit)
}

fn polygon_loop(cell: usize, cf: &[usize], faces: &[Vec<usize>]) -> Result<Vec<usize>> {
    let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
    for &f in cf {
        let (a, b) = (faces[f][0], faces[f][1]);
        next.entry(a).or_default().push(b);
        next.entry(b).or_default().push(a);
    }
    if next.values().any(|n| n.len() != 2) {
        return Err(WgError::InvalidMesh(format!(
            "cell {cell} edges do not form a loop"
        )));
    }
    let start = faces[cf[0]][0];
    let mut lp = vec![start];
    let mut prev = start;
    let mut cur = faces[cf[0]][1];
    while cur != start {
        lp.push(cur);
        let n = &next[&cur];
        let nxt = if n[0] == prev { n[1] } else { n[0] };
        prev = cur;
        cur = nxt;
        if lp.len() > cf.len() {
            return Err(WgError::InvalidMesh(format!(
                "cell {cell} edges do not form a single loop"
            )));
        }
    }
    if lp.len() != cf.len() {
        return Err(WgError::InvalidMesh(format!(
            "cell {cell} edges do not form a single loop"
        )));
    }
    Ok(lp)
}

/// Makes a 2D vertex loop counter-clockwise; returns the signed area before the fix.
pub(crate) fn orient_ccw(vertices: &[Point], lp: &mut [usize]) -> f64 {
    let a = signed_area(vertices, lp);
    if a < 0.0 {
        lp.reverse();
    }
    a
}

fn signed_area(vertices: &[Point], lp: &[usize]) -> f64 {
    let n = lp.len();
    (0..n)
        .map(|i| {
            let p = vertices[lp[i]];
            let q = vertices[lp[(i + 1) % n]];
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        * 0.5
}

fn polygon_area_centroid(vertices: &[Point], lp: &[usize]) -> (Point, f64) {
    let n = lp.len();
    let mut area = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = vertices[lp[i]];
        let q = vertices[lp[(i + 1) % n]];
        let cr = p.x * q.y - q.x * p.y;
        area += cr;
        cx += (p.x + q.x) * cr;
        cy += (p.y + q.y) * cr;
    }
    area *= 0.5;
    (Point::new(cx / (6.0 * area), cy / (6.0 * area), 0.0), area)
}

fn polyhedron_volume_centroid(
    vertices: &[Point],
    cell_vertices: &[usize],
    cf: &[usize],
    faces: &[Face],
) -> (Point, f64) {
    let apex =
        cell_vertices.iter().map(|&v| vertices[v]).sum::<Point>() / cell_vertices.len() as f64;
    let mut vol = 0.0;
    let mut centroid = Point::zeros();
    for &f in cf {
        let face = &faces[f];
        // height measured along the outward side of the face relative to the apex
        let h = (face.centroid - apex).dot(&face.normal).abs();
        let v = face.measure * h / 3.0;
        vol += v;
        centroid += (apex + (face.centroid - apex) * 0.75) * v;
    }
    (centroid / vol, vol)
}

fn face_tangents(dim: usize, vertices: &[Point], face: &Face) -> Vec<Point> {
    let mut ids = face.vertices.clone();
    ids.sort_unstable();
    let a = vertices[ids[0]];
    let b = vertices[ids[1]];
    let mut t = b - a;
    if dim == 2 {
        t /= t.norm();
        vec![t]
    } else {
        t -= face.normal * t.dot(&face.normal);
        t /= t.norm();
        let t2 = face.normal.cross(&t);
        vec![t, t2]
    }
}

/// Deduplicates faces by vertex set while generating meshes.
#[derive(Default)]
pub(crate) struct FaceRegistry {
    pub faces: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl FaceRegistry {
    pub fn get_or_insert(&mut self, vertices: Vec<usize>) -> usize {
        let mut key = vertices.clone();
        key.sort_unstable();
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.faces.len();
        self.faces.push(vertices);
        self.index.insert(key, id);
        id
    }
}
