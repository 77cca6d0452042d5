use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{FaceRegistry, PolytopalMesh};
use crate::{Point, WgError};

/// The three mesh families used by the convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshFamily {
    Quad,
    Mixed,
    Wedge,
}

impl MeshFamily {
    pub fn dim(self) -> usize {
        match self {
            MeshFamily::Quad | MeshFamily::Mixed => 2,
            MeshFamily::Wedge => 3,
        }
    }

    pub fn generate(self, level: u32) -> PolytopalMesh {
        match self {
            MeshFamily::Quad => generate_quad_mesh(level),
            MeshFamily::Mixed => generate_mixed_polygon_mesh(level),
            MeshFamily::Wedge => generate_wedge_mesh(level),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Quad => "quad",
            MeshFamily::Mixed => "mixed",
            MeshFamily::Wedge => "wedge",
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = WgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quad" => Ok(MeshFamily::Quad),
            "mixed" => Ok(MeshFamily::Mixed),
            "wedge" => Ok(MeshFamily::Wedge),
            other => Err(WgError::Config {
                field: "family".into(),
                reason: format!("unknown mesh family `{other}` (expected quad, mixed or wedge)"),
            }),
        }
    }
}

fn cells_per_side(level: u32) -> usize {
    assert!(level >= 1, "mesh level must be at least 1");
    1usize << level
}

fn build_2d(vertices: Vec<Point>, loops: Vec<Vec<usize>>) -> PolytopalMesh {
    let mut reg = FaceRegistry::default();
    let cells = loops
        .iter()
        .map(|lp| {
            (0..lp.len())
                .map(|i| reg.get_or_insert(vec![lp[i], lp[(i + 1) % lp.len()]]))
                .collect()
        })
        .collect();
    PolytopalMesh::from_parts(2, vertices, reg.faces, cells).expect("generated 2D mesh is valid")
}

/// `2^level × 2^level` quadrilaterals on the unit square. Interior vertex
/// `(ih, jh)` moves by `+0.1h` in both coordinates when `i + j` is even and
/// by `-0.1h` otherwise.
pub fn generate_quad_mesh(level: u32) -> PolytopalMesh {
    let n = cells_per_side(level);
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let mut p = Point::new(i as f64 * h, j as f64 * h, 0.0);
            if i > 0 && i < n && j > 0 && j < n {
                let s = if (i + j) % 2 == 0 { 0.1 * h } else { -0.1 * h };
                p.x += s;
                p.y += s;
            }
            vertices.push(p);
        }
    }
    let mut loops = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            loops.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build_2d(vertices, loops)
}

/// Truncated-vertex polygon mesh of the unit square.
///
/// Starting from the uniform `2^level` grid, a set of interior vertices is
/// truncated at the midpoints of their four edges. Each truncated vertex
/// becomes a diamond-shaped quadrilateral and every adjacent grid cell loses
/// that corner. Truncated vertices are the even-even ones and the odd-odd ones
/// with `i ≡ 1 (mod 4)`, so grid cells end up as quadrilaterals (no corner
/// cut, only along the boundary), pentagons (one corner) or hexagons (two
/// opposite corners). All cells are convex.
pub fn generate_mixed_polygon_mesh(level: u32) -> PolytopalMesh {
    let n = cells_per_side(level);
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let truncated = |i: usize, j: usize| {
        i > 0
            && i < n
            && j > 0
            && j < n
            && ((i.is_multiple_of(2) && j.is_multiple_of(2))
                || (i % 2 == 1 && j % 2 == 1 && i % 4 == 1))
    };
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(i as f64 * h, j as f64 * h, 0.0));
        }
    }
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| {
        let key = (a.min(b), a.max(b));
        *mids.entry(key).or_insert_with(|| {
            vertices.push((vertices[a] + vertices[b]) * 0.5);
            vertices.len() - 1
        })
    };

    let mut loops = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let mut lp = Vec::with_capacity(6);
            for c in 0..4 {
                let (ci, cj) = corners[c];
                if truncated(ci, cj) {
                    let (pi, pj) = corners[(c + 3) % 4];
                    let (ni, nj) = corners[(c + 1) % 4];
                    lp.push(midpoint(id(pi, pj), id(ci, cj), &mut vertices));
                    lp.push(midpoint(id(ci, cj), id(ni, nj), &mut vertices));
                } else {
                    lp.push(id(ci, cj));
                }
            }
            loops.push(lp);
        }
    }
    for j in 1..n {
        for i in 1..n {
            if truncated(i, j) {
                let v = id(i, j);
                loops.push(vec![
                    midpoint(v, id(i, j - 1), &mut vertices),
                    midpoint(v, id(i + 1, j), &mut vertices),
                    midpoint(v, id(i, j + 1), &mut vertices),
                    midpoint(v, id(i - 1, j), &mut vertices),
                ]);
            }
        }
    }
    // grid corners that were truncated are no longer referenced; keep ids
    // compact so the exported mesh has no orphan vertices
    let mut used = vec![false; vertices.len()];
    for lp in &loops {
        for &v in lp {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut compact = Vec::with_capacity(vertices.len());
    for (v, p) in vertices.into_iter().enumerate() {
        if used[v] {
            remap[v] = compact.len();
            compact.push(p);
        }
    }
    for lp in loops.iter_mut() {
        for v in lp.iter_mut() {
            *v = remap[*v];
        }
    }
    build_2d(compact, loops)
}

/// The unit cube cut into `n^3` subcubes (`n = 2^level`), each split into two
/// triangular prisms by the vertical plane through the anti-diagonal
/// `(x+h, y) - (x, y+h)` of its horizontal cross-section.
pub fn generate_wedge_mesh(level: u32) -> PolytopalMesh {
    let n = cells_per_side(level);
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(Point::new(i as f64 * h, j as f64 * h, k as f64 * h));
            }
        }
    }
    let mut reg = FaceRegistry::default();
    let mut cells = Vec::with_capacity(2 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let prisms = [
                    [(i, j), (i + 1, j), (i, j + 1)],
                    [(i + 1, j), (i + 1, j + 1), (i, j + 1)],
                ];
                for tri in prisms {
                    let mut faces = Vec::with_capacity(5);
                    faces.push(reg.get_or_insert(tri.iter().map(|&(a, b)| id(a, b, k)).collect()));
                    faces.push(
                        reg.get_or_insert(tri.iter().map(|&(a, b)| id(a, b, k + 1)).collect()),
                    );
                    for e in 0..3 {
                        let (ai, aj) = tri[e];
                        let (bi, bj) = tri[(e + 1) % 3];
                        faces.push(reg.get_or_insert(vec![
                            id(ai, aj, k),
                            id(bi, bj, k),
                            id(bi, bj, k + 1),
                            id(ai, aj, k + 1),
                        ]));
                    }
                    cells.push(faces);
                }
            }
        }
    }
    PolytopalMesh::from_parts(3, vertices, reg.faces, cells).expect("generated wedge mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_aspect_ratio(mesh: &PolytopalMesh, cell: usize) -> f64 {
        // diameter squared over area; 2 for a square
        let c = &mesh.cells[cell];
        c.diameter * c.diameter / c.measure
    }

    #[test]
    fn quad_counts() {
        let m = generate_quad_mesh(1);
        assert_eq!((m.num_cells(), m.num_faces(), m.vertices.len()), (4, 12, 9));
        let m = generate_quad_mesh(2);
        assert_eq!((m.num_cells(), m.num_faces()), (16, 40));
    }

    #[test]
    fn quad_level3_cells_are_well_shaped() {
        let m = generate_quad_mesh(3);
        assert_eq!(m.num_cells(), 64);
        for c in 0..64 {
            assert!(m.cells[c].measure > 0.0);
            assert!(max_aspect_ratio(&m, c) < 5.0);
        }
    }

    #[test]
    fn mixed_level2_has_quads_pentagons_hexagons() {
        let m = generate_mixed_polygon_mesh(2);
        let mut seen = [false; 7];
        for c in &m.cells {
            seen[c.faces.len()] = true;
        }
        assert!(seen[4] && seen[5] && seen[6]);
    }

    #[test]
    fn mixed_measures_sum_to_one() {
        for level in 1..=4 {
            let m = generate_mixed_polygon_mesh(level);
            assert!((m.total_measure() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_level3_interior_edges_have_two_cells() {
        let m = generate_mixed_polygon_mesh(3);
        for f in &m.faces {
            let on_boundary = [f.centroid.x, f.centroid.y]
                .iter()
                .any(|&c| c.abs() < 1e-14 || (c - 1.0).abs() < 1e-14);
            assert_eq!(f.is_boundary(), on_boundary);
        }
    }

    #[test]
    fn wedge_counts_and_volumes() {
        let m = generate_wedge_mesh(1);
        assert_eq!(m.num_cells(), 16);
        let m = generate_wedge_mesh(2);
        let h: f64 = 0.25;
        for c in &m.cells {
            assert_eq!(c.faces.len(), 5);
            assert!((c.measure - h.powi(3) / 2.0).abs() < 1e-15);
        }
        assert!((m.total_measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Quad".parse::<MeshFamily>().unwrap(), MeshFamily::Quad);
        assert!(matches!(
            "hex".parse::<MeshFamily>(),
            Err(WgError::Config { .. })
        ));
    }
}
