//! Plain-text mesh format.
//!
//! ```text
//! wgmesh <dim> <n_vertices> <n_cells> <n_faces>
//! v <x> <y> <z>                  (n_vertices lines)
//! c <n> <face ids...>            (n_cells lines)
//! f <n> <vertex ids...> <0|1>    (n_faces lines, last field = boundary flag)
//! ```
//!
//! Coordinates are written with the shortest round-trip representation, so
//! `read_mesh(write_mesh(m))` reproduces the geometry bit for bit.

use std::io::{BufRead, Write};

use super::PolytopalMesh;
use crate::{Point, Result, WgError};

pub fn write_mesh<W: Write>(mesh: &PolytopalMesh, mut out: W) -> Result<()> {
    writeln!(
        out,
        "wgmesh {} {} {} {}",
        mesh.dim,
        mesh.vertices.len(),
        mesh.cells.len(),
        mesh.faces.len()
    )?;
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for c in &mesh.cells {
        write!(out, "c {}", c.faces.len())?;
        for f in &c.faces {
            write!(out, " {f}")?;
        }
        writeln!(out)?;
    }
    for f in &mesh.faces {
        write!(out, "f {}", f.vertices.len())?;
        for v in &f.vertices {
            write!(out, " {v}")?;
        }
        writeln!(out, " {}", u8::from(f.is_boundary()))?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<PolytopalMesh> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            l.as_ref()
                .map(|s| !s.trim().is_empty() && !s.starts_with('#'))
                .unwrap_or(true)
        });

    let mut next_line = |what: &str| -> Result<(usize, Vec<String>)> {
        match lines.next() {
            Some((no, Ok(l))) => Ok((no, l.split_whitespace().map(str::to_owned).collect())),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(WgError::MeshParse {
                line: 0,
                reason: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    fn num<T: std::str::FromStr>(line: usize, tok: Option<&String>, what: &str) -> Result<T> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| WgError::MeshParse {
                line,
                reason: format!("expected {what}"),
            })
    }

    let (no, head) = next_line("header")?;
    if head.first().map(String::as_str) != Some("wgmesh") || head.len() != 5 {
        return Err(WgError::MeshParse {
            line: no,
            reason: "header must be `wgmesh <dim> <nv> <nc> <nf>`".into(),
        });
    }
    let dim: usize = num(no, head.get(1), "dimension")?;
    let nv: usize = num(no, head.get(2), "vertex count")?;
    let nc: usize = num(no, head.get(3), "cell count")?;
    let nf: usize = num(no, head.get(4), "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, t) = next_line("vertex")?;
        if t.first().map(String::as_str) != Some("v") || t.len() != 4 {
            return Err(WgError::MeshParse {
                line: no,
                reason: "expected `v x y z`".into(),
            });
        }
        vertices.push(Point::new(
            num(no, t.get(1), "x")?,
            num(no, t.get(2), "y")?,
            num(no, t.get(3), "z")?,
        ));
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (no, t) = next_line("cell")?;
        let n: usize = num(no, t.get(1), "face count")?;
        if t.first().map(String::as_str) != Some("c") || t.len() != n + 2 {
            return Err(WgError::MeshParse {
                line: no,
                reason: "expected `c n f1 .. fn`".into(),
            });
        }
        cells.push(
            (0..n)
                .map(|i| num(no, t.get(i + 2), "face id"))
                .collect::<Result<Vec<usize>>>()?,
        );
    }
    let mut faces = Vec::with_capacity(nf);
    let mut flags = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (no, t) = next_line("face")?;
        let n: usize = num(no, t.get(1), "vertex count")?;
        if t.first().map(String::as_str) != Some("f") || t.len() != n + 3 {
            return Err(WgError::MeshParse {
                line: no,
                reason: "expected `f n v1 .. vn b`".into(),
            });
        }
        faces.push(
            (0..n)
                .map(|i| num(no, t.get(i + 2), "vertex id"))
                .collect::<Result<Vec<usize>>>()?,
        );
        flags.push((no, num::<u8>(no, t.get(n + 2), "boundary flag")? == 1));
    }
    let mesh = PolytopalMesh::from_parts(dim, vertices, faces, cells)?;
    for (f, (no, flag)) in flags.into_iter().enumerate() {
        if mesh.faces[f].is_boundary() != flag {
            return Err(WgError::MeshParse {
                line: no,
                reason: format!("boundary flag of face {f} disagrees with connectivity"),
            });
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mixed_polygon_mesh, generate_wedge_mesh};

    fn round_trip(mesh: &PolytopalMesh) -> PolytopalMesh {
        let mut buf = Vec::new();
        write_mesh(mesh, &mut buf).unwrap();
        read_mesh(buf.as_slice()).unwrap()
    }

    #[test]
    fn round_trip_preserves_geometry() {
        for mesh in [generate_mixed_polygon_mesh(2), generate_wedge_mesh(1)] {
            let back = round_trip(&mesh);
            assert_eq!(back.vertices, mesh.vertices);
            assert_eq!(back.num_faces(), mesh.num_faces());
            assert_eq!(back.boundary_face_ids, mesh.boundary_face_ids);
            for (a, b) in back.cells.iter().zip(&mesh.cells) {
                assert_eq!(a.faces, b.faces);
                assert_eq!(a.measure, b.measure);
            }
        }
    }

    #[test]
    fn bad_header_is_reported() {
        let err = read_mesh("mesh 2 0 0 0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, WgError::MeshParse { line: 1, .. }));
    }

    #[test]
    fn wrong_boundary_flag_is_reported() {
        let mut buf = Vec::new();
        write_mesh(&generate_mixed_polygon_mesh(1), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let last = text.lines().last().unwrap().to_owned();
        let flipped = if last.ends_with(" 1") {
            format!("{}0", &last[..last.len() - 1])
        } else {
            format!("{}1", &last[..last.len() - 1])
        };
        let text = text.replace(&last, &flipped);
        assert!(matches!(
            read_mesh(text.as_bytes()),
            Err(WgError::MeshParse { .. })
        ));
    }
}
