//! Quadrature on simplices, polytopal cells and faces.
//!
//! Simplex rules are tensor products of Gauss-Jacobi rules pulled back
//! through the collapsed (Duffy) map, so every degree in the supported range
//! comes from the same construction.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::mesh::{decompose_cell, facet_measure, PolytopalMesh};
use crate::{Point, Result, WgError};

pub const MAX_DEGREE: usize = 14;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn extend(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// Gauss-Jacobi nodes and weights on `[0, 1]` for the weight `(1 - s)^a`,
/// via Golub-Welsch on the Jacobi matrix of `(1-t)^a` on `[-1, 1]`.
pub fn gauss_jacobi_01(n: usize, a: u32) -> (Vec<f64>, Vec<f64>) {
    let alpha = a as f64;
    let beta = 0.0;
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let s = 2.0 * k + alpha + beta;
        jm[(i, i)] = if i == 0 {
            (beta - alpha) / (alpha + beta + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        if i + 1 < n {
            let k = k + 1.0;
            let s = 2.0 * k + alpha + beta;
            let b2 = 4.0 * k * (k + alpha) * (k + beta) * (k + alpha + beta)
                / (s * s * (s + 1.0) * (s - 1.0));
            jm[(i, i + 1)] = b2.sqrt();
            jm[(i + 1, i)] = b2.sqrt();
        }
    }
    // mu0 = 2^(a+1) / (a+1) for beta = 0
    let mu0 = 2f64.powi(a as i32 + 1) / (alpha + 1.0);
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let scale = 2f64.powi(a as i32 + 1);
    pairs
        .into_iter()
        .map(|(t, w)| ((1.0 + t) * 0.5, w / scale))
        .unzip()
}

/// Rule on the reference simplex (vertices `0, e_1, .., e_dim`), or on
/// `[0, 1]` when `dim == 1`, exact for total degree `degree`.
pub fn simplex_rule(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(WgError::UnsupportedDegree {
            degree,
            max: MAX_DEGREE,
        });
    }
    let n = degree / 2 + 1;
    let (u, wu) = gauss_jacobi_01(n, 0);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            for i in 0..n {
                points.push(Point::new(u[i], 0.0, 0.0));
                weights.push(wu[i]);
            }
        }
        2 => {
            let (v, wv) = gauss_jacobi_01(n, 1);
            for j in 0..n {
                for i in 0..n {
                    points.push(Point::new(u[i] * (1.0 - v[j]), v[j], 0.0));
                    weights.push(wu[i] * wv[j]);
                }
            }
        }
        3 => {
            let (v, wv) = gauss_jacobi_01(n, 1);
            let (w, ww) = gauss_jacobi_01(n, 2);
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let z = w[k];
                        let y = v[j] * (1.0 - z);
                        let x = u[i] * (1.0 - v[j]) * (1.0 - z);
                        points.push(Point::new(x, y, z));
                        weights.push(wu[i] * wv[j] * ww[k]);
                    }
                }
            }
        }
        _ => {
            return Err(WgError::InvalidMesh(format!(
                "no simplex rule in dimension {dim}"
            )));
        }
    }
    Ok(QuadratureRule { points, weights })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Maps a reference rule of intrinsic dimension `vertices.len() - 1` onto
/// the simplex spanned by `vertices` (possibly embedded in a higher
/// dimensional space) with the given unsigned measure.
pub fn map_rule(reference: &QuadratureRule, vertices: &[Point], measure: f64) -> QuadratureRule {
    let m = vertices.len() - 1;
    let scale = measure * factorial(m);
    let points = reference
        .points
        .iter()
        .map(|r| {
            let mut p = vertices[0];
            for i in 0..m {
                p += (vertices[i + 1] - vertices[0]) * r[i];
            }
            p
        })
        .collect();
    let weights = reference.weights.iter().map(|w| w * scale).collect();
    QuadratureRule { points, weights }
}

/// Composite rule over the centroid fan of a cell, in physical coordinates.
pub fn cell_rule(mesh: &PolytopalMesh, cell_id: usize, degree: usize) -> Result<QuadratureRule> {
    let dec = decompose_cell(mesh, cell_id)?;
    let reference = simplex_rule(mesh.dim, degree)?;
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
    };
    for s in 0..dec.sub_simplices.len() {
        rule.extend(map_rule(
            &reference,
            &dec.simplex_points(s),
            dec.simplex_measure(s),
        ));
    }
    Ok(rule)
}

/// Rule over a mesh face: Gauss on the segment in 2D, composite over the
/// centroid fan of the polygon in 3D.
pub fn face_rule(mesh: &PolytopalMesh, face_id: usize, degree: usize) -> Result<QuadratureRule> {
    let face = &mesh.faces[face_id];
    let pts: Vec<Point> = face.vertices.iter().map(|&v| mesh.vertices[v]).collect();
    polygon_rule(mesh.dim, &pts, face.centroid, degree)
}

/// Rule over a face given by its vertex loop; `centroid` is the fan apex for
/// polygons with more than three vertices.
pub fn polygon_rule(
    dim: usize,
    pts: &[Point],
    centroid: Point,
    degree: usize,
) -> Result<QuadratureRule> {
    let reference = simplex_rule(dim - 1, degree)?;
    if dim == 2 || pts.len() == 3 {
        return Ok(map_rule(&reference, pts, facet_measure(dim, pts)));
    }
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
    };
    for i in 0..pts.len() {
        let tri = [centroid, pts[i], pts[(i + 1) % pts.len()]];
        rule.extend(map_rule(&reference, &tri, facet_measure(3, &tri)));
    }
    Ok(rule)
}

/// Rule over one sub-face of a decomposition.
pub fn facet_rule(dim: usize, pts: &[Point], degree: usize) -> Result<QuadratureRule> {
    let reference = simplex_rule(dim - 1, degree)?;
    Ok(map_rule(&reference, pts, facet_measure(dim, pts)))
}
