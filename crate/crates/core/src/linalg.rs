//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Relative singular values inside this band make the rank ambiguous.
pub const RANK_DEADBAND: (f64, f64) = (1e-12, 1e-8);

#[derive(Debug, Clone)]
pub struct Nullspace {
    /// Orthonormal columns spanning the nullspace.
    pub basis: DMatrix<f64>,
    pub rank: usize,
    /// Largest relative singular value inside the deadband, if any.
    pub deadband: Option<f64>,
}

/// Nullspace of `a`. The rank comes from the singular values. A matrix with
/// full row rank gets its nullspace from a Householder QR of `a^T`; otherwise
/// a full SVD is used (zero-padded to square so that all right singular
/// vectors are available).
pub fn nullspace(a: &DMatrix<f64>) -> Nullspace {
    let (m, n) = a.shape();
    let sv = a.clone().singular_values();
    let smax = sv.max();
    let mut deadband: Option<f64> = None;
    let mut rank = 0;
    for &s in sv.iter() {
        let rel = if smax > 0.0 { s / smax } else { 0.0 };
        if rel > RANK_DEADBAND.0 && rel < RANK_DEADBAND.1 {
            deadband = Some(deadband.map_or(rel, |d: f64| d.max(rel)));
        }
        if rel > RANK_TOL {
            rank += 1;
        }
    }
    let basis = if rank == m && m < n {
        let qr = a.transpose().qr();
        let mut qt = DMatrix::identity(n, n);
        qr.q_tr_mul(&mut qt);
        qt.rows(m, n - m).transpose()
    } else {
        svd_nullspace(a, n - rank)
    };
    Nullspace {
        basis,
        rank,
        deadband,
    }
}

/// The right singular vectors of the `nullity` smallest singular values.
fn svd_nullspace(a: &DMatrix<f64>, nullity: usize) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut basis = DMatrix::zeros(n, nullity);
    for (j, &i) in order.iter().take(nullity).enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    basis
}

/// Orthonormal basis of the column space of `a` (full column rank expected),
/// with the ratio of smallest to largest singular value.
pub fn orthonormalize(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let s = &svd.singular_values;
    let ratio = s.min() / s.max();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut q = DMatrix::zeros(a.nrows(), s.len());
    for (j, &i) in order.iter().enumerate() {
        q.set_column(j, &u.column(i));
    }
    (q, ratio)
}

/// Replaces `m` by its symmetric part.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Extreme singular values `(min, max)`.
pub fn singular_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let s = a.clone().singular_values();
    (s.min(), s.max())
}
