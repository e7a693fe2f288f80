//! Small dense helpers on top of nalgebra.

use alloc::vec::Vec;

use crate::{CMatrix, CVector, C64};

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Entrywise complex conjugate (the fixed conjugation `J`).
pub fn conj(a: &CMatrix) -> CMatrix {
    a.map(|z| z.conj())
}

/// `Gamma A Gamma` for a `2n x 2n` operator on `l2 + l2`:
/// `[[conj A22, conj A21], [conj A12, conj A11]]`.
pub fn conj_flip(a: &CMatrix) -> CMatrix {
    let n = a.nrows() / 2;
    CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        a[((1 - bi) * n + ii, (1 - bj) * n + jj)].conj()
    })
}

/// `Gamma f` for `f = (u, v)`: `(conj v, conj u)`.
pub fn gamma_vec(f: &CVector) -> CVector {
    let n = f.len() / 2;
    CVector::from_fn(2 * n, |i, _| f[(i + n) % (2 * n)].conj())
}

/// Hermitian part `(A + A*) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Cyclic complex Jacobi: slower than a tridiagonal QR but accurate to a
/// few ulps of `||A||` on every input, which the validation tolerances need.
pub fn eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let mut a = hermitian_part(a);
    let mut v = CMatrix::identity(n, n);
    let scale = a.norm();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for q in 0..n {
            for p in 0..q {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for q in 1..n {
            for p in 0..q {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let vals = order.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = CMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    (vals, vecs)
}

fn jacobi_rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
    // diag(1, e) makes the pivot real; then a real rotation zeroes it.
    let e = apq.conj() / r;
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
    let cs = 1.0 / libm::sqrt(t * t + 1.0);
    let sn = t * cs;
    let g = [[c(cs), c(sn)], [-e * sn, e * cs]];
    let n = a.nrows();
    for k in 0..n {
        let (x, y) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = x * g[0][0] + y * g[1][0];
        a[(k, q)] = x * g[0][1] + y * g[1][1];
    }
    for k in 0..n {
        let (x, y) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = g[0][0].conj() * x + g[1][0].conj() * y;
        a[(q, k)] = g[0][1].conj() * x + g[1][1].conj() * y;
    }
    for k in 0..n {
        let (x, y) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = x * g[0][0] + y * g[1][0];
        v[(k, q)] = x * g[0][1] + y * g[1][1];
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = c(a[(p, p)].re);
    a[(q, q)] = c(a[(q, q)].re);
}

/// `f(A)` for Hermitian `A` through its spectral decomposition.
pub fn hermitian_fn(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, u) = eigh(a);
    let n = vals.len();
    let mut scaled = u.clone();
    for k in 0..n {
        let s = c(f(vals[k]));
        for r in 0..n {
            scaled[(r, k)] *= s;
        }
    }
    scaled * u.adjoint()
}

/// Extreme eigenvalues `(min, max)` of a Hermitian matrix.
pub fn spectrum_bounds(a: &CMatrix) -> (f64, f64) {
    let (vals, _) = eigh(a);
    match (vals.first(), vals.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (0.0, 0.0),
    }
}

/// Reciprocal 2-norm condition number; 1 for the empty matrix.
pub fn rcond(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let sv = a.clone().singular_values();
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

// SVD of `a` padded with zero rows or columns up to a square; padding rows
// keeps the null space, padding columns keeps the range.
fn square_svd(a: &CMatrix, pad_rows: bool) -> (CMatrix, Vec<f64>, CMatrix) {
    let k = a.nrows().max(a.ncols());
    let (r, cc) = if pad_rows {
        (k, a.ncols())
    } else {
        (a.nrows(), k)
    };
    let mut sq = CMatrix::zeros(r, cc);
    sq.view_mut((0, 0), a.shape()).copy_from(a);
    let svd = sq.svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v requested").adjoint();
    (u, svd.singular_values.iter().cloned().collect(), v)
}

/// Orthonormal basis (as columns) of the column space of `a`; singular
/// values at most `tol * max(1, sigma_max)` count as zero.
pub fn range_basis(a: &CMatrix, tol: f64) -> CMatrix {
    if a.is_empty() {
        return CMatrix::zeros(a.nrows(), 0);
    }
    let (u, sv, _) = square_svd(a, false);
    let cut = tol * sv.iter().cloned().fold(1.0, f64::max);
    let cols: Vec<CVector> = (0..sv.len())
        .filter(|&k| sv[k] > cut)
        .map(|k| u.column(k).into_owned())
        .collect();
    from_columns(a.nrows(), &cols)
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub fn null_basis(a: &CMatrix, tol: f64) -> CMatrix {
    if a.nrows() == 0 {
        return CMatrix::identity(a.ncols(), a.ncols());
    }
    if a.ncols() == 0 {
        return CMatrix::zeros(0, 0);
    }
    let (_, sv, v) = square_svd(a, true);
    let cut = tol * sv.iter().cloned().fold(1.0, f64::max);
    let cols: Vec<CVector> = (0..sv.len())
        .filter(|&k| sv[k] <= cut)
        .map(|k| v.column(k).into_owned())
        .collect();
    from_columns(a.ncols(), &cols)
}

/// Orthogonal projection onto the column space of an orthonormal basis.
pub fn projector(basis: &CMatrix) -> CMatrix {
    basis * basis.adjoint()
}

pub(crate) fn from_columns(rows: usize, cols: &[CVector]) -> CMatrix {
    CMatrix::from_fn(rows, cols.len(), |r, k| cols[k][r])
}

/// Submatrix with the given row and column index lists.
pub fn select(a: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// `A^T` without conjugation.
pub fn transpose(a: &CMatrix) -> CMatrix {
    a.transpose()
}
