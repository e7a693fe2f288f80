//! Skew-symmetric linear algebra: Pfaffians, the 2x2-block interleaving of
//! matrix kernels, Fredholm Pfaffians and the two projection-reduction
//! formulas.

use alloc::vec::Vec;

use crate::linalg::{c, rcond};
use crate::{tol, CMatrix, Error, Result, C64};

/// Largest ground set accepted by the subset-sum Fredholm Pfaffian.
pub const MAX_SUBSET_SITES: usize = 20;

/// A validated complex skew-symmetric matrix of even dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    entries: CMatrix,
}

impl SkewMatrix {
    /// Checks `|A_ij + A_ji| <= tol::SKEW` and even dimension, then stores
    /// the symmetrized `(A - A^T) / 2`.
    pub fn new(a: CMatrix) -> Result<Self> {
        let (r, cols) = a.shape();
        if r != cols {
            return Err(Error::NotSquare { rows: r, cols });
        }
        if r % 2 != 0 {
            return Err(Error::OddDimension(r));
        }
        check_skew(&a)?;
        Ok(Self {
            entries: (&a - a.transpose()) * c(0.5),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> CMatrix {
        self.entries
    }

    pub fn pfaffian(&self) -> C64 {
        pfaffian_unchecked(&self.entries)
    }
}

fn check_skew(a: &CMatrix) -> Result<()> {
    let n = a.nrows();
    let mut worst = (0, 0, 0.0f64);
    for i in 0..n {
        for j in i..n {
            let d = (a[(i, j)] + a[(j, i)]).norm();
            if d > worst.2 || d.is_nan() {
                worst = (i, j, d);
            }
        }
    }
    if worst.2 > tol::SKEW || worst.2.is_nan() {
        return Err(Error::NotSkew {
            row: worst.0,
            col: worst.1,
            deviation: worst.2,
        });
    }
    Ok(())
}

/// Pfaffian of a validated skew matrix.
pub fn pfaffian(a: &SkewMatrix) -> C64 {
    a.pfaffian()
}

/// Pfaffian of a raw matrix, with the same validation as [`SkewMatrix::new`].
pub fn pfaffian_of(a: &CMatrix) -> Result<C64> {
    Ok(SkewMatrix::new(a.clone())?.pfaffian())
}

/// Parlett-Reid tridiagonalization with partial pivoting. Only the strictly
/// lower triangle is trusted to be the negated upper one; no checks.
pub(crate) fn pfaffian_unchecked(a: &CMatrix) -> C64 {
    let n = a.nrows();
    if n % 2 == 1 {
        return C64::new(0.0, 0.0);
    }
    let mut a = a.clone();
    let mut pf = C64::new(1.0, 0.0);
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        let mut best = a[(k + 1, k)].norm();
        for i in k + 2..n {
            let v = a[(i, k)].norm();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let pivot = a[(k, k + 1)];
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<C64> = (k + 2..n).map(|j| a[(k, j)] / pivot).collect();
            let col: Vec<C64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// A 2x2-matrix-valued kernel on `n` sites with `K(x,y)^T = -K(y,x)`,
/// stored interleaved: block `(k,l)` occupies rows `2k..2k+2`, columns
/// `2l..2l+2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PfaffianKernel {
    matrix: CMatrix,
}

impl PfaffianKernel {
    /// Accepts an interleaved `2n x 2n` matrix; it must be skew.
    pub fn from_interleaved(m: CMatrix) -> Result<Self> {
        Ok(Self {
            matrix: SkewMatrix::new(m)?.into_inner(),
        })
    }

    /// Builds the kernel from a block function `(x, y) -> [[K11, K12], [K21, K22]]`.
    pub fn from_blocks(n: usize, f: impl Fn(usize, usize) -> [[C64; 2]; 2]) -> Result<Self> {
        let mut m = CMatrix::zeros(2 * n, 2 * n);
        for x in 0..n {
            for y in 0..n {
                let b = f(x, y);
                for i in 0..2 {
                    for j in 0..2 {
                        m[(2 * x + i, 2 * y + j)] = b[i][j];
                    }
                }
            }
        }
        Self::from_interleaved(m)
    }

    /// The zero kernel: empty configuration almost surely.
    pub fn zero(n: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(2 * n, 2 * n),
        }
    }

    /// Determinantal kernel `[[0, K], [-K^T, 0]]` from a scalar kernel.
    pub fn from_scalar(k: &CMatrix) -> Result<Self> {
        let (r, cols) = k.shape();
        if r != cols {
            return Err(Error::NotSquare { rows: r, cols });
        }
        let z = C64::new(0.0, 0.0);
        Self::from_blocks(r, |x, y| [[z, k[(x, y)]], [-k[(y, x)], z]])
    }

    pub fn sites(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn interleaved(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn block(&self, x: usize, y: usize) -> [[C64; 2]; 2] {
        let m = &self.matrix;
        [
            [m[(2 * x, 2 * y)], m[(2 * x, 2 * y + 1)]],
            [m[(2 * x + 1, 2 * y)], m[(2 * x + 1, 2 * y + 1)]],
        ]
    }

    pub fn k11(&self, x: usize, y: usize) -> C64 {
        self.matrix[(2 * x, 2 * y)]
    }

    pub fn k12(&self, x: usize, y: usize) -> C64 {
        self.matrix[(2 * x, 2 * y + 1)]
    }

    pub fn k21(&self, x: usize, y: usize) -> C64 {
        self.matrix[(2 * x + 1, 2 * y)]
    }

    pub fn k22(&self, x: usize, y: usize) -> C64 {
        self.matrix[(2 * x + 1, 2 * y + 1)]
    }

    /// Restriction to a subset of sites (in the given order).
    pub fn restrict(&self, sites: &[usize]) -> Self {
        let idx = block_indices(sites);
        Self {
            matrix: crate::linalg::select(&self.matrix, &idx, &idx),
        }
    }

    /// The kernel `a(x) K(x,y) a(y)` for a real site weight `a`.
    pub fn scaled(&self, a: &[f64]) -> Self {
        let n = self.sites();
        let m = CMatrix::from_fn(2 * n, 2 * n, |i, j| {
            self.matrix[(i, j)] * a[i / 2] * a[j / 2]
        });
        Self { matrix: m }
    }
}

fn block_indices(points: &[usize]) -> Vec<usize> {
    points.iter().flat_map(|&p| [2 * p, 2 * p + 1]).collect()
}

fn check_points(points: &[usize], n: usize) -> Result<()> {
    for (i, &p) in points.iter().enumerate() {
        if p >= n {
            return Err(Error::SiteOutOfRange { index: p, len: n });
        }
        if points[..i].contains(&p) {
            return Err(Error::DuplicatePoint(p));
        }
    }
    Ok(())
}

/// The `2m x 2m` matrix `[K(x_k, x_l)]` for distinct points.
pub fn interleave(k: &PfaffianKernel, points: &[usize]) -> Result<SkewMatrix> {
    check_points(points, k.sites())?;
    Ok(SkewMatrix {
        entries: k.restrict(points).matrix,
    })
}

/// Pfaffian of the restriction to a bitmask of sites (bit `i` = site `i`).
pub(crate) fn minor_pfaffian(k: &PfaffianKernel, mask: u64) -> C64 {
    let pts: Vec<usize> = (0..k.sites()).filter(|&i| mask >> i & 1 == 1).collect();
    pfaffian_unchecked(&k.restrict(&pts).matrix)
}

/// `Pf[J + K] := 1 + sum over nonempty X of Pf[K(x,y)]_{x,y in X}`.
pub fn fredholm_pfaffian(k: &PfaffianKernel) -> Result<C64> {
    let n = k.sites();
    if n > MAX_SUBSET_SITES {
        return Err(Error::TooLarge {
            what: "ground set",
            size: n,
            limit: MAX_SUBSET_SITES,
        });
    }
    let mut total = C64::new(1.0, 0.0);
    for mask in 1u64..(1u64 << n) {
        total += minor_pfaffian(k, mask);
    }
    Ok(total)
}

/// `J`, the interleaved matrix with `J(x,x) = [[0,1],[-1,0]]` and zero
/// off-diagonal blocks.
pub fn j_matrix(n: usize) -> CMatrix {
    let mut j = CMatrix::zeros(2 * n, 2 * n);
    for x in 0..n {
        j[(2 * x, 2 * x + 1)] = c(1.0);
        j[(2 * x + 1, 2 * x)] = c(-1.0);
    }
    j
}

/// `Pf(J + K)` computed as a single `2n x 2n` Pfaffian. Agrees with
/// [`fredholm_pfaffian`] under the interleaving above.
pub fn fredholm_pfaffian_direct(k: &PfaffianKernel) -> C64 {
    pfaffian_unchecked(&(j_matrix(k.sites()) + &k.matrix))
}

fn split(p: &CMatrix, first: usize) -> Result<(CMatrix, CMatrix, CMatrix, CMatrix)> {
    let (r, cols) = p.shape();
    if r != cols {
        return Err(Error::NotSquare { rows: r, cols });
    }
    if first > r {
        return Err(Error::DimensionMismatch {
            expected: r,
            found: first,
        });
    }
    let m = r - first;
    Ok((
        p.view((0, 0), (first, first)).into_owned(),
        p.view((0, first), (first, m)).into_owned(),
        p.view((first, 0), (m, first)).into_owned(),
        p.view((first, first), (m, m)).into_owned(),
    ))
}

/// Projection onto `L ∩ H1` for the projection `[[A, B], [C, D]]` onto `L`:
/// `A - B D^{-1} C`.
pub fn reduce_intersect(a: &CMatrix, b: &CMatrix, cc: &CMatrix, d: &CMatrix) -> Result<CMatrix> {
    let r = rcond(d);
    if r < tol::SINGULAR_RCOND {
        return Err(Error::Singular {
            context: "projection not regular for intersection reduction",
            rcond: r,
        });
    }
    let dinv = d.clone().try_inverse().ok_or(Error::Singular {
        context: "projection not regular for intersection reduction",
        rcond: r,
    })?;
    Ok(a - b * dinv * cc)
}

/// Projection onto `pi_1(L)`: `A + B (1 - D)^{-1} C`.
pub fn reduce_image(a: &CMatrix, b: &CMatrix, cc: &CMatrix, d: &CMatrix) -> Result<CMatrix> {
    let m = d.nrows();
    let one_minus = CMatrix::identity(m, m) - d;
    let r = rcond(&one_minus);
    if r < tol::SINGULAR_RCOND {
        return Err(Error::Singular {
            context: "L meets H2; image reduction undefined",
            rcond: r,
        });
    }
    let inv = one_minus.try_inverse().ok_or(Error::Singular {
        context: "L meets H2; image reduction undefined",
        rcond: r,
    })?;
    Ok(a + b * inv * cc)
}

/// [`reduce_intersect`] on a projection split after its first `first` coordinates.
pub fn reduce_intersect_split(p: &CMatrix, first: usize) -> Result<CMatrix> {
    let (a, b, cc, d) = split(p, first)?;
    reduce_intersect(&a, &b, &cc, &d)
}

/// [`reduce_image`] on a projection split after its first `first` coordinates.
pub fn reduce_image_split(p: &CMatrix, first: usize) -> Result<CMatrix> {
    let (a, b, cc, d) = split(p, first)?;
    reduce_image(&a, &b, &cc, &d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, null_basis, projector, range_basis};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_skew(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[(i, j)] = z;
                a[(j, i)] = -z;
            }
        }
        a
    }

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn random_projection(n: usize, rank: usize, seed: u64) -> CMatrix {
        let g = random_matrix(n, seed);
        let basis = range_basis(&g.columns(0, rank).into_owned(), 1e-12);
        projector(&basis)
    }

    #[test]
    fn two_by_two() {
        let a = C64::new(0.3, -1.2);
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), a, -a, c(0.0)]);
        assert_eq!(pfaffian_of(&m).unwrap(), a);
    }

    #[test]
    fn four_by_four_expansion() {
        let m = random_skew(4, 1);
        let e = |i: usize, j: usize| m[(i, j)];
        let expect = e(0, 1) * e(2, 3) - e(0, 2) * e(1, 3) + e(0, 3) * e(1, 2);
        assert!((pfaffian_of(&m).unwrap() - expect).norm() < 1e-14);
    }

    #[test]
    fn empty_matrix_has_pfaffian_one() {
        assert_eq!(pfaffian_of(&CMatrix::zeros(0, 0)).unwrap(), c(1.0));
    }

    #[test]
    fn six_by_six_squares_to_determinant() {
        let m = random_skew(6, 7);
        let pf = pfaffian_of(&m).unwrap();
        assert!((pf * pf - m.determinant()).norm() < 1e-10);
    }

    #[test]
    fn rejects_odd_and_non_skew() {
        assert_eq!(
            pfaffian_of(&CMatrix::zeros(3, 3)),
            Err(Error::OddDimension(3))
        );
        let mut m = random_skew(4, 2);
        m[(0, 1)] += c(1e-6);
        assert!(matches!(
            pfaffian_of(&m),
            Err(Error::NotSkew { row: 0, col: 1, .. })
        ));
        m[(0, 1)] -= c(1e-6);
        m[(2, 2)] = c(1e-12);
        assert!(pfaffian_of(&m).is_ok());
    }

    #[test]
    fn singular_skew_has_zero_pfaffian() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 1)] = c(2.0);
        m[(1, 0)] = c(-2.0);
        assert_eq!(pfaffian_of(&m).unwrap(), c(0.0));
    }

    #[test]
    fn interleave_single_point_and_block_diagonal() {
        let cc = C64::new(0.4, 0.1);
        let z = c(0.0);
        let k = PfaffianKernel::from_blocks(1, |_, _| [[z, cc], [-cc, z]]).unwrap();
        let m = interleave(&k, &[0]).unwrap();
        assert_eq!(m.entries()[(0, 1)], cc);
        assert_eq!(m.entries()[(1, 0)], -cc);

        let k2 = PfaffianKernel::from_blocks(2, |x, y| {
            if x == y {
                [[z, cc], [-cc, z]]
            } else {
                [[z; 2]; 2]
            }
        })
        .unwrap();
        let m2 = interleave(&k2, &[0, 1]).unwrap();
        assert_eq!(m2.entries()[(0, 2)], z);
        assert_eq!(m2.entries()[(2, 3)], cc);
        assert_eq!(interleave(&k2, &[1, 1]), Err(Error::DuplicatePoint(1)));
    }

    #[test]
    fn kernel_must_be_antisymmetric() {
        let z = c(0.0);
        let bad = PfaffianKernel::from_blocks(2, |x, y| {
            if x == 0 && y == 1 {
                [[c(1.0), z], [z, z]]
            } else {
                [[z; 2]; 2]
            }
        });
        assert!(matches!(bad, Err(Error::NotSkew { .. })));
    }

    #[test]
    fn fredholm_trivial_cases() {
        assert_eq!(fredholm_pfaffian(&PfaffianKernel::zero(3)).unwrap(), c(1.0));
        let (t, p) = (0.7, 0.3);
        let z = c(0.0);
        let k = PfaffianKernel::from_blocks(1, |_, _| [[z, c(t * p)], [c(-t * p), z]]).unwrap();
        assert!((fredholm_pfaffian(&k).unwrap() - c(1.0 + t * p)).norm() < 1e-15);
    }

    #[test]
    fn fredholm_direct_agrees_with_subset_sum() {
        for n in 0..=6 {
            for seed in 0..4 {
                let k = PfaffianKernel::from_interleaved(random_skew(2 * n, 100 + seed)).unwrap();
                let a = fredholm_pfaffian(&k).unwrap();
                let b = fredholm_pfaffian_direct(&k);
                assert!(
                    (a - b).norm() < 1e-10 * (1.0 + a.norm()),
                    "n={n}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn weighted_fredholm_matches_product_expansion() {
        let n = 4;
        let k = PfaffianKernel::from_interleaved(random_skew(2 * n, 9)).unwrap();
        let alpha_minus_one = [0.5, 0.0, 2.0, 1.5];
        let sq: Vec<f64> = alpha_minus_one.iter().map(|a: &f64| a.sqrt()).collect();
        let lhs = fredholm_pfaffian_direct(&k.scaled(&sq));
        let mut rhs = c(1.0);
        for mask in 1u64..16 {
            let w: f64 = (0..n)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| alpha_minus_one[i])
                .product();
            rhs += minor_pfaffian(&k, mask) * w;
        }
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn reduction_trivial_cases() {
        let h = c(0.5);
        let one = CMatrix::from_element(1, 1, h);
        assert!(
            max_abs_diff(
                &reduce_intersect(&one, &one, &one, &one).unwrap(),
                &CMatrix::zeros(1, 1)
            ) < 1e-15
        );
        assert!(
            max_abs_diff(
                &reduce_image(&one, &one, &one, &one).unwrap(),
                &CMatrix::identity(1, 1)
            ) < 1e-15
        );

        let p1 = random_projection(3, 1, 4);
        let mut big = CMatrix::zeros(5, 5);
        big.view_mut((0, 0), (3, 3)).copy_from(&p1);
        assert!(max_abs_diff(&reduce_image_split(&big, 3).unwrap(), &p1) < 1e-14);
        big.view_mut((3, 3), (2, 2))
            .copy_from(&CMatrix::identity(2, 2));
        assert!(max_abs_diff(&reduce_intersect_split(&big, 3).unwrap(), &p1) < 1e-14);
        assert!(matches!(
            reduce_image_split(&big, 3),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn reductions_match_subspace_oracles() {
        for seed in 0..10 {
            let p = random_projection(6, 3, 200 + seed);
            let q = reduce_intersect_split(&p, 4).unwrap();
            assert!(max_abs_diff(&(&q * &q), &q) < 1e-10);
            assert!(max_abs_diff(&q.adjoint(), &q) < 1e-10);
            // L ∩ H1: vectors x in H1 with (1 - P) x = 0.
            let comp = CMatrix::identity(6, 6) - &p;
            let restricted = comp.columns(0, 4).into_owned();
            let oracle = projector(&null_basis(&restricted, 1e-9));
            assert!(max_abs_diff(&q, &oracle) < 1e-10);

            let r = reduce_image_split(&p, 4).unwrap();
            assert!(max_abs_diff(&(&r * &r), &r) < 1e-10);
            assert!(max_abs_diff(&r.adjoint(), &r) < 1e-10);
            let image = p.rows(0, 4).into_owned();
            let oracle = projector(&range_basis(&image, 1e-9));
            assert!(max_abs_diff(&r, &oracle) < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn pfaffian_squared_is_determinant(half in 1usize..5, seed in any::<u64>()) {
            let m = random_skew(2 * half, seed);
            let pf = pfaffian_of(&m).unwrap();
            let det = m.determinant();
            prop_assert!((pf * pf - det).norm() <= 1e-9 * det.norm().max(1.0));
        }

        #[test]
        fn congruence_scales_by_determinant(half in 1usize..5, seed in any::<u64>()) {
            let a = random_skew(2 * half, seed);
            let b = random_matrix(2 * half, seed ^ 0x5555);
            let lhs = pfaffian_of(&(b.transpose() * &a * &b)).unwrap();
            let rhs = b.determinant() * pfaffian_of(&a).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm().max(1.0));
        }

        #[test]
        fn permuting_points_keeps_pfaffian(seed in any::<u64>()) {
            let k = PfaffianKernel::from_interleaved(random_skew(8, seed)).unwrap();
            let a = interleave(&k, &[0, 1, 2, 3]).unwrap().pfaffian();
            let b = interleave(&k, &[2, 0, 3, 1]).unwrap().pfaffian();
            prop_assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }
}
