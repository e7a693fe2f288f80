//! Covariance operators on the doubled one-particle space `l2(X) + l2(X)`.
//!
//! A `2n x 2n` matrix is laid out as `[[S11, S12], [S21, S22]]`; the first
//! `n` coordinates are the creation directions and the last `n` the
//! annihilation directions. `Gamma (u, v) = (conj v, conj u)`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::linalg::{c, conj_flip, eigh, hermitian_fn, max_abs_diff, spectrum_bounds};
use crate::skewalg::PfaffianKernel;
use crate::{tol, CMatrix, Error, Label, Result, C64};

/// Finite ordered list of distinct site labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundSet {
    labels: Vec<Label>,
}

impl GroundSet {
    /// Labels must be strictly increasing.
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        for i in 1..labels.len() {
            if labels[i] <= labels[i - 1] {
                return Err(Error::UnorderedLabels(i));
            }
        }
        Ok(Self { labels })
    }

    /// `0, 1, ..., n-1`.
    pub fn integers(n: usize) -> Self {
        Self {
            labels: (0..n as i64).map(Label::from_integer).collect(),
        }
    }

    /// `lo + 1/2, lo + 3/2, ..., hi - 1/2`.
    pub fn half_integers(lo: i64, hi: i64) -> Self {
        Self {
            labels: (lo..hi).map(|k| Label::new(2 * k + 1, 2)).collect(),
        }
    }

    /// The `2m` half-integers in `(-m, m)`.
    pub fn symmetric_window(m: usize) -> Self {
        Self::half_integers(-(m as i64), m as i64)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn index_of(&self, label: Label) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    /// Index of the site `-x`, when present.
    pub fn mirror(&self, i: usize) -> Option<usize> {
        self.index_of(-self.labels[i])
    }

    /// Sub ground set keeping the listed indices (in order).
    pub fn subset(&self, keep: &[usize]) -> Self {
        Self {
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// A validated element of `Q(K, Gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceOperator {
    matrix: CMatrix,
    projection: bool,
}

impl CovarianceOperator {
    pub fn sites(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_projection(&self) -> bool {
        self.projection
    }

    fn block(&self, bi: usize, bj: usize) -> CMatrix {
        let n = self.sites();
        self.matrix.view((bi * n, bj * n), (n, n)).into_owned()
    }

    pub fn s11(&self) -> CMatrix {
        self.block(0, 0)
    }

    pub fn s12(&self) -> CMatrix {
        self.block(0, 1)
    }

    pub fn s21(&self) -> CMatrix {
        self.block(1, 0)
    }

    pub fn s22(&self) -> CMatrix {
        self.block(1, 1)
    }

    /// `V* S V`.
    pub fn conjugate(&self, v: &CMatrix) -> Result<Self> {
        validate_covariance(&(v.adjoint() * &self.matrix * v))
    }
}

/// A validated element of `Gr(K, Gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator(CovarianceOperator);

impl ProjectionOperator {
    pub fn new(s: CovarianceOperator) -> Result<Self> {
        if s.projection {
            Ok(Self(s))
        } else {
            Err(Error::NotProjection {
                deviation: projection_defect(&s.matrix),
            })
        }
    }

    pub fn covariance(&self) -> &CovarianceOperator {
        &self.0
    }

    pub fn into_covariance(self) -> CovarianceOperator {
        self.0
    }

    pub fn sites(&self) -> usize {
        self.0.sites()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0.matrix
    }
}

impl core::ops::Deref for ProjectionOperator {
    type Target = CovarianceOperator;

    fn deref(&self) -> &CovarianceOperator {
        &self.0
    }
}

fn projection_defect(m: &CMatrix) -> f64 {
    max_abs_diff(&(m * m), m)
}

fn worst_entry(m: &CMatrix) -> (usize, usize, f64) {
    let mut w = (0, 0, 0.0f64);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let d = m[(i, j)].norm();
            if d > w.2 || d.is_nan() {
                w = (i, j, d);
            }
        }
    }
    w
}

/// Checks `S = S*`, `0 <= S <= 1` and `S + Gamma S Gamma = 1`, each with its
/// own error, and records whether `S` is a projection.
pub fn validate_covariance(s: &CMatrix) -> Result<CovarianceOperator> {
    let (r, cols) = s.shape();
    if r != cols {
        return Err(Error::NotSquare { rows: r, cols });
    }
    if r % 2 != 0 {
        return Err(Error::OddDimension(r));
    }
    let (row, col, deviation) = worst_entry(&(s - s.adjoint()));
    if deviation > tol::AXIOM || deviation.is_nan() {
        return Err(Error::NotSelfAdjoint {
            row,
            col,
            deviation,
        });
    }
    let (lo, hi) = spectrum_bounds(s);
    if lo < -tol::SPECTRUM {
        return Err(Error::SpectrumOutOfRange { eigenvalue: lo });
    }
    if hi > 1.0 + tol::SPECTRUM {
        return Err(Error::SpectrumOutOfRange { eigenvalue: hi });
    }
    let defect = s + conj_flip(s) - CMatrix::identity(r, r);
    let (row, col, deviation) = worst_entry(&defect);
    if deviation > tol::AXIOM {
        return Err(Error::GammaRelationViolated {
            row,
            col,
            deviation,
        });
    }
    Ok(CovarianceOperator {
        matrix: s.clone(),
        projection: projection_defect(s) <= tol::PROJECTION,
    })
}

/// Validates and additionally requires `S^2 = S`.
pub fn validate_projection(s: &CMatrix) -> Result<ProjectionOperator> {
    ProjectionOperator::new(validate_covariance(s)?)
}

/// `P0 = [[I, 0], [0, 0]]`, the vacuum.
pub fn vacuum(n: usize) -> ProjectionOperator {
    let m = CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        c(if i == j && i < n { 1.0 } else { 0.0 })
    });
    ProjectionOperator(CovarianceOperator {
        matrix: m,
        projection: true,
    })
}

/// `I - P0`, the completely filled state.
pub fn filled(n: usize) -> ProjectionOperator {
    let m = CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        c(if i == j && i >= n { 1.0 } else { 0.0 })
    });
    ProjectionOperator(CovarianceOperator {
        matrix: m,
        projection: true,
    })
}

/// `diag(s, 1 - s)`: independent sites, site `x` occupied with
/// probability `1 - s_x`.
pub fn diagonal(s: &[f64]) -> Result<CovarianceOperator> {
    let n = s.len();
    let m = CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            c(0.0)
        } else if i < n {
            c(s[i])
        } else {
            c(1.0 - s[i - n])
        }
    });
    validate_covariance(&m)
}

/// `S = I/2`: i.i.d. Bernoulli(1/2) occupations.
pub fn half(n: usize) -> CovarianceOperator {
    CovarianceOperator {
        matrix: CMatrix::identity(2 * n, 2 * n) * c(0.5),
        projection: false,
    }
}

/// The kernel `K_S(x,y) = [[S21, S22], [S11 - 1, S12]](x,y)`.
pub fn kernel_from_covariance(s: &CovarianceOperator) -> PfaffianKernel {
    let n = s.sites();
    let m = &s.matrix;
    let mut k = CMatrix::zeros(2 * n, 2 * n);
    for x in 0..n {
        for y in 0..n {
            let delta = if x == y { 1.0 } else { 0.0 };
            k[(2 * x, 2 * y)] = m[(n + x, y)];
            k[(2 * x, 2 * y + 1)] = m[(n + x, n + y)];
            k[(2 * x + 1, 2 * y)] = m[(x, y)] - delta;
            k[(2 * x + 1, 2 * y + 1)] = m[(x, n + y)];
        }
    }
    // The Gamma relation makes this skew up to the validation tolerance.
    PfaffianKernel::from_interleaved(k).expect("validated covariance gives a skew kernel")
}

/// True when the pairing blocks vanish, so the process is determinantal.
pub fn is_dpp(s: &CovarianceOperator) -> bool {
    let n = s.sites();
    (0..n).all(|i| {
        (0..n).all(|j| {
            s.matrix[(i, n + j)].norm() <= tol::DPP && s.matrix[(n + i, j)].norm() <= tol::DPP
        })
    })
}

/// Purification of a covariance operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    /// `P_S = [[S, R], [R, 1 - S]]` on `K + K`, `R = S^{1/2} (1 - S)^{1/2}`.
    pub block: CMatrix,
    /// The same projection in standard form on `2n` sites. The original
    /// sites are `0..n`.
    pub standard: ProjectionOperator,
}

/// Builds `P_S` with `Gamma^ = diag(Gamma, -Gamma)` and moves it to the
/// standard doubled ground set through `(u1, v1, u2, v2) -> (u1, u2, v1, -v2)`.
pub fn purify(s: &CovarianceOperator) -> Result<Purification> {
    let n = s.sites();
    let d = 2 * n;
    let sm = &s.matrix;
    let r = hermitian_fn(sm, |l| {
        let l = l.clamp(0.0, 1.0);
        let m = l.min(1.0 - l);
        if m <= tol::PURIFY_SNAP {
            0.0
        } else {
            libm::sqrt(l * (1.0 - l))
        }
    });
    let mut block = CMatrix::zeros(2 * d, 2 * d);
    block.view_mut((0, 0), (d, d)).copy_from(sm);
    block.view_mut((0, d), (d, d)).copy_from(&r);
    block.view_mut((d, 0), (d, d)).copy_from(&r);
    block
        .view_mut((d, d), (d, d))
        .copy_from(&(CMatrix::identity(d, d) - sm));

    // Coordinate map of the K + K layout into the 2n-site layout.
    let target = |i: usize| -> (usize, f64) {
        let (half, part, x) = (i / d, (i % d) / n, i % n);
        match (half, part) {
            (0, 0) => (x, 1.0),
            (1, 0) => (n + x, 1.0),
            (0, 1) => (d + x, 1.0),
            _ => (d + n + x, -1.0),
        }
    };
    let mut std_m = CMatrix::zeros(2 * d, 2 * d);
    for i in 0..2 * d {
        let (ti, si) = target(i);
        for j in 0..2 * d {
            let (tj, sj) = target(j);
            std_m[(ti, tj)] = block[(i, j)] * (si * sj);
        }
    }
    Ok(Purification {
        block,
        standard: validate_projection(&std_m)?,
    })
}

/// A random Bogoliubov unitary `V = exp(iH)` with `Gamma H Gamma = -H`, so
/// that `Gamma V Gamma = V`. `H = [[h, g], [g*, -conj h]]` with `h`
/// Hermitian and `g` antisymmetric, entries uniform in `[-1, 1]`.
pub fn random_bogoliubov(seed: u64, n: usize) -> CMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut h = CMatrix::zeros(n, n);
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = c(draw().re);
        for j in i + 1..n {
            let z = draw();
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            let w = draw();
            g[(i, j)] = w;
            g[(j, i)] = -w;
        }
    }
    let mut big = CMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&h);
    big.view_mut((0, n), (n, n)).copy_from(&g);
    big.view_mut((n, 0), (n, n)).copy_from(&g.adjoint());
    big.view_mut((n, n), (n, n))
        .copy_from(&(-h.map(|z| z.conj())));
    unitary_exp(&big)
}

/// `exp(iH)` for Hermitian `H`.
pub fn unitary_exp(h: &CMatrix) -> CMatrix {
    let (vals, u) = eigh(h);
    let mut scaled = u.clone();
    for (k, &l) in vals.iter().enumerate() {
        let ph = C64::new(libm::cos(l), libm::sin(l));
        for r in 0..u.nrows() {
            scaled[(r, k)] *= ph;
        }
    }
    scaled * u.adjoint()
}

/// `V* P0 V` for `V = random_bogoliubov(seed, n)`.
pub fn random_projection(seed: u64, n: usize) -> ProjectionOperator {
    let v = random_bogoliubov(seed, n);
    let p = v.adjoint() * vacuum(n).matrix() * &v;
    validate_projection(&p).expect("Bogoliubov orbit of P0 stays in Gr")
}

/// `V* diag(s, 1 - s) V` with `s` uniform in `(0, 1)` and `V` a random
/// Bogoliubov unitary; generically not a projection.
pub fn random_covariance(seed: u64, n: usize) -> CovarianceOperator {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
    let v = random_bogoliubov(seed, n);
    diagonal(&s)
        .and_then(|d| d.conjugate(&v))
        .expect("Bogoliubov orbit of a diagonal covariance stays in Q")
}

/// Frobenius norm `||P - Q||`.
pub fn hs_distance(p: &CMatrix, q: &CMatrix) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::DimensionMismatch {
            expected: p.nrows(),
            found: q.nrows(),
        });
    }
    Ok((p - q).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{conj, gamma_vec, max_abs};
    use crate::CVector;
    use proptest::prelude::*;

    #[test]
    fn ground_sets() {
        let g = GroundSet::symmetric_window(2);
        assert_eq!(
            g.labels(),
            &[
                Label::new(-3, 2),
                Label::new(-1, 2),
                Label::new(1, 2),
                Label::new(3, 2)
            ]
        );
        assert_eq!(g.mirror(0), Some(3));
        assert_eq!(g.index_of(Label::new(1, 2)), Some(2));
        assert_eq!(
            GroundSet::new(alloc::vec![Label::from_integer(1), Label::from_integer(1)]),
            Err(Error::UnorderedLabels(1))
        );
    }

    #[test]
    fn validation_examples() {
        let p0 = validate_covariance(vacuum(3).matrix()).unwrap();
        assert!(p0.is_projection());
        let h = validate_covariance(half(3).matrix()).unwrap();
        assert!(!h.is_projection());
        let both = CMatrix::identity(4, 4);
        assert!(matches!(
            validate_covariance(&both),
            Err(Error::GammaRelationViolated { .. })
        ));
        let mut nsa = half(2).matrix().clone();
        nsa[(0, 1)] = C64::new(0.0, 0.1);
        assert!(matches!(
            validate_covariance(&nsa),
            Err(Error::NotSelfAdjoint { .. })
        ));
        let big = CMatrix::identity(4, 4) * c(2.0);
        assert!(matches!(
            validate_covariance(&big),
            Err(Error::SpectrumOutOfRange { .. })
        ));
        assert!(matches!(
            validate_projection(half(2).matrix()),
            Err(Error::NotProjection { .. })
        ));
    }

    #[test]
    fn kernel_examples() {
        let k = kernel_from_covariance(&vacuum(3));
        assert_eq!(max_abs(k.interleaved()), 0.0);
        let k = kernel_from_covariance(&filled(2));
        assert_eq!(k.k12(0, 0), c(1.0));
        assert_eq!(k.k21(1, 1), c(-1.0));
        assert_eq!(k.k12(0, 1), c(0.0));
        assert_eq!(k.k11(0, 0), c(0.0));
        let k = kernel_from_covariance(&half(2));
        assert_eq!(k.k12(1, 1), c(0.5));
        assert_eq!(k.k12(0, 1), c(0.0));
    }

    #[test]
    fn dpp_detection() {
        assert!(is_dpp(&half(3)));
        assert!(is_dpp(&vacuum(3)));
        assert!(!is_dpp(&random_projection(5, 3)));
    }

    #[test]
    fn bogoliubov_properties() {
        let n = 3;
        let v = random_bogoliubov(11, n);
        assert!(max_abs_diff(&(v.adjoint() * &v), &CMatrix::identity(2 * n, 2 * n)) < 1e-10);
        assert!(max_abs_diff(&conj_flip(&v), &v) < 1e-10);
        let f = CVector::from_fn(2 * n, |i, _| C64::new(i as f64, 1.0 - i as f64));
        assert!((&v * gamma_vec(&f) - gamma_vec(&(&v * &f))).norm() < 1e-10);
        assert!(validate_projection(random_projection(1, n).matrix()).is_ok());
        let d = hs_distance(
            random_projection(1, n).matrix(),
            random_projection(2, n).matrix(),
        )
        .unwrap();
        assert!(d > 1e-3);
        let id = unitary_exp(&CMatrix::zeros(2 * n, 2 * n));
        let p = id.adjoint() * vacuum(n).matrix() * &id;
        assert!(max_abs_diff(&p, vacuum(n).matrix()) < 1e-15);
    }

    #[test]
    fn hs_examples() {
        let n = 4;
        assert_eq!(
            hs_distance(vacuum(n).matrix(), vacuum(n).matrix()).unwrap(),
            0.0
        );
        let d = hs_distance(vacuum(n).matrix(), filled(n).matrix()).unwrap();
        assert!((d - libm::sqrt(2.0 * n as f64)).abs() < 1e-14);
        assert!(hs_distance(vacuum(2).matrix(), vacuum(3).matrix()).is_err());
    }

    #[test]
    fn purify_examples() {
        let p = random_projection(4, 2);
        let pur = purify(&p).unwrap();
        let d = 4;
        assert!(max_abs(&pur.block.view((0, d), (d, d)).into_owned()) < 1e-7);

        let h = purify(&half(2)).unwrap();
        let expect = CMatrix::from_fn(8, 8, |i, j| c(if i % 4 == j % 4 { 0.5 } else { 0.0 }));
        assert!(max_abs_diff(&h.block, &expect) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_covariances_are_valid(seed in any::<u64>(), n in 1usize..5) {
            let s = random_covariance(seed, n);
            let again = validate_covariance(s.matrix()).unwrap();
            prop_assert!(!again.is_projection() || n == 0);
            // Relations forced by the Gamma relation.
            prop_assert!(max_abs_diff(&conj(&s.s11()), &(CMatrix::identity(n, n) - s.s22())) < 1e-9);
            prop_assert!(max_abs_diff(&s.s12().transpose(), &(-s.s12())) < 1e-9);
            let k = kernel_from_covariance(&s);
            for x in 0..n {
                for y in 0..n {
                    let a = k.block(x, y);
                    let b = k.block(y, x);
                    for i in 0..2 {
                        for j in 0..2 {
                            prop_assert!((a[i][j] + b[j][i]).norm() < 1e-10);
                        }
                    }
                }
            }
        }

        #[test]
        fn group_action_preserves_q(seed in any::<u64>(), n in 1usize..5) {
            let s = random_covariance(seed, n);
            let v = random_bogoliubov(seed.wrapping_add(1), n);
            prop_assert!(s.conjugate(&v).is_ok());
        }

        #[test]
        fn purification_is_projection(seed in any::<u64>(), n in 1usize..4) {
            let s = random_covariance(seed, n);
            let pur = purify(&s).unwrap();
            let d = 2 * n;
            prop_assert!(max_abs_diff(&(&pur.block * &pur.block), &pur.block) < 1e-10);
            prop_assert_eq!(pur.block.view((0, 0), (d, d)).into_owned(), s.matrix().clone());
            prop_assert!(pur.standard.is_projection());
        }
    }
}
