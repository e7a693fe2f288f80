//! Explicit CAR representation on the `2^n`-dimensional Fock space.
//!
//! Basis vectors `e_omega` are indexed by bitmask (bit `i` = site `i`) and
//! stand for the wedge `e_{x1} ^ ... ^ e_{xk}` with `x1 > ... > xk`, so
//! `a*_x e_omega = (-1)^{#{y in omega : y > x}} e_{omega + x}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::covariance::{purify, CovarianceOperator, ProjectionOperator};
use crate::linalg::{c, eigh, gamma_vec};
use crate::{tol, CMatrix, CVector, Error, Result, C64};

/// Largest site count for which the operator algebra is built.
pub const MAX_FOCK_SITES: usize = 14;

/// Largest site count for state vectors (including purification doubling).
pub const MAX_STATE_SITES: usize = 12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Sparse (CSR) operator on the Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl FockOperator {
    fn from_rows(dim: usize, rows: impl IntoIterator<Item = Vec<(usize, C64)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        debug_assert_eq!(row_ptr.len(), dim + 1);
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Operator sending `e_omega` to `f(omega)` (a single basis vector or 0).
    fn monomial(dim: usize, f: impl Fn(usize) -> Option<(usize, C64)>) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for col in 0..dim {
            if let Some((row, v)) = f(col) {
                rows[row].push((col, v));
            }
        }
        Self::from_rows(dim, rows)
    }

    pub fn identity(dim: usize) -> Self {
        Self::monomial(dim, |i| Some((i, c(1.0))))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_rows(dim, vec![Vec::new(); dim])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        Self::monomial(d.len(), |i| Some((i, d[i])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .cloned()
            .zip(self.vals[r].iter().cloned())
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|e| e.0 == j).map(|e| e.1).unwrap_or(ZERO)
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim)
            .map(|i| self.row(i).map(|(j, a)| a * v[j]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for i in 0..self.dim {
            for (j, a) in self.row(i) {
                rows[j].push((i, a.conj()));
            }
        }
        Self::from_rows(self.dim, rows)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut acc = vec![ZERO; self.dim];
        let mut touched = vec![false; self.dim];
        let mut rows = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut list = Vec::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        list.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            let row = list
                .iter()
                .map(|&j| {
                    touched[j] = false;
                    let v = acc[j];
                    acc[j] = ZERO;
                    (j, v)
                })
                .collect();
            rows.push(row);
        }
        Self::from_rows(self.dim, rows)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: C64, other: &Self, beta: C64) -> Self {
        let rows = (0..self.dim).map(|i| {
            let mut row: Vec<(usize, C64)> = self.row(i).map(|(j, a)| (j, alpha * a)).collect();
            for (j, b) in other.row(i) {
                match row.iter_mut().find(|e| e.0 == j) {
                    Some(e) => e.1 += beta * b,
                    None => row.push((j, beta * b)),
                }
            }
            row
        });
        Self::from_rows(self.dim, rows)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(c(1.0), other, c(1.0))
    }

    pub fn scale(&self, s: C64) -> Self {
        self.combine(s, &Self::zero(self.dim), ZERO)
    }

    /// `AB + BA`.
    pub fn anticommutator(&self, other: &Self) -> Self {
        self.matmul(other).add(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.combine(c(1.0), other, c(-1.0)).max_abs()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, a) in self.row(i) {
                m[(i, j)] += a;
            }
        }
        m
    }
}

fn jw_sign(mask: usize, x: usize) -> f64 {
    if (mask >> (x + 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `a_x v` computed with bit operations.
pub fn annihilate(x: usize, v: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; v.len()];
    for (m, &a) in v.iter().enumerate() {
        if m >> x & 1 == 1 && a != ZERO {
            out[m ^ 1 << x] += a * jw_sign(m, x);
        }
    }
    out
}

/// `a*_x v` computed with bit operations.
pub fn create(x: usize, v: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; v.len()];
    for (m, &a) in v.iter().enumerate() {
        if m >> x & 1 == 0 && a != ZERO {
            out[m | 1 << x] += a * jw_sign(m, x);
        }
    }
    out
}

/// `B((u, v)) w = sum u_x a*_x w + sum v_x a_x w`.
pub fn apply_b(f: &CVector, w: &[C64]) -> Vec<C64> {
    let n = f.len() / 2;
    let mut out = vec![ZERO; w.len()];
    for (m, &a) in w.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        for x in 0..n {
            let s = jw_sign(m, x);
            if m >> x & 1 == 0 {
                out[m | 1 << x] += f[x] * a * s;
            } else {
                out[m ^ 1 << x] += f[n + x] * a * s;
            }
        }
    }
    out
}

/// The CAR generators `a_x` on `n` sites.
#[derive(Debug, Clone)]
pub struct FockSpace {
    sites: usize,
    annihilators: Vec<FockOperator>,
    creators: Vec<FockOperator>,
}

impl FockSpace {
    /// Builds `a_x, a*_x` and checks `{a_x, a*_y} = delta_xy`, `{a_x, a_y} = 0`.
    pub fn new(sites: usize) -> Result<Self> {
        if sites > MAX_FOCK_SITES {
            return Err(Error::TooLarge {
                what: "Fock space sites",
                size: sites,
                limit: MAX_FOCK_SITES,
            });
        }
        let dim = 1usize << sites;
        let annihilators: Vec<FockOperator> = (0..sites)
            .map(|x| {
                FockOperator::monomial(dim, |m| {
                    (m >> x & 1 == 1).then(|| (m ^ 1 << x, c(jw_sign(m, x))))
                })
            })
            .collect();
        let creators: Vec<FockOperator> = annihilators.iter().map(FockOperator::adjoint).collect();
        let space = Self {
            sites,
            annihilators,
            creators,
        };
        space.check_car()?;
        Ok(space)
    }

    fn check_car(&self) -> Result<()> {
        let dim = self.dim();
        let id = FockOperator::identity(dim);
        let zero = FockOperator::zero(dim);
        for x in 0..self.sites {
            for y in 0..self.sites {
                let ac = self.annihilators[x].anticommutator(&self.creators[y]);
                let expect = if x == y { &id } else { &zero };
                let d1 = ac.max_abs_diff(expect);
                let d2 = self.annihilators[x]
                    .anticommutator(&self.annihilators[y])
                    .max_abs();
                if d1 > tol::CAR || d2 > tol::CAR {
                    return Err(Error::InvalidArgument(format!(
                        "CAR relations fail at sites ({x}, {y}): {d1:e}, {d2:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn a(&self, x: usize) -> &FockOperator {
        &self.annihilators[x]
    }

    pub fn a_dag(&self, x: usize) -> &FockOperator {
        &self.creators[x]
    }

    /// `a*_x a_x`.
    pub fn number(&self, x: usize) -> FockOperator {
        self.creators[x].matmul(&self.annihilators[x])
    }

    /// `B((u, v)) = a*(u) + a(J v) = sum u_x a*_x + sum v_x a_x`.
    pub fn generator_b(&self, f: &CVector) -> Result<FockOperator> {
        let n = self.sites;
        if f.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                found: f.len(),
            });
        }
        let mut b = FockOperator::zero(self.dim());
        for x in 0..n {
            b = b.combine(c(1.0), &self.creators[x], f[x]);
            b = b.combine(c(1.0), &self.annihilators[x], f[n + x]);
        }
        Ok(b)
    }
}

/// A unit vector of the Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub sites: usize,
    pub amplitudes: Vec<C64>,
}

impl FockVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `<self, v>`.
    pub fn inner(&self, v: &[C64]) -> C64 {
        self.amplitudes
            .iter()
            .zip(v)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|c(omega)|^2` for every configuration.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Multiplies by a global phase so the first amplitude of modulus above
    /// `tol::KERNEL_GAP` (in mask order) is real and positive.
    pub fn fix_phase(&mut self) {
        if let Some(a) = self.amplitudes.iter().find(|a| a.norm() > tol::KERNEL_GAP) {
            let ph = a.conj() / a.norm();
            for x in self.amplitudes.iter_mut() {
                *x *= ph;
            }
        }
    }
}

/// The Fock vector `psi_P`: the unit vector killed by `B(g)` for every `g`
/// in `ker P`.
///
/// With `g_1..g_n` an orthonormal basis of `ker P`, the `b_j = B(g_j)`
/// satisfy `{b_i*, b_j} = delta_ij` and `{b_i, b_j} = 0`, so the
/// `b_j b_j*` are commuting projections onto `ker b_j` and their product
/// projects onto the joint kernel. It is applied to a fixed dense vector.
pub fn state_vector(p: &ProjectionOperator) -> Result<FockVector> {
    let n = p.sites();
    if n > MAX_STATE_SITES {
        return Err(Error::TooLarge {
            what: "state vector sites",
            size: n,
            limit: MAX_STATE_SITES,
        });
    }
    let (vals, u) = eigh(p.matrix());
    let kernel: Vec<CVector> = (0..2 * n)
        .filter(|&k| vals[k] < 0.5)
        .map(|k| u.column(k).into_owned())
        .collect();
    if kernel.len() != n {
        return Err(Error::JointKernel(format!(
            "ker P has dimension {} instead of {n}",
            kernel.len()
        )));
    }
    for (i, gi) in kernel.iter().enumerate() {
        let gg = gamma_vec(gi);
        for gj in &kernel {
            let pairing = gg.dotc(gj).norm();
            if pairing > tol::KERNEL_GAP {
                return Err(Error::JointKernel(format!(
                    "ker P is not isotropic: |(Gamma g_{i}, g)| = {pairing:e}"
                )));
            }
        }
    }
    let dim = 1usize << n;
    // Deterministic, nowhere-special start vector.
    let mut w: Vec<C64> = (0..dim)
        .map(|m| {
            let t = m as f64 + 1.0;
            C64::new(libm::sin(1.3 * t + 0.2) + 1.5, libm::cos(0.7 * t * t + 0.1))
        })
        .collect();
    let start_norm = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for g in &kernel {
        let gstar = gamma_vec(g);
        w = apply_b(g, &apply_b(&gstar, &w));
    }
    let norm = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < tol::KERNEL_GAP * start_norm {
        return Err(Error::JointKernel(format!(
            "projected start vector vanished (norm {norm:e})"
        )));
    }
    for a in w.iter_mut() {
        *a /= norm;
    }
    let mut psi = FockVector {
        sites: n,
        amplitudes: w,
    };
    let residual = kernel
        .iter()
        .map(|g| {
            apply_b(g, &psi.amplitudes)
                .iter()
                .map(|a| a.norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    if residual > tol::KERNEL_GAP {
        return Err(Error::JointKernel(format!(
            "annihilation residual {residual:e}"
        )));
    }
    psi.fix_phase();
    Ok(psi)
}

/// A creation or annihilation symbol in a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    Create(usize),
    Annihilate(usize),
}

/// Expectations of the quasi-free state `phi_S` computed on an explicit
/// Fock vector (purified when `S` is not a projection).
#[derive(Debug, Clone)]
pub struct QuasiFreeOracle {
    sites: usize,
    fock_sites: usize,
    psi: FockVector,
}

impl QuasiFreeOracle {
    pub fn new(s: &CovarianceOperator) -> Result<Self> {
        let n = s.sites();
        let fock_sites = if s.is_projection() { n } else { 2 * n };
        if fock_sites > MAX_STATE_SITES {
            return Err(Error::TooLarge {
                what: "oracle Fock sites",
                size: fock_sites,
                limit: MAX_STATE_SITES,
            });
        }
        let psi = if s.is_projection() {
            state_vector(&ProjectionOperator::new(s.clone())?)?
        } else {
            state_vector(&purify(s)?.standard)?
        };
        Ok(Self {
            sites: n,
            fock_sites,
            psi,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn state(&self) -> &FockVector {
        &self.psi
    }

    /// `phi_S(w_1 w_2 ... w_k)`.
    pub fn expect(&self, word: &[Symbol]) -> Result<C64> {
        let mut v = self.psi.amplitudes.clone();
        for sym in word.iter().rev() {
            let x = match *sym {
                Symbol::Create(x) | Symbol::Annihilate(x) => x,
            };
            if x >= self.sites {
                return Err(Error::SiteOutOfRange {
                    index: x,
                    len: self.sites,
                });
            }
            v = match *sym {
                Symbol::Create(x) => create(x, &v),
                Symbol::Annihilate(x) => annihilate(x, &v),
            };
        }
        Ok(self.psi.inner(&v))
    }

    fn embed(&self, f: &CVector) -> Result<CVector> {
        let n = self.sites;
        if f.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                found: f.len(),
            });
        }
        let m = self.fock_sites;
        let mut g = CVector::zeros(2 * m);
        for x in 0..n {
            g[x] = f[x];
            g[m + x] = f[n + x];
        }
        Ok(g)
    }

    /// `phi_S(B(f_1) ... B(f_k))`.
    pub fn expect_b(&self, fs: &[CVector]) -> Result<C64> {
        let mut v = self.psi.amplitudes.clone();
        for f in fs.iter().rev() {
            v = apply_b(&self.embed(f)?, &v);
        }
        Ok(self.psi.inner(&v))
    }

    /// `rho(x_1..x_k) = phi(a*_{x1} ... a*_{xk} a_{xk} ... a_{x1})`.
    pub fn correlation(&self, points: &[usize]) -> Result<C64> {
        let mut word: Vec<Symbol> = points.iter().map(|&x| Symbol::Create(x)).collect();
        word.extend(points.iter().rev().map(|&x| Symbol::Annihilate(x)));
        self.expect(&word)
    }
}

/// `phi_S(word)` through [`QuasiFreeOracle`].
pub fn oracle_expect(s: &CovarianceOperator, word: &[Symbol]) -> Result<C64> {
    QuasiFreeOracle::new(s)?.expect(word)
}

/// Both sides of Wick's formula for `phi_S(B(f_1) ... B(f_k))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickReport {
    pub oracle: C64,
    pub pairing_sum: C64,
    pub deviation: f64,
}

/// Largest product length accepted by [`verify_wick`].
pub const MAX_WICK_FACTORS: usize = 8;

/// Compares the oracle moment with
/// `(-1)^{m(m-1)/2} sum_sigma sgn(sigma) prod_i phi(B_{sigma(i)} B_{sigma(i+m)})`,
/// the sum over `sigma(1) < ... < sigma(m)`, `sigma(i) < sigma(i+m)`.
/// Odd products have pairing sum zero.
pub fn verify_wick(s: &CovarianceOperator, fs: &[CVector]) -> Result<WickReport> {
    if fs.len() > MAX_WICK_FACTORS {
        return Err(Error::TooLarge {
            what: "Wick product length",
            size: fs.len(),
            limit: MAX_WICK_FACTORS,
        });
    }
    let oracle = QuasiFreeOracle::new(s)?.expect_b(fs)?;
    let pairing_sum = wick_pairing_sum(s.matrix(), fs);
    Ok(WickReport {
        oracle,
        pairing_sum,
        deviation: (oracle - pairing_sum).norm(),
    })
}

/// The pairing side of Wick's formula, two-point values `(Gamma f_i, S f_j)`.
pub fn wick_pairing_sum(s: &CMatrix, fs: &[CVector]) -> C64 {
    let k = fs.len();
    if k % 2 == 1 {
        return ZERO;
    }
    let m = k / 2;
    let two = |i: usize, j: usize| gamma_vec(&fs[i]).dotc(&(s * &fs[j]));
    let global = if (m * (m.saturating_sub(1)) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let mut total = ZERO;
    for_each_pairing(k, &mut |firsts: &[usize], seconds: &[usize]| {
        let mut perm: Vec<usize> = firsts.to_vec();
        perm.extend_from_slice(seconds);
        let mut prod = c(permutation_sign(&perm));
        for i in 0..m {
            prod *= two(firsts[i], seconds[i]);
        }
        total += prod;
    });
    total * global
}

/// Visits every perfect matching of `0..k` as parallel lists of first and
/// second elements, firsts increasing.
fn for_each_pairing(k: usize, visit: &mut dyn FnMut(&[usize], &[usize])) {
    fn rec(
        free: &mut Vec<usize>,
        firsts: &mut Vec<usize>,
        seconds: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize], &[usize]),
    ) {
        if free.is_empty() {
            visit(firsts, seconds);
            return;
        }
        let a = free.remove(0);
        for idx in 0..free.len() {
            let b = free.remove(idx);
            firsts.push(a);
            seconds.push(b);
            rec(free, firsts, seconds, visit);
            firsts.pop();
            seconds.pop();
            free.insert(idx, b);
        }
        free.insert(0, a);
    }
    let mut free: Vec<usize> = (0..k).collect();
    rec(&mut free, &mut Vec::new(), &mut Vec::new(), visit);
}

pub(crate) fn permutation_sign(perm: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A finitely supported test-function system `Phi_0 + sum_k Phi_k`;
/// each term is an ordered tuple of distinct sites with its value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestFunctions {
    pub constant: f64,
    pub terms: Vec<(Vec<usize>, f64)>,
}

impl TestFunctions {
    /// `Phi_0 + sum over terms whose sites all lie in omega`.
    pub fn evaluate(&self, mask: u64) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|(pts, _)| pts.iter().all(|&x| mask >> x & 1 == 1))
                .map(|(_, v)| v)
                .sum::<f64>()
    }
}

/// Spectral data of `A_Phi = Phi_0 + sum Phi_k(x) a*_{x1}..a*_{xk} a_{xk}..a_{x1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    /// Diagonal of `A_Phi` in the `e_omega` basis, by mask.
    pub eigenvalues: Vec<f64>,
    /// Largest off-diagonal entry (zero when `e_omega` diagonalizes).
    pub off_diagonal: f64,
    /// Largest gap between the diagonal and `Phi` summed over subsets of omega.
    pub formula_deviation: f64,
    /// Smallest eigenvalue of the dense matrix.
    pub min_eigenvalue: f64,
}

/// Builds `A_Phi` from the CAR generators and checks that the wedge basis
/// diagonalizes it with the combinatorial eigenvalues.
pub fn positivity_eigenbasis(space: &FockSpace, phi: &TestFunctions) -> Result<PositivityReport> {
    let n = space.sites();
    if n > MAX_STATE_SITES {
        return Err(Error::TooLarge {
            what: "positivity check sites",
            size: n,
            limit: MAX_STATE_SITES,
        });
    }
    let dim = space.dim();
    let mut op = FockOperator::identity(dim).scale(c(phi.constant));
    for (pts, v) in &phi.terms {
        for (i, &x) in pts.iter().enumerate() {
            if x >= n {
                return Err(Error::SiteOutOfRange { index: x, len: n });
            }
            if pts[..i].contains(&x) {
                return Err(Error::DuplicatePoint(x));
            }
        }
        let mut t = FockOperator::identity(dim);
        for &x in pts.iter() {
            t = t.matmul(space.a_dag(x));
        }
        for &x in pts.iter().rev() {
            t = t.matmul(space.a(x));
        }
        op = op.combine(c(1.0), &t, c(*v));
    }
    let dense = op.to_dense();
    let eigenvalues: Vec<f64> = (0..dim).map(|i| dense[(i, i)].re).collect();
    let mut off_diagonal = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                off_diagonal = off_diagonal.max(dense[(i, j)].norm());
            }
        }
    }
    let formula_deviation = (0..dim)
        .map(|m| (eigenvalues[m] - phi.evaluate(m as u64)).abs())
        .fold(0.0, f64::max);
    let (spec, _) = eigh(&dense);
    Ok(PositivityReport {
        eigenvalues,
        off_diagonal,
        formula_deviation,
        min_eigenvalue: spec.first().cloned().unwrap_or(0.0),
    })
}
