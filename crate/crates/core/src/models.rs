//! Concrete families: KMS covariances of a pairing Hamiltonian, projections
//! from orthogonal polynomial ensembles, Schur measures and shifted Schur
//! measures.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::covariance::{
    validate_covariance, validate_projection, CovarianceOperator, GroundSet, ProjectionOperator,
};
use crate::linalg::{c, conj, hermitian_fn, range_basis};
use crate::measure::{Configuration, MeasureTable, MAX_ENUMERATION_SITES};
use crate::skewalg::{pfaffian_of, PfaffianKernel};
use crate::{CMatrix, CVector, Error, Label, Result, C64};

// ---------------------------------------------------------------- KMS

/// Pairing Hamiltonian data on a ground set closed under `x -> -x`:
/// `Upsilon` even and real, `Delta` odd and complex, inverse temperature
/// `beta` (may be infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct KmsSpec {
    ground: GroundSet,
    mirror: Vec<usize>,
    upsilon: Vec<f64>,
    delta: Vec<C64>,
    beta: f64,
}

const PARITY_TOL: f64 = 1e-12;

impl KmsSpec {
    pub fn new(ground: GroundSet, upsilon: Vec<f64>, delta: Vec<C64>, beta: f64) -> Result<Self> {
        let n = ground.len();
        for len in [upsilon.len(), delta.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if beta.is_nan() {
            return Err(Error::InvalidArgument("beta is NaN".into()));
        }
        let mut mirror = Vec::with_capacity(n);
        for i in 0..n {
            let j = ground.mirror(i).ok_or_else(|| {
                Error::InvalidArgument(format!("site {i} has no mirror in the window"))
            })?;
            if (upsilon[i] - upsilon[j]).abs() > PARITY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "Upsilon not even at site {i}"
                )));
            }
            if (delta[i] + delta[j]).norm() > PARITY_TOL {
                return Err(Error::InvalidArgument(format!("Delta not odd at site {i}")));
            }
            if upsilon[i] * upsilon[i] + delta[i].norm_sqr() == 0.0 {
                return Err(Error::DegenerateBlock(i));
            }
            mirror.push(j);
        }
        Ok(Self {
            ground,
            mirror,
            upsilon,
            delta,
            beta,
        })
    }

    /// Samples `Upsilon` and `Delta` on the symmetric window of `2m`
    /// half-integers.
    pub fn from_fns(
        m: usize,
        upsilon: impl Fn(f64) -> f64,
        delta: impl Fn(f64) -> C64,
        beta: f64,
    ) -> Result<Self> {
        let ground = GroundSet::symmetric_window(m);
        let xs: Vec<f64> = ground.labels().iter().map(label_f64).collect();
        let u = xs.iter().map(|&x| upsilon(x)).collect();
        let d = xs.iter().map(|&x| delta(x)).collect();
        Self::new(ground, u, d, beta)
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn sites(&self) -> usize {
        self.ground.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self {
            beta,
            ..self.clone()
        }
    }

    /// `lambda_x = sqrt(Upsilon^2 + |Delta|^2)`.
    pub fn lambda(&self, i: usize) -> f64 {
        libm::sqrt(self.upsilon[i] * self.upsilon[i] + self.delta[i].norm_sqr())
    }

    /// `H` in the `[u; v]` layout; `H_x` acts on `(e_x, 0), (0, e_-x)`.
    pub fn hamiltonian(&self) -> CMatrix {
        let n = self.sites();
        let mut h = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let j = n + self.mirror[i];
            h[(i, i)] = c(self.upsilon[i]);
            h[(i, j)] = self.delta[i];
            h[(j, i)] = self.delta[i].conj();
            h[(j, j)] = c(-self.upsilon[i]);
        }
        h
    }

    fn tanh_half(&self, lambda: f64) -> f64 {
        if self.beta.is_infinite() {
            self.beta.signum()
        } else {
            libm::tanh(self.beta * lambda / 2.0)
        }
    }
}

pub(crate) fn label_f64(l: &Label) -> f64 {
    *l.numer() as f64 / *l.denom() as f64
}

/// `S_beta = (1 + e^{-beta H})^{-1}` by spectral calculus on the full
/// matrix; `beta = +-inf` gives the spectral projections of `H`.
pub fn kms_covariance(spec: &KmsSpec) -> Result<CovarianceOperator> {
    let beta = spec.beta;
    let f = move |e: f64| {
        if beta.is_infinite() {
            if beta * e > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            1.0 / (1.0 + libm::exp(-beta * e))
        }
    };
    validate_covariance(&hermitian_fn(&spec.hamiltonian(), f))
}

/// Closed-form kernel of `S_beta`. With `t = tanh(beta lambda / 2)`:
/// `K11(x,-x) = -t conj Delta(x) / (2 lambda)`, `K12(x,x) = (1 - t Upsilon / lambda) / 2`,
/// `K22(x,-x) = t Delta(x) / (2 lambda)`, `K21 = -K12^T`, other entries zero.
pub fn kms_kernel(spec: &KmsSpec) -> PfaffianKernel {
    let n = spec.sites();
    let mut k = CMatrix::zeros(2 * n, 2 * n);
    for x in 0..n {
        let lam = spec.lambda(x);
        let t = spec.tanh_half(lam);
        let mx = spec.mirror[x];
        let occ = c(0.5 * (1.0 - t * spec.upsilon[x] / lam));
        k[(2 * x, 2 * x + 1)] = occ;
        k[(2 * x + 1, 2 * x)] = -occ;
        k[(2 * x, 2 * mx)] += -spec.delta[x].conj() * (t / (2.0 * lam));
        k[(2 * x + 1, 2 * mx + 1)] += spec.delta[x] * (t / (2.0 * lam));
    }
    PfaffianKernel::from_interleaved(k).expect("closed form is skew")
}

/// Partial sums of `Tr((S_inf - P0)^2)` over the windows `|x| < r`,
/// `r = 1, ..., m`: the closed form per pair and, for comparison, the
/// Frobenius distance computed from `kms_covariance` on each window.
#[derive(Debug, Clone, PartialEq)]
pub struct HsDiagnostic {
    pub radii: Vec<usize>,
    pub closed_form: Vec<f64>,
    pub frobenius: Vec<f64>,
}

/// Summand `(1 - |u+|^2)^2 + 2 |u+_{-x} u-_x|^2 + |u-|^4` at site `i`.
fn hs_summand(spec: &KmsSpec, i: usize) -> f64 {
    let lam = spec.lambda(i);
    let up = 0.5 * (1.0 + spec.upsilon[i] / lam);
    let um = 0.5 * (1.0 - spec.upsilon[i] / lam);
    let j = spec.mirror[i];
    let up_mirror = 0.5 * (1.0 + spec.upsilon[j] / spec.lambda(j));
    (1.0 - up) * (1.0 - up) + 2.0 * up_mirror * um + um * um
}

pub fn kms_hs_diagnostic(spec: &KmsSpec) -> Result<HsDiagnostic> {
    let labels: Vec<f64> = spec.ground.labels().iter().map(label_f64).collect();
    let m = labels
        .iter()
        .map(|x| libm::ceil(x.abs()) as usize)
        .max()
        .unwrap_or(0);
    let mut out = HsDiagnostic {
        radii: Vec::new(),
        closed_form: Vec::new(),
        frobenius: Vec::new(),
    };
    for r in 1..=m {
        let keep: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i].abs() < r as f64)
            .collect();
        let sub = KmsSpec::new(
            spec.ground.subset(&keep),
            keep.iter().map(|&i| spec.upsilon[i]).collect(),
            keep.iter().map(|&i| spec.delta[i]).collect(),
            f64::INFINITY,
        )?;
        let closed: f64 = (0..sub.sites()).map(|i| hs_summand(&sub, i)).sum();
        let s = kms_covariance(&sub)?;
        let p0 = crate::covariance::vacuum(sub.sites());
        let d = crate::covariance::hs_distance(s.matrix(), p0.matrix())?;
        out.radii.push(r);
        out.closed_form.push(closed);
        out.frobenius.push(d * d);
    }
    Ok(out)
}

// ---------------------------------------------------------------- OPE

/// `P_v = (I - conj K_v) + K_v` with `K_v` the orthogonal projection onto
/// the span of `vectors` (all of length `n`).
pub fn ope_projection(vectors: &[CVector]) -> Result<ProjectionOperator> {
    let n = check_vectors(vectors)?;
    let basis = range_basis(&columns(vectors, n), 1e-10);
    if basis.ncols() != vectors.len() {
        return Err(Error::RankDeficient {
            rank: basis.ncols(),
            expected: vectors.len(),
        });
    }
    let kv = &basis * basis.adjoint();
    let mut p = CMatrix::zeros(2 * n, 2 * n);
    let top = CMatrix::identity(n, n) - conj(&kv);
    p.view_mut((0, 0), (n, n)).copy_from(&top);
    p.view_mut((n, n), (n, n)).copy_from(&kv);
    validate_projection(&p)
}

fn check_vectors(vectors: &[CVector]) -> Result<usize> {
    let n = vectors.first().map_or(0, |v| v.len());
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    Ok(n)
}

fn columns(vectors: &[CVector], n: usize) -> CMatrix {
    CMatrix::from_fn(n, vectors.len(), |r, k| vectors[k][r])
}

/// `M(omega) = |det V_omega|^2 / det(V* V)` for `|omega| = N`, zero otherwise;
/// equal to `|det(phi_i(x_j))|^2` for any orthonormalization `phi` of the span.
pub fn ope_weights(vectors: &[CVector]) -> Result<MeasureTable> {
    let n = check_vectors(vectors)?;
    if n > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what: "ope weight enumeration",
            size: n,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    let v = columns(vectors, n);
    let gram = (v.adjoint() * &v).determinant().re;
    if gram <= 1e-300 {
        return Err(Error::RankDeficient {
            rank: 0,
            expected: vectors.len(),
        });
    }
    let big_n = vectors.len();
    let w = (0..1u64 << n)
        .map(|mask| {
            if mask.count_ones() as usize != big_n {
                return 0.0;
            }
            let rows: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let sub = CMatrix::from_fn(big_n, big_n, |r, k| v[(rows[r], k)]);
            sub.determinant().norm_sqr() / gram
        })
        .collect();
    MeasureTable::new(n, w)
}

/// `v_i(x) = x^{N-i} sqrt(W(x))`, `i = 1..N`.
pub fn vandermonde_vectors(points: &[f64], weight: &[f64], big_n: usize) -> Result<Vec<CVector>> {
    if points.len() != weight.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: weight.len(),
        });
    }
    if let Some(w) = weight.iter().find(|&&w| w < 0.0) {
        return Err(Error::InvalidArgument(format!("negative weight {w}")));
    }
    Ok((1..=big_n)
        .map(|i| {
            CVector::from_iterator(
                points.len(),
                points
                    .iter()
                    .zip(weight)
                    .map(|(&x, &w)| c(libm::pow(x, (big_n - i) as f64) * libm::sqrt(w))),
            )
        })
        .collect())
}

// ---------------------------------------------------- symmetric functions

/// Thoma specialization `(alpha; beta)` with `gamma = 1 - sum alpha - sum beta`
/// and `p_1 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Specialization {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

fn check_sequence(name: &str, s: &[f64]) -> Result<()> {
    for (i, &a) in s.iter().enumerate() {
        if a.is_nan() || a < 0.0 {
            return Err(Error::InvalidSpecialization(format!(
                "{name}[{i}] = {a} is negative"
            )));
        }
        if i > 0 && a > s[i - 1] {
            return Err(Error::InvalidSpecialization(format!(
                "{name} not nonincreasing at {i}"
            )));
        }
    }
    if s.first().is_some_and(|&a| a >= 1.0) {
        return Err(Error::InvalidSpecialization(format!(
            "{name}_1 must be < 1"
        )));
    }
    Ok(())
}

impl Specialization {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        check_sequence("alpha", &alpha)?;
        check_sequence("beta", &beta)?;
        let total: f64 = alpha.iter().chain(&beta).sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidSpecialization(format!(
                "sum of parameters {total} exceeds 1"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `alpha = beta = 0`, `gamma = 1`.
    pub fn plancherel() -> Self {
        Self {
            alpha: Vec::new(),
            beta: Vec::new(),
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> f64 {
        1.0 - self.alpha.iter().chain(&self.beta).sum::<f64>()
    }

    /// `p_n = sum alpha^n + (-1)^{n-1} sum beta^n` for `n >= 2`, `p_1 = 1`.
    pub fn p(&self, n: usize) -> f64 {
        if n == 1 {
            return 1.0;
        }
        let a: f64 = self.alpha.iter().map(|&a| libm::pow(a, n as f64)).sum();
        let b: f64 = self.beta.iter().map(|&b| libm::pow(b, n as f64)).sum();
        if n.is_multiple_of(2) {
            a - b
        } else {
            a + b
        }
    }
}

/// `[0, p_1, ..., p_N]` (index 0 unused).
pub fn power_sums(rho: &Specialization, big_n: usize) -> Vec<f64> {
    (0..=big_n)
        .map(|n| if n == 0 { 0.0 } else { rho.p(n) })
        .collect()
}

/// `h_0, ..., h_N` by Newton's identities `n h_n = sum_k p_k h_{n-k}`.
pub fn complete_homogeneous(rho: &Specialization, big_n: usize) -> Vec<f64> {
    newton(&power_sums(rho, big_n), |_| 1.0)
}

// n f_n = sum_k w(k) p_k f_{n-k}, f_0 = 1.
fn newton(p: &[f64], w: impl Fn(usize) -> f64) -> Vec<f64> {
    let big_n = p.len() - 1;
    let mut h = vec![0.0; big_n + 1];
    h[0] = 1.0;
    for n in 1..=big_n {
        h[n] = (1..=n).map(|k| w(k) * p[k] * h[n - k]).sum::<f64>() / n as f64;
    }
    h
}

/// `exp(sum_n w(n) p_n^2 / n)`. For `n >= 2`, `|p_n| <= count * r^n` with
/// `r < 1` the largest parameter; the sum stops once that bound is below
/// roundoff.
fn exp_sum(count: usize, r: f64, rho_p: impl Fn(usize) -> f64, w: impl Fn(usize) -> f64) -> f64 {
    let mut s = w(1) * rho_p(1) * rho_p(1);
    let mut n = 2;
    while count > 0 && (count as f64) * libm::pow(r, n as f64) > 1e-17 {
        let p = rho_p(n);
        s += w(n) * p * p / n as f64;
        n += 1;
    }
    libm::exp(s)
}

fn largest(s: &[f64]) -> f64 {
    s.first().copied().unwrap_or(0.0)
}

// ---------------------------------------------------------------- partitions

/// Nonincreasing positive parts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.windows(2).any(|w| w[0] < w[1]) || parts.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "{parts:?} is not a partition"
            )));
        }
        Ok(Self { parts })
    }

    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn size(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn is_strict(&self) -> bool {
        self.parts.windows(2).all(|w| w[0] > w[1])
    }
}

/// Strictly decreasing positive parts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrictPartition(Partition);

impl StrictPartition {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        let p = Partition::new(parts)?;
        if !p.is_strict() {
            return Err(Error::InvalidArgument(format!(
                "{:?} is not strict",
                p.parts
            )));
        }
        Ok(Self(p))
    }

    pub fn partition(&self) -> &Partition {
        &self.0
    }

    pub fn parts(&self) -> &[u32] {
        self.0.parts()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn size(&self) -> u32 {
        self.0.size()
    }
}

/// All partitions of `n`, reverse lexicographic.
pub fn partitions_of(n: u32) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(rest: u32, max: u32, strict: bool, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=rest.min(max)).rev() {
            cur.push(part);
            let next = if strict { part - 1 } else { part };
            rec(rest - part, next, strict, cur, out);
            cur.pop();
        }
    }
    rec(n, n, false, &mut cur, &mut out);
    out.into_iter().map(|parts| Partition { parts }).collect()
}

/// All partitions with `|lambda| <= max_size`, by size.
pub fn partitions_up_to(max_size: u32) -> Vec<Partition> {
    (0..=max_size).flat_map(partitions_of).collect()
}

/// All strict partitions with `|lambda| <= max_size`, by size.
pub fn strict_partitions_up_to(max_size: u32) -> Vec<StrictPartition> {
    (0..=max_size)
        .flat_map(|n| {
            partitions_of(n)
                .into_iter()
                .filter(Partition::is_strict)
                .map(StrictPartition)
        })
        .collect()
}

// ---------------------------------------------------------------- Schur

fn det_real(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        1.0
    } else {
        m.determinant()
    }
}

/// `s_lambda = det(h_{lambda_i - i + j})` for precomputed `h` (long enough).
pub fn schur_from_h(lambda: &Partition, h: &[f64]) -> f64 {
    let l = lambda.len();
    let at = |k: i64| if k < 0 { 0.0 } else { h[k as usize] };
    det_real(DMatrix::from_fn(l, l, |i, j| {
        at(lambda.parts[i] as i64 - i as i64 + j as i64)
    }))
}

/// `s_lambda(rho)`.
pub fn schur(lambda: &Partition, rho: &Specialization) -> f64 {
    let h = complete_homogeneous(rho, (lambda.size() as usize) + lambda.len());
    schur_from_h(lambda, &h)
}

/// `Z = exp(sum p_n^2 / n)`.
pub fn schur_normalization(rho: &Specialization) -> f64 {
    exp_sum(
        rho.alpha.len() + rho.beta.len(),
        largest(&rho.alpha).max(largest(&rho.beta)),
        |n| rho.p(n),
        |_| 1.0,
    )
}

/// `M(lambda) = s_lambda(rho)^2 / Z`.
pub fn schur_weight(lambda: &Partition, rho: &Specialization) -> f64 {
    let s = schur(lambda, rho);
    s * s / schur_normalization(rho)
}

/// Weights of all partitions with `|lambda| <= max_size`, plus the tail mass
/// `1 - sum`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable<P> {
    pub entries: Vec<(P, f64)>,
    pub normalization: f64,
    pub tail_mass: f64,
}

pub fn schur_table(rho: &Specialization, max_size: u32) -> PartitionTable<Partition> {
    let h = complete_homogeneous(rho, 2 * max_size as usize + 1);
    let z = schur_normalization(rho);
    let entries: Vec<(Partition, f64)> = partitions_up_to(max_size)
        .into_iter()
        .map(|l| {
            let s = schur_from_h(&l, &h);
            let w = s * s / z;
            (l, w)
        })
        .collect();
    let tail_mass = 1.0 - entries.iter().map(|e| e.1).sum::<f64>();
    PartitionTable {
        entries,
        normalization: z,
        tail_mass,
    }
}

/// `M(lambda) = {lambda_i - i + 1/2}` intersected with the window of
/// half-integers `lo + 1/2, ..., hi - 1/2`. The window must contain every
/// part that differs from the vacuum pattern: `lo <= -len(lambda)` and
/// `hi >= lambda_1`.
pub fn embed(lambda: &Partition, lo: i64, hi: i64) -> Result<Configuration> {
    let l = lambda.len() as i64;
    let top = lambda.parts.first().copied().unwrap_or(0) as i64;
    let n = (hi - lo).max(0) as usize;
    if lo > -l || hi < top || n > 64 {
        return Err(Error::WindowTooSmall {
            needed_low: -l,
            needed_high: top,
        });
    }
    let mut mask = 0u64;
    for i in 1..=(hi - lo) {
        let part = lambda.parts.get(i as usize - 1).copied().unwrap_or(0) as i64;
        let k = part - i;
        if k < lo {
            break;
        }
        mask |= 1 << (k - lo);
    }
    Ok(Configuration::new(mask, n))
}

/// Schur measure conditioned on partitions inside the `rows x cols` box,
/// as a table on the window `-rows + 1/2, ..., cols - 1/2`. Adjacent
/// transpositions of window sites keep the box, so the support is
/// permutation invariant. Also returns the mass `1 - sum_box s^2 / Z` lost
/// to the truncation.
pub fn schur_box_measure(
    rho: &Specialization,
    rows: u32,
    cols: u32,
) -> Result<(MeasureTable, f64)> {
    let n = (rows + cols) as usize;
    if n > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what: "schur box window",
            size: n,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    let h = complete_homogeneous(rho, 2 * (rows * cols) as usize + 1);
    let mut w = vec![0.0; 1 << n];
    for l in partitions_up_to(rows * cols) {
        if l.len() as u32 <= rows && l.parts.first().is_none_or(|&p| p <= cols) {
            let s = schur_from_h(&l, &h);
            w[embed(&l, -(rows as i64), cols as i64)?.mask as usize] = s * s;
        }
    }
    let captured: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= captured;
    }
    Ok((
        MeasureTable::new(n, w)?,
        1.0 - captured / schur_normalization(rho),
    ))
}

/// Integer positions `lambda_i - i` for `i = 1..depth` (label = position + 1/2);
/// everything below `-depth` is implicitly occupied.
fn maya(lambda: &Partition, depth: usize) -> Vec<i64> {
    (1..=depth)
        .map(|i| lambda.parts.get(i - 1).copied().unwrap_or(0) as i64 - i as i64)
        .collect()
}

fn from_maya(points: &[i64]) -> Partition {
    let mut pts = points.to_vec();
    pts.sort_unstable_by(|a, b| b.cmp(a));
    let mut parts: Vec<u32> = pts
        .iter()
        .enumerate()
        .map(|(i, &p)| (p + i as i64 + 1) as u32)
        .collect();
    while parts.last() == Some(&0) {
        parts.pop();
    }
    Partition { parts }
}

/// Truncated Schur state: partitions with `|lambda| <= L` and their
/// `s_lambda(rho)`, normalized by the truncated sum.
#[derive(Debug, Clone)]
pub struct SchurTruncation {
    schur: BTreeMap<Partition, f64>,
    z_trunc: f64,
    tail_mass: f64,
}

impl SchurTruncation {
    pub fn new(rho: &Specialization, max_size: u32) -> Self {
        let h = complete_homogeneous(rho, 2 * max_size as usize + 1);
        let schur: BTreeMap<Partition, f64> = partitions_up_to(max_size)
            .into_iter()
            .map(|l| {
                let s = schur_from_h(&l, &h);
                (l, s)
            })
            .collect();
        let z_trunc: f64 = schur.values().map(|s| s * s).sum();
        let tail_mass = 1.0 - z_trunc / schur_normalization(rho);
        Self {
            schur,
            z_trunc,
            tail_mass,
        }
    }

    /// `1 - Z_L / Z`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    fn depth(&self, reach: i64) -> usize {
        let l = self.schur.keys().map(|p| p.size()).max().unwrap_or(0) as i64;
        (l + reach.abs() + 2) as usize
    }

    /// `phi(a*_x a_y)` for half-integer labels `x = kx + 1/2`, `y = ky + 1/2`.
    pub fn two_point(&self, kx: i64, ky: i64) -> f64 {
        let depth = self.depth(kx.abs().max(ky.abs()));
        let mut acc = 0.0;
        for (mu, &s_mu) in &self.schur {
            let pts = maya(mu, depth);
            if !pts.contains(&ky) {
                continue;
            }
            if kx == ky {
                acc += s_mu * s_mu;
                continue;
            }
            if pts.contains(&kx) {
                continue;
            }
            let (lo, hi) = if kx < ky { (kx, ky) } else { (ky, kx) };
            let between = pts.iter().filter(|&&p| p > lo && p < hi).count();
            let sign = if between % 2 == 0 { 1.0 } else { -1.0 };
            let moved: Vec<i64> = pts.iter().map(|&p| if p == ky { kx } else { p }).collect();
            if let Some(&s_la) = self.schur.get(&from_maya(&moved)) {
                acc += sign * s_la * s_mu;
            }
        }
        acc / self.z_trunc
    }

    /// `rho_k` for the given label positions (all `k + 1/2`).
    pub fn correlation(&self, ks: &[i64]) -> f64 {
        let reach = ks.iter().map(|k| k.abs()).max().unwrap_or(0);
        let depth = self.depth(reach);
        let mut acc = 0.0;
        for (mu, &s) in &self.schur {
            let pts = maya(mu, depth);
            if ks.iter().all(|k| pts.contains(k)) {
                acc += s * s;
            }
        }
        acc / self.z_trunc
    }
}

/// Wick factorization check `rho_2(x,y) = rho_1(x) rho_1(y) - phi(a*_x a_y) phi(a*_y a_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiFreeReport {
    pub max_deviation: f64,
    pub tail_mass: f64,
    pub pairs: usize,
}

/// Checks every pair from `sites` (half-integer positions `k + 1/2`).
pub fn verify_schur_quasifree(
    rho: &Specialization,
    sites: &[i64],
    max_size: u32,
) -> QuasiFreeReport {
    let t = SchurTruncation::new(rho, max_size);
    let mut dev: f64 = 0.0;
    let mut pairs = 0;
    for (i, &x) in sites.iter().enumerate() {
        for &y in &sites[i..] {
            let rho2 = if x == y {
                t.correlation(&[x])
            } else {
                t.correlation(&[x, y])
            };
            let (r1x, r1y) = (t.correlation(&[x]), t.correlation(&[y]));
            let wick = if x == y {
                r1x
            } else {
                r1x * r1y - t.two_point(x, y) * t.two_point(y, x)
            };
            dev = dev.max((rho2 - wick).abs());
            pairs += 1;
        }
    }
    QuasiFreeReport {
        max_deviation: dev,
        tail_mass: t.tail_mass(),
        pairs,
    }
}

// ---------------------------------------------------------------- Schur Q

/// Specialization for Schur Q-functions: `p_1 = 1`, `p_n = sum alpha^n`
/// for odd `n > 1` (even power sums do not enter).
#[derive(Debug, Clone, PartialEq)]
pub struct QSpecialization {
    alpha: Vec<f64>,
}

impl QSpecialization {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        check_sequence("alpha", &alpha)?;
        let total: f64 = alpha.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidSpecialization(format!(
                "sum of alpha {total} exceeds 1"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn p(&self, n: usize) -> f64 {
        if n == 1 {
            1.0
        } else if n.is_multiple_of(2) {
            0.0
        } else {
            self.alpha.iter().map(|&a| libm::pow(a, n as f64)).sum()
        }
    }
}

/// `q_0, ..., q_N` from `n q_n = sum_{k odd} 2 p_k q_{n-k}`.
pub fn q_series(rho: &QSpecialization, big_n: usize) -> Vec<f64> {
    let p: Vec<f64> = (0..=big_n)
        .map(|n| if n == 0 { 0.0 } else { rho.p(n) })
        .collect();
    newton(&p, |k| if k % 2 == 1 { 2.0 } else { 0.0 })
}

/// `Q_(r,s) = q_r q_s + 2 sum_{i=1}^{s} (-1)^i q_{r+i} q_{s-i}`.
fn q_two_row(q: &[f64], r: usize, s: usize) -> f64 {
    let mut v = q[r] * q[s];
    for i in 1..=s {
        let sign = if i % 2 == 0 { 2.0 } else { -2.0 };
        v += sign * q[r + i] * q[s - i];
    }
    v
}

/// `Q_lambda` as the Pfaffian of `[Q_(lambda_i, lambda_j)]`, padding odd
/// length with a zero part.
pub fn schur_q_from_series(lambda: &StrictPartition, q: &[f64]) -> f64 {
    let mut parts: Vec<usize> = lambda.parts().iter().map(|&p| p as usize).collect();
    if parts.len() % 2 == 1 {
        parts.push(0);
    }
    let m = parts.len();
    if m == 0 {
        return 1.0;
    }
    let a = CMatrix::from_fn(m, m, |i, j| {
        if i == j {
            c(0.0)
        } else if i < j {
            c(q_two_row(q, parts[i], parts[j]))
        } else {
            c(-q_two_row(q, parts[j], parts[i]))
        }
    });
    pfaffian_of(&a).expect("constructed skew").re
}

pub fn schur_q(lambda: &StrictPartition, rho: &QSpecialization) -> f64 {
    let q = q_series(rho, 2 * lambda.size() as usize + 1);
    schur_q_from_series(lambda, &q)
}

/// `Z_Q = exp(sum_{n odd} 2 p_n^2 / n)`: the closed-form candidate; tests
/// check it against partial sums of `2^{-len} Q_lambda^2`.
pub fn schur_q_normalization(rho: &QSpecialization) -> f64 {
    exp_sum(
        rho.alpha.len(),
        largest(&rho.alpha),
        |n| rho.p(n),
        |n| if n % 2 == 1 { 2.0 } else { 0.0 },
    )
}

/// `M(lambda) = 2^{-len} Q_lambda^2 / Z_Q`.
pub fn schur_q_weight(lambda: &StrictPartition, rho: &QSpecialization) -> f64 {
    let q = schur_q(lambda, rho);
    libm::ldexp(q * q, -(lambda.len() as i32)) / schur_q_normalization(rho)
}

pub fn schur_q_table(rho: &QSpecialization, max_size: u32) -> PartitionTable<StrictPartition> {
    let q = q_series(rho, 2 * max_size as usize + 1);
    let z = schur_q_normalization(rho);
    let entries: Vec<(StrictPartition, f64)> = strict_partitions_up_to(max_size)
        .into_iter()
        .map(|l| {
            let v = schur_q_from_series(&l, &q);
            let w = libm::ldexp(v * v, -(l.len() as i32)) / z;
            (l, w)
        })
        .collect();
    let tail_mass = 1.0 - entries.iter().map(|e| e.1).sum::<f64>();
    PartitionTable {
        entries,
        normalization: z,
        tail_mass,
    }
}
