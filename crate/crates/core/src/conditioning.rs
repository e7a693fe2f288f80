//! Conditional measures: regularity, reduced projections, one-point kernel
//! updates and the sequential sampler built on them.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::covariance::{validate_projection, ProjectionOperator};
use crate::linalg::{c, eigh, select};
use crate::measure::{Configuration, MeasureTable};
use crate::skewalg::PfaffianKernel;
use crate::{tol, CMatrix, Error, Result, C64};

/// Sites conditioned to be occupied (`X`) and vacated (`X'`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConditionSpec {
    occupied: Vec<usize>,
    vacated: Vec<usize>,
}

impl ConditionSpec {
    pub fn new(occupied: Vec<usize>, vacated: Vec<usize>) -> Result<Self> {
        for (i, &x) in occupied.iter().enumerate() {
            if occupied[..i].contains(&x) {
                return Err(Error::DuplicatePoint(x));
            }
            if vacated.contains(&x) {
                return Err(Error::OverlappingCondition(x));
            }
        }
        for (i, &x) in vacated.iter().enumerate() {
            if vacated[..i].contains(&x) {
                return Err(Error::DuplicatePoint(x));
            }
        }
        Ok(Self { occupied, vacated })
    }

    pub fn occupied(&self) -> &[usize] {
        &self.occupied
    }

    pub fn vacated(&self) -> &[usize] {
        &self.vacated
    }

    fn check_range(&self, n: usize) -> Result<()> {
        match self.occupied.iter().chain(&self.vacated).find(|&&x| x >= n) {
            Some(&x) => Err(Error::SiteOutOfRange { index: x, len: n }),
            None => Ok(()),
        }
    }

    /// Sites left after conditioning, in ground-set order.
    pub fn remaining(&self, n: usize) -> Vec<usize> {
        (0..n)
            .filter(|x| !self.occupied.contains(x) && !self.vacated.contains(x))
            .collect()
    }

    fn masks(&self) -> (u64, u64) {
        let m = |v: &[usize]| v.iter().fold(0u64, |m, &x| m | 1 << x);
        (m(&self.occupied), m(&self.vacated))
    }
}

/// Blocks of `P` under `K = K_rest + K_x^+ + K_x^-`: `a` on `K_rest`,
/// `b1, b2` the columns `K_x^+, K_x^-` restricted to `K_rest`, `c1, c2` the
/// corresponding rows, and the `2 x 2` corner `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSplit {
    pub a: CMatrix,
    pub b1: CMatrix,
    pub b2: CMatrix,
    pub c1: CMatrix,
    pub c2: CMatrix,
    pub d11: C64,
    pub d12: C64,
    pub d21: C64,
    pub d22: C64,
}

/// Coordinates of the sites `keep` in the `[u; v]` layout.
fn doubled(keep: &[usize], n: usize) -> Vec<usize> {
    keep.iter()
        .cloned()
        .chain(keep.iter().map(|&x| n + x))
        .collect()
}

impl BlockSplit {
    pub fn new(p: &CMatrix, x: usize) -> Result<Self> {
        let n = p.nrows() / 2;
        if x >= n {
            return Err(Error::SiteOutOfRange { index: x, len: n });
        }
        let rest: Vec<usize> = (0..n).filter(|&y| y != x).collect();
        let r = doubled(&rest, n);
        let (xp, xm) = (x, n + x);
        Ok(Self {
            a: select(p, &r, &r),
            b1: select(p, &r, &[xp]),
            b2: select(p, &r, &[xm]),
            c1: select(p, &[xp], &r),
            c2: select(p, &[xm], &r),
            d11: p[(xp, xp)],
            d12: p[(xp, xm)],
            d21: p[(xm, xp)],
            d22: p[(xm, xm)],
        })
    }

    /// `a - b2 d22^{-1} c2 + b1 (1 - d11)^{-1} c1`: the single-site
    /// reduction for an occupied site.
    pub fn reduce_occupied(&self) -> CMatrix {
        &self.a - &self.b2 * &self.c2 / self.d22 + &self.b1 * &self.c1 / (c(1.0) - self.d11)
    }

    /// `a - b1 d11^{-1} c1 + b2 (1 - d22)^{-1} c2`: the vacated mirror.
    pub fn reduce_vacated(&self) -> CMatrix {
        &self.a - &self.b1 * &self.c1 / self.d11 + &self.b2 * &self.c2 / (c(1.0) - self.d22)
    }
}

/// True when `PK` meets `K_X^+ + K_{X'}^-` only in zero, i.e. the largest
/// eigenvalue of `P` compressed to that coordinate subspace is at most
/// `1 - tol::REGULARITY`.
pub fn is_regular(p: &ProjectionOperator, spec: &ConditionSpec) -> Result<bool> {
    let n = p.sites();
    spec.check_range(n)?;
    let coords: Vec<usize> = spec
        .occupied
        .iter()
        .cloned()
        .chain(spec.vacated.iter().map(|&x| n + x))
        .collect();
    if coords.is_empty() {
        return Ok(true);
    }
    let (vals, _) = eigh(&select(p.matrix(), &coords, &coords));
    Ok(vals.last().is_none_or(|&l| l <= 1.0 - tol::REGULARITY))
}

fn reduce_one(p: &CMatrix, x: usize, occupied: bool, label: usize) -> Result<CMatrix> {
    let split = BlockSplit::new(p, x)?;
    let denom = if occupied { split.d22.re } else { split.d11.re };
    if denom < tol::REGULARITY {
        return Err(Error::NotRegular {
            site: label,
            occupied,
        });
    }
    Ok(if occupied {
        split.reduce_occupied()
    } else {
        split.reduce_vacated()
    })
}

/// `P_{X,X'}` on the remaining sites (see [`ConditionSpec::remaining`]),
/// composed from single-site reductions: vacated sites first, then occupied,
/// each in the listed order.
pub fn reduce_projection(
    p: &ProjectionOperator,
    spec: &ConditionSpec,
) -> Result<ProjectionOperator> {
    let n = p.sites();
    spec.check_range(n)?;
    let mut labels: Vec<usize> = (0..n).collect();
    let mut m = p.matrix().clone();
    let steps = spec
        .vacated
        .iter()
        .map(|&x| (x, false))
        .chain(spec.occupied.iter().map(|&x| (x, true)));
    for (x, occ) in steps {
        let pos = labels
            .iter()
            .position(|&l| l == x)
            .expect("site still present");
        m = reduce_one(&m, pos, occ, x)?;
        labels.remove(pos);
    }
    validate_projection(&m)
}

/// One-point conditioning of a Pfaffian kernel. With `K_xx` the `2 x 2`
/// block at `x` and `d = K12(x,x)`, the occupied update is the Schur
/// complement `K(y,z) - K(y,x) K_xx^{-1} K(x,z)`; the vacated update is the
/// same with `J - K` in place of `K_xx` on the conditioned pair, giving
/// `K(y,z) - K(y,x) [[0, 1/(1-d)], [-1/(1-d), 0]] K(x,z)`.
pub fn condition_kernel(k: &PfaffianKernel, x: usize, occupied: bool) -> Result<PfaffianKernel> {
    let n = k.sites();
    if x >= n {
        return Err(Error::SiteOutOfRange { index: x, len: n });
    }
    let d = k.k12(x, x);
    let denom = if occupied { d } else { c(1.0) - d };
    if denom.re < tol::REGULARITY {
        return Err(Error::ConditioningImpossible {
            site: x,
            occupied,
            denominator: denom.re,
        });
    }
    // q is the middle 2x2 factor.
    let q = if occupied {
        [[c(0.0), -c(1.0) / denom], [c(1.0) / denom, c(0.0)]]
    } else {
        [[c(0.0), c(1.0) / denom], [-c(1.0) / denom, c(0.0)]]
    };
    let rest: Vec<usize> = (0..n).filter(|&y| y != x).collect();
    let m = rest.len();
    let mut out = CMatrix::zeros(2 * m, 2 * m);
    let left: Vec<[[C64; 2]; 2]> = rest.iter().map(|&y| mul2(&k.block(y, x), &q)).collect();
    for (i, &y) in rest.iter().enumerate() {
        for (j, &z) in rest.iter().enumerate() {
            let kyz = k.block(y, z);
            let corr = mul2(&left[i], &k.block(x, z));
            for a in 0..2 {
                for b in 0..2 {
                    out[(2 * i + a, 2 * j + b)] = kyz[a][b] - corr[a][b];
                }
            }
        }
    }
    PfaffianKernel::from_interleaved(out)
}

fn mul2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut r = [[c(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

/// Conditions a kernel on a whole spec (vacated first, then occupied).
/// The result lives on [`ConditionSpec::remaining`].
pub fn condition_kernel_spec(k: &PfaffianKernel, spec: &ConditionSpec) -> Result<PfaffianKernel> {
    let n = k.sites();
    spec.check_range(n)?;
    let mut labels: Vec<usize> = (0..n).collect();
    let mut cur = k.clone();
    let steps = spec
        .vacated
        .iter()
        .map(|&x| (x, false))
        .chain(spec.occupied.iter().map(|&x| (x, true)));
    for (x, occ) in steps {
        let pos = labels
            .iter()
            .position(|&l| l == x)
            .expect("site still present");
        cur = condition_kernel(&cur, pos, occ).map_err(|e| match e {
            Error::ConditioningImpossible {
                occupied,
                denominator,
                ..
            } => Error::ConditioningImpossible {
                site: x,
                occupied,
                denominator,
            },
            other => other,
        })?;
        labels.remove(pos);
    }
    Ok(cur)
}

/// Restricts `M` to `C(X, X')`, drops the conditioned sites and renormalizes.
pub fn conditional_weights_bruteforce(
    m: &MeasureTable,
    spec: &ConditionSpec,
) -> Result<MeasureTable> {
    let n = m.sites();
    spec.check_range(n)?;
    let (occ, vac) = spec.masks();
    let rest = spec.remaining(n);
    let mut w = vec![0.0; 1 << rest.len()];
    let mut mass = 0.0;
    for (mask, &p) in m.weights().iter().enumerate() {
        let mask = mask as u64;
        if mask & occ == occ && mask & vac == 0 {
            let reduced = rest
                .iter()
                .enumerate()
                .fold(0usize, |r, (i, &x)| r | ((mask >> x & 1) as usize) << i);
            w[reduced] += p;
            mass += p;
        }
    }
    if mass <= 1e-12 {
        return Err(Error::ZeroProbability(mass));
    }
    for x in w.iter_mut() {
        *x /= mass;
    }
    MeasureTable::new(rest.len(), w)
}

/// Exact sequential sampler: visits sites in order, draws the occupancy of
/// the next site from the diagonal `K12(x,x)` of the current conditional
/// kernel, and conditions on the outcome.
#[derive(Debug, Clone)]
pub struct Sampler {
    kernel: PfaffianKernel,
    order: Vec<usize>,
    rng: ChaCha20Rng,
}

impl Sampler {
    /// Ground-set order, ChaCha20 stream seeded with `seed`.
    pub fn new(kernel: PfaffianKernel, seed: u64) -> Self {
        let order = (0..kernel.sites()).collect();
        Self {
            kernel,
            order,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Visits the sites in a custom order (a permutation of `0..n`).
    pub fn with_order(mut self, order: Vec<usize>) -> Result<Self> {
        let n = self.kernel.sites();
        let mut seen = vec![false; n];
        for &x in &order {
            if x >= n {
                return Err(Error::SiteOutOfRange { index: x, len: n });
            }
            if seen[x] {
                return Err(Error::DuplicatePoint(x));
            }
            seen[x] = true;
        }
        if order.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: order.len(),
            });
        }
        self.order = order;
        Ok(self)
    }

    pub fn draw(&mut self) -> Result<Configuration> {
        let n = self.kernel.sites();
        let mut labels: Vec<usize> = (0..n).collect();
        let mut cur = self.kernel.clone();
        let mut mask = 0u64;
        for (step, &x) in self.order.iter().enumerate() {
            let pos = labels
                .iter()
                .position(|&l| l == x)
                .expect("site still present");
            let p = cur.k12(pos, pos).re;
            if !(-tol::SPECTRUM..=1.0 + tol::SPECTRUM).contains(&p) {
                return Err(Error::KernelInconsistent { site: x, value: p });
            }
            let u: f64 = self.rng.gen();
            let occupied = if p <= tol::REGULARITY {
                false
            } else if p >= 1.0 - tol::REGULARITY {
                true
            } else {
                u < p
            };
            if occupied {
                mask |= 1 << x;
            }
            if step + 1 < n {
                cur = condition_kernel(&cur, pos, occupied)?;
                labels.remove(pos);
            }
        }
        Ok(Configuration::new(mask, n))
    }
}

/// One draw from the PfPP with kernel `k`.
pub fn sample(k: &PfaffianKernel, seed: u64) -> Result<Configuration> {
    Sampler::new(k.clone(), seed).draw()
}

/// `draws` consecutive draws from a single seeded stream.
pub fn sample_many(k: &PfaffianKernel, seed: u64, draws: usize) -> Result<Vec<Configuration>> {
    let mut s = Sampler::new(k.clone(), seed);
    (0..draws).map(|_| s.draw()).collect()
}
