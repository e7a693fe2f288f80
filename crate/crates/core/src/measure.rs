//! Correlation functions, brute-force configuration weights, and
//! multiplicative-functional expectations.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::skewalg::{fredholm_pfaffian, interleave, minor_pfaffian, PfaffianKernel};
use crate::{tol, CMatrix, Error, Result, C64};

/// Largest ground set for `2^n` enumeration.
pub const MAX_ENUMERATION_SITES: usize = 16;

/// A subset of the ground set as a bitmask; bit `i` is site `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub mask: u64,
    pub sites: usize,
}

impl Configuration {
    pub fn new(mask: u64, sites: usize) -> Self {
        Self { mask, sites }
    }

    pub fn from_sites(occupied: &[usize], sites: usize) -> Self {
        Self {
            mask: occupied.iter().fold(0, |m, &i| m | 1 << i),
            sites,
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    pub fn occupied(&self) -> Vec<usize> {
        (0..self.sites).filter(|&i| self.contains(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// `'1'`/`'0'` per site, site 0 first.
    pub fn bitstring(&self) -> String {
        (0..self.sites)
            .map(|i| if self.contains(i) { '1' } else { '0' })
            .collect()
    }

    pub fn parse(bits: &str) -> Result<Self> {
        let mut mask = 0;
        for (i, ch) in bits.chars().enumerate() {
            match ch {
                '1' => mask |= 1 << i,
                '0' => {}
                _ => return Err(Error::InvalidArgument(format!("bad bitstring {bits:?}"))),
            }
        }
        Ok(Self {
            mask,
            sites: bits.chars().count(),
        })
    }
}

/// Probability of every configuration of an `n`-site ground set, indexed
/// by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    sites: usize,
    weights: Vec<f64>,
}

impl MeasureTable {
    /// Clamps weights in `[-tol::NEGATIVE_WEIGHT, 0)` to zero; rejects more
    /// negative weights and total mass away from one.
    pub fn new(sites: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 1usize << sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << sites,
                found: weights.len(),
            });
        }
        for (mask, w) in weights.iter_mut().enumerate() {
            if *w < 0.0 {
                if *w < -tol::NEGATIVE_WEIGHT || w.is_nan() {
                    return Err(Error::NegativeWeight {
                        config: mask as u64,
                        weight: *w,
                    });
                }
                *w = 0.0;
            }
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > tol::MASS || mass.is_nan() {
            return Err(Error::NotNormalized { mass });
        }
        Ok(Self { sites, weights })
    }

    /// Point mass at one configuration.
    pub fn delta(sites: usize, mask: u64) -> Self {
        let mut weights = vec![0.0; 1 << sites];
        weights[mask as usize] = 1.0;
        Self { sites, weights }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn weight(&self, mask: u64) -> f64 {
        self.weights[mask as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Configurations with positive weight.
    pub fn support(&self) -> Vec<u64> {
        (0..self.weights.len() as u64)
            .filter(|&m| self.weights[m as usize] > 0.0)
            .collect()
    }

    /// Cylinder probability `M(Y subset of omega)`.
    pub fn cylinder(&self, points_mask: u64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(m, _)| *m as u64 & points_mask == points_mask)
            .map(|(_, w)| w)
            .sum()
    }

    /// `sum_omega M(omega) prod_{x in omega} alpha(x)`.
    pub fn expect_product(&self, alpha: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(m, w)| {
                let p: f64 = (0..self.sites)
                    .filter(|&i| m >> i & 1 == 1)
                    .map(|i| alpha[i])
                    .product();
                w * p
            })
            .sum()
    }

    /// `sum_omega M(omega) f(omega)`.
    pub fn expect(&self, f: impl Fn(u64) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(m, w)| w * f(m as u64))
            .sum()
    }
}

fn real_probability(z: C64) -> Result<f64> {
    if z.im.abs() > tol::IMAGINARY {
        return Err(Error::ImaginaryPart(z.im));
    }
    Ok(z.re)
}

/// `rho(x_1, ..., x_m) = Pf[K(x_i, x_j)]`; zero when a point repeats.
pub fn correlation(k: &PfaffianKernel, points: &[usize]) -> Result<f64> {
    real_probability(correlation_complex(k, points)?)
}

/// As [`correlation`] without the realness check.
pub fn correlation_complex(k: &PfaffianKernel, points: &[usize]) -> Result<C64> {
    let n = k.sites();
    let mut mask = 0u64;
    for &p in points {
        if p >= n {
            return Err(Error::SiteOutOfRange { index: p, len: n });
        }
        if mask >> p & 1 == 1 {
            return Ok(C64::new(0.0, 0.0));
        }
        mask |= 1 << p;
    }
    Ok(interleave(k, points)?.pfaffian())
}

/// All correlations `rho(Y)`, indexed by the bitmask of `Y`.
pub fn all_correlations(k: &PfaffianKernel) -> Result<Vec<C64>> {
    let n = k.sites();
    if n > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what: "ground set",
            size: n,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    Ok((0..1u64 << n).map(|m| minor_pfaffian(k, m)).collect())
}

/// `M({omega}) = sum_{Y >= omega} (-1)^{|Y \ omega|} rho(Y)`.
pub fn weights_bruteforce(k: &PfaffianKernel) -> Result<MeasureTable> {
    let n = k.sites();
    let rho = all_correlations(k)?;
    let mut f = Vec::with_capacity(rho.len());
    for z in rho {
        f.push(real_probability(z)?);
    }
    mobius_superset(&mut f, n);
    MeasureTable::new(n, f)
}

/// In-place superset Moebius inversion.
pub(crate) fn mobius_superset(f: &mut [f64], n: usize) {
    for bit in 0..n {
        let b = 1usize << bit;
        for mask in 0..f.len() {
            if mask & b == 0 {
                f[mask] -= f[mask | b];
            }
        }
    }
}

/// `alpha(x) >= 1` on every site.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeWeight {
    alpha: Vec<f64>,
}

impl MultiplicativeWeight {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some((i, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| a.is_nan() || **a < 1.0)
        {
            return Err(Error::InvalidArgument(format!("alpha({i}) = {a} < 1")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

/// `E[prod_{x in omega} alpha(x)] = Pf[J + sqrt(alpha-1) K sqrt(alpha-1)]`,
/// summed over subsets of the support of `alpha - 1`.
pub fn expect_multiplicative(k: &PfaffianKernel, alpha: &MultiplicativeWeight) -> Result<f64> {
    let n = k.sites();
    if alpha.alpha.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: alpha.alpha.len(),
        });
    }
    let support: Vec<usize> = (0..n).filter(|&i| alpha.alpha[i] > 1.0).collect();
    let root: Vec<f64> = support
        .iter()
        .map(|&i| libm::sqrt(alpha.alpha[i] - 1.0))
        .collect();
    let weighted = k.restrict(&support).scaled(&root);
    real_probability(fredholm_pfaffian(&weighted)?)
}

/// `det[K(x_i, x_j)]` for a scalar kernel.
pub fn dpp_correlation(k: &CMatrix, points: &[usize]) -> Result<f64> {
    let n = k.nrows();
    for (i, &p) in points.iter().enumerate() {
        if p >= n {
            return Err(Error::SiteOutOfRange { index: p, len: n });
        }
        if points[..i].contains(&p) {
            return Ok(0.0);
        }
    }
    real_probability(crate::linalg::select(k, points, points).determinant())
}
