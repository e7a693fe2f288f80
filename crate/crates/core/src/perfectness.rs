//! Koopman representations of atomic quasi-invariant measures and the
//! Fock-space operators they are compared against.

use alloc::vec;
use alloc::vec::Vec;

use crate::fock::{FockOperator, FockSpace, FockVector};
use crate::linalg::c;
use crate::measure::MeasureTable;
use crate::{CMatrix, Error, Result, C64};

/// `eta_x = 1 - 2 a*_x a_x`: `e_omega -> (1 - 2 omega(x)) e_omega`.
pub fn eta_op(space: &FockSpace, x: usize) -> FockOperator {
    let d: Vec<C64> = (0..space.dim())
        .map(|m| c(if m >> x & 1 == 1 { -1.0 } else { 1.0 }))
        .collect();
    FockOperator::diagonal(&d)
}

/// `eta_(x,y)`: product of `eta_z` over `x < z < y`; identity when empty.
pub fn eta_interval(space: &FockSpace, x: usize, y: usize) -> FockOperator {
    let d: Vec<C64> = (0..space.dim())
        .map(|m| {
            let k = (x + 1..y).filter(|&z| m >> z & 1 == 1).count();
            c(if k % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect();
    FockOperator::diagonal(&d)
}

/// `p(s_xy) = (1 + eta_x eta_y)/2 + (1 + eta_x eta_y + (1 - eta_x eta_y) eta_(x,y))/2 (a*_x a_y + a*_y a_x)`.
pub fn swap_op(space: &FockSpace, x: usize, y: usize) -> Result<FockOperator> {
    let n = space.sites();
    if y >= n {
        return Err(Error::SiteOutOfRange { index: y, len: n });
    }
    if x >= y {
        return Err(Error::BadTransposition { x, y });
    }
    let id = FockOperator::identity(space.dim());
    let ee = eta_op(space, x).matmul(&eta_op(space, y));
    let half = c(0.5);
    let first = id.combine(half, &ee, half);
    let anti = id
        .combine(c(1.0), &ee, c(-1.0))
        .matmul(&eta_interval(space, x, y));
    let coeff = id.add(&ee).add(&anti).scale(half);
    let hop = space
        .a_dag(x)
        .matmul(space.a(y))
        .add(&space.a_dag(y).matmul(space.a(x)));
    Ok(first.add(&coeff.matmul(&hop)))
}

/// Applies the transposition of sites `x, y` to a configuration mask.
pub fn transpose_mask(mask: u64, x: usize, y: usize) -> u64 {
    if (mask >> x & 1) == (mask >> y & 1) {
        mask
    } else {
        mask ^ (1 << x) ^ (1 << y)
    }
}

/// Koopman representation of an atomic measure on `{0,1}^n`, in the basis of
/// indicator functions `delta_omega` of its support (not orthonormal: the
/// inner product is weighted by `M`).
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanRep {
    sites: usize,
    support: Vec<u64>,
    weights: Vec<f64>,
}

pub fn koopman(m: &MeasureTable) -> KoopmanRep {
    let support = m.support();
    let weights = support.iter().map(|&w| m.weight(w)).collect();
    KoopmanRep {
        sites: m.sites(),
        support,
        weights,
    }
}

impl KoopmanRep {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn index(&self, mask: u64) -> Option<usize> {
        self.support.binary_search(&mask).ok()
    }

    /// `diag(M)`, the Gram matrix of the indicator basis.
    pub fn gram(&self) -> CMatrix {
        CMatrix::from_fn(self.support.len(), self.support.len(), |i, j| {
            if i == j {
                c(self.weights[i])
            } else {
                c(0.0)
            }
        })
    }

    /// `T(g) delta_omega = (M(omega) / M(g omega))^{1/2} delta_{g omega}`
    /// for the transposition `g = (x y)`.
    pub fn transposition(&self, x: usize, y: usize) -> Result<CMatrix> {
        let k = self.support.len();
        let mut t = CMatrix::zeros(k, k);
        for (j, &w) in self.support.iter().enumerate() {
            let g = transpose_mask(w, x, y);
            let i = self.index(g).ok_or(Error::NotQuasiInvariant { x, y })?;
            t[(i, j)] = c(libm::sqrt(self.weights[j] / self.weights[i]));
        }
        Ok(t)
    }

    /// Multiplication by `f`.
    pub fn function(&self, f: impl Fn(u64) -> f64) -> CMatrix {
        let k = self.support.len();
        CMatrix::from_fn(k, k, |i, j| {
            if i == j {
                c(f(self.support[i]))
            } else {
                c(0.0)
            }
        })
    }

    /// `iota delta_omega = M(omega)^{1/2} e_omega`, as a `2^n x |supp|` matrix.
    pub fn intertwiner(&self) -> CMatrix {
        let mut iota = CMatrix::zeros(1 << self.sites, self.support.len());
        for (j, &w) in self.support.iter().enumerate() {
            iota[(w as usize, j)] = c(libm::sqrt(self.weights[j]));
        }
        iota
    }

    /// `iota(1) = sum_omega M(omega)^{1/2} e_omega`.
    pub fn cyclic_vector(&self) -> Vec<C64> {
        let mut v = vec![c(0.0); 1 << self.sites];
        for (&w, &p) in self.support.iter().zip(&self.weights) {
            v[w as usize] = c(libm::sqrt(p));
        }
        v
    }
}

/// Result of [`intertwiner_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntertwinerReport {
    pub max_deviation: f64,
    /// Mass discarded before building the table (0 for exact tables).
    pub truncation_mass: f64,
    /// Number of operator identities checked.
    pub instances: usize,
}

/// Checks `iota T(p(g)) = pi(p(g)) iota` for every adjacent transposition
/// and `iota T(F) = pi(F) iota` for every one-site indicator `F`.
pub fn intertwiner_check(m: &MeasureTable, truncation_mass: f64) -> Result<IntertwinerReport> {
    let n = m.sites();
    let space = FockSpace::new(n)?;
    let rep = koopman(m);
    let iota = rep.intertwiner();
    let mut dev: f64 = 0.0;
    let mut instances = 0;
    let dense = |op: &FockOperator| op.to_dense();
    for x in 0..n.saturating_sub(1) {
        let lhs = &iota * rep.transposition(x, x + 1)?;
        let rhs = dense(&swap_op(&space, x, x + 1)?) * &iota;
        dev = dev.max(crate::linalg::max_abs_diff(&lhs, &rhs));
        instances += 1;
    }
    for x in 0..n {
        let lhs = &iota * rep.function(|w| (w >> x & 1) as f64);
        let rhs = dense(&space.number(x)) * &iota;
        dev = dev.max(crate::linalg::max_abs_diff(&lhs, &rhs));
        instances += 1;
    }
    Ok(IntertwinerReport {
        max_deviation: dev,
        truncation_mass,
        instances,
    })
}

/// `max |iota(1) - Omega|` over Fock amplitudes, with `Omega` phase-fixed.
/// Zero exactly when the state vector has the nonnegative amplitudes
/// `M(omega)^{1/2}`, i.e. when `iota` carries the constant function to it.
pub fn cyclic_vector_deviation(m: &MeasureTable, state: &FockVector) -> Result<f64> {
    if state.sites != m.sites() {
        return Err(Error::DimensionMismatch {
            expected: m.sites(),
            found: state.sites,
        });
    }
    let v = koopman(m).cyclic_vector();
    Ok(v.iter()
        .zip(&state.amplitudes)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{half, kernel_from_covariance, random_covariance};
    use crate::fock::state_vector;
    use crate::linalg::max_abs_diff;
    use crate::measure::{correlation, weights_bruteforce};
    use crate::models::{
        ope_projection, ope_weights, schur_box_measure, vandermonde_vectors, Specialization,
    };
    use crate::CVector;

    #[test]
    fn eta_eigenvalues() {
        let f = FockSpace::new(3).unwrap();
        for x in 0..3 {
            let e = eta_op(&f, x);
            for m in 0..8usize {
                let expect = if m >> x & 1 == 1 { -1.0 } else { 1.0 };
                assert_eq!(e.entry(m, m), c(expect));
            }
            assert_eq!(e.matmul(&e).max_abs_diff(&FockOperator::identity(8)), 0.0);
            let via_number = FockOperator::identity(8).combine(c(1.0), &f.number(x), c(-2.0));
            assert!(e.max_abs_diff(&via_number) < 1e-15);
        }
        assert_eq!(
            eta_interval(&f, 0, 1).max_abs_diff(&FockOperator::identity(8)),
            0.0
        );
    }

    #[test]
    fn swap_permutes_basis_without_sign() {
        let f = FockSpace::new(4).unwrap();
        for y in 1..4 {
            for x in 0..y {
                let s = swap_op(&f, x, y).unwrap();
                for w in 0..16u64 {
                    let mut e = vec![c(0.0); 16];
                    e[w as usize] = c(1.0);
                    let out = s.apply(&e);
                    let g = transpose_mask(w, x, y) as usize;
                    for (k, v) in out.iter().enumerate() {
                        let expect = if k == g { 1.0 } else { 0.0 };
                        assert!((v - c(expect)).norm() < 1e-15, "({x} {y}) on {w:04b}");
                    }
                }
                assert!(s.matmul(&s).max_abs_diff(&FockOperator::identity(16)) < 1e-15);
                assert!(s.adjoint().max_abs_diff(&s) < 1e-15);
            }
        }
        assert!(matches!(
            swap_op(&f, 2, 2),
            Err(Error::BadTransposition { x: 2, y: 2 })
        ));
        assert!(swap_op(&f, 3, 1).is_err());
    }

    #[test]
    fn braid_relations() {
        let f = FockSpace::new(5).unwrap();
        let s: Vec<FockOperator> = (0..4).map(|i| swap_op(&f, i, i + 1).unwrap()).collect();
        for i in 0..3 {
            let l = s[i].matmul(&s[i + 1]).matmul(&s[i]);
            let r = s[i + 1].matmul(&s[i]).matmul(&s[i + 1]);
            assert!(l.max_abs_diff(&r) < 1e-15);
        }
        for i in 0..4 {
            for j in i + 2..4 {
                assert!(s[i].matmul(&s[j]).max_abs_diff(&s[j].matmul(&s[i])) < 1e-15);
            }
        }
        // Non-adjacent swap as a conjugate of adjacent ones.
        let s02 = swap_op(&f, 0, 2).unwrap();
        assert!(s02.max_abs_diff(&s[1].matmul(&s[0]).matmul(&s[1])) < 1e-15);
    }

    #[test]
    fn koopman_examples() {
        let uniform = MeasureTable::new(2, vec![0.25; 4]).unwrap();
        let t = koopman(&uniform).transposition(0, 1).unwrap();
        let perm = CMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
            ]
            .map(c),
        );
        assert_eq!(t, perm);
        let delta = MeasureTable::delta(3, 0);
        let t = koopman(&delta).transposition(0, 2).unwrap();
        assert_eq!(t, CMatrix::identity(1, 1));
        let bad = MeasureTable::delta(2, 0b01);
        assert!(matches!(
            koopman(&bad).transposition(0, 1),
            Err(Error::NotQuasiInvariant { x: 0, y: 1 })
        ));
    }

    #[test]
    fn koopman_unitary_for_ope() {
        let vs = vandermonde_vectors(&[0.0, 1.0, 2.5, 3.0], &[1.0, 0.4, 2.0, 0.7], 2).unwrap();
        let rep = koopman(&ope_weights(&vs).unwrap());
        let d = rep.gram();
        for x in 0..3 {
            let t = rep.transposition(x, x + 1).unwrap();
            assert!(max_abs_diff(&(t.adjoint() * &d * &t), &d) < 1e-12);
        }
    }

    #[test]
    fn indicator_expectations() {
        let s = random_covariance(31, 3);
        let k = kernel_from_covariance(&s);
        let table = weights_bruteforce(&k).unwrap();
        let rep = koopman(&table);
        let one = CVector::from_element(rep.support().len(), c(1.0));
        for pts in [vec![0], vec![2], vec![0, 1], vec![0, 1, 2]] {
            let mask = pts.iter().fold(0u64, |m, &p| m | 1 << p);
            let tf = rep.function(|w| if w & mask == mask { 1.0 } else { 0.0 });
            let v = (one.adjoint() * rep.gram() * tf * &one)[(0, 0)].re;
            assert!((v - correlation(&k, &pts).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn intertwiner_examples() {
        let bern = weights_bruteforce(&kernel_from_covariance(&half(4))).unwrap();
        let r = intertwiner_check(&bern, 0.0).unwrap();
        assert!(r.max_deviation < 1e-15);
        assert_eq!(r.instances, 3 + 4);

        let vs =
            vandermonde_vectors(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0, 0.5, 2.0, 1.5, 0.3], 2).unwrap();
        let table = ope_weights(&vs).unwrap();
        assert!(intertwiner_check(&table, 0.0).unwrap().max_deviation < 1e-9);
        let vs3 = vandermonde_vectors(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0; 5], 3).unwrap();
        assert!(
            intertwiner_check(&ope_weights(&vs3).unwrap(), 0.0)
                .unwrap()
                .max_deviation
                < 1e-9
        );

        let (schur, tail) = schur_box_measure(&Specialization::plancherel(), 3, 3).unwrap();
        let r = intertwiner_check(&schur, tail).unwrap();
        assert!(r.max_deviation < 1e-8);
        assert!(r.truncation_mass > 0.0 && r.truncation_mass < 0.1);

        let not_qi = MeasureTable::new(2, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            intertwiner_check(&not_qi, 0.0),
            Err(Error::NotQuasiInvariant { .. })
        ));
    }

    #[test]
    fn cyclic_vector_is_the_ope_state() {
        let vs =
            vandermonde_vectors(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0, 0.5, 2.0, 1.5, 0.3], 2).unwrap();
        let p = ope_projection(&vs).unwrap();
        // Exact zeros off |omega| = N; the Pfaffian table has ~1e-16 there.
        let table = ope_weights(&vs).unwrap();
        let sv = state_vector(&p).unwrap();
        assert!(cyclic_vector_deviation(&table, &sv).unwrap() < 1e-9);

        let v1 = CVector::from_vec(vec![c(1.0), c(0.0), c(1.0), c(0.0), c(0.0)]);
        let v2 = CVector::from_vec(vec![c(0.0), c(1.0), c(0.0), c(0.0), c(-1.0)]);
        let p = ope_projection(&[v1, v2]).unwrap();
        let table = weights_bruteforce(&kernel_from_covariance(&p)).unwrap();
        let sv = state_vector(&p).unwrap();
        assert!(cyclic_vector_deviation(&table, &sv).unwrap() > 0.1);
    }
}
