//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK band convention: a matrix with lower bandwidth
//! `kl` and upper bandwidth `ku` is held in a `(2*kl + ku + 1) x n` array,
//! column major, with entry `A(i, j)` at in-band row `kl + ku + i - j`. The
//! extra `kl` rows at the top absorb the fill-in that row pivoting pushes
//! into the upper triangle, so factorization happens in place.
//!
//! The solver is generic over the scalar so the same code path serves real
//! implicit-Euler steps and complex shifted systems `s E - A`.

use nalgebra::{ComplexField, DMatrix};
use num_traits::Zero;

use crate::error::{Error, Result};

/// Band matrix ready for in-place factorization.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    /// `(2*kl + ku + 1) x n`, column major.
    ab: Vec<T>,
}

impl<T: ComplexField + Copy> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ab: vec![T::zero(); ldab * n],
        }
    }

    /// Storage index of `A(i, j)`; valid on the padded band
    /// `j - (kl + ku) <= i <= j + kl` that factorization fills in.
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(
            i + self.ku + self.kl >= j && j + self.kl >= i,
            "({i}, {j}) outside padded band"
        );
        let ldab = 2 * self.kl + self.ku + 1;
        (self.kl + self.ku + i - j) + j * ldab
    }

    /// Adds `v` to `A(i, j)`. The entry must lie within the nominal band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(
            i + self.ku >= j && j + self.kl >= i,
            "({i}, {j}) outside band kl={}, ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    /// Factors the matrix with row partial pivoting, consuming the storage.
    pub fn factor(mut self) -> Result<BandedLu<T>> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let ldab = 2 * kl + ku + 1;
        let mut ipiv = vec![0usize; n];
        // Last column touched by eliminations so far; pivoting can push
        // entries out to column j + kl + ku.
        let mut ju = 0usize;
        for j in 0..n {
            let imax = (j + kl).min(n.saturating_sub(1));
            let mut jp = j;
            let mut best = self.ab[self.idx(j, j)].modulus();
            for i in (j + 1)..=imax {
                let m = self.ab[self.idx(i, j)].modulus();
                if m > best {
                    best = m;
                    jp = i;
                }
            }
            ipiv[j] = jp;
            if best == T::RealField::zero() {
                return Err(Error::Singular("banded LU (zero pivot)"));
            }
            ju = ju.max((j + kl + ku).min(n - 1));
            if jp != j {
                for c in j..=ju {
                    let a = self.idx(jp, c);
                    let b = self.idx(j, c);
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.idx(j, j)];
            for i in (j + 1)..=imax {
                let k = self.idx(i, j);
                self.ab[k] /= piv;
            }
            for c in (j + 1)..=ju {
                let ujc = self.ab[self.idx(j, c)];
                if ujc != T::zero() {
                    for i in (j + 1)..=imax {
                        let lij = self.ab[self.idx(i, j)];
                        let k = self.idx(i, c);
                        self.ab[k] -= lij * ujc;
                    }
                }
            }
            let _ = ldab;
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ab: self.ab,
            ipiv,
        })
    }
}

/// Factored band matrix; solves `A x = b` by forward/back substitution.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<T>,
    ipiv: Vec<usize>,
}

impl<T: ComplexField + Copy> BandedLu<T> {
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> T {
        let ldab = 2 * self.kl + self.ku + 1;
        self.ab[(self.kl + self.ku + i - j) + j * ldab]
    }

    /// Solves in place for a single right-hand side.
    pub fn solve_slice(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n, "right-hand side length mismatch");
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        // L has unit diagonal; apply permutations interleaved as recorded.
        for j in 0..n {
            let jp = self.ipiv[j];
            if jp != j {
                b.swap(j, jp);
            }
            let bj = b[j];
            if bj != T::zero() {
                let imax = (j + kl).min(n - 1);
                for i in (j + 1)..=imax {
                    let lij = self.entry(i, j);
                    b[i] -= lij * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let x = b[j] / self.entry(j, j);
            b[j] = x;
            if x != T::zero() {
                let imin = j.saturating_sub(ku + kl);
                for i in imin..j {
                    let uij = self.entry(i, j);
                    b[i] -= uij * x;
                }
            }
        }
    }

    /// Solves in place for a block of right-hand sides.
    pub fn solve_mat(&self, b: &mut DMatrix<T>) {
        assert_eq!(b.nrows(), self.n, "right-hand side height mismatch");
        for mut col in b.column_iter_mut() {
            // columns of a DMatrix are contiguous
            let slice: &mut [T] = col.as_mut_slice();
            self.solve_slice(slice);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Complex, DVector};

    /// Deterministic pseudo-random stream, good enough for test matrices.
    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        }
    }

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> (BandMatrix<f64>, DMatrix<f64>) {
        let mut rng = Lcg(seed);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i + ku >= j && j + kl >= i {
                    let v = if i == j { 4.0 + rng.next() } else { rng.next() };
                    band.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
        }
        (band, dense)
    }

    #[test]
    fn banded_solve_matches_dense_lu() {
        for &(n, kl, ku, seed) in &[(1, 0, 0, 3u64), (5, 1, 2, 7), (30, 4, 4, 11), (64, 8, 8, 13)] {
            let (band, dense) = random_banded(n, kl, ku, seed);
            let lu = band.factor().unwrap();
            let mut rng = Lcg(seed ^ 0xabcd);
            let b = DVector::from_fn(n, |_, _| rng.next());
            let mut x = b.clone();
            lu.solve_slice(x.as_mut_slice());
            let xd = dense.clone().lu().solve(&b).unwrap();
            assert_relative_eq!(x, xd, epsilon = 1e-10, max_relative = 1e-10);
            assert_relative_eq!(&dense * &x, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        // Leading diagonal entry is zero; without pivoting this would break.
        let mut band = BandMatrix::zeros(2, 1, 1);
        band.add(0, 0, 0.0);
        band.add(0, 1, 1.0);
        band.add(1, 0, 1.0);
        band.add(1, 1, 1.0);
        let lu = band.factor().unwrap();
        let mut b = vec![2.0, 3.0];
        lu.solve_slice(&mut b);
        // x solves [[0,1],[1,1]] x = [2,3] => x = [1, 2]
        assert_relative_eq!(b[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(b[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut band = BandMatrix::zeros(2, 0, 0);
        band.add(0, 0, 1.0);
        // entry (1,1) stays zero -> diagonal matrix with zero pivot
        assert!(band.factor().is_err());
    }

    #[test]
    fn complex_shifted_solve() {
        let n = 40;
        let (_, dense) = random_banded(n, 3, 3, 17);
        let s = Complex::new(0.7, 1.3);
        let mut band = BandMatrix::<Complex<f64>>::zeros(n, 3, 3);
        let mut dz = DMatrix::<Complex<f64>>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i + 3 >= j && j + 3 >= i {
                    let v = Complex::new(dense[(i, j)], 0.0) + if i == j { s } else { Complex::new(0.0, 0.0) };
                    band.add(i, j, v);
                    dz[(i, j)] = v;
                }
            }
        }
        let lu = band.factor().unwrap();
        let b = DVector::from_fn(n, |i, _| Complex::new(1.0 / (i + 1) as f64, 0.2 * i as f64));
        let mut x = b.clone();
        lu.solve_slice(x.as_mut_slice());
        let resid = (&dz * &x - &b).norm() / b.norm();
        assert!(resid < 1e-11, "relative residual {resid:.3e}");
    }

    #[test]
    fn block_solve_matches_vector_solve() {
        let (band, dense) = random_banded(20, 2, 5, 23);
        let lu = band.factor().unwrap();
        let mut rhs = DMatrix::from_fn(20, 3, |i, j| ((i * 3 + j) % 7) as f64 - 3.0);
        let expect = dense.lu().solve(&rhs).unwrap();
        lu.solve_mat(&mut rhs);
        assert_relative_eq!(rhs, expect, epsilon = 1e-11);
    }
}
