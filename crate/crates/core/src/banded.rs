//! Square banded complex matrices with equal lower and upper bandwidth.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    band: usize,
    // row-major, 2*band+1 entries per row, column j of row i at j + band - i
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, band: usize) -> Self {
        Self { n, band, data: vec![Complex64::new(0.0, 0.0); n * (2 * band + 1)] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.band, "({i}, {j}) outside the band");
        i * (2 * self.band + 1) + j + self.band - i
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i.abs_diff(j) > self.band {
            return Complex64::new(0.0, 0.0);
        }
        self.data[self.slot(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.band);
                let hi = (i + self.band).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization without pivoting. Adequate for matrices whose
    /// Hermitian part is definite, such as `I + i·(real symmetric)`.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, b) = (self.n, self.band);
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if pivot.norm() < 1e-300 || !pivot.is_finite() {
                return Err(Error::Numeric(format!("zero pivot in banded solve at row {k}")));
            }
            for i in k + 1..=(k + b).min(n - 1) {
                let s = self.slot(i, k);
                let l = self.data[s] / pivot;
                self.data[s] = l;
                for j in k + 1..=(k + b).min(n - 1) {
                    let src = self.data[self.slot(k, j)];
                    let dst = self.slot(i, j);
                    self.data[dst] -= l * src;
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
}

impl BandedLu {
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let (n, b) = (self.m.n, self.m.band);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut acc = x[i];
            for j in lo..i {
                acc -= self.m.data[self.m.slot(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut acc = x[i];
            for j in i + 1..=hi {
                acc -= self.m.data[self.m.slot(i, j)] * x[j];
            }
            x[i] = acc / self.m.data[self.m.slot(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_skew_perturbed_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, b) = (40, 3);
        let mut m = BandedMatrix::zeros(n, b);
        for i in 0..n {
            m.add(i, i, Complex64::new(1.0, 0.0));
            for j in i..=(i + b).min(n - 1) {
                let s = rng.random_range(-5.0..5.0);
                m.add(i, j, Complex64::new(0.0, s));
                if j != i {
                    m.add(j, i, Complex64::new(0.0, s));
                }
            }
        }
        let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let mut rhs = m.mul_vec(&x);
        m.factor().unwrap().solve_in_place(&mut rhs);
        for (a, e) in rhs.iter().zip(&x) {
            assert!((a - e).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = BandedMatrix::zeros(4, 1);
        assert!(matches!(m.factor(), Err(Error::Numeric(_))));
    }
}
