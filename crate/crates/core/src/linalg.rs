//! Minimal dense complex linear algebra for the small matrices this crate
//! works with (9x9 two-qutrit operators, 81x81 Gram matrices).
//!
//! The Hermitian eigensolver is a cyclic complex Jacobi iteration: each
//! rotation phase-aligns one off-diagonal entry and zeroes it with a real
//! Givens rotation. For matrices this small it is simple, deterministic and
//! accurate to machine precision.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

/// Square complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(dim: usize, mut f: F) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Outer product `v v^dagger` of a column vector.
    pub fn outer(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    /// Kronecker product `self (x) rhs`.
    pub fn kron(&self, rhs: &CMat) -> CMat {
        let (n, m) = (self.dim, rhs.dim);
        CMat::from_fn(n * m, |i, j| self[(i / m, j / m)] * rhs[(i % m, j % m)])
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len());
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        CMat {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim);
        CMat {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim);
        CMat {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Quadratic form `v^dagger M v`; real part only (exact for Hermitian M).
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        let mv = self.mul_vec(v);
        v.iter()
            .zip(&mv)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Largest magnitude of `M - M^dagger` entries; zero for Hermitian input.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// the unitary of column eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    /// Column k is the eigenvector for `eigenvalues[k]`.
    pub eigenvectors: CMat,
}

/// Cyclic complex Jacobi diagonalization. The input is symmetrized as
/// `(M + M^dagger)/2` first, so tiny Hermiticity defects from rounding are
/// tolerated.
pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    let n = m.dim();
    let mut a = CMat::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let mut v = CMat::identity(n);

    let scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(1e-300, f64::max);
    let tol = 1e-15 * scale.max(off_diagonal_norm(&a));

    for _sweep in 0..60 {
        if off_diagonal_norm(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = a[(p, q)];
                let mag = gamma.norm();
                if mag <= 1e-300 {
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let phase = gamma / mag; // e^{i phi}
                let alpha = a[(p, p)].re;
                let beta = a[(q, q)].re;
                let tau = (beta - alpha) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // column rotation U: U_pp = c, U_pq = -s,
                // U_qp = conj(phase) s, U_qq = conj(phase) c
                let ph_s = phase.conj() * s;
                let ph_c = phase.conj() * c;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c + aiq * ph_s;
                    a[(i, q)] = -aip * s + aiq * ph_c;
                    a[(p, i)] = a[(i, p)].conj();
                    a[(q, i)] = a[(i, q)].conj();
                }
                let new_pp = alpha * c * c + 2.0 * mag * c * s + beta * s * s;
                let new_qq = alpha * s * s - 2.0 * mag * c * s + beta * c * c;
                a[(p, p)] = Complex64::new(new_pp, 0.0);
                a[(q, q)] = Complex64::new(new_qq, 0.0);
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c + viq * ph_s;
                    v[(i, q)] = -vip * s + viq * ph_c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = CMat::from_fn(n, |i, j| v[(i, order[j])]);
    HermitianEigen {
        eigenvalues,
        eigenvectors,
    }
}

fn off_diagonal_norm(a: &CMat) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Apply a Hermitian-preserving spectral function: `f` maps each eigenvalue,
/// eigenvectors are kept. Used for matrix square roots and PSD clipping.
pub fn spectral_map<F: FnMut(f64) -> f64>(m: &CMat, mut f: F) -> CMat {
    let eig = hermitian_eigen(m);
    let n = m.dim();
    let mut out = CMat::zeros(n);
    for k in 0..n {
        let lam = f(eig.eigenvalues[k]);
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = eig.eigenvectors[(i, k)];
            for j in 0..n {
                out[(i, j)] += vik * eig.eigenvectors[(j, k)].conj() * lam;
            }
        }
    }
    out
}

/// Least-squares / least-norm solve of a real symmetric PSD system
/// `G x = b` through the eigendecomposition, dropping modes with
/// eigenvalues below `rel_tol * lambda_max`. Returns the solution and the
/// numerical rank.
pub fn sym_solve_least_norm(g: &[f64], n: usize, b: &[f64], rel_tol: f64) -> (Vec<f64>, usize) {
    assert_eq!(g.len(), n * n);
    assert_eq!(b.len(), n);
    let m = CMat::from_fn(n, |i, j| Complex64::new(g[i * n + j], 0.0));
    let eig = hermitian_eigen(&m);
    let lam_max = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let cut = rel_tol * lam_max;
    let mut x = vec![0.0f64; n];
    let mut rank = 0;
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam.abs() <= cut {
            continue;
        }
        rank += 1;
        let mut proj = 0.0;
        for i in 0..n {
            proj += eig.eigenvectors[(i, k)].re * b[i];
        }
        let coeff = proj / lam;
        for i in 0..n {
            x[i] += coeff * eig.eigenvectors[(i, k)].re;
        }
    }
    (x, rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_chacha::ChaCha8Rng;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let raw = CMat::from_fn(n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        raw.add(&raw.adjoint()).scale(Complex64::new(0.5, 0.0))
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 5, 9, 17] {
            let m = random_hermitian(n, &mut rng);
            let eig = hermitian_eigen(&m);
            // V diag(lam) V^dagger == M
            let mut rec = CMat::zeros(n);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        rec[(i, j)] += eig.eigenvectors[(i, k)]
                            * eig.eigenvectors[(j, k)].conj()
                            * eig.eigenvalues[k];
                    }
                }
            }
            assert!(rec.sub(&m).frobenius_norm() < 1e-12 * (1.0 + m.frobenius_norm()));
            // unitarity
            let vhv = eig.eigenvectors.adjoint().mul(&eig.eigenvectors);
            assert!(vhv.sub(&CMat::identity(n)).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn eigen_matches_nalgebra_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [3usize, 9] {
            let m = random_hermitian(n, &mut rng);
            let na = nalgebra::DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
            let mut oracle: Vec<f64> = na
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ours = hermitian_eigen(&m).eigenvalues;
            for (a, b) in ours.iter().zip(&oracle) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn spectral_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_hermitian(6, &mut rng);
        let psd = m.mul(&m.adjoint()); // PSD by construction
        let root = spectral_map(&psd, |l| l.max(0.0).sqrt());
        assert!(root.mul(&root).sub(&psd).frobenius_norm() < 1e-11);
    }

    #[test]
    fn least_norm_solve_full_rank() {
        // G = diag(2, 4), b = (2, 8) -> x = (1, 2)
        let g = [2.0, 0.0, 0.0, 4.0];
        let (x, rank) = sym_solve_least_norm(&g, 2, &[2.0, 8.0], 1e-12);
        assert_eq!(rank, 2);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-13);
    }

    #[test]
    fn least_norm_solve_deficient() {
        // rank-1 projector onto (1,1)/sqrt(2)
        let g = [0.5, 0.5, 0.5, 0.5];
        let (x, rank) = sym_solve_least_norm(&g, 2, &[1.0, 1.0], 1e-10);
        assert_eq!(rank, 1);
        // least-norm solution of,G x = b on the range: x = (1,1)
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kron_and_outer() {
        let a = CMat::from_fn(2, |i, j| Complex64::new((i * 2 + j) as f64, 0.0));
        let b = CMat::identity(2);
        let k = a.kron(&b);
        assert_eq!(k.dim(), 4);
        assert_eq!(k[(0, 0)], a[(0, 0)]);
        assert_eq!(k[(2, 3)], Complex64::new(0.0, 0.0));
        assert_eq!(k[(2, 2)], a[(1, 1)]);

        let v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let o = CMat::outer(&v);
        assert_eq!(o[(0, 1)], Complex64::new(0.0, -1.0));
        assert_abs_diff_eq!(o.trace().re, 2.0, epsilon = 1e-15);
    }
}
