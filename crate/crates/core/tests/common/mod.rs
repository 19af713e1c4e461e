//! Shared instance builders and independent reference computations.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use opkernel::algebra::Algebra;
use opkernel::kernel::{random_in_m, OperatorKernel, RandomKernel, RandomParams};
use opkernel::stinespring::Factorization;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type M = DMatrix<Complex64>;

pub fn blocks_alg(dims: &[usize]) -> Arc<Algebra<f64>> {
    Arc::new(Algebra::from_matrix_blocks(dims).unwrap())
}

pub fn instance(alg: &Arc<Algebra<f64>>, mult: &[usize], m: usize, n: usize, seed: u64) -> RandomKernel<f64> {
    random_in_m(
        alg.clone(),
        &RandomParams {
            m,
            n,
            multiplicities: mult.to_vec(),
            seed,
        },
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> M {
    M::from_fn(rows, cols, |_, _| gauss(rng))
}

pub fn fro(m: &M) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Random block configuration with total dimension at most `max_sum` and
/// multiplicities in `1..=max_mult`.
pub fn random_config(rng: &mut ChaCha8Rng, max_sum: usize, max_mult: usize) -> (Vec<usize>, Vec<usize>) {
    let mut dims = Vec::new();
    let mut left = max_sum;
    loop {
        let d = rng.random_range(1..=left.min(3));
        dims.push(d);
        left -= d;
        if left == 0 || rng.random_bool(0.5) {
            break;
        }
    }
    let mult = dims.iter().map(|_| rng.random_range(1..=max_mult)).collect();
    (dims, mult)
}

/// Coordinates of a matrix in the algebra basis by trace inner products.
pub fn coords_of(alg: &Algebra<f64>, x: &M) -> Vec<Complex64> {
    alg.basis()
        .iter()
        .map(|b| {
            let num: Complex64 = b.iter().zip(x.iter()).map(|(p, q)| p.conj() * q).sum();
            let den: f64 = b.iter().map(|p| p.norm_sqr()).sum();
            num / den
        })
        .collect()
}

/// `K(s_i, s_j)(x)` for an algebra element given as a matrix.
pub fn eval_matrix(k: &OperatorKernel<f64>, i: usize, j: usize, x: &M) -> M {
    let n = k.hdim();
    let mut out = M::zeros(n, n);
    for (g, c) in coords_of(k.algebra(), x).into_iter().enumerate() {
        out += k.block(i, j, g) * c;
    }
    out
}

/// `sum_{i,j} <u_i, K(s_i, s_j)(a_i* a_j) u_j>` with the `a_i` given as matrices.
pub fn family_sum(k: &OperatorKernel<f64>, family: &[(usize, M, nalgebra::DVector<Complex64>)]) -> (Complex64, f64) {
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for (i, a, u) in family {
        for (j, b, w) in family {
            let x = a.adjoint() * b;
            let term = u.dotc(&(eval_matrix(k, *i, *j, &x) * w));
            scale += term.norm();
            total += term;
        }
    }
    (total, scale.max(1.0))
}

/// Scalar-lift Gram matrix computed entry by entry from matrix products.
pub fn gram_oracle(k: &OperatorKernel<f64>) -> M {
    let alg = k.algebra();
    let (m, d, n) = (k.m(), alg.dim(), k.hdim());
    let size = m * d * n;
    let mut g = M::zeros(size, size);
    for i in 0..m {
        for a in 0..d {
            for j in 0..m {
                for b in 0..d {
                    let x = alg.basis()[a].adjoint() * &alg.basis()[b];
                    let blk = eval_matrix(k, i, j, &x);
                    for p in 0..n {
                        for q in 0..n {
                            g[((i * d + a) * n + p, (j * d + b) * n + q)] = blk[(p, q)];
                        }
                    }
                }
            }
        }
    }
    g
}

pub fn min_eigenvalue(h: &M) -> f64 {
    let h = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Least-squares solution of `V_L(s_i)* pi(e_a) A V_L(s_j) = K(s_i, s_j)(e_a)`
/// together with `A pi(e_a) = pi(e_a) A`, by QR of the stacked system (which
/// has full column rank when the factorization is minimal).
pub fn rn_oracle(k: &OperatorKernel<f64>, fl: &Factorization<f64>) -> M {
    let r = fl.r();
    let (m, d, n) = (k.m(), k.algebra().dim(), k.hdim());
    let rows = m * m * d * n * n + d * r * r;
    let mut sys = M::zeros(rows, r * r);
    let mut rhs = nalgebra::DVector::<Complex64>::zeros(rows);
    let mut row = 0;
    // vec(X A Y) = (Y^T kron X) vec(A), column-major
    for i in 0..m {
        for j in 0..m {
            for a in 0..d {
                let x = fl.v()[i].adjoint() * &fl.pi()[a];
                let y = &fl.v()[j];
                let coeff = y.transpose().kronecker(&x);
                let target = k.block(i, j, a);
                for c in 0..n * n {
                    sys.row_mut(row).copy_from(&coeff.row(c));
                    rhs[row] = target[c];
                    row += 1;
                }
            }
        }
    }
    let id = M::identity(r, r);
    for a in 0..d {
        let p = &fl.pi()[a];
        let coeff = id.kronecker(p) - p.transpose().kronecker(&id);
        for c in 0..r * r {
            sys.row_mut(row).copy_from(&coeff.row(c));
            row += 1;
        }
    }
    let qr = sys.qr();
    let sol = qr.r().solve_upper_triangular(&(qr.q().adjoint() * rhs)).unwrap();
    M::from_column_slice(r, r, sol.as_slice())
}

/// Multiplication table of the symmetric group on three letters, built from
/// explicit permutation arrays composed as functions.
pub fn s3_table() -> Vec<Vec<usize>> {
    let mut perms = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                if a != b && b != c && a != c {
                    perms.push([a, b, c]);
                }
            }
        }
    }
    let index = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
    perms
        .iter()
        .map(|s| perms.iter().map(|t| index([s[t[0]], s[t[1]], s[t[2]]])).collect())
        .collect()
}

pub fn z3_table() -> Vec<Vec<usize>> {
    (0..3).map(|g| (0..3).map(|h| (g + h) % 3).collect()).collect()
}

/// Largest `||T pi(e_a) - pi(e_a) T||` relative to `max(1, ||T||)`.
pub fn commutator_residual(t: &M, pi: &[M]) -> f64 {
    let scale = fro(t).max(1.0);
    pi.iter().map(|p| fro(&(t * p - p * t)) / scale).fold(0.0, f64::max)
}

/// Largest relative block residual of `V(s_i)* pi(e_a) W V(s_j)` against `k`.
pub fn compression_residual(k: &OperatorKernel<f64>, v: &[M], pi: &[M], w: &M) -> f64 {
    let (m, d) = (k.m(), k.algebra().dim());
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for a in 0..d {
                let blk = v[i].adjoint() * &pi[a] * w * &v[j];
                let target = k.block(i, j, a);
                worst = worst.max(fro(&(blk - target)) / fro(target).max(1.0));
            }
        }
    }
    worst
}
