//! Seeded kernels with a known factorization, `K(s,t)(a) = V(s)* pi(a) W V(t)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{Algebra, Origin};
use crate::error::{invalid, Result};
use crate::linalg::{commutant_basis, identity, project_onto, HermitianEigen};
use crate::num::{cr, CMatrix, Real, C};

use super::{point_labels, OperatorKernel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomParams {
    pub m: usize,
    pub n: usize,
    /// Copies of each diagonal block of the defining representation.
    pub multiplicities: Vec<usize>,
    pub seed: u64,
}

/// Ground truth retained by the generator for oracle comparisons.
#[derive(Debug, Clone)]
pub struct GroundTruth<T: Real> {
    /// `V(s_i)`, each `r x n`.
    pub v: Vec<CMatrix<T>>,
    /// `pi(e_a)`, each `r x r`.
    pub pi: Vec<CMatrix<T>>,
    pub multiplicities: Vec<usize>,
    /// Multiplicities of the cyclic subrepresentation generated by the
    /// `V(s_i)` (matrix-block algebras only).
    pub effective_multiplicities: Option<Vec<usize>>,
    /// Dimension of the commutant of the minimal representation
    /// (`sum eff_mult^2`, matrix-block algebras only).
    pub commutant_dim: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RandomKernel<T: Real> {
    pub kernel: OperatorKernel<T>,
    pub truth: GroundTruth<T>,
}

pub(crate) fn normal<T: Real>(rng: &mut impl Rng) -> C<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C::new(T::lit(re), T::lit(im))
}

pub(crate) fn normal_matrix<T: Real>(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix<T> {
    let mut out = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = normal(rng);
        }
    }
    out
}

/// Draws `V(s_i)` with standard complex normal entries and sets
/// `K(s_i, s_j)(e_a) = V(s_i)* pi(e_a) V(s_j)` where `pi` repeats each diagonal
/// block of the algebra's defining representation `multiplicities[k]` times.
pub fn random_in_m<T: Real>(algebra: Arc<Algebra<T>>, params: &RandomParams) -> Result<RandomKernel<T>> {
    let RandomParams {
        m,
        n,
        ref multiplicities,
        seed,
    } = *params;
    if m == 0 || n == 0 {
        return Err(invalid("m and n must be positive"));
    }
    let dims = algebra.block_dims();
    if multiplicities.len() != dims.len() {
        return Err(invalid(format!(
            "{} multiplicities given for {} blocks",
            multiplicities.len(),
            dims.len()
        )));
    }
    if multiplicities.iter().all(|&k| k == 0) {
        return Err(invalid("all multiplicities are zero; the representation would be degenerate"));
    }
    let r: usize = dims.iter().zip(multiplicities).map(|(d, k)| d * k).sum();
    let pi: Vec<CMatrix<T>> = (0..algebra.dim())
        .map(|a| {
            let mut p = CMatrix::zeros(r, r);
            let mut off = 0;
            for (k, (&d, &mult)) in dims.iter().zip(multiplicities).enumerate() {
                let blk = algebra.basis_block(a, k);
                for _ in 0..mult {
                    p.view_mut((off, off), (d, d)).copy_from(&blk);
                    off += d;
                }
            }
            p
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<CMatrix<T>> = (0..m).map(|_| normal_matrix(&mut rng, r, n)).collect();

    let (effective_multiplicities, commutant_dim) = match algebra.origin() {
        Origin::MatrixBlocks => {
            let eff: Vec<usize> = dims
                .iter()
                .zip(multiplicities)
                .map(|(&d, &k)| k.min(m * n * d))
                .collect();
            let cd = eff.iter().map(|k| k * k).sum();
            (Some(eff), Some(cd))
        }
        Origin::GroupAlgebra { .. } => (None, None),
    };
    let truth = GroundTruth {
        v,
        pi,
        multiplicities: multiplicities.clone(),
        effective_multiplicities,
        commutant_dim,
    };
    let kernel = truth.kernel(point_labels(m), algebra, None)?;
    Ok(RandomKernel { kernel, truth })
}

impl<T: Real> GroundTruth<T> {
    pub fn r(&self) -> usize {
        self.pi.first().map_or(0, |p| p.nrows())
    }

    pub fn hdim(&self) -> usize {
        self.v.first().map_or(0, |v| v.ncols())
    }

    /// `K(s_i, s_j)(e_a) = V(s_i)* pi(e_a) W V(s_j)`, with `W = I` when absent.
    pub fn kernel(
        &self,
        points: Vec<String>,
        algebra: Arc<Algebra<T>>,
        weight: Option<&CMatrix<T>>,
    ) -> Result<OperatorKernel<T>> {
        let n = self.hdim();
        let right: Vec<CMatrix<T>> = match weight {
            Some(w) => self.v.iter().map(|v| w * v).collect(),
            None => self.v.clone(),
        };
        let left: Vec<CMatrix<T>> = self.v.iter().map(|v| v.adjoint()).collect();
        OperatorKernel::from_fn(points, n, algebra, |i, j, a| &left[i] * &self.pi[a] * &right[j])
    }

    /// Generator matrix with columns `pi(e_b) V(s_j) e_q` in grid order.
    pub fn features(&self) -> CMatrix<T> {
        let (m, d, n) = (self.v.len(), self.pi.len(), self.hdim());
        let mut f = CMatrix::zeros(self.r(), m * d * n);
        for j in 0..m {
            for b in 0..d {
                let cols = &self.pi[b] * &self.v[j];
                f.view_mut((0, (j * d + b) * n), (self.r(), n)).copy_from(&cols);
            }
        }
        f
    }

    /// Orthonormal basis of the commutant of the ground-truth representation.
    pub fn commutant(&self) -> Vec<CMatrix<T>> {
        commutant_basis(&self.pi, T::tol(1e-10))
    }

    /// Random positive contraction in the commutant: the square `Z Z*` of a
    /// random commutant element, rescaled so its top eigenvalue is
    /// `1 / (1 + u)` with `u` uniform in `[0, 1)`.
    pub fn random_commutant_contraction(&self, seed: u64) -> CMatrix<T> {
        let r = self.r();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = normal_matrix::<T>(&mut rng, r, r);
        let z = project_onto(&x, &self.commutant());
        let p = &z * z.adjoint();
        let top = HermitianEigen::new(&p).max();
        let u: f64 = rng.random();
        if top <= T::zero() {
            return identity(r) * cr(T::lit(0.5));
        }
        p * cr(T::one() / (top * T::lit(1.0 + u)))
    }
}
