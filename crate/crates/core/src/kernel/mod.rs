//! Desk-scale operator-valued kernels `K: X x X -> L(A, L(H))`.
//!
//! A kernel is stored as the tensor of blocks `K(s_i, s_j)(e_a)` over a finite
//! point set, the basis of the algebra and `H = C^n`. Positivity is decided on
//! the scalar lift
//!
//! ```text
//! K~((s_i, e_a, e_p), (s_j, e_b, e_q)) = <e_p, K(s_i, s_j)(e_a* e_b) e_q>
//! ```
//!
//! evaluated over the grid `X x basis(A) x basis(H)`. Because the positivity
//! sum is sesquilinear in the family, the grid Gram matrix being positive
//! semidefinite is equivalent to membership in the class for all finite
//! families.

pub(crate) mod random;

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{Algebra, Element};
use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_defect, hermitize, HermitianEigen};
use crate::num::{cabs, cconj, czero, floor_one, frobenius, max_abs, CMatrix, CVector, Real, C};

pub use random::{random_in_m, GroundTruth, RandomParams, RandomKernel};

/// Absolute (floored) tolerance for the Hermitian symmetry of block data.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default slack of the positivity test.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;
/// Number of grid triples listed in a witness report.
pub const WITNESS_TERMS: usize = 10;

#[derive(Debug, Clone)]
pub struct OperatorKernel<T: Real> {
    points: Vec<String>,
    hdim: usize,
    algebra: Arc<Algebra<T>>,
    /// Indexed `(i * m + j) * D + a`.
    blocks: Vec<CMatrix<T>>,
}

/// Position on the canonical grid: point, algebra basis index, H basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub point: usize,
    pub alpha: usize,
    pub p: usize,
}

#[derive(Debug, Clone)]
pub struct GramGrid<T: Real> {
    pub points: usize,
    pub dim: usize,
    pub hdim: usize,
    pub gram: CMatrix<T>,
}

impl<T: Real> GramGrid<T> {
    pub fn size(&self) -> usize {
        self.gram.nrows()
    }

    /// Row of the triple under lexicographic `(i, a, p)` order.
    pub fn row(&self, g: GridIndex) -> usize {
        (g.point * self.dim + g.alpha) * self.hdim + g.p
    }

    pub fn decode(&self, row: usize) -> GridIndex {
        GridIndex {
            point: row / (self.dim * self.hdim),
            alpha: (row / self.hdim) % self.dim,
            p: row % self.hdim,
        }
    }
}

/// One grid triple of a violating family with its eigenvector coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessTerm {
    pub point: usize,
    pub label: String,
    pub alpha: usize,
    pub p: usize,
    pub coeff: Complex64,
}

/// Eigenvector of the most negative eigenvalue of the grid Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub eigenvalue: f64,
    /// Full eigenvector in grid order.
    pub coefficients: Vec<Complex64>,
    /// Largest-magnitude entries, at most [`WITNESS_TERMS`].
    pub terms: Vec<WitnessTerm>,
}

/// One member `(s, a, u)` of a finite family entering the positivity sum.
#[derive(Debug, Clone)]
pub struct FamilyTerm<T: Real> {
    pub point: usize,
    pub a: Element<T>,
    pub u: CVector<T>,
}

#[derive(Debug, Clone)]
pub struct Membership {
    pub in_class: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub threshold: f64,
    pub witness: Option<Witness>,
}

impl<T: Real> OperatorKernel<T> {
    /// Validates shapes and the Hermitian symmetry
    /// `K(s_j, s_i)(e_a*) = K(s_i, s_j)(e_a)*`.
    pub fn new(
        points: Vec<String>,
        hdim: usize,
        algebra: Arc<Algebra<T>>,
        blocks: Vec<CMatrix<T>>,
    ) -> Result<Self> {
        let m = points.len();
        if m == 0 {
            return Err(invalid("kernel needs at least one point"));
        }
        if hdim == 0 {
            return Err(invalid("hdim must be positive"));
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(invalid(format!("duplicate point label {p:?}")));
            }
        }
        let d = algebra.dim();
        if blocks.len() != m * m * d {
            return Err(Error::MalformedKernel(format!(
                "expected {} blocks, found {}",
                m * m * d,
                blocks.len()
            )));
        }
        if let Some(k) = blocks.iter().position(|b| b.shape() != (hdim, hdim)) {
            return Err(Error::MalformedKernel(format!(
                "block {} has shape {:?}, expected ({hdim}, {hdim})",
                block_label(k, m, d),
                blocks[k].shape()
            )));
        }
        let kernel = Self {
            points,
            hdim,
            algebra,
            blocks,
        };
        kernel.check_hermitian()?;
        Ok(kernel)
    }

    pub fn zeros(points: Vec<String>, hdim: usize, algebra: Arc<Algebra<T>>) -> Result<Self> {
        let n = points.len() * points.len() * algebra.dim();
        Self::new(points, hdim, algebra, vec![CMatrix::zeros(hdim, hdim); n])
    }

    /// Builds the blocks from a function of `(i, j, a)` and validates.
    pub fn from_fn(
        points: Vec<String>,
        hdim: usize,
        algebra: Arc<Algebra<T>>,
        f: impl Fn(usize, usize, usize) -> CMatrix<T>,
    ) -> Result<Self> {
        let m = points.len();
        let d = algebra.dim();
        let mut blocks = Vec::with_capacity(m * m * d);
        for i in 0..m {
            for j in 0..m {
                for a in 0..d {
                    blocks.push(f(i, j, a));
                }
            }
        }
        Self::new(points, hdim, algebra, blocks)
    }

    fn check_hermitian(&self) -> Result<()> {
        let (m, d) = (self.points.len(), self.algebra.dim());
        let scale = floor_one(self.blocks.iter().map(max_abs).fold(T::zero(), |a, b| a.max(b)));
        let tol = T::tol(HERMITIAN_TOL) * scale;
        let inv = self.algebra.involution();
        for i in 0..m {
            for j in 0..m {
                for a in 0..d {
                    let lhs = self.block(j, i, inv[a]);
                    let rhs = self.block(i, j, a).adjoint();
                    let defect = max_abs(&(lhs - rhs));
                    if defect > tol {
                        return Err(Error::MalformedKernel(format!(
                            "block ({},{},{}) is not the adjoint of its mirror (defect {:e})",
                            i + 1,
                            j + 1,
                            a + 1,
                            defect.to_f64_lossy()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn hdim(&self) -> usize {
        self.hdim
    }

    pub fn algebra(&self) -> &Arc<Algebra<T>> {
        &self.algebra
    }

    /// Grid size `m * D * n`.
    pub fn grid_size(&self) -> usize {
        self.m() * self.algebra.dim() * self.hdim
    }

    #[inline]
    pub fn block(&self, i: usize, j: usize, a: usize) -> &CMatrix<T> {
        &self.blocks[(i * self.m() + j) * self.algebra.dim() + a]
    }

    pub fn blocks(&self) -> &[CMatrix<T>] {
        &self.blocks
    }

    /// Kernels over the same points, `H` and algebra.
    pub fn compatible(&self, other: &Self) -> bool {
        self.points == other.points && self.hdim == other.hdim && self.algebra.same_as(&other.algebra)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.compatible(other) {
            return Err(invalid("kernels differ in points, hdim or algebra"));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CMatrix<T>, &CMatrix<T>) -> CMatrix<T>) -> Result<Self> {
        self.check_compatible(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        Self::new(self.points.clone(), self.hdim, self.algebra.clone(), blocks)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            points: self.points.clone(),
            hdim: self.hdim,
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b * C::new(s, T::zero())).collect(),
        }
    }

    /// Largest block difference relative to `max(1, |other block|)`.
    pub fn max_block_residual(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| frobenius(&(a - b)) / floor_one(frobenius(b)))
            .fold(T::zero(), |x, y| x.max(y)))
    }

    /// `K(s_i, s_j)(a)` by linear extension from the basis values.
    pub fn evaluate(&self, i: usize, j: usize, a: &Element<T>) -> Result<CMatrix<T>> {
        let m = self.m();
        if i >= m || j >= m {
            return Err(invalid(format!("point index ({i}, {j}) out of range for {m} points")));
        }
        if a.algebra != self.algebra.id() {
            return Err(invalid("element belongs to a different algebra"));
        }
        let mut out = CMatrix::zeros(self.hdim, self.hdim);
        for (k, z) in a.coords.iter().enumerate() {
            if cabs(*z) != T::zero() {
                out += self.block(i, j, k) * *z;
            }
        }
        Ok(out)
    }

    fn check_grid(&self, g: GridIndex) -> Result<()> {
        if g.point >= self.m() || g.alpha >= self.algebra.dim() || g.p >= self.hdim {
            return Err(invalid(format!(
                "grid triple ({}, {}, {}) out of range",
                g.point + 1,
                g.alpha + 1,
                g.p + 1
            )));
        }
        Ok(())
    }

    /// `<e_p, K(s_i, s_j)(e_a* e_b) e_q>`, linear in the right argument.
    pub fn scalar_lift(&self, left: GridIndex, right: GridIndex) -> Result<C<T>> {
        self.check_grid(left)?;
        self.check_grid(right)?;
        Ok(self
            .algebra
            .adjoint_product(left.alpha, right.alpha)
            .iter()
            .fold(czero(), |acc, &(g, w)| {
                acc + w * self.block(left.point, right.point, g)[(left.p, right.p)]
            }))
    }

    /// Gram matrix of the scalar lift over the canonical grid, before
    /// symmetrization.
    pub fn raw_gram(&self) -> CMatrix<T> {
        let (m, d, n) = (self.m(), self.algebra.dim(), self.hdim);
        let side = d * n;
        let tiles: Vec<(usize, usize, CMatrix<T>)> = (0..m * m)
            .into_par_iter()
            .map(|ij| {
                let (i, j) = (ij / m, ij % m);
                let mut tile = CMatrix::zeros(side, side);
                for a in 0..d {
                    for b in 0..d {
                        for &(g, w) in self.algebra.adjoint_product(a, b) {
                            let blk = self.block(i, j, g);
                            for p in 0..n {
                                for q in 0..n {
                                    tile[(a * n + p, b * n + q)] += w * blk[(p, q)];
                                }
                            }
                        }
                    }
                }
                (i, j, tile)
            })
            .collect();
        let mut gram = CMatrix::zeros(m * side, m * side);
        for (i, j, tile) in tiles {
            gram.view_mut((i * side, j * side), (side, side)).copy_from(&tile);
        }
        gram
    }

    /// Hermitian Gram matrix of the scalar lift. Asymmetry beyond
    /// [`HERMITIAN_TOL`] (relative, floored at 1) is rejected; smaller
    /// asymmetry is averaged away.
    pub fn gram(&self) -> Result<GramGrid<T>> {
        let raw = self.raw_gram();
        let tol = T::tol(HERMITIAN_TOL) * floor_one(max_abs(&raw));
        let defect = hermitian_defect(&raw);
        if defect > tol {
            return Err(Error::MalformedKernel(format!(
                "scalar-lift Gram matrix is not Hermitian (defect {:e})",
                defect.to_f64_lossy()
            )));
        }
        Ok(GramGrid {
            points: self.m(),
            dim: self.algebra.dim(),
            hdim: self.hdim,
            gram: hermitize(&raw),
        })
    }

    /// Membership test: `lambda_min >= -tol * max(1, lambda_max)` for the grid
    /// Gram matrix. A negative answer carries a violating family.
    pub fn is_in_class_m(&self, tol: T) -> Result<Membership> {
        let grid = self.gram()?;
        Ok(membership(&grid, &self.points, tol))
    }

    /// Expands a witness into a finite family with one member per point and
    /// `H` basis vector: `a = sum_a c_(i,a,p) e_a`, `u = e_p`. Its
    /// positivity sum equals the witness eigenvalue.
    pub fn witness_family(&self, witness: &Witness) -> Result<Vec<FamilyTerm<T>>> {
        let (m, d, n) = (self.m(), self.algebra.dim(), self.hdim);
        if witness.coefficients.len() != m * d * n {
            return Err(invalid("witness does not match the kernel grid"));
        }
        let mut family = Vec::with_capacity(m * n);
        for i in 0..m {
            for p in 0..n {
                let coords = CVector::from_iterator(
                    d,
                    (0..d).map(|a| {
                        let z = witness.coefficients[(i * d + a) * n + p];
                        C::new(T::lit(z.re), T::lit(z.im))
                    }),
                );
                let mut u = CVector::zeros(n);
                u[p] = C::new(T::one(), T::zero());
                family.push(FamilyTerm {
                    point: i,
                    a: self.algebra.element(coords)?,
                    u,
                });
            }
        }
        Ok(family)
    }

    /// The positivity sum `sum_ij <u_i, K(s_i, s_j)(a_i* a_j) u_j>`, evaluated
    /// directly through the algebra operations.
    pub fn family_sum(&self, family: &[FamilyTerm<T>]) -> Result<C<T>> {
        let adjoints = family
            .iter()
            .map(|t| self.algebra.adjoint(&t.a))
            .collect::<Result<Vec<_>>>()?;
        let mut total = czero();
        for (ti, ai_star) in family.iter().zip(&adjoints) {
            for tj in family {
                let prod = self.algebra.multiply(ai_star, &tj.a)?;
                let k = self.evaluate(ti.point, tj.point, &prod)?;
                let kv = k * &tj.u;
                total += ti.u.iter().zip(kv.iter()).fold(czero(), |acc, (x, y)| acc + cconj(*x) * *y);
            }
        }
        Ok(total)
    }
}

pub(crate) fn membership<T: Real>(grid: &GramGrid<T>, labels: &[String], tol: T) -> Membership {
    let eig = HermitianEigen::new(&grid.gram);
    let (lmin, lmax) = (eig.min(), eig.max());
    let threshold = -tol * floor_one(lmax);
    let in_class = lmin >= threshold;
    let witness = (!in_class).then(|| {
        let col = eig.vectors.column(eig.values.len() - 1);
        let coefficients: Vec<Complex64> = col
            .iter()
            .map(|z| Complex64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()))
            .collect();
        let mut order: Vec<usize> = (0..coefficients.len()).collect();
        order.sort_by(|&a, &b| {
            coefficients[b]
                .norm()
                .partial_cmp(&coefficients[a].norm())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let terms = order
            .into_iter()
            .take(WITNESS_TERMS)
            .map(|row| {
                let g = grid.decode(row);
                WitnessTerm {
                    point: g.point,
                    label: labels[g.point].clone(),
                    alpha: g.alpha,
                    p: g.p,
                    coeff: coefficients[row],
                }
            })
            .collect();
        Witness {
            eigenvalue: lmin.to_f64_lossy(),
            coefficients,
            terms,
        }
    });
    Membership {
        in_class,
        min_eigenvalue: lmin.to_f64_lossy(),
        max_eigenvalue: lmax.to_f64_lossy(),
        threshold: threshold.to_f64_lossy(),
        witness,
    }
}

fn block_label(k: usize, m: usize, d: usize) -> String {
    let a = k % d;
    let ij = k / d;
    format!("({},{},{})", ij / m + 1, ij % m + 1, a + 1)
}

/// Default point labels `s1, ..., sm`.
pub fn point_labels(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("s{i}")).collect()
}
