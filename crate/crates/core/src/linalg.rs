//! Dense complex linear algebra shared by the kernel modules.

use nalgebra::linalg::{SymmetricEigen, SVD};
use nalgebra::DMatrix;

use crate::num::{cabs, cr, czero, floor_one, frobenius, CMatrix, Real};

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of `vectors` are the matching eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn new(m: &CMatrix<T>) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: CMatrix::zeros(0, 0),
            };
        }
        let eig = SymmetricEigen::new(hermitize(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self { values, vectors }
    }

    pub fn max(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn min(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    /// Rebuilds `U f(Λ) U*`.
    pub fn map(&self, f: impl Fn(T) -> T) -> CMatrix<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = cr(f(v));
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn hermitize<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let half = cr(T::lit(0.5));
    (m + m.adjoint()) * half
}

/// Largest entrywise deviation `|m - m*|`.
pub fn hermitian_defect<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = m[(i, j)] - m[(j, i)].conj();
            worst = worst.max(cabs(d));
        }
    }
    worst
}

/// Singular value decomposition with singular values sorted descending and a
/// full set of right singular vectors (wide inputs are padded with zero rows).
pub(crate) fn full_svd<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>, CMatrix<T>) {
    let (rows, cols) = m.shape();
    let padded;
    let src = if rows < cols {
        let mut p = CMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let svd = SVD::new(src.clone(), true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = CMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
    let v_t = CMatrix::from_fn(k, v_t.ncols(), |i, j| v_t[(order[i], j)]);
    (sv, u, v_t)
}

/// Orthonormal basis of the nullspace of `m`, as columns, using the relative
/// singular value cutoff `sigma <= rel_cut * sigma_max`. A zero matrix has
/// the whole space as nullspace.
pub fn nullspace<T: Real>(m: &CMatrix<T>, rel_cut: T) -> CMatrix<T> {
    let cols = m.ncols();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    let (sv, _, v_t) = full_svd(m);
    let smax = sv.first().copied().unwrap_or_else(T::zero);
    let cut = rel_cut * smax;
    let null_rows: Vec<usize> = (0..v_t.nrows())
        .filter(|&i| smax == T::zero() || sv[i] <= cut)
        .collect();
    CMatrix::from_fn(cols, null_rows.len(), |i, j| v_t[(null_rows[j], i)].conj())
}

/// Numerical rank with relative singular value cutoff, plus the ratio
/// `sigma_min_kept / sigma_max` (1 for empty or zero matrices).
pub fn rank<T: Real>(m: &CMatrix<T>, rel_cut: T) -> (usize, T) {
    if m.is_empty() {
        return (0, T::one());
    }
    let (sv, _, _) = full_svd(m);
    let smax = sv[0];
    if smax == T::zero() {
        return (0, T::one());
    }
    let kept: Vec<T> = sv.into_iter().filter(|&s| s > rel_cut * smax).collect();
    let ratio = kept.last().map(|&s| s / smax).unwrap_or_else(T::one);
    (kept.len(), ratio)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, rel_cut: T) -> CMatrix<T> {
    let (sv, u, v_t) = full_svd(a);
    let smax = sv.first().copied().unwrap_or_else(T::zero);
    let k = sv.len();
    let ub = u.adjoint() * b;
    let mut y = CMatrix::zeros(k, b.ncols());
    for i in 0..k {
        if smax > T::zero() && sv[i] > rel_cut * smax {
            let inv = cr(T::one() / sv[i]);
            for j in 0..b.ncols() {
                y[(i, j)] = ub[(i, j)] * inv;
            }
        }
    }
    let x = v_t.adjoint() * y;
    x.rows(0, a.ncols()).into_owned()
}

/// Unitary `W` minimizing `|W x - y|_F` (orthogonal Procrustes).
pub fn procrustes<T: Real>(x: &CMatrix<T>, y: &CMatrix<T>) -> CMatrix<T> {
    let r = x.nrows();
    if r == 0 {
        return CMatrix::zeros(0, 0);
    }
    let cross = y * x.adjoint();
    let (_, u, v_t) = full_svd(&cross);
    u * v_t
}

/// Column-major vectorization of a square matrix.
pub fn vec_of<T: Real>(m: &CMatrix<T>) -> Vec<crate::num::C<T>> {
    m.iter().copied().collect()
}

pub fn unvec<T: Real>(v: &[crate::num::C<T>], rows: usize, cols: usize) -> CMatrix<T> {
    CMatrix::from_column_slice(rows, cols, v)
}

/// `|a - b|_F / max(1, |b|_F)`.
pub fn rel_residual<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    frobenius(&(a - b)) / floor_one(frobenius(b))
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

pub fn zeros<T: Real>(r: usize, c: usize) -> CMatrix<T> {
    DMatrix::from_element(r, c, czero())
}

/// Orthonormal basis (Frobenius / trace inner product) of the commutant of a
/// family of square matrices: all `Z` with `Z P = P Z` for every `P`.
pub fn commutant_basis<T: Real>(family: &[CMatrix<T>], rel_cut: T) -> Vec<CMatrix<T>> {
    let r = match family.first() {
        Some(p) => p.nrows(),
        None => return Vec::new(),
    };
    if r == 0 {
        return Vec::new();
    }
    let id = identity::<T>(r);
    let r2 = r * r;
    let mut stacked = zeros::<T>(family.len() * r2, r2);
    for (k, p) in family.iter().enumerate() {
        // vec(Z P) = (P^T (x) I) vec(Z), vec(P Z) = (I (x) P) vec(Z)
        let op = p.transpose().kronecker(&id) - id.kronecker(p);
        stacked.view_mut((k * r2, 0), (r2, r2)).copy_from(&op);
    }
    let null = nullspace(&stacked, rel_cut);
    null.column_iter()
        .map(|col| {
            let v: Vec<_> = col.iter().copied().collect();
            unvec(&v, r, r)
        })
        .collect()
}

/// Orthogonal projection of `x` onto the span of an orthonormal matrix basis.
pub fn project_onto<T: Real>(x: &CMatrix<T>, basis: &[CMatrix<T>]) -> CMatrix<T> {
    let mut out = zeros::<T>(x.nrows(), x.ncols());
    for z in basis {
        let coeff = z.dotc(x);
        out += z * coeff;
    }
    out
}
