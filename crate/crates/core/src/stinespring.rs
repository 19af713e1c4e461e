//! Minimal Stinespring-type factorization `K(s,t)(a) = V(s)* pi(a) V(t)`.
//!
//! The dilation space is realized as `C^r` with `r` the numerical rank of the
//! scalar-lift Gram matrix `G = U L U*`. The section `K~_(t,b,v)` has feature
//! coordinates `F[:, (t,b,v)]` with `F = L^(1/2) U*`, so `F* F = G`. Then
//!
//! * `V(t) v` is the feature of `(t, 1, v)`;
//! * `pi(e_a)` is the operator sending the feature of `(t, b, v)` to the feature
//!   of `(t, e_a b, v)`, solved in least squares against `F`.
//!
//! The least-squares residual of the second step is the well-definedness
//! defect of `pi` and is reported as `pi_residual`.

use std::sync::Arc;

use crate::algebra::Algebra;
use crate::error::{invalid, Error, Result};
use crate::kernel::{membership, OperatorKernel, DEFAULT_PSD_TOL};
use crate::linalg::{identity, procrustes, rank, rel_residual, HermitianEigen};
use crate::num::{cr, floor_one, frobenius, CMatrix, Real};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Hard limit on the relative intertwining residual of `pi`.
pub const PI_RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub gram_truncation_error: f64,
    pub pi_residual: f64,
    pub reconstruction_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Factorization<T: Real> {
    source: Arc<OperatorKernel<T>>,
    features: CMatrix<T>,
    v: Vec<CMatrix<T>>,
    pi: Vec<CMatrix<T>>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorOptions {
    pub rank_tol: f64,
    pub psd_tol: f64,
    /// Permutation of grid rows applied before the eigendecomposition
    /// (`order[k]` is the canonical row placed at position `k`).
    pub grid_order: Option<Vec<usize>>,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            psd_tol: DEFAULT_PSD_TOL,
            grid_order: None,
        }
    }
}

/// Factorization with the positivity slack raised to `rank_tol` when that is
/// looser than the default, since eigenvalues below the cutoff are dropped.
pub fn factor<T: Real>(k: &OperatorKernel<T>, rank_tol: T) -> Result<Factorization<T>> {
    let rank_tol = rank_tol.to_f64_lossy();
    factor_with(
        k,
        &FactorOptions {
            rank_tol,
            psd_tol: DEFAULT_PSD_TOL.max(rank_tol),
            grid_order: None,
        },
    )
}

pub fn factor_with<T: Real>(k: &OperatorKernel<T>, opts: &FactorOptions) -> Result<Factorization<T>> {
    if !(opts.rank_tol > 0.0) {
        return Err(invalid("rank_tol must be positive"));
    }
    let grid = k.gram()?;
    let mem = membership(&grid, k.points(), T::lit(opts.psd_tol));
    if !mem.in_class {
        return Err(Error::NotPositive {
            min_eigenvalue: mem.min_eigenvalue,
            threshold: mem.threshold,
            witness: Box::new(mem.witness.expect("negative answer carries a witness")),
        });
    }
    let size = grid.size();
    let eig = match &opts.grid_order {
        None => HermitianEigen::new(&grid.gram),
        Some(order) => {
            check_permutation(order, size)?;
            let permuted = CMatrix::from_fn(size, size, |a, b| grid.gram[(order[a], order[b])]);
            let e = HermitianEigen::new(&permuted);
            let mut vectors = CMatrix::zeros(size, size);
            for (a, &row) in order.iter().enumerate() {
                vectors.row_mut(row).copy_from(&e.vectors.row(a));
            }
            HermitianEigen {
                values: e.values,
                vectors,
            }
        }
    };
    let lmax = eig.max();
    let cut = T::lit(opts.rank_tol) * lmax;
    let r = eig
        .values
        .iter()
        .take_while(|&&l| l > T::zero() && l >= cut)
        .count();
    let mut features = CMatrix::zeros(r, size);
    for s in 0..r {
        let root = eig.values[s].sqrt();
        for col in 0..size {
            features[(s, col)] = eig.vectors[(col, s)].conj() * root;
        }
    }
    let algebra = k.algebra().clone();
    let v = unit_sections(&features, &algebra, k.m(), k.hdim());
    // pseudo-inverse of F is U_kept L^(-1/2)
    let mut pinv = CMatrix::zeros(size, r);
    for s in 0..r {
        let inv_root = T::one() / eig.values[s].sqrt();
        for col in 0..size {
            pinv[(col, s)] = eig.vectors[(col, s)] * cr(inv_root);
        }
    }
    let pi: Vec<CMatrix<T>> = (0..algebra.dim())
        .map(|a| shifted_features(&features, &algebra, a, k.m(), k.hdim()) * &pinv)
        .collect();
    let fact = Factorization::assemble(Arc::new(k.clone()), features, v, pi, &grid.gram, lmax)?;
    Ok(fact)
}

fn check_permutation(order: &[usize], size: usize) -> Result<()> {
    let mut seen = vec![false; size];
    if order.len() != size {
        return Err(invalid("grid order has the wrong length"));
    }
    for &o in order {
        if o >= size || seen[o] {
            return Err(invalid("grid order is not a permutation"));
        }
        seen[o] = true;
    }
    Ok(())
}

/// `V(t)` column `q` is `sum_b unit_b F[:, (t, b, q)]`.
fn unit_sections<T: Real>(f: &CMatrix<T>, alg: &Algebra<T>, m: usize, n: usize) -> Vec<CMatrix<T>> {
    let d = alg.dim();
    let unit = alg.unit_coords();
    (0..m)
        .map(|t| {
            let mut v = CMatrix::zeros(f.nrows(), n);
            for b in 0..d {
                if unit[b] == num_complex::Complex::new(T::zero(), T::zero()) {
                    continue;
                }
                let cols = f.columns((t * d + b) * n, n);
                v += cols * unit[b];
            }
            v
        })
        .collect()
}

/// Feature matrix with each section `(t, b, q)` replaced by `(t, e_a b, q)`.
fn shifted_features<T: Real>(f: &CMatrix<T>, alg: &Algebra<T>, a: usize, m: usize, n: usize) -> CMatrix<T> {
    let d = alg.dim();
    let mut out = CMatrix::zeros(f.nrows(), f.ncols());
    for t in 0..m {
        for b in 0..d {
            for &(g, w) in alg.basis_product(a, b) {
                let src = f.columns((t * d + g) * n, n) * w;
                let mut dst = out.columns_mut((t * d + b) * n, n);
                dst += src;
            }
        }
    }
    out
}

/// Columns `pi(e_b) V(t) e_q` in grid order.
fn generators<T: Real>(v: &[CMatrix<T>], pi: &[CMatrix<T>], r: usize, n: usize) -> CMatrix<T> {
    let (m, d) = (v.len(), pi.len());
    let mut f = CMatrix::zeros(r, m * d * n);
    for t in 0..m {
        for b in 0..d {
            f.columns_mut((t * d + b) * n, n).copy_from(&(&pi[b] * &v[t]));
        }
    }
    f
}

impl<T: Real> Factorization<T> {
    fn assemble(
        source: Arc<OperatorKernel<T>>,
        features: CMatrix<T>,
        v: Vec<CMatrix<T>>,
        pi: Vec<CMatrix<T>>,
        gram: &CMatrix<T>,
        lmax: T,
    ) -> Result<Self> {
        let alg = source.algebra().clone();
        let (m, n) = (source.m(), source.hdim());
        let trunc = frobenius(&(features.adjoint() * &features - gram)) / floor_one(lmax);
        let fnorm = floor_one(frobenius(&features));
        let pi_res = (0..alg.dim())
            .map(|a| frobenius(&(&pi[a] * &features - shifted_features(&features, &alg, a, m, n))) / fnorm)
            .fold(T::zero(), |x, y| x.max(y));
        let mut fact = Self {
            source,
            features,
            v,
            pi,
            diagnostics: Diagnostics {
                gram_truncation_error: trunc.to_f64_lossy(),
                pi_residual: pi_res.to_f64_lossy(),
                reconstruction_residual: 0.0,
            },
        };
        if pi_res > T::tol(PI_RESIDUAL_LIMIT) {
            return Err(Error::IllConditioned {
                residual: pi_res.to_f64_lossy(),
                threshold: PI_RESIDUAL_LIMIT,
            });
        }
        let rebuilt = fact.reconstruct()?;
        fact.diagnostics.reconstruction_residual = rebuilt.max_block_residual(&fact.source)?.to_f64_lossy();
        Ok(fact)
    }

    /// Rebuilds a factorization from exported `V(t)` and `pi(e_a)` for the
    /// given kernel; the feature matrix is regenerated as `pi(e_b) V(t) e_q`.
    pub fn from_parts(kernel: &OperatorKernel<T>, v: Vec<CMatrix<T>>, pi: Vec<CMatrix<T>>) -> Result<Self> {
        let (m, n, d) = (kernel.m(), kernel.hdim(), kernel.algebra().dim());
        if v.len() != m || pi.len() != d {
            return Err(invalid(format!(
                "factorization has {} V and {} pi matrices, kernel needs {m} and {d}",
                v.len(),
                pi.len()
            )));
        }
        let r = pi.first().map_or(0, |p| p.nrows());
        if let Some(t) = v.iter().position(|x| x.shape() != (r, n)) {
            return Err(invalid(format!("V({}) has shape {:?}, expected ({r}, {n})", t + 1, v[t].shape())));
        }
        if let Some(a) = pi.iter().position(|x| x.shape() != (r, r)) {
            return Err(invalid(format!("pi({}) has shape {:?}, expected ({r}, {r})", a + 1, pi[a].shape())));
        }
        let grid = kernel.gram()?;
        let lmax = HermitianEigen::new(&grid.gram).max();
        let features = generators(&v, &pi, r, n);
        Self::assemble(Arc::new(kernel.clone()), features, v, pi, &grid.gram, lmax)
    }

    pub fn r(&self) -> usize {
        self.features.nrows()
    }

    pub fn source(&self) -> &OperatorKernel<T> {
        &self.source
    }

    pub fn algebra(&self) -> &Arc<Algebra<T>> {
        self.source.algebra()
    }

    /// `r x M` feature matrix, columns in grid order.
    pub fn features(&self) -> &CMatrix<T> {
        &self.features
    }

    pub fn v(&self) -> &[CMatrix<T>] {
        &self.v
    }

    pub fn pi(&self) -> &[CMatrix<T>] {
        &self.pi
    }

    /// `pi(a) = sum_a coords_a pi(e_a)`.
    pub fn rep_matrix(&self, a: &crate::algebra::Element<T>) -> Result<CMatrix<T>> {
        if a.algebra != self.algebra().id() {
            return Err(invalid("element belongs to a different algebra"));
        }
        let r = self.r();
        Ok(a
            .coords
            .iter()
            .zip(&self.pi)
            .fold(CMatrix::zeros(r, r), |acc, (z, p)| acc + p * *z))
    }

    /// `V(s_i)* pi(e_a) W V(s_j)` for all blocks, `W = I` when absent.
    pub(crate) fn compress(&self, middle: Option<&CMatrix<T>>) -> Result<OperatorKernel<T>> {
        let left: Vec<CMatrix<T>> = self.v.iter().map(|v| v.adjoint()).collect();
        let right: Vec<CMatrix<T>> = match middle {
            Some(w) => self.v.iter().map(|v| w * v).collect(),
            None => self.v.clone(),
        };
        OperatorKernel::from_fn(
            self.source.points().to_vec(),
            self.source.hdim(),
            self.algebra().clone(),
            |i, j, a| &left[i] * &self.pi[a] * &right[j],
        )
    }

    /// The kernel `V(s)* pi(e_a) V(t)`.
    pub fn reconstruct(&self) -> Result<OperatorKernel<T>> {
        self.compress(None)
    }

    /// Largest relative block residual of `V(s)* pi(e_a) V(t)` against the
    /// source kernel, computed without requiring the result to be Hermitian.
    fn reconstruction_residual(&self) -> T {
        let m = self.source.m();
        let d = self.algebra().dim();
        let mut worst = T::zero();
        for i in 0..m {
            let left = self.v[i].adjoint();
            for a in 0..d {
                let lp = &left * &self.pi[a];
                for j in 0..m {
                    let blk = &lp * &self.v[j];
                    worst = worst.max(rel_residual(&blk, self.source.block(i, j, a)));
                }
            }
        }
        worst
    }

    pub fn verify(&self, tol: T) -> Result<VerifyReport> {
        let alg = self.algebra().clone();
        let d = alg.dim();
        let r = self.r();
        let rel = |a: &CMatrix<T>, b: &CMatrix<T>| rel_residual(a, b);

        let mut star = T::zero();
        for a in 0..d {
            let adj = alg.adjoint(&alg.basis_element(a))?;
            star = star.max(rel(&self.pi[a].adjoint(), &self.rep_matrix(&adj)?));
        }
        let mut hom = T::zero();
        for a in 0..d {
            for b in 0..d {
                let ab = alg.multiply(&alg.basis_element(a), &alg.basis_element(b))?;
                hom = hom.max(rel(&(&self.pi[a] * &self.pi[b]), &self.rep_matrix(&ab)?));
            }
        }
        let unit = rel(&self.rep_matrix(&alg.unit())?, &identity(r));
        let recon = self.reconstruction_residual();
        let n = self.source.hdim();
        let (rk, ratio) = rank(&generators(&self.v, &self.pi, r, n), tol);
        let check = |res: T| Check {
            pass: res <= tol,
            residual: res.to_f64_lossy(),
        };
        Ok(VerifyReport {
            star_law: check(star),
            homomorphism: check(hom),
            unitality: check(unit),
            reconstruction: check(recon),
            minimality: MinimalityCheck {
                pass: rk == r,
                rank: rk,
                r,
                conditioning: ratio.to_f64_lossy(),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub pass: bool,
    pub residual: f64,
}

/// Rank of the stacked generators `pi(e_a) V(t)` against `r`;
/// `conditioning` is `sigma_min / sigma_max` over the kept singular values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalityCheck {
    pub pass: bool,
    pub rank: usize,
    pub r: usize,
    pub conditioning: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyReport {
    pub star_law: Check,
    pub homomorphism: Check,
    pub unitality: Check,
    pub reconstruction: Check,
    pub minimality: MinimalityCheck,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.star_law.pass
            && self.homomorphism.pass
            && self.unitality.pass
            && self.reconstruction.pass
            && self.minimality.pass
    }
}

/// Unitary `W` aligning two factorizations of the same kernel:
/// `W pi_1(a) V_1(t) u ~ pi_2(a) V_2(t) u`.
#[derive(Debug, Clone)]
pub struct UnitaryEquivalence<T: Real> {
    pub w: CMatrix<T>,
    /// `|W F_1 - F_2|_F / max(1, |F_2|_F)` over all generators.
    pub generator_residual: f64,
    /// `max_a |W pi_1(e_a) W* - pi_2(e_a)|_F`, relative.
    pub pi_residual: f64,
}

impl<T: Real> UnitaryEquivalence<T> {
    pub fn residual(&self) -> f64 {
        self.generator_residual.max(self.pi_residual)
    }
}

pub fn unitary_equivalence<T: Real>(
    first: &Factorization<T>,
    second: &Factorization<T>,
) -> Result<UnitaryEquivalence<T>> {
    if first.r() != second.r() || first.features.ncols() != second.features.ncols() {
        return Err(invalid(format!(
            "factorizations have different shapes (r = {} vs {})",
            first.r(),
            second.r()
        )));
    }
    let w = procrustes(&first.features, &second.features);
    let generator_residual = rel_residual(&(&w * &first.features), &second.features);
    let pi_residual = first
        .pi
        .iter()
        .zip(&second.pi)
        .map(|(p1, p2)| rel_residual(&(&w * p1 * w.adjoint()), p2))
        .fold(T::zero(), |x, y| x.max(y));
    Ok(UnitaryEquivalence {
        w,
        generator_residual: generator_residual.to_f64_lossy(),
        pi_residual: pi_residual.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{point_labels, random_in_m, RandomParams};
    use crate::num::{c, cr};

    fn scalar_alg() -> Arc<Algebra<f64>> {
        Arc::new(Algebra::from_matrix_blocks(&[1]).unwrap())
    }

    #[test]
    fn two_times_identity() {
        let k = OperatorKernel::from_fn(point_labels(1), 1, scalar_alg(), |_, _, _| {
            CMatrix::from_element(1, 1, cr(2.0))
        })
        .unwrap();
        let f = factor(&k, 1e-10).unwrap();
        assert_eq!(f.r(), 1);
        assert!((f.features()[(0, 0)].norm() - 2f64.sqrt()).abs() < 1e-14);
        assert!((f.v()[0][(0, 0)].norm() - 2f64.sqrt()).abs() < 1e-14);
        assert!((f.pi()[0][(0, 0)] - cr(1.0)).norm() < 1e-14);
        assert!(f.verify(1e-8).unwrap().all_pass());
    }

    #[test]
    fn zero_kernel_has_rank_zero() {
        let alg = Arc::new(Algebra::<f64>::from_matrix_blocks(&[2]).unwrap());
        let k = OperatorKernel::zeros(point_labels(2), 2, alg).unwrap();
        let f = factor(&k, 1e-10).unwrap();
        assert_eq!(f.r(), 0);
        assert_eq!(f.diagnostics.reconstruction_residual, 0.0);
        let rep = f.verify(1e-8).unwrap();
        assert!(rep.all_pass());
        let back = f.reconstruct().unwrap();
        assert!(back.blocks().iter().all(|b| b.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn negative_kernel_fails_with_witness() {
        let k = OperatorKernel::from_fn(point_labels(1), 1, scalar_alg(), |_, _, _| {
            CMatrix::from_element(1, 1, cr(-1.0))
        })
        .unwrap();
        match factor(&k, 1e-10) {
            Err(Error::NotPositive { witness, .. }) => assert_eq!(witness.terms.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(factor(&k, 0.0).is_err());
    }

    #[test]
    fn random_instance_round_trip() {
        let alg = Arc::new(Algebra::<f64>::from_matrix_blocks(&[1, 2]).unwrap());
        let params = RandomParams {
            m: 3,
            n: 2,
            multiplicities: vec![2, 1],
            seed: 42,
        };
        let rk = random_in_m(alg.clone(), &params).unwrap();
        let f = factor(&rk.kernel, 1e-10).unwrap();
        assert_eq!(f.r(), 4);
        assert!(f.diagnostics.reconstruction_residual < 1e-8);
        assert!(f.verify(1e-8).unwrap().all_pass());
        // contraction bound on basis elements
        for a in 0..alg.dim() {
            let op = crate::linalg::full_svd(&f.pi()[a]).0[0];
            let bound = alg.op_norm(&alg.basis_element(a)).unwrap();
            assert!(op <= bound * (1.0 + 1e-6));
        }
        // rebuilt from parts gives the same kernel
        let g = Factorization::from_parts(&rk.kernel, f.v().to_vec(), f.pi().to_vec()).unwrap();
        assert!(g.diagnostics.pi_residual < 1e-10);
        assert!(unitary_equivalence(&f, &g).unwrap().residual() < 1e-10);
    }

    #[test]
    fn transposed_pi_is_detected() {
        let alg = Arc::new(Algebra::<f64>::from_matrix_blocks(&[2]).unwrap());
        let params = RandomParams {
            m: 2,
            n: 2,
            multiplicities: vec![1],
            seed: 1,
        };
        let rk = random_in_m(alg, &params).unwrap();
        let f = factor(&rk.kernel, 1e-10).unwrap();
        let mut pi = f.pi().to_vec();
        pi[1] = pi[1].transpose();
        let corrupted = Factorization {
            pi,
            ..f.clone()
        };
        let rep = corrupted.verify(1e-8).unwrap();
        assert!(!rep.star_law.pass || !rep.homomorphism.pass);
    }

    #[test]
    fn unitary_gauge_does_not_change_kernel() {
        let alg = Arc::new(Algebra::<f64>::from_matrix_blocks(&[2]).unwrap());
        let params = RandomParams {
            m: 2,
            n: 1,
            multiplicities: vec![1],
            seed: 4,
        };
        let rk = random_in_m(alg, &params).unwrap();
        let f = factor(&rk.kernel, 1e-10).unwrap();
        let th: f64 = 0.3;
        let u = CMatrix::from_row_slice(2, 2, &[cr(th.cos()), c(0.0, th.sin()), c(0.0, th.sin()), cr(th.cos())]);
        let v = f.v().iter().map(|x| &u * x).collect();
        let pi = f.pi().iter().map(|p| &u * p * u.adjoint()).collect();
        let g = Factorization::from_parts(&rk.kernel, v, pi).unwrap();
        assert!(g.reconstruct().unwrap().max_block_residual(&rk.kernel).unwrap() < 1e-12);
        let eq = unitary_equivalence(&f, &g).unwrap();
        assert!(rel_residual(&eq.w, &u) < 1e-10);
    }

    #[test]
    fn bad_grid_order() {
        let k = OperatorKernel::zeros(point_labels(1), 1, scalar_alg()).unwrap();
        let opts = FactorOptions {
            grid_order: Some(vec![1]),
            ..Default::default()
        };
        assert!(factor_with(&k, &opts).is_err());
    }
}
