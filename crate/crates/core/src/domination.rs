//! The order `K <= L` (meaning `L - K` is positive), the Radon-Nikodym
//! derivative `dK/dL` in the commutant of `pi_L`, and irreducibility.
//!
//! In the feature coordinates of a minimal factorization of `L`, the sections
//! of `L~` are the columns of `F_L` and the reproducing identity reads
//! `F_L* A F_L = gram(K)` for the derivative `A`. Hence
//! `A = (F_L^+)* gram(K) F_L^+`, and `T = A^(1/2)` is the contraction whose
//! square is `A`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::kernel::{Membership, OperatorKernel};
use crate::linalg::{commutant_basis, identity, HermitianEigen};
use crate::num::{cr, floor_one, frobenius, CMatrix, Real};
use crate::stinespring::Factorization;

pub const DEFAULT_CERT_TOL: f64 = 1e-8;
/// Relative singular value cutoff for the commutant nullspace.
pub const COMMUTANT_CUT: f64 = 1e-10;
/// Largest reconstruction residual accepted for a factorization supplied as
/// belonging to `L`.
const FACTORIZATION_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DominationCertificate<T: Real> {
    /// Positive contraction with `T^2 = A`.
    pub t: CMatrix<T>,
    /// Radon-Nikodym derivative `dK/dL`.
    pub a: CMatrix<T>,
    /// Eigenvalues of `T`, descending.
    pub spectrum_t: Vec<f64>,
    /// `|A - T^2|_F`.
    pub square_residual: f64,
    pub commutant_residual: f64,
    pub reconstruction_residual: f64,
    /// Dimension of the commutant of `pi_L`.
    pub commutant_dim: usize,
    pub lambda: Option<Complex64>,
}

/// Decides `K <= L` by testing `L - K` for positivity.
pub fn dominates<T: Real>(k: &OperatorKernel<T>, l: &OperatorKernel<T>, tol: T) -> Result<Membership> {
    if !k.compatible(l) {
        return Err(invalid("K and L differ in points, hdim or algebra"));
    }
    l.sub(k)?.is_in_class_m(tol)
}

pub fn radon_nikodym<T: Real>(
    k: &OperatorKernel<T>,
    l: &OperatorKernel<T>,
    fact_l: &Factorization<T>,
    tol: T,
) -> Result<DominationCertificate<T>> {
    if !fact_l.source().compatible(l) {
        return Err(invalid("factorization does not belong to L"));
    }
    let mismatch = fact_l.reconstruct()?.max_block_residual(l)?;
    if mismatch > T::tol(FACTORIZATION_MATCH_TOL) {
        return Err(invalid(format!(
            "factorization does not reproduce L (residual {:e})",
            mismatch.to_f64_lossy()
        )));
    }
    let order = dominates(k, l, tol)?;
    if !order.in_class {
        return Err(Error::NotDominated {
            min_eigenvalue: order.min_eigenvalue,
            threshold: order.threshold,
            witness: Box::new(order.witness.expect("negative answer carries a witness")),
        });
    }
    let r = fact_l.r();
    let f = fact_l.features();
    let gk = k.gram()?.gram;

    let raw = if r == 0 {
        CMatrix::zeros(0, 0)
    } else {
        let gram_inv = HermitianEigen::new(&(f * f.adjoint())).map(|x| T::one() / x);
        let pinv = f.adjoint() * gram_inv;
        pinv.adjoint() * gk * pinv
    };
    let eig = HermitianEigen::new(&raw);
    let one = T::one();
    for &x in &eig.values {
        if x < -tol || x > one + tol {
            return Err(Error::ContractionViolation {
                eigenvalue: x.to_f64_lossy(),
            });
        }
    }
    let clip = |x: T| x.max(T::zero()).min(one);
    let a = eig.map(clip);
    let t = eig.map(|x| clip(x).sqrt());
    let spectrum_t = eig.values.iter().map(|&x| clip(x).sqrt().to_f64_lossy()).collect();
    let square_residual = frobenius(&(&a - &t * &t));

    let commutant_residual = fact_l
        .pi()
        .iter()
        .map(|p| frobenius(&(&a * p - p * &a)))
        .fold(T::zero(), |x, y| x.max(y));
    let limit = tol * floor_one(frobenius(&a));
    if commutant_residual > limit {
        return Err(Error::CertificateInvalid {
            what: "commutant",
            residual: commutant_residual.to_f64_lossy(),
            threshold: limit.to_f64_lossy(),
        });
    }
    let reconstruction_residual = fact_l.compress(Some(&a))?.max_block_residual(k)?;
    if reconstruction_residual > tol {
        return Err(Error::CertificateInvalid {
            what: "reconstruction",
            residual: reconstruction_residual.to_f64_lossy(),
            threshold: tol.to_f64_lossy(),
        });
    }
    let mut cert = DominationCertificate {
        t,
        a,
        spectrum_t,
        square_residual: square_residual.to_f64_lossy(),
        commutant_residual: commutant_residual.to_f64_lossy(),
        reconstruction_residual: reconstruction_residual.to_f64_lossy(),
        commutant_dim: commutant(fact_l).len(),
        lambda: None,
    };
    cert.lambda = scalar_ratio(&cert, tol)?;
    Ok(cert)
}

/// Orthonormal basis of `pi(A)'` under the trace inner product.
pub fn commutant<T: Real>(fact: &Factorization<T>) -> Vec<CMatrix<T>> {
    commutant_basis(fact.pi(), T::tol(COMMUTANT_CUT))
}

pub fn is_irreducible<T: Real>(fact: &Factorization<T>) -> Result<bool> {
    if fact.r() == 0 {
        return Err(invalid("r = 0: there is no representation to test"));
    }
    Ok(commutant(fact).len() == 1)
}

/// `trace(A) / r` when `A` is that multiple of the identity within
/// `tol * max(1, |A|_F)`. An irreducible `pi_L` with a non-scalar `A` is
/// reported as an inconsistency.
pub fn scalar_ratio<T: Real>(cert: &DominationCertificate<T>, tol: T) -> Result<Option<Complex64>> {
    let r = cert.a.nrows();
    if r == 0 {
        return Ok(None);
    }
    let lambda = cert.a.trace() * cr(T::one() / T::from_usize(r).expect("usize fits"));
    let dev = frobenius(&(&cert.a - identity::<T>(r) * lambda));
    let scalar = dev <= tol * floor_one(frobenius(&cert.a));
    if !scalar && cert.commutant_dim == 1 {
        return Err(Error::Inconsistency(format!(
            "pi_L is irreducible but dK/dL deviates from a scalar by {:e}",
            dev.to_f64_lossy()
        )));
    }
    Ok(scalar.then(|| Complex64::new(lambda.re.to_f64_lossy(), lambda.im.to_f64_lossy())))
}
