//! Post-processing by a quantum effect: `Phi(X) = A^(1/2) X A^(1/2)` with
//! `0 <= A <= I`. Applied to `pi_L(a)` inside a factorization of `L` it
//! simulates the dominated kernel whose derivative is `A`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domination::DominationCertificate;
use crate::error::{invalid, Error, Result};
use crate::kernel::random::normal_matrix;
use crate::kernel::OperatorKernel;
use crate::linalg::{hermitian_defect, identity, lstsq, HermitianEigen};
use crate::num::{cr, floor_one, frobenius, max_abs, CMatrix, Real};
use crate::stinespring::Factorization;

/// Hermiticity tolerance for effect matrices.
const EFFECT_HERMITIAN_TOL: f64 = 1e-10;
/// Relative commutation tolerance required by [`simulate_kernel`].
pub const COMMUTATION_TOL: f64 = 1e-8;
/// Slack of the trace and positivity checks.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Effect<T: Real> {
    a: CMatrix<T>,
    sqrt_a: CMatrix<T>,
}

impl<T: Real> Effect<T> {
    /// Validates `0 <= A <= I` up to `tol` and clips the spectrum into `[0, 1]`.
    pub fn from_matrix(a: &CMatrix<T>, tol: T) -> Result<Self> {
        if !a.is_square() {
            return Err(invalid("effect must be a square matrix"));
        }
        let defect = hermitian_defect(a);
        if defect > T::tol(EFFECT_HERMITIAN_TOL) * floor_one(max_abs(a)) {
            return Err(invalid(format!("effect is not Hermitian (defect {:e})", defect.to_f64_lossy())));
        }
        let eig = HermitianEigen::new(a);
        if let Some(&low) = eig.values.iter().find(|&&x| x < -tol) {
            return Err(Error::InvalidEffect {
                eigenvalue: low.to_f64_lossy(),
            });
        }
        if let Some(&high) = eig.values.iter().find(|&&x| x > T::one() + tol) {
            return Err(invalid(format!("effect eigenvalue {:e} exceeds 1", high.to_f64_lossy())));
        }
        let clip = |x: T| x.max(T::zero()).min(T::one());
        Ok(Self {
            a: eig.map(clip),
            sqrt_a: eig.map(|x| clip(x).sqrt()),
        })
    }

    /// `lambda * I` on `C^r`.
    pub fn scalar(lambda: T, r: usize) -> Result<Self> {
        if lambda < T::zero() || lambda > T::one() {
            return Err(invalid("scalar effect must lie in [0, 1]"));
        }
        Ok(Self {
            a: identity::<T>(r) * cr(lambda),
            sqrt_a: identity::<T>(r) * cr(lambda.sqrt()),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CMatrix<T> {
        &self.a
    }

    pub fn sqrt_a(&self) -> &CMatrix<T> {
        &self.sqrt_a
    }

    /// `Phi(X) = A^(1/2) X A^(1/2)`.
    pub fn apply(&self, x: &CMatrix<T>) -> Result<CMatrix<T>> {
        if x.shape() != self.a.shape() {
            return Err(invalid(format!(
                "operand has shape {:?}, effect acts on dimension {}",
                x.shape(),
                self.dim()
            )));
        }
        Ok(&self.sqrt_a * x * &self.sqrt_a)
    }
}

pub fn effect_from_certificate<T: Real>(cert: &DominationCertificate<T>, tol: T) -> Result<Effect<T>> {
    Effect::from_matrix(&cert.a, tol)
}

#[derive(Debug, Clone)]
pub struct Simulation<T: Real> {
    pub kernel: OperatorKernel<T>,
    /// `max_a |A pi(e_a) - pi(e_a) A|_F`.
    pub commutator_residual: f64,
    /// Largest relative distance of `Phi(pi(e_a))` from `span pi(A)`.
    pub range_residual: f64,
}

/// `K(s_i, s_j)(e_a) = V_L(s_i)* Phi(pi_L(e_a)) V_L(s_j)`. The effect must
/// commute with `pi_L`.
pub fn simulate_kernel<T: Real>(
    l: &OperatorKernel<T>,
    fact_l: &Factorization<T>,
    effect: &Effect<T>,
) -> Result<Simulation<T>> {
    if !fact_l.source().compatible(l) {
        return Err(invalid("factorization does not belong to L"));
    }
    let r = fact_l.r();
    if effect.dim() != r {
        return Err(invalid(format!("effect acts on dimension {}, factorization has r = {r}", effect.dim())));
    }
    let pi = fact_l.pi();
    let commutator = pi
        .iter()
        .map(|p| frobenius(&(&effect.a * p - p * &effect.a)))
        .fold(T::zero(), |x, y| x.max(y));
    let limit = T::lit(COMMUTATION_TOL) * floor_one(frobenius(&effect.a));
    if commutator > limit {
        return Err(Error::NonCommutingEffect {
            residual: commutator.to_f64_lossy(),
            threshold: limit.to_f64_lossy(),
        });
    }
    let processed = pi.iter().map(|p| effect.apply(p)).collect::<Result<Vec<_>>>()?;

    // distance of each Phi(pi(e_a)) from span{pi(e_b)}
    let mut span = CMatrix::zeros(r * r, pi.len());
    for (b, p) in pi.iter().enumerate() {
        span.column_mut(b).copy_from_slice(p.as_slice());
    }
    let mut range = T::zero();
    for x in &processed {
        let target = CMatrix::from_column_slice(r * r, 1, x.as_slice());
        let coeffs = lstsq(&span, &target, T::lit(1e-12));
        let res = frobenius(&(&span * coeffs - &target)) / floor_one(frobenius(&target));
        range = range.max(res);
    }

    let left: Vec<CMatrix<T>> = fact_l.v().iter().map(|v| v.adjoint()).collect();
    let kernel = OperatorKernel::from_fn(l.points().to_vec(), l.hdim(), l.algebra().clone(), |i, j, a| {
        &left[i] * &processed[a] * &fact_l.v()[j]
    })?;
    Ok(Simulation {
        kernel,
        commutator_residual: commutator.to_f64_lossy(),
        range_residual: range.to_f64_lossy(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceReport {
    pub samples: usize,
    /// Largest `trace(Phi(X)) - trace(X)` over unit-trace samples.
    pub max_trace_excess: f64,
    /// Smallest eigenvalue of any `Phi(X)`.
    pub min_eigenvalue: f64,
    pub violations: usize,
}

/// Draws random density matrices `X = G G* / trace(G G*)` and checks
/// `trace(Phi(X)) <= trace(X)` and `Phi(X) >= 0` within [`TRACE_TOL`].
pub fn trace_nonincreasing_check<T: Real>(effect: &Effect<T>, samples: usize, seed: u64) -> Result<TraceReport> {
    if samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let r = effect.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = T::lit(TRACE_TOL);
    let mut report = TraceReport {
        samples,
        max_trace_excess: f64::NEG_INFINITY,
        min_eigenvalue: f64::INFINITY,
        violations: 0,
    };
    for _ in 0..samples {
        let g = normal_matrix::<T>(&mut rng, r, r);
        let mut x = &g * g.adjoint();
        let tr = x.trace().re;
        if tr > T::zero() {
            x *= cr(T::one() / tr);
        }
        let y = effect.apply(&x)?;
        let excess = y.trace().re - x.trace().re;
        let low = HermitianEigen::new(&y).min();
        if excess > tol || low < -tol {
            report.violations += 1;
        }
        report.max_trace_excess = report.max_trace_excess.max(excess.to_f64_lossy());
        report.min_eigenvalue = report.min_eigenvalue.min(low.to_f64_lossy());
    }
    if r == 0 {
        report.max_trace_excess = 0.0;
        report.min_eigenvalue = 0.0;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplificationReport {
    pub amplification: usize,
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

/// Complete positivity witness: applies `Phi (x) id_k` blockwise to random
/// PSD inputs on `C^(k r)` built as sums of rank-one terms and checks that the
/// outputs stay PSD within [`TRACE_TOL`].
pub fn amplification_check<T: Real>(
    effect: &Effect<T>,
    amplification: usize,
    samples: usize,
    seed: u64,
) -> Result<AmplificationReport> {
    if amplification == 0 || samples == 0 {
        return Err(invalid("amplification and samples must be positive"));
    }
    let r = effect.dim();
    let big = amplification * r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let mut x = CMatrix::zeros(big, big);
        for _ in 0..amplification {
            let v = normal_matrix::<T>(&mut rng, big, 1);
            x += &v * v.adjoint();
        }
        let scale = floor_one(x.trace().re);
        let mut y = CMatrix::zeros(big, big);
        for bi in 0..amplification {
            for bj in 0..amplification {
                let block = x.view((bi * r, bj * r), (r, r)).into_owned();
                y.view_mut((bi * r, bj * r), (r, r)).copy_from(&effect.apply(&block)?);
            }
        }
        let low = HermitianEigen::new(&y).min() / scale;
        worst = worst.min(low.to_f64_lossy());
    }
    if big == 0 {
        worst = 0.0;
    }
    Ok(AmplificationReport {
        amplification,
        samples,
        min_eigenvalue: worst,
        pass: worst >= -TRACE_TOL,
    })
}
