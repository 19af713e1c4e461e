//! Operator-valued positive definite kernels `K: X x X -> L(A, L(H))` over a
//! finite-dimensional C*-algebra `A`, at desk scale.
//!
//! * [`algebra`]: block-matrix and group algebras.
//! * [`kernel`]: kernel tensors, the scalar lift and its Gram matrix, the
//!   positivity test, and a seeded generator with known factorization.
//! * [`stinespring`]: minimal factorization `K(s,t)(a) = V(s)* pi(a) V(t)`.
//! * [`domination`]: the order `K <= L`, `dK/dL`, commutants, irreducibility.
//! * [`channel`]: effect post-processing `Phi(X) = A^(1/2) X A^(1/2)`.
//! * [`io`] and [`cli`]: JSON file formats and the `opkernel` command line.
//!
//! All numerics are generic over the real scalar type ([`num::Real`]); the
//! aliases below fix it to `f64` or `f32`.

pub mod algebra;
pub mod channel;
pub mod cli;
pub mod domination;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod num;
pub mod stinespring;

pub use error::{Error, Result};

pub type Algebra64 = algebra::Algebra<f64>;
pub type Element64 = algebra::Element<f64>;
pub type Kernel64 = kernel::OperatorKernel<f64>;
pub type Factorization64 = stinespring::Factorization<f64>;
pub type Certificate64 = domination::DominationCertificate<f64>;
pub type Effect64 = channel::Effect<f64>;

pub type Algebra32 = algebra::Algebra<f32>;
pub type Element32 = algebra::Element<f32>;
pub type Kernel32 = kernel::OperatorKernel<f32>;
pub type Factorization32 = stinespring::Factorization<f32>;
pub type Certificate32 = domination::DominationCertificate<f32>;
pub type Effect32 = channel::Effect<f32>;
