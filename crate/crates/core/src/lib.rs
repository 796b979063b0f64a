//! Finite-copy distillation of pure entangled states from multipartite mixed
//! states.
//!
//! * [`tensor`]: dense complex matrices, Kronecker products, partial traces,
//!   Hermitian eigendecomposition and SVD.
//! * [`states`]: system shapes, pure and mixed states, and preset families.
//! * [`localops`]: product operators and their projector/filter/unitary
//!   factorization.
//! * [`entanglement`]: dimension signatures, Schmidt coefficients, two-qubit
//!   concurrence and entanglement of formation.
//! * [`dss`]: distillable-subspace projection, search and verification.
//! * [`protocols`]: branch-tracked LOCC protocol simulation.
//! * [`io`]: JSON documents.

pub mod dss;
pub mod entanglement;
pub mod error;
pub mod io;
pub mod localops;
pub mod protocols;
pub mod random;
pub mod states;
pub mod suites;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use states::{DensityMatrix, Party, PureState, SystemShape};
pub use tensor::{ComplexMatrix, Tolerance};
