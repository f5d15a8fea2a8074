//! Numerical toolkit for wave-particle complementarity in which-way
//! interferometers.
//!
//! The crate is layered bottom-up:
//!
//! * [`state`] and [`random`]: dense complex linear algebra on small
//!   systems, density matrices, pure bipartite states and seeded sampling.
//! * [`measures`]: entropies, coherence, predictability, concurrence.
//! * [`detector`]: the quanton plus path-detector model, sub-ensemble
//!   sorting and distinguishability.
//! * [`monotones`]: entanglement monotones from concave spectral functions,
//!   the convex-roof extension and the distinguishability-minus-predictability
//!   constructor.
//! * [`criteria`]: randomized validation of candidate predictability and
//!   visibility measures.
//!
//! Logarithms are base 2 everywhere; entropies are in bits. Joint systems use
//! A-major index ordering: joint index `j * d_b + k`.

pub mod criteria;
pub mod detector;
pub mod error;
pub mod measures;
pub mod monotones;
pub mod optimize;
pub mod random;
pub mod state;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used for states, unitaries and projectors.
pub type ComplexMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type ComplexVector = nalgebra::DVector<Complex64>;
