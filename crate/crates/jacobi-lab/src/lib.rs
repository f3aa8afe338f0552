//! Numerical toolkit for L-derivatives, Jacobi curves and Lagrangian intersection indices.

pub mod error;
pub mod glueing;
pub mod indices;
pub mod io;
pub mod lderiv;
pub mod linalg;
pub mod linearization;
pub mod morse;
pub mod quadrature;
pub mod sampling;
pub mod scalar;
pub mod symplectic;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use symplectic::HalfInteger;

pub type Subspace = symplectic::LinearSubspace<f64>;
pub type Space = symplectic::SymplecticSpace<f64>;
pub type Form = symplectic::QuadraticForm<f64>;
pub type Problem = linearization::ProblemLinearization<f64>;
pub type Fields = linearization::MovingFrameFields<f64>;
pub type Basis = lderiv::VariationBasis<f64>;
pub type Curve = lderiv::JacobiCurve<f64>;
pub type Lifted = indices::LiftedPlane<f64>;
pub type Pair = glueing::PairPlane<f64>;
pub type Hessian = morse::DiscretizedHessian<f64>;
