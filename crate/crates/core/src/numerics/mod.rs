//! Numerical building blocks for chain plants.
//!
//! The plant matrix `A` is lower bidiagonal with distinct diagonal entries, so
//! any analytic function of `T·A` has a closed form through divided differences
//! of the scalar function over the scaled diagonal (the Opitz formula). The
//! series exponential in [`expm`] and the cubic eigenvalue solver in [`eig3`]
//! serve as independent cross-checks.

pub mod divdiff;
pub mod eig3;
pub mod expm;
pub mod opitz;
mod plant;

pub use divdiff::{divided_difference, ScalarFunction};
pub use eig3::{eig3, Eigen3};
pub use expm::expm_oracle;
pub use opitz::opitz_apply;
pub use plant::ChainPlant;

pub type Mat3 = nalgebra::Matrix3<f64>;
pub type StateVec = nalgebra::Vector3<f64>;
