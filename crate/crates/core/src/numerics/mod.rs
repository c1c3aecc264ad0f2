//! Numerical building blocks shared by the physics modules.

pub mod cheb;
pub mod fit;
pub mod jacobi;
pub mod ode;
pub mod quad;
pub mod roots;
