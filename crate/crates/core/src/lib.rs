//! Mixed Lagrange finite elements for the Dirichlet problem of the
//! two-dimensional Monge-Ampere equation `det D²u = f`, `u = g` on `∂Ω`.

pub mod analysis;
pub mod error;
pub mod expr;
pub mod fe_space;
pub mod forms;
pub mod hessian;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/meshes-and-spaces.md")]
    mod meshes_and_spaces {}
    #[doc = include_str!("../../../book/src/discrete-hessian.md")]
    mod discrete_hessian {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/convergence-studies.md")]
    mod convergence_studies {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
}
