//! Sparse storage, linear solvers and 2×2 symmetric matrix algebra.

mod direct;
mod iterative;
mod sparse;
mod sym2;

pub use direct::{
    reverse_cuthill_mckee, solve_general, solve_spd, solve_symmetric, BandedLu, CholeskyFactor,
};
pub use iterative::{cg_jacobi, gmres, GmresOptions, KrylovStats};
pub use sparse::{dot, norm2, SparseMatrix, TripletBuilder};
pub use sym2::{cof2, det2, eig2, frobenius, Sym2x2};
