//! Sparse Hermitian operator algebra shared by every construction.

pub mod eigen;
pub mod layout;
pub mod schur;
pub mod small;
pub mod sparse;
pub mod subspace;
pub mod term;

pub use eigen::{lowest_eigenpairs, operator_norm, Backend, EigenSolveResult, Method};
pub use layout::{Register, RegisterLayout};
pub use schur::{FeshbachSolver, Partition};
pub use sparse::{SparseHermitian, Triplets};
pub use subspace::{coupling_norm, restrict, SubspaceBasis};
pub use term::{assemble_weighted, embed, LocalTerm, TermSum};
