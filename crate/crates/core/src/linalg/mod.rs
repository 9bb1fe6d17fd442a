//! Banded and Kronecker-structured linear algebra for separable
//! exponential-kernel covariances.

mod block;
pub mod dense;
mod kron;
mod tridiag;

pub use block::{
    block_tridiag_cholesky, block_tridiag_solve, logdet_from_block_cholesky, scale_blocks,
    BlockCholeskyFactor, BlockTridiagonal,
};
pub use kron::{kron_dense, kron_logdet, kron_matvec};
pub use tridiag::{
    exp_kernel_logdet, exp_kernel_precision, thomas_solve, SymTridiagonal, TridiagonalLdl,
};
