//! Spectral gaps and path-integral Monte Carlo annealing for Hamming-weight
//! cost functions with a tunable barrier.
//!
//! The cost of an `n`-bit string depends only on its Hamming weight `h`:
//! `f(h) = h` plus a bump of height `n^alpha` over a window of width
//! `c n^alpha` centred at `n/4`. The crate provides
//!
//! * [`problem`]: instances, validity rules and the reduced tridiagonal
//!   Hamiltonian on the symmetric subspace,
//! * [`spectral`]: the two lowest eigenvalues and the minimum gap along the
//!   interpolation `H(s) = (1-s) H0 + s H1`,
//! * [`scaling`]: log-log fits of the minimum gap against `n` and the
//!   residual-curvature classification,
//! * [`qmc`]: the Trotterised sampler and the gap-referenced annealing
//!   schedule,
//! * [`oracle`]: brute-force ground truth at tiny sizes,
//! * [`experiment`]: the end-to-end runs behind the command-line tool.

pub mod csv;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod problem;
pub mod qmc;
pub mod scaling;
pub mod spectral;

pub use error::{Error, Result};
pub use problem::{valid_sizes, CostTable, ProblemInstance};
pub use spectral::{default_minimize_gap, gap_at, minimize_gap, GapPoint, GapProfile, TridiagonalOperator};
