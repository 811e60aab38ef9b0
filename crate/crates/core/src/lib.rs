//! Semi-supervised hyperspectral unmixing under the `Y = D B A + N` mixture
//! model.
//!
//! A scene `Y` (`p` bands by `n` pixels) is explained by `r` endmembers
//! `E = D B` built from a spectral library `D` (`p x m`) and abundances `A`
//! (`r x n`) whose columns lie on the probability simplex. Two solvers
//! estimate `B` and `A` jointly by cyclic descent with ADMM inner loops:
//!
//! - [`solvers::fasun`]: columns of `B` are convex combinations of atoms.
//! - [`solvers::suns`]: `B` is box constrained and l1 penalized.
//!
//! Both share the abundance step, which on its own is the fully constrained
//! least squares solver [`solvers::fclsu_admm`]. The sum-to-one subproblems
//! are solved in closed form by [`quec`].
//!
//! ```
//! use funmix::{simulate, solvers, metrics};
//!
//! let d = simulate::synthetic_library(40, 12, 7).unwrap();
//! let scene = simulate::generate_dc1(12, 3, &d, Some(&[0, 4, 9]), 1).unwrap();
//! let params = solvers::AdmmParams::default().with_outer(200);
//! let out = solvers::fasun(&scene.y, &d, 3, &params).unwrap();
//! let a_true = scene.a_true.unwrap();
//! let est = metrics::align_abundances(&a_true, &out.a_feasible).unwrap();
//! assert!(metrics::sre(&a_true, &est).unwrap().sre_db > 20.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod quec;
pub mod simulate;
pub mod solvers;

pub use error::{Error, Result};
pub use matrix::{AbundanceMatrix, EndmemberMatrix, LibraryMatrix, Matrix, MixingMatrix, ObservationMatrix};
pub use model::{constraint_violations, objective_value, ConstraintViolations, ModelDims};
pub use quec::{kkt_oracle_solve, quec_factorize, quec_solve, QuecFactors};
pub use simulate::{DatasetBundle, SimulationConfig};
pub use solvers::{AdmmParams, Method, Profile, UnmixResult};
