//! FCLSU, FaSUn and SUnS solvers.
//!
//! FCLSU is the abundance step on its own, for known endmembers. FaSUn and
//! SUnS estimate both the mixing matrix `B` (so that `E = D B`) and the
//! abundances `A` by cyclic descent, and differ only in the prior on `B`.

mod admm;
mod init;
mod params;
mod state;

pub use admm::{
    a_step, b_step_fasun, b_step_suns, clip_unit, fasun, fasun_with, fclsu_admm, initial_state, soft_threshold, suns,
    suns_with, unmix,
};
pub use init::{select_atoms, successive_projection};
pub use params::{AdmmParams, Initialization, Method, Profile, EARLY_STOP_WINDOW};
pub use state::{project_feasible, Diagnostics, Residuals, SolverState, UnmixResult};
