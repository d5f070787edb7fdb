//! Manufacturing solutions of `ℒu = f(u)`: the 1D front, relaxation of 2D
//! data, and a Newton–Krylov polish.

mod bundle;
mod gmres;
pub mod init;
mod newton;
mod profile;
mod relax;

pub use bundle::{
    load_bundle, monotone_check, monotone_floor, monotone_margin, residual, write_history,
    SolutionBundle, StoredBundle,
};
pub use newton::{newton_iterate, newton_polish, NewtonOptions, NewtonRun};
pub use profile::{solve_profile_1d, tails_within, Profile1d, ProfileOptions};
pub use relax::{default_dt, dt_bound, relax_2d, RelaxOptions};
