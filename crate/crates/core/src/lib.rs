//! Ground states of the doubly-nonlinear Choquard equation
//!
//! ```text
//! −Δu + u = q (I_α * |u|^p) |u|^{q−2} u + p (I_α * |u|^q) |u|^{p−2} u   in ℝ^N
//! ```
//!
//! obtained by minimizing `‖u‖²_{H¹}` under `∫(I_α * |u|^p)|u|^q = 1` on a
//! truncated box, plus diagnostics that check the Pohožaev and Nehari
//! identities and classify `(p, q)` into existence and nonexistence regimes.

pub mod cli;
pub mod config;
pub mod convolve;
pub mod diagnostics;
pub mod error;
mod fft;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod kernel;
pub mod minimizer;
pub mod snapshot;

pub use convolve::{direct_convolve_oracle, riesz_convolve};
pub use diagnostics::{
    brezis_lieb_defect, classify_exponents, nehari_residual, pohozaev_residual,
    vanishing_decay_test, Classification, IdentityReport, PhaseLabel,
};
pub use error::{Error, Result};
pub use field::Field;
pub use functionals::{d_functional, energy_and_grad, h1_normsq, nonlinear_rhs, EnergyBreakdown};
pub use grid::{Grid, Params};
pub use kernel::KernelTable;
pub use minimizer::{
    minimize_mp, project_to_constraint, recenter, rescale_to_solution, SolveConfig, SolveResult,
};
pub use snapshot::{read_snapshot, write_snapshot};
