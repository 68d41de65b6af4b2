//! Solves for the ground state at p = q = 2, α = 2, N = 3 on two grids and
//! prints the identity residuals.
//!
//! Run with: cargo run --release --example ground_state

use std::time::Instant;

use choquard_core::{
    diagnostics::pohozaev_residual, minimize_mp, minimizer::equation_residual, Field, Grid,
    KernelTable, Params, SolveConfig,
};

fn main() -> choquard_core::Result<()> {
    let params = Params::new(3, 2.0, 2.0, 2.0)?;
    for n in [32, 48] {
        let grid = Grid::new(3, n, 12.0)?;
        let kernel = KernelTable::new(&grid, params.alpha)?;
        let init = Field::gaussian(grid, &[0.0; 3]);
        let t = Instant::now();
        let res = minimize_mp(&init, &params, &kernel, &SolveConfig::default())?;
        let report = pohozaev_residual(&res.u, &params, &kernel)?;
        println!(
            "n = {n:3}  mp = {:.10}  iters = {:5}  converged = {}  pohozaev = {:.3e}  nehari = {:.3e}  residual = {:.3e}  ({:.1?})",
            res.mp,
            res.iterations,
            res.converged,
            report.pohozaev_normalized,
            report.nehari_normalized,
            equation_residual(&res.u, &params, &kernel)?,
            t.elapsed()
        );
    }
    Ok(())
}
