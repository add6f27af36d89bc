//! `wgf epsilon`: `sup F(base)/F(s)` over a mode grid.
//!
//! Files: `epsilon.json` and `margin.csv`
//! (`xi,ft_base,ft_stabilizer,ratio,margin`), the margin taken at the
//! certified epsilon.

use std::fmt::Write as _;

use serde::Serialize;
use wgf_core::spectral::{analytic_ft, minimal_epsilon};

use super::{kernel, nonzero, xi_grid};
use crate::error::CliError;
use crate::output::RunOutput;
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Loss kernel [default: rgauss:sigma=4].
    #[arg(long)]
    pub base: Option<String>,
    /// Stabilizer kernel [default: rgauss:sigma=1].
    #[arg(long)]
    pub stabilizer: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub xi_min: Option<f64>,
    #[arg(long)]
    pub xi_max: Option<f64>,
    #[arg(long)]
    pub xi_points: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    base: String,
    stabilizer: String,
    dim: usize,
    xi_min: f64,
    xi_max: f64,
    xi_points: usize,
}

pub fn run(ctx: &Context, a: Args) -> Result<(), CliError> {
    let f = &ctx.file.epsilon;
    let base = kernel(a.base.as_deref().or(f.base.as_deref()).unwrap_or("rgauss:sigma=4"), "base kernel")?;
    let stab = kernel(
        a.stabilizer.as_deref().or(f.stabilizer.as_deref()).unwrap_or("rgauss:sigma=1"),
        "stabilizer kernel",
    )?;
    let dim = nonzero("dim", a.dim.or(f.dim).unwrap_or(1))?;
    let grid = xi_grid(a.xi_min.or(f.xi_min), a.xi_max.or(f.xi_max), a.xi_points.or(f.xi_points))?;
    let resolved = Resolved {
        base: base.to_string(),
        stabilizer: stab.to_string(),
        dim,
        xi_min: grid[0],
        xi_max: grid[grid.len() - 1],
        xi_points: grid.len(),
    };

    let mut out = RunOutput::create(&ctx.out_dir)?;
    let sol = minimal_epsilon(&base, &stab, &grid, dim)?;
    let mut csv = String::from("xi,ft_base,ft_stabilizer,ratio,margin\n");
    for &xi in &grid {
        let (fb, fs) = (analytic_ft(&base, xi, dim)?, analytic_ft(&stab, xi, dim)?);
        let _ = writeln!(csv, "{xi},{fb},{fs},{},{}", fb / fs, sol.certified_epsilon * fs - fb);
    }
    println!("epsilon_min = {} (attained at xi = {:.4})", sol.epsilon_min, sol.argmax_xi);
    println!("margin at epsilon = {:.6}: {:.6e}", sol.certified_epsilon, sol.margin);
    out.write_json("epsilon.json", &sol)?;
    out.write("margin.csv", &csv)?;
    out.finish("epsilon", ctx.seed, &resolved)?;
    Ok(())
}
