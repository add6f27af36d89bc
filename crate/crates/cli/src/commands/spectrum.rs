//! `wgf spectrum`: a single kernel report or the reference verdict table.
//!
//! Files: `spectrum.csv` (`xi,analytic_ft,oracle_ft,growth_gen,growth_disc`)
//! and `report.json` for one kernel; `table.csv` and `table.json` with
//! `--table`.

use std::fmt::Write as _;

use serde::Serialize;
use wgf_core::spectral::{oracle_ft, reference_rows, Convention, PeriodicGrid, RowCheck};
use wgf_core::SpectrumReport;

use super::{kernel, nonzero, positive, xi_grid};
use crate::error::CliError;
use crate::output::RunOutput;
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Kernel in the inline grammar, e.g. `gaussian:sigma=2`.
    #[arg(long, conflicts_with = "table")]
    pub kernel: Option<String>,
    /// Check every reference row instead of one kernel.
    #[arg(long)]
    pub table: bool,
    /// Ambient dimension of the closed-form transform. The oracle is 1-D only.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Background density constant in the growth rate.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub xi_min: Option<f64>,
    #[arg(long)]
    pub xi_max: Option<f64>,
    #[arg(long)]
    pub xi_points: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    kernel: Option<String>,
    table: bool,
    dim: usize,
    c: f64,
    xi_min: f64,
    xi_max: f64,
    xi_points: usize,
}

pub fn run(ctx: &Context, a: Args) -> Result<(), CliError> {
    let f = &ctx.file.spectrum;
    let table = a.table || (a.kernel.is_none() && f.table.unwrap_or(false));
    let kernel_src = if table { None } else { a.kernel.or_else(|| f.kernel.clone()) };
    if !table && kernel_src.is_none() {
        return Err(CliError::Config(
            "spectrum needs --kernel <SPEC> or --table (or `kernel` under [spectrum] in the config)".into(),
        ));
    }
    let dim = nonzero("dim", a.dim.or(f.dim).unwrap_or(1))?;
    let c = positive("c", a.c.or(f.c).unwrap_or(1.0))?;
    let grid = xi_grid(a.xi_min.or(f.xi_min), a.xi_max.or(f.xi_max), a.xi_points.or(f.xi_points))?;
    let resolved = Resolved {
        kernel: kernel_src.clone(),
        table,
        dim,
        c,
        xi_min: grid[0],
        xi_max: grid[grid.len() - 1],
        xi_points: grid.len(),
    };

    let k = kernel_src.as_deref().map(|s| kernel(s, "kernel")).transpose()?;

    let mut out = RunOutput::create(&ctx.out_dir)?;
    let conv = Convention::calibrate()?;
    match k {
        None => {
            let checks = reference_rows()
                .iter()
                .map(|row| {
                    let spectrum = oracle_ft(&row.kernel, PeriodicGrid::for_kernel(&row.kernel))?;
                    row.check(&grid, &spectrum, conv)
                })
                .collect::<wgf_core::Result<Vec<_>>>()?;
            for r in &checks {
                println!("{}", row_line(r));
            }
            let n = checks.iter().filter(|r| r.reproduced).count();
            println!("{n}/{} rows reproduced or flagged", checks.len());
            out.write("table.csv", &table_csv(&checks))?;
            out.write_json("table.json", &checks)?;
        }
        Some(k) => {
            let oracle = if dim == 1 {
                Some((oracle_ft(&k, PeriodicGrid::for_kernel(&k))?, conv))
            } else {
                None
            };
            let report = SpectrumReport::build(&k, &grid, c, dim, oracle.as_ref().map(|(s, c)| (s, *c)))?;
            println!("kernel: {k}");
            println!("closed form: generator {}, discriminator {}", report.verdict_gen, report.verdict_disc);
            if let Some((g, d)) = report.oracle_verdict {
                println!("oracle: generator {g}, discriminator {d}");
            }
            for xi in &report.sign_changes {
                println!("sign change at xi = {xi:.4}");
            }
            if report.has_discrepancy() {
                match &report.discrepancy {
                    Some(s) => println!(
                        "DISCREPANCY: oracle sign differs on {} modes, xi in [{:.4}, {:.4}]",
                        s.modes, s.xi_min, s.xi_max
                    ),
                    None => println!("DISCREPANCY: oracle verdict differs from the closed form"),
                }
            }
            if let Some(st) = &report.stabilizer {
                println!("epsilon_min = {:.6} (at xi = {:.4})", st.epsilon_min, st.argmax_xi);
            }
            out.write("spectrum.csv", &report.to_csv())?;
            out.write_json("report.json", &report.summary())?;
        }
    }
    out.finish("spectrum", ctx.seed, &resolved)?;
    Ok(())
}

fn row_line(r: &RowCheck) -> String {
    let verdict = |ok: bool| if ok { "stable" } else { "unstable" };
    let mut s = format!(
        "{:<14} reference ({}, {})  closed form ({}, {})  oracle ({}, {})",
        r.name,
        verdict(r.reference.0),
        verdict(r.reference.1),
        r.analytic.0,
        r.analytic.1,
        r.oracle.0,
        r.oracle.1
    );
    if r.discrepancy {
        s.push_str("  DISCREPANCY");
    }
    for xi in &r.sign_changes {
        let _ = write!(s, "  sign change at xi = {xi:.4}");
    }
    s.push_str(if r.reproduced { "  [ok]" } else { "  [MISMATCH]" });
    s
}

/// Columns: `name,kernel,ref_gen,ref_disc,analytic_gen,analytic_disc,oracle_gen,oracle_disc,discrepancy,sign_changes,reproduced`.
fn table_csv(rows: &[RowCheck]) -> String {
    let mut s = String::from(
        "name,kernel,ref_gen,ref_disc,analytic_gen,analytic_disc,oracle_gen,oracle_disc,discrepancy,sign_changes,reproduced\n",
    );
    let verdict = |ok: bool| if ok { "stable" } else { "unstable" };
    for r in rows {
        let changes: Vec<String> = r.sign_changes.iter().map(|x| format!("{x}")).collect();
        let _ = writeln!(
            s,
            "{},\"{}\",{},{},{},{},{},{},{},{},{}",
            r.name,
            r.kernel,
            verdict(r.reference.0),
            verdict(r.reference.1),
            r.analytic.0,
            r.analytic.1,
            r.oracle.0,
            r.oracle.1,
            r.discrepancy,
            changes.join(";"),
            r.reproduced
        );
    }
    s
}
