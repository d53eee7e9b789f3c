//! Single solves and convergence studies with their output files.

use std::path::{Path, PathBuf};

use monge_core::harness::{self, CaseResult, ConvergenceTable, ErrorReport, RunConfig};
use monge_core::mesh::Mesh;
use monge_core::problems::{catalog, ProblemSpec};

use crate::format::{read_problem, vertex_plot_data, write_field};
use crate::table::{rates_to_csv, write_newton, write_table};
use crate::{write_file, Error, Result};

/// A catalog label or a problem file.
#[derive(Debug, Clone)]
pub enum ProblemSource {
    Catalog(String),
    File(PathBuf),
}

impl ProblemSource {
    pub fn load(&self) -> Result<ProblemSpec> {
        match self {
            ProblemSource::Catalog(label) => Ok(catalog(label)?),
            ProblemSource::File(path) => read_problem(path),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Files written by [`run_case`], relative to the output directory.
pub const NEWTON_FILE: &str = "newton.csv";
pub const U_FILE: &str = "u.txt";
pub const SIGMA_FILE: &str = "sigma.txt";
pub const PLOT_FILE: &str = "u_vertices.dat";
pub const REPORT_FILE: &str = "report.csv";
pub const TABLE_FILE: &str = "convergence.csv";
pub const RATES_FILE: &str = "rates.csv";

/// Solves one case and, when `out` is given, writes the Newton history,
/// both coefficient vectors, vertex plot data and the one-row report.
pub fn run_case(problem: &ProblemSpec, mesh: Mesh, cfg: &RunConfig, out: Option<&Path>) -> Result<CaseResult> {
    let case = harness::solve_case(problem, mesh, cfg)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_newton(&dir.join(NEWTON_FILE), &case.newton)?;
        write_field(&dir.join(U_FILE), &case.newton.u)?;
        write_field(&dir.join(SIGMA_FILE), &case.newton.sigma)?;
        write_file(&dir.join(PLOT_FILE), &vertex_plot_data(&case.space, &case.newton.u))?;
        write_table(&dir.join(REPORT_FILE), std::slice::from_ref(&case.report))?;
    }
    Ok(case)
}

/// Rows of a refinement study and the rate table fitted to them.
#[derive(Debug, Clone)]
pub struct Study {
    pub rows: Vec<ErrorReport>,
    /// Fails when fewer than two levels converged.
    pub table: monge_core::Result<ConvergenceTable>,
}

/// Runs a refinement study and, when `out` is given, writes the table and
/// the fitted rates.
pub fn run_study(
    problem: &ProblemSpec,
    n: usize,
    levels: usize,
    cfg: &RunConfig,
    base: Option<Mesh>,
    out: Option<&Path>,
) -> Result<Study> {
    let rows = harness::convergence_rows(problem, n, levels, cfg, base)?;
    let table = ConvergenceTable::from_rows(rows.clone());
    if let Some(dir) = out {
        create_dir(dir)?;
        write_table(&dir.join(TABLE_FILE), &rows)?;
        if let Ok(t) = &table {
            write_file(&dir.join(RATES_FILE), &rates_to_csv(t))?;
        }
    }
    Ok(Study { rows, table })
}
