use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use monge::format::read_mesh;
use monge::run::{run_case, run_study, ProblemSource};
use monge::table::{rates_summary, table_to_csv};
use monge::Error;
use monge_core::harness::{refinement_sequence, ErrorReport, RunConfig};
use monge_core::solver::ConvexifyConfig;

const EXIT_USAGE: u8 = 1;
const EXIT_SOLVER: u8 = 2;

/// Mixed finite element solver for det D²u = f with Dirichlet data.
#[derive(Parser)]
#[command(name = "monge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once on a single mesh.
    Solve(Common),
    /// Solve on a sequence of uniformly refined meshes and fit rates.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Number of refinement levels.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Catalog problem: quadratic, smooth-radial, boundary-singular, degenerate.
    #[arg(long, conflicts_with = "problem_file", required_unless_present = "problem_file")]
    problem: Option<String>,
    /// Problem description file (`key = value` lines).
    #[arg(long)]
    problem_file: Option<PathBuf>,
    /// Polynomial degree k of the Lagrange spaces.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Subdivisions per side of the (coarsest) mesh.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Quadrature exactness for the determinant terms and error norms.
    #[arg(long)]
    quad_degree: Option<usize>,
    /// Absolute Newton tolerance on the residual norm.
    #[arg(long)]
    newton_tol: Option<f64>,
    /// Newton iteration cap.
    #[arg(long, default_value_t = 50)]
    newton_max: usize,
    /// Solve for beta*u and scale back.
    #[arg(long)]
    beta: Option<f64>,
    /// Add eps*|x - x0|² to the initial guess.
    #[arg(long)]
    convexify_eps: Option<f64>,
    /// Ceiling for the right-hand side.
    #[arg(long)]
    clip: Option<f64>,
    /// Distance from the boundary of the region for the sup error.
    #[arg(long, default_value_t = 0.0)]
    interior_margin: f64,
    /// Mesh file replacing the generated (coarsest) mesh.
    #[arg(long)]
    mesh_file: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn source(&self) -> ProblemSource {
        match (&self.problem, &self.problem_file) {
            (_, Some(path)) => ProblemSource::File(path.clone()),
            (Some(label), None) => ProblemSource::Catalog(label.clone()),
            (None, None) => unreachable!("clap requires one of the two"),
        }
    }

    fn config(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::new(self.degree);
        cfg.quad_degree = self.quad_degree;
        cfg.newton.tolerance = self.newton_tol;
        cfg.newton.max_iter = self.newton_max;
        cfg.newton.convexify = self.convexify_eps.map(|e| ConvexifyConfig::new(e, None)).transpose()?;
        cfg.beta = self.beta;
        cfg.clip = self.clip;
        cfg.interior_margin = self.interior_margin;
        Ok(cfg)
    }
}

fn print_report(r: &ErrorReport) {
    let show = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6e}"));
    println!("h                    {:.6e}", r.h);
    println!("ndof u / sigma       {} / {}", r.ndof_u, r.ndof_sigma);
    println!("err_u_L2             {}", show(r.err_u_l2));
    println!("err_u_H1             {}", show(r.err_u_h1));
    println!("err_sigma_L2         {}", show(r.err_sigma_l2));
    println!("err_u_sup_interior   {}", show(r.err_u_sup_interior));
    println!("newton_iters         {}", r.newton_iters.map_or("NA".into(), |n| n.to_string()));
    println!("min_lambda1          {}", show(r.min_lambda1));
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Solve(c) => {
            let problem = c.source().load()?;
            let cfg = c.config()?;
            let mesh = match &c.mesh_file {
                Some(p) => read_mesh(p)?,
                None => refinement_sequence(&problem.domain, c.n, 1, None)?.remove(0),
            };
            let case = run_case(&problem, mesh, &cfg, c.out.as_deref())?;
            print_report(&case.report);
            if let Some(e) = &case.failure {
                eprintln!("error: {e}");
            }
            Ok(case.failure.is_none())
        }
        Command::Converge { common: c, levels } => {
            let problem = c.source().load()?;
            let cfg = c.config()?;
            let base = c.mesh_file.as_deref().map(read_mesh).transpose()?;
            let study = run_study(&problem, c.n, levels, &cfg, base, c.out.as_deref())?;
            print!("{}", table_to_csv(&study.rows));
            for (i, r) in study.rows.iter().enumerate() {
                if let Some(msg) = &r.failure {
                    eprintln!("level {i}: {msg}");
                }
            }
            match &study.table {
                Ok(t) => print!("{}", rates_summary(t)),
                Err(e) => eprintln!("error: {e}"),
            }
            Ok(study.rows.iter().all(|r| r.converged()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_SOLVER),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(EXIT_SOLVER)
            } else {
                ExitCode::from(EXIT_USAGE)
            }
        }
    }
}
