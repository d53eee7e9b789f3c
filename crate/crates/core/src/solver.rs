//! Newton's method on the coupled saddle system, initial guesses, and the
//! rescaling and convexification devices.

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::assembly::{
    assemble_jacobian_block, assemble_poisson, assemble_residual, check_convexity, discrete_hessian,
    MixedOperator,
};
use crate::error::{invalid, Error, Result};
use crate::mesh::Point;
use crate::problems::{bounds_check, ProblemSpec, ScalarFn};
use crate::spaces::{interpolate, set_boundary_values, FieldVector, ScalarSpace, SpaceKind};
use crate::sparse::{nested_dissection, norm2, DirectSolver, SparseMatrix};
use crate::Sym2;

pub use crate::sparse::solve_linear;

/// Consecutive non-decreasing steps after which Newton gives up.
pub const MAX_GROWTH_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Damping {
    Full,
    /// Halve the step until the residual norm decreases, at most `max` times.
    Halving { max: usize },
}

#[derive(Clone)]
pub enum InitStrategy {
    /// Finite element solution of `Δw = 2√f`, `w = g` on the boundary.
    Poisson,
    /// Interpolant of a user-supplied convex function, boundary reset to `g`.
    Interpolant(ScalarFn),
}

impl fmt::Debug for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitStrategy::Poisson => f.write_str("Poisson"),
            InitStrategy::Interpolant(_) => f.write_str("Interpolant(..)"),
        }
    }
}

impl InitStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            InitStrategy::Poisson => "poisson",
            InitStrategy::Interpolant(_) => "interpolant",
        }
    }
}

/// Adds `ε|x - x₀|²` to an iterate; `x₀` defaults to the domain centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexifyConfig {
    pub eps: f64,
    pub x0: Option<Point>,
}

impl ConvexifyConfig {
    pub fn new(eps: f64, x0: Option<Point>) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid(format!("convexification magnitude must be nonnegative, got {eps}")));
        }
        Ok(ConvexifyConfig { eps, x0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleConfig {
    pub beta: f64,
}

impl RescaleConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("scale factor must be positive, got {beta}")));
        }
        Ok(RescaleConfig { beta })
    }
}

#[derive(Debug, Clone)]
pub struct NewtonConfig {
    /// Absolute tolerance on the Euclidean norm of the combined residual;
    /// `None` means `1e-10 * sqrt(unknowns)`.
    pub tolerance: Option<f64>,
    pub max_iter: usize,
    pub damping: Damping,
    pub init: InitStrategy,
    /// Applied to the initial guess before the first step.
    pub convexify: Option<ConvexifyConfig>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tolerance: None,
            max_iter: 50,
            damping: Damping::Halving { max: 8 },
            init: InitStrategy::Poisson,
            convexify: None,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(invalid(format!("newton tolerance must be positive, got {t}")));
            }
        }
        if self.max_iter == 0 {
            return Err(invalid("newton needs at least one iteration"));
        }
        Ok(())
    }

    pub fn tolerance_for(&self, unknowns: usize) -> f64 {
        self.tolerance.unwrap_or(1e-10 * libm::sqrt(unknowns as f64))
    }
}

/// Iteration history of one Newton solve. Entry 0 of each history belongs
/// to the initial guess.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub min_lambda1: Vec<f64>,
    pub halvings: Vec<usize>,
    /// `||M σ + B u||` per iterate.
    pub hessian_defects: Vec<f64>,
    pub tolerance: f64,
    pub converged: bool,
    pub u: FieldVector,
    pub sigma: FieldVector,
}

/// A failed solve together with the state it stopped in.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonFailure {
    pub error: Error,
    pub report: Box<NewtonReport>,
}

impl fmt::Display for NewtonFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl core::error::Error for NewtonFailure {}

impl From<NewtonFailure> for Error {
    fn from(f: NewtonFailure) -> Self {
        f.error
    }
}

/// Initial pair `(u⁰, σ⁰)` with `u⁰ = g` on the boundary and `σ⁰` its
/// discrete Hessian.
pub fn initial_guess(
    op: &MixedOperator,
    problem: &ProblemSpec,
    strategy: &InitStrategy,
) -> Result<(FieldVector, FieldVector)> {
    let space = &op.vspace;
    let u = match strategy {
        InitStrategy::Poisson => {
            let f = problem.f.clone();
            let source = move |p: Point| {
                let v = f(p);
                if v < 0.0 {
                    f64::NAN
                } else {
                    2.0 * libm::sqrt(v)
                }
            };
            let (k_int, k_bdry, load) = assemble_poisson(space, &source, &op.nonlinear_rule).map_err(|e| match e {
                Error::Evaluation { point, .. } if (problem.f)(point) < 0.0 => Error::InvalidData(format!(
                    "right-hand side is negative at ({}, {})",
                    point[0], point[1]
                )),
                other => other,
            })?;
            let boundary = set_boundary_values(space, &space.zeros(), &*problem.g)?;
            let (_, ub) = space.split(&boundary);
            // weak form of Δw = s: K w = -∫ s v
            let kb = k_bdry.mul_vec(&ub);
            let rhs: Vec<f64> = load.iter().zip(&kb).map(|(l, b)| -l - b).collect();
            let ui = DirectSolver::new(k_int)?.solve(&rhs)?;
            let mut u = boundary;
            for (&d, v) in space.interior_dofs().iter().zip(ui) {
                u.values[d] = v;
            }
            u
        }
        InitStrategy::Interpolant(w) => set_boundary_values(space, &interpolate(space, &**w)?, &*problem.g)?,
    };
    let sigma = discrete_hessian(op, &u)?;
    Ok((u, sigma))
}

/// `u + I_h(ε|x - x₀|²)`.
pub fn apply_convexification(space: &ScalarSpace, u: &FieldVector, cfg: &ConvexifyConfig) -> Result<FieldVector> {
    let x0 = cfg.x0.unwrap_or_else(|| space.mesh().domain_centroid());
    if space.mesh().locate(x0).is_none() {
        return Err(invalid(format!("convexification anchor ({}, {}) is outside the domain", x0[0], x0[1])));
    }
    let eps = cfg.eps;
    let bump = interpolate(space, &|p: Point| {
        let (dx, dy) = (p[0] - x0[0], p[1] - x0[1]);
        eps * (dx * dx + dy * dy)
    })?;
    let mut out = u.clone();
    for (a, b) in out.values.iter_mut().zip(bump.values) {
        *a += b;
    }
    Ok(out)
}

/// The problem for `βu`: `f' = β² f`, `g' = β g`, exact data scaled by `β`.
pub fn apply_rescaling(problem: &ProblemSpec, beta: f64) -> Result<ProblemSpec> {
    RescaleConfig::new(beta)?;
    let scale_fn = |h: &ScalarFn, s: f64| -> ScalarFn {
        let h = h.clone();
        Arc::new(move |p| s * h(p))
    };
    Ok(ProblemSpec {
        f: scale_fn(&problem.f, beta * beta),
        g: scale_fn(&problem.g, beta),
        exact_u: problem.exact_u.as_ref().map(|u| scale_fn(u, beta)),
        exact_grad: problem.exact_grad.as_ref().map(|g| {
            let g = g.clone();
            Arc::new(move |p| {
                let v = g(p);
                [beta * v[0], beta * v[1]]
            }) as _
        }),
        exact_hessian: problem.exact_hessian.as_ref().map(|h| {
            let h = h.clone();
            Arc::new(move |p| beta * h(p)) as _
        }),
        ..problem.clone()
    })
}

/// Scale-free superlinearity test on the last three residuals:
/// `r[n+1] <= 10 r[n]² / r[n-1]`.
pub fn superlinear_tail(residuals: &[f64]) -> bool {
    match residuals {
        [.., a, b, c] => *c <= 10.0 * b * b / a,
        _ => false,
    }
}

struct State {
    u: FieldVector,
    sigma: FieldVector,
    r1: Vec<f64>,
    r2: Vec<f64>,
    norm: f64,
}

fn evaluate(op: &MixedOperator, f: &dyn Fn(Point) -> f64, u: FieldVector, sigma: FieldVector) -> Result<State> {
    let r1 = op.hessian_defect(&u, &sigma);
    let r2 = assemble_residual(&op.mspace, &sigma, f, &op.nonlinear_rule)?;
    let norm = libm::sqrt(r1.iter().chain(&r2).map(|v| v * v).sum());
    Ok(State { u, sigma, r1, r2, norm })
}

/// Solves the discrete system from the configured initial guess.
pub fn newton_solve(
    op: &MixedOperator,
    problem: &ProblemSpec,
    config: &NewtonConfig,
) -> core::result::Result<NewtonReport, NewtonFailure> {
    let no_report = |error: Error| NewtonFailure {
        error,
        report: Box::new(NewtonReport {
            iterations: 0,
            residuals: Vec::new(),
            min_lambda1: Vec::new(),
            halvings: Vec::new(),
            hessian_defects: Vec::new(),
            tolerance: config.tolerance_for(op.num_sigma() + op.num_interior()),
            converged: false,
            u: op.vspace.zeros(),
            sigma: op.mspace.zeros(),
        }),
    };
    config.validate().map_err(no_report)?;
    let bounds = bounds_check(problem, 256);
    if bounds.degenerate {
        log::warn!(
            "right-hand side of `{}` is not bounded away from zero (inf {:e}); convergence theory does not apply",
            problem.label,
            bounds.inf
        );
    }
    let (mut u0, mut sigma0) = initial_guess(op, problem, &config.init).map_err(no_report)?;
    if let Some(cfg) = &config.convexify {
        let convex = apply_convexification(&op.vspace, &u0, cfg)
            .and_then(|u| set_boundary_values(&op.vspace, &u, &*problem.g))
            .map_err(no_report)?;
        sigma0 = discrete_hessian(op, &convex).map_err(no_report)?;
        u0 = convex;
    }
    newton_iterate(op, &*problem.f, u0, sigma0, config)
}

/// Newton iteration from a given pair; boundary values of `u0` are kept.
pub fn newton_iterate(
    op: &MixedOperator,
    f: &dyn Fn(Point) -> f64,
    u0: FieldVector,
    sigma0: FieldVector,
    config: &NewtonConfig,
) -> core::result::Result<NewtonReport, NewtonFailure> {
    let ns = op.num_sigma();
    let ni = op.num_interior();
    let tolerance = config.tolerance_for(ns + ni);
    let mut report = NewtonReport {
        iterations: 0,
        residuals: Vec::new(),
        min_lambda1: Vec::new(),
        halvings: Vec::new(),
        hessian_defects: Vec::new(),
        tolerance,
        converged: false,
        u: u0.clone(),
        sigma: sigma0.clone(),
    };
    macro_rules! fail {
        ($err:expr, $state:expr) => {{
            report.u = $state.u.clone();
            report.sigma = $state.sigma.clone();
            return Err(NewtonFailure {
                error: $err,
                report: Box::new(report),
            });
        }};
    }
    if let Err(e) = config.validate() {
        fail!(e, report);
    }
    let mut state = match evaluate(op, f, u0, sigma0) {
        Ok(s) => s,
        Err(e) => fail!(e, report),
    };
    let record = |report: &mut NewtonReport, state: &State, halvings: usize| -> Result<()> {
        let conv = check_convexity(&op.mspace, &state.sigma, &op.nonlinear_rule)?;
        report.residuals.push(state.norm);
        report.min_lambda1.push(conv.min_lambda1);
        report.halvings.push(halvings);
        report.hessian_defects.push(norm2(&state.r1));
        Ok(())
    };
    if let Err(e) = record(&mut report, &state, 0) {
        fail!(e, state);
    }

    // static blocks [M, B_int] and the reusable elimination order
    let mut fixed = Vec::with_capacity(op.mass.nnz() + op.b_int.nnz());
    op.mass.push_triplets(0, 0, &mut fixed);
    op.b_int.push_triplets(0, ns, &mut fixed);
    let mut order: Option<Vec<usize>> = None;
    let interior = op.vspace.interior_dofs();
    let max_halvings = match config.damping {
        Damping::Full => 0,
        Damping::Halving { max } => max,
    };
    let mut growth = 0;

    while !(state.norm <= tolerance) {
        if report.iterations >= config.max_iter {
            let err = Error::NotConverged {
                iterations: report.iterations,
                residual: state.norm,
            };
            fail!(err, state);
        }
        let c = match assemble_jacobian_block(&op.mspace, &state.sigma, &op.nonlinear_rule) {
            Ok(c) => c,
            Err(e) => fail!(e, state),
        };
        let mut triplets = fixed.clone();
        c.push_triplets(ns, 0, &mut triplets);
        let jac = match SparseMatrix::from_triplets(ns + ni, ns + ni, &triplets) {
            Ok(j) => j,
            Err(e) => fail!(e, state),
        };
        let ord = order.get_or_insert_with(|| nested_dissection(&jac));
        let rhs: Vec<f64> = state.r1.iter().chain(&state.r2).map(|v| -v).collect();
        let solver = match DirectSolver::with_order(jac, ord) {
            Ok(s) => s,
            Err(e) => fail!(e, state),
        };
        let delta = match solver.solve(&rhs) {
            Ok(d) => d,
            Err(e) => fail!(e, state),
        };
        log::debug!("newton step {}: residual {:e}", report.iterations, state.norm);

        let mut alpha = 1.0;
        let mut best: Option<(State, usize)> = None;
        for h in 0..=max_halvings {
            let mut sigma = state.sigma.clone();
            for (s, d) in sigma.values.iter_mut().zip(&delta[..ns]) {
                *s += alpha * d;
            }
            let mut u = state.u.clone();
            for (&dof, d) in interior.iter().zip(&delta[ns..]) {
                u.values[dof] += alpha * d;
            }
            let trial = match evaluate(op, f, u, sigma) {
                Ok(t) if t.norm.is_finite() => Some(t),
                Ok(_) => None,
                Err(Error::Evaluation { .. }) => None,
                Err(e) => fail!(e, state),
            };
            if let Some(t) = trial {
                let decreased = t.norm < state.norm;
                if best.as_ref().is_none_or(|(b, _)| t.norm < b.norm) {
                    best = Some((t, h));
                }
                if decreased {
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((next, halvings)) = best else {
            let err = Error::Divergence {
                history: report.residuals.clone(),
            };
            fail!(err, state);
        };
        growth = if next.norm < state.norm { 0 } else { growth + 1 };
        state = next;
        report.iterations += 1;
        if let Err(e) = record(&mut report, &state, halvings) {
            fail!(e, state);
        }
        if growth >= MAX_GROWTH_STEPS {
            let err = Error::Divergence {
                history: report.residuals.clone(),
            };
            fail!(err, state);
        }
    }
    report.converged = true;
    report.u = state.u;
    report.sigma = state.sigma;
    Ok(report)
}

/// Largest coefficient deviation of a matrix field from the constant `m`.
pub fn max_deviation_from_constant(sigma: &FieldVector, m: Sym2) -> f64 {
    debug_assert_eq!(sigma.kind, SpaceKind::Matrix);
    let n = sigma.len() / 3;
    (0..3)
        .flat_map(|c| sigma.values[c * n..(c + 1) * n].iter().map(move |v| (v - m.component(c)).abs()))
        .fold(0.0, f64::max)
}
