//! Error norms, single solves and convergence studies.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::assembly::{check_convexity, MixedOperator, QuadratureChoice};
use crate::element::{make_quadrature, QuadratureRule, MAX_QUADRATURE_EXACTNESS};
use crate::error::{invalid, Error, Result};
use crate::element::{AffineMap, Tabulation};
use crate::mesh::{
    build_polygon_mesh, build_structured_mesh, refine_uniform, select_interior, InteriorRegion, Mesh, Point, Rect,
};
use crate::problems::{regularize, ProblemSpec};
use crate::solver::{apply_rescaling, newton_solve, NewtonConfig, NewtonReport};
use crate::spaces::{FieldVector, MatrixSpace, ScalarSpace, SpaceKind};
use crate::Sym2;

/// Errors of one discrete solution against the exact one. Error fields are
/// `None` when no exact solution is known or the solve failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub ndof_u: usize,
    pub ndof_sigma: usize,
    pub err_u_l2: Option<f64>,
    /// Full `H¹` norm of the error (broken, element by element).
    pub err_u_h1: Option<f64>,
    pub err_sigma_l2: Option<f64>,
    pub err_u_sup_interior: Option<f64>,
    pub newton_iters: Option<usize>,
    pub min_lambda1: Option<f64>,
    /// Why the solve behind this row did not converge.
    pub failure: Option<String>,
}

impl ErrorReport {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }
}

/// `(||u_h - u||_{L²}, |u_h - u|_{H¹})` by elementwise quadrature.
pub fn scalar_errors(
    space: &ScalarSpace,
    u_h: &FieldVector,
    exact_u: &dyn Fn(Point) -> f64,
    exact_grad: &dyn Fn(Point) -> [f64; 2],
    quad: &QuadratureRule,
) -> Result<(f64, f64)> {
    check_kind(u_h, SpaceKind::Scalar, space.ndof())?;
    let tab = space.element().tabulate(&quad.points);
    let (mut l2, mut semi) = (0.0, 0.0);
    for t in 0..space.mesh().num_triangles() {
        let map = space.map(t);
        let dofs = space.cell_dofs(t);
        let (mut el_l2, mut el_semi) = (0.0, 0.0);
        for (q, &w) in quad.weights.iter().enumerate() {
            let x = map.to_physical(quad.points[q]);
            let (v, g) = value_and_grad(u_h, dofs, map, &tab, q);
            let du = exact_grad(x);
            let e = v - exact_u(x);
            let (ex, ey) = (g[0] - du[0], g[1] - du[1]);
            el_l2 += w * e * e;
            el_semi += w * (ex * ex + ey * ey);
        }
        l2 += map.det * el_l2;
        semi += map.det * el_semi;
    }
    Ok((libm::sqrt(l2), libm::sqrt(semi)))
}

/// `||σ_h - σ||_{L²}` with the Frobenius norm pointwise.
pub fn matrix_error(
    mspace: &MatrixSpace,
    sigma_h: &FieldVector,
    exact: &dyn Fn(Point) -> Sym2,
    quad: &QuadratureRule,
) -> Result<f64> {
    check_kind(sigma_h, SpaceKind::Matrix, mspace.ndof())?;
    let s = mspace.scalar();
    let n = s.ndof();
    let tab = s.element().tabulate(&quad.points);
    let mut total = 0.0;
    for t in 0..s.mesh().num_triangles() {
        let map = s.map(t);
        let dofs = s.cell_dofs(t);
        let mut el = 0.0;
        for (q, &w) in quad.weights.iter().enumerate() {
            let phi = tab.values_at(q);
            let mut c = [0.0; 3];
            for (i, &d) in dofs.iter().enumerate() {
                for (comp, cv) in c.iter_mut().enumerate() {
                    *cv += phi[i] * sigma_h.values[comp * n + d];
                }
            }
            let diff = Sym2::from_components(c) - exact(map.to_physical(quad.points[q]));
            el += w * diff.ddot(&diff);
        }
        total += map.det * el;
    }
    Ok(libm::sqrt(total))
}

/// Largest `|u_h - u|` over the quadrature points of the selected triangles.
pub fn interior_sup_error(
    space: &ScalarSpace,
    u_h: &FieldVector,
    exact_u: &dyn Fn(Point) -> f64,
    quad: &QuadratureRule,
    region: &InteriorRegion,
) -> Result<Option<f64>> {
    check_kind(u_h, SpaceKind::Scalar, space.ndof())?;
    if region.is_empty() {
        return Ok(None);
    }
    let tab = space.element().tabulate(&quad.points);
    let mut sup: f64 = 0.0;
    for &t in &region.selected {
        let map = space.map(t);
        let dofs = space.cell_dofs(t);
        for q in 0..quad.len() {
            let phi = tab.values_at(q);
            let v: f64 = dofs.iter().enumerate().map(|(i, &d)| phi[i] * u_h.values[d]).sum();
            sup = sup.max((v - exact_u(map.to_physical(quad.points[q]))).abs());
        }
    }
    Ok(Some(sup))
}

fn check_kind(v: &FieldVector, kind: SpaceKind, len: usize) -> Result<()> {
    if v.kind != kind || v.len() != len {
        return Err(invalid(format!("expected a {} field with {len} coefficients", kind.as_str())));
    }
    Ok(())
}

fn value_and_grad(
    u: &FieldVector,
    dofs: &[usize],
    map: &AffineMap,
    tab: &Tabulation,
    q: usize,
) -> (f64, [f64; 2]) {
    let phi = tab.values_at(q);
    let grads = tab.gradients_at(q);
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for (i, &d) in dofs.iter().enumerate() {
        let c = u.values[d];
        v += c * phi[i];
        let pg = map.grad(grads[i]);
        g[0] += c * pg[0];
        g[1] += c * pg[1];
    }
    (v, g)
}

/// All error norms of `(u_h, σ_h)` against the exact data of `problem`.
/// The `L²`/`H¹` norms cover the whole mesh; the sup error only `interior`.
pub fn error_norms(
    mspace: &MatrixSpace,
    u_h: &FieldVector,
    sigma_h: &FieldVector,
    problem: &ProblemSpec,
    quad: &QuadratureRule,
    interior: &InteriorRegion,
) -> Result<ErrorReport> {
    let space = mspace.scalar();
    let k = space.degree();
    if quad.exactness < 2 * (k + 1) {
        log::warn!(
            "error quadrature exactness {} is below {} for degree {k}",
            quad.exactness,
            2 * (k + 1)
        );
    }
    let mut report = ErrorReport {
        h: space.mesh().mesh_size(),
        ndof_u: space.ndof(),
        ndof_sigma: mspace.ndof(),
        err_u_l2: None,
        err_u_h1: None,
        err_sigma_l2: None,
        err_u_sup_interior: None,
        newton_iters: None,
        min_lambda1: None,
        failure: None,
    };
    if let (Some(u), Some(grad)) = (problem.exact_u.as_ref(), problem.exact_gradient()) {
        let (l2, semi) = scalar_errors(space, u_h, &**u, &*grad, quad)?;
        report.err_u_l2 = Some(l2);
        report.err_u_h1 = Some(libm::sqrt(l2 * l2 + semi * semi));
        report.err_u_sup_interior = interior_sup_error(space, u_h, &**u, quad, interior)?;
    }
    if let Some(hess) = problem.exact_hessian.as_ref() {
        report.err_sigma_l2 = Some(matrix_error(mspace, sigma_h, &**hess, quad)?);
    }
    Ok(report)
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_rate(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| (libm::log(*h), libm::log(*e)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Rate between the last two entries.
pub fn last_pair_rate(h: &[f64], e: &[f64]) -> Option<f64> {
    let n = h.len().min(e.len());
    if n < 2 {
        return None;
    }
    fit_rate(&h[n - 2..n], &e[n - 2..n])
}

/// One rate per error column.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Rates {
    pub u_l2: Option<f64>,
    pub u_h1: Option<f64>,
    pub sigma_l2: Option<f64>,
    pub u_sup: Option<f64>,
}

/// Errors at or below this count as exact reproduction.
pub const EXACT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ErrorReport>,
    /// Least-squares rates over the converged rows.
    pub rates: Rates,
    pub last_pair: Rates,
    /// Every converged row reproduces `u` to [`EXACT_THRESHOLD`]; rates
    /// are then left undefined.
    pub exact: bool,
}

impl ConvergenceTable {
    /// Validates ordering and fits rates over converged rows.
    pub fn from_rows(rows: Vec<ErrorReport>) -> Result<Self> {
        if rows.windows(2).any(|w| !(w[1].h < w[0].h)) {
            return Err(invalid("mesh sizes must strictly decrease"));
        }
        let good: Vec<&ErrorReport> = rows.iter().filter(|r| r.converged()).collect();
        if good.len() < 2 {
            return Err(Error::RateUnavailable {
                converged_rows: good.len(),
            });
        }
        let exact = good.iter().all(|r| {
            [r.err_u_l2, r.err_u_h1, r.err_u_sup_interior]
                .iter()
                .all(|e| e.is_some_and(|v| v <= EXACT_THRESHOLD))
        });
        let (mut rates, mut last_pair) = (Rates::default(), Rates::default());
        if !exact {
            let column = |get: fn(&ErrorReport) -> Option<f64>| -> (Vec<f64>, Vec<f64>) {
                good.iter().filter_map(|r| get(r).map(|e| (r.h, e))).unzip()
            };
            let pick = |get: fn(&ErrorReport) -> Option<f64>| {
                let (h, e) = column(get);
                (fit_rate(&h, &e), last_pair_rate(&h, &e))
            };
            (rates.u_l2, last_pair.u_l2) = pick(|r| r.err_u_l2);
            (rates.u_h1, last_pair.u_h1) = pick(|r| r.err_u_h1);
            (rates.sigma_l2, last_pair.sigma_l2) = pick(|r| r.err_sigma_l2);
            (rates.u_sup, last_pair.u_sup) = pick(|r| r.err_u_sup_interior);
        }
        Ok(ConvergenceTable {
            rows,
            rates,
            last_pair,
            exact,
        })
    }
}

/// Options shared by single solves and convergence studies.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub degree: usize,
    /// Overrides the quadrature exactness for nonlinear terms and norms.
    pub quad_degree: Option<usize>,
    pub newton: NewtonConfig,
    pub beta: Option<f64>,
    pub clip: Option<f64>,
    pub mollify_radius: Option<f64>,
    pub interior_margin: f64,
}

impl RunConfig {
    pub fn new(degree: usize) -> Self {
        RunConfig {
            degree,
            quad_degree: None,
            newton: NewtonConfig::default(),
            beta: None,
            clip: None,
            mollify_radius: None,
            interior_margin: 0.0,
        }
    }

    pub fn quadrature(&self) -> QuadratureChoice {
        let mut q = QuadratureChoice::for_degree(self.degree);
        if let Some(d) = self.quad_degree {
            q.nonlinear = d;
        }
        q
    }

    fn error_rule(&self) -> Result<QuadratureRule> {
        let d = self
            .quad_degree
            .unwrap_or((2 * self.degree + 2).min(MAX_QUADRATURE_EXACTNESS));
        make_quadrature(d)
    }

    fn validate(&self) -> Result<()> {
        if self.degree < 2 {
            return Err(invalid(format!("degree must be at least 2, got {}", self.degree)));
        }
        if !(self.interior_margin >= 0.0) {
            return Err(invalid("interior margin must be nonnegative"));
        }
        self.newton.validate()
    }

    /// The problem actually discretized: regularized data, before rescaling.
    pub fn prepare(&self, problem: &ProblemSpec) -> Result<ProblemSpec> {
        if self.clip.is_some() || self.mollify_radius.is_some() {
            regularize(problem, self.clip.unwrap_or(f64::INFINITY), self.mollify_radius)
        } else {
            Ok(problem.clone())
        }
    }
}

/// Outcome of one solve. Solver failures are recorded, not returned as errors.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub report: ErrorReport,
    /// History of the solve (of the last iterate when it failed), with
    /// fields already scaled back when rescaling was used.
    pub newton: NewtonReport,
    pub failure: Option<Error>,
    pub space: ScalarSpace,
}

/// Discretizes `problem` on `mesh`, runs Newton and measures the errors.
pub fn solve_case(problem: &ProblemSpec, mesh: Mesh, cfg: &RunConfig) -> Result<CaseResult> {
    cfg.validate()?;
    let data = cfg.prepare(problem)?;
    let solved = match cfg.beta {
        Some(beta) => apply_rescaling(&data, beta)?,
        None => data.clone(),
    };
    let interior = select_interior(&mesh, cfg.interior_margin)?;
    let space = ScalarSpace::new(Arc::new(mesh), cfg.degree)?;
    let op = MixedOperator::new(&space, cfg.quadrature())?;
    let (mut newton, failure) = match newton_solve(&op, &solved, &cfg.newton) {
        Ok(rep) => (rep, None),
        Err(f) => (*f.report, Some(f.error)),
    };
    if let Some(beta) = cfg.beta {
        newton.u = newton.u.scaled(1.0 / beta);
        newton.sigma = newton.sigma.scaled(1.0 / beta);
    }
    let mut report = match &failure {
        None => error_norms(&op.mspace, &newton.u, &newton.sigma, &data, &cfg.error_rule()?, &interior)?,
        Some(_) => ErrorReport {
            h: op.vspace.mesh().mesh_size(),
            ndof_u: op.vspace.ndof(),
            ndof_sigma: op.mspace.ndof(),
            err_u_l2: None,
            err_u_h1: None,
            err_sigma_l2: None,
            err_u_sup_interior: None,
            newton_iters: None,
            min_lambda1: None,
            failure: None,
        },
    };
    report.newton_iters = Some(newton.iterations);
    if failure.is_none() {
        report.min_lambda1 = Some(check_convexity(&op.mspace, &newton.sigma, &op.nonlinear_rule)?.min_lambda1);
    }
    report.failure = failure.as_ref().map(|e| e.to_string());
    Ok(CaseResult {
        report,
        newton,
        failure,
        space,
    })
}

fn as_rect(domain: &[Point]) -> Option<Rect> {
    if domain.len() != 4 {
        return None;
    }
    let [a, b, c, d] = [domain[0], domain[1], domain[2], domain[3]];
    let axis = a[1] == b[1] && b[0] == c[0] && c[1] == d[1] && d[0] == a[0];
    (axis && b[0] > a[0] && c[1] > b[1]).then(|| Rect::new(a[0], a[1], c[0], c[1]))
}

/// Meshes for `levels` refinement levels starting from `n` subdivisions.
/// Rectangles get structured meshes; other polygons a refined fan.
pub fn refinement_sequence(domain: &[Point], n: usize, levels: usize, base: Option<Mesh>) -> Result<Vec<Mesh>> {
    if n == 0 {
        return Err(invalid("need at least one subdivision"));
    }
    let mut meshes = Vec::with_capacity(levels);
    match (base, as_rect(domain)) {
        (None, Some(rect)) => {
            for l in 0..levels {
                meshes.push(build_structured_mesh(rect, n << l)?);
            }
        }
        (base, _) => {
            let mut m = match base {
                Some(m) => m,
                None => build_polygon_mesh(domain, (usize::BITS - (n - 1).leading_zeros()) as usize)?,
            };
            for l in 0..levels {
                if l > 0 {
                    m = refine_uniform(&m)?;
                }
                meshes.push(m.clone());
            }
        }
    }
    Ok(meshes)
}

/// Solves on every level and records one row each; failures stay in their rows.
pub fn convergence_rows(
    problem: &ProblemSpec,
    n: usize,
    levels: usize,
    cfg: &RunConfig,
    base: Option<Mesh>,
) -> Result<Vec<ErrorReport>> {
    if levels < 2 {
        return Err(invalid("a convergence study needs at least two levels"));
    }
    refinement_sequence(&problem.domain, n, levels, base)?
        .into_iter()
        .map(|mesh| solve_case(problem, mesh, cfg).map(|c| c.report))
        .collect()
}

pub fn run_convergence(
    problem: &ProblemSpec,
    n: usize,
    levels: usize,
    cfg: &RunConfig,
    base: Option<Mesh>,
) -> Result<ConvergenceTable> {
    ConvergenceTable::from_rows(convergence_rows(problem, n, levels, cfg, base)?)
}
