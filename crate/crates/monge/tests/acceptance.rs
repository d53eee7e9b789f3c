//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! The process exits successfully even when criteria fail, so that the
//! workspace test run reports them without aborting; set
//! `ACCEPTANCE_STRICT=1` to turn any failure into a nonzero exit status.

use std::sync::Arc;
use std::time::{Duration, Instant};

use monge::table::table_to_csv;
use monge_core::assembly::{
    assemble_jacobian_block, assemble_residual, discrete_hessian, MixedOperator, QuadratureChoice,
};
use monge_core::element::make_quadrature;
use monge_core::harness::{convergence_rows, refinement_sequence, solve_case, CaseResult, ConvergenceTable, RunConfig};
use monge_core::mesh::{build_polygon_mesh, build_structured_mesh, Mesh, Point, Rect};
use monge_core::problems::catalog;
use monge_core::solver::{max_deviation_from_constant, superlinear_tail};
use monge_core::spaces::{interpolate, interpolate_matrix, FieldVector, MatrixSpace, ScalarSpace, SpaceKind};
use monge_core::sparse::norm2;
use monge_core::Sym2;
use rand::{Rng, SeedableRng};

type Verdict = Result<String, String>;

struct Study {
    degree: usize,
    cases: Vec<CaseResult>,
    table: ConvergenceTable,
    csv: String,
    elapsed: Duration,
}

fn smooth_study(degree: usize, levels: usize) -> Result<Study, String> {
    let problem = catalog("smooth-radial").map_err(|e| e.to_string())?;
    let cfg = RunConfig::new(degree);
    let start = Instant::now();
    let cases = refinement_sequence(&problem.domain, 4, levels, None)
        .and_then(|meshes| meshes.into_iter().map(|m| solve_case(&problem, m, &cfg)).collect::<Result<Vec<_>, _>>())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let rows: Vec<_> = cases.iter().map(|c| c.report.clone()).collect();
    let csv = table_to_csv(&rows);
    let table = ConvergenceTable::from_rows(rows).map_err(|e| e.to_string())?;
    Ok(Study {
        degree,
        cases,
        table,
        csv,
        elapsed,
    })
}

fn quadratic_exactness() -> Verdict {
    let problem = catalog("quadratic").unwrap();
    let exact = problem.exact_u.clone().unwrap();
    let cfg = RunConfig::new(2);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [2, 4, 8] {
        let case = solve_case(&problem, build_structured_mesh(Rect::UNIT, n).unwrap(), &cfg).map_err(|e| e.to_string())?;
        if let Some(e) = &case.failure {
            return Err(format!("n={n}: {e}"));
        }
        let iu = interpolate(&case.space, &*exact).unwrap();
        let du = case.newton.u.max_abs_diff(&iu);
        let ds = max_deviation_from_constant(&case.newton.sigma, Sym2::IDENTITY);
        worst = worst.max(du).max(ds);
    }
    let t = start.elapsed();
    let detail = format!("max deviation {worst:.2e}, {:.2} s", t.as_secs_f64());
    if worst <= 1e-8 && t < Duration::from_secs(10) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn h1_rates(studies: &[Study]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in studies {
        let need = if s.degree == 2 { 1.8 } else { 2.7 };
        let rate = s.table.rates.u_h1;
        ok &= rate.is_some_and(|r| r >= need) && s.elapsed < Duration::from_secs(300);
        parts.push(format!(
            "k={} rate {} (need {need}) in {:.1} s",
            s.degree,
            rate.map_or("NA".into(), |r| format!("{r:.3}")),
            s.elapsed.as_secs_f64()
        ));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sigma_rates(studies: &[Study]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in studies {
        let need = if s.degree == 2 { 0.7 } else { 1.7 };
        let rate = s.table.rates.sigma_l2;
        ok &= rate.is_some_and(|r| r >= need);
        parts.push(format!(
            "k={} rate {} (need {need})",
            s.degree,
            rate.map_or("NA".into(), |r| format!("{r:.3}"))
        ));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn convexity(studies: &[Study]) -> Verdict {
    let mut bad = Vec::new();
    let mut lowest = f64::INFINITY;
    for s in studies {
        for c in s.cases.iter().filter(|c| c.report.converged()) {
            let l = c.report.min_lambda1.unwrap_or(f64::NEG_INFINITY);
            lowest = lowest.min(l);
            if !(l >= 0.5) {
                bad.push(format!("k={} h={:.4}: {l:.4}", s.degree, c.report.h));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("lowest min lambda1 {lowest:.4}"))
    } else {
        Err(format!("min lambda1 below 0.5 at {}", bad.join(", ")))
    }
}

fn newton_behavior(k2: &Study) -> Verdict {
    let case = k2
        .cases
        .iter()
        .find(|c| c.space.mesh().num_triangles() == 2 * 16 * 16)
        .ok_or("no n=16 level in the study")?;
    let res = &case.newton.residuals;
    let tail = superlinear_tail(res);
    let detail = format!(
        "{} iterations, residuals {}",
        case.newton.iterations,
        res.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>().join(" ")
    );
    if case.report.converged() && case.newton.iterations <= 8 && tail {
        Ok(detail)
    } else {
        Err(format!("{detail}, superlinear tail {tail}"))
    }
}

fn random_sym(rng: &mut impl Rng) -> Sym2 {
    Sym2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn monomial(a: usize, b: usize) -> (impl Fn(Point) -> f64, impl Fn(Point) -> Sym2) {
    let d = move |p: Point, da: usize, db: usize| {
        if da > a || db > b {
            return 0.0;
        }
        let ca: f64 = (0..da).map(|i| (a - i) as f64).product();
        let cb: f64 = (0..db).map(|i| (b - i) as f64).product();
        ca * cb * p[0].powi((a - da) as i32) * p[1].powi((b - db) as i32)
    };
    (
        move |p: Point| d(p, 0, 0),
        move |p: Point| Sym2::new(d(p, 2, 0), d(p, 1, 1), d(p, 0, 2)),
    )
}

fn algebraic_oracles() -> Verdict {
    let mut rng = rand::rngs::StdRng::seed_from_u64(20);
    let mut mv: f64 = 0.0;
    for _ in 0..100 {
        let (eta, tau) = (random_sym(&mut rng), random_sym(&mut rng));
        let rhs = (0.5 * (eta + tau)).cof().ddot(&(eta - tau));
        mv = mv.max((eta.det() - tau.det() - rhs).abs());
    }

    let space = ScalarSpace::new(Arc::new(build_structured_mesh(Rect::UNIT, 3).unwrap()), 2).unwrap();
    let ms = MatrixSpace::new(&space);
    let rule = make_quadrature(6).unwrap();
    let random_field = |rng: &mut rand::rngs::StdRng, shift: f64| {
        FieldVector::new(
            SpaceKind::Matrix,
            2,
            (0..ms.ndof()).map(|_| rng.gen_range(-0.5..0.5) + shift).collect(),
        )
    };
    let s0 = random_field(&mut rng, 1.0);
    let t0 = random_field(&mut rng, 0.0);
    let f = |p: Point| 1.0 + p[0] * p[1];
    let r0 = assemble_residual(&ms, &s0, &f, &rule).unwrap();
    let jt = assemble_jacobian_block(&ms, &s0, &rule).unwrap().mul_vec(&t0.values);
    let steps = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let fd: Vec<f64> = steps
        .iter()
        .map(|&t| {
            let shifted = FieldVector::new(
                SpaceKind::Matrix,
                2,
                s0.values.iter().zip(&t0.values).map(|(a, b)| a + t * b).collect(),
            );
            let rt = assemble_residual(&ms, &shifted, &f, &rule).unwrap();
            let diff: Vec<f64> = rt.iter().zip(&r0).zip(&jt).map(|((a, b), j)| (a - b) / t - j).collect();
            norm2(&diff)
        })
        .collect();
    let ratios: Vec<f64> = fd.windows(2).map(|w| w[0] / w[1]).collect();
    let first_order = ratios.iter().all(|r| (1.9..=2.1).contains(r));

    let poly = [[0.0, 0.0], [1.2, 0.1], [1.5, 1.0], [0.3, 1.4], [-0.2, 0.6]];
    let mut zh: f64 = 0.0;
    for k in 2..=4 {
        for mesh in [build_structured_mesh(Rect::UNIT, 3).unwrap(), build_polygon_mesh(&poly, 1).unwrap()] {
            let space = ScalarSpace::new(Arc::new(mesh), k).unwrap();
            let op = MixedOperator::new(&space, QuadratureChoice::for_degree(k)).unwrap();
            for a in 0..=k {
                for b in 0..=(k - a) {
                    let (q, hess) = monomial(a, b);
                    let u = interpolate(&space, &q).unwrap();
                    let sigma = discrete_hessian(&op, &u).unwrap();
                    let exact = interpolate_matrix(&op.mspace, &hess).unwrap();
                    zh = zh.max(sigma.max_abs_diff(&exact));
                }
            }
        }
    }

    let detail = format!(
        "mean-value defect {mv:.1e}; difference quotient error ratios {}; Z_h defect {zh:.1e}",
        ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" ")
    );
    if mv <= 1e-12 && first_order && zh <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rescaling() -> Verdict {
    let problem = catalog("quadratic").unwrap();
    let mut worst: f64 = 0.0;
    for n in [4, 8] {
        let mesh = build_structured_mesh(Rect::UNIT, n).unwrap();
        let direct = solve_case(&problem, mesh.clone(), &RunConfig::new(2)).map_err(|e| e.to_string())?;
        let mut cfg = RunConfig::new(2);
        cfg.beta = Some(5.0);
        let scaled = solve_case(&problem, mesh, &cfg).map_err(|e| e.to_string())?;
        if let Some(e) = direct.failure.as_ref().or(scaled.failure.as_ref()) {
            return Err(format!("n={n}: {e}"));
        }
        worst = worst
            .max(direct.newton.u.max_abs_diff(&scaled.newton.u))
            .max(direct.newton.sigma.max_abs_diff(&scaled.newton.sigma));
    }
    let detail = format!("max difference {worst:.2e}");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn nonsmooth() -> Verdict {
    let problem = catalog("boundary-singular").unwrap();
    let mut cfg = RunConfig::new(2);
    cfg.clip = Some(100.0);
    cfg.interior_margin = 0.1;
    let mut sup = Vec::new();
    let mut last_lambda = f64::NAN;
    for n in [8, 16, 32] {
        let mesh: Mesh = build_structured_mesh(Rect::UNIT, n).unwrap();
        let case = solve_case(&problem, mesh, &cfg).map_err(|e| e.to_string())?;
        if let Some(e) = &case.failure {
            // every level is needed for the comparison, so the rest are skipped
            let lambda = case.newton.min_lambda1.last().copied().unwrap_or(f64::NAN);
            return Err(format!(
                "n={n} did not converge ({e}; last iterate min lambda1 {lambda:.3e}); finer levels skipped"
            ));
        }
        sup.push(case.report.err_u_sup_interior.unwrap_or(f64::NAN));
        last_lambda = case.report.min_lambda1.unwrap_or(f64::NAN);
    }
    let decreasing = sup.windows(2).all(|w| w[1] < w[0]);
    let detail = format!(
        "interior sup errors {}; final min lambda1 {last_lambda:.3e}",
        sup.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ")
    );
    if decreasing && last_lambda > -1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism(studies: &[Study]) -> Verdict {
    let problem = catalog("smooth-radial").unwrap();
    for s in studies {
        let rows = convergence_rows(&problem, 4, s.cases.len(), &RunConfig::new(s.degree), None)
            .map_err(|e| e.to_string())?;
        if table_to_csv(&rows) != s.csv {
            return Err(format!("k={} tables differ between runs", s.degree));
        }
    }
    Ok(format!("{} studies reproduced byte for byte", studies.len()))
}

fn main() {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, v: Verdict| {
        let (tag, detail) = match v {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {id} ({name}): {detail}");
    };

    report(1, "quadratic exactness", quadratic_exactness());
    let studies: Result<Vec<Study>, String> = [(2, 4), (3, 3)].into_iter().map(|(k, l)| smooth_study(k, l)).collect();
    match &studies {
        Ok(st) => {
            report(2, "scalar rate", h1_rates(st));
            report(3, "hessian rate", sigma_rates(st));
            report(4, "convexity monitor", convexity(st));
            report(5, "newton behavior", newton_behavior(&st[0]));
        }
        Err(e) => {
            for (id, name) in [(2, "scalar rate"), (3, "hessian rate"), (4, "convexity monitor"), (5, "newton behavior")] {
                report(id, name, Err(e.clone()));
            }
        }
    }
    report(6, "algebraic oracles", algebraic_oracles());
    report(7, "rescaling invariance", rescaling());
    report(8, "non-smooth program", nonsmooth());
    match &studies {
        Ok(st) => report(9, "determinism", determinism(st)),
        Err(e) => report(9, "determinism", Err(e.clone())),
    }

    println!("acceptance: {} of 9 criteria failed", failures);
    if failures > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
        std::process::exit(1);
    }
}
