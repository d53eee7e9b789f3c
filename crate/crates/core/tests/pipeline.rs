use std::sync::Arc;

use monge_core::assembly::{discrete_hessian, MixedOperator, QuadratureChoice};
use monge_core::harness::{run_convergence, solve_case, RunConfig};
use monge_core::mesh::{build_polygon_mesh, build_structured_mesh, select_interior, Point, Rect};
use monge_core::problems::{catalog, ProblemSpec, Regularization};
use monge_core::solver::{max_deviation_from_constant, newton_solve, NewtonConfig};
use monge_core::spaces::{interpolate, ScalarSpace};
use monge_core::{Error, Sym2};
use proptest::prelude::*;

/// `u = ½ xᵀAx + b·x` with `A` symmetric positive definite.
fn quadratic_problem(domain: Vec<Point>, a: Sym2, b: [f64; 2]) -> ProblemSpec {
    let u = move |p: Point| 0.5 * (a.xx * p[0] * p[0] + 2.0 * a.xy * p[0] * p[1] + a.yy * p[1] * p[1]) + b[0] * p[0] + b[1] * p[1];
    let det = a.det();
    ProblemSpec {
        label: "paraboloid".into(),
        domain,
        f: Arc::new(move |_| det),
        g: Arc::new(u),
        exact_u: Some(Arc::new(u)),
        exact_grad: Some(Arc::new(move |p: Point| {
            [a.xx * p[0] + a.xy * p[1] + b[0], a.xy * p[0] + a.yy * p[1] + b[1]]
        })),
        exact_hessian: Some(Arc::new(move |_| a)),
        regularization: Regularization::default(),
    }
}

/// Moderately anisotropic: strongly anisotropic data can send Newton from
/// the Poisson start to a nonconvex discrete solution.
fn spd() -> impl Strategy<Value = Sym2> {
    (0.5..2.0f64, 0.5..2.0f64, -0.5..0.5f64).prop_map(|(l1, l2, c)| {
        let off = c * (l1 * l2).sqrt();
        Sym2::new(l1, off, l2)
    })
}

fn quadrilateral() -> impl Strategy<Value = Vec<Point>> {
    (0.0..0.3f64, 0.0..0.3f64, 0.0..0.3f64, 0.0..0.3f64)
        .prop_map(|(a, b, c, d)| vec![[-a, -b], [1.0 + c, 0.0], [1.0, 1.0 + d], [0.0, 1.0]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn convex_quadratics_are_reproduced(a in spd(), bx in -1.0..1.0f64, by in -1.0..1.0f64, domain in quadrilateral()) {
        let problem = quadratic_problem(domain.clone(), a, [bx, by]);
        let mesh = build_polygon_mesh(&domain, 2).unwrap();
        let mut cfg = RunConfig::new(2);
        cfg.newton.tolerance = Some(1e-12);
        let case = solve_case(&problem, mesh, &cfg).unwrap();
        prop_assert!(case.failure.is_none(), "{:?}", case.failure);
        let exact = interpolate(&case.space, &*problem.exact_u.clone().unwrap()).unwrap();
        prop_assert!(case.newton.u.max_abs_diff(&exact) < 1e-9);
        let dev = max_deviation_from_constant(&case.newton.sigma, a);
        prop_assert!(dev < 1e-8, "{dev:e} after {} iterations, min lambda1 {:?}", case.newton.iterations, case.report.min_lambda1);
        prop_assert!(case.report.min_lambda1.unwrap() > 0.0);
    }

    #[test]
    fn discrete_hessian_is_exact_for_quadratics(a in spd(), bx in -1.0..1.0f64, domain in quadrilateral(), k in 2usize..4) {
        let problem = quadratic_problem(domain.clone(), a, [bx, 0.3]);
        let space = ScalarSpace::new(Arc::new(build_polygon_mesh(&domain, 1).unwrap()), k).unwrap();
        let op = MixedOperator::new(&space, QuadratureChoice::for_degree(k)).unwrap();
        let u = interpolate(&space, &*problem.exact_u.unwrap()).unwrap();
        let sigma = discrete_hessian(&op, &u).unwrap();
        prop_assert!(max_deviation_from_constant(&sigma, a) < 1e-10);
    }

    #[test]
    fn interior_region_shrinks_with_margin(n in 2usize..10, m1 in 0.0..0.3f64, m2 in 0.0..0.3f64) {
        let mesh = build_structured_mesh(Rect::UNIT, n).unwrap();
        let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
        let small = select_interior(&mesh, hi).unwrap();
        let large = select_interior(&mesh, lo).unwrap();
        prop_assert!(small.selected.iter().all(|t| large.selected.contains(t)));
    }
}

#[test]
fn smooth_problem_rates_on_small_meshes() {
    let problem = catalog("smooth-radial").unwrap();
    let table = run_convergence(&problem, 4, 3, &RunConfig::new(3), None).unwrap();
    assert!(!table.exact);
    assert!(table.rows.iter().all(|r| r.converged()));
    assert!(table.rates.u_h1.unwrap() > 2.7, "{:?}", table.rates);
    assert!(table.rates.u_l2.unwrap() > 3.5, "{:?}", table.rates);
}

#[test]
fn quadratic_study_is_exact() {
    let problem = catalog("quadratic").unwrap();
    let table = run_convergence(&problem, 2, 3, &RunConfig::new(2), None).unwrap();
    assert!(table.exact);
    assert_eq!(table.rates.u_h1, None);
}

#[test]
fn degenerate_data_still_solves() {
    let problem = catalog("degenerate").unwrap();
    let space = ScalarSpace::new(Arc::new(build_structured_mesh(Rect::UNIT, 8).unwrap()), 2).unwrap();
    let op = MixedOperator::new(&space, QuadratureChoice::for_degree(2)).unwrap();
    match newton_solve(&op, &problem, &NewtonConfig::default()) {
        Ok(rep) => assert!(rep.converged),
        Err(f) => assert!(matches!(f.error, Error::NotConverged { .. } | Error::Divergence { .. })),
    }
}

#[test]
fn unknown_label() {
    assert!(matches!(catalog("cauchy"), Err(Error::UnknownProblem(_))));
}
