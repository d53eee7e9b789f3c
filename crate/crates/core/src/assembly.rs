//! Assembly of the mixed system
//!
//! ```text
//! (σ, τ) + (div τ, Du) - <Du, τ n> = 0        for all τ in Σ_h
//! (det σ, v)                      = (f, v)   for all interior v in V_h
//! ```
//!
//! Matrix-field dofs are laid out component-major (xx, xy, yy); the mass form
//! is the Frobenius product, so the off-diagonal component carries weight 2.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::element::{gauss_legendre_01, make_quadrature, QuadratureRule, Tabulation};
use crate::error::{invalid, Error, Result};
use crate::mesh::Point;
use crate::sparse::{DirectSolver, SparseMatrix};
use crate::spaces::{FieldVector, MatrixSpace, ScalarSpace, SpaceKind};
use crate::sym::Sym2;

/// Weight of each matrix component in the Frobenius product.
const COMPONENT_WEIGHT: [f64; 3] = [1.0, 2.0, 1.0];

/// Quadrature exactness used for the linear forms and for the determinant terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureChoice {
    pub linear: usize,
    pub nonlinear: usize,
}

impl QuadratureChoice {
    /// `2k` for bilinear forms and `3k` for `det σ · v`.
    pub fn for_degree(k: usize) -> Self {
        QuadratureChoice {
            linear: 2 * k,
            nonlinear: 3 * k,
        }
    }

    /// Same exactness for every form.
    pub fn uniform(degree: usize) -> Self {
        QuadratureChoice {
            linear: degree,
            nonlinear: degree,
        }
    }
}

/// Physical gradients of all basis functions at one quadrature point.
fn physical_grads(space: &ScalarSpace, t: usize, tab: &Tabulation, q: usize, out: &mut [[f64; 2]]) {
    let map = space.map(t);
    for (o, &g) in out.iter_mut().zip(tab.gradients_at(q)) {
        *o = map.grad(g);
    }
}

fn check_rule(rule: &QuadratureRule, needed: usize, what: &str) -> Result<()> {
    if rule.exactness < needed {
        return Err(invalid(alloc::format!(
            "{what} needs quadrature exactness {needed}, rule has {}",
            rule.exactness
        )));
    }
    Ok(())
}

/// Mass matrix of the matrix space: entry `(i, j) = ∫ φ_j : φ_i`.
pub fn assemble_mass(space: &MatrixSpace, quad: &QuadratureRule) -> Result<SparseMatrix> {
    let s = space.scalar();
    check_rule(quad, 2 * s.degree(), "mass matrix")?;
    let tab = s.element().tabulate(&quad.points);
    let nloc = s.element().num_nodes();
    let n = s.ndof();
    let mut local = vec![0.0; nloc * nloc];
    let mut triplets = Vec::with_capacity(3 * s.mesh().num_triangles() * nloc * nloc);
    for t in 0..s.mesh().num_triangles() {
        local.iter_mut().for_each(|v| *v = 0.0);
        let det = s.map(t).det;
        for (q, &w) in quad.weights.iter().enumerate() {
            let phi = tab.values_at(q);
            let wq = w * det;
            for i in 0..nloc {
                for j in 0..nloc {
                    local[i * nloc + j] += wq * phi[i] * phi[j];
                }
            }
        }
        let dofs = s.cell_dofs(t);
        for (c, &cw) in COMPONENT_WEIGHT.iter().enumerate() {
            for i in 0..nloc {
                for j in 0..nloc {
                    triplets.push((c * n + dofs[i], c * n + dofs[j], cw * local[i * nloc + j]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(3 * n, 3 * n, &triplets)
}

/// `τ-row, u-column` entries of `∫ div τ · Dv - ∫_∂Ω Dv · (τ n)`, split into
/// interior and boundary scalar dof columns.
pub fn assemble_divgrad(
    vspace: &ScalarSpace,
    mspace: &MatrixSpace,
    quad: &QuadratureRule,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let s = mspace.scalar();
    let same_mesh = Arc::ptr_eq(s.mesh_arc(), vspace.mesh_arc()) || s.mesh() == vspace.mesh();
    if s.degree() != vspace.degree() || s.ndof() != vspace.ndof() || !same_mesh {
        return Err(invalid("scalar and matrix spaces must share mesh and degree"));
    }
    let k = vspace.degree();
    check_rule(quad, 2 * k, "divergence form")?;
    let n = vspace.ndof();
    let nloc = vspace.element().num_nodes();
    let tab = vspace.element().tabulate(&quad.points);
    let mut grads = vec![[0.0; 2]; nloc];
    // (row, column dof, value) before splitting columns
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut local = vec![[0.0; 3]; nloc * nloc];

    for t in 0..vspace.mesh().num_triangles() {
        local.iter_mut().for_each(|v| *v = [0.0; 3]);
        let det = vspace.map(t).det;
        for (q, &w) in quad.weights.iter().enumerate() {
            physical_grads(vspace, t, &tab, q, &mut grads);
            let wq = w * det;
            for i in 0..nloc {
                let gi = grads[i];
                for j in 0..nloc {
                    let gj = grads[j];
                    let e = &mut local[i * nloc + j];
                    e[0] += wq * gi[0] * gj[0];
                    e[1] += wq * (gi[1] * gj[0] + gi[0] * gj[1]);
                    e[2] += wq * gi[1] * gj[1];
                }
            }
        }
        let dofs = vspace.cell_dofs(t);
        for i in 0..nloc {
            for j in 0..nloc {
                let e = local[i * nloc + j];
                for c in 0..3 {
                    entries.push((c * n + dofs[i], dofs[j], e[c]));
                }
            }
        }
    }

    // boundary term, exact for the degree 2k-1 edge integrand
    let (gs, gw) = gauss_legendre_01(k + 1);
    let mut phi = vec![0.0; nloc];
    let mut ref_grads = vec![[0.0; 2]; nloc];
    let mesh = vspace.mesh();
    for be in mesh.boundary_edges() {
        let t = be.triangle;
        let l = be.local_edge;
        let [pa, pb] = [mesh.vertices()[be.vertices[0]], mesh.vertices()[be.vertices[1]]];
        let len = libm::hypot(pb[0] - pa[0], pb[1] - pa[1]);
        let nrm = be.normal;
        let map = vspace.map(t);
        let dofs = vspace.cell_dofs(t);
        for (&sq, &wq) in gs.iter().zip(&gw) {
            let mut bary = [0.0; 3];
            bary[l] = 1.0 - sq;
            bary[(l + 1) % 3] = sq;
            vspace.element().eval_into(bary, &mut phi, &mut ref_grads);
            let w = wq * len;
            for i in 0..nloc {
                for j in 0..nloc {
                    let g = map.grad(ref_grads[j]);
                    let base = w * phi[i];
                    let vals = [
                        -base * g[0] * nrm[0],
                        -base * (g[0] * nrm[1] + g[1] * nrm[0]),
                        -base * g[1] * nrm[1],
                    ];
                    for (c, v) in vals.iter().enumerate() {
                        entries.push((c * n + dofs[i], dofs[j], *v));
                    }
                }
            }
        }
    }

    let mut int_t = Vec::with_capacity(entries.len());
    let mut bdry_t = Vec::new();
    for (r, d, v) in entries {
        if vspace.is_boundary(d) {
            bdry_t.push((r, vspace.split_index(d), v));
        } else {
            int_t.push((r, vspace.split_index(d), v));
        }
    }
    Ok((
        SparseMatrix::from_triplets(3 * n, vspace.interior_dofs().len(), &int_t)?,
        SparseMatrix::from_triplets(3 * n, vspace.boundary_dofs().len(), &bdry_t)?,
    ))
}

/// Linear blocks of the mixed system together with the rules used to build them.
#[derive(Debug, Clone)]
pub struct MixedOperator {
    pub vspace: ScalarSpace,
    pub mspace: MatrixSpace,
    pub mass: SparseMatrix,
    pub b_int: SparseMatrix,
    pub b_bdry: SparseMatrix,
    pub linear_rule: QuadratureRule,
    pub nonlinear_rule: QuadratureRule,
    mass_solver: DirectSolver,
}

impl MixedOperator {
    pub fn new(vspace: &ScalarSpace, quad: QuadratureChoice) -> Result<Self> {
        let mspace = MatrixSpace::new(vspace);
        let linear_rule = make_quadrature(quad.linear)?;
        let nonlinear_rule = make_quadrature(quad.nonlinear)?;
        let mass = assemble_mass(&mspace, &linear_rule)?;
        let (b_int, b_bdry) = assemble_divgrad(vspace, &mspace, &linear_rule)?;
        let mass_solver = DirectSolver::new(mass.clone())?;
        Ok(MixedOperator {
            vspace: vspace.clone(),
            mspace,
            mass,
            b_int,
            b_bdry,
            linear_rule,
            nonlinear_rule,
            mass_solver,
        })
    }

    pub fn num_sigma(&self) -> usize {
        self.mspace.ndof()
    }

    pub fn num_interior(&self) -> usize {
        self.vspace.interior_dofs().len()
    }

    /// `B u = B_int u_int + B_bdry u_bdry`.
    pub fn apply_b(&self, u: &FieldVector) -> Vec<f64> {
        let (ui, ub) = self.vspace.split(u);
        let mut r = self.b_int.mul_vec(&ui);
        for (a, b) in r.iter_mut().zip(self.b_bdry.mul_vec(&ub)) {
            *a += b;
        }
        r
    }

    /// Defect `M σ + B u` of the discrete Hessian identity.
    pub fn hessian_defect(&self, u: &FieldVector, sigma: &FieldVector) -> Vec<f64> {
        let mut r = self.mass.mul_vec(&sigma.values);
        for (a, b) in r.iter_mut().zip(self.apply_b(u)) {
            *a += b;
        }
        r
    }
}

/// The matrix field `σ` with `M σ = -B u`, i.e. the discrete Hessian of `u`.
pub fn discrete_hessian(op: &MixedOperator, u: &FieldVector) -> Result<FieldVector> {
    if u.kind != SpaceKind::Scalar || u.len() != op.vspace.ndof() {
        return Err(invalid("discrete Hessian needs a field of the scalar space"));
    }
    let rhs: Vec<f64> = op.apply_b(u).iter().map(|v| -v).collect();
    let sigma = op.mass_solver.solve(&rhs)?;
    Ok(FieldVector::new(SpaceKind::Matrix, u.degree, sigma))
}

/// Values of a matrix field at every quadrature point of triangle `t`.
fn sigma_at_points(mspace: &MatrixSpace, sigma: &FieldVector, tab: &Tabulation, t: usize, out: &mut Vec<Sym2>) {
    let s = mspace.scalar();
    let n = s.ndof();
    let dofs = s.cell_dofs(t);
    out.clear();
    for q in 0..tab.num_points {
        let phi = tab.values_at(q);
        let mut c = [0.0; 3];
        for (i, &d) in dofs.iter().enumerate() {
            c[0] += phi[i] * sigma.values[d];
            c[1] += phi[i] * sigma.values[n + d];
            c[2] += phi[i] * sigma.values[2 * n + d];
        }
        out.push(Sym2::from_components(c));
    }
}

fn check_sigma(mspace: &MatrixSpace, sigma: &FieldVector) -> Result<()> {
    if sigma.kind != SpaceKind::Matrix || sigma.len() != mspace.ndof() {
        return Err(invalid("field does not belong to the matrix space"));
    }
    Ok(())
}

/// Residual `∫ (det σ - f) v` for every interior scalar basis function `v`,
/// indexed by interior dof position.
pub fn assemble_residual(
    mspace: &MatrixSpace,
    sigma: &FieldVector,
    f: &dyn Fn(Point) -> f64,
    quad: &QuadratureRule,
) -> Result<Vec<f64>> {
    check_sigma(mspace, sigma)?;
    let s = mspace.scalar();
    let tab = s.element().tabulate(&quad.points);
    let mut res = vec![0.0; s.interior_dofs().len()];
    let mut vals = Vec::with_capacity(quad.len());
    for t in 0..s.mesh().num_triangles() {
        sigma_at_points(mspace, sigma, &tab, t, &mut vals);
        let map = s.map(t);
        let dofs = s.cell_dofs(t);
        for (q, &w) in quad.weights.iter().enumerate() {
            let x = map.to_physical(quad.points[q]);
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::Evaluation {
                    what: "right-hand side".into(),
                    point: x,
                });
            }
            let integrand = w * map.det * (vals[q].det() - fx);
            let phi = tab.values_at(q);
            for (i, &d) in dofs.iter().enumerate() {
                if !s.is_boundary(d) {
                    res[s.split_index(d)] += integrand * phi[i];
                }
            }
        }
    }
    Ok(res)
}

/// Derivative of the determinant residual with respect to `σ`: entry
/// `(v, τ) = ∫ cof(σ) : τ v`, rows by interior dof, columns by matrix dof.
pub fn assemble_jacobian_block(
    mspace: &MatrixSpace,
    sigma: &FieldVector,
    quad: &QuadratureRule,
) -> Result<SparseMatrix> {
    check_sigma(mspace, sigma)?;
    let s = mspace.scalar();
    let n = s.ndof();
    let nloc = s.element().num_nodes();
    let tab = s.element().tabulate(&quad.points);
    let mut vals = Vec::with_capacity(quad.len());
    let mut local = vec![[0.0; 3]; nloc * nloc];
    let mut triplets = Vec::new();
    for t in 0..s.mesh().num_triangles() {
        sigma_at_points(mspace, sigma, &tab, t, &mut vals);
        local.iter_mut().for_each(|v| *v = [0.0; 3]);
        let det = s.map(t).det;
        for (q, &w) in quad.weights.iter().enumerate() {
            let cof = vals[q].cof();
            let wq = w * det;
            let factor = [wq * cof.xx, 2.0 * wq * cof.xy, wq * cof.yy];
            let phi = tab.values_at(q);
            for i in 0..nloc {
                for j in 0..nloc {
                    let pp = phi[i] * phi[j];
                    let e = &mut local[i * nloc + j];
                    e[0] += factor[0] * pp;
                    e[1] += factor[1] * pp;
                    e[2] += factor[2] * pp;
                }
            }
        }
        let dofs = s.cell_dofs(t);
        for i in 0..nloc {
            if s.is_boundary(dofs[i]) {
                continue;
            }
            let row = s.split_index(dofs[i]);
            for j in 0..nloc {
                let e = local[i * nloc + j];
                for c in 0..3 {
                    triplets.push((row, c * n + dofs[j], e[c]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(s.interior_dofs().len(), 3 * n, &triplets)
}

/// Extreme eigenvalues of a matrix field over quadrature points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub min_lambda1: f64,
    pub max_lambda2: f64,
    /// Triangles with `λ₁ <= 0` at some sampled point.
    pub nonconvex_triangles: Vec<usize>,
}

impl ConvexityReport {
    pub fn is_convex(&self) -> bool {
        self.nonconvex_triangles.is_empty()
    }
}

pub fn check_convexity(mspace: &MatrixSpace, sigma: &FieldVector, quad: &QuadratureRule) -> Result<ConvexityReport> {
    check_sigma(mspace, sigma)?;
    let s = mspace.scalar();
    let tab = s.element().tabulate(&quad.points);
    let mut vals = Vec::with_capacity(quad.len());
    let mut report = ConvexityReport {
        min_lambda1: f64::INFINITY,
        max_lambda2: f64::NEG_INFINITY,
        nonconvex_triangles: Vec::new(),
    };
    for t in 0..s.mesh().num_triangles() {
        sigma_at_points(mspace, sigma, &tab, t, &mut vals);
        let mut flagged = false;
        for m in &vals {
            let (l1, l2) = m.eigenvalues();
            report.min_lambda1 = report.min_lambda1.min(l1);
            report.max_lambda2 = report.max_lambda2.max(l2);
            flagged |= l1 <= 0.0;
        }
        if flagged {
            report.nonconvex_triangles.push(t);
        }
    }
    Ok(report)
}

/// Stiffness `∫ Dv_i · Dv_j` split into interior rows against interior and
/// boundary columns, and the load `∫ g v_i` over interior rows.
pub fn assemble_poisson(
    vspace: &ScalarSpace,
    source: &dyn Fn(Point) -> f64,
    quad: &QuadratureRule,
) -> Result<(SparseMatrix, SparseMatrix, Vec<f64>)> {
    let nloc = vspace.element().num_nodes();
    let tab = vspace.element().tabulate(&quad.points);
    let mut grads = vec![[0.0; 2]; nloc];
    let mut int_t = Vec::new();
    let mut bdry_t = Vec::new();
    let mut load = vec![0.0; vspace.interior_dofs().len()];
    for t in 0..vspace.mesh().num_triangles() {
        let map = vspace.map(t);
        let dofs = vspace.cell_dofs(t);
        for (q, &w) in quad.weights.iter().enumerate() {
            physical_grads(vspace, t, &tab, q, &mut grads);
            let wq = w * map.det;
            let x = map.to_physical(quad.points[q]);
            let g = source(x);
            if !g.is_finite() {
                return Err(Error::Evaluation {
                    what: "source term".into(),
                    point: x,
                });
            }
            let phi = tab.values_at(q);
            for i in 0..nloc {
                if vspace.is_boundary(dofs[i]) {
                    continue;
                }
                let row = vspace.split_index(dofs[i]);
                load[row] += wq * g * phi[i];
                for j in 0..nloc {
                    let a = wq * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    let col = vspace.split_index(dofs[j]);
                    if vspace.is_boundary(dofs[j]) {
                        bdry_t.push((row, col, a));
                    } else {
                        int_t.push((row, col, a));
                    }
                }
            }
        }
    }
    let ni = vspace.interior_dofs().len();
    Ok((
        SparseMatrix::from_triplets(ni, ni, &int_t)?,
        SparseMatrix::from_triplets(ni, vspace.boundary_dofs().len(), &bdry_t)?,
        load,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_polygon_mesh, build_structured_mesh, Mesh, Rect};
    use crate::spaces::{interpolate, interpolate_matrix};

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    fn space(n: usize, k: usize) -> ScalarSpace {
        ScalarSpace::new(Arc::new(build_structured_mesh(Rect::UNIT, n).unwrap()), k).unwrap()
    }

    fn quad_form(a: &SparseMatrix, x: &[f64], y: &[f64]) -> f64 {
        a.mul_vec(y).iter().zip(x).map(|(p, q)| p * q).sum()
    }

    #[test]
    fn single_triangle_linear_mass() {
        let pts = alloc::vec![[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]];
        let area = 1.5;
        let mesh = Arc::new(Mesh::new(pts, alloc::vec![[0, 1, 2]]).unwrap());
        let s = ScalarSpace::new(mesh, 1).unwrap();
        let m = MatrixSpace::new(&s);
        let mass = assemble_mass(&m, &make_quadrature(2).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { area / 6.0 } else { area / 12.0 };
                assert!((mass.get(i, j) - expected).abs() < 1e-15);
                // off-diagonal component carries the Frobenius factor 2
                assert!((mass.get(3 + i, 3 + j) - 2.0 * expected).abs() < 1e-15);
                // no coupling between components
                assert_eq!(mass.get(i, 3 + j), 0.0);
                assert_eq!(mass.get(6 + i, j), 0.0);
            }
        }
        assert!(mass.is_symmetric());
    }

    #[test]
    fn mass_of_identity_field() {
        let s = space(3, 2);
        let m = MatrixSpace::new(&s);
        let mass = assemble_mass(&m, &make_quadrature(4).unwrap()).unwrap();
        let id = interpolate_matrix(&m, &|_| Sym2::IDENTITY).unwrap();
        assert!((quad_form(&mass, &id.values, &id.values) - 2.0).abs() < 1e-13);
        assert!(assemble_mass(&m, &make_quadrature(3).unwrap()).is_err());
    }

    #[test]
    fn mass_is_positive_definite() {
        let s = space(2, 2);
        let m = MatrixSpace::new(&s);
        let mass = assemble_mass(&m, &make_quadrature(4).unwrap()).unwrap();
        let mut seed = 4;
        for _ in 0..50 {
            let x: Vec<f64> = (0..mass.nrows()).map(|_| lcg(&mut seed) - 0.5).collect();
            assert!(quad_form(&mass, &x, &x) > 0.0);
        }
    }

    #[test]
    fn divgrad_transpose_consistency() {
        let s = space(4, 2);
        let m = MatrixSpace::new(&s);
        let rule = make_quadrature(4).unwrap();
        let (bi, bb) = assemble_divgrad(&s, &m, &rule).unwrap();
        let u = interpolate(&s, &|p| p[0] * p[0]).unwrap();
        let (ui, ub) = s.split(&u);
        let mut bu = bi.mul_vec(&ui);
        for (a, b) in bu.iter_mut().zip(bb.mul_vec(&ub)) {
            *a += b;
        }
        let id = interpolate_matrix(&m, &|_| Sym2::IDENTITY).unwrap();
        let v: f64 = id.values.iter().zip(&bu).map(|(a, b)| a * b).sum();
        assert!((v + 2.0).abs() < 1e-12, "{v}");

        // constant u has zero gradient
        let c = interpolate(&s, &|_| 3.0).unwrap();
        let (ci, cb) = s.split(&c);
        let total: Vec<f64> = bi.mul_vec(&ci).iter().zip(bb.mul_vec(&cb)).map(|(a, b)| a + b).collect();
        assert!(total.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn divgrad_rejects_mismatched_spaces() {
        let s2 = space(2, 2);
        let s3 = space(2, 3);
        let rule = make_quadrature(6).unwrap();
        assert!(assemble_divgrad(&s2, &MatrixSpace::new(&s3), &rule).is_err());
    }

    fn hessian_case(k: usize, mesh: Mesh, q: &dyn Fn(Point) -> f64, hess: &dyn Fn(Point) -> Sym2) -> f64 {
        let s = ScalarSpace::new(Arc::new(mesh), k).unwrap();
        let op = MixedOperator::new(&s, QuadratureChoice::for_degree(k)).unwrap();
        let u = interpolate(&s, q).unwrap();
        let sigma = discrete_hessian(&op, &u).unwrap();
        let exact = interpolate_matrix(&op.mspace, hess).unwrap();
        sigma.max_abs_diff(&exact)
    }

    #[test]
    fn discrete_hessian_examples() {
        let mesh = || build_structured_mesh(Rect::UNIT, 3).unwrap();
        assert!(hessian_case(2, mesh(), &|p| 2.0 * p[0] - p[1] + 1.0, &|_| Sym2::ZERO) <= 1e-11);
        assert!(hessian_case(2, mesh(), &|p| p[0] * p[0], &|_| Sym2::new(2.0, 0.0, 0.0)) <= 1e-10);
        assert!(hessian_case(2, mesh(), &|p| p[0] * p[1], &|_| Sym2::new(0.0, 1.0, 0.0)) <= 1e-10);
    }

    #[test]
    fn discrete_hessian_exact_for_all_monomials() {
        let poly = [[0.0, 0.0], [1.2, 0.1], [1.5, 1.0], [0.3, 1.4], [-0.2, 0.6]];
        for k in 2..=4 {
            for a in 0..=k {
                for b in 0..=(k - a) {
                    let (af, bf) = (a as f64, b as f64);
                    let q = move |p: Point| libm::pow(p[0], af) * libm::pow(p[1], bf);
                    let mono = move |p: Point, da: usize, db: usize| {
                        if da > a || db > b {
                            return 0.0;
                        }
                        let ca: f64 = (0..da).map(|i| (a - i) as f64).product();
                        let cb: f64 = (0..db).map(|i| (b - i) as f64).product();
                        ca * cb * libm::pow(p[0], (a - da) as f64) * libm::pow(p[1], (b - db) as f64)
                    };
                    let hess = move |p: Point| Sym2::new(mono(p, 2, 0), mono(p, 1, 1), mono(p, 0, 2));
                    let err = hessian_case(k, build_polygon_mesh(&poly, 1).unwrap(), &q, &hess);
                    assert!(err <= 1e-9, "k={k} x^{a} y^{b}: {err}");
                }
            }
        }
    }

    #[test]
    fn residual_examples() {
        let s = space(3, 2);
        let m = MatrixSpace::new(&s);
        let rule = make_quadrature(6).unwrap();
        let id = interpolate_matrix(&m, &|_| Sym2::IDENTITY).unwrap();
        let r = assemble_residual(&m, &id, &|_| 1.0, &rule).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-12));

        let two = interpolate_matrix(&m, &|_| 2.0 * Sym2::IDENTITY).unwrap();
        let r = assemble_residual(&m, &two, &|_| 1.0, &rule).unwrap();
        // ∫ 3 v: load of a Poisson assembly with constant source 3
        let (_, _, load) = assemble_poisson(&s, &|_| 3.0, &rule).unwrap();
        for (a, b) in r.iter().zip(&load) {
            assert!((a - b).abs() < 1e-14);
        }

        let h = interpolate_matrix(&m, &|_| Sym2::diag(2.0, 2.0)).unwrap();
        let r = assemble_residual(&m, &h, &|_| 4.0, &rule).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-12));

        let err = assemble_residual(&m, &id, &|p| if p[0] > 0.5 { f64::NAN } else { 1.0 }, &rule);
        assert!(matches!(err, Err(Error::Evaluation { .. })));
    }

    #[test]
    fn jacobian_at_identity_is_trace_form() {
        let s = space(2, 2);
        let m = MatrixSpace::new(&s);
        let rule = make_quadrature(6).unwrap();
        let id = interpolate_matrix(&m, &|_| Sym2::IDENTITY).unwrap();
        let jac = assemble_jacobian_block(&m, &id, &rule).unwrap();
        let mut seed = 8;
        let tau: Vec<f64> = (0..m.ndof()).map(|_| lcg(&mut seed)).collect();
        let jt = jac.mul_vec(&tau);
        // ∫ (τ_xx + τ_yy) v equals mass-weighted trace
        let n = s.ndof();
        let trace = FieldVector::new(SpaceKind::Scalar, 2, (0..n).map(|d| tau[d] + tau[2 * n + d]).collect());
        let mass = assemble_mass(&m, &make_quadrature(4).unwrap()).unwrap();
        let mt = mass.mul_vec(&{
            let mut v = vec![0.0; 3 * n];
            v[..n].copy_from_slice(&trace.values);
            v
        });
        for (&d, &j) in s.interior_dofs().iter().zip(&jt) {
            assert!((mt[d] - j).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = space(2, 2);
        let m = MatrixSpace::new(&s);
        let rule = make_quadrature(6).unwrap();
        let mut seed = 21;
        let s0 = FieldVector::new(SpaceKind::Matrix, 2, (0..m.ndof()).map(|_| lcg(&mut seed) + 0.5).collect());
        let t0 = FieldVector::new(SpaceKind::Matrix, 2, (0..m.ndof()).map(|_| lcg(&mut seed) - 0.5).collect());
        let f = |p: Point| 1.0 + p[0];
        let r0 = assemble_residual(&m, &s0, &f, &rule).unwrap();
        let jt = assemble_jacobian_block(&m, &s0, &rule).unwrap().mul_vec(&t0.values);
        let mut errs = Vec::new();
        for h in [1e-4, 1e-5, 1e-6] {
            let shifted = FieldVector::new(
                SpaceKind::Matrix,
                2,
                s0.values.iter().zip(&t0.values).map(|(a, b)| a + h * b).collect(),
            );
            let rh = assemble_residual(&m, &shifted, &f, &rule).unwrap();
            let e = rh
                .iter()
                .zip(&r0)
                .zip(&jt)
                .map(|((a, b), j)| ((a - b) / h - j).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        // det is quadratic: the difference quotient error is exactly linear in t
        assert!(errs[1] < 0.2 * errs[0] && errs[2] < 0.2 * errs[1] + 1e-9, "{errs:?}");
    }

    #[test]
    fn convexity_monitor() {
        let s = space(2, 2);
        let m = MatrixSpace::new(&s);
        let rule = make_quadrature(6).unwrap();
        let check = |v: Sym2| {
            let f = interpolate_matrix(&m, &move |_| v).unwrap();
            check_convexity(&m, &f, &rule).unwrap()
        };
        let r = check(Sym2::IDENTITY);
        assert!((r.min_lambda1 - 1.0).abs() < 1e-14 && (r.max_lambda2 - 1.0).abs() < 1e-14 && r.is_convex());
        let r = check(Sym2::diag(1.0, 4.0));
        assert!((r.min_lambda1 - 1.0).abs() < 1e-14 && (r.max_lambda2 - 4.0).abs() < 1e-14);
        let r = check(Sym2::new(0.0, 1.0, 0.0));
        assert!((r.min_lambda1 + 1.0).abs() < 1e-14 && (r.max_lambda2 - 1.0).abs() < 1e-14);
        assert_eq!(r.nonconvex_triangles.len(), s.mesh().num_triangles());
    }

    #[test]
    fn cofactor_bound_holds() {
        let s = space(3, 2);
        let m = MatrixSpace::new(&s);
        let rule = make_quadrature(6).unwrap();
        let tab = s.element().tabulate(&rule.points);
        let mut seed = 77;
        for _ in 0..10 {
            let eta = FieldVector::new(SpaceKind::Matrix, 2, (0..m.ndof()).map(|_| 4.0 * lcg(&mut seed) - 2.0).collect());
            let tau = FieldVector::new(SpaceKind::Matrix, 2, (0..m.ndof()).map(|_| lcg(&mut seed) - 0.5).collect());
            let (mut e, mut t) = (Vec::new(), Vec::new());
            let (mut lhs, mut tau_l2, mut sup) = (0.0, 0.0, 0.0f64);
            for tri in 0..s.mesh().num_triangles() {
                sigma_at_points(&m, &eta, &tab, tri, &mut e);
                sigma_at_points(&m, &tau, &tab, tri, &mut t);
                for (q, &w) in rule.weights.iter().enumerate() {
                    let wq = w * s.map(tri).det;
                    lhs += wq * e[q].cof().ddot(&t[q]).powi(2);
                    tau_l2 += wq * t[q].ddot(&t[q]);
                    sup = sup.max(e[q].frobenius_norm());
                }
            }
            assert!(libm::sqrt(lhs) <= 2.0 * sup * libm::sqrt(tau_l2));
        }
    }
}
