//! Global Lagrange spaces: the scalar space and the symmetric matrix-field
//! space, their dof maps, and nodal interpolation.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::element::{AffineMap, ReferenceElement};
use crate::error::{invalid, Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sym::Sym2;

/// Continuous degree-k Lagrange space on a mesh.
///
/// Dofs are numbered vertices first, then edge dofs by edge (edges sorted by
/// their vertex pair, dofs running from the smaller vertex index), then
/// element-interior dofs by triangle index.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    mesh: Arc<Mesh>,
    element: ReferenceElement,
    ndof: usize,
    cell_dofs: Vec<usize>,
    dof_points: Vec<Point>,
    is_boundary: Vec<bool>,
    boundary_dofs: Vec<usize>,
    interior_dofs: Vec<usize>,
    /// Position of a dof within `interior_dofs` or `boundary_dofs`.
    split_index: Vec<usize>,
    maps: Vec<AffineMap>,
}

impl ScalarSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        let element = ReferenceElement::new(degree)?;
        let k = degree;
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let nt = mesh.num_triangles();
        let per_edge = k - 1;
        let per_cell = element.num_interior_nodes();
        let ndof = nv + per_edge * ne + per_cell * nt;
        let nloc = element.num_nodes();

        let mut cell_dofs = vec![0; nt * nloc];
        let mut dof_points = vec![[0.0; 2]; ndof];
        let maps: Vec<AffineMap> = (0..nt).map(|t| AffineMap::new(mesh.triangle_points(t))).collect();
        let cell_base = nv + per_edge * ne;
        for t in 0..nt {
            let tri = mesh.triangles()[t];
            let mut interior_seen = 0;
            for i in 0..nloc {
                let idx = element.lattice_index(i);
                let nonzero = idx.iter().filter(|&&c| c > 0).count();
                let dof = match nonzero {
                    1 => tri[idx.iter().position(|&c| c > 0).unwrap()],
                    2 => {
                        let l = (i - 3) / per_edge;
                        let pos = (i - 3) % per_edge + 1;
                        let (ga, gb) = (tri[l], tri[(l + 1) % 3]);
                        let from_min = if ga < gb { pos } else { k - pos };
                        nv + mesh.triangle_edge(t, l) * per_edge + from_min - 1
                    }
                    _ => {
                        interior_seen += 1;
                        cell_base + t * per_cell + interior_seen - 1
                    }
                };
                cell_dofs[t * nloc + i] = dof;
                dof_points[dof] = maps[t].to_physical(element.node_barycentric(i));
            }
        }

        let mut is_boundary = vec![false; ndof];
        for be in mesh.boundary_edges() {
            let t = be.triangle;
            let l = be.local_edge;
            is_boundary[mesh.triangles()[t][l]] = true;
            is_boundary[mesh.triangles()[t][(l + 1) % 3]] = true;
            for j in 0..per_edge {
                is_boundary[cell_dofs[t * nloc + 3 + l * per_edge + j]] = true;
            }
        }
        let mut boundary_dofs = Vec::new();
        let mut interior_dofs = Vec::new();
        let mut split_index = vec![0; ndof];
        for d in 0..ndof {
            if is_boundary[d] {
                split_index[d] = boundary_dofs.len();
                boundary_dofs.push(d);
            } else {
                split_index[d] = interior_dofs.len();
                interior_dofs.push(d);
            }
        }

        Ok(ScalarSpace {
            mesh,
            element,
            ndof,
            cell_dofs,
            dof_points,
            is_boundary,
            boundary_dofs,
            interior_dofs,
            split_index,
            maps,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.element.num_nodes();
        &self.cell_dofs[t * n..(t + 1) * n]
    }

    pub fn dof_point(&self, dof: usize) -> Point {
        self.dof_points[dof]
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    /// Index of `dof` within the interior (or boundary) dof list.
    pub fn split_index(&self, dof: usize) -> usize {
        self.split_index[dof]
    }

    pub fn map(&self, t: usize) -> &AffineMap {
        &self.maps[t]
    }

    /// Scalar field with every coefficient zero.
    pub fn zeros(&self) -> FieldVector {
        FieldVector::new(SpaceKind::Scalar, self.degree(), vec![0.0; self.ndof])
    }

    /// Interior and boundary coefficient lists of a scalar field.
    pub fn split(&self, u: &FieldVector) -> (Vec<f64>, Vec<f64>) {
        (
            self.interior_dofs.iter().map(|&d| u.values[d]).collect(),
            self.boundary_dofs.iter().map(|&d| u.values[d]).collect(),
        )
    }

    fn check(&self, v: &FieldVector) -> Result<()> {
        if v.kind != SpaceKind::Scalar || v.values.len() != self.ndof {
            return Err(invalid("field does not belong to this scalar space"));
        }
        Ok(())
    }
}

/// Symmetric 2x2 matrix fields with Lagrange components, stored as three
/// scalar blocks in the order (xx, xy, yy).
#[derive(Debug, Clone)]
pub struct MatrixSpace {
    scalar: ScalarSpace,
}

impl MatrixSpace {
    pub const COMPONENTS: usize = 3;

    pub fn new(scalar: &ScalarSpace) -> Self {
        MatrixSpace {
            scalar: scalar.clone(),
        }
    }

    pub fn scalar(&self) -> &ScalarSpace {
        &self.scalar
    }

    pub fn degree(&self) -> usize {
        self.scalar.degree()
    }

    pub fn ndof(&self) -> usize {
        Self::COMPONENTS * self.scalar.ndof
    }

    /// Global index of component `c` at scalar dof `dof`.
    pub fn index(&self, c: usize, dof: usize) -> usize {
        c * self.scalar.ndof + dof
    }

    pub fn zeros(&self) -> FieldVector {
        FieldVector::new(SpaceKind::Matrix, self.degree(), vec![0.0; self.ndof()])
    }

    /// Matrix value at scalar dof `dof`.
    pub fn value_at_dof(&self, v: &FieldVector, dof: usize) -> Sym2 {
        let n = self.scalar.ndof;
        Sym2::new(v.values[dof], v.values[n + dof], v.values[2 * n + dof])
    }

    fn check(&self, v: &FieldVector) -> Result<()> {
        if v.kind != SpaceKind::Matrix || v.values.len() != self.ndof() {
            return Err(invalid("field does not belong to this matrix space"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Scalar,
    Matrix,
}

impl SpaceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpaceKind::Scalar => "scalar",
            SpaceKind::Matrix => "matrix",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scalar" => Some(SpaceKind::Scalar),
            "matrix" => Some(SpaceKind::Matrix),
            _ => None,
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coefficients of a finite element function.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub kind: SpaceKind,
    pub degree: usize,
    pub values: Vec<f64>,
}

impl FieldVector {
    pub fn new(kind: SpaceKind, degree: usize, values: Vec<f64>) -> Self {
        FieldVector { kind, degree, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> FieldVector {
        FieldVector::new(self.kind, self.degree, self.values.iter().map(|v| v * s).collect())
    }

    pub fn max_abs_diff(&self, other: &FieldVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn finite_at(v: f64, what: &str, p: Point) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            what: what.into(),
            point: p,
        })
    }
}

/// Lagrange interpolant `I_h f`.
pub fn interpolate(space: &ScalarSpace, f: &dyn Fn(Point) -> f64) -> Result<FieldVector> {
    let values = space
        .dof_points
        .iter()
        .map(|&p| finite_at(f(p), "interpolated function", p))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldVector::new(SpaceKind::Scalar, space.degree(), values))
}

/// Componentwise Lagrange interpolant of a matrix field.
pub fn interpolate_matrix(space: &MatrixSpace, f: &dyn Fn(Point) -> Sym2) -> Result<FieldVector> {
    let n = space.scalar.ndof;
    let mut out = space.zeros();
    for (d, &p) in space.scalar.dof_points.iter().enumerate() {
        let m = f(p);
        for c in 0..3 {
            out.values[c * n + d] = finite_at(m.component(c), "interpolated matrix field", p)?;
        }
    }
    Ok(out)
}

/// Value and physical gradient of a scalar field at a barycentric point of
/// triangle `t`.
pub fn eval_field(
    space: &ScalarSpace,
    coeffs: &FieldVector,
    t: usize,
    bary: [f64; 3],
) -> Result<(f64, [f64; 2])> {
    space.check(coeffs)?;
    if t >= space.mesh.num_triangles() {
        return Err(invalid(alloc::format!("triangle index {t} out of range")));
    }
    let ev = space.element.eval_basis(bary)?;
    let map = &space.maps[t];
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for (i, &d) in space.cell_dofs(t).iter().enumerate() {
        let c = coeffs.values[d];
        value += c * ev.values[i];
        let g = map.grad(ev.gradients[i]);
        grad[0] += c * g[0];
        grad[1] += c * g[1];
    }
    Ok((value, grad))
}

/// Value and per-component physical gradients of a matrix field.
pub fn eval_matrix_field(
    space: &MatrixSpace,
    coeffs: &FieldVector,
    t: usize,
    bary: [f64; 3],
) -> Result<(Sym2, [[f64; 2]; 3])> {
    space.check(coeffs)?;
    let n = space.scalar.ndof;
    let mut comps = [0.0; 3];
    let mut grads = [[0.0; 2]; 3];
    for c in 0..3 {
        let component = FieldVector::new(
            SpaceKind::Scalar,
            coeffs.degree,
            coeffs.values[c * n..(c + 1) * n].to_vec(),
        );
        let (v, g) = eval_field(&space.scalar, &component, t, bary)?;
        comps[c] = v;
        grads[c] = g;
    }
    Ok((Sym2::from_components(comps), grads))
}

/// Overwrites boundary coefficients with `g` at their Lagrange points.
pub fn set_boundary_values(
    space: &ScalarSpace,
    coeffs: &FieldVector,
    g: &dyn Fn(Point) -> f64,
) -> Result<FieldVector> {
    space.check(coeffs)?;
    let mut out = coeffs.clone();
    for &d in &space.boundary_dofs {
        let p = space.dof_points[d];
        out.values[d] = finite_at(g(p), "boundary data", p)?;
    }
    Ok(out)
}
