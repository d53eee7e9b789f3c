//! Lagrange elements on the reference triangle and triangle quadrature.
//!
//! The reference triangle has vertices (0,0), (1,0), (0,1). Barycentric
//! coordinates are ordered `(1 - x - y, x, y)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::mesh::{Mesh, Point};

/// Reference-coordinate gradients of the three barycentric coordinates.
const BARY_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

const BARY_TOL: f64 = 1e-10;

/// Degree-k Lagrange element with nodes on the uniform barycentric lattice.
///
/// Node order: the three vertices, then `k-1` nodes on each local edge
/// `l = (l, l+1 mod 3)` running from vertex `l` towards vertex `l+1`, then
/// interior nodes in lexicographic order of their lattice index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceElement {
    degree: usize,
    /// Lattice multi-indices `(i0, i1, i2)` with `i0 + i1 + i2 = k`.
    nodes: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    /// Gradients in reference coordinates.
    pub gradients: Vec<[f64; 2]>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(invalid("Lagrange degree must be at least 1"));
        }
        let k = degree;
        let mut nodes = Vec::with_capacity((k + 1) * (k + 2) / 2);
        for l in 0..3 {
            let mut idx = [0; 3];
            idx[l] = k;
            nodes.push(idx);
        }
        for l in 0..3 {
            for t in 1..k {
                let mut idx = [0; 3];
                idx[l] = k - t;
                idx[(l + 1) % 3] = t;
                nodes.push(idx);
            }
        }
        for i1 in 1..k {
            for i2 in 1..k {
                if i1 + i2 < k {
                    nodes.push([k - i1 - i2, i1, i2]);
                }
            }
        }
        Ok(ReferenceElement { degree, nodes })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn lattice_index(&self, i: usize) -> [usize; 3] {
        self.nodes[i]
    }

    /// Barycentric coordinates of node `i`.
    pub fn node_barycentric(&self, i: usize) -> [f64; 3] {
        let k = self.degree as f64;
        let n = self.nodes[i];
        [n[0] as f64 / k, n[1] as f64 / k, n[2] as f64 / k]
    }

    /// Number of nodes strictly inside each edge.
    pub fn nodes_per_edge(&self) -> usize {
        self.degree - 1
    }

    pub fn num_interior_nodes(&self) -> usize {
        let k = self.degree;
        if k < 3 {
            0
        } else {
            (k - 1) * (k - 2) / 2
        }
    }

    /// Evaluates all basis functions and their reference gradients at a
    /// barycentric point.
    pub fn eval_basis(&self, point: [f64; 3]) -> Result<BasisEval> {
        let sum: f64 = point.iter().sum();
        if point.iter().any(|&l| !(l >= -BARY_TOL)) || (sum - 1.0).abs() > BARY_TOL {
            return Err(invalid(alloc::format!(
                "barycentric point ({}, {}, {}) lies outside the reference triangle",
                point[0],
                point[1],
                point[2]
            )));
        }
        let n = self.num_nodes();
        let mut values = vec![0.0; n];
        let mut gradients = vec![[0.0; 2]; n];
        self.eval_into(point, &mut values, &mut gradients);
        Ok(BasisEval { values, gradients })
    }

    /// Unchecked evaluation into caller buffers.
    pub(crate) fn eval_into(&self, point: [f64; 3], values: &mut [f64], gradients: &mut [[f64; 2]]) {
        let k = self.degree;
        // factor tables: p[m][a] = P_a(lambda_m), dp[m][a] = P_a'(lambda_m)
        let mut p = [[0.0; 16]; 3];
        let mut dp = [[0.0; 16]; 3];
        debug_assert!(k < 16);
        for m in 0..3 {
            let s = k as f64 * point[m];
            p[m][0] = 1.0;
            dp[m][0] = 0.0;
            for a in 1..=k {
                let q = (a - 1) as f64;
                let factor = (s - q) / a as f64;
                // P_a = P_{a-1} (k s - (a-1)) / a
                dp[m][a] = dp[m][a - 1] * factor + p[m][a - 1] * k as f64 / a as f64;
                p[m][a] = p[m][a - 1] * factor;
            }
        }
        for (i, idx) in self.nodes.iter().enumerate() {
            let f = [p[0][idx[0]], p[1][idx[1]], p[2][idx[2]]];
            values[i] = f[0] * f[1] * f[2];
            let dl = [
                dp[0][idx[0]] * f[1] * f[2],
                f[0] * dp[1][idx[1]] * f[2],
                f[0] * f[1] * dp[2][idx[2]],
            ];
            let mut g = [0.0; 2];
            for m in 0..3 {
                g[0] += dl[m] * BARY_GRADS[m][0];
                g[1] += dl[m] * BARY_GRADS[m][1];
            }
            gradients[i] = g;
        }
    }

    /// Basis values and reference gradients at every point of a rule.
    pub fn tabulate(&self, points: &[[f64; 3]]) -> Tabulation {
        let n = self.num_nodes();
        let mut values = vec![0.0; points.len() * n];
        let mut gradients = vec![[0.0; 2]; points.len() * n];
        for (q, &pt) in points.iter().enumerate() {
            self.eval_into(pt, &mut values[q * n..(q + 1) * n], &mut gradients[q * n..(q + 1) * n]);
        }
        Tabulation {
            num_points: points.len(),
            num_basis: n,
            values,
            gradients,
        }
    }
}

/// Basis values at a fixed point set, row-major by point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulation {
    pub num_points: usize,
    pub num_basis: usize,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.num_basis..(q + 1) * self.num_basis]
    }

    pub fn gradients_at(&self, q: usize) -> &[[f64; 2]] {
        &self.gradients[q * self.num_basis..(q + 1) * self.num_basis]
    }
}

/// Quadrature rule on the reference triangle (weights sum to its area 1/2).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Highest polynomial exactness served by [`make_quadrature`].
pub const MAX_QUADRATURE_EXACTNESS: usize = 20;

/// Collapsed Gauss rule (Gauss-Legendre times Gauss-Jacobi) integrating
/// every polynomial of total degree `<= min_exactness` exactly.
pub fn make_quadrature(min_exactness: usize) -> Result<QuadratureRule> {
    if min_exactness == 0 {
        return Err(invalid("quadrature exactness must be at least 1"));
    }
    if min_exactness > MAX_QUADRATURE_EXACTNESS {
        return Err(Error::UnsupportedDegree {
            requested: min_exactness,
            max: MAX_QUADRATURE_EXACTNESS,
        });
    }
    let n = min_exactness / 2 + 1;
    let (xi, wxi) = gauss_jacobi_01(n, 0.0);
    let (eta, weta) = gauss_jacobi_01(n, 1.0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&e, &we) in eta.iter().zip(&weta) {
        for (&s, &ws) in xi.iter().zip(&wxi) {
            let x = s * (1.0 - e);
            let y = e;
            points.push([1.0 - x - y, x, y]);
            weights.push(ws * we);
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        exactness: 2 * n - 1,
    })
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi_01(n, 0.0)
}

/// Gauss rule on `[0, 1]` for the weight `(1 - t)^alpha` (Golub-Welsch).
fn gauss_jacobi_01(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let beta = 0.0;
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for (j, d) in diag.iter_mut().enumerate() {
        let jf = j as f64;
        *d = if j == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * jf + ab) * (2.0 * jf + ab + 2.0))
        };
    }
    for j in 1..n {
        let jf = j as f64;
        let s = 2.0 * jf + ab;
        off[j - 1] = libm::sqrt(
            4.0 * jf * (jf + alpha) * (jf + beta) * (jf + ab) / (s * s * (s + 1.0) * (s - 1.0)),
        );
    }
    let vecs = symmetric_tridiagonal_eigen(&mut diag, &mut off);
    // mu0 = int_{-1}^{1} (1-x)^alpha dx
    let mu0 = libm::pow(2.0, alpha + 1.0) / (alpha + 1.0);
    let scale = libm::pow(2.0, alpha + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let w = mu0 * vecs[i] * vecs[i];
            (0.5 * (diag[i] + 1.0), w / scale)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Implicit QL on a symmetric tridiagonal matrix. On return `diag` holds the
/// eigenvalues; the result holds the first component of each eigenvector.
fn symmetric_tridiagonal_eigen(diag: &mut [f64], off: &mut [f64]) -> Vec<f64> {
    let n = diag.len();
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "tridiagonal eigensolver failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = libm::hypot(g, 1.0);
            g = diag[m] - diag[l] + off[l] / (g + libm::copysign(r, g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = libm::hypot(f, g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                for row in 0..n {
                    let f = z[row * n + i + 1];
                    z[row * n + i + 1] = s * z[row * n + i] + c * f;
                    z[row * n + i] = c * z[row * n + i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    (0..n).map(|i| z[i]).collect()
}

/// Affine map data of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: Point,
    /// Columns are the edge vectors `v1 - v0`, `v2 - v0`.
    pub jac: [[f64; 2]; 2],
    /// Inverse transpose of `jac`, mapping reference to physical gradients.
    pub inv_t: [[f64; 2]; 2],
    pub det: f64,
}

impl AffineMap {
    pub fn new(p: [Point; 3]) -> Self {
        let a = p[1][0] - p[0][0];
        let b = p[2][0] - p[0][0];
        let c = p[1][1] - p[0][1];
        let d = p[2][1] - p[0][1];
        let det = a * d - b * c;
        // jac = [[a, b], [c, d]]; inverse = [[d, -b], [-c, a]] / det
        let inv_t = [[d / det, -c / det], [-b / det, a / det]];
        AffineMap {
            origin: p[0],
            jac: [[a, b], [c, d]],
            inv_t,
            det,
        }
    }

    pub fn to_physical(&self, bary: [f64; 3]) -> Point {
        let (x, y) = (bary[1], bary[2]);
        [
            self.origin[0] + self.jac[0][0] * x + self.jac[0][1] * y,
            self.origin[1] + self.jac[1][0] * x + self.jac[1][1] * y,
        ]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

/// Sup-norm error of elementwise Lagrange interpolation of `f`, sampled at
/// quadrature points, for each mesh in turn.
pub fn interpolation_error_probe(
    elem: &ReferenceElement,
    f: &dyn Fn(Point) -> f64,
    meshes: &[Mesh],
) -> Result<Vec<f64>> {
    let rule = make_quadrature((2 * elem.degree() + 2).min(MAX_QUADRATURE_EXACTNESS))?;
    let tab = elem.tabulate(&rule.points);
    let mut nodal = vec![0.0; elem.num_nodes()];
    Ok(meshes
        .iter()
        .map(|mesh| {
            let mut err = 0.0f64;
            for t in 0..mesh.num_triangles() {
                let map = AffineMap::new(mesh.triangle_points(t));
                for (i, v) in nodal.iter_mut().enumerate() {
                    *v = f(map.to_physical(elem.node_barycentric(i)));
                }
                for q in 0..rule.len() {
                    let ih: f64 = tab.values_at(q).iter().zip(&nodal).map(|(a, b)| a * b).sum();
                    err = err.max((ih - f(map.to_physical(rule.points[q]))).abs());
                }
            }
            err
        })
        .collect())
}
