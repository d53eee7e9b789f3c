//! Conforming triangulations of convex polygons.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

pub type Point = [f64; 2];

/// Tolerance used for geometric coincidence tests.
pub const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints in the orientation of the adjacent (counterclockwise) triangle.
    pub vertices: [usize; 2],
    pub triangle: usize,
    /// Local edge index inside `triangle` (edge `l` joins local vertices `l` and `l+1`).
    pub local_edge: usize,
    pub normal: Point,
    pub marker: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<[Option<usize>; 2]>,
    h: f64,
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: Point, b: Point) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

impl Mesh {
    /// Builds a mesh from raw vertex and triangle lists.
    ///
    /// Triangles must be counterclockwise with positive area and no edge may be
    /// shared by more than two triangles. Boundary edges (edges owned by one
    /// triangle) get marker 1.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(invalid("mesh has no triangles"));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(invalid(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(invalid(format!(
                    "triangle {t} is not counterclockwise with positive area (area {area:e})"
                )));
            }
        }

        let mut owners: BTreeMap<[usize; 2], Vec<(usize, usize)>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for l in 0..3 {
                let key = sorted_pair(tri[l], tri[(l + 1) % 3]);
                owners.entry(key).or_default().push((t, l));
            }
        }

        let mut edges = Vec::with_capacity(owners.len());
        let mut edge_triangles = Vec::with_capacity(owners.len());
        let mut triangle_edges = alloc::vec![[usize::MAX; 3]; triangles.len()];
        let mut boundary_edges = Vec::new();
        let mut h = 0.0f64;
        for (e, (key, owned)) in owners.iter().enumerate() {
            if owned.len() > 2 {
                return Err(invalid(format!(
                    "edge ({}, {}) is shared by {} triangles",
                    key[0],
                    key[1],
                    owned.len()
                )));
            }
            edges.push(*key);
            h = h.max(dist(vertices[key[0]], vertices[key[1]]));
            let mut adj = [None, None];
            for (slot, &(t, l)) in owned.iter().enumerate() {
                triangle_edges[t][l] = e;
                adj[slot] = Some(t);
            }
            edge_triangles.push(adj);
            if owned.len() == 1 {
                let (t, l) = owned[0];
                let a = triangles[t][l];
                let b = triangles[t][(l + 1) % 3];
                let (pa, pb) = (vertices[a], vertices[b]);
                let len = dist(pa, pb);
                // counterclockwise triangle: outward normal is the edge direction rotated by -90 degrees
                let normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                boundary_edges.push(BoundaryEdge {
                    vertices: [a, b],
                    triangle: t,
                    local_edge: l,
                    normal,
                    marker: 1,
                });
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            boundary_edges,
            edges,
            triangle_edges,
            edge_triangles,
            h,
        })
    }

    /// Overwrites boundary markers; `marker_of` receives the sorted endpoint pair.
    pub(crate) fn with_markers(mut self, marker_of: impl Fn([usize; 2]) -> i32) -> Self {
        for be in &mut self.boundary_edges {
            be.marker = marker_of(sorted_pair(be.vertices[0], be.vertices[1]));
        }
        self
    }

    /// Builds the mesh and checks that `boundary` lists exactly its boundary edges.
    pub fn with_boundary(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: &[([usize; 2], i32)],
    ) -> Result<Self> {
        let mesh = Mesh::new(vertices, triangles)?;
        let given: BTreeMap<[usize; 2], i32> = boundary
            .iter()
            .map(|&(e, m)| (sorted_pair(e[0], e[1]), m))
            .collect();
        if given.len() != mesh.boundary_edges.len()
            || mesh
                .boundary_edges
                .iter()
                .any(|be| !given.contains_key(&sorted_pair(be.vertices[0], be.vertices[1])))
        {
            return Err(invalid(
                "boundary edge list does not match the boundary of the triangulation",
            ));
        }
        Ok(mesh.with_markers(|key| given[&key]))
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// All edges as sorted vertex pairs, in increasing lexicographic order.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge index of local edge `l` of triangle `t`.
    pub fn triangle_edge(&self, t: usize, l: usize) -> usize {
        self.triangle_edges[t][l]
    }

    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_triangles[e]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Longest edge length over all triangles.
    pub fn mesh_size(&self) -> f64 {
        self.h
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Euclidean distance from `p` to the nearest boundary edge.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.boundary_edges
            .iter()
            .map(|be| {
                point_segment_distance(p, self.vertices[be.vertices[0]], self.vertices[be.vertices[1]])
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of a triangle containing `p`, if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.num_triangles()).find(|&t| {
            let [a, b, c] = self.triangle_points(t);
            let cross = |u: Point, v: Point| (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
            let tol = -GEOM_TOL * self.area(t).max(1.0);
            cross(a, b) >= tol && cross(b, c) >= tol && cross(c, a) >= tol
        })
    }

    /// Area centroid of the whole mesh.
    pub fn domain_centroid(&self) -> Point {
        let mut c = [0.0, 0.0];
        let mut total = 0.0;
        for t in 0..self.num_triangles() {
            let a = self.area(t);
            let m = self.centroid(t);
            c[0] += a * m[0];
            c[1] += a * m[1];
            total += a;
        }
        [c[0] / total, c[1] / total]
    }
}

/// Structured mesh of `rect` with `n` cells per side, every cell split along
/// its bottom-left to top-right diagonal.
pub fn build_structured_mesh(rect: Rect, n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(invalid("structured mesh needs at least one subdivision"));
    }
    if !(rect.x1 > rect.x0 && rect.y1 > rect.y0) {
        return Err(invalid("degenerate rectangle"));
    }
    let stride = n + 1;
    let mut vertices = Vec::with_capacity(stride * stride);
    for j in 0..=n {
        // exact endpoints for boundary coordinates
        let y = if j == n {
            rect.y1
        } else {
            rect.y0 + (rect.y1 - rect.y0) * j as f64 / n as f64
        };
        for i in 0..=n {
            let x = if i == n {
                rect.x1
            } else {
                rect.x0 + (rect.x1 - rect.x0) * i as f64 / n as f64
            };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * stride + i;
            let v10 = v00 + 1;
            let v01 = v00 + stride;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::new(vertices, triangles)
}

/// Fan triangulation of a convex counterclockwise polygon from its vertex
/// centroid, followed by `refinements` rounds of uniform refinement.
pub fn build_polygon_mesh(polygon: &[Point], refinements: usize) -> Result<Mesh> {
    check_convex_ccw(polygon)?;
    let nv = polygon.len();
    let mut c = [0.0, 0.0];
    for p in polygon {
        c[0] += p[0] / nv as f64;
        c[1] += p[1] / nv as f64;
    }
    let mut vertices = polygon.to_vec();
    vertices.push(c);
    let triangles = (0..nv).map(|i| [nv, i, (i + 1) % nv]).collect();
    let mut mesh = Mesh::new(vertices, triangles)?;
    for _ in 0..refinements {
        mesh = refine_uniform(&mesh)?;
    }
    Ok(mesh)
}

pub(crate) fn check_convex_ccw(polygon: &[Point]) -> Result<()> {
    if polygon.len() < 3 {
        return Err(invalid("polygon needs at least 3 vertices"));
    }
    let n = polygon.len();
    let mut area = 0.0;
    let scale = polygon
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(1.0, f64::max);
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let c = polygon[(i + 2) % n];
        let turn = 2.0 * signed_area(a, b, c);
        if turn < -GEOM_TOL * scale * scale {
            return Err(invalid(
                "polygon must be convex and listed counterclockwise",
            ));
        }
        area += a[0] * b[1] - b[0] * a[1];
    }
    if !(area > 0.0) {
        return Err(invalid("polygon must be convex and listed counterclockwise"));
    }
    Ok(())
}

/// Splits every triangle into four through its edge midpoints.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.edges.iter().map(|&[a, b]| {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }));
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let mab = nv + mesh.triangle_edges[t][0];
        let mbc = nv + mesh.triangle_edges[t][1];
        let mca = nv + mesh.triangle_edges[t][2];
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
    }
    let mut child_marker = BTreeMap::new();
    for be in &mesh.boundary_edges {
        let [a, b] = be.vertices;
        let e = mesh.triangle_edges[be.triangle][be.local_edge];
        child_marker.insert(sorted_pair(a, nv + e), be.marker);
        child_marker.insert(sorted_pair(nv + e, b), be.marker);
    }
    Ok(Mesh::new(vertices, triangles)?.with_markers(|key| child_marker.get(&key).copied().unwrap_or(1)))
}

/// Triangles whose vertices all lie at least `margin` away from the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorRegion {
    pub margin: f64,
    pub selected: Vec<usize>,
}

impl InteriorRegion {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

pub fn select_interior(mesh: &Mesh, margin: f64) -> Result<InteriorRegion> {
    if !(margin >= 0.0) {
        return Err(invalid("interior margin must be nonnegative"));
    }
    let selected = if margin == 0.0 {
        (0..mesh.num_triangles()).collect()
    } else {
        let far: Vec<bool> = mesh
            .vertices
            .iter()
            .map(|&p| mesh.distance_to_boundary(p) >= margin - GEOM_TOL)
            .collect();
        (0..mesh.num_triangles())
            .filter(|&t| mesh.triangles[t].iter().all(|&v| far[v]))
            .collect()
    };
    Ok(InteriorRegion { margin, selected })
}
