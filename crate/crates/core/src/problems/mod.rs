//! Benchmark problems and data regularization.

mod expr;

pub use expr::Expr;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::mesh::Point;
use crate::Sym2;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(Point) -> Sym2 + Send + Sync>;

/// Labels accepted by [`catalog`].
pub const CATALOG_LABELS: [&str; 4] = ["quadratic", "smooth-radial", "boundary-singular", "degenerate"];

/// `bounds_check` flags data whose observed infimum is at or below this.
pub const DEGENERACY_FLOOR: f64 = 1e-2;

/// Regularization already applied to a problem's right-hand side.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Regularization {
    pub clip: Option<f64>,
    pub mollify_radius: Option<f64>,
}

/// Dirichlet problem `det D²u = f` in a convex polygon, `u = g` on the boundary.
#[derive(Clone)]
pub struct ProblemSpec {
    pub label: String,
    /// Counterclockwise vertices of a convex polygon.
    pub domain: Vec<Point>,
    pub f: ScalarFn,
    pub g: ScalarFn,
    pub exact_u: Option<ScalarFn>,
    pub exact_grad: Option<VectorFn>,
    pub exact_hessian: Option<MatrixFn>,
    pub regularization: Regularization,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("exact_u", &self.exact_u.is_some())
            .field("exact_grad", &self.exact_grad.is_some())
            .field("exact_hessian", &self.exact_hessian.is_some())
            .field("regularization", &self.regularization)
            .finish()
    }
}

impl ProblemSpec {
    pub fn has_exact(&self) -> bool {
        self.exact_u.is_some()
    }

    /// Gradient of the exact solution, by central differences when no
    /// closed form was given.
    pub fn exact_gradient(&self) -> Option<VectorFn> {
        if let Some(g) = &self.exact_grad {
            return Some(g.clone());
        }
        let u = self.exact_u.clone()?;
        Some(Arc::new(move |p: Point| {
            let h = 1e-5;
            [
                (u([p[0] + h, p[1]]) - u([p[0] - h, p[1]])) / (2.0 * h),
                (u([p[0], p[1] + h]) - u([p[0], p[1] - h])) / (2.0 * h),
            ]
        }))
    }
}

pub fn unit_square() -> Vec<Point> {
    vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
}

fn quadratic() -> ProblemSpec {
    let u: ScalarFn = Arc::new(|p: Point| 0.5 * (p[0] * p[0] + p[1] * p[1]));
    ProblemSpec {
        label: "quadratic".into(),
        domain: unit_square(),
        f: Arc::new(|_| 1.0),
        g: u.clone(),
        exact_u: Some(u),
        exact_grad: Some(Arc::new(|p: Point| p)),
        exact_hessian: Some(Arc::new(|_| Sym2::IDENTITY)),
        regularization: Regularization::default(),
    }
}

fn smooth_radial() -> ProblemSpec {
    let u: ScalarFn = Arc::new(|p: Point| libm::exp(0.5 * (p[0] * p[0] + p[1] * p[1])));
    ProblemSpec {
        label: "smooth-radial".into(),
        domain: unit_square(),
        f: Arc::new(|p: Point| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            (1.0 + r2) * libm::exp(r2)
        }),
        g: u.clone(),
        exact_u: Some(u),
        exact_grad: Some(Arc::new(|p: Point| {
            let e = libm::exp(0.5 * (p[0] * p[0] + p[1] * p[1]));
            [e * p[0], e * p[1]]
        })),
        exact_hessian: Some(Arc::new(|p: Point| {
            let e = libm::exp(0.5 * (p[0] * p[0] + p[1] * p[1]));
            Sym2::new(e * (1.0 + p[0] * p[0]), e * p[0] * p[1], e * (1.0 + p[1] * p[1]))
        })),
        regularization: Regularization::default(),
    }
}

fn boundary_singular() -> ProblemSpec {
    let u: ScalarFn = Arc::new(|p: Point| -libm::sqrt(2.0 - p[0] * p[0] - p[1] * p[1]));
    ProblemSpec {
        label: "boundary-singular".into(),
        domain: unit_square(),
        f: Arc::new(|p: Point| {
            let s2 = 2.0 - p[0] * p[0] - p[1] * p[1];
            2.0 / (s2 * s2)
        }),
        g: u.clone(),
        exact_u: Some(u),
        exact_grad: Some(Arc::new(|p: Point| {
            let s = libm::sqrt(2.0 - p[0] * p[0] - p[1] * p[1]);
            [p[0] / s, p[1] / s]
        })),
        exact_hessian: Some(Arc::new(|p: Point| {
            let s2 = 2.0 - p[0] * p[0] - p[1] * p[1];
            let s = libm::sqrt(s2);
            let s3 = s2 * s;
            Sym2::new(1.0 / s + p[0] * p[0] / s3, p[0] * p[1] / s3, 1.0 / s + p[1] * p[1] / s3)
        })),
        regularization: Regularization::default(),
    }
}

fn degenerate() -> ProblemSpec {
    const CENTER: Point = [0.5, 0.5];
    ProblemSpec {
        label: "degenerate".into(),
        domain: unit_square(),
        f: Arc::new(|p: Point| {
            let d = libm::hypot(p[0] - CENTER[0], p[1] - CENTER[1]);
            if d < 0.2 {
                1e-3
            } else {
                1.0
            }
        }),
        g: Arc::new(|p: Point| {
            let (dx, dy) = (p[0] - CENTER[0], p[1] - CENTER[1]);
            0.5 * (dx * dx + dy * dy)
        }),
        exact_u: None,
        exact_grad: None,
        exact_hessian: None,
        regularization: Regularization::default(),
    }
}

pub fn catalog(label: &str) -> Result<ProblemSpec> {
    match label {
        "quadratic" => Ok(quadratic()),
        "smooth-radial" => Ok(smooth_radial()),
        "boundary-singular" => Ok(boundary_singular()),
        "degenerate" => Ok(degenerate()),
        _ => Err(Error::UnknownProblem(label.to_string())),
    }
}

/// `exp(-1/(1-r²))` on the unit disk, zero outside.
fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        libm::exp(-1.0 / (1.0 - r2))
    }
}

const MOLLIFY_STEPS: i32 = 10;

/// Clips `f` at `clip` and optionally averages it against a smooth bump of
/// radius `mollify_radius`, sampled on a square grid of spacing `radius/10`.
/// Boundary data pass through unchanged.
pub fn regularize(spec: &ProblemSpec, clip: f64, mollify_radius: Option<f64>) -> Result<ProblemSpec> {
    if !(clip > 0.0) {
        return Err(invalid(format!("clip ceiling must be positive, got {clip}")));
    }
    if let Some(r) = mollify_radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("mollification radius must be positive, got {r}")));
        }
    }
    let base = spec.f.clone();
    let clipped: ScalarFn = Arc::new(move |p| {
        let v = base(p);
        if v.is_nan() {
            v
        } else {
            v.min(clip)
        }
    });
    let f = match mollify_radius {
        None => clipped,
        Some(radius) => {
            let h = radius / MOLLIFY_STEPS as f64;
            let mut stencil = Vec::new();
            let mut total = 0.0;
            for j in -MOLLIFY_STEPS..=MOLLIFY_STEPS {
                for i in -MOLLIFY_STEPS..=MOLLIFY_STEPS {
                    let (dx, dy) = (i as f64 * h, j as f64 * h);
                    let w = bump((dx * dx + dy * dy) / (radius * radius));
                    if w > 0.0 {
                        stencil.push((dx, dy, w));
                        total += w;
                    }
                }
            }
            for s in stencil.iter_mut() {
                s.2 /= total;
            }
            Arc::new(move |p: Point| {
                stencil
                    .iter()
                    .map(|&(dx, dy, w)| w * clipped([p[0] + dx, p[1] + dy]))
                    .sum()
            })
        }
    };
    let clip = Some(spec.regularization.clip.map_or(clip, |c| c.min(clip)));
    Ok(ProblemSpec {
        f,
        regularization: Regularization {
            clip,
            mollify_radius: mollify_radius.or(spec.regularization.mollify_radius),
        },
        ..spec.clone()
    })
}

/// Observed range of `f` over deterministic samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub inf: f64,
    pub sup: f64,
    /// `inf <= DEGENERACY_FLOOR`: the data are (nearly) degenerate.
    pub degenerate: bool,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Whether `p` lies in the closed convex polygon `poly` (counterclockwise).
pub fn polygon_contains(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-12
    })
}

/// Samples `f` at the polygon vertices and at `samples` points of a Halton
/// sequence (bases 2, 3) inside the polygon.
pub fn bounds_check(spec: &ProblemSpec, samples: usize) -> BoundsReport {
    let mut inf = f64::INFINITY;
    let mut sup = f64::NEG_INFINITY;
    let mut record = |v: f64| {
        inf = inf.min(v);
        sup = sup.max(v);
    };
    for &p in &spec.domain {
        record((spec.f)(p));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &spec.domain {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let mut taken = 0;
    let mut i = 1u64;
    while taken < samples && i < 64 * (samples as u64 + 1) {
        let p = [
            lo[0] + (hi[0] - lo[0]) * radical_inverse(i, 2),
            lo[1] + (hi[1] - lo[1]) * radical_inverse(i, 3),
        ];
        i += 1;
        if polygon_contains(&spec.domain, p) {
            record((spec.f)(p));
            taken += 1;
        }
    }
    BoundsReport {
        inf,
        sup,
        degenerate: !(inf > DEGENERACY_FLOOR),
    }
}

fn expr_fn(src: &str) -> Result<ScalarFn> {
    let e = Expr::parse(src)?;
    Ok(Arc::new(move |p: Point| e.eval(p[0], p[1])))
}

fn expr_list(src: &str, n: usize, key: &str) -> Result<Vec<Expr>> {
    let parts: Vec<&str> = src.split(';').collect();
    if parts.len() != n {
        return Err(Error::Parse(format!("`{key}` needs {n} expressions separated by `;`")));
    }
    parts.into_iter().map(Expr::parse).collect()
}

/// Parses a problem description made of `key = value` lines.
///
/// ```text
/// # comments and blank lines are ignored
/// label = bowl
/// domain = 0 0; 1 0; 1 1; 0 1        # optional, unit square by default
/// f = (1 + x^2 + y^2) * exp(x^2 + y^2)
/// g = exp((x^2 + y^2)/2)             # optional when exact_u is given
/// exact_u = exp((x^2 + y^2)/2)
/// exact_grad = x*exp((x^2+y^2)/2); y*exp((x^2+y^2)/2)
/// exact_hessian = hxx; hxy; hyy
/// clip = 100
/// mollify_radius = 0.05
/// ```
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let mut label = String::from("custom");
    let mut domain = unit_square();
    let (mut f, mut g, mut exact_u, mut exact_grad, mut exact_hessian) = (None, None, None, None, None);
    let (mut clip, mut mollify) = (None, None);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let number = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: `{key}` needs a number", lineno + 1)))
        };
        match key {
            "label" => label = value.to_string(),
            "domain" => {
                domain = value
                    .split(';')
                    .map(|pt| {
                        let c: Vec<f64> = pt
                            .split_whitespace()
                            .map(|t| t.parse::<f64>())
                            .collect::<core::result::Result<_, _>>()
                            .map_err(|_| Error::Parse(format!("line {}: bad domain vertex", lineno + 1)))?;
                        match c[..] {
                            [x, y] => Ok([x, y]),
                            _ => Err(Error::Parse(format!("line {}: vertices need two coordinates", lineno + 1))),
                        }
                    })
                    .collect::<Result<_>>()?
            }
            "f" => f = Some(expr_fn(value)?),
            "g" => g = Some(expr_fn(value)?),
            "exact_u" => exact_u = Some(expr_fn(value)?),
            "exact_grad" => {
                let [gx, gy]: [Expr; 2] = expr_list(value, 2, key)?.try_into().unwrap_or_else(|_| unreachable!());
                exact_grad = Some(Arc::new(move |p: Point| [gx.eval(p[0], p[1]), gy.eval(p[0], p[1])]) as VectorFn);
            }
            "exact_hessian" => {
                let [a, b, c]: [Expr; 3] = expr_list(value, 3, key)?.try_into().unwrap_or_else(|_| unreachable!());
                exact_hessian = Some(Arc::new(move |p: Point| {
                    Sym2::new(a.eval(p[0], p[1]), b.eval(p[0], p[1]), c.eval(p[0], p[1]))
                }) as MatrixFn);
            }
            "clip" => clip = Some(number(value)?),
            "mollify_radius" => mollify = Some(number(value)?),
            _ => return Err(Error::Parse(format!("line {}: unknown key `{key}`", lineno + 1))),
        }
    }
    if domain.len() < 3 {
        return Err(Error::Parse("domain needs at least three vertices".into()));
    }
    let f = f.ok_or_else(|| Error::Parse("missing `f`".into()))?;
    let g = g
        .or_else(|| exact_u.clone())
        .ok_or_else(|| Error::Parse("missing `g` (or `exact_u`)".into()))?;
    let spec = ProblemSpec {
        label,
        domain,
        f,
        g,
        exact_u,
        exact_grad,
        exact_hessian,
        regularization: Regularization::default(),
    };
    match (clip, mollify) {
        (None, None) => Ok(spec),
        (c, m) => regularize(&spec, c.unwrap_or(f64::INFINITY), m),
    }
}
