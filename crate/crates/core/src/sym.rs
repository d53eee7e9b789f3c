//! Symmetric 2x2 matrices: the pointwise values of Hessian fields.

use core::ops::{Add, Mul, Sub};

/// Symmetric matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, xy: 0.0, yy: 1.0 };
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn diag(a: f64, c: f64) -> Self {
        Sym2::new(a, 0.0, c)
    }

    /// Component by index in the (xx, xy, yy) layout.
    pub fn component(&self, c: usize) -> f64 {
        match c {
            0 => self.xx,
            1 => self.xy,
            2 => self.yy,
            _ => panic!("Sym2 component index {c} out of range"),
        }
    }

    pub fn from_components(c: [f64; 3]) -> Self {
        Sym2::new(c[0], c[1], c[2])
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Cofactor matrix; in 2D `cof [[a,b],[b,c]] = [[c,-b],[-b,a]]`.
    pub fn cof(&self) -> Sym2 {
        Sym2::new(self.yy, -self.xy, self.xx)
    }

    /// Frobenius product `A : B`, counting the off-diagonal entry twice.
    pub fn ddot(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.ddot(self))
    }

    /// Ordered eigenvalues `(lambda1, lambda2)` with `lambda1 <= lambda2`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = libm::hypot(half_diff, self.xy);
        (mean - radius, mean + radius)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, m: Sym2) -> Sym2 {
        Sym2::new(self * m.xx, self * m.xy, self * m.yy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eigenvalues_of_simple_matrices() {
        assert_eq!(Sym2::IDENTITY.eigenvalues(), (1.0, 1.0));
        assert_eq!(Sym2::diag(4.0, 1.0).eigenvalues(), (1.0, 4.0));
        let (l1, l2) = Sym2::new(0.0, 1.0, 0.0).eigenvalues();
        assert!((l1 + 1.0).abs() < 1e-15 && (l2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cofactor_of_identity_is_identity() {
        assert_eq!(Sym2::IDENTITY.cof(), Sym2::IDENTITY);
    }

    fn sym() -> impl Strategy<Value = Sym2> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b, c)| Sym2::new(a, b, c))
    }

    proptest! {
        // det is quadratic in 2D, so the midpoint cofactor gives the exact difference.
        #[test]
        fn midpoint_mean_value_identity(eta in sym(), tau in sym()) {
            let lhs = eta.det() - tau.det();
            let rhs = (0.5 * (eta + tau)).cof().ddot(&(eta - tau));
            let scale = 1.0 + eta.max_abs_entry().powi(2) + tau.max_abs_entry().powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn eigen_pair_reproduces_trace_and_det(m in sym()) {
            let (l1, l2) = m.eigenvalues();
            prop_assert!(l1 <= l2);
            let scale = 1.0 + m.max_abs_entry().powi(2);
            prop_assert!((l1 + l2 - m.trace()).abs() <= 1e-12 * scale);
            prop_assert!((l1 * l2 - m.det()).abs() <= 1e-11 * scale);
        }
    }
}
