//! Shape functions: isoparametric Q1 quadrilaterals, P1/P2 segments and the
//! Morley triangle.

use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};

/// Value and physical gradient of one scalar shape function at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShapeValue {
    pub value: f64,
    pub grad: [f64; 2],
}

/// Q1 shape functions at a reference point of a quadrilateral.
#[derive(Clone, Copy, Debug)]
pub struct Q1Point {
    pub shapes: [ShapeValue; 4],
    pub det_j: f64,
    pub x: [f64; 2],
}

const XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

pub fn q1_eval(c: &[[f64; 2]], xi: f64, eta: f64) -> Q1Point {
    let mut dxi = [0.0; 4];
    let mut deta = [0.0; 4];
    let mut n = [0.0; 4];
    for a in 0..4 {
        n[a] = 0.25 * (1.0 + XI[a] * xi) * (1.0 + ETA[a] * eta);
        dxi[a] = 0.25 * XI[a] * (1.0 + ETA[a] * eta);
        deta[a] = 0.25 * ETA[a] * (1.0 + XI[a] * xi);
    }
    let (mut j00, mut j01, mut j10, mut j11) = (0.0, 0.0, 0.0, 0.0);
    let mut x = [0.0; 2];
    for a in 0..4 {
        j00 += dxi[a] * c[a][0];
        j01 += dxi[a] * c[a][1];
        j10 += deta[a] * c[a][0];
        j11 += deta[a] * c[a][1];
        x[0] += n[a] * c[a][0];
        x[1] += n[a] * c[a][1];
    }
    let det = j00 * j11 - j01 * j10;
    let mut shapes = [ShapeValue::default(); 4];
    for a in 0..4 {
        shapes[a] = ShapeValue {
            value: n[a],
            grad: [(j11 * dxi[a] - j01 * deta[a]) / det, (-j10 * dxi[a] + j00 * deta[a]) / det],
        };
    }
    Q1Point { shapes, det_j: det, x }
}

/// P1 shape functions on `[x0, x1]` at reference `xi` in `[-1, 1]`.
/// Returns the shapes and `dx/dxi`.
pub fn p1_eval(x0: f64, x1: f64, xi: f64) -> ([ShapeValue; 2], f64) {
    let h = x1 - x0;
    (
        [
            ShapeValue { value: 0.5 * (1.0 - xi), grad: [-1.0 / h, 0.0] },
            ShapeValue { value: 0.5 * (1.0 + xi), grad: [1.0 / h, 0.0] },
        ],
        0.5 * h,
    )
}

/// P2 shape functions on `[x0, x1]`, local order (left, midpoint, right).
pub fn p2_eval(x0: f64, x1: f64, xi: f64) -> ([ShapeValue; 3], f64) {
    let h = x1 - x0;
    let s = 2.0 / h;
    (
        [
            ShapeValue { value: 0.5 * xi * (xi - 1.0), grad: [(xi - 0.5) * s, 0.0] },
            ShapeValue { value: 1.0 - xi * xi, grad: [-2.0 * xi * s, 0.0] },
            ShapeValue { value: 0.5 * xi * (xi + 1.0), grad: [(xi + 0.5) * s, 0.0] },
        ],
        0.5 * h,
    )
}

/// Morley triangle. Local dofs are the three vertex values followed by the
/// normal derivatives at the midpoints of edges `(0,1)`, `(1,2)`, `(2,0)`,
/// taken along the supplied (globally oriented) unit normals.
#[derive(Clone, Debug)]
pub struct MorleyElement {
    /// Column `i` holds the monomial coefficients of basis function `i`.
    coef: Matrix6<f64>,
    center: [f64; 2],
    h: f64,
}

impl MorleyElement {
    pub fn new(p: &[[f64; 2]], normals: &[[f64; 2]; 3]) -> Result<Self> {
        let center = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        let h = (0..3)
            .map(|k| {
                let q = p[(k + 1) % 3];
                ((q[0] - p[k][0]).powi(2) + (q[1] - p[k][1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max);
        let mut el = MorleyElement { coef: Matrix6::zeros(), center, h };
        let mut c = Matrix6::zeros();
        for k in 0..3 {
            let v = el.monomials(p[k]);
            for j in 0..6 {
                c[(k, j)] = v[j];
            }
            let q = p[(k + 1) % 3];
            let mid = [0.5 * (p[k][0] + q[0]), 0.5 * (p[k][1] + q[1])];
            let (gx, gy) = el.monomial_gradients(mid);
            for j in 0..6 {
                c[(3 + k, j)] = gx[j] * normals[k][0] + gy[j] * normals[k][1];
            }
        }
        el.coef = c.try_inverse().ok_or_else(|| Error::Assembly {
            element: usize::MAX,
            reason: "degenerate Morley element".into(),
        })?;
        Ok(el)
    }

    fn local(&self, x: [f64; 2]) -> (f64, f64) {
        ((x[0] - self.center[0]) / self.h, (x[1] - self.center[1]) / self.h)
    }

    fn monomials(&self, x: [f64; 2]) -> Vector6<f64> {
        let (s, t) = self.local(x);
        Vector6::new(1.0, s, t, s * s, s * t, t * t)
    }

    fn monomial_gradients(&self, x: [f64; 2]) -> (Vector6<f64>, Vector6<f64>) {
        let (s, t) = self.local(x);
        let ih = 1.0 / self.h;
        (
            Vector6::new(0.0, ih, 0.0, 2.0 * s * ih, t * ih, 0.0),
            Vector6::new(0.0, 0.0, ih, 0.0, s * ih, 2.0 * t * ih),
        )
    }

    /// Values of the six basis functions at `x`.
    pub fn values(&self, x: [f64; 2]) -> [f64; 6] {
        let v = self.coef.transpose() * self.monomials(x);
        v.into()
    }

    /// Gradients of the six basis functions at `x`.
    pub fn gradients(&self, x: [f64; 2]) -> [[f64; 2]; 6] {
        let (gx, gy) = self.monomial_gradients(x);
        let (bx, by) = (self.coef.transpose() * gx, self.coef.transpose() * gy);
        std::array::from_fn(|i| [bx[i], by[i]])
    }

    /// Constant second derivatives `(u_xx, u_xy, u_yy)` of the six basis functions.
    pub fn hessians(&self) -> [[f64; 3]; 6] {
        let ih2 = 1.0 / (self.h * self.h);
        std::array::from_fn(|i| {
            let c = self.coef.column(i);
            [2.0 * c[3] * ih2, c[4] * ih2, 2.0 * c[5] * ih2]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q1_reproduces_affine_on_skewed_quad() {
        let c = [[0.0, 0.0], [2.0, 0.3], [2.4, 1.5], [-0.2, 1.1]];
        let f = |x: [f64; 2]| 1.5 - 0.7 * x[0] + 2.0 * x[1];
        for &(xi, eta) in &[(0.2, -0.4), (-0.9, 0.6), (0.0, 0.0)] {
            let p = q1_eval(&c, xi, eta);
            let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for a in 0..4 {
                let fa = f(c[a]);
                v += fa * p.shapes[a].value;
                gx += fa * p.shapes[a].grad[0];
                gy += fa * p.shapes[a].grad[1];
            }
            assert!((v - f(p.x)).abs() < 1e-13);
            assert!((gx + 0.7).abs() < 1e-13 && (gy - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let (x0, x1) = (0.3, 0.8);
        let f = |x: f64| 2.0 - x + 3.0 * x * x;
        let nodes = [x0, 0.5 * (x0 + x1), x1];
        for &xi in &[-0.7, 0.1, 0.9] {
            let (s, jac) = p2_eval(x0, x1, xi);
            let x = x0 + (xi + 1.0) * jac;
            let v: f64 = (0..3).map(|a| f(nodes[a]) * s[a].value).sum();
            let d: f64 = (0..3).map(|a| f(nodes[a]) * s[a].grad[0]).sum();
            assert!((v - f(x)).abs() < 1e-13);
            assert!((d - (-1.0 + 6.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn morley_dofs_are_dual() {
        let p: [[f64; 2]; 3] = [[0.1, 0.0], [1.0, 0.2], [0.3, 0.9]];
        let normals: [[f64; 2]; 3] = std::array::from_fn(|k| {
            let q = p[(k + 1) % 3];
            let (dx, dy) = (q[0] - p[k][0], q[1] - p[k][1]);
            let l = (dx * dx + dy * dy).sqrt();
            [-dy / l, dx / l]
        });
        let el = MorleyElement::new(&p, &normals).unwrap();
        for i in 0..6 {
            for k in 0..3 {
                let v = el.values(p[k])[i];
                assert!((v - if i == k { 1.0 } else { 0.0 }).abs() < 1e-12);
                let q = p[(k + 1) % 3];
                let g = el.gradients([0.5 * (p[k][0] + q[0]), 0.5 * (p[k][1] + q[1])])[i];
                let dn = g[0] * normals[k][0] + g[1] * normals[k][1];
                assert!((dn - if i == 3 + k { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
