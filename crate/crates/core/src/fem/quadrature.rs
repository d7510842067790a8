//! Quadrature rules on the reference interval `[-1, 1]`, square `[-1, 1]^2`
//! and triangle with vertices `(0, 0), (1, 0), (0, 1)`.

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

fn gauss_points_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let g = 1.0 / 3f64.sqrt();
            (vec![-g, g], vec![1.0, 1.0])
        }
        3 => {
            let g = (0.6f64).sqrt();
            (vec![-g, 0.0, g], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => panic!("Gauss rule with {n} points is not tabulated"),
    }
}

/// `n`-point Gauss rule on `[-1, 1]` (second coordinate unused).
pub fn gauss_1d(n: usize) -> QuadratureRule {
    let (x, w) = gauss_points_1d(n);
    QuadratureRule { points: x.iter().map(|&p| [p, 0.0]).collect(), weights: w, degree: 2 * n - 1 }
}

/// Tensor `n x n` Gauss rule on `[-1, 1]^2`.
pub fn gauss_quad(n: usize) -> QuadratureRule {
    let (x, w) = gauss_points_1d(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    QuadratureRule { points, weights, degree: 2 * n - 1 }
}

/// Three-point interior rule, degree 2.
pub fn triangle_3() -> QuadratureRule {
    let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
    QuadratureRule {
        points: vec![[a, a], [b, a], [a, b]],
        weights: vec![1.0 / 6.0; 3],
        degree: 2,
    }
}

/// Six-point symmetric rule, degree 4.
pub fn triangle_6() -> QuadratureRule {
    let (a1, w1) = (0.445948490915965, 0.223381589678011);
    let (a2, w2) = (0.091576213509771, 0.109951743655322);
    let b1 = 1.0 - 2.0 * a1;
    let b2 = 1.0 - 2.0 * a2;
    QuadratureRule {
        points: vec![[a1, a1], [b1, a1], [a1, b1], [a2, a2], [b2, a2], [a2, b2]],
        weights: [w1, w1, w1, w2, w2, w2].iter().map(|w| 0.5 * w).collect(),
        degree: 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.iter().map(|(p, w)| w * f(p[0], p[1])).sum()
    }

    #[test]
    fn weights_sum_to_measure() {
        for n in 1..=3 {
            assert!((gauss_1d(n).weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            assert!((gauss_quad(n).weights.iter().sum::<f64>() - 4.0).abs() < 1e-14);
        }
        assert!((triangle_3().weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        assert!((triangle_6().weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gauss_exactness() {
        for n in 1..=3 {
            let rule = gauss_1d(n);
            for p in 0..=rule.degree {
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((integrate(&rule, |x, _| x.powi(p as i32)) - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn triangle_exactness() {
        // Integral of x^p y^q over the reference triangle is p! q! / (p + q + 2)!.
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for rule in [triangle_3(), triangle_6()] {
            for p in 0..=rule.degree as u32 {
                for q in 0..=(rule.degree as u32 - p) {
                    let exact = fact(p) * fact(q) / fact(p + q + 2);
                    let got = integrate(&rule, |x, y| x.powi(p as i32) * y.powi(q as i32));
                    assert!((got - exact).abs() < 1e-13, "p={p} q={q}");
                }
            }
        }
    }
}
